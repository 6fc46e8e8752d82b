use electrode_bo::cell_sim::{lossless_energy_density, simulate_discharge, CurvePoint};
use electrode_bo::dataset::run_doe;
use electrode_bo::doe::SaltelliOrder;
use electrode_bo::electrode::{properties_from_manufacturing, split_active_area, ParticleGroup};
use electrode_bo::{
    DesignOfExperiments, ElectrodeProperties, ManufacturingParams, ParameterBounds, PropertyModelConfig, SimConfig,
};

fn props(am: f64, sc: f64, cd: f64) -> ElectrodeProperties {
    properties_from_manufacturing(&ManufacturingParams::new(am, sc, cd), &PropertyModelConfig::default()).unwrap()
}

/// A thin, open electrode: one tenth of the lightest design's loading.
fn thin_open() -> ElectrodeProperties {
    let mut p = props(96.8, 43.0, 0.0);
    p.mass_loading *= 0.1;
    p.thickness *= 0.1;
    p
}

#[test]
fn thin_electrode_runs_about_an_hour() {
    let r = simulate_discharge(&thin_open(), &SimConfig::default()).unwrap();
    assert!(r.is_valid());
    assert!((r.t_total - 3600.0).abs() <= 0.05 * 3600.0, "t_total {}", r.t_total);
}

#[test]
fn lossless_limit_matches_ocv_integral() {
    let mut cfg = SimConfig::default();
    cfg.kinetic_voltage = 0.0;
    cfg.concentration_voltage = 0.0;
    cfg.contact_resistance = 0.0;
    let mut p = props(95.0, 60.0, 20.0);
    p.conductivity = 1e12;
    let r = simulate_discharge(&p, &cfg).unwrap();
    let ideal = lossless_energy_density(&p, &cfg);
    assert!((r.energy_density - ideal).abs() < 1e-6 * ideal, "{} vs {ideal}", r.energy_density);
}

#[test]
fn energy_bounded_by_lossless_limit() {
    let cfg = SimConfig::default();
    for (am, sc, cd) in [(90.0, 43.0, 1.4), (96.8, 72.8, 38.8), (93.0, 60.0, 20.0)] {
        let p = props(am, sc, cd);
        let r = simulate_discharge(&p, &cfg).unwrap();
        assert!(r.energy_density >= 0.0 && r.energy_density <= lossless_energy_density(&p, &cfg));
    }
}

#[test]
fn halving_the_step_barely_moves_energy() {
    let p = props(95.0, 65.0, 20.0);
    let coarse = simulate_discharge(&p, &SimConfig::default()).unwrap();
    let fine = simulate_discharge(&p, &SimConfig { dt: 0.5, ..SimConfig::default() }).unwrap();
    assert!((coarse.energy_density - fine.energy_density).abs() < 1e-3 * fine.energy_density);
}

#[test]
fn capacity_falls_with_tortuosity() {
    let cfg = SimConfig::default();
    let base = props(95.0, 68.0, 15.0);
    let caps: Vec<f64> = (0..12)
        .map(|i| {
            let mut p = base;
            p.tortuosity = base.tortuosity * (1.0 + 0.25 * i as f64);
            simulate_discharge(&p, &cfg).unwrap().capacity_final
        })
        .collect();
    assert!(caps.windows(2).all(|w| w[1] <= w[0]), "{caps:?}");
    assert!(caps[11] < caps[0]);
}

#[test]
fn curve_integral_by_trapezoid() {
    let curve: Vec<CurvePoint<f64>> = [(0.0, 4.0), (3600.0, 3.2)]
        .iter()
        .map(|&(t, voltage)| CurvePoint { t, voltage, capacity: 0.0 })
        .collect();
    let e = electrode_bo::cell_sim::energy_density(&curve, 1.0, 1.0).unwrap();
    assert!((e - 3.6).abs() < 1e-12);
}

#[test]
fn property_trends() {
    let cfg = PropertyModelConfig::default();
    let at = |am, sc, cd| props(am, sc, cd);
    assert!(at(94.0, 60.0, 20.0).mass_loading > at(94.0, 50.0, 20.0).mass_loading);
    let (hi, lo) = (at(94.0, 60.0, 30.0), at(94.0, 60.0, 10.0));
    assert!(hi.porosity < lo.porosity && hi.tortuosity > lo.tortuosity);
    assert!(hi.thickness < lo.thickness && hi.conductivity > lo.conductivity);
    assert!(at(96.0, 60.0, 20.0).thickness < at(91.0, 60.0, 20.0).thickness);
    assert!(at(96.0, 60.0, 20.0).active_area > at(91.0, 60.0, 20.0).active_area);
    assert_eq!(at(94.0, 60.0, 0.0).porosity, cfg.porosity_uncalendered(60.0));
}

#[test]
fn calendering_keeps_solid_volume() {
    let a = props(93.0, 55.0, 5.0);
    let b = props(93.0, 55.0, 35.0);
    assert!(((1.0 - a.porosity) * a.thickness - (1.0 - b.porosity) * b.thickness).abs() < 1e-10);
}

#[test]
fn active_area_split_example() {
    let groups = vec![
        ParticleGroup { radius: 1.0, count: 4.0, volume_fraction: 0.5 },
        ParticleGroup { radius: 2.0, count: 1.0, volume_fraction: 0.5 },
    ];
    let parts: Vec<f64> = split_active_area(10.0, 0.3, &groups).unwrap();
    assert!((parts[0] - 1.5).abs() < 1e-12 && (parts[1] - 1.5).abs() < 1e-12);
}

#[test]
fn sweep_rows_satisfy_power_identity_and_repeat() {
    let bounds = ParameterBounds::manufacturing_default();
    let doe = DesignOfExperiments::sobol_saltelli(&bounds, 32, 1, SaltelliOrder::First).unwrap();
    let pcfg = PropertyModelConfig::default();
    let scfg = SimConfig::default();
    let a = run_doe(&doe, &pcfg, &scfg, true).unwrap();
    assert_eq!(a.dataset.len() + a.rejected.len(), doe.len());
    assert_eq!(a.curves.len(), a.dataset.len());
    for r in &a.dataset.rows {
        assert_eq!(r.power_density, r.energy_density / (r.t_total / 3600.0));
    }
    let b = run_doe(&doe, &pcfg, &scfg, false).unwrap();
    assert_eq!(a.dataset, b.dataset);

    let empty = DesignOfExperiments::explicit(&bounds, Vec::new());
    assert!(run_doe(&empty, &pcfg, &scfg, false).unwrap().dataset.is_empty());
}
