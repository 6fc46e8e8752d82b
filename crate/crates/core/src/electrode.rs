//! Empirical map from manufacturing parameters to the six electrode
//! properties consumed by the discharge simulator.
//!
//! The functional forms are deliberately simple closed forms whose
//! monotone directions follow the observed manufacturing trends: solid
//! content sets the mass loading, calendering trades porosity for
//! tortuosity and compactness, and a higher active-material fraction gives
//! thinner electrodes with more reactive surface. Magnitudes are not
//! calibrated against microstructure data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One point of the manufacturing space (all values in percent).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManufacturingParams<T> {
    /// Active-material mass fraction of the dry electrode.
    pub am_pct: T,
    /// Solid content of the slurry.
    pub sc_pct: T,
    /// Calendering compression degree (relative thickness reduction).
    pub cd_pct: T,
}

impl<T: Scalar> ManufacturingParams<T> {
    pub fn new(am_pct: T, sc_pct: T, cd_pct: T) -> Self {
        Self {
            am_pct,
            sc_pct,
            cd_pct,
        }
    }

    /// From `[am, sc, cd]`; panics on a slice of another length.
    pub fn from_slice(x: &[T]) -> Self {
        assert_eq!(x.len(), 3, "manufacturing point has three coordinates");
        Self::new(x[0], x[1], x[2])
    }

    pub fn to_vec(&self) -> Vec<T> {
        vec![self.am_pct, self.sc_pct, self.cd_pct]
    }

    pub fn validate(&self) -> Result<()> {
        let hundred = T::lit(100.0);
        let ok = |v: T| v.is_finite();
        if !(ok(self.am_pct) && ok(self.sc_pct) && ok(self.cd_pct)) {
            return Err(Error::invalid("manufacturing parameters must be finite"));
        }
        if !(self.am_pct > T::zero() && self.am_pct < hundred) {
            return Err(Error::invalid(format!("am_pct {} outside (0, 100)", self.am_pct)));
        }
        if !(self.sc_pct > T::zero() && self.sc_pct <= hundred) {
            return Err(Error::invalid(format!("sc_pct {} outside (0, 100]", self.sc_pct)));
        }
        if !(self.cd_pct >= T::zero() && self.cd_pct < hundred) {
            return Err(Error::invalid(format!("cd_pct {} outside [0, 100)", self.cd_pct)));
        }
        Ok(())
    }
}

/// Properties of a calendered electrode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodeProperties<T> {
    /// Electrolyte-accessible pore fraction (CBD nanopores excluded).
    pub porosity: T,
    /// Tortuosity factor of the pore network, >= 1.
    pub tortuosity: T,
    /// Dry coating mass per area, mg/cm².
    pub mass_loading: T,
    /// AM/electrolyte interface area per electrode volume, 1/m.
    pub active_area: T,
    /// Effective electronic conductivity, S/m.
    pub conductivity: T,
    /// Coating thickness, µm.
    pub thickness: T,
    /// Active-material share of the dry coating mass (0..1); carried along
    /// so the simulator can size capacity and mass.
    pub am_mass_fraction: T,
}

impl<T: Scalar> ElectrodeProperties<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass_loading", self.mass_loading),
            ("active_area", self.active_area),
            ("conductivity", self.conductivity),
            ("thickness", self.thickness),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.porosity > T::zero() && self.porosity < T::one()) {
            return Err(Error::invalid(format!("porosity {} outside (0, 1)", self.porosity)));
        }
        if !(self.tortuosity >= T::one() && self.tortuosity.is_finite()) {
            return Err(Error::invalid(format!("tortuosity {} below 1", self.tortuosity)));
        }
        if !(self.am_mass_fraction > T::zero() && self.am_mass_fraction <= T::one()) {
            return Err(Error::invalid("am_mass_fraction outside (0, 1]"));
        }
        Ok(())
    }
}

/// A size class of active-material particles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleGroup<T> {
    /// Radius, µm.
    pub radius: T,
    /// Relative particle count.
    pub count: T,
    /// Share of the active-material volume.
    pub volume_fraction: T,
}

/// Constants of the empirical property model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertyModelConfig<T> {
    pub version: u32,
    /// `mass_loading = intercept + slope·sc_pct`, mg/cm².
    pub mass_loading_intercept: T,
    pub mass_loading_slope: T,
    /// Uncalendered porosity at `porosity_sc_ref`.
    pub porosity_uncalendered: T,
    /// Change of uncalendered porosity per SC% point.
    pub porosity_sc_slope: T,
    pub porosity_sc_ref: T,
    /// Points with porosity at or below this are infeasible.
    pub porosity_min: T,
    /// `tortuosity = porosity^(1 − b)·(1 + β·(1 − am_fraction))`.
    pub bruggeman_exponent: T,
    /// β: extra tortuosity from the carbon-binder domain, which blocks ion
    /// transport, per unit CBD mass fraction.
    pub tortuosity_cbd_factor: T,
    /// `σ = σ_ref·(100 − am)^γ·(1 − ε)^δ`, S/m.
    pub conductivity_ref: T,
    pub conductivity_cbd_exponent: T,
    pub conductivity_solid_exponent: T,
    /// `a_v = scale·(intercept + slope·am_pct)`, 1/m.
    pub area_scale: T,
    pub area_intercept: T,
    pub area_slope: T,
    /// Skeletal densities, g/cm³.
    pub am_density: T,
    pub cbd_density: T,
    pub particle_groups: Vec<ParticleGroup<T>>,
}

impl<T: Scalar> Default for PropertyModelConfig<T> {
    fn default() -> Self {
        let l = T::lit;
        Self {
            version: 1,
            mass_loading_intercept: l(-23.0),
            mass_loading_slope: l(0.8),
            porosity_uncalendered: l(0.60),
            porosity_sc_slope: l(0.0),
            porosity_sc_ref: l(43.0),
            porosity_min: l(0.05),
            bruggeman_exponent: l(1.5),
            tortuosity_cbd_factor: l(2.0),
            conductivity_ref: l(2.0),
            conductivity_cbd_exponent: l(1.0),
            conductivity_solid_exponent: l(2.0),
            area_scale: l(1.0e4),
            area_intercept: l(-60.0),
            area_slope: l(1.0),
            am_density: l(4.75),
            cbd_density: l(1.9),
            particle_groups: default_particle_groups(),
        }
    }
}

/// Six radius classes sharing one size-distribution profile. The volume
/// shares are placeholders, not measured values.
pub fn default_particle_groups<T: Scalar>() -> Vec<ParticleGroup<T>> {
    let radii = [1.5, 2.5, 3.5, 4.5, 5.5, 6.5];
    let shares = [0.05, 0.15, 0.25, 0.25, 0.20, 0.10];
    radii
        .iter()
        .zip(shares)
        .map(|(&r, s)| ParticleGroup {
            radius: T::lit(r),
            // count ∝ volume share / r³, normalised to the smallest class
            count: T::lit(s / (r * r * r) / (0.05 / (1.5 * 1.5 * 1.5))),
            volume_fraction: T::lit(s),
        })
        .collect()
}

impl<T: Scalar> PropertyModelConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass_loading_slope", self.mass_loading_slope),
            ("porosity_uncalendered", self.porosity_uncalendered),
            ("porosity_min", self.porosity_min),
            ("bruggeman_exponent", self.bruggeman_exponent),
            ("conductivity_ref", self.conductivity_ref),
            ("area_scale", self.area_scale),
            ("area_slope", self.area_slope),
            ("am_density", self.am_density),
            ("cbd_density", self.cbd_density),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::Config(format!("property model `{name}` must be positive")));
            }
        }
        if !(self.tortuosity_cbd_factor.is_finite() && self.tortuosity_cbd_factor >= T::zero()) {
            return Err(Error::Config("property model `tortuosity_cbd_factor` must be non-negative".into()));
        }
        if self.bruggeman_exponent < T::one() {
            return Err(Error::Config("bruggeman_exponent must be >= 1".into()));
        }
        if self.porosity_uncalendered >= T::one() || self.porosity_min >= T::one() {
            return Err(Error::Config("porosities must be below 1".into()));
        }
        if self.particle_groups.is_empty() {
            return Err(Error::Config("at least one particle group is required".into()));
        }
        Ok(())
    }

    /// Coating mass per area from the slurry solid content.
    pub fn mass_loading(&self, sc_pct: T) -> T {
        self.mass_loading_intercept + self.mass_loading_slope * sc_pct
    }

    /// Porosity of the dried, uncalendered coating.
    pub fn porosity_uncalendered(&self, sc_pct: T) -> T {
        self.porosity_uncalendered + self.porosity_sc_slope * (sc_pct - self.porosity_sc_ref)
    }

    /// Skeletal density of the AM/CBD mixture at `am_fraction` (0..1).
    pub fn solid_density(&self, am_fraction: T) -> T {
        T::one() / (am_fraction / self.am_density + (T::one() - am_fraction) / self.cbd_density)
    }
}

/// Electrode properties after drying and calendering.
///
/// Calendering conserves solid volume, so `(1 − ε)·L` does not depend on
/// `cd_pct`: `ε = 1 − (1 − ε₀)/(1 − cd/100)`.
pub fn properties_from_manufacturing<T: Scalar>(
    params: &ManufacturingParams<T>,
    cfg: &PropertyModelConfig<T>,
) -> Result<ElectrodeProperties<T>> {
    params.validate()?;
    let one = T::one();
    let hundred = T::lit(100.0);
    let am_fraction = params.am_pct / hundred;

    let mass_loading = cfg.mass_loading(params.sc_pct);
    if !(mass_loading > T::zero()) {
        return Err(Error::Infeasible(format!(
            "non-positive mass loading {mass_loading} at sc_pct {}",
            params.sc_pct
        )));
    }
    let eps0 = cfg.porosity_uncalendered(params.sc_pct);
    if !(eps0 > T::zero() && eps0 < one) {
        return Err(Error::Infeasible(format!("uncalendered porosity {eps0} outside (0, 1)")));
    }
    let porosity = one - (one - eps0) / (one - params.cd_pct / hundred);
    if porosity <= cfg.porosity_min {
        return Err(Error::Infeasible(format!(
            "porosity {porosity:.4} at or below minimum {}",
            cfg.porosity_min
        )));
    }

    // mg/cm² ÷ g/cm³ = 10 µm
    let thickness = T::lit(10.0) * mass_loading / ((one - porosity) * cfg.solid_density(am_fraction));
    let tortuosity = porosity.powf(one - cfg.bruggeman_exponent) * (one + cfg.tortuosity_cbd_factor * (one - am_fraction));
    let conductivity = cfg.conductivity_ref
        * (hundred - params.am_pct).powf(cfg.conductivity_cbd_exponent)
        * (one - porosity).powf(cfg.conductivity_solid_exponent);
    let active_area = cfg.area_scale * (cfg.area_intercept + cfg.area_slope * params.am_pct);
    if !(active_area > T::zero()) {
        return Err(Error::Infeasible(format!("non-positive active area at am_pct {}", params.am_pct)));
    }

    Ok(ElectrodeProperties {
        porosity,
        tortuosity,
        mass_loading,
        active_area,
        conductivity,
        thickness,
        am_mass_fraction: am_fraction,
    })
}

/// Splits the total specific active area over particle size classes:
/// `a_{v,n} = r_n²·n_n / Σ_m r_m²·n_m · a_v·ε`.
///
/// `volume_fraction` is the `ε` factor of that expression. It is supplied
/// by the caller because it can be read either as the active-material
/// volume fraction or as the electrode porosity; the per-group values
/// therefore sum to `a_v·ε`, not `a_v`.
pub fn split_active_area<T: Scalar>(
    active_area: T,
    volume_fraction: T,
    groups: &[ParticleGroup<T>],
) -> Result<Vec<T>> {
    if groups.is_empty() {
        return Err(Error::invalid("no particle groups"));
    }
    if groups.iter().any(|g| !(g.radius > T::zero()) || g.count < T::zero()) {
        return Err(Error::invalid("particle groups need radius > 0 and count >= 0"));
    }
    let weights: Vec<T> = groups.iter().map(|g| g.radius * g.radius * g.count).collect();
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::invalid("all particle counts are zero"));
    }
    Ok(weights
        .into_iter()
        .map(|w| w / total * active_area * volume_fraction)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn props(am: f64, sc: f64, cd: f64) -> ElectrodeProperties<f64> {
        properties_from_manufacturing(&ManufacturingParams::new(am, sc, cd), &Default::default())
            .unwrap()
    }

    #[test]
    fn no_compression_keeps_uncalendered_porosity() {
        let cfg = PropertyModelConfig::<f64>::default();
        let p = props(95.0, 60.0, 0.0);
        assert_eq!(p.porosity, cfg.porosity_uncalendered(60.0));
    }

    #[test]
    fn solid_content_raises_mass_loading() {
        assert!(props(95.0, 60.0, 10.0).mass_loading > props(95.0, 50.0, 10.0).mass_loading);
    }

    #[test]
    fn calendering_trends() {
        let lo = props(95.0, 60.0, 10.0);
        let hi = props(95.0, 60.0, 30.0);
        assert!(hi.porosity < lo.porosity);
        assert!(hi.tortuosity > lo.tortuosity);
        assert!(hi.thickness < lo.thickness);
        assert!(hi.conductivity > lo.conductivity);
    }

    #[test]
    fn heavy_compression_is_infeasible() {
        let r = properties_from_manufacturing(
            &ManufacturingParams::new(95.0, 43.0, 80.0),
            &PropertyModelConfig::default(),
        );
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn out_of_range_params_rejected() {
        let cfg = PropertyModelConfig::default();
        for p in [
            ManufacturingParams::new(0.0, 50.0, 10.0),
            ManufacturingParams::new(100.0, 50.0, 10.0),
            ManufacturingParams::new(95.0, 50.0, -1.0),
            ManufacturingParams::new(95.0, 50.0, 100.0),
        ] {
            assert!(properties_from_manufacturing(&p, &cfg).is_err());
        }
    }

    #[test]
    fn split_single_group() {
        let g = [ParticleGroup { radius: 3.0, count: 7.0, volume_fraction: 1.0 }];
        assert_eq!(split_active_area(10.0, 0.3, &g).unwrap(), vec![10.0 * 0.3]);
    }

    #[test]
    fn split_symmetric_groups() {
        let g = ParticleGroup { radius: 2.0, count: 5.0, volume_fraction: 0.5 };
        let out = split_active_area(8.0, 0.5, &[g, g]).unwrap();
        assert_eq!(out, vec![2.0, 2.0]);
    }

    #[test]
    fn split_weighted_groups() {
        let groups = [
            ParticleGroup { radius: 1.0, count: 4.0, volume_fraction: 0.5 },
            ParticleGroup { radius: 2.0, count: 1.0, volume_fraction: 0.5 },
        ];
        let out = split_active_area::<f64>(10.0, 0.3, &groups).unwrap();
        assert!((out[0] - 1.5).abs() < 1e-15 && (out[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn split_errors() {
        assert!(split_active_area::<f64>(1.0, 0.5, &[]).is_err());
        let zero = ParticleGroup { radius: 1.0, count: 0.0, volume_fraction: 1.0 };
        assert!(split_active_area(1.0, 0.5, &[zero, zero]).is_err());
    }

    #[test]
    fn default_groups_are_consistent() {
        let groups = default_particle_groups::<f64>();
        assert_eq!(groups.len(), 6);
        let total: f64 = groups.iter().map(|g| g.volume_fraction).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
