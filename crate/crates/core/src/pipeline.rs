//! Stage runners behind the command-line tool. Every stage reads and writes
//! files in one run directory; see [`files`] for the names.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bayes_opt::{optimize, BoResult};
use crate::config::{DoeGenerator, PipelineConfig};
use crate::dataset::{self, read_curve, run_doe, Dataset, Rejection};
use crate::doe::{sobol_sequence, DesignOfExperiments, ParameterBounds};
use crate::electrode::{properties_from_manufacturing, ManufacturingParams};
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::io;
use crate::objective::{FitnessScaler, ObjectiveSpec, Prediction, Scenario};
use crate::seed::derive_seed;
use crate::validation::{ci95_resampling, ValidationReport};

pub mod files {
    pub const DOE: &str = "doe.csv";
    pub const DOE_META: &str = "doe.json";
    pub const DATASET: &str = "dataset.csv";
    pub const REJECTED: &str = "rejected.json";
    pub const CURVES: &str = "curves";
    pub const MODEL_E: &str = "model_e.json";
    pub const MODEL_P: &str = "model_p.json";
    pub const SCALER: &str = "fitness_scaler.json";
    pub const VALIDATION_JSON: &str = "validation.json";
    pub const VALIDATION_MD: &str = "validation.md";
    pub const SCENARIOS: &str = "scenarios.csv";
    pub const PLOT_CURVES: &str = "plot_discharge_curves.csv";
    pub const PLOT_E_VS_P: &str = "plot_e_vs_p.csv";
    pub const PLOT_SCENARIOS: &str = "plot_scenarios.csv";

    pub fn bo_result(scenario: &str) -> String {
        format!("bo_{scenario}.json")
    }

    pub fn bo_trace(scenario: &str) -> String {
        format!("bo_{scenario}_trace.csv")
    }
}

#[derive(Debug)]
pub struct DoeOutcome {
    pub doe: DesignOfExperiments<f64>,
    pub rejected: Vec<(ManufacturingParams<f64>, String)>,
}

/// Generates the design, drops points the property model rejects and writes
/// `doe.csv` and `doe.json`.
pub fn doe_stage(cfg: &PipelineConfig, out: &Path) -> Result<DoeOutcome> {
    let mut doe = match cfg.doe.generator {
        DoeGenerator::SobolSaltelli => {
            DesignOfExperiments::sobol_saltelli(&cfg.bounds, cfg.doe.base_samples, cfg.doe.skip, cfg.doe.order)?
        }
        DoeGenerator::LatinHypercube => {
            DesignOfExperiments::latin_hypercube(&cfg.bounds, cfg.doe.lhs_points, derive_seed(cfg.seed, "doe", 0))?
        }
    };
    let rejected = doe.retain_feasible(|p| properties_from_manufacturing(p, &cfg.property_model).map(|_| ()));
    doe.write_csv(&out.join(files::DOE))?;
    doe.write_metadata(&out.join(files::DOE_META))?;
    Ok(DoeOutcome { doe, rejected })
}

#[derive(Debug)]
pub struct SimulateOutcome {
    pub dataset: Dataset<f64>,
    pub rejected: Vec<Rejection<f64>>,
}

/// Simulates every row of `doe_path`; writes `dataset.csv`, `rejected.json`
/// and, with `curves`, one file per dataset row under `curves/`.
pub fn simulate_stage(cfg: &PipelineConfig, doe_path: &Path, out: &Path, curves: bool) -> Result<SimulateOutcome> {
    let doe = DesignOfExperiments::read_csv(doe_path, &cfg.bounds)?;
    let sweep = run_doe(&doe, &cfg.property_model, &cfg.simulation, curves)?;
    sweep.dataset.write_csv(&out.join(files::DATASET))?;
    io::write_json(&out.join(files::REJECTED), &sweep.rejected)?;
    if curves {
        dataset::write_curves(&out.join(files::CURVES), &sweep.curves)?;
    }
    Ok(SimulateOutcome { dataset: sweep.dataset, rejected: sweep.rejected })
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub report: ValidationReport,
    pub scaler: FitnessScaler<f64>,
}

/// Resampling validation, then the final E and P models on the full dataset
/// and the fitness scaler for the optimizer.
pub fn train_stage(cfg: &PipelineConfig, dataset_path: &Path, out: &Path) -> Result<TrainOutcome> {
    let ds = Dataset::<f64>::read_csv(dataset_path)?;
    ds.validate()?;
    let report = ci95_resampling(&ds, &cfg.gp, &cfg.validation, derive_seed(cfg.seed, "validation", 0))?;
    let x = ds.inputs();
    let model_e = GpModel::fit(&x, &ds.energy(), &cfg.gp)?;
    let model_p = GpModel::fit(&x, &ds.power(), &cfg.gp)?;
    let scaler = fitness_scaler(cfg, &ds, &model_e, &model_p)?;

    model_e.save(&out.join(files::MODEL_E))?;
    model_p.save(&out.join(files::MODEL_P))?;
    io::write_json(&out.join(files::SCALER), &scaler)?;
    report.write_json(&out.join(files::VALIDATION_JSON))?;
    report.write_markdown(&out.join(files::VALIDATION_MD))?;
    Ok(TrainOutcome { report, scaler })
}

/// Dataset min–max, widened to the surrogates' extremes over the bounds so
/// that optima beyond the sampled range are not clipped flat. Extremes come
/// from a Sobol' probe plus a 5-level factorial grid, each refined by a
/// compass search from the best few probe points.
pub fn fitness_scaler(
    cfg: &PipelineConfig,
    ds: &Dataset<f64>,
    model_e: &GpModel<f64>,
    model_p: &GpModel<f64>,
) -> Result<FitnessScaler<f64>> {
    let mut scaler = FitnessScaler::fit(&ds.energy(), &ds.power())?;
    let n = cfg.objective.scaler_probe_points;
    if n > 0 {
        let d = cfg.bounds.dim();
        let mut unit: Vec<Vec<f64>> = sobol_sequence::<f64>(d, n, 0)?.into_iter().map(|u| u.into_inner()).collect();
        const LEVELS: usize = 5;
        for mut k in 0..LEVELS.pow(d as u32) {
            let mut u = Vec::with_capacity(d);
            for _ in 0..d {
                u.push((k % LEVELS) as f64 / (LEVELS - 1) as f64);
                k /= LEVELS;
            }
            unit.push(u);
        }
        let e = extremes(model_e, &cfg.bounds, &unit)?;
        let p = extremes(model_p, &cfg.bounds, &unit)?;
        scaler.widen([(e.0, p.0), (e.1, p.1)]);
    }
    scaler.validate()?;
    Ok(scaler)
}

/// (min, max) of the posterior mean over the unit-cube `probe`, each refined
/// from the best `STARTS` probe points.
fn extremes(model: &GpModel<f64>, bounds: &ParameterBounds<f64>, probe: &[Vec<f64>]) -> Result<(f64, f64)> {
    const STARTS: usize = 8;
    let f = |u: &[f64]| -> Result<f64> { model.predict_mean(&bounds.scale(u)?) };
    let values = probe.iter().map(|u| f(u)).collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..probe.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut lo = values[order[0]];
    let mut hi = values[order[order.len() - 1]];
    for &i in order.iter().take(STARTS) {
        lo = lo.min(-compass_max(&|u| f(u).map(|v| -v), &probe[i])?);
    }
    for &i in order.iter().rev().take(STARTS) {
        hi = hi.max(compass_max(&f, &probe[i])?);
    }
    Ok((lo, hi))
}

/// Maximizes `f` over the unit cube from `start` by coordinate steps that
/// halve whenever no step improves.
fn compass_max(f: &dyn Fn(&[f64]) -> Result<f64>, start: &[f64]) -> Result<f64> {
    let mut x = start.to_vec();
    let mut best = f(&x)?;
    let mut step = 0.1;
    while step > 1e-7 {
        let mut moved = false;
        for j in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[j] = (y[j] + dir * step).clamp(0.0, 1.0);
                if y[j] == x[j] {
                    continue;
                }
                let v = f(&y)?;
                if v > best {
                    best = v;
                    x = y;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok(best)
}

/// Row of `scenarios.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario: String,
    pub w_energy: f64,
    pub w_power: f64,
    pub am_pct: f64,
    pub sc_pct: f64,
    pub cd_pct: f64,
    pub energy_density: f64,
    pub power_density: f64,
    pub cost: f64,
}

/// Contents of `bo_<scenario>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub scenario: Scenario<f64>,
    pub seed: u64,
    pub x_best: ManufacturingParams<f64>,
    pub predicted: Prediction<f64>,
    pub result: BoResult<f64>,
}

impl ScenarioOutcome {
    pub fn row(&self) -> ScenarioRow {
        ScenarioRow {
            scenario: self.scenario.name.clone(),
            w_energy: self.scenario.weights.w_energy,
            w_power: self.scenario.weights.w_power,
            am_pct: self.x_best.am_pct,
            sc_pct: self.x_best.sc_pct,
            cd_pct: self.x_best.cd_pct,
            energy_density: self.predicted.energy_density,
            power_density: self.predicted.power_density,
            cost: self.result.c_best,
        }
    }
}

/// Loads the trained models from `models_dir`, optimizes each named scenario
/// (all configured ones when `names` is empty) and writes the per-scenario
/// results plus the combined `scenarios.csv`.
pub fn optimize_stage(
    cfg: &PipelineConfig,
    models_dir: &Path,
    out: &Path,
    names: &[String],
) -> Result<Vec<ScenarioOutcome>> {
    let scenarios: Vec<&Scenario<f64>> = if names.is_empty() {
        cfg.scenarios.iter().collect()
    } else {
        names.iter().map(|n| cfg.scenario(n)).collect::<Result<_>>()?
    };
    let needed = [files::MODEL_E, files::MODEL_P, files::SCALER];
    require(models_dir, &needed)?;
    let model_e = GpModel::load(&models_dir.join(files::MODEL_E))?;
    let model_p = GpModel::load(&models_dir.join(files::MODEL_P))?;
    let scaler: FitnessScaler<f64> = io::read_json(&models_dir.join(files::SCALER))?;
    let base = ObjectiveSpec::new(model_e, model_p, scaler, cfg.scenarios[0].weights, cfg.bounds.clone())?;

    let mut outcomes = Vec::with_capacity(scenarios.len());
    for s in scenarios {
        let spec = base.with_weights(s.weights)?;
        let seed = derive_seed(cfg.seed, &format!("optimize/{}", s.name), 0);
        let result = optimize(&spec, &cfg.bounds, &cfg.optimization, seed)?;
        let outcome = ScenarioOutcome {
            scenario: s.clone(),
            seed,
            x_best: ManufacturingParams::from_slice(&result.x_best),
            predicted: spec.predict(&result.x_best)?,
            result,
        };
        io::write_json(&out.join(files::bo_result(&s.name)), &outcome)?;
        outcome.result.write_trace_csv(&out.join(files::bo_trace(&s.name)))?;
        outcomes.push(outcome);
    }
    let mut w = io::csv_writer(&out.join(files::SCENARIOS))?;
    for o in &outcomes {
        w.serialize(o.row())?;
    }
    w.flush().map_err(|e| Error::io(out.join(files::SCENARIOS), e))?;
    Ok(outcomes)
}

fn require(dir: &Path, names: &[&str]) -> Result<()> {
    let missing: Vec<String> = names
        .iter()
        .map(|n| dir.join(n))
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingArtifacts(missing))
    }
}

pub fn read_scenarios(path: &Path) -> Result<Vec<ScenarioRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Writes the three plot-data files into `run_dir` and returns their paths.
/// Fails with the full list of missing inputs, curves included.
pub fn report_stage(run_dir: &Path) -> Result<Vec<PathBuf>> {
    require(run_dir, &[files::DATASET, files::SCENARIOS, files::CURVES])?;
    let ds = Dataset::<f64>::read_csv(&run_dir.join(files::DATASET))?;
    let curve_dir = run_dir.join(files::CURVES);
    let curve_paths: Vec<PathBuf> = (0..ds.len()).map(|i| curve_dir.join(dataset::curve_file_name(i))).collect();
    let missing: Vec<String> = curve_paths
        .iter()
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts(missing));
    }
    let scenarios = read_scenarios(&run_dir.join(files::SCENARIOS))?;

    let curves_out = run_dir.join(files::PLOT_CURVES);
    let mut w = io::csv_writer(&curves_out)?;
    w.write_record(["row", "mass_loading", "t", "voltage", "capacity"])?;
    for (i, path) in curve_paths.iter().enumerate() {
        let loading = ds.rows[i].props.mass_loading.to_string();
        for pt in read_curve::<f64>(path)? {
            w.write_record([i.to_string(), loading.clone(), pt.t.to_string(), pt.voltage.to_string(), pt.capacity.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(&curves_out, e))?;

    let scatter_out = run_dir.join(files::PLOT_E_VS_P);
    let mut w = io::csv_writer(&scatter_out)?;
    w.write_record(["row", "am_pct", "sc_pct", "cd_pct", "mass_loading", "energy_density", "power_density"])?;
    for (i, r) in ds.rows.iter().enumerate() {
        let v = [r.params.am_pct, r.params.sc_pct, r.params.cd_pct, r.props.mass_loading, r.energy_density, r.power_density];
        let mut rec = vec![i.to_string()];
        rec.extend(v.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&scatter_out, e))?;

    let bars_out = run_dir.join(files::PLOT_SCENARIOS);
    let mut w = io::csv_writer(&bars_out)?;
    w.write_record(["scenario", "w_power", "energy_density", "power_density", "am_pct", "sc_pct", "cd_pct"])?;
    for s in &scenarios {
        let v = [s.w_power, s.energy_density, s.power_density, s.am_pct, s.sc_pct, s.cd_pct];
        let mut rec = vec![s.scenario.clone()];
        rec.extend(v.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&bars_out, e))?;
    Ok(vec![curves_out, scatter_out, bars_out])
}
