//! Simulated dataset: one row per accepted design point.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell_sim::{simulate_discharge, CurvePoint, SimConfig};
use crate::doe::DesignOfExperiments;
use crate::electrode::{properties_from_manufacturing, ElectrodeProperties, ManufacturingParams, PropertyModelConfig};
use crate::error::{Error, Result};
use crate::io;
use crate::scalar::Scalar;

pub const DATASET_COLUMNS: [&str; 13] = [
    "am_pct",
    "sc_pct",
    "cd_pct",
    "porosity",
    "tortuosity",
    "mass_loading",
    "active_area",
    "conductivity",
    "thickness",
    "capacity",
    "t_total",
    "energy_density",
    "power_density",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DatasetRow<T> {
    pub params: ManufacturingParams<T>,
    pub props: ElectrodeProperties<T>,
    /// mAh/cm²
    pub capacity: T,
    /// s
    pub t_total: T,
    /// Wh/kg
    pub energy_density: T,
    /// W/kg
    pub power_density: T,
}

/// A design point that produced no dataset row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Rejection<T> {
    /// Position in the design.
    pub index: usize,
    pub params: ManufacturingParams<T>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset<T> {
    pub rows: Vec<DatasetRow<T>>,
}

/// Output of a design sweep.
#[derive(Debug, Clone)]
pub struct Sweep<T> {
    pub dataset: Dataset<T>,
    pub rejected: Vec<Rejection<T>>,
    /// Discharge curve per dataset row, when requested.
    pub curves: Vec<Vec<CurvePoint<T>>>,
}

enum Outcome<T> {
    Row(DatasetRow<T>, Vec<CurvePoint<T>>),
    Rejected(String),
}

fn run_point<T: Scalar>(
    p: &ManufacturingParams<T>,
    pcfg: &PropertyModelConfig<T>,
    scfg: &SimConfig<T>,
) -> Result<Outcome<T>> {
    let props = match properties_from_manufacturing(p, pcfg) {
        Ok(props) => props,
        Err(e @ (Error::Infeasible(_) | Error::InvalidArgument(_))) => return Ok(Outcome::Rejected(e.to_string())),
        Err(e) => return Err(e),
    };
    let res = match simulate_discharge(&props, scfg) {
        Ok(r) => r,
        Err(e @ Error::InvalidArgument(_)) => return Ok(Outcome::Rejected(e.to_string())),
        Err(e) => return Err(e),
    };
    if !res.is_valid() {
        let tag = serde_json::to_value(res.termination)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        return Ok(Outcome::Rejected(format!("no usable discharge ({tag})")));
    }
    let row = DatasetRow {
        params: *p,
        props,
        capacity: res.capacity_final,
        t_total: res.t_total,
        energy_density: res.energy_density,
        power_density: res.power_density,
    };
    Ok(Outcome::Row(row, res.curve))
}

/// Simulates every design point. Per-point failures become rejections;
/// only configuration errors abort. Row order follows the design.
pub fn run_doe<T: Scalar>(
    doe: &DesignOfExperiments<T>,
    pcfg: &PropertyModelConfig<T>,
    scfg: &SimConfig<T>,
    keep_curves: bool,
) -> Result<Sweep<T>> {
    pcfg.validate()?;
    scfg.validate()?;
    let outcomes: Vec<Result<Outcome<T>>> = doe.points.par_iter().map(|p| run_point(p, pcfg, scfg)).collect();
    let mut sweep = Sweep { dataset: Dataset::default(), rejected: Vec::new(), curves: Vec::new() };
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            Outcome::Row(row, curve) => {
                sweep.dataset.rows.push(row);
                if keep_curves {
                    sweep.curves.push(curve);
                }
            }
            Outcome::Rejected(reason) => sweep.rejected.push(Rejection { index, params: doe.points[index], reason }),
        }
    }
    Ok(sweep)
}

impl<T: Scalar> Dataset<T> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Manufacturing parameters as `[am, sc, cd]` rows.
    pub fn inputs(&self) -> Vec<Vec<T>> {
        self.rows.iter().map(|r| r.params.to_vec()).collect()
    }

    pub fn energy(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.energy_density).collect()
    }

    pub fn power(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.power_density).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Dataset { rows: indices.iter().map(|&i| self.rows[i]).collect() }
    }

    /// Checks finiteness and that no parameter triple repeats.
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            let values = [r.capacity, r.t_total, r.energy_density, r.power_density];
            if values.iter().chain(r.params.to_vec().iter()).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("dataset row {i} has non-finite values")));
            }
        }
        let mut keys: Vec<(usize, Vec<T>)> = self.rows.iter().map(|r| r.params.to_vec()).enumerate().collect();
        keys.sort_by(|a, b| {
            a.1.iter()
                .zip(&b.1)
                .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if let Some(w) = keys.windows(2).find(|w| w[0].1 == w[1].1) {
            return Err(Error::invalid(format!("dataset rows {} and {} share parameters", w[0].0, w[1].0)));
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = io::csv_writer(path)?;
        w.write_record(DATASET_COLUMNS)?;
        for r in &self.rows {
            let p = &r.props;
            let fields = [
                r.params.am_pct,
                r.params.sc_pct,
                r.params.cd_pct,
                p.porosity,
                p.tortuosity,
                p.mass_loading,
                p.active_area,
                p.conductivity,
                p.thickness,
                r.capacity,
                r.t_total,
                r.energy_density,
                r.power_density,
            ];
            w.write_record(fields.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let hundred = T::lit(100.0);
        let rows = io::read_numeric_csv::<T>(path, &DATASET_COLUMNS)?
            .into_iter()
            .map(|v| DatasetRow {
                params: ManufacturingParams::new(v[0], v[1], v[2]),
                props: ElectrodeProperties {
                    porosity: v[3],
                    tortuosity: v[4],
                    mass_loading: v[5],
                    active_area: v[6],
                    conductivity: v[7],
                    thickness: v[8],
                    am_mass_fraction: v[0] / hundred,
                },
                capacity: v[9],
                t_total: v[10],
                energy_density: v[11],
                power_density: v[12],
            })
            .collect();
        let ds = Dataset { rows };
        ds.validate()?;
        Ok(ds)
    }
}

/// Writes one `t,voltage,capacity` CSV per curve as `row_0000.csv`, ...
pub fn write_curves<T: Scalar>(dir: &Path, curves: &[Vec<CurvePoint<T>>]) -> Result<()> {
    for (i, curve) in curves.iter().enumerate() {
        let path = dir.join(curve_file_name(i));
        let mut w = io::csv_writer(&path)?;
        w.write_record(["t", "voltage", "capacity"])?;
        for c in curve {
            w.write_record([c.t.to_string(), c.voltage.to_string(), c.capacity.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn curve_file_name(row: usize) -> String {
    format!("row_{row:04}.csv")
}

pub fn read_curve<T: Scalar>(path: &Path) -> Result<Vec<CurvePoint<T>>> {
    Ok(io::read_numeric_csv::<T>(path, &["t", "voltage", "capacity"])?
        .into_iter()
        .map(|v| CurvePoint { t: v[0], voltage: v[1], capacity: v[2] })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::{ParameterBounds, SaltelliOrder};

    fn small_doe() -> DesignOfExperiments<f64> {
        let b = ParameterBounds::manufacturing_default();
        DesignOfExperiments::sobol_saltelli(&b, 4, 1, SaltelliOrder::First).unwrap()
    }

    #[test]
    fn empty_design_gives_empty_dataset() {
        let b = ParameterBounds::<f64>::manufacturing_default();
        let doe = DesignOfExperiments::explicit(&b, vec![]);
        let s = run_doe(&doe, &PropertyModelConfig::default(), &SimConfig::default(), true).unwrap();
        assert!(s.dataset.is_empty() && s.rejected.is_empty() && s.curves.is_empty());
    }

    #[test]
    fn bookkeeping_and_power_identity() {
        let doe = small_doe();
        let s = run_doe(&doe, &PropertyModelConfig::default(), &SimConfig::default(), true).unwrap();
        assert_eq!(s.dataset.len() + s.rejected.len(), doe.len());
        assert_eq!(s.curves.len(), s.dataset.len());
        for r in &s.dataset.rows {
            let p = r.energy_density / (r.t_total / 3600.0);
            assert!((p - r.power_density).abs() <= 1e-12 * p.abs());
        }
    }

    #[test]
    fn infeasible_point_is_rejected_not_fatal() {
        let b = ParameterBounds::<f64>::manufacturing_default();
        let pts = vec![ManufacturingParams::new(95.0, 60.0, 20.0), ManufacturingParams::new(95.0, 60.0, 99.0)];
        let doe = DesignOfExperiments::explicit(&b, pts);
        let s = run_doe(&doe, &PropertyModelConfig::default(), &SimConfig::default(), false).unwrap();
        assert_eq!(s.dataset.len(), 1);
        assert_eq!(s.rejected.len(), 1);
        assert_eq!(s.rejected[0].index, 1);
    }

    #[test]
    fn csv_round_trip() {
        let s = run_doe(&small_doe(), &PropertyModelConfig::default(), &SimConfig::default(), false).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset.csv");
        s.dataset.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&DATASET_COLUMNS.join(",")));
        let back = Dataset::<f64>::read_csv(&path).unwrap();
        assert_eq!(back.rows, s.dataset.rows);
    }

    #[test]
    fn duplicate_params_rejected() {
        let s = run_doe(&small_doe(), &PropertyModelConfig::default(), &SimConfig::default(), false).unwrap();
        let mut ds = s.dataset.clone();
        ds.rows.push(ds.rows[0]);
        assert!(ds.validate().is_err());
    }
}
