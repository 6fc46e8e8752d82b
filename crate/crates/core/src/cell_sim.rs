//! Reduced-order galvanostatic discharge of a single porous electrode.
//!
//! The terminal voltage is the open-circuit voltage at the current depth of
//! discharge minus three overpotentials:
//!
//! * ohmic: `I·(L/σ + R_contact)`;
//! * Faradaic: `v_kin·asinh(j / 2i₀)` with local surface current
//!   `j = I/(a_v·L)`;
//! * liquid-phase transport: `−k_T·(1 + t₊)·ln(1 − I/I_lim(q))`, where
//!   `I_lim(q) = κ·(ε/τ)/L / (θ₀ + q)`. The `θ₀ + q` factor models the
//!   reaction front moving away from the separator as depth of discharge
//!   `q` grows, so thick or tortuous electrodes run into the transport
//!   limit before their active material is exhausted.
//!
//! Solid-state diffusion is omitted since the particle size distribution is
//! the same for every electrode. Time stepping is explicit with a fixed
//! step; the cut-off crossing inside the last step is located by linear
//! interpolation.

use serde::{Deserialize, Serialize};

use crate::electrode::ElectrodeProperties;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const SECONDS_PER_HOUR: f64 = 3600.0;

/// Open-circuit voltage as a function of depth of discharge, piecewise
/// linear between `(depth, volts)` knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OcvTable<T>(Vec<[T; 2]>);

impl<T: Scalar> OcvTable<T> {
    pub fn new(points: Vec<[T; 2]>) -> Result<Self> {
        let t = Self(points);
        t.validate()?;
        Ok(t)
    }

    /// Placeholder NMC111 curve from 4.3 V (charged) to 3.2 V (empty).
    pub fn nmc111_placeholder() -> Self {
        const KNOTS: [[f64; 2]; 15] = [
            [0.00, 4.30],
            [0.02, 4.18],
            [0.05, 4.10],
            [0.10, 4.03],
            [0.20, 3.94],
            [0.30, 3.86],
            [0.40, 3.80],
            [0.50, 3.75],
            [0.60, 3.71],
            [0.70, 3.67],
            [0.80, 3.62],
            [0.90, 3.55],
            [0.95, 3.48],
            [0.98, 3.38],
            [1.00, 3.20],
        ];
        Self(KNOTS.iter().map(|&[q, v]| [T::lit(q), T::lit(v)]).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let pts = &self.0;
        if pts.len() < 2 {
            return Err(Error::Config("OCV table needs at least two points".into()));
        }
        if pts[0][0] != T::zero() || pts[pts.len() - 1][0] != T::one() {
            return Err(Error::Config("OCV table must span depth of discharge 0..1".into()));
        }
        for w in pts.windows(2) {
            if !(w[1][0] > w[0][0]) {
                return Err(Error::Config("OCV depths must be strictly increasing".into()));
            }
            if !(w[1][1] < w[0][1]) {
                return Err(Error::Config(
                    "OCV voltage must decrease strictly as discharge progresses".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn points(&self) -> &[[T; 2]] {
        &self.0
    }

    pub fn max_voltage(&self) -> T {
        self.0[0][1]
    }

    pub fn min_voltage(&self) -> T {
        self.0[self.0.len() - 1][1]
    }

    /// OCV at depth `q`, clamped to the table ends.
    pub fn eval(&self, q: T) -> T {
        let pts = &self.0;
        if q <= pts[0][0] {
            return pts[0][1];
        }
        // first knot with depth >= q
        let hi = pts.partition_point(|p| p[0] < q);
        if hi >= pts.len() {
            return pts[pts.len() - 1][1];
        }
        let [q0, v0] = pts[hi - 1];
        let [q1, v1] = pts[hi];
        v0 + (v1 - v0) * (q - q0) / (q1 - q0)
    }

    /// Exact `∫₀¹ U(q) dq` of the piecewise-linear curve.
    pub fn mean_voltage(&self) -> T {
        let half = T::lit(0.5);
        self.0
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]) * (w[0][1] + w[1][1]) * half)
            .sum()
    }
}

/// Discharge settings and the electrochemical/mass constants of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig<T> {
    pub c_rate: T,
    /// Cut-off voltage, V.
    pub v_cutoff: T,
    /// Time step, s.
    pub dt: T,
    pub ocv: OcvTable<T>,
    /// Active-material capacity, mAh/g.
    pub specific_capacity: T,
    /// Exchange current density on the particle surface, A/m².
    pub exchange_current: T,
    /// Prefactor of the asinh kinetic term (2RT/F at 25 °C), V.
    pub kinetic_voltage: T,
    /// Prefactor of the concentration term, V. Larger than RT/F so that
    /// electrolyte depletion builds up over the discharge rather than only
    /// next to the limiting current.
    pub concentration_voltage: T,
    /// Cation transference number; the concentration term scales with `1 + t₊`.
    pub transference_number: T,
    /// κ in `I_lim = κ·(ε/τ)/L`, A/m.
    pub limiting_current_coeff: T,
    /// θ₀: depth offset of the reaction front at the start of discharge.
    pub front_offset: T,
    /// Series resistance outside the electrode, Ω·m².
    pub contact_resistance: T,
    /// Electrolyte density, g/cm³.
    pub electrolyte_density: T,
    /// Current-collector mass per area, mg/cm².
    pub current_collector_loading: T,
}

impl<T: Scalar> Default for SimConfig<T> {
    fn default() -> Self {
        let l = T::lit;
        Self {
            c_rate: l(1.0),
            v_cutoff: l(3.2),
            dt: l(1.0),
            ocv: OcvTable::nmc111_placeholder(),
            specific_capacity: l(150.0),
            exchange_current: l(2.0),
            kinetic_voltage: l(0.0514),
            concentration_voltage: l(0.05),
            transference_number: l(0.38),
            limiting_current_coeff: l(0.018),
            front_offset: l(0.3),
            contact_resistance: l(5.0e-4),
            electrolyte_density: l(1.2),
            current_collector_loading: l(8.0),
        }
    }
}

impl<T: Scalar> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.ocv.validate()?;
        let positive = [
            ("c_rate", self.c_rate),
            ("dt", self.dt),
            ("specific_capacity", self.specific_capacity),
            ("exchange_current", self.exchange_current),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::Config(format!("simulation `{name}` must be positive")));
            }
        }
        let non_negative = [
            ("kinetic_voltage", self.kinetic_voltage),
            ("concentration_voltage", self.concentration_voltage),
            ("transference_number", self.transference_number),
            ("limiting_current_coeff", self.limiting_current_coeff),
            ("front_offset", self.front_offset),
            ("contact_resistance", self.contact_resistance),
            ("electrolyte_density", self.electrolyte_density),
            ("current_collector_loading", self.current_collector_loading),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= T::zero()) {
                return Err(Error::Config(format!("simulation `{name}` must be non-negative")));
            }
        }
        if self.concentration_voltage > T::zero() && self.limiting_current_coeff == T::zero() {
            return Err(Error::Config(
                "limiting_current_coeff must be positive when concentration_voltage is".into(),
            ));
        }
        if !(self.v_cutoff < self.ocv.max_voltage()) {
            return Err(Error::Config("v_cutoff must lie below the maximum OCV".into()));
        }
        Ok(())
    }

    /// Nominal discharge duration at the configured C-rate, s.
    pub fn nominal_duration(&self) -> T {
        T::lit(SECONDS_PER_HOUR) / self.c_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint<T> {
    /// s
    pub t: T,
    /// V
    pub voltage: T,
    /// mAh/cm²
    pub capacity: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Voltage reached the cut-off.
    Cutoff,
    /// All active material was discharged.
    SocExhausted,
    /// Applied current exceeds the transport limit from the first instant.
    TransportLimited,
    /// Ohmic and kinetic losses alone put the voltage below cut-off.
    ImmediateCutoff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DischargeResult<T> {
    pub curve: Vec<CurvePoint<T>>,
    /// s
    pub t_total: T,
    /// mAh/cm²
    pub capacity_final: T,
    /// Wh/kg of total electrode mass
    pub energy_density: T,
    /// W/kg
    pub power_density: T,
    /// AM + CBD + electrolyte + current collector, kg/m²
    pub electrode_mass: T,
    /// A/m²
    pub current_density: T,
    pub termination: Termination,
}

impl<T: Scalar> DischargeResult<T> {
    /// Whether the run produced a usable discharge.
    pub fn is_valid(&self) -> bool {
        matches!(self.termination, Termination::Cutoff | Termination::SocExhausted)
    }
}

/// Mass split of an electrode, kg/m².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectrodeMass<T> {
    pub active: T,
    pub cbd: T,
    pub electrolyte: T,
    pub current_collector: T,
}

impl<T: Scalar> ElectrodeMass<T> {
    pub fn total(&self) -> T {
        self.active + self.cbd + self.electrolyte + self.current_collector
    }
}

pub fn electrode_mass<T: Scalar>(props: &ElectrodeProperties<T>, cfg: &SimConfig<T>) -> ElectrodeMass<T> {
    // mg/cm² → kg/m²
    let per_area = T::lit(0.01);
    let coating = props.mass_loading * per_area;
    // ε·L[µm]·ρ[g/cm³] gives 0.1 mg/cm² per unit
    let electrolyte = props.porosity * props.thickness * cfg.electrolyte_density * T::lit(0.1) * per_area;
    ElectrodeMass {
        active: coating * props.am_mass_fraction,
        cbd: coating * (T::one() - props.am_mass_fraction),
        electrolyte,
        current_collector: cfg.current_collector_loading * per_area,
    }
}

/// `E = ∫ I·V dt / M` by the trapezoidal rule, in Wh/kg for `i_app` in
/// A/m², `t` in s and `m_electrode` in kg/m² (or A, s and kg).
pub fn energy_density<T: Scalar>(curve: &[CurvePoint<T>], i_app: T, m_electrode: T) -> Result<T> {
    if !(m_electrode > T::zero()) {
        return Err(Error::invalid("electrode mass must be positive"));
    }
    let half = T::lit(0.5);
    let joules: T = curve
        .windows(2)
        .map(|w| i_app * (w[0].voltage + w[1].voltage) * half * (w[1].t - w[0].t))
        .sum();
    Ok(joules / m_electrode / T::lit(SECONDS_PER_HOUR))
}

/// `P = E / t_total` with `E` in Wh/kg and `t_total` in s, giving W/kg.
pub fn power_density<T: Scalar>(energy_density: T, t_total: T) -> Result<T> {
    if !(t_total > T::zero()) {
        return Err(Error::UndefinedPower);
    }
    Ok(energy_density / (t_total / T::lit(SECONDS_PER_HOUR)))
}

struct Overpotentials<T> {
    current: T,
    ohmic_kinetic: T,
    conc_scale: T,
    limit_at_start: T,
}

impl<T: Scalar> Overpotentials<T> {
    fn new(props: &ElectrodeProperties<T>, cfg: &SimConfig<T>, current: T) -> Self {
        let thickness_m = props.thickness * T::lit(1e-6);
        let ohmic = current * (thickness_m / props.conductivity + cfg.contact_resistance);
        let local_current = current / (props.active_area * thickness_m);
        let kinetic = cfg.kinetic_voltage * (local_current / (T::lit(2.0) * cfg.exchange_current)).asinh();
        Self {
            current,
            ohmic_kinetic: ohmic + kinetic,
            conc_scale: cfg.concentration_voltage * (T::one() + cfg.transference_number),
            limit_at_start: cfg.limiting_current_coeff * (props.porosity / props.tortuosity) / thickness_m,
        }
    }

    /// Ratio `I / I_lim(q)`.
    fn transport_ratio(&self, q: T, cfg: &SimConfig<T>) -> T {
        if self.limit_at_start > T::zero() {
            self.current * (cfg.front_offset + q) / self.limit_at_start
        } else {
            T::zero()
        }
    }

    /// Terminal voltage at depth `q`; `-inf` past the transport limit.
    fn voltage(&self, q: T, cfg: &SimConfig<T>) -> T {
        let conc = if self.conc_scale > T::zero() {
            let r = self.transport_ratio(q, cfg);
            if r >= T::one() {
                return T::neg_infinity();
            }
            -self.conc_scale * (T::one() - r).ln()
        } else {
            T::zero()
        };
        cfg.ocv.eval(q) - self.ohmic_kinetic - conc
    }
}

/// Constant-current discharge from full charge to `v_cutoff`.
pub fn simulate_discharge<T: Scalar>(
    props: &ElectrodeProperties<T>,
    cfg: &SimConfig<T>,
) -> Result<DischargeResult<T>> {
    props.validate()?;
    cfg.validate()?;

    let mass = electrode_mass(props, cfg);
    let m_total = mass.total();
    // Ah/m² from kg/m² · mAh/g (= Ah/kg)
    let nominal_capacity = mass.active * cfg.specific_capacity;
    let current = cfg.c_rate * nominal_capacity;
    let t_nominal = cfg.nominal_duration();
    let to_mah_cm2 = T::lit(0.1 / SECONDS_PER_HOUR);
    let eta = Overpotentials::new(props, cfg, current);
    let v_at = |t: T| eta.voltage(t / t_nominal, cfg);
    let point = |t: T, voltage: T| CurvePoint {
        t,
        voltage,
        capacity: current * t * to_mah_cm2,
    };

    let stopped_at_start = |termination| DischargeResult {
        curve: vec![point(T::zero(), cfg.v_cutoff)],
        t_total: T::zero(),
        capacity_final: T::zero(),
        energy_density: T::zero(),
        power_density: T::zero(),
        electrode_mass: m_total,
        current_density: current,
        termination,
    };
    if eta.conc_scale > T::zero() && eta.transport_ratio(T::zero(), cfg) >= T::one() {
        return Ok(stopped_at_start(Termination::TransportLimited));
    }
    let v0 = v_at(T::zero());
    if v0 <= cfg.v_cutoff {
        return Ok(stopped_at_start(Termination::ImmediateCutoff));
    }

    let mut curve = vec![point(T::zero(), v0)];
    let mut termination = Termination::SocExhausted;
    let mut step = 0usize;
    loop {
        let prev = curve[curve.len() - 1];
        step += 1;
        let t = (T::from_usize_lossy(step) * cfg.dt).min(t_nominal);
        let v = v_at(t);
        if v <= cfg.v_cutoff {
            let t_cross = if v.is_finite() {
                prev.t + (prev.voltage - cfg.v_cutoff) / (prev.voltage - v) * (t - prev.t)
            } else {
                bisect_cutoff(&v_at, prev.t, t, cfg.v_cutoff)
            };
            curve.push(point(t_cross, cfg.v_cutoff));
            termination = Termination::Cutoff;
            break;
        }
        curve.push(point(t, v));
        if t >= t_nominal {
            break;
        }
    }

    let last = curve[curve.len() - 1];
    let energy = energy_density(&curve, current, m_total)?;
    let power = power_density(energy, last.t)?;
    Ok(DischargeResult {
        t_total: last.t,
        capacity_final: last.capacity,
        energy_density: energy,
        power_density: power,
        electrode_mass: m_total,
        current_density: current,
        termination,
        curve,
    })
}

// Voltage diverges inside the step, so interpolation is meaningless there.
fn bisect_cutoff<T: Scalar>(v_at: &impl Fn(T) -> T, mut lo: T, mut hi: T, cutoff: T) -> T {
    let half = T::lit(0.5);
    for _ in 0..80 {
        let mid = (lo + hi) * half;
        if v_at(mid) > cutoff {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Energy density with every loss switched off: the full nominal capacity
/// delivered at open-circuit voltage.
pub fn lossless_energy_density<T: Scalar>(props: &ElectrodeProperties<T>, cfg: &SimConfig<T>) -> T {
    let mass = electrode_mass(props, cfg);
    mass.active * cfg.specific_capacity * cfg.ocv.mean_voltage() / mass.total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::electrode::{properties_from_manufacturing, ManufacturingParams, PropertyModelConfig};

    fn props(am: f64, sc: f64, cd: f64) -> ElectrodeProperties<f64> {
        properties_from_manufacturing(&ManufacturingParams::new(am, sc, cd), &PropertyModelConfig::default())
            .unwrap()
    }

    fn flat(v: &[(f64, f64)]) -> Vec<CurvePoint<f64>> {
        v.iter().map(|&(t, voltage)| CurvePoint { t, voltage, capacity: 0.0 }).collect()
    }

    #[test]
    fn energy_of_constant_voltage() {
        let e = energy_density(&flat(&[(0.0, 4.0), (3600.0, 4.0)]), 1.0, 1.0).unwrap();
        assert!((e - 4.0).abs() < 1e-12);
        let e_half = energy_density(&flat(&[(0.0, 4.0), (3600.0, 4.0)]), 1.0, 0.5).unwrap();
        assert!((e_half - 8.0).abs() < 1e-12);
    }

    #[test]
    fn energy_of_linear_ramp() {
        let e = energy_density(&flat(&[(0.0, 4.0), (1800.0, 3.6), (3600.0, 3.2)]), 1.0, 1.0).unwrap();
        assert!((e - 3.6).abs() < 1e-12);
    }

    #[test]
    fn power_density_units() {
        assert_eq!(power_density(4.0, 3600.0).unwrap(), 4.0);
        assert_eq!(power_density(4.0, 1800.0).unwrap(), 8.0);
        assert!(matches!(power_density(4.0, 0.0), Err(Error::UndefinedPower)));
    }

    #[test]
    fn ocv_interpolation() {
        let ocv = OcvTable::<f64>::nmc111_placeholder();
        assert_eq!(ocv.eval(0.0), 4.30);
        assert_eq!(ocv.eval(1.0), 3.20);
        assert!((ocv.eval(0.45) - 3.775).abs() < 1e-12);
        assert_eq!(ocv.eval(-1.0), 4.30);
        assert_eq!(ocv.eval(2.0), 3.20);
    }

    #[test]
    fn non_monotone_ocv_rejected() {
        assert!(OcvTable::new(vec![[0.0, 4.0], [0.5, 4.1], [1.0, 3.0]]).is_err());
        assert!(OcvTable::new(vec![[0.0, 4.0], [0.5, 3.5]]).is_err());
        let mut cfg = SimConfig::<f64>::default();
        cfg.ocv = OcvTable(vec![[0.0, 4.0], [0.5, 4.1], [1.0, 3.0]]);
        assert!(matches!(simulate_discharge(&props(95.0, 55.0, 10.0), &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn curve_is_monotone_and_ends_at_cutoff() {
        let cfg = SimConfig::default();
        let r = simulate_discharge(&props(95.0, 65.0, 20.0), &cfg).unwrap();
        assert!(r.is_valid());
        assert!(r.curve.windows(2).all(|w| w[1].voltage <= w[0].voltage && w[1].t > w[0].t));
        assert_eq!(r.t_total, r.curve.last().unwrap().t);
        assert!(r.curve.last().unwrap().voltage >= cfg.v_cutoff - 1e-12);
        assert!((r.power_density * r.t_total - r.energy_density * 3600.0).abs() < 1e-9);
    }

    #[test]
    fn transport_limited_start() {
        let mut cfg = SimConfig::default();
        cfg.limiting_current_coeff = 1e-6;
        let r = simulate_discharge(&props(95.0, 65.0, 20.0), &cfg).unwrap();
        assert_eq!(r.termination, Termination::TransportLimited);
        assert_eq!(r.t_total, 0.0);
        assert!(!r.is_valid());
    }

    #[test]
    fn higher_tortuosity_lowers_capacity() {
        let cfg = SimConfig::default();
        let base = props(95.0, 68.0, 15.0);
        let mut tortuous = base;
        tortuous.tortuosity *= 2.0;
        let a = simulate_discharge(&base, &cfg).unwrap();
        let b = simulate_discharge(&tortuous, &cfg).unwrap();
        assert!(b.capacity_final < a.capacity_final);
    }
}
