use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::Posterior;
use crate::scalar::{normal_cdf, normal_pdf, Scalar};

/// A single acquisition rule; lower scores are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Acquisition {
    Lcb,
    NegExpectedImprovement,
    NegProbabilityOfImprovement,
}

impl Acquisition {
    pub const ALL: [Acquisition; 3] = [
        Acquisition::Lcb,
        Acquisition::NegExpectedImprovement,
        Acquisition::NegProbabilityOfImprovement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Acquisition::Lcb => "lcb",
            Acquisition::NegExpectedImprovement => "neg-expected-improvement",
            Acquisition::NegProbabilityOfImprovement => "neg-probability-of-improvement",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcquisitionKind {
    Lcb,
    NegExpectedImprovement,
    NegProbabilityOfImprovement,
    /// Draw one of the three rules per iteration with `mix` probabilities.
    #[default]
    ProbabilisticMix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound = "T: Scalar")]
pub struct AcquisitionSpec<T> {
    pub kind: AcquisitionKind,
    /// LCB exploration weight κ.
    pub kappa: T,
    /// Probabilities for (lcb, neg-ei, neg-pi) under `probabilistic-mix`.
    pub mix: [T; 3],
}

impl<T: Scalar> Default for AcquisitionSpec<T> {
    fn default() -> Self {
        let third = T::one() / T::lit(3.0);
        AcquisitionSpec { kind: AcquisitionKind::ProbabilisticMix, kappa: T::lit(2.0), mix: [third; 3] }
    }
}

impl<T: Scalar> AcquisitionSpec<T> {
    pub fn single(kind: Acquisition) -> Self {
        let kind = match kind {
            Acquisition::Lcb => AcquisitionKind::Lcb,
            Acquisition::NegExpectedImprovement => AcquisitionKind::NegExpectedImprovement,
            Acquisition::NegProbabilityOfImprovement => AcquisitionKind::NegProbabilityOfImprovement,
        };
        AcquisitionSpec { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > T::zero()) || !self.kappa.is_finite() {
            return Err(Error::invalid("acquisition kappa must be positive"));
        }
        if self.mix.iter().any(|&p| !(p >= T::zero()) || !p.is_finite()) {
            return Err(Error::invalid("mix probabilities must be non-negative"));
        }
        let total: T = self.mix.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::invalid(format!("mix probabilities sum to {total}, expected 1")));
        }
        Ok(())
    }

    /// Picks the rule for one iteration. Consumes one draw from `rng` for
    /// the mix, none otherwise.
    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> Acquisition {
        match self.kind {
            AcquisitionKind::Lcb => Acquisition::Lcb,
            AcquisitionKind::NegExpectedImprovement => Acquisition::NegExpectedImprovement,
            AcquisitionKind::NegProbabilityOfImprovement => Acquisition::NegProbabilityOfImprovement,
            AcquisitionKind::ProbabilisticMix => {
                let u = T::lit(rng.random::<f64>());
                let mut acc = T::zero();
                for (i, &p) in self.mix.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Acquisition::ALL[i];
                    }
                }
                // rounding left u at or above the cumulative sum: take the last rule with mass
                let last = self.mix.iter().rposition(|&p| p > T::zero()).unwrap_or(0);
                Acquisition::ALL[last]
            }
        }
    }
}

/// Expected improvement below `f_best`, with the σ → 0 limit.
pub fn expected_improvement<T: Scalar>(post: Posterior<T>, f_best: T) -> T {
    let gap = f_best - post.mean;
    if !(post.std > T::zero()) {
        return gap.max(T::zero());
    }
    let z = gap / post.std;
    (gap * normal_cdf(z) + post.std * normal_pdf(z)).max(T::zero())
}

/// Probability of improving on `f_best`, with the σ → 0 limit.
pub fn probability_of_improvement<T: Scalar>(post: Posterior<T>, f_best: T) -> T {
    if !(post.std > T::zero()) {
        return if post.mean < f_best { T::one() } else { T::zero() };
    }
    normal_cdf((f_best - post.mean) / post.std)
}

/// Score to minimize.
pub fn acquisition_score<T: Scalar>(kind: Acquisition, post: Posterior<T>, f_best: T, kappa: T) -> T {
    match kind {
        Acquisition::Lcb => post.mean - kappa * post.std,
        Acquisition::NegExpectedImprovement => -expected_improvement(post, f_best),
        Acquisition::NegProbabilityOfImprovement => -probability_of_improvement(post, f_best),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn post(mean: f64, std: f64) -> Posterior<f64> {
        Posterior { mean, std }
    }

    #[test]
    fn ei_deterministic_limits() {
        assert_eq!(acquisition_score(Acquisition::NegExpectedImprovement, post(0.2, 0.0), 0.5, 2.0), -0.3);
        assert_eq!(acquisition_score(Acquisition::NegExpectedImprovement, post(0.7, 0.0), 0.5, 2.0), 0.0);
        assert_eq!(expected_improvement(post(0.5, 0.0), 0.5), 0.0);
    }

    #[test]
    fn ei_at_the_incumbent() {
        let ei = expected_improvement(post(1.0, 1.0), 1.0);
        assert!((ei - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn lcb_and_pi() {
        assert_eq!(acquisition_score(Acquisition::Lcb, post(1.0, 0.25), 0.0, 2.0), 0.5);
        assert_eq!(acquisition_score(Acquisition::NegProbabilityOfImprovement, post(0.0, 1.0), 0.0, 2.0), -0.5);
        assert_eq!(probability_of_improvement(post(0.1, 0.0), 0.2), 1.0);
        assert_eq!(probability_of_improvement(post(0.2, 0.0), 0.2), 0.0);
    }

    #[test]
    fn degenerate_mix_always_picks_one() {
        let spec = AcquisitionSpec { mix: [1.0, 0.0, 0.0], ..AcquisitionSpec::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..200).all(|_| spec.choose(&mut rng) == Acquisition::Lcb));
    }

    #[test]
    fn default_mix_uses_every_rule() {
        let spec = AcquisitionSpec::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut seen = [0usize; 3];
        for _ in 0..300 {
            let k = spec.choose(&mut rng);
            seen[Acquisition::ALL.iter().position(|&a| a == k).unwrap()] += 1;
        }
        assert!(seen.iter().all(|&c| c > 70), "{seen:?}");
    }

    #[test]
    fn spec_validation() {
        assert!(AcquisitionSpec { kappa: 0.0, ..AcquisitionSpec::<f64>::default() }.validate().is_err());
        assert!(AcquisitionSpec { mix: [0.5, 0.5, 0.5], ..AcquisitionSpec::<f64>::default() }.validate().is_err());
        assert!(AcquisitionSpec::<f64>::default().validate().is_ok());
    }
}
