//! The success/failure contract shared by every probabilistic subroutine.
//!
//! A [`NoisyScalarOracle`] reports a value within `eta` of the truth with
//! probability at least `1 - delta`. What it reports on the failure branch is
//! unconstrained; [`FailureMode`] picks between an adversarial value and a
//! uniform draw over the admissible range.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FailureMode {
    /// The value in range farthest from the truth.
    #[default]
    WorstCase,
    /// A uniform draw over the admissible range.
    Uniform,
}

impl std::str::FromStr for FailureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst-case" | "worst_case" => Ok(FailureMode::WorstCase),
            "uniform" => Ok(FailureMode::Uniform),
            other => Err(Error::invalid(format!("unknown failure mode `{other}`"))),
        }
    }
}

/// Saturating tally of charged oracle queries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct QueryCounter(u64);

impl QueryCounter {
    pub fn new() -> Self {
        Self(0)
    }

    pub fn charge(&mut self, n: u64) {
        self.0 = self.0.saturating_add(n);
    }

    pub fn merge(&mut self, other: QueryCounter) {
        self.charge(other.0);
    }

    pub fn total(&self) -> u64 {
        self.0
    }
}

/// One draw from a noisy oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisySample {
    pub value: f64,
    /// Whether the draw came from the success branch.
    pub success: bool,
}

/// Additive-error/failure-probability noise over a bounded range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub eta: f64,
    pub delta: f64,
    pub failure_mode: FailureMode,
    pub range: (f64, f64),
}

impl NoiseModel {
    pub fn new(eta: f64, delta: f64, failure_mode: FailureMode, range: (f64, f64)) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be a nonnegative finite number, got {eta}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::invalid(format!("delta must lie in [0, 1), got {delta}")));
        }
        if !(range.0 < range.1) {
            return Err(Error::invalid("empty oracle range"));
        }
        Ok(Self {
            eta,
            delta,
            failure_mode,
            range,
        })
    }

    /// Noise-free model over `range`.
    pub fn exact(range: (f64, f64)) -> Self {
        Self {
            eta: 0.0,
            delta: 0.0,
            failure_mode: FailureMode::WorstCase,
            range,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, truth: f64, rng: &mut R) -> NoisySample {
        let (lo, hi) = self.range;
        let failed = self.delta > 0.0 && rng.random::<f64>() < self.delta;
        if failed {
            let value = match self.failure_mode {
                FailureMode::WorstCase => {
                    if (truth - lo).abs() >= (hi - truth).abs() {
                        lo
                    } else {
                        hi
                    }
                }
                FailureMode::Uniform => rng.random_range(lo..hi),
            };
            return NoisySample {
                value,
                success: false,
            };
        }
        let jitter = if self.eta > 0.0 {
            rng.random_range(-self.eta..=self.eta)
        } else {
            0.0
        };
        NoisySample {
            value: (truth + jitter).clamp(lo, hi),
            success: true,
        }
    }
}

/// A fixed true value behind a [`NoiseModel`], with a per-sample query charge.
#[derive(Clone, Debug)]
pub struct NoisyScalarOracle {
    pub true_value: f64,
    pub model: NoiseModel,
    pub cost_per_sample: u64,
    queries: QueryCounter,
}

impl NoisyScalarOracle {
    pub fn new(true_value: f64, model: NoiseModel, cost_per_sample: u64) -> Self {
        Self {
            true_value,
            model,
            cost_per_sample,
            queries: QueryCounter::new(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> NoisySample {
        self.queries.charge(self.cost_per_sample);
        self.model.draw(self.true_value, rng)
    }

    pub fn queries(&self) -> QueryCounter {
        self.queries
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn success_draws_stay_within_eta() {
        let model = NoiseModel::new(0.05, 0.2, FailureMode::WorstCase, (0.0, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut oracle = NoisyScalarOracle::new(0.3, model, 7);
        let n = 20_000;
        let mut fails = 0;
        for _ in 0..n {
            let s = oracle.sample(&mut rng);
            if s.success {
                assert!((s.value - 0.3).abs() <= 0.05 + 1e-15);
            } else {
                assert_eq!(s.value, 1.0);
                fails += 1;
            }
        }
        let sigma = (0.2 * 0.8 / n as f64).sqrt();
        assert!((fails as f64 / n as f64 - 0.2).abs() <= 4.0 * sigma);
        assert_eq!(oracle.queries().total(), 7 * n);
    }

    #[test]
    fn counter_saturates() {
        let mut c = QueryCounter::new();
        c.charge(u64::MAX);
        c.charge(5);
        assert_eq!(c.total(), u64::MAX);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(NoiseModel::new(-1.0, 0.1, FailureMode::Uniform, (0.0, 1.0)).is_err());
        assert!(NoiseModel::new(0.1, 1.0, FailureMode::Uniform, (0.0, 1.0)).is_err());
        assert!(NoiseModel::new(0.1, 0.1, FailureMode::Uniform, (1.0, 1.0)).is_err());
    }
}
