//! Binary-search quantile estimation over noisy CDF oracles, and the
//! approximate matrix-element oracle for the median covariance.
//!
//! The search runs on the unit interval; the caller's domain `[lo, hi]` is
//! mapped onto it affinely, so `epsilon`, `epsilon_prime` and `lipschitz` in
//! [`MedianSearchConfig`] are all in those normalized units.

use rand::Rng;

use crate::embedding::{median, RawDataset};
use crate::error::{Error, Result};
use crate::noisy::{FailureMode, NoiseModel, NoisySample, QueryCounter};
use crate::rng::SimRng;
use crate::statevec::AmplitudeEstimator;

/// `ceil(log2((1 - 4 eps) / (2 (eps - 4 eps'))))`, floored at zero.
pub fn iteration_budget(epsilon: f64, epsilon_prime: f64) -> Result<usize> {
    check_admissible(epsilon, epsilon_prime)?;
    let ratio = (1.0 - 4.0 * epsilon) / (2.0 * (epsilon - 4.0 * epsilon_prime));
    Ok(ceil_log2(ratio))
}

/// Smallest `p` with `2^{-p-1} + 2 eps' (1 - 2^{-p}) <= eps`, the iteration
/// count the error envelope actually needs when `eps0 = eps'/L`.
pub fn sufficient_iterations(epsilon: f64, epsilon_prime: f64) -> Result<usize> {
    check_admissible(epsilon, epsilon_prime)?;
    let ratio = (1.0 - 4.0 * epsilon_prime) / (2.0 * (epsilon - 2.0 * epsilon_prime));
    Ok(ceil_log2(ratio))
}

fn ceil_log2(ratio: f64) -> usize {
    if ratio <= 1.0 {
        0
    } else {
        ratio.log2().ceil() as usize
    }
}

fn check_admissible(epsilon: f64, epsilon_prime: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(Error::config(format!("ε < 1/4 required, got ε = {epsilon}")));
    }
    if !(epsilon_prime >= 0.0 && epsilon_prime < epsilon / 4.0) {
        return Err(Error::config(format!(
            "ε' < ε/4 required, got ε' = {epsilon_prime} with ε = {epsilon}"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MedianSearchConfig {
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub epsilon0: f64,
    pub delta0: f64,
    pub lipschitz: f64,
    pub p_max: usize,
    pub domain: (f64, f64),
    pub failure_mode: FailureMode,
    pub ae_cost_constant: f64,
}

impl MedianSearchConfig {
    /// Sets `eps0 = eps'/L` and `p_max` to the larger of
    /// [`iteration_budget`] and [`sufficient_iterations`].
    pub fn new(epsilon: f64, epsilon_prime: f64, lipschitz: f64, delta0: f64) -> Result<Self> {
        check_admissible(epsilon, epsilon_prime)?;
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::config(format!("Lipschitz constant must be positive, got {lipschitz}")));
        }
        let epsilon0 = epsilon_prime / lipschitz;
        Self::assemble(epsilon, epsilon_prime, epsilon0, lipschitz, delta0)
    }

    /// Configuration for a list of `n` values: `eps0 = 1/(4n)` keeps every
    /// comparison against a half-step threshold exact, and `L` is set so that
    /// `L eps0 = eps'`.
    pub fn for_list(epsilon: f64, epsilon_prime: f64, n: usize, delta0: f64) -> Result<Self> {
        check_admissible(epsilon, epsilon_prime)?;
        if n == 0 {
            return Err(Error::invalid("empty list"));
        }
        let epsilon0 = 0.25 / n as f64;
        Self::assemble(epsilon, epsilon_prime, epsilon0, epsilon_prime / epsilon0, delta0)
    }

    fn assemble(epsilon: f64, epsilon_prime: f64, epsilon0: f64, lipschitz: f64, delta0: f64) -> Result<Self> {
        if !(epsilon0 > 0.0 && epsilon0 < 1.0) {
            return Err(Error::config(format!("ε0 = ε'/L must lie in (0, 1), got {epsilon0}")));
        }
        if !(0.0..1.0).contains(&delta0) {
            return Err(Error::config(format!("δ0 must lie in [0, 1), got {delta0}")));
        }
        let p_max = iteration_budget(epsilon, epsilon_prime)?
            .max(sufficient_iterations(epsilon, epsilon_prime)?)
            .max(1);
        Ok(Self {
            epsilon,
            epsilon_prime,
            epsilon0,
            delta0,
            lipschitz,
            p_max,
            domain: (0.0, 1.0),
            failure_mode: FailureMode::WorstCase,
            ae_cost_constant: AmplitudeEstimator::DEFAULT_COST_CONSTANT,
        })
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::config(format!("empty search domain [{lo}, {hi}]")));
        }
        self.domain = (lo, hi);
        Ok(self)
    }

    pub fn with_failure_mode(mut self, mode: FailureMode) -> Self {
        self.failure_mode = mode;
        self
    }

    pub fn with_p_max(mut self, p_max: usize) -> Result<Self> {
        let floor = iteration_budget(self.epsilon, self.epsilon_prime)?;
        if p_max < floor {
            return Err(Error::config(format!("p_max = {p_max} is below the budget {floor}")));
        }
        self.p_max = p_max;
        Ok(self)
    }

    /// Endpoint widening `eps' + L eps0` applied after every update.
    pub fn widening(&self) -> f64 {
        self.epsilon_prime + self.lipschitz * self.epsilon0
    }

    /// Normalized error bound after `p` iterations.
    pub fn error_envelope(&self, p: usize) -> f64 {
        let h = 0.5f64.powi(p as i32);
        0.5 * h + self.widening() * (1.0 - h)
    }

    pub fn width(&self) -> f64 {
        self.domain.1 - self.domain.0
    }

    pub fn to_domain(&self, t: f64) -> f64 {
        self.domain.0 + self.width() * t
    }

    pub fn estimator(&self) -> Result<AmplitudeEstimator> {
        AmplitudeEstimator::new(self.epsilon0, self.delta0, self.failure_mode)?.with_cost_constant(self.ae_cost_constant)
    }
}

/// A noisy estimate of `P(value < y)` for `y` in domain units.
pub trait CdfOracle {
    fn probability_below(&mut self, y: f64, rng: &mut SimRng) -> NoisySample;
    fn queries(&self) -> QueryCounter;
}

/// Noise-free oracle around a CDF closure.
pub struct ExactCdf<F>(pub F);

impl<F: FnMut(f64) -> f64> CdfOracle for ExactCdf<F> {
    fn probability_below(&mut self, y: f64, _rng: &mut SimRng) -> NoisySample {
        NoisySample {
            value: (self.0)(y),
            success: true,
        }
    }

    fn queries(&self) -> QueryCounter {
        QueryCounter::new()
    }
}

/// Queries charged for one inner product at precision `eps'` with failure
/// probability `delta`: `ceil(ln(1/delta) / eps')`.
pub fn inner_product_charge(epsilon_prime: f64, delta: f64) -> u64 {
    if epsilon_prime <= 0.0 || delta <= 0.0 {
        return 1;
    }
    ((1.0 / delta).ln().max(1.0) / epsilon_prime).ceil() as u64
}

/// CDF oracle for a continuous law: every query evaluates the CDF at a point
/// displaced by up to `eps'` (the inner-product error) and then passes the
/// result through contract-level amplitude estimation.
pub struct PerturbedCdfOracle<F> {
    cdf: F,
    perturbation: f64,
    estimator: AmplitudeEstimator,
    per_query: u64,
    counter: QueryCounter,
}

impl<F: FnMut(f64) -> f64> PerturbedCdfOracle<F> {
    /// `perturbation` is in domain units.
    pub fn new(cdf: F, perturbation: f64, cfg: &MedianSearchConfig) -> Result<Self> {
        let estimator = cfg.estimator()?;
        let ip = inner_product_charge(cfg.epsilon_prime, cfg.epsilon0 / 2.0);
        Ok(Self {
            cdf,
            perturbation,
            per_query: estimator.charge().saturating_mul(ip),
            estimator,
            counter: QueryCounter::new(),
        })
    }
}

impl<F: FnMut(f64) -> f64> CdfOracle for PerturbedCdfOracle<F> {
    fn probability_below(&mut self, y: f64, rng: &mut SimRng) -> NoisySample {
        let shift = if self.perturbation > 0.0 {
            rng.random_range(-self.perturbation..=self.perturbation)
        } else {
            0.0
        };
        let p = (self.cdf)(y + shift).clamp(0.0, 1.0);
        self.counter.charge(self.per_query);
        let model = NoiseModel {
            eta: self.estimator.eps0,
            delta: self.estimator.delta0,
            failure_mode: self.estimator.failure_mode,
            range: (0.0, 1.0),
        };
        model.draw(p, rng)
    }

    fn queries(&self) -> QueryCounter {
        self.counter
    }
}

/// CDF oracle over a finite list that is redrawn (with fresh inner-product
/// noise) on every query.
pub struct ListCdfOracle<G> {
    draw: G,
    estimator: AmplitudeEstimator,
    per_query: u64,
    counter: QueryCounter,
}

impl<G: FnMut(&mut SimRng) -> Vec<f64>> ListCdfOracle<G> {
    pub fn new(draw: G, cfg: &MedianSearchConfig, inner_product_cost: u64) -> Result<Self> {
        let estimator = cfg.estimator()?;
        Ok(Self {
            draw,
            per_query: estimator.charge().saturating_mul(inner_product_cost.max(1)),
            estimator,
            counter: QueryCounter::new(),
        })
    }
}

impl<G: FnMut(&mut SimRng) -> Vec<f64>> CdfOracle for ListCdfOracle<G> {
    fn probability_below(&mut self, y: f64, rng: &mut SimRng) -> NoisySample {
        let values = (self.draw)(rng);
        let below = values.iter().filter(|&&v| v < y).count();
        let p = below as f64 / values.len().max(1) as f64;
        self.counter.charge(self.per_query);
        let model = NoiseModel {
            eta: self.estimator.eps0,
            delta: self.estimator.delta0,
            failure_mode: self.estimator.failure_mode,
            range: (0.0, 1.0),
        };
        model.draw(p, rng)
    }

    fn queries(&self) -> QueryCounter {
        self.counter
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchStep {
    /// Normalized midpoint queried at this step.
    pub mu: f64,
    pub estimate: f64,
    pub success: bool,
    /// Normalized interval after the update and widening.
    pub left: f64,
    pub right: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MedianSearchResult {
    /// Final midpoint in domain units.
    pub estimate: f64,
    pub trajectory: Vec<SearchStep>,
    pub failures: usize,
    pub queries: QueryCounter,
}

impl MedianSearchResult {
    /// Normalized midpoint after `p` completed iterations (`p = 0` is the
    /// initial midpoint `1/2`).
    pub fn midpoint_after(&self, p: usize) -> f64 {
        if p == 0 {
            0.5
        } else {
            let s = &self.trajectory[p - 1];
            0.5 * (s.left + s.right)
        }
    }
}

/// Binary search for the point where the oracle's CDF crosses `q`.
///
/// An estimate strictly below `q` moves the left endpoint to the midpoint;
/// anything else, ties included, moves the right endpoint. The updated
/// endpoint is then pushed outward by [`MedianSearchConfig::widening`] and
/// clamped to the unit interval.
pub fn binary_search_quantile<O: CdfOracle>(
    oracle: &mut O,
    q: f64,
    cfg: &MedianSearchConfig,
    rng: &mut SimRng,
) -> Result<MedianSearchResult> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("quantile level {q} outside [0, 1]")));
    }
    let w = cfg.widening();
    let (mut left, mut right) = (0.0f64, 1.0f64);
    let mut trajectory = Vec::with_capacity(cfg.p_max);
    let mut failures = 0;
    for _ in 0..cfg.p_max {
        let mu = 0.5 * (left + right);
        let s = oracle.probability_below(cfg.to_domain(mu), rng);
        if !s.success {
            failures += 1;
        }
        if s.value < q {
            left = (mu - w).max(0.0);
        } else {
            right = (mu + w).min(1.0);
        }
        trajectory.push(SearchStep {
            mu,
            estimate: s.value,
            success: s.success,
            left,
            right,
        });
    }
    Ok(MedianSearchResult {
        estimate: cfg.to_domain(0.5 * (left + right)),
        trajectory,
        failures,
        queries: oracle.queries(),
    })
}

pub fn binary_search_median<O: CdfOracle>(
    oracle: &mut O,
    cfg: &MedianSearchConfig,
    rng: &mut SimRng,
) -> Result<MedianSearchResult> {
    binary_search_quantile(oracle, 0.5, cfg, rng)
}

/// Median of a noisy list under the midpoint convention: the two central
/// order statistics are located with searches at the half-step levels
/// `(k - 1/2)/n` and averaged (a single search when `n` is odd).
pub fn list_median<G: FnMut(&mut SimRng) -> Vec<f64>>(
    n: usize,
    draw: G,
    cfg: &MedianSearchConfig,
    inner_product_cost: u64,
    rng: &mut SimRng,
) -> Result<ListMedianResult> {
    if n == 0 {
        return Err(Error::invalid("median of an empty list"));
    }
    let mut oracle = ListCdfOracle::new(draw, cfg, inner_product_cost)?;
    let nf = n as f64;
    let ranks: Vec<usize> = if n % 2 == 1 {
        vec![n / 2 + 1]
    } else {
        vec![n / 2, n / 2 + 1]
    };
    let mut estimates = Vec::with_capacity(2);
    let mut failures = 0;
    let mut calls = 0;
    for k in ranks {
        let r = binary_search_quantile(&mut oracle, (k as f64 - 0.5) / nf, cfg, rng)?;
        failures += r.failures;
        calls += r.trajectory.len();
        estimates.push(r.estimate);
    }
    Ok(ListMedianResult {
        estimate: estimates.iter().sum::<f64>() / estimates.len() as f64,
        failures,
        oracle_calls: calls,
        queries: oracle.queries(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ListMedianResult {
    pub estimate: f64,
    pub failures: usize,
    pub oracle_calls: usize,
    pub queries: QueryCounter,
}

/// Number of oracle calls made by [`list_median`].
pub fn list_median_calls(n: usize, cfg: &MedianSearchConfig) -> usize {
    cfg.p_max * if n % 2 == 1 { 1 } else { 2 }
}

/// Precision split used by [`MatrixElementOracle`], all in units of the
/// normalized inner products `x_jk / R`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementBudget {
    /// Inner-product precision.
    pub epsilon_prime: f64,
    /// Error allowed for each feature median.
    pub feature_error: f64,
    /// Perturbation of each deviation product implied by the two above.
    pub product_perturbation: f64,
    /// Error allowed for the final median of products.
    pub product_error: f64,
}

impl ElementBudget {
    pub fn for_gamma(gamma_unit: f64) -> Self {
        let epsilon_prime = gamma_unit / 200.0;
        let feature_error = gamma_unit / 40.0;
        let e = epsilon_prime + feature_error;
        Self {
            epsilon_prime,
            feature_error,
            product_perturbation: 2.0 * e + (2.0 + e) * e,
            product_error: gamma_unit,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixElementSample {
    pub value: f64,
    /// True when no amplitude-estimation call took its failure branch.
    pub success: bool,
    pub queries: QueryCounter,
}

/// `gamma`-approximate samples of one entry of the median covariance,
/// composed of three list medians over Hadamard-test inner products.
#[derive(Clone, Debug)]
pub struct MatrixElementOracle {
    uk: Vec<f64>,
    ul: Vec<f64>,
    r2: f64,
    budget: ElementBudget,
    feature_cfg: MedianSearchConfig,
    product_cfg: MedianSearchConfig,
    ip_cost: u64,
    pub gamma: f64,
    pub delta: f64,
    queries: QueryCounter,
}

impl MatrixElementOracle {
    pub fn new(raw: &RawDataset, k: usize, l: usize, gamma: f64, delta: f64, failure_mode: FailureMode) -> Result<Self> {
        if k >= raw.dim() || l >= raw.dim() {
            return Err(Error::invalid(format!("entry ({k}, {l}) out of range for dimension {}", raw.dim())));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::config(format!("γ must lie in (0, 1), got {gamma}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::config(format!("δ must lie in [0, 1), got {delta}")));
        }
        let r = raw.norm_bound();
        let scale = if r > 0.0 { 1.0 / r } else { 0.0 };
        let uk: Vec<f64> = raw.feature(k).iter().map(|x| (x * scale).clamp(-1.0, 1.0)).collect();
        let ul: Vec<f64> = raw.feature(l).iter().map(|x| (x * scale).clamp(-1.0, 1.0)).collect();
        let r2 = (r * r).max(f64::MIN_POSITIVE);
        let gamma_unit = (gamma / r2).min(0.2);
        let budget = ElementBudget::for_gamma(gamma_unit);
        let n = raw.len();

        // Feature medians live on [-1, 1], products on [-4, 4].
        let make = |err: f64, pert: f64, lo: f64, hi: f64, d0: f64| -> Result<MedianSearchConfig> {
            let w = hi - lo;
            MedianSearchConfig::for_list(err / w, pert / w, n, d0)?
                .with_domain(lo, hi)
                .map(|c| c.with_failure_mode(failure_mode))
        };
        let probe = make(budget.feature_error, budget.epsilon_prime, -1.0, 1.0, 0.0)?;
        let probe3 = make(budget.product_error, budget.product_perturbation, -4.0, 4.0, 0.0)?;
        let calls = 2 * list_median_calls(n, &probe) + list_median_calls(n, &probe3);
        let delta0 = delta / calls as f64;
        let feature_cfg = make(budget.feature_error, budget.epsilon_prime, -1.0, 1.0, delta0)?;
        let product_cfg = make(budget.product_error, budget.product_perturbation, -4.0, 4.0, delta0)?;
        let ip_cost = inner_product_charge(budget.epsilon_prime, feature_cfg.epsilon0 / 2.0);
        Ok(Self {
            uk,
            ul,
            r2: r * r,
            budget,
            feature_cfg,
            product_cfg,
            ip_cost,
            gamma,
            delta,
            queries: QueryCounter::new(),
        })
    }

    pub fn budget(&self) -> ElementBudget {
        self.budget
    }

    pub fn queries(&self) -> QueryCounter {
        self.queries
    }

    pub fn sample(&mut self, rng: &mut SimRng) -> Result<MatrixElementSample> {
        let n = self.uk.len();
        let eps = self.budget.epsilon_prime;
        let noisy = |u: &[f64], rng: &mut SimRng| -> Vec<f64> {
            u.iter()
                .map(|x| (x + rng.random_range(-eps..=eps)).clamp(-1.0, 1.0))
                .collect()
        };
        let uk = self.uk.clone();
        let ul = self.ul.clone();
        let mk = list_median(n, |r: &mut SimRng| noisy(&uk, r), &self.feature_cfg, self.ip_cost, rng)?;
        let ml = list_median(n, |r: &mut SimRng| noisy(&ul, r), &self.feature_cfg, self.ip_cost, rng)?;
        let (ck, cl) = (mk.estimate, ml.estimate);
        let products = |r: &mut SimRng| -> Vec<f64> {
            let a = noisy(&uk, r);
            let b = noisy(&ul, r);
            a.iter().zip(&b).map(|(x, y)| (x - ck) * (y - cl)).collect()
        };
        let mp = list_median(n, products, &self.product_cfg, 2 * self.ip_cost, rng)?;
        let mut q = mk.queries;
        q.merge(ml.queries);
        q.merge(mp.queries);
        self.queries.merge(q);
        Ok(MatrixElementSample {
            value: mp.estimate * self.r2,
            success: mk.failures + ml.failures + mp.failures == 0,
            queries: q,
        })
    }
}

/// Exact entry of the median covariance, for comparison.
pub fn exact_matrix_element(raw: &RawDataset, k: usize, l: usize) -> Result<f64> {
    let fk = raw.feature(k);
    let fl = raw.feature(l);
    let mk = median(&fk)?;
    let ml = median(&fl)?;
    let prods: Vec<f64> = fk.iter().zip(&fl).map(|(a, b)| (a - mk) * (b - ml)).collect();
    median(&prods)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::LipschitzFamily;
    use rand::SeedableRng;

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    /// Smallest n with 2^n >= ratio, by doubling.
    fn budget_oracle(eps: f64, epsp: f64) -> usize {
        let ratio = (1.0 - 4.0 * eps) / (2.0 * (eps - 4.0 * epsp));
        let mut n = 0;
        let mut p = 1.0;
        while p < ratio {
            p *= 2.0;
            n += 1;
        }
        n
    }

    #[test]
    fn budget_examples() {
        assert_eq!(iteration_budget(0.1, 0.02).unwrap(), 4);
        assert_eq!(iteration_budget(0.05, 0.01).unwrap(), 6);
        assert_eq!(iteration_budget(0.2499, 0.0).unwrap(), 0);
        assert!(iteration_budget(0.3, 0.01).is_err());
        assert!(iteration_budget(0.1, 0.03).is_err());
    }

    #[test]
    fn budget_matches_doubling_oracle() {
        for i in 1..=20 {
            let eps = 0.012 * i as f64;
            let epsp = eps / (4.5 + i as f64 / 3.0);
            assert_eq!(iteration_budget(eps, epsp).unwrap(), budget_oracle(eps, epsp), "eps={eps}");
        }
    }

    #[test]
    fn config_admissibility() {
        let c = MedianSearchConfig::new(0.1, 0.02, 2.0, 0.01).unwrap();
        assert_eq!(c.epsilon0, 0.01);
        assert!(c.p_max >= 4);
        assert!(MedianSearchConfig::new(0.25, 0.01, 1.0, 0.0).is_err());
        assert!(c.with_p_max(2).is_err());
    }

    #[test]
    fn point_mass_with_exact_oracle() {
        let cfg = MedianSearchConfig::new(0.01, 0.001, 1.0, 0.0).unwrap().with_domain(-1.0, 1.0).unwrap();
        let mut o = ExactCdf(|y: f64| if y > 0.3 { 1.0 } else { 0.0 });
        let r = binary_search_median(&mut o, &cfg, &mut rng(1)).unwrap();
        assert!((r.estimate - 0.3).abs() <= 2.0 * 0.01);
    }

    #[test]
    fn uniform_with_exact_oracle() {
        let cfg = MedianSearchConfig::new(0.01, 0.001, 1.0, 0.0).unwrap();
        let mut o = ExactCdf(|y: f64| y.clamp(0.0, 1.0));
        let r = binary_search_median(&mut o, &cfg, &mut rng(2)).unwrap();
        assert!((0.49..=0.51).contains(&r.estimate));
    }

    #[test]
    fn envelope_holds_every_step_without_failures() {
        let fam = LipschitzFamily::LinearRamp;
        let cfg = MedianSearchConfig::new(0.05, 0.01, fam.lipschitz() / 2.0, 0.0)
            .unwrap()
            .with_domain(-1.0, 1.0)
            .unwrap();
        let truth = (fam.median() + 1.0) / 2.0;
        let mut r = rng(3);
        for _ in 0..1000 {
            let mut o = PerturbedCdfOracle::new(|y| fam.cdf(y), 2.0 * cfg.epsilon_prime, &cfg).unwrap();
            let res = binary_search_median(&mut o, &cfg, &mut r).unwrap();
            let mut prev = 0.5;
            for p in 0..=cfg.p_max {
                let err = (res.midpoint_after(p) - truth).abs();
                assert!(err <= cfg.error_envelope(p) + 1e-12, "p={p}");
                if p > 0 {
                    let step = (res.trajectory[p - 1].right - res.trajectory[p - 1].left) / 2.0;
                    assert!(step <= (prev + cfg.widening()) / 2.0 + 1e-12);
                    prev = step;
                }
            }
            assert!((res.estimate - fam.median()).abs() <= 2.0 * cfg.epsilon);
        }
    }

    #[test]
    fn list_median_is_exact_without_noise() {
        let vals = vec![0.3, -0.7, 0.1, 0.9, -0.2, 0.5];
        let exact = median(&vals).unwrap();
        let cfg = MedianSearchConfig::for_list(0.001, 0.0, vals.len(), 0.0)
            .unwrap()
            .with_domain(-1.0, 1.0)
            .unwrap();
        let v = vals.clone();
        let r = list_median(vals.len(), move |_| v.clone(), &cfg, 1, &mut rng(4)).unwrap();
        assert!((r.estimate - exact).abs() <= 2.0 * 0.001);
    }

    #[test]
    fn element_examples() {
        let same = RawDataset::with_tight_bound(vec![vec![0.3, 0.4]; 5]).unwrap();
        let mut o = MatrixElementOracle::new(&same, 0, 1, 0.05, 0.01, FailureMode::WorstCase).unwrap();
        let mut r = rng(5);
        let s = o.sample(&mut r).unwrap();
        assert!(s.value.abs() <= 0.05);
        let pm = RawDataset::with_tight_bound(vec![vec![1.0], vec![-1.0]]).unwrap();
        let mut o = MatrixElementOracle::new(&pm, 0, 0, 0.05, 0.01, FailureMode::WorstCase).unwrap();
        let s = o.sample(&mut r).unwrap();
        assert!((s.value - 1.0).abs() <= 0.05, "{}", s.value);
        assert!(s.queries.total() > 0);
    }

    #[test]
    fn element_oracle_meets_gamma() {
        let mut r = rng(6);
        let data: Vec<Vec<f64>> = (0..16).map(|_| (0..4).map(|_| r.random_range(-0.5..0.5)).collect()).collect();
        let raw = RawDataset::with_tight_bound(data).unwrap();
        let gamma = 0.05;
        let delta = 0.05;
        let trials = 100;
        let mut good = 0;
        for _ in 0..trials {
            let mut all = true;
            for k in 0..4 {
                for l in 0..4 {
                    let mut o = MatrixElementOracle::new(&raw, k, l, gamma, delta, FailureMode::WorstCase).unwrap();
                    let s = o.sample(&mut r).unwrap();
                    if (s.value - exact_matrix_element(&raw, k, l).unwrap()).abs() > gamma {
                        all = false;
                    }
                }
            }
            good += usize::from(all);
        }
        assert!(good as f64 >= (1.0 - 16.0 * delta) * trials as f64);
    }
}
