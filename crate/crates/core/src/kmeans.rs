//! Privacy-preserving k-means over a simulated GHZ phase channel.
//!
//! Each participant's rotation only shifts the relative phase of
//! `(|0...0> + |1...1>)/sqrt(2)`, so the channel is simulated as one scalar
//! phase. [`ghz_statevector_probability`] keeps the full circuit around for
//! cross-checks at small `N`.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, real, CMatrix, CVector, Complex64, Hermitian};
use crate::rng::SimRng;
use crate::statevec::{gates, QuantumRegister, MAX_QUBITS};

/// Largest budget for which the dense density-matrix check is run.
pub const DENSE_PRIVACY_QUBITS: usize = 6;
/// Largest budget for the state-vector privacy check.
pub const STATEVECTOR_PRIVACY_QUBITS: usize = 12;
pub const POPULATION_CAP: u64 = 1_000_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Participant {
    pub x: Vec<f64>,
    pub participates: bool,
}

impl Participant {
    /// Coordinates are clamped to `[-1, 1]`.
    pub fn new(x: &[f64], participates: bool) -> Self {
        Self {
            x: x.iter().map(|v| v.clamp(-1.0, 1.0)).collect(),
            participates,
        }
    }
}

pub fn participants(vectors: &[Vec<f64>]) -> Vec<Participant> {
    vectors.iter().map(|x| Participant::new(x, true)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub k: usize,
    pub d: usize,
    pub epsilon: f64,
    pub rounds: usize,
    /// Stop once no centroid component moves by more than this.
    pub convergence: f64,
    /// Allowed error of each readout probability in the phase ladder.
    pub shot_error: f64,
    /// Failure probability of one phase estimate.
    pub estimate_delta: f64,
    /// Cap on `P_opt - 1/2`; `None` disables the check.
    pub privacy_delta: Option<f64>,
    pub tie_seed: u64,
}

impl ProtocolConfig {
    pub fn new(k: usize, d: usize, epsilon: f64) -> Result<Self> {
        let cfg = Self {
            k,
            d,
            epsilon,
            rounds: 10,
            convergence: epsilon,
            shot_error: 0.3,
            estimate_delta: 1e-6,
            privacy_delta: None,
            tie_seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config(format!("ε must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.shot_error > 0.0 && self.shot_error < 0.35) {
            return Err(Error::config("shot error must lie in (0, 0.35)"));
        }
        if !(self.estimate_delta > 0.0 && self.estimate_delta < 1.0) {
            return Err(Error::config("estimate δ must lie in (0, 1)"));
        }
        if let Some(d) = self.privacy_delta {
            if !(0.0..=0.5).contains(&d) {
                return Err(Error::config(format!("privacy δ must lie in [0, 1/2], got {d}")));
            }
        }
        Ok(())
    }
}

/// Nearest centroid; equidistant ties are broken by a hash of the
/// participant index and `tie_seed`.
pub fn assign(x: &[f64], centroids: &[Vec<f64>], index: usize, tie_seed: u64) -> usize {
    let dist: Vec<f64> = centroids
        .iter()
        .map(|c| c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    let best = dist.iter().copied().fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = (0..dist.len()).filter(|&p| dist[p] == best).collect();
    if tied.len() == 1 {
        return tied[0];
    }
    let mut rng = SimRng::seed_from_u64(tie_seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    tied[rng.random_range(0..tied.len())]
}

/// Corner of `[-1, 1]^d` farthest (minimum distance) from the given points.
fn farthest_corner(d: usize, taken: &[Vec<f64>]) -> Vec<f64> {
    let mut best = vec![1.0; d];
    let mut best_score = f64::NEG_INFINITY;
    let corners = 1usize << d.min(16);
    for mask in 0..corners {
        let c: Vec<f64> = (0..d).map(|i| if i < 16 && mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let score = taken
            .iter()
            .map(|t| t.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        if score > best_score {
            best_score = score;
            best = c;
        }
    }
    best
}

/// Replaces every flagged centroid by a corner chosen from public data only.
fn reseed(centroids: &mut [Vec<f64>], empty: &[bool], d: usize) {
    for p in 0..centroids.len() {
        if empty[p] {
            let taken: Vec<Vec<f64>> = (0..centroids.len()).filter(|&q| !empty[q] || q < p).map(|q| centroids[q].clone()).collect();
            centroids[p] = farthest_corner(d, &taken);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalStep {
    pub centroids: Vec<Vec<f64>>,
    /// `P(f = p)` over all `N` participants, including those who sit out.
    pub probabilities: Vec<f64>,
    pub empty: Vec<bool>,
}

/// One exact assignment-then-average iteration. Clusters with probability at
/// most `empty_below` are reseeded.
pub fn classical_iteration(parts: &[Participant], centroids: &[Vec<f64>], tie_seed: u64, empty_below: f64) -> ClassicalStep {
    let k = centroids.len();
    let d = centroids.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (j, part) in parts.iter().enumerate() {
        if !part.participates {
            continue;
        }
        let p = assign(&part.x, centroids, j, tie_seed);
        counts[p] += 1;
        for (s, x) in sums[p].iter_mut().zip(&part.x) {
            *s += x;
        }
    }
    let n = parts.len().max(1) as f64;
    let probabilities: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let empty: Vec<bool> = probabilities.iter().map(|&p| p <= empty_below).collect();
    let mut next: Vec<Vec<f64>> = (0..k)
        .map(|p| {
            if counts[p] == 0 {
                centroids[p].clone()
            } else {
                sums[p].iter().map(|s| s / counts[p] as f64).collect()
            }
        })
        .collect();
    reseed(&mut next, &empty, d);
    ClassicalStep {
        centroids: next,
        probabilities,
        empty,
    }
}

/// Classical Lloyd iterations until no component moves more than `tol`.
pub fn lloyd(parts: &[Participant], init: &[Vec<f64>], tie_seed: u64, tol: f64, max_iter: usize) -> Vec<Vec<f64>> {
    let mut c = init.to_vec();
    for _ in 0..max_iter {
        let next = classical_iteration(parts, &c, tie_seed, 0.0).centroids;
        let moved = max_abs_diff(&c, &next);
        c = next;
        if moved <= tol {
            break;
        }
    }
    c
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

/// `cos^2(t sum theta / 2)`, the probability of reading `0` after the
/// CNOT-collapse and Hadamard.
pub fn ghz_phase_channel(thetas: &[f64], t: u64) -> Result<f64> {
    let phase = thetas.iter().sum::<f64>() * t as f64;
    if phase.abs() >= PI {
        return Err(Error::PhaseWrap { phase });
    }
    Ok((phase / 2.0).cos().powi(2))
}

/// The same statistic from a full simulation of GHZ preparation, `t` rounds
/// of single-qubit `exp(-i theta_j Z / 2)` rotations, the CNOT chain and the
/// final Hadamard.
pub fn ghz_statevector_probability(thetas: &[f64], t: u64) -> Result<f64> {
    let n = thetas.len();
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::TooLarge {
            what: "GHZ register",
            requested: n,
            cap: MAX_QUBITS,
        });
    }
    let mut reg = QuantumRegister::new(n)?;
    reg.h(0)?;
    for q in 1..n {
        reg.cnot(0, q)?;
    }
    for (q, &th) in thetas.iter().enumerate() {
        reg.apply_unitary(&gates::rz(th * t as f64), &[q], &[])?;
    }
    for q in (1..n).rev() {
        reg.cnot(0, q)?;
    }
    reg.h(0)?;
    Ok(reg.probability_zero(0))
}

/// Power-of-two ladder `t = 1, 2, ..., 2^levels`, `shots` readouts per level
/// in each of two bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhaseSchedule {
    pub levels: u32,
    pub shots: u64,
}

impl PhaseSchedule {
    /// `2^levels >= pi / (3 precision)`, and enough shots that each readout
    /// probability is within `shot_error` at every level with total failure
    /// probability `delta` (Hoeffding).
    pub fn for_precision(precision: f64, shot_error: f64, delta: f64) -> Result<Self> {
        if !(precision > 0.0 && precision.is_finite()) {
            return Err(Error::config(format!("phase precision must be positive, got {precision}")));
        }
        let need = PI / (3.0 * precision);
        let levels = if need <= 1.0 { 0 } else { need.log2().ceil() as u32 };
        if levels > 40 {
            return Err(Error::TooLarge {
                what: "phase ladder depth",
                requested: levels as usize,
                cap: 40,
            });
        }
        let events = 2.0 * (levels as f64 + 1.0);
        let shots = ((2.0 * events / delta).ln() / (2.0 * shot_error * shot_error)).ceil() as u64;
        Ok(Self { levels, shots })
    }

    /// `sum |t|` over every readout of one estimate.
    pub fn rotations(&self) -> u64 {
        2 * self.shots * ((1u64 << (self.levels + 1)) - 1)
    }

    /// Guaranteed error when every level stays on its branch.
    pub fn precision(&self) -> f64 {
        PI / 3.0 / (1u64 << self.levels) as f64
    }
}

/// Robust phase estimation of `phi` through the scalar channel. A corrupted
/// channel has every readout's phase replaced by a uniform random one.
pub fn estimate_phase(phi: f64, schedule: &PhaseSchedule, corrupted: bool, rng: &mut SimRng) -> f64 {
    let mut est = 0.0;
    for level in 0..=schedule.levels {
        let t = (1u64 << level) as f64;
        let a = phi * t;
        let readout = |p: f64, rng: &mut SimRng| -> f64 {
            let hits = if corrupted {
                (0..schedule.shots)
                    .filter(|_| {
                        let r: f64 = rng.random_range(-PI..PI);
                        rng.random::<f64>() < (r / 2.0).cos().powi(2)
                    })
                    .count() as u64
            } else {
                Binomial::new(schedule.shots, p.clamp(0.0, 1.0))
                    .expect("valid binomial")
                    .sample(rng)
            };
            2.0 * hits as f64 / schedule.shots as f64 - 1.0
        };
        let c = readout((a / 2.0).cos().powi(2), rng);
        let s = readout((1.0 + a.sin()) / 2.0, rng);
        let angle = s.atan2(c);
        if level == 0 {
            est = angle;
        } else {
            let j = ((est * t - angle) / (2.0 * PI)).round();
            est = (angle + 2.0 * PI * j) / t;
        }
    }
    est
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RotationBudget {
    pub q1: u64,
    pub q2: u64,
    pub per_round: Vec<(u64, u64)>,
}

impl RotationBudget {
    pub fn total(&self) -> u64 {
        self.q1.saturating_add(self.q2)
    }

    pub fn push(&mut self, q1: u64, q2: u64) {
        self.q1 = self.q1.saturating_add(q1);
        self.q2 = self.q2.saturating_add(q2);
        self.per_round.push((q1, q2));
    }
}

fn ceil_tol(x: f64) -> u64 {
    (x - 1e-9).ceil().max(0.0) as u64
}

/// `q1 = c1 R / eps`, `q2 = c2 R d / (min_p eps)`.
pub fn rotation_budget(rounds: usize, d: usize, epsilon: f64, min_p: f64, c1: f64, c2: f64) -> Result<RotationBudget> {
    if !(epsilon > 0.0) {
        return Err(Error::config("ε must be positive"));
    }
    if min_p <= epsilon {
        return Err(Error::config(format!("min_p = {min_p} must exceed ε = {epsilon}")));
    }
    let q1 = ceil_tol(c1 / epsilon);
    let q2 = ceil_tol(c2 * d as f64 / (min_p * epsilon));
    let mut b = RotationBudget::default();
    for _ in 0..rounds {
        b.push(q1, q2);
    }
    Ok(b)
}

/// `c R d k / (eps delta)`, rejected above [`POPULATION_CAP`].
pub fn required_population(rounds: usize, d: usize, k: usize, epsilon: f64, delta: f64, c: f64) -> Result<u64> {
    if !(epsilon > 0.0 && delta > 0.0 && c > 0.0) || rounds == 0 || d == 0 || k == 0 {
        return Err(Error::config("required population needs positive inputs"));
    }
    let n = c * rounds as f64 * d as f64 * k as f64 / (epsilon * delta);
    if !(n <= POPULATION_CAP as f64) {
        return Err(Error::TooLarge {
            what: "required population",
            requested: n.min(usize::MAX as f64) as usize,
            cap: POPULATION_CAP as usize,
        });
    }
    Ok(ceil_tol(n))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrivacyReport {
    pub q_total: u64,
    pub n: u64,
    /// Optimum over states from the convex hull of the eigenphases.
    pub p_opt_exact: f64,
    /// `1/2 + |sin(q / 2N)| / 2`.
    pub p_opt_closed_form: f64,
    /// `q / (2N)`.
    pub bound: f64,
    /// `(e^{q/N} - 1) / 4`.
    pub series_bound: f64,
    /// State-vector or dense density-matrix value at the optimal state, when
    /// the budget is small enough to simulate.
    pub simulated: Option<f64>,
}

impl PrivacyReport {
    pub fn holds(&self) -> bool {
        self.p_opt_exact <= 0.5 + self.bound + 1e-9 && (0.5..=1.0).contains(&self.p_opt_exact)
    }
}

/// Distance from the origin to the convex hull of unit-circle points. The
/// origin lies outside exactly when some angular gap exceeds pi, and the
/// nearest hull point is then the midpoint of the chord across that gap.
fn hull_distance(phases: &[f64]) -> f64 {
    let mut sorted = phases.iter().map(|a| a.rem_euclid(2.0 * PI)).collect::<Vec<_>>();
    sorted.sort_by(f64::total_cmp);
    let max_gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .chain(std::iter::once(sorted[0] + 2.0 * PI - sorted[sorted.len() - 1]))
        .fold(0.0, f64::max);
    if max_gap <= PI {
        0.0
    } else {
        -(max_gap / 2.0).cos()
    }
}

/// Eigenphases of `exp(-i H / 2N)` for `H` a sum of `q` Pauli Z's.
fn budget_phases(q: u64, n: u64) -> Vec<f64> {
    (0..=q).map(|w| -((q as f64) - 2.0 * w as f64) / (2.0 * n as f64)).collect()
}

/// `P_opt = 1/2 + Tr|rho - U rho U^dagger| / 4` maximized over states, for
/// `U = exp(-i sum_q Z_q / 2N)`.
pub fn privacy_analysis(budget: &RotationBudget, n: u64) -> Result<PrivacyReport> {
    let q = budget.total();
    if n == 0 {
        return Err(Error::config("population must be positive"));
    }
    if q >= n {
        return Err(Error::BudgetExhausted(format!("q1 + q2 = {q} is not below N = {n}")));
    }
    // A pure-state optimum suffices by convexity of the trace norm; for pure
    // states Tr|rho - U rho U^dagger| = 2 sqrt(1 - |<psi|U|psi>|^2) and the
    // smallest |<psi|U|psi>| is the hull distance.
    let m = hull_distance(&budget_phases(q, n));
    let p_exact = 0.5 + 0.5 * (1.0 - m * m).max(0.0).sqrt();
    let x = q as f64 / (2.0 * n as f64);
    let simulated = if q as usize <= DENSE_PRIVACY_QUBITS {
        Some(dense_privacy(q as usize, n)?)
    } else if q as usize <= STATEVECTOR_PRIVACY_QUBITS {
        Some(statevector_privacy(q as usize, n)?)
    } else {
        None
    };
    Ok(PrivacyReport {
        q_total: q,
        n,
        p_opt_exact: p_exact,
        p_opt_closed_form: 0.5 + 0.5 * x.sin().abs(),
        bound: x,
        series_bound: 0.25 * ((q as f64 / n as f64).exp() - 1.0),
        simulated,
    })
}

fn extremal_state(q: usize) -> CVector {
    let dim = 1usize << q;
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    v[0] = real(h);
    v[dim - 1] += real(h);
    if q == 0 {
        v[0] = real(1.0);
    }
    CVector::new(v).expect("unit state")
}

/// Dense eigen-decomposition of `rho - U rho U^dagger` on `q` qubits.
pub fn dense_privacy(q: usize, n: u64) -> Result<f64> {
    if q > DENSE_PRIVACY_QUBITS {
        return Err(Error::TooLarge {
            what: "dense privacy register",
            requested: q,
            cap: DENSE_PRIVACY_QUBITS,
        });
    }
    let psi = extremal_state(q);
    let phases: Vec<Complex64> = (0..1usize << q)
        .map(|b| {
            let ones = b.count_ones() as f64;
            let h = q as f64 - 2.0 * ones;
            Complex64::from_polar(1.0, -h / (2.0 * n as f64))
        })
        .collect();
    let u = CMatrix::diag(&phases);
    let rho = psi.outer(&psi);
    let rot = u.matmul(&rho).matmul(&u.adjoint());
    let e = eig_hermitian(&Hermitian::symmetrize(&(&rho - &rot)))?;
    Ok(0.5 + 0.25 * e.values.iter().map(|v| v.abs()).sum::<f64>())
}

/// The same quantity from a register simulation of the rotations, using
/// `Tr|psi psi^dagger - phi phi^dagger| = 2 sqrt(1 - |<psi|phi>|^2)`.
pub fn statevector_privacy(q: usize, n: u64) -> Result<f64> {
    if q == 0 {
        return Ok(0.5);
    }
    let psi = extremal_state(q);
    let mut reg = QuantumRegister::from_state(&psi)?;
    for k in 0..q {
        reg.apply_unitary(&gates::rz(1.0 / n as f64), &[k], &[])?;
    }
    let ov = psi.inner(&reg.state()).norm_sqr();
    Ok(0.5 + 0.5 * (1.0 - ov).max(0.0).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundResult {
    pub centroids: Vec<Vec<f64>>,
    pub p_hat: Vec<f64>,
    pub empty: Vec<bool>,
    /// The exact classical iteration from the same starting centroids.
    pub exact: ClassicalStep,
    pub q1: u64,
    pub q2: u64,
    pub aborted: bool,
    /// Phase 2 was skipped because it would cross the privacy cap.
    pub gated: bool,
}

impl RoundResult {
    pub fn error(&self) -> f64 {
        max_abs_diff(&self.centroids, &self.exact.centroids)
    }

    pub fn min_p(&self) -> f64 {
        self.p_hat
            .iter()
            .zip(&self.empty)
            .filter(|(_, e)| !**e)
            .map(|(p, _)| *p)
            .fold(f64::INFINITY, f64::min)
    }
}

struct Sums {
    counts: Vec<f64>,
    comps: Vec<Vec<f64>>,
}

fn phase_sums(parts: &[Participant], centroids: &[Vec<f64>], tie_seed: u64) -> Sums {
    let k = centroids.len();
    let d = centroids.first().map_or(0, Vec::len);
    let n = parts.len().max(1) as f64;
    let mut counts = vec![0.0; k];
    let mut comps = vec![vec![0.0; d]; k];
    for (j, part) in parts.iter().enumerate() {
        if !part.participates {
            continue;
        }
        let p = assign(&part.x, centroids, j, tie_seed);
        counts[p] += 1.0 / n;
        for (c, x) in comps[p].iter_mut().zip(&part.x) {
            *c += x / n;
        }
    }
    Sums { counts, comps }
}

/// Phase-2 precision for a cluster whose phase-1 estimate is `p_hat`.
pub fn phase_two_precision(epsilon: f64, p_hat: f64) -> f64 {
    epsilon * (p_hat - epsilon / 4.0) / 4.0
}

/// One protocol round. Privacy is not enforced here; see [`run_protocol`].
pub fn run_round(parts: &[Participant], centroids: &[Vec<f64>], cfg: &ProtocolConfig, rng: &mut SimRng) -> Result<RoundResult> {
    run_round_inner(parts, centroids, cfg, false, None, rng)
}

fn run_round_inner(
    parts: &[Participant],
    centroids: &[Vec<f64>],
    cfg: &ProtocolConfig,
    corrupted: bool,
    phase_two_gate: Option<&dyn Fn(u64, u64) -> bool>,
    rng: &mut SimRng,
) -> Result<RoundResult> {
    cfg.validate()?;
    if centroids.len() != cfg.k || centroids.iter().any(|c| c.len() != cfg.d) {
        return Err(Error::invalid("centroids do not match k and d"));
    }
    if parts.iter().any(|p| p.x.len() != cfg.d) {
        return Err(Error::invalid("participant dimension does not match d"));
    }
    let eps = cfg.epsilon;
    let exact = classical_iteration(parts, centroids, cfg.tie_seed, eps);
    let sums = phase_sums(parts, centroids, cfg.tie_seed);

    let s1 = PhaseSchedule::for_precision(eps / 4.0, cfg.shot_error, cfg.estimate_delta)?;
    let p_hat: Vec<f64> = sums
        .counts
        .iter()
        .map(|&p| estimate_phase(p, &s1, corrupted, rng))
        .collect();
    let q1 = s1.rotations();
    let empty: Vec<bool> = p_hat.iter().map(|&p| p <= eps).collect();
    if empty.iter().all(|&e| e) {
        return Ok(RoundResult {
            centroids: centroids.to_vec(),
            p_hat,
            empty,
            exact,
            q1,
            q2: 0,
            aborted: true,
            gated: false,
        });
    }

    let mut schedules = Vec::with_capacity(cfg.k);
    let mut q2 = 0u64;
    for p in 0..cfg.k {
        if empty[p] {
            schedules.push(None);
            continue;
        }
        let s = PhaseSchedule::for_precision(phase_two_precision(eps, p_hat[p]), cfg.shot_error, cfg.estimate_delta)?;
        q2 = q2.max((cfg.d as u64 + 1).saturating_mul(s.rotations()));
        schedules.push(Some(s));
    }
    if let Some(gate) = phase_two_gate {
        if !gate(q1, q2) {
            return Ok(RoundResult {
                centroids: centroids.to_vec(),
                p_hat,
                empty,
                exact,
                q1,
                q2: 0,
                aborted: true,
                gated: true,
            });
        }
    }
    let mut next = centroids.to_vec();
    for p in 0..cfg.k {
        let Some(s) = schedules[p] else { continue };
        let refined = estimate_phase(sums.counts[p], &s, corrupted, rng).max(f64::MIN_POSITIVE);
        for q in 0..cfg.d {
            let comp = estimate_phase(sums.comps[p][q], &s, corrupted, rng);
            next[p][q] = (comp / refined).clamp(-1.0, 1.0);
        }
    }
    reseed(&mut next, &empty, cfg.d);
    Ok(RoundResult {
        centroids: next,
        p_hat,
        empty,
        exact,
        q1,
        q2,
        aborted: false,
        gated: false,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolRun {
    pub trajectory: Vec<RoundResult>,
    pub budget: RotationBudget,
    pub privacy: PrivacyReport,
    pub converged: bool,
    /// Stopped because another round would cross the privacy cap.
    pub exhausted: bool,
}

impl ProtocolRun {
    pub fn final_centroids(&self) -> Option<&Vec<Vec<f64>>> {
        self.trajectory.iter().rev().find(|r| !r.aborted).map(|r| &r.centroids)
    }
}

fn leak(q: u64, n: u64) -> f64 {
    if q >= n {
        return f64::INFINITY;
    }
    0.5 * (q as f64 / (2.0 * n as f64)).sin().abs()
}

/// Repeats rounds until the centroids settle, `rounds` is reached, or the
/// next round would push `P_opt - 1/2` above `privacy_delta`.
pub fn run_protocol(parts: &[Participant], cfg: &ProtocolConfig, init: &[Vec<f64>], rng: &mut SimRng) -> Result<ProtocolRun> {
    cfg.validate()?;
    let n = parts.len() as u64;
    let mut budget = RotationBudget::default();
    let mut trajectory = Vec::new();
    let mut centroids = init.to_vec();
    let mut planning_p = 1.0 / cfg.k as f64;
    let mut converged = false;
    let mut exhausted = false;
    let s1 = PhaseSchedule::for_precision(cfg.epsilon / 4.0, cfg.shot_error, cfg.estimate_delta)?;
    // Without a configured cap the run still stops short of q1 + q2 = N.
    let cap = cfg.privacy_delta.unwrap_or(f64::MAX);
    for _ in 0..cfg.rounds {
        let p2 = phase_two_precision(cfg.epsilon, planning_p);
        let planned_q2 = if p2 > 0.0 {
            (cfg.d as u64 + 1).saturating_mul(PhaseSchedule::for_precision(p2, cfg.shot_error, cfg.estimate_delta)?.rotations())
        } else {
            u64::MAX
        };
        let planned = budget.total().saturating_add(s1.rotations()).saturating_add(planned_q2);
        if leak(planned, n) > cap {
            exhausted = true;
            break;
        }
        let spent = budget.total();
        let gate = |q1: u64, q2: u64| leak(spent.saturating_add(q1).saturating_add(q2), n) <= cap;
        let round = run_round_inner(parts, &centroids, cfg, false, Some(&gate), rng)?;
        budget.push(round.q1, round.q2);
        let moved = max_abs_diff(&centroids, &round.centroids);
        let (aborted, gated) = (round.aborted, round.gated);
        if !aborted {
            centroids = round.centroids.clone();
            let m = round.min_p();
            if m.is_finite() {
                planning_p = m;
            }
        }
        trajectory.push(round);
        if aborted {
            exhausted = gated;
            break;
        }
        if moved <= cfg.convergence {
            converged = true;
            break;
        }
    }
    let privacy = privacy_analysis(&budget, n.max(1))?;
    Ok(ProtocolRun {
        trajectory,
        budget,
        privacy,
        converged,
        exhausted,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupMedianResult {
    pub per_group: Vec<Vec<Vec<f64>>>,
    pub aggregate: Vec<Vec<f64>>,
}

/// Splits the (publicly shuffled) participants into `groups` contiguous
/// groups, runs one round per group and takes the componentwise median.
/// Groups listed in `corrupted` see a channel with random readout phases.
pub fn group_median_aggregate(
    parts: &[Participant],
    centroids: &[Vec<f64>],
    cfg: &ProtocolConfig,
    groups: usize,
    corrupted: &[usize],
    rng: &mut SimRng,
) -> Result<GroupMedianResult> {
    if groups < 3 || groups % 2 == 0 {
        return Err(Error::config(format!("group count must be odd and at least 3, got {groups}")));
    }
    if parts.len() < groups {
        return Err(Error::invalid("fewer participants than groups"));
    }
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.shuffle(rng);
    let size = parts.len() / groups;
    let mut per_group = Vec::with_capacity(groups);
    for g in 0..groups {
        let end = if g + 1 == groups { parts.len() } else { (g + 1) * size };
        let members: Vec<Participant> = order[g * size..end].iter().map(|&i| parts[i].clone()).collect();
        let r = run_round_inner(&members, centroids, cfg, corrupted.contains(&g), None, rng)?;
        per_group.push(r.centroids);
    }
    let aggregate = (0..cfg.k)
        .map(|p| {
            (0..cfg.d)
                .map(|q| {
                    let mut v: Vec<f64> = per_group.iter().map(|c| c[p][q]).collect();
                    v.sort_by(f64::total_cmp);
                    v[v.len() / 2]
                })
                .collect()
        })
        .collect();
    Ok(GroupMedianResult { per_group, aggregate })
}

/// One protocol round on a fully corrupted channel, without grouping.
pub fn corrupted_round(parts: &[Participant], centroids: &[Vec<f64>], cfg: &ProtocolConfig, rng: &mut SimRng) -> Result<RoundResult> {
    run_round_inner(parts, centroids, cfg, true, None, rng)
}

/// `per_blob` points around each center, uniform within `spread` per axis.
pub fn blob_participants(centers: &[Vec<f64>], per_blob: usize, spread: f64, rng: &mut SimRng) -> Vec<Participant> {
    let mut out = Vec::with_capacity(centers.len() * per_blob);
    for c in centers {
        for _ in 0..per_blob {
            let x: Vec<f64> = c.iter().map(|v| v + rng.random_range(-spread..=spread)).collect();
            out.push(Participant::new(&x, true));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    #[test]
    fn channel_examples() {
        assert_eq!(ghz_phase_channel(&[0.0; 4], 3).unwrap(), 1.0);
        assert!((ghz_phase_channel(&[PI / 4.0, PI / 4.0], 1).unwrap() - 0.5).abs() < 1e-15);
        assert!(ghz_phase_channel(&[1.0, 1.0, 1.5], 1).is_err());
        let mut r = rng(1);
        for n in 1..=10 {
            let th: Vec<f64> = (0..n).map(|_| r.random_range(-0.3..0.3) / n as f64).collect();
            for t in [1, 2, 5] {
                let a = ghz_phase_channel(&th, t).unwrap();
                let b = ghz_statevector_probability(&th, t).unwrap();
                assert!((a - b).abs() < 1e-12, "n={n} t={t}");
            }
        }
    }

    #[test]
    fn phase_ladder_hits_precision() {
        let mut r = rng(2);
        for &prec in &[0.05, 0.01, 0.002] {
            let s = PhaseSchedule::for_precision(prec, 0.3, 1e-6).unwrap();
            assert!(s.precision() <= prec);
            for _ in 0..200 {
                let phi = r.random_range(-1.0..1.0);
                assert!((estimate_phase(phi, &s, false, &mut r) - phi).abs() <= prec);
            }
        }
    }

    #[test]
    fn budget_examples() {
        let b = rotation_budget(1, 2, 0.1, 0.5, 1.0, 1.0).unwrap();
        assert_eq!((b.q1, b.q2), (10, 40));
        assert_eq!(rotation_budget(1, 0, 0.1, 0.5, 1.0, 1.0).unwrap().q2, 0);
        let h = rotation_budget(1, 2, 0.2, 0.5, 1.0, 1.0).unwrap();
        assert_eq!((h.q1, h.q2), (5, 20));
        assert!(rotation_budget(1, 2, 0.1, 0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn population_examples() {
        assert_eq!(required_population(1, 1, 1, 0.1, 0.1, 1.0).unwrap(), 100);
        assert_eq!(required_population(2, 1, 1, 0.1, 0.1, 1.0).unwrap(), 200);
        assert!(required_population(1, 1, 1, 0.1, 1e-12, 1.0).is_err());
    }

    #[test]
    fn privacy_examples() {
        let zero = privacy_analysis(&RotationBudget::default(), 100).unwrap();
        assert_eq!(zero.p_opt_exact, 0.5);
        let mut b = RotationBudget::default();
        b.push(4, 6);
        let rep = privacy_analysis(&b, 100).unwrap();
        assert!((rep.p_opt_closed_form - (0.5 + 0.5 * 0.05f64.sin())).abs() < 1e-15);
        assert!((rep.p_opt_exact - rep.p_opt_closed_form).abs() < 1e-9);
        assert!((rep.simulated.unwrap() - rep.p_opt_closed_form).abs() < 1e-9);
        assert!(rep.holds());
        for q in 1..=6 {
            let d = dense_privacy(q, 37).unwrap();
            let s = statevector_privacy(q, 37).unwrap();
            assert!((d - s).abs() < 1e-9, "q={q}");
        }
        let mut over = RotationBudget::default();
        over.push(60, 40);
        assert!(privacy_analysis(&over, 100).is_err());
    }

    #[test]
    fn ratio_error_propagation() {
        for &p in &[0.2f64, 0.5, 0.9] {
            for &e in &[0.1, 0.05, 0.01] {
                if p > e {
                    assert!((1.0 / p - 1.0 / (p + e)).abs() <= e / (p * p));
                }
            }
        }
    }

    #[test]
    fn round_examples() {
        let mut r = rng(3);
        let cfg1 = ProtocolConfig::new(1, 2, 0.1).unwrap();
        let parts = vec![Participant::new(&[1.0, 0.0], true); 50];
        let out = run_round(&parts, &[vec![0.0, 0.0]], &cfg1, &mut r).unwrap();
        assert!((out.p_hat[0] - 1.0).abs() <= 0.1);
        assert!(out.error() <= 0.1);
        assert!((out.centroids[0][0] - 1.0).abs() <= 0.1);

        let cfg2 = ProtocolConfig::new(2, 2, 0.1).unwrap();
        let mut parts = vec![Participant::new(&[0.8, 0.0], true); 20];
        parts.extend(vec![Participant::new(&[-0.8, 0.0], true); 20]);
        let out = run_round(&parts, &[vec![1.0, 0.0], vec![-1.0, 0.0]], &cfg2, &mut r).unwrap();
        for p in 0..2 {
            assert!((out.p_hat[p] - 0.5).abs() <= 0.1);
        }
        assert!(out.error() <= 0.1);

        let idle = vec![Participant::new(&[0.3, 0.3], false); 10];
        let out = run_round(&idle, &[vec![0.0, 0.0], vec![1.0, 1.0]], &cfg2, &mut r).unwrap();
        assert!(out.aborted);
        assert!(out.p_hat.iter().all(|&p| p <= 0.1));
    }

    #[test]
    fn protocol_examples() {
        let mut r = rng(4);
        let parts = blob_participants(&[vec![0.6, 0.5], vec![-0.5, -0.6]], 500, 0.2, &mut r);
        let mut cfg = ProtocolConfig::new(2, 2, 0.05).unwrap();
        cfg.convergence = 1e-3;
        let init = vec![vec![0.2, 0.2], vec![-0.2, -0.1]];
        // A thousand participants cannot absorb tens of thousands of rotations.
        let run = run_protocol(&parts, &cfg, &init, &mut r).unwrap();
        assert!(run.trajectory.is_empty() && run.exhausted);
        assert_eq!(run.privacy.p_opt_exact, 0.5);

        let fixed = lloyd(&parts, &init, 0, 1e-12, 100);
        let mut c = init.clone();
        for _ in 0..10 {
            c = run_round(&parts, &c, &cfg, &mut r).unwrap().centroids;
        }
        assert!(max_abs_diff(&c, &fixed) <= 2.0 * cfg.epsilon);

        let cfg1 = ProtocolConfig::new(1, 2, 0.05).unwrap();
        let one = run_round(&parts, &[vec![0.0, 0.0]], &cfg1, &mut r).unwrap();
        let mean: Vec<f64> = (0..2).map(|q| parts.iter().map(|p| p.x[q]).sum::<f64>() / parts.len() as f64).collect();
        assert!(max_abs_diff(&one.centroids, &[mean]) <= 0.05);

        let mut capped = ProtocolConfig::new(2, 2, 0.1).unwrap();
        capped.privacy_delta = Some(0.0);
        let none = run_protocol(&parts, &capped, &init, &mut r).unwrap();
        assert!(none.trajectory.is_empty());
        assert!(none.exhausted);
    }

    #[test]
    fn group_median_examples() {
        let mut r = rng(5);
        let parts = blob_participants(&[vec![0.5, 0.5], vec![-0.5, -0.5]], 1500, 0.1, &mut r);
        let cfg = ProtocolConfig::new(2, 2, 0.05).unwrap();
        let init = vec![vec![0.4, 0.4], vec![-0.4, -0.4]];
        let clean = classical_iteration(&parts, &init, 0, cfg.epsilon).centroids;
        let g = group_median_aggregate(&parts, &init, &cfg, 5, &[2], &mut r).unwrap();
        assert!(max_abs_diff(&g.aggregate, &clean) <= 2.0 * cfg.epsilon);
        let g3 = group_median_aggregate(&parts, &init, &cfg, 3, &[0], &mut r).unwrap();
        for p in 0..2 {
            for q in 0..2 {
                let lo = g3.per_group[1][p][q].min(g3.per_group[2][p][q]);
                let hi = g3.per_group[1][p][q].max(g3.per_group[2][p][q]);
                assert!((lo..=hi).contains(&g3.aggregate[p][q]));
            }
        }
        assert!(group_median_aggregate(&parts, &init, &cfg, 4, &[], &mut r).is_err());
    }
}
