//! Truncated-Taylor simulation of `exp(-i M t)` for a sparse real symmetric
//! `M` whose entries come from a noisy probabilistic oracle.
//!
//! Everything happens at the operator level: the one-sparse terms, the sign
//! discretization and the oracle's output distribution are all averaged into
//! one effective matrix, which is then evolved by `r` segments of an order-`K`
//! Taylor series. Segments are kept un-normalized; [`polar_unitary`] gives the
//! post-selected unitary.

use std::f64::consts::{LN_2, PI};

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, real, spectral_norm, CMatrix, Hermitian};
use crate::noisy::{FailureMode, QueryCounter};
use crate::rng::SimRng;

const ZERO_TOL: f64 = 1e-12;

/// Real symmetric matrix stored by rows of `(column, value)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHermitian {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseHermitian {
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("empty matrix"));
        }
        let mut out = Vec::with_capacity(n);
        for (p, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            let mut r = Vec::new();
            for (q, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("non-finite entry at ({p}, {q})")));
                }
                if v != rows[q][p] {
                    return Err(Error::NotHermitian {
                        defect: (v - rows[q][p]).abs(),
                    });
                }
                if v.abs() > ZERO_TOL {
                    r.push((q, v));
                }
            }
            out.push(r);
        }
        Ok(Self { rows: out })
    }

    /// Real part of a Hermitian operator; fails if the imaginary part is not
    /// negligible.
    pub fn from_hermitian(h: &Hermitian) -> Result<Self> {
        if !h.is_real(1e-12) {
            return Err(Error::invalid("sparse oracle matrices must be real"));
        }
        let n = h.dim();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|p| (0..n).map(|q| 0.5 * (h[(p, q)].re + h[(q, p)].re)).collect())
            .collect();
        Self::from_dense(&rows)
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Maximum number of nonzeros in a row.
    pub fn sparsity(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// The `j`-th nonzero of row `p` as `(column, value)`.
    pub fn entry(&self, p: usize, j: usize) -> Option<(usize, f64)> {
        self.rows.get(p)?.get(j).copied()
    }

    pub fn value(&self, p: usize, q: usize) -> f64 {
        self.rows[p]
            .iter()
            .find(|(c, _)| *c == q)
            .map_or(0.0, |&(_, v)| v)
    }

    pub fn max_norm(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter().map(|(_, v)| v.abs()))
            .fold(0.0, f64::max)
    }

    /// Upper-triangle nonzeros `(p, q, value)` with `p <= q`.
    pub fn upper_entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (p, row) in self.rows.iter().enumerate() {
            for &(q, v) in row {
                if q >= p {
                    out.push((p, q, v));
                }
            }
        }
        out
    }

    pub fn to_matrix(&self) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n);
        for (p, row) in self.rows.iter().enumerate() {
            for &(q, v) in row {
                m[(p, q)] = real(v);
            }
        }
        m
    }

    pub fn to_hermitian(&self) -> Hermitian {
        Hermitian::symmetrize(&self.to_matrix())
    }
}

/// One layer of the decomposition: at most one nonzero per row and column.
#[derive(Clone, Debug, PartialEq)]
pub struct OneSparseTerm {
    pub color: usize,
    pub diagonal: bool,
    /// `(p, q, value)` with `p <= q`.
    pub entries: Vec<(usize, usize, f64)>,
}

impl OneSparseTerm {
    pub fn to_matrix(&self, n: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n);
        for &(p, q, v) in &self.entries {
            m[(p, q)] = real(v);
            m[(q, p)] = real(v);
        }
        m
    }

    pub fn max_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.2.abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OneSparseDecomposition {
    pub dim: usize,
    pub terms: Vec<OneSparseTerm>,
}

impl OneSparseDecomposition {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn off_diagonal_colors(&self) -> usize {
        self.terms.iter().filter(|t| !t.diagonal).count()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim);
        for t in &self.terms {
            m = &m + &t.to_matrix(self.dim);
        }
        m
    }
}

/// Diagonal entries go to their own term; off-diagonal edges are colored
/// greedily with the smallest color free at both endpoints.
pub fn one_sparse_decompose(h: &SparseHermitian) -> OneSparseDecomposition {
    let n = h.dim();
    let mut diag = Vec::new();
    let mut used: Vec<Vec<bool>> = vec![Vec::new(); n];
    let mut layers: Vec<Vec<(usize, usize, f64)>> = Vec::new();
    for (p, q, v) in h.upper_entries() {
        if p == q {
            diag.push((p, q, v));
            continue;
        }
        let free = |c: usize| !used[p].get(c).copied().unwrap_or(false) && !used[q].get(c).copied().unwrap_or(false);
        let c = (0..).find(|&c| free(c)).expect("unbounded color search");
        for x in [p, q] {
            if used[x].len() <= c {
                used[x].resize(c + 1, false);
            }
            used[x][c] = true;
        }
        if layers.len() <= c {
            layers.resize(c + 1, Vec::new());
        }
        layers[c].push((p, q, v));
    }
    let mut terms = Vec::new();
    if !diag.is_empty() {
        terms.push(OneSparseTerm {
            color: 0,
            diagonal: true,
            entries: diag,
        });
    }
    for entries in layers {
        terms.push(OneSparseTerm {
            color: terms.len(),
            diagonal: false,
            entries,
        });
    }
    OneSparseDecomposition { dim: n, terms }
}

/// Sign of the `m`-th summand (`1 <= m <= M`) for a normalized entry `a`.
pub fn sign_bit(a: f64, m: usize, m_disc: usize) -> f64 {
    let mf = m_disc as f64;
    if a > (2.0 * m as f64 - 1.0 - mf) / mf {
        1.0
    } else {
        -1.0
    }
}

/// Average of [`sign_bit`] over `m = 1..=M`, in closed form.
pub fn sign_average(a: f64, m_disc: usize) -> f64 {
    let mf = m_disc as f64;
    // Number of m with 2m - 1 - M < a M, i.e. m < (a M + M + 1) / 2.
    let bound = (a * mf + mf + 1.0) / 2.0;
    let count = if bound <= 1.0 {
        0.0
    } else {
        ((bound.ceil() - 1.0).min(mf)).max(0.0)
    };
    (2.0 * count - mf) / mf
}

/// The `M` signed one-sparse summands whose average is `term / max_norm`.
/// Each squares to the projector onto the term's support.
pub fn sign_decompose(term: &OneSparseTerm, dim: usize, max_norm: f64, m_disc: usize) -> Result<Vec<CMatrix>> {
    if m_disc == 0 {
        return Err(Error::config("M_disc must be at least 1"));
    }
    if max_norm <= 0.0 {
        return Ok(Vec::new());
    }
    if term.max_norm() > max_norm * (1.0 + 1e-12) {
        return Err(Error::invalid("term exceeds the max-norm bound"));
    }
    if m_disc.saturating_mul(dim * dim) > 1 << 26 {
        return Err(Error::TooLarge {
            what: "sign decomposition size",
            requested: m_disc.saturating_mul(dim * dim),
            cap: 1 << 26,
        });
    }
    Ok((1..=m_disc)
        .map(|m| {
            let mut f = CMatrix::zeros(dim);
            for &(p, q, v) in &term.entries {
                let s = real(sign_bit(v / max_norm, m, m_disc));
                f[(p, q)] = s;
                f[(q, p)] = s;
            }
            f
        })
        .collect())
}

/// Plain order-`K` truncation of `exp(-i H t)`.
#[derive(Clone, Debug)]
pub struct TaylorSegment {
    pub operator: CMatrix,
    /// `x^{K+1}/(K+1)! e^x` with `x = ||H|| |t|`.
    pub remainder_bound: f64,
}

impl TaylorSegment {
    /// `||S psi||`, the norm a successful post-selection divides out.
    pub fn success_amplitude(&self, psi: &crate::linalg::CVector) -> f64 {
        self.operator.apply(psi).norm()
    }
}

pub fn taylor_segment(h: &Hermitian, t: f64, k: usize) -> Result<TaylorSegment> {
    let x = spectral_norm(h.matrix()) * t.abs();
    if x > LN_2 * (1.0 + 1e-12) {
        return Err(Error::NormBound { norm: x, bound: LN_2 });
    }
    Ok(TaylorSegment {
        operator: truncated_series(h.matrix(), t, k),
        remainder_bound: remainder_bound(x, k),
    })
}

fn truncated_series(h: &CMatrix, t: f64, k: usize) -> CMatrix {
    let n = h.dim();
    let a = h.scale(crate::linalg::c64(0.0, -t));
    let mut term = CMatrix::identity(n);
    let mut sum = CMatrix::identity(n);
    for q in 1..=k {
        term = term.matmul(&a).scale(real(1.0 / q as f64));
        sum = &sum + &term;
    }
    sum
}

pub fn remainder_bound(x: f64, k: usize) -> f64 {
    let mut f = 1.0;
    for q in 1..=k + 1 {
        f *= x / q as f64;
    }
    f * x.exp()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaylorConfig {
    /// Truncation order per segment.
    pub order: usize,
    /// Segment count; `None` picks `ceil(t ||M||_max d_eff / ln 2)`.
    pub segments: Option<usize>,
    pub m_disc: usize,
    pub eta: f64,
    pub delta: f64,
    pub time: f64,
    pub failure_mode: FailureMode,
    /// `delta <= delta_constant / M_disc` whenever `delta > 0`.
    pub delta_constant: f64,
}

impl Default for TaylorConfig {
    fn default() -> Self {
        Self {
            order: 12,
            segments: None,
            m_disc: 100_000,
            eta: 0.0,
            delta: 0.0,
            time: 1.0,
            failure_mode: FailureMode::WorstCase,
            delta_constant: 100.0,
        }
    }
}

impl TaylorConfig {
    /// Largest `M_disc` allowed for a given `delta`, capped at `cap`.
    pub fn m_disc_for(delta: f64, delta_constant: f64, cap: usize) -> usize {
        if delta <= 0.0 {
            cap
        } else {
            ((delta_constant / delta).floor() as usize).clamp(1, cap)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::config("Taylor order K must be at least 1"));
        }
        if self.segments == Some(0) {
            return Err(Error::config("segment count r must be at least 1"));
        }
        if self.m_disc == 0 {
            return Err(Error::config("M_disc must be at least 1"));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::config(format!("η must be nonnegative, got {}", self.eta)));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::config(format!("δ must lie in [0, 1), got {}", self.delta)));
        }
        if self.delta > 0.0 && self.delta > self.delta_constant / self.m_disc as f64 {
            return Err(Error::config(format!(
                "δ = {} exceeds {}/M_disc with M_disc = {}",
                self.delta, self.delta_constant, self.m_disc
            )));
        }
        if !(self.time.is_finite() && self.time != 0.0) {
            return Err(Error::config("evolution time must be finite and nonzero"));
        }
        Ok(())
    }

    pub fn segments_for(&self, max_norm: f64, d_eff: usize) -> usize {
        self.segments.unwrap_or_else(|| {
            let r = (self.time.abs() * max_norm * d_eff as f64 / LN_2).ceil();
            (r as usize).max(1)
        })
    }
}

/// Output distribution of one matrix-element read: weighted values in
/// `[-max, max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryDistribution {
    pub outcomes: Vec<(f64, f64)>,
}

impl EntryDistribution {
    pub fn mean(&self) -> f64 {
        self.outcomes.iter().map(|(w, v)| w * v).sum()
    }

    /// Mean after sign discretization at `m_disc` levels.
    pub fn discretized_mean(&self, max_norm: f64, m_disc: usize) -> f64 {
        if max_norm <= 0.0 {
            return 0.0;
        }
        max_norm
            * self
                .outcomes
                .iter()
                .map(|(w, v)| w * sign_average(v / max_norm, m_disc))
                .sum::<f64>()
    }
}

/// Success branch: `SUCCESS_BRANCHES` values within `eta` of the truth with
/// random weights summing to `1 - delta`. Failure branch (weight `delta`):
/// the opposite extreme, or a uniform value.
pub const SUCCESS_BRANCHES: usize = 4;

pub fn noisy_entry(x: f64, max_norm: f64, eta: f64, delta: f64, mode: FailureMode, rng: &mut SimRng) -> EntryDistribution {
    let raw: Vec<f64> = (0..SUCCESS_BRANCHES).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let mut outcomes: Vec<(f64, f64)> = raw
        .iter()
        .map(|w| {
            let u = if eta > 0.0 { rng.random_range(-1.0..=1.0) } else { 0.0 };
            ((1.0 - delta) * w / total, (x + eta * u).clamp(-max_norm, max_norm))
        })
        .collect();
    if delta > 0.0 {
        let v = match mode {
            FailureMode::WorstCase => {
                if x >= 0.0 {
                    -max_norm
                } else {
                    max_norm
                }
            }
            FailureMode::Uniform => rng.random_range(-max_norm..=max_norm),
        };
        outcomes.push((delta, v));
    }
    EntryDistribution { outcomes }
}

#[derive(Clone, Debug)]
pub struct NoisySimulation {
    /// Product of the `r` un-normalized segments.
    pub q: CMatrix,
    /// The averaged, sign-discretized matrix the segments evolve.
    pub average: Hermitian,
    pub colors: usize,
    pub order: usize,
    pub segments: usize,
    pub m_disc: usize,
    pub truncation_bound: f64,
    /// `||Q^dagger Q - I||`.
    pub unitarity_drift: f64,
    pub queries: QueryCounter,
}

/// Reads every upper-triangle entry once through the noisy oracle, averages
/// the sign-discretized outcomes into one matrix and evolves it.
pub fn simulate_noisy(h: &SparseHermitian, cfg: &TaylorConfig, rng: &mut SimRng) -> Result<NoisySimulation> {
    cfg.validate()?;
    let n = h.dim();
    let max = h.max_norm();
    let decomposition = one_sparse_decompose(h);
    let colors = decomposition.len();
    let mut avg = CMatrix::zeros(n);
    for term in &decomposition.terms {
        for &(p, q, x) in &term.entries {
            let dist = noisy_entry(x, max, cfg.eta, cfg.delta, cfg.failure_mode, rng);
            let v = real(dist.discretized_mean(max, cfg.m_disc));
            avg[(p, q)] = v;
            avg[(q, p)] = v;
        }
    }
    let average = Hermitian::symmetrize(&avg);
    let r = cfg.segments_for(max, colors.max(1));
    let tau = cfg.time / r as f64;
    let seg = taylor_segment(&average, tau, cfg.order)?;
    let q = seg.operator.pow(r as u64);
    let drift = spectral_norm(&(&q.adjoint().matmul(&q) - &CMatrix::identity(n)));
    let mut queries = QueryCounter::new();
    queries.charge((r as u64).saturating_mul(cfg.order as u64));
    Ok(NoisySimulation {
        q,
        average,
        colors,
        order: cfg.order,
        segments: r,
        m_disc: cfg.m_disc,
        truncation_bound: r as f64 * seg.remainder_bound,
        unitarity_drift: drift,
        queries,
    })
}

/// Unitary polar factor `Q (Q^dagger Q)^{-1/2}`.
pub fn polar_unitary(q: &CMatrix) -> Result<CMatrix> {
    let g = Hermitian::symmetrize(&q.adjoint().matmul(q));
    let e = eig_hermitian(&g)?;
    if e.values.iter().any(|&s| s <= 1e-14) {
        return Err(Error::Singular);
    }
    Ok(q.matmul(&e.reconstruct_with(|s| real(1.0 / s.sqrt()))))
}

/// `H` with `exp(-i H t)` equal to the polar factor of `Q`, via the Cayley
/// transform on the principal branch.
pub fn extract_effective_hamiltonian(q: &CMatrix, t: f64) -> Result<Hermitian> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::invalid("extraction time must be finite and nonzero"));
    }
    let u = polar_unitary(q)?;
    let dist = spectral_norm(&(q - &u));
    if dist > 0.1 {
        return Err(Error::invalid(format!("operator is {dist:.3} away from unitary")));
    }
    let n = q.dim();
    let id = CMatrix::identity(n);
    let plus = (&id + &u).inverse().map_err(|_| Error::PhaseWrap { phase: PI })?;
    let k = (&id - &u).matmul(&plus).scale(crate::linalg::c64(0.0, 1.0));
    let e = eig_hermitian(&Hermitian::symmetrize(&k))?;
    for &kv in &e.values {
        let theta = 2.0 * kv.atan();
        if theta.abs() >= PI - 0.1 {
            return Err(Error::PhaseWrap { phase: theta });
        }
    }
    Ok(Hermitian::symmetrize(&e.reconstruct_with(|kv| real(-2.0 * kv.atan() / t))))
}

/// Diagnostics of one noisy-LCU run against the noise-free matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LcuReport {
    pub dim: usize,
    pub sparsity: usize,
    pub colors: usize,
    pub order: usize,
    pub segments: usize,
    pub m_disc: usize,
    pub eta: f64,
    pub delta: f64,
    /// `||M - M_eff||` for the extracted generator.
    pub deviation: f64,
    /// `d (||M||_max delta + eta)`.
    pub bound_unit: f64,
    pub truncation_bound: f64,
    pub unitarity_drift: f64,
    pub queries: u64,
}

impl LcuReport {
    /// Constant `c` needed for `deviation <= c * bound_unit`; `None` when the
    /// noise is zero.
    pub fn fitted_constant(&self) -> Option<f64> {
        (self.bound_unit > 0.0).then(|| self.deviation / self.bound_unit)
    }
}

pub fn lcu_experiment(h: &SparseHermitian, cfg: &TaylorConfig, rng: &mut SimRng) -> Result<LcuReport> {
    let sim = simulate_noisy(h, cfg, rng)?;
    let eff = extract_effective_hamiltonian(&sim.q, cfg.time)?;
    let deviation = spectral_norm(&(&h.to_matrix() - eff.matrix()));
    let d = h.sparsity();
    Ok(LcuReport {
        dim: h.dim(),
        sparsity: d,
        colors: sim.colors,
        order: sim.order,
        segments: sim.segments,
        m_disc: sim.m_disc,
        eta: cfg.eta,
        delta: cfg.delta,
        deviation,
        bound_unit: d as f64 * (h.max_norm() * cfg.delta + cfg.eta),
        truncation_bound: sim.truncation_bound,
        unitarity_drift: sim.unitarity_drift,
        queries: sim.queries.total(),
    })
}

/// Random real symmetric `n x n` matrix with at most `d` nonzeros per row,
/// entries on the exact sign-discretization grid `max (2j/M - 1)`.
pub fn random_sparse_instance(n: usize, d: usize, max_norm: f64, m_disc: usize, rng: &mut SimRng) -> Result<SparseHermitian> {
    if d == 0 || n == 0 {
        return Err(Error::invalid("need n >= 1 and d >= 1"));
    }
    let mut rows = vec![vec![0.0; n]; n];
    let mut nnz = vec![0usize; n];
    // One entry at the max-norm so the grid is exact relative to ||M||_max.
    rows[0][0] = max_norm;
    nnz[0] = 1;
    let grid = |rng: &mut SimRng| -> f64 {
        loop {
            let j = rng.random_range(0..=m_disc);
            let v = max_norm * (2.0 * j as f64 / m_disc as f64 - 1.0);
            if v.abs() > 0.05 * max_norm {
                return v;
            }
        }
    };
    for _ in 0..n * d {
        let p = rng.random_range(0..n);
        let q = rng.random_range(0..n);
        if rows[p][q] != 0.0 {
            continue;
        }
        if nnz[p] >= d || nnz[q] >= d {
            continue;
        }
        let v = grid(rng);
        rows[p][q] = v;
        rows[q][p] = v;
        nnz[p] += 1;
        if p != q {
            nnz[q] += 1;
        }
    }
    SparseHermitian::from_dense(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, operator_exp};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    #[test]
    fn decomposition_examples() {
        let diag = SparseHermitian::from_dense(&[vec![1.0, 0.0], vec![0.0, -0.5]]).unwrap();
        assert_eq!(one_sparse_decompose(&diag).len(), 1);
        let x = SparseHermitian::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(one_sparse_decompose(&x).len(), 1);
        assert!(SparseHermitian::from_dense(&[vec![0.0, 1.0], vec![0.5, 0.0]]).is_err());

        let mut r = rng(1);
        let h = random_sparse_instance(16, 3, 0.5, 1000, &mut r).unwrap();
        assert!(h.sparsity() <= 3);
        let dec = one_sparse_decompose(&h);
        assert!(dec.len() <= 2 * 3 - 1 + 1);
        assert_eq!((&dec.reconstruct() - &h.to_matrix()).max_abs(), 0.0);
        for t in &dec.terms {
            let m = t.to_matrix(16);
            for p in 0..16 {
                assert!(m.row_nnz(p, 0.0) <= 1);
            }
        }
    }

    #[test]
    fn sign_examples() {
        let m = 1000;
        assert_eq!(sign_average(1.0, m), 1.0);
        assert!(sign_average(0.0, m).abs() <= 1.0 / m as f64);
        assert!(sign_average(0.0, 7).abs() <= 1.0 / 7.0);
        assert!((sign_average(0.37, m) - 0.37).abs() <= 2.0 / m as f64);
        // Closed form agrees with the explicit count.
        for &(a, mm) in &[(0.37, 1000), (-0.2, 13), (0.999, 50), (-1.0, 9), (0.0, 10)] {
            let explicit: f64 = (1..=mm).map(|k| sign_bit(a, k, mm)).sum::<f64>() / mm as f64;
            assert!((sign_average(a, mm) - explicit).abs() < 1e-12, "a={a} M={mm}");
        }
    }

    #[test]
    fn sign_summands_are_self_inverse() {
        let term = OneSparseTerm {
            color: 1,
            diagonal: false,
            entries: vec![(0, 1, 0.3), (2, 3, -0.7)],
        };
        let fs = sign_decompose(&term, 4, 1.0, 20).unwrap();
        assert_eq!(fs.len(), 20);
        let mut avg = CMatrix::zeros(4);
        for f in &fs {
            let sq = f.matmul(f);
            assert_eq!(sq, CMatrix::identity(4));
            avg = &avg + f;
        }
        let avg = avg.scale(real(1.0 / 20.0));
        assert!((avg[(0, 1)].re - 0.3).abs() <= 2.0 / 20.0);
        assert!(sign_decompose(&term, 4, 0.0, 20).unwrap().is_empty());
    }

    #[test]
    fn taylor_examples() {
        let z = Hermitian::pauli_z();
        let s0 = taylor_segment(&z, 0.0, 3).unwrap();
        assert_eq!(s0.operator, CMatrix::identity(2));
        let s = taylor_segment(&z, 0.5, 10).unwrap();
        let exact = operator_exp(&z, 0.5).unwrap();
        let err = spectral_norm(&(&s.operator - &exact));
        assert!((s.remainder_bound - 0.5f64.powi(11) / 39_916_800.0 * 0.5f64.exp()).abs() < 1e-20);
        assert!(err <= s.remainder_bound);
        let s1 = taylor_segment(&z, 0.1, 1).unwrap();
        let expect = &CMatrix::identity(2) - &z.matrix().scale(c64(0.0, 0.1));
        assert!((&s1.operator - &expect).max_abs() < 1e-15);
        assert!(spectral_norm(&(&s1.operator - &operator_exp(&z, 0.1).unwrap())) <= 0.01 / 2.0 * 0.1f64.exp());
        assert!(taylor_segment(&z, 1.0, 5).is_err());
    }

    #[test]
    fn extraction_examples() {
        let z = Hermitian::pauli_z();
        let q = operator_exp(&z, 0.3).unwrap();
        let h = extract_effective_hamiltonian(&q, 0.3).unwrap();
        assert!((h.matrix() - z.matrix()).max_abs() < 1e-9);
        let h0 = extract_effective_hamiltonian(&CMatrix::identity(3), 1.0).unwrap();
        assert!(h0.matrix().max_abs() < 1e-12);
        let wrap = operator_exp(&z, 3.1).unwrap();
        assert!(matches!(extract_effective_hamiltonian(&wrap, 1.0), Err(Error::PhaseWrap { .. })));
    }

    #[test]
    fn noiseless_reproduces_exponential() {
        let mut r = rng(2);
        let h = random_sparse_instance(8, 2, 0.5, 1000, &mut r).unwrap();
        let cfg = TaylorConfig {
            m_disc: 1000,
            ..TaylorConfig::default()
        };
        let sim = simulate_noisy(&h, &cfg, &mut r).unwrap();
        let exact = operator_exp(&h.to_hermitian(), 1.0).unwrap();
        let err = spectral_norm(&(&sim.q - &exact));
        assert!(err <= sim.truncation_bound + 1e-12, "{err} vs {}", sim.truncation_bound);
        let rep = lcu_experiment(&h, &cfg, &mut r).unwrap();
        assert!(rep.deviation < 1e-9, "{}", rep.deviation);
        assert_eq!(rep.queries, (rep.segments * rep.order) as u64);
    }

    #[test]
    fn noisy_deviation_tracks_bound() {
        let mut r = rng(3);
        let h = random_sparse_instance(8, 2, 0.5, 10_000, &mut r).unwrap();
        for &(eta, delta) in &[(0.01, 0.0), (0.0, 0.01), (1e-3, 1e-3)] {
            let cfg = TaylorConfig {
                eta,
                delta,
                m_disc: TaylorConfig::m_disc_for(delta, 100.0, 100_000),
                ..TaylorConfig::default()
            };
            let rep = lcu_experiment(&h, &cfg, &mut r).unwrap();
            assert!(rep.fitted_constant().unwrap() <= 4.0, "{rep:?}");
        }
    }

    #[test]
    fn config_rejects_large_delta() {
        let cfg = TaylorConfig {
            delta: 0.01,
            m_disc: 100_000,
            ..TaylorConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #[test]
        fn one_sparse_norm_is_max_entry(seed in 0u64..1000) {
            let mut r = rng(seed);
            let n = 8;
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, r.random_range(0..=i));
            }
            let mut entries = Vec::new();
            for c in perm.chunks(2) {
                let v: f64 = r.random_range(-1.0..1.0);
                entries.push((c[0].min(c[1]), c[0].max(c[1]), v));
            }
            let t = OneSparseTerm { color: 1, diagonal: false, entries };
            let m = t.to_matrix(n);
            prop_assert!((spectral_norm(&m) - t.max_norm()).abs() < 1e-10);
        }

        #[test]
        fn decomposition_is_exact(seed in 0u64..1000, d in 1usize..5) {
            let mut r = rng(seed);
            let h = random_sparse_instance(12, d, 1.0, 100, &mut r).unwrap();
            let dec = one_sparse_decompose(&h);
            prop_assert_eq!((&dec.reconstruct() - &h.to_matrix()).max_abs(), 0.0);
            prop_assert!(dec.off_diagonal_colors() <= 2 * d - 1);
        }
    }
}
