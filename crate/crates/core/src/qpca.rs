//! Robust quantum PCA: build the median covariance, evolve it, and sample its
//! eigenvalues by phase estimation.

use std::f64::consts::PI;

use crate::embedding::{classical_pca_matrix, poison, robust_pca_matrix, ContaminationSpec, InnerProductMode, RawDataset};
use crate::error::{Error, Result};
use crate::lcu::{extract_effective_hamiltonian, polar_unitary, simulate_noisy, SparseHermitian, TaylorConfig};
use crate::linalg::{eig_hermitian, operator_exp, real, spectral_norm, CMatrix, CVector, EigenDecomposition, Hermitian};
use crate::median_search::MatrixElementOracle;
use crate::noisy::{FailureMode, QueryCounter};
use crate::rng::SimRng;
use crate::statevec::{phase_to_energy, qpe_distribution, sample_outcomes};

const SPARSITY_TOL: f64 = 1e-12;
const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MatrixMode {
    ExactMedian,
    QuantumMedian { gamma: f64, delta: f64 },
}

#[derive(Clone, Debug)]
pub struct BuiltMatrix {
    pub matrix: Hermitian,
    /// False if any matrix-element draw hit a failure branch.
    pub success: bool,
    pub queries: QueryCounter,
}

pub fn build_matrix(raw: &RawDataset, mode: MatrixMode, rng: &mut SimRng) -> Result<BuiltMatrix> {
    match mode {
        MatrixMode::ExactMedian => Ok(BuiltMatrix {
            matrix: robust_pca_matrix(raw, InnerProductMode::Exact)?,
            success: true,
            queries: QueryCounter::new(),
        }),
        MatrixMode::QuantumMedian { gamma, delta } => {
            let n = raw.dim();
            let mut m = CMatrix::zeros(n);
            let mut success = true;
            let mut queries = QueryCounter::new();
            for k in 0..n {
                for l in 0..n {
                    let mut o = MatrixElementOracle::new(raw, k, l, gamma, delta, FailureMode::WorstCase)?;
                    let s = o.sample(rng)?;
                    success &= s.success;
                    queries.merge(s.queries);
                    m[(k, l)] = real(s.value);
                }
            }
            let sym = (&m + &m.transpose()).scale(real(0.5));
            Ok(BuiltMatrix {
                matrix: Hermitian::new(sym)?,
                success,
                queries,
            })
        }
    }
}

/// Max row nonzero count at threshold `1e-12`, at least one.
pub fn effective_sparsity(m: &Hermitian) -> usize {
    m.matrix().sparsity(SPARSITY_TOL).max(1)
}

/// `1 / (2 ||M||_max d)`, which keeps every eigenphase of `exp(-i s M)`
/// within `[-1/2, 1/2]`.
pub fn evolution_scale(m: &Hermitian) -> f64 {
    let max = m.matrix().max_abs();
    if max == 0.0 {
        1.0
    } else {
        1.0 / (2.0 * max * effective_sparsity(m) as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SimMode {
    ExactExp,
    LcuNoisy(TaylorConfig),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenBin {
    pub eigenvalue: f64,
    pub multiplicity: usize,
    /// `sum |<x|E_n>|^2` over the eigenvectors in this bin.
    pub overlap: f64,
    /// Sampled mass (exact QPE mass when `shots == 0`).
    pub mass: f64,
}

#[derive(Clone, Debug)]
pub struct QpcaReport {
    pub bins: Vec<EigenBin>,
    pub bits: usize,
    pub shots: u64,
    pub scale: f64,
    /// `max_n |P(E'_n) - |<x|E_n>|^2|`.
    pub lambda_measured: f64,
    /// Set when two distinct eigenvalues sit closer than two QPE grid steps.
    pub unresolved: bool,
    /// `||M - M_eff||` for the generator actually evolved (zero in exact mode).
    pub sim_deviation: f64,
    pub queries: QueryCounter,
}

impl QpcaReport {
    pub fn total_mass(&self) -> f64 {
        self.bins.iter().map(|b| b.mass).sum()
    }
}

fn group_eigenvalues(e: &EigenDecomposition, x: &CVector) -> Vec<EigenBin> {
    let mut bins: Vec<EigenBin> = Vec::new();
    for (i, &val) in e.values.iter().enumerate() {
        let v = &e.vectors[i];
        let ov = v.inner(x).norm_sqr();
        match bins.last_mut() {
            Some(b) if (val - b.eigenvalue).abs() <= DEGENERACY_TOL => {
                b.overlap += ov;
                b.multiplicity += 1;
            }
            _ => bins.push(EigenBin {
                eigenvalue: val,
                multiplicity: 1,
                overlap: ov,
                mass: 0.0,
            }),
        }
    }
    bins
}

/// Phase-estimates `exp(-i s M)` on `x` and bins each outcome to the nearest
/// exact eigenvalue of `M`.
pub fn qpca_sample(m: &Hermitian, x: &CVector, bits: usize, shots: u64, mode: SimMode, rng: &mut SimRng) -> Result<QpcaReport> {
    if x.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: x.dim(),
        });
    }
    if !x.is_normalized(1e-10) {
        return Err(Error::invalid("input state is not normalized"));
    }
    let s = evolution_scale(m);
    let scaled = m.scale(s);
    if spectral_norm(scaled.matrix()) >= PI {
        return Err(Error::PhaseWrap {
            phase: spectral_norm(scaled.matrix()),
        });
    }
    let (u, sim_deviation, mut queries) = match mode {
        SimMode::ExactExp => (operator_exp(&scaled, 1.0)?, 0.0, QueryCounter::new()),
        SimMode::LcuNoisy(cfg) => {
            let cfg = TaylorConfig { time: 1.0, ..cfg };
            let sparse = SparseHermitian::from_hermitian(&scaled)?;
            let sim = simulate_noisy(&sparse, &cfg, rng)?;
            let eff = extract_effective_hamiltonian(&sim.q, 1.0)?;
            let dev = spectral_norm(&(scaled.matrix() - eff.matrix())) / s;
            (polar_unitary(&sim.q)?, dev, sim.queries)
        }
    };
    let per_shot = queries.total().saturating_mul((1u64 << bits) - 1);
    queries = QueryCounter::new();
    queries.charge(per_shot.saturating_mul(shots.max(1)));

    let e = eig_hermitian(m)?;
    let mut bins = group_eigenvalues(&e, x);
    let grid = 2.0 * PI / (1u64 << bits) as f64 / s;
    let unresolved = bins.windows(2).any(|w| w[1].eigenvalue - w[0].eigenvalue < 2.0 * grid);

    let dist = qpe_distribution(&u, x, bits)?;
    let outcomes: Vec<(f64, f64)> = if shots == 0 {
        let m2 = (1u64 << bits) as f64;
        dist.iter().enumerate().map(|(y, &p)| (y as f64 / m2, p)).collect()
    } else {
        sample_outcomes(&dist, bits, shots, rng)?
            .into_iter()
            .map(|(phi, c)| (phi, c as f64 / shots as f64))
            .collect()
    };
    for (phi, w) in outcomes {
        let energy = phase_to_energy(phi, 1.0) / s;
        let nearest = bins
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1.eigenvalue - energy)
                    .abs()
                    .total_cmp(&(b.1.eigenvalue - energy).abs())
            })
            .map(|(i, _)| i)
            .expect("at least one eigenvalue");
        bins[nearest].mass += w;
    }
    let lambda_measured = bins.iter().map(|b| (b.mass - b.overlap).abs()).fold(0.0, f64::max);
    Ok(QpcaReport {
        bins,
        bits,
        shots,
        scale: s,
        lambda_measured,
        unresolved,
        sim_deviation,
        queries,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoisoningReport {
    pub alpha: f64,
    pub lipschitz: f64,
    pub d: usize,
    /// `||M - M'||_2` for the median covariance.
    pub norm: f64,
    /// `5 alpha L (d + 2)`.
    pub bound: f64,
    /// Same norm for the mean covariance.
    pub classical_norm: f64,
    /// `max_n |E_n(M) - E_n(M')|`, never above `norm`.
    pub eigen_shift: f64,
}

impl PoisoningReport {
    pub fn holds(&self) -> bool {
        self.norm <= self.bound
    }
}

pub fn poisoning_bound(alpha: f64, lipschitz: f64, d: usize) -> f64 {
    5.0 * alpha * lipschitz * (d as f64 + 2.0)
}

pub fn poisoning_experiment(raw: &RawDataset, spec: &ContaminationSpec, lipschitz: f64) -> Result<PoisoningReport> {
    if !(0.0..0.5).contains(&spec.alpha) {
        return Err(Error::config(format!("α must lie in [0, 1/2), got {}", spec.alpha)));
    }
    if spec.alpha * lipschitz > 1.0 {
        return Err(Error::config(format!("α L must be at most 1, got {}", spec.alpha * lipschitz)));
    }
    let clean = robust_pca_matrix(raw, InnerProductMode::Exact)?;
    let poisoned_raw = poison(raw, spec)?;
    let dirty = robust_pca_matrix(&poisoned_raw, InnerProductMode::Exact)?;
    let diff = clean.sub(&dirty);
    let norm = spectral_norm(diff.matrix());
    let classical = classical_pca_matrix(raw)?.sub(&classical_pca_matrix(&poisoned_raw)?);
    let e1 = eig_hermitian(&clean)?;
    let e2 = eig_hermitian(&dirty)?;
    let eigen_shift = e1
        .values
        .iter()
        .zip(&e2.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let d = clean.matrix().sparsity(SPARSITY_TOL);
    Ok(PoisoningReport {
        alpha: spec.alpha,
        lipschitz,
        d,
        norm,
        bound: poisoning_bound(spec.alpha, lipschitz, d),
        classical_norm: spectral_norm(classical.matrix()),
        eigen_shift,
    })
}

/// Eigenvectors of `M` split into an upper band `P+`, a lower band `P-` and
/// whatever lies strictly between.
#[derive(Clone, Debug)]
pub struct SubspaceSplit {
    pub eigen: EigenDecomposition,
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
    pub middle: Vec<usize>,
    /// `min E(P+) - max E(P-)`.
    pub gap: f64,
}

impl SubspaceSplit {
    /// `P+` holds eigenvalues `>= plus_min`, `P-` those `<= minus_max`.
    pub fn new(m: &Hermitian, plus_min: f64, minus_max: f64) -> Result<Self> {
        if plus_min < minus_max {
            return Err(Error::invalid("band thresholds overlap"));
        }
        let eigen = eig_hermitian(m)?;
        let (mut plus, mut minus, mut middle) = (Vec::new(), Vec::new(), Vec::new());
        for (i, &v) in eigen.values.iter().enumerate() {
            if v >= plus_min {
                plus.push(i);
            } else if v <= minus_max {
                minus.push(i);
            } else {
                middle.push(i);
            }
        }
        if plus.is_empty() || minus.is_empty() {
            return Err(Error::invalid("both bands must be nonempty"));
        }
        let lo = plus.iter().map(|&i| eigen.values[i]).fold(f64::INFINITY, f64::min);
        let hi = minus.iter().map(|&i| eigen.values[i]).fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            gap: lo - hi,
            eigen,
            plus,
            minus,
            middle,
        })
    }

    /// Top `k` eigenvectors against the rest.
    pub fn top(m: &Hermitian, k: usize) -> Result<Self> {
        let e = eig_hermitian(m)?;
        let n = e.dim();
        if k == 0 || k >= n {
            return Err(Error::invalid(format!("need 0 < k < {n}")));
        }
        let vals = &e.values;
        Self::new(m, vals[n - k], vals[n - k - 1])
    }

    pub fn projector(&self, which: &[usize]) -> CMatrix {
        self.eigen.projector(|i, _| which.contains(&i))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorReport {
    pub sigma: f64,
    pub gap: f64,
    /// `max_phi |<phi|(P+' - P+)|phi>|`.
    pub max_shift: f64,
    /// `4 sigma / lambda`.
    pub budget: f64,
    /// `|E_n' - E_n - sigma <E_n|Delta|E_n>|` for every nondegenerate `n`.
    pub remainders: Vec<f64>,
    pub skipped: usize,
    pub weyl_holds: bool,
}

impl ProjectorReport {
    pub fn holds(&self) -> bool {
        self.max_shift <= self.budget + 1e-12 && self.weyl_holds
    }
}

/// Compares the `P+` band of `m` with the same-index band of `perturbed`.
pub fn projector_perturbation_check(
    m: &Hermitian,
    perturbed: &Hermitian,
    split: &SubspaceSplit,
    probes: &[CVector],
) -> Result<ProjectorReport> {
    if perturbed.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: perturbed.dim(),
        });
    }
    let diff = perturbed.sub(m);
    let sigma = spectral_norm(diff.matrix());
    let e2 = eig_hermitian(perturbed)?;
    let p = split.projector(&split.plus);
    let p2 = e2.projector(|i, _| split.plus.contains(&i));
    let dp = &p2 - &p;
    let mut max_shift: f64 = 0.0;
    for phi in probes {
        max_shift = max_shift.max(dp.apply(phi).inner(phi).re.abs());
    }
    let e1 = &split.eigen;
    let mut remainders = Vec::new();
    let mut skipped = 0;
    let mut weyl = 0.0f64;
    for n in 0..e1.dim() {
        weyl = weyl.max((e2.values[n] - e1.values[n]).abs());
        let isolated = (n == 0 || e1.values[n] - e1.values[n - 1] > DEGENERACY_TOL)
            && (n + 1 == e1.dim() || e1.values[n + 1] - e1.values[n] > DEGENERACY_TOL);
        if !isolated {
            skipped += 1;
            continue;
        }
        let v = &e1.vectors[n];
        let first = diff.matrix().apply(v).inner(v).re;
        remainders.push((e2.values[n] - e1.values[n] - first).abs());
    }
    Ok(ProjectorReport {
        sigma,
        gap: split.gap,
        max_shift,
        budget: if split.gap > 0.0 { 4.0 * sigma / split.gap } else { f64::INFINITY },
        remainders,
        skipped,
        weyl_holds: weyl <= sigma + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::ContaminationStrategy;
    use crate::linalg::{c64, random_unit_vector};
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    #[test]
    fn identical_vectors_give_zero_matrix() {
        let raw = RawDataset::with_tight_bound(vec![vec![0.3, -0.2, 0.1]; 6]).unwrap();
        let mut r = rng(1);
        for mode in [MatrixMode::ExactMedian, MatrixMode::QuantumMedian { gamma: 0.05, delta: 0.01 }] {
            let b = build_matrix(&raw, mode, &mut r).unwrap();
            assert!(b.matrix.matrix().max_abs() <= 0.05);
            assert_eq!((b.matrix.matrix() - &b.matrix.matrix().transpose()).max_abs(), 0.0);
        }
    }

    #[test]
    fn quantum_mode_tracks_exact_mode() {
        let mut r = rng(2);
        let data: Vec<Vec<f64>> = (0..12).map(|_| (0..3).map(|_| r.random_range(-0.5..0.5)).collect()).collect();
        let raw = RawDataset::with_tight_bound(data).unwrap();
        let exact = build_matrix(&raw, MatrixMode::ExactMedian, &mut r).unwrap();
        let q = build_matrix(&raw, MatrixMode::QuantumMedian { gamma: 0.05, delta: 0.01 }, &mut r).unwrap();
        if q.success {
            assert!((exact.matrix.matrix() - q.matrix.matrix()).max_abs() <= 0.05);
        }
        assert!(q.queries.total() > 0);
    }

    #[test]
    fn eigenvector_input_puts_all_mass_on_one_bin() {
        let m = Hermitian::diag(&[0.9, 0.1]);
        let x = CVector::basis(2, 0);
        let rep = qpca_sample(&m, &x, 8, 0, SimMode::ExactExp, &mut rng(3)).unwrap();
        let top = rep.bins.iter().find(|b| (b.eigenvalue - 0.9).abs() < 1e-12).unwrap();
        assert!(top.mass > 0.99, "{rep:?}");
        assert!((rep.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn superposition_splits_mass() {
        let m = Hermitian::diag(&[0.9, 0.1]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let x = CVector::new(vec![c64(h, 0.0), c64(h, 0.0)]).unwrap();
        let shots = 10_000;
        let rep = qpca_sample(&m, &x, 8, shots, SimMode::ExactExp, &mut rng(4)).unwrap();
        let sigma = (0.25 / shots as f64).sqrt();
        for b in &rep.bins {
            assert!((b.mass - 0.5).abs() <= 3.0 * sigma + 0.01, "{b:?}");
        }
    }

    #[test]
    fn lcu_mode_close_to_exact_mode() {
        let m = Hermitian::from_real_rows(&[
            vec![0.8, 0.1, 0.0, 0.0],
            vec![0.1, 0.3, 0.0, 0.0],
            vec![0.0, 0.0, -0.4, 0.05],
            vec![0.0, 0.0, 0.05, -0.9],
        ])
        .unwrap();
        let mut r = rng(5);
        let x = random_unit_vector(4, &mut r, false);
        let exact = qpca_sample(&m, &x, 10, 0, SimMode::ExactExp, &mut r).unwrap();
        let cfg = TaylorConfig {
            eta: 1e-3,
            ..TaylorConfig::default()
        };
        let noisy = qpca_sample(&m, &x, 10, 0, SimMode::LcuNoisy(cfg), &mut r).unwrap();
        let e = eig_hermitian(&m).unwrap();
        let gap = e.min_gap();
        let budget = 4.0 * noisy.sim_deviation / gap;
        for (a, b) in exact.bins.iter().zip(&noisy.bins) {
            assert!((a.mass - b.mass).abs() <= budget + 1e-9, "{a:?} {b:?} budget {budget}");
        }
        assert!(noisy.queries.total() > 0);
    }

    #[test]
    fn poisoning_examples() {
        assert!((poisoning_bound(0.1, 1.0, 2) - 2.0).abs() < 1e-15);
        let mut r = rng(6);
        let data: Vec<Vec<f64>> = (0..200).map(|_| (0..2).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let raw = RawDataset::new(data, 10.0).unwrap();
        let spec0 = ContaminationSpec {
            alpha: 0.0,
            strategy: ContaminationStrategy::ReplacePrefix,
            adversary_vectors: None,
            seed: 1,
        };
        assert_eq!(poisoning_experiment(&raw, &spec0, 2.0).unwrap().norm, 0.0);
        let spike = ContaminationSpec {
            alpha: 0.1,
            strategy: ContaminationStrategy::SpikeDirection {
                direction: vec![1.0, 1.0],
            },
            adversary_vectors: None,
            seed: 2,
        };
        let rep = poisoning_experiment(&raw, &spike, 2.0).unwrap();
        assert!(rep.holds(), "{rep:?}");
        assert!(rep.classical_norm > rep.bound, "{rep:?}");
        assert!(rep.eigen_shift <= rep.norm + 1e-12);
        let bad = ContaminationSpec { alpha: 0.5, ..spike };
        assert!(poisoning_experiment(&raw, &bad, 2.0).is_err());
    }

    #[test]
    fn projector_examples() {
        let m = Hermitian::diag(&[1.0, 0.5, -0.5, -1.0]);
        let split = SubspaceSplit::top(&m, 2).unwrap();
        assert!((split.gap - 1.0).abs() < 1e-12);
        let mut r = rng(7);
        let probes: Vec<CVector> = (0..20).map(|_| random_unit_vector(4, &mut r, true)).collect();
        let same = projector_perturbation_check(&m, &m, &split, &probes).unwrap();
        assert!(same.max_shift < 1e-12);

        let u = random_unit_vector(4, &mut r, false);
        let sigma = split.gap / 100.0;
        let mp = m.add(&Hermitian::projector(&u).scale(sigma));
        let rep = projector_perturbation_check(&m, &mp, &split, &probes).unwrap();
        assert!(rep.holds(), "{rep:?}");
        assert!(rep.budget <= 0.04 + 1e-12);

        let base = Hermitian::diag(&[1.0, -1.0]);
        let s = 1e-3;
        let pert = base.add(&Hermitian::pauli_x().scale(s));
        let split2 = SubspaceSplit::top(&base, 1).unwrap();
        let rep2 = projector_perturbation_check(&base, &pert, &split2, &[CVector::basis(2, 0)]).unwrap();
        for rem in &rep2.remainders {
            assert!((rem - ((1.0 + s * s).sqrt() - 1.0)).abs() < 1e-12);
        }
    }
}
