//! Two-class quantum bagging: weak classifiers as reflections, the weighted
//! ensemble operator `C = sum_j b_j C_j`, classification by eigenspace
//! projection, and attacks that replace part of the weight mass.

use std::f64::consts::PI;

use rand::Rng;

use crate::embedding::RawDataset;
use crate::error::{Error, Result};
use crate::lcu::{polar_unitary, simulate_noisy, SparseHermitian, TaylorConfig};
use crate::linalg::{eig_hermitian, operator_exp, real, spectral_norm, CMatrix, CVector, Hermitian};
use crate::rng::SimRng;
use crate::statevec::{phase_to_energy, qpe_distribution, sample_outcomes};

const UNITARY_TOL: f64 = 1e-10;

/// Mean-difference hyperplane `w . x = offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakClassifier {
    pub w: Vec<f64>,
    pub offset: f64,
    pub tag: u32,
}

impl WeakClassifier {
    pub fn predict(&self, x: &[f64]) -> i8 {
        let s: f64 = self.w.iter().zip(x).map(|(a, b)| a * b).sum();
        if s >= self.offset {
            1
        } else {
            -1
        }
    }
}

/// `2 |w><w| / |w|^2 - I`: `+1` on the normal, `-1` on its complement.
pub fn classifier_operator(c: &WeakClassifier, ambient_dim: usize) -> Result<Hermitian> {
    if c.w.len() > ambient_dim {
        return Err(Error::DimensionMismatch {
            expected: ambient_dim,
            found: c.w.len(),
        });
    }
    let norm: f64 = c.w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::invalid("zero hyperplane normal"));
    }
    let mut w = vec![0.0; ambient_dim];
    for (slot, x) in w.iter_mut().zip(&c.w) {
        *slot = x / norm;
    }
    let v = CVector::from_real(&w)?;
    Ok(reflection_about(&v))
}

/// `2 |v><v| - I` for a unit vector `v`.
pub fn reflection_about(v: &CVector) -> Hermitian {
    let n = v.dim();
    Hermitian::symmetrize(&(&v.outer(v).scale(real(2.0)) - &CMatrix::identity(n)))
}

/// `I - 2 |v><v|`, the replacement that gives `v` expectation `-1`.
pub fn anti_reflection(v: &CVector) -> Hermitian {
    reflection_about(v).scale(-1.0)
}

fn check_reflection(h: &Hermitian) -> Result<()> {
    let sq = h.matrix().matmul(h.matrix());
    let defect = (&sq - &CMatrix::identity(h.dim())).max_abs();
    if defect > UNITARY_TOL {
        return Err(Error::invalid(format!("classifier is not a Hermitian unitary (|C^2 - I| = {defect:e})")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    pub operators: Vec<Hermitian>,
    pub weights: Vec<f64>,
    /// Hyperplanes behind each operator, when known.
    pub classifiers: Vec<Option<WeakClassifier>>,
}

impl EnsembleSpec {
    pub fn new(operators: Vec<Hermitian>, weights: Vec<f64>) -> Result<Self> {
        let n = operators.len();
        let spec = Self {
            classifiers: vec![None; n],
            operators,
            weights,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_classifiers(classifiers: Vec<WeakClassifier>, weights: Vec<f64>, ambient_dim: usize) -> Result<Self> {
        let operators = classifiers
            .iter()
            .map(|c| classifier_operator(c, ambient_dim))
            .collect::<Result<Vec<_>>>()?;
        let spec = Self {
            operators,
            weights,
            classifiers: classifiers.into_iter().map(Some).collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform(operators: Vec<Hermitian>) -> Result<Self> {
        let n = operators.len().max(1);
        Self::new(operators, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.operators.is_empty() {
            return Err(Error::invalid("empty ensemble"));
        }
        if self.weights.len() != self.operators.len() {
            return Err(Error::DimensionMismatch {
                expected: self.operators.len(),
                found: self.weights.len(),
            });
        }
        if self.weights.iter().any(|&b| !(b >= 0.0)) {
            return Err(Error::invalid("weights must be nonnegative"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        let n = self.operators[0].dim();
        for op in &self.operators {
            if op.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: op.dim(),
                });
            }
            check_reflection(op)?;
        }
        Ok(())
    }

    /// At least two distinct classifiers carry positive weight.
    pub fn has_two_distinct(&self) -> bool {
        let live: Vec<&Hermitian> = self
            .operators
            .iter()
            .zip(&self.weights)
            .filter(|(_, &b)| b > 0.0)
            .map(|(o, _)| o)
            .collect();
        live.iter()
            .any(|a| live.iter().any(|b| (a.matrix() - b.matrix()).max_abs() > 1e-12))
    }
}

pub fn ensemble_operator(spec: &EnsembleSpec) -> Hermitian {
    let n = spec.dim();
    let mut c = CMatrix::zeros(n);
    for (op, &b) in spec.operators.iter().zip(&spec.weights) {
        c = &c + &op.matrix().scale(real(b));
    }
    Hermitian::symmetrize(&c)
}

/// `2 min_n |E_n(C)|`.
pub fn spectral_gamma(spec: &EnsembleSpec) -> Result<f64> {
    let e = eig_hermitian(&ensemble_operator(spec))?;
    Ok(2.0 * e.values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min))
}

#[derive(Clone, Debug)]
pub struct BootstrapEnsemble {
    pub spec: EnsembleSpec,
    /// Fraction of distinct rows left out of each resample.
    pub excluded: Vec<f64>,
}

/// Fits a mean-difference hyperplane to each of `count` bootstrap
/// resamples; uniform weights.
pub fn train_bootstrap_ensemble(raw: &RawDataset, labels: &[i8], count: usize, rng: &mut SimRng) -> Result<BootstrapEnsemble> {
    let n = raw.len();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if labels.iter().any(|&l| l != 1 && l != -1) {
        return Err(Error::invalid("labels must be +1 or -1"));
    }
    if count == 0 || n == 0 {
        return Err(Error::invalid("need at least one resample and one row"));
    }
    let d = raw.dim();
    let mut classifiers = Vec::with_capacity(count);
    let mut excluded = Vec::with_capacity(count);
    for tag in 0..count {
        let mut fitted = None;
        for _ in 0..10 {
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let (mut mp, mut mm) = (vec![0.0; d], vec![0.0; d]);
            let (mut np, mut nm) = (0usize, 0usize);
            for &i in &idx {
                let (acc, cnt) = if labels[i] == 1 { (&mut mp, &mut np) } else { (&mut mm, &mut nm) };
                for (a, x) in acc.iter_mut().zip(&raw.vectors()[i]) {
                    *a += x;
                }
                *cnt += 1;
            }
            if np == 0 || nm == 0 {
                continue;
            }
            mp.iter_mut().for_each(|a| *a /= np as f64);
            mm.iter_mut().for_each(|a| *a /= nm as f64);
            let w: Vec<f64> = mp.iter().zip(&mm).map(|(a, b)| a - b).collect();
            let offset: f64 = w.iter().zip(mp.iter().zip(&mm)).map(|(wi, (a, b))| wi * (a + b) / 2.0).sum();
            let mut seen = vec![false; n];
            idx.iter().for_each(|&i| seen[i] = true);
            excluded.push(seen.iter().filter(|s| !**s).count() as f64 / n as f64);
            fitted = Some(WeakClassifier {
                w,
                offset,
                tag: tag as u32,
            });
            break;
        }
        classifiers.push(fitted.ok_or_else(|| Error::invalid("ten single-class resamples in a row"))?);
    }
    let weights = vec![1.0 / count as f64; count];
    Ok(BootstrapEnsemble {
        spec: EnsembleSpec::from_classifiers(classifiers, weights, d)?,
        excluded,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoostSim {
    /// Exact projection onto the positive eigenspace.
    Projector,
    /// Phase estimation of `exp(-i C)`.
    ExactExp,
    /// Phase estimation of the truncated-Taylor evolution.
    Lcu(TaylorConfig),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyOptions {
    pub bits: usize,
    /// `0` uses the exact outcome distribution.
    pub shots: u64,
    pub sim: BoostSim,
    /// Class assigned when `mass+ = 1/2` exactly.
    pub tie_positive: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            bits: 8,
            shots: 0,
            sim: BoostSim::Projector,
            tie_positive: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Classification {
    pub class: i8,
    pub mass_plus: f64,
    /// `|mass+ - 1/2|`.
    pub confidence: f64,
    pub tie: bool,
    /// Mass on the zero-phase outcome, assigned to neither band.
    pub unresolved_mass: f64,
}

fn decide(mass_plus: f64, unresolved_mass: f64, tie_positive: bool) -> Classification {
    let tie = mass_plus == 0.5;
    let class = if mass_plus > 0.5 || (tie && tie_positive) { 1 } else { -1 };
    Classification {
        class,
        mass_plus,
        confidence: (mass_plus - 0.5).abs(),
        tie,
        unresolved_mass,
    }
}

/// Class `+1` when projecting `psi` onto the positive eigenspace of `C`
/// succeeds with probability above `1/2`.
pub fn classify_by_eigenspace(psi: &CVector, spec: &EnsembleSpec, opts: &ClassifyOptions, rng: &mut SimRng) -> Result<Classification> {
    if psi.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: psi.dim(),
        });
    }
    if !psi.is_normalized(1e-10) {
        return Err(Error::invalid("test state is not normalized"));
    }
    let c = ensemble_operator(spec);
    let u = match opts.sim {
        BoostSim::Projector => {
            let e = eig_hermitian(&c)?;
            let p = e.projector(|_, v| v > 0.0);
            let mass = p.apply(psi).inner(psi).re;
            return Ok(decide(mass, 0.0, opts.tie_positive));
        }
        BoostSim::ExactExp => operator_exp(&c, 1.0)?,
        BoostSim::Lcu(cfg) => {
            let cfg = TaylorConfig { time: 1.0, ..cfg };
            let sparse = SparseHermitian::from_hermitian(&c)?;
            polar_unitary(&simulate_noisy(&sparse, &cfg, rng)?.q)?
        }
    };
    let dist = qpe_distribution(&u, psi, opts.bits)?;
    let m = (1u64 << opts.bits) as f64;
    let outcomes: Vec<(f64, f64)> = if opts.shots == 0 {
        dist.iter().enumerate().map(|(y, &p)| (y as f64 / m, p)).collect()
    } else {
        sample_outcomes(&dist, opts.bits, opts.shots, rng)?
            .into_iter()
            .map(|(phi, k)| (phi, k as f64 / opts.shots as f64))
            .collect()
    };
    let (mut plus, mut zero) = (0.0, 0.0);
    for (phi, w) in outcomes {
        let e = phase_to_energy(phi, 1.0);
        if phi == 0.0 {
            zero += w;
        } else if e > 0.0 && e < PI {
            plus += w;
        }
    }
    Ok(decide(plus, zero, opts.tie_positive))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanClassification {
    pub class: i8,
    pub expectation: f64,
    pub tie: bool,
}

/// `sign(<psi|C|psi>)`.
pub fn classify_by_mean(psi: &CVector, spec: &EnsembleSpec) -> MeanClassification {
    let e = ensemble_operator(spec).expectation(psi);
    MeanClassification {
        class: if e >= 0.0 { 1 } else { -1 },
        expectation: e,
        tie: e == 0.0,
    }
}

#[derive(Clone, Debug)]
pub enum AttackStrategy {
    /// Negate the chosen classifiers.
    FlipWorst,
    /// Replace the chosen classifiers with `I - 2|psi><psi|`.
    ReplaceTarget { target: CVector },
    /// Replace the chosen classifiers with these operators, in order.
    Custom { replacements: Vec<Hermitian> },
}

#[derive(Clone, Debug)]
pub struct AttackSpec {
    pub alpha: f64,
    pub strategy: AttackStrategy,
    /// Indices to compromise; `None` picks greedily by how strongly each
    /// classifier supports `focus` (or by weight without one).
    pub indices: Option<Vec<usize>>,
    pub focus: Option<CVector>,
}

#[derive(Clone, Debug)]
pub struct AttackOutcome {
    pub spec: EnsembleSpec,
    pub replaced: Vec<usize>,
    pub replaced_mass: f64,
    /// `||C' - C||`.
    pub norm_shift: f64,
    /// `max_n |E_n(C') - E_n(C)|`.
    pub eig_shift_max: f64,
}

impl AttackOutcome {
    pub fn within_bounds(&self, alpha: f64) -> bool {
        self.norm_shift <= 2.0 * alpha + 1e-12 && self.eig_shift_max <= 2.0 * alpha + 1e-12
    }
}

pub fn attack_ensemble(spec: &EnsembleSpec, attack: &AttackSpec) -> Result<AttackOutcome> {
    if !(0.0..1.0).contains(&attack.alpha) {
        return Err(Error::invalid(format!("α must lie in [0, 1), got {}", attack.alpha)));
    }
    let chosen = match &attack.indices {
        Some(ix) => {
            if ix.iter().any(|&i| i >= spec.len()) {
                return Err(Error::invalid("attack index out of range"));
            }
            let mass: f64 = ix.iter().map(|&i| spec.weights[i]).sum();
            if mass > attack.alpha + 1e-12 {
                return Err(Error::invalid(format!("attack mass {mass} exceeds α = {}", attack.alpha)));
            }
            ix.clone()
        }
        None => {
            let mut order: Vec<usize> = (0..spec.len()).collect();
            let score = |i: usize| match &attack.focus {
                Some(psi) => spec.operators[i].expectation(psi),
                None => spec.weights[i],
            };
            order.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
            let mut mass = 0.0;
            let mut out = Vec::new();
            for i in order {
                let b = spec.weights[i];
                if b > 0.0 && mass + b <= attack.alpha + 1e-12 {
                    mass += b;
                    out.push(i);
                }
            }
            out
        }
    };
    let mut operators = spec.operators.clone();
    for (slot, &i) in chosen.iter().enumerate() {
        operators[i] = match &attack.strategy {
            AttackStrategy::FlipWorst => spec.operators[i].scale(-1.0),
            AttackStrategy::ReplaceTarget { target } => anti_reflection(target),
            AttackStrategy::Custom { replacements } => {
                if replacements.is_empty() {
                    return Err(Error::invalid("custom attack without replacements"));
                }
                replacements[slot % replacements.len()].clone()
            }
        };
    }
    let attacked = EnsembleSpec {
        operators,
        weights: spec.weights.clone(),
        classifiers: spec.classifiers.clone(),
    };
    attacked.validate()?;
    let c = ensemble_operator(spec);
    let c2 = ensemble_operator(&attacked);
    let e1 = eig_hermitian(&c)?;
    let e2 = eig_hermitian(&c2)?;
    Ok(AttackOutcome {
        replaced_mass: chosen.iter().map(|&i| spec.weights[i]).sum(),
        replaced: chosen,
        norm_shift: spectral_norm(&(c2.matrix() - c.matrix())),
        eig_shift_max: e1
            .values
            .iter()
            .zip(&e2.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max),
        spec: attacked,
    })
}

/// Ensemble of `n` reflections about `cos(theta) psi + sin(theta) phi_j`
/// with `<psi|C_j|psi> = 1/(2n)` for every `j`, plus the state `psi`.
pub fn mean_attack_instance(n: usize, dim: usize, rng: &mut SimRng) -> Result<(EnsembleSpec, CVector)> {
    if n == 0 || dim < 2 {
        return Err(Error::invalid("need n >= 1 and dim >= 2"));
    }
    let psi = crate::linalg::random_unit_vector(dim, rng, false);
    // cos(2 theta) = 1/(2n).
    let theta = 0.5 * (0.5 / n as f64).acos();
    let mut ops = Vec::with_capacity(n);
    for _ in 0..n {
        let mut phi = crate::linalg::random_unit_vector(dim, rng, false);
        let ov = psi.inner(&phi);
        phi.axpy(-ov, &psi);
        let phi = phi.normalized()?;
        let mut u = psi.scale(real(theta.cos()));
        u.axpy(real(theta.sin()), &phi);
        ops.push(reflection_about(&u.normalized()?));
    }
    Ok((EnsembleSpec::uniform(ops)?, psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_unit_vector;
    use rand::SeedableRng;

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    fn blobs(n: usize, rng: &mut SimRng) -> (RawDataset, Vec<i8>) {
        let mut v = Vec::new();
        let mut l = Vec::new();
        for i in 0..n {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            v.push(vec![s * 0.6 + rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)]);
            l.push(s as i8);
        }
        (RawDataset::with_tight_bound(v).unwrap(), l)
    }

    #[test]
    fn operator_examples() {
        let c = WeakClassifier {
            w: vec![1.0, 0.0, 0.0],
            offset: 0.0,
            tag: 0,
        };
        let op = classifier_operator(&c, 3).unwrap();
        assert!((op.expectation(&CVector::basis(3, 0)) - 1.0).abs() < 1e-15);
        assert!((op.expectation(&CVector::basis(3, 2)) + 1.0).abs() < 1e-15);
        assert!(classifier_operator(&WeakClassifier { w: vec![0.0; 3], offset: 0.0, tag: 0 }, 3).is_err());
        let mut r = rng(1);
        for _ in 0..100 {
            let w: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
            let op = classifier_operator(&WeakClassifier { w, offset: 0.0, tag: 0 }, 4).unwrap();
            assert!((&op.matrix().matmul(op.matrix()) - &CMatrix::identity(4)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn bootstrap_examples() {
        let mut r = rng(2);
        let (raw, labels) = blobs(40, &mut r);
        let one = train_bootstrap_ensemble(&raw, &labels, 1, &mut r).unwrap();
        let c = one.spec.classifiers[0].as_ref().unwrap();
        let acc = raw.vectors().iter().zip(&labels).filter(|(x, &l)| c.predict(x) == l).count();
        assert_eq!(acc, 40);

        let dup = RawDataset::with_tight_bound(vec![vec![0.5, 0.1], vec![-0.5, 0.1]]).unwrap();
        let e = train_bootstrap_ensemble(&dup, &[1, -1], 5, &mut r).unwrap();
        assert!(!e.spec.has_two_distinct());

        let (raw, labels) = blobs(60, &mut r);
        let e = train_bootstrap_ensemble(&raw, &labels, 25, &mut r).unwrap();
        let mean = e.excluded.iter().sum::<f64>() / 25.0;
        let expect = (1.0 - 1.0 / 60.0f64).powi(60);
        assert!((mean - expect).abs() <= 0.05, "{mean} vs {expect}");
    }

    #[test]
    fn ensemble_examples() {
        let x = Hermitian::pauli_x();
        let z = Hermitian::pauli_z();
        let same = EnsembleSpec::uniform(vec![z.clone(), z.clone()]).unwrap();
        let e = eig_hermitian(&ensemble_operator(&same)).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-12 && (e.values[1] - 1.0).abs() < 1e-12);
        let anti = EnsembleSpec::uniform(vec![x, z]).unwrap();
        let e = eig_hermitian(&ensemble_operator(&anti)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.values[0] + s).abs() < 1e-12 && (e.values[1] - s).abs() < 1e-12);
        assert!(anti.has_two_distinct());

        // Commuting reflections sharing a +1 eigenvector.
        let mut r = rng(3);
        let ops: Vec<Hermitian> = (0..3)
            .map(|_| {
                let mut d = vec![1.0];
                d.extend((0..3).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }));
                Hermitian::diag(&d)
            })
            .collect();
        let spec = EnsembleSpec::new(ops, vec![0.2, 0.3, 0.5]).unwrap();
        let c = ensemble_operator(&spec);
        assert!((c.expectation(&CVector::basis(4, 0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classify_examples() {
        let z = Hermitian::pauli_z();
        let spec = EnsembleSpec::uniform(vec![z.clone(), z]).unwrap();
        let mut r = rng(4);
        let up = CVector::basis(2, 0);
        let exact = classify_by_eigenspace(&up, &spec, &ClassifyOptions::default(), &mut r).unwrap();
        assert_eq!((exact.class, exact.mass_plus), (1, 1.0));
        let qpe = ClassifyOptions {
            sim: BoostSim::ExactExp,
            ..ClassifyOptions::default()
        };
        let c = classify_by_eigenspace(&up, &spec, &qpe, &mut r).unwrap();
        assert_eq!(c.class, 1);
        assert!(c.mass_plus > 0.99);

        let psi = CVector::from_real(&[0.7f64.sqrt(), 0.3f64.sqrt()]).unwrap();
        let shots = 10_000;
        let sampled = ClassifyOptions {
            sim: BoostSim::ExactExp,
            shots,
            ..ClassifyOptions::default()
        };
        let c = classify_by_eigenspace(&psi, &spec, &sampled, &mut r).unwrap();
        let sigma = (0.21 / shots as f64).sqrt();
        assert_eq!(c.class, 1);
        assert!((c.mass_plus - 0.7).abs() <= 3.0 * sigma + 0.01);
    }

    #[test]
    fn mean_attack_flips_mean_but_not_gapped_eigenspace() {
        let mut r = rng(5);
        for n in [2, 5, 10, 25] {
            let (spec, psi) = mean_attack_instance(n, 6, &mut r).unwrap();
            assert!(classify_by_mean(&psi, &spec).class == 1);
            let attack = AttackSpec {
                alpha: 1.0 / n as f64,
                strategy: AttackStrategy::ReplaceTarget { target: psi.clone() },
                indices: Some(vec![0]),
                focus: None,
            };
            let out = attack_ensemble(&spec, &attack).unwrap();
            assert_eq!(classify_by_mean(&psi, &out.spec).class, -1);
        }
        let psi = random_unit_vector(4, &mut r, false);
        let spec = EnsembleSpec::uniform(vec![reflection_about(&psi); 10]).unwrap();
        let out = attack_ensemble(
            &spec,
            &AttackSpec {
                alpha: 0.1,
                strategy: AttackStrategy::ReplaceTarget { target: psi.clone() },
                indices: Some(vec![0]),
                focus: None,
            },
        )
        .unwrap();
        assert!(spectral_gamma(&spec).unwrap() >= 0.4);
        let c = classify_by_eigenspace(&psi, &out.spec, &ClassifyOptions::default(), &mut r).unwrap();
        assert_eq!(c.class, 1);
    }

    #[test]
    fn attack_examples() {
        let mut r = rng(6);
        let ops: Vec<Hermitian> = (0..3).map(|_| reflection_about(&random_unit_vector(3, &mut r, true))).collect();
        let spec = EnsembleSpec::uniform(ops).unwrap();
        let none = attack_ensemble(
            &spec,
            &AttackSpec {
                alpha: 0.0,
                strategy: AttackStrategy::FlipWorst,
                indices: None,
                focus: None,
            },
        )
        .unwrap();
        assert_eq!(none.norm_shift, 0.0);
        let one = attack_ensemble(
            &spec,
            &AttackSpec {
                alpha: 1.0 / 3.0,
                strategy: AttackStrategy::FlipWorst,
                indices: Some(vec![0]),
                focus: None,
            },
        )
        .unwrap();
        assert!((one.norm_shift - 2.0 / 3.0).abs() < 1e-12);
        assert!(one.within_bounds(1.0 / 3.0));
        let bad = AttackSpec {
            alpha: 0.2,
            strategy: AttackStrategy::Custom {
                replacements: vec![Hermitian::diag(&[0.5, 1.0, 1.0])],
            },
            indices: None,
            focus: None,
        };
        let spec5 = EnsembleSpec::uniform(vec![Hermitian::identity(3); 5]).unwrap();
        assert!(attack_ensemble(&spec5, &bad).is_err());
    }
}
