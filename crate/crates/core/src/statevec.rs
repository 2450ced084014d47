//! State-vector simulation: gates, the Hadamard-test overlap circuit,
//! amplitude estimation and textbook phase estimation.
//!
//! Qubit 0 is the most significant bit of the basis index, so the register
//! `|q0 q1 ... q_{n-1}>` reads left to right as a binary number.

use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{c64, real, CMatrix, CVector, Complex64};
use crate::noisy::{FailureMode, NoiseModel, NoisySample, QueryCounter};

pub const MAX_QUBITS: usize = 24;
pub const MAX_QPE_BITS: usize = 16;
/// Total register size allowed for circuit-level amplitude estimation.
pub const MAX_AE_CIRCUIT_QUBITS: usize = 10;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Single-qubit and two-qubit gate matrices.
pub mod gates {
    use super::*;

    pub fn h() -> CMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CMatrix::from_real_rows(&[vec![s, s], vec![s, -s]]).unwrap()
    }

    pub fn x() -> CMatrix {
        CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    pub fn z() -> CMatrix {
        CMatrix::diag_real(&[1.0, -1.0])
    }

    pub fn s() -> CMatrix {
        CMatrix::diag(&[real(1.0), c64(0.0, 1.0)])
    }

    /// `diag(1, e^{i theta})`.
    pub fn phase(theta: f64) -> CMatrix {
        CMatrix::diag(&[real(1.0), Complex64::from_polar(1.0, theta)])
    }

    /// `exp(-i theta Z / 2)`.
    pub fn rz(theta: f64) -> CMatrix {
        CMatrix::diag(&[
            Complex64::from_polar(1.0, -theta / 2.0),
            Complex64::from_polar(1.0, theta / 2.0),
        ])
    }

    pub fn swap() -> CMatrix {
        CMatrix::from_real_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumRegister {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("a register needs at least one qubit"));
    }
    if n > MAX_QUBITS {
        return Err(Error::TooLarge {
            what: "qubit count",
            requested: n,
            cap: MAX_QUBITS,
        });
    }
    Ok(())
}

impl QuantumRegister {
    /// `|0...0>` on `n` qubits.
    pub fn new(n: usize) -> Result<Self> {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_qubits(n)?;
        if index >= 1 << n {
            return Err(Error::invalid(format!("basis index {index} out of range for {n} qubits")));
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[index] = real(1.0);
        Ok(Self { n_qubits: n, amps })
    }

    pub fn from_state(state: &CVector) -> Result<Self> {
        let dim = state.dim();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::invalid(format!("state dimension {dim} is not a power of two")));
        }
        let n = dim.trailing_zeros() as usize;
        check_qubits(n)?;
        if !state.is_normalized(1e-10) {
            return Err(Error::invalid(format!("state has norm {}", state.norm())));
        }
        Ok(Self {
            n_qubits: n,
            amps: state.as_slice().to_vec(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn state(&self) -> CVector {
        CVector::new(self.amps.clone()).expect("register is never empty")
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    /// Applies `u` to `targets` (first target is the most significant bit of
    /// `u`'s index) when every qubit in `controls` is `|1>`.
    pub fn apply_unitary(&mut self, u: &CMatrix, targets: &[usize], controls: &[usize]) -> Result<()> {
        let n = self.n_qubits;
        if targets.is_empty() {
            return Err(Error::invalid("no target qubits"));
        }
        let mut seen = vec![false; n];
        for &q in targets.iter().chain(controls) {
            if q >= n {
                return Err(Error::invalid(format!("qubit {q} out of range for {n} qubits")));
            }
            if seen[q] {
                return Err(Error::invalid(format!("qubit {q} listed more than once")));
            }
            seen[q] = true;
        }
        let k = targets.len();
        let sub = 1usize << k;
        if u.dim() != sub {
            return Err(Error::DimensionMismatch {
                expected: sub,
                found: u.dim(),
            });
        }
        if sub <= 64 && !u.is_unitary(1e-10) {
            return Err(Error::invalid("gate is not unitary"));
        }

        let tmasks: Vec<usize> = targets.iter().map(|&t| self.mask(t)).collect();
        let all_t: usize = tmasks.iter().sum();
        let cmask: usize = controls.iter().map(|&c| self.mask(c)).sum();
        let offsets: Vec<usize> = (0..sub)
            .map(|s| {
                tmasks
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| (s >> (k - 1 - i)) & 1 == 1)
                    .map(|(_, m)| m)
                    .sum()
            })
            .collect();

        let mut buf = vec![ZERO; sub];
        for base in 0..self.amps.len() {
            if base & all_t != 0 || base & cmask != cmask {
                continue;
            }
            for (b, &off) in buf.iter_mut().zip(&offsets) {
                *b = self.amps[base | off];
            }
            for (r, &off) in offsets.iter().enumerate() {
                let row = u.row(r);
                let mut acc = ZERO;
                for (x, y) in row.iter().zip(&buf) {
                    acc += x * y;
                }
                self.amps[base | off] = acc;
            }
        }
        Ok(())
    }

    pub fn h(&mut self, q: usize) -> Result<()> {
        self.apply_unitary(&gates::h(), &[q], &[])
    }

    pub fn x(&mut self, q: usize) -> Result<()> {
        self.apply_unitary(&gates::x(), &[q], &[])
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.apply_unitary(&gates::x(), &[target], &[control])
    }

    /// Probability of reading `0` on qubit `q`.
    pub fn probability_zero(&self, q: usize) -> f64 {
        let m = self.mask(q);
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & m == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Outcome distribution of measuring `qubits` (first listed is the most
    /// significant bit of the outcome).
    pub fn marginal(&self, qubits: &[usize]) -> Vec<f64> {
        let k = qubits.len();
        let masks: Vec<usize> = qubits.iter().map(|&q| self.mask(q)).collect();
        let mut out = vec![0.0; 1 << k];
        for (i, a) in self.amps.iter().enumerate() {
            let mut y = 0;
            for &m in &masks {
                y = (y << 1) | usize::from(i & m != 0);
            }
            out[y] += a.norm_sqr();
        }
        out
    }

    /// Inverse quantum Fourier transform on `qubits`, most significant first.
    pub fn inverse_qft(&mut self, qubits: &[usize]) -> Result<()> {
        let b = qubits.len();
        for i in 0..b / 2 {
            self.apply_unitary(&gates::swap(), &[qubits[i], qubits[b - 1 - i]], &[])?;
        }
        for j in (0..b).rev() {
            for k in (j + 1..b).rev() {
                let angle = -2.0 * PI / f64::from(1u32 << (k - j + 1));
                self.apply_unitary(&gates::phase(angle), &[qubits[j]], &[qubits[k]])?;
            }
            self.h(qubits[j])?;
        }
        Ok(())
    }
}

/// Real state-preparation unitary `|j>|0> -> |j>|v_j>`, built from one
/// Householder reflection per index.
#[derive(Clone, Debug)]
pub struct StatePrep {
    vectors: Vec<Vec<f64>>,
    index_qubits: usize,
    data_qubits: usize,
}

impl StatePrep {
    pub fn new(vectors: &[CVector]) -> Result<Self> {
        let mut real_vectors = Vec::with_capacity(vectors.len());
        for (j, v) in vectors.iter().enumerate() {
            if !v.is_real(1e-12) {
                return Err(Error::invalid(format!("vector {j} has complex entries")));
            }
            real_vectors.push(v.as_slice().iter().map(|z| z.re).collect::<Vec<_>>());
        }
        Self::from_real(&real_vectors)
    }

    pub fn from_real(vectors: &[Vec<f64>]) -> Result<Self> {
        let first = vectors.first().ok_or_else(|| Error::invalid("no vectors to prepare"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::invalid("zero-dimensional vectors"));
        }
        for (j, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            let n2: f64 = v.iter().map(|x| x * x).sum();
            if (n2 - 1.0).abs() > 1e-10 || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("vector {j} is not a unit vector")));
            }
        }
        let data_qubits = qubits_for(dim);
        let index_qubits = qubits_for(vectors.len());
        check_qubits(1 + index_qubits + 2 * data_qubits)?;
        let padded = 1 << data_qubits;
        Ok(Self {
            vectors: vectors
                .iter()
                .map(|v| {
                    let mut p = v.clone();
                    p.resize(padded, 0.0);
                    p
                })
                .collect(),
            index_qubits,
            data_qubits,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn index_qubits(&self) -> usize {
        self.index_qubits
    }

    pub fn data_qubits(&self) -> usize {
        self.data_qubits
    }

    /// Block-diagonal `sum_j |j><j| (x) W_j` on index (x) data.
    pub fn unitary(&self) -> CMatrix {
        let d = 1usize << self.data_qubits;
        let blocks = 1usize << self.index_qubits;
        let mut u = CMatrix::zeros(d * blocks);
        for j in 0..blocks {
            let w = match self.vectors.get(j) {
                Some(v) => householder_from_e0(v),
                None => CMatrix::identity(d),
            };
            for r in 0..d {
                for c in 0..d {
                    u[(j * d + r, j * d + c)] = w[(r, c)];
                }
            }
        }
        u
    }
}

fn qubits_for(count: usize) -> usize {
    count.next_power_of_two().trailing_zeros().max(1) as usize
}

/// Real reflection mapping `e_0` to the unit vector `v`.
fn householder_from_e0(v: &[f64]) -> CMatrix {
    let d = v.len();
    let mut u: Vec<f64> = v.iter().map(|x| -x).collect();
    u[0] += 1.0;
    let n2: f64 = u.iter().map(|x| x * x).sum();
    if n2 < 1e-30 {
        return CMatrix::identity(d);
    }
    CMatrix::from_fn(d, |r, c| {
        let delta = if r == c { 1.0 } else { 0.0 };
        real(delta - 2.0 * u[r] * u[c] / n2)
    })
}

/// Probability of reading `0` on the ancilla of the overlap circuit:
/// Hadamard, prep controlled on the ancilla, ancilla-controlled XOR of the
/// key `k` into the data register, Hadamard. Equals `(1 + <k|v_j>)/2`.
pub fn hadamard_test(prep: &StatePrep, j: usize, k: usize) -> Result<f64> {
    if j >= prep.len() {
        return Err(Error::invalid(format!("index {j} out of range for {} vectors", prep.len())));
    }
    let m = prep.data_qubits;
    let a = prep.index_qubits;
    if k >= 1 << m {
        return Err(Error::invalid(format!("key {k} out of range for {m} data qubits")));
    }
    let n = 1 + a + 2 * m;
    let anc = 0;
    let index: Vec<usize> = (1..1 + a).collect();
    let data: Vec<usize> = (1 + a..1 + a + m).collect();
    let key: Vec<usize> = (1 + a + m..n).collect();

    let init = (j << (2 * m)) | k;
    let mut reg = QuantumRegister::basis(n, init)?;
    reg.h(anc)?;
    let targets: Vec<usize> = index.iter().chain(&data).copied().collect();
    reg.apply_unitary(&prep.unitary(), &targets, &[anc])?;
    for b in 0..m {
        reg.apply_unitary(&gates::x(), &[data[b]], &[anc, key[b]])?;
    }
    reg.h(anc)?;
    Ok(reg.probability_zero(anc))
}

/// Contract-level amplitude estimation: a value within `eps0` of the truth
/// with probability at least `1 - delta0`, charged `ceil(c / (eps0 delta0))`
/// queries per call.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmplitudeEstimator {
    pub eps0: f64,
    pub delta0: f64,
    pub failure_mode: FailureMode,
    pub cost_constant: f64,
}

impl AmplitudeEstimator {
    pub const DEFAULT_COST_CONSTANT: f64 = 8.0;

    pub fn new(eps0: f64, delta0: f64, failure_mode: FailureMode) -> Result<Self> {
        if !(eps0 > 0.0 && eps0 < 1.0) {
            return Err(Error::invalid(format!("epsilon0 must lie in (0, 1), got {eps0}")));
        }
        if !(0.0..1.0).contains(&delta0) {
            return Err(Error::invalid(format!("delta0 must lie in [0, 1), got {delta0}")));
        }
        Ok(Self {
            eps0,
            delta0,
            failure_mode,
            cost_constant: Self::DEFAULT_COST_CONSTANT,
        })
    }

    pub fn with_cost_constant(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("cost constant must be positive, got {c}")));
        }
        self.cost_constant = c;
        Ok(self)
    }

    /// Queries charged per call; saturates when `delta0 = 0`.
    pub fn charge(&self) -> u64 {
        let q = (self.cost_constant / (self.eps0 * self.delta0)).ceil();
        if q.is_finite() && q < u64::MAX as f64 {
            q as u64
        } else {
            u64::MAX
        }
    }

    pub fn estimate<R: Rng + ?Sized>(
        &self,
        success_prob: f64,
        rng: &mut R,
        counter: &mut QueryCounter,
    ) -> Result<NoisySample> {
        if !(0.0..=1.0).contains(&success_prob) {
            return Err(Error::invalid(format!("success probability {success_prob} outside [0, 1]")));
        }
        counter.charge(self.charge());
        let model = NoiseModel::new(self.eps0, self.delta0, self.failure_mode, (0.0, 1.0))?;
        Ok(model.draw(success_prob, rng))
    }
}

/// One contract-level amplitude estimate with the default cost constant.
pub fn amplitude_estimate<R: Rng + ?Sized>(
    success_prob: f64,
    eps0: f64,
    delta0: f64,
    failure_mode: FailureMode,
    rng: &mut R,
    counter: &mut QueryCounter,
) -> Result<NoisySample> {
    AmplitudeEstimator::new(eps0, delta0, failure_mode)?.estimate(success_prob, rng, counter)
}

/// Grover iterate `-A S_0 A^dagger S_chi` for preparation `A` and the marked
/// basis states `good`.
pub fn grover_iterate(prep: &CMatrix, good: &[usize]) -> Result<CMatrix> {
    let n = prep.dim();
    if let Some(&g) = good.iter().find(|&&g| g >= n) {
        return Err(Error::invalid(format!("marked state {g} out of range")));
    }
    let mut s_chi = vec![real(1.0); n];
    for &g in good {
        s_chi[g] = real(-1.0);
    }
    let mut s0 = vec![real(1.0); n];
    s0[0] = real(-1.0);
    let q = prep
        .matmul(&CMatrix::diag(&s0))
        .matmul(&prep.adjoint())
        .matmul(&CMatrix::diag(&s_chi));
    Ok(q.scale(real(-1.0)))
}

/// Exact outcome distribution of circuit-level amplitude estimation, as
/// `(estimate sin^2(pi y / 2^bits), probability)` per control outcome `y`.
pub fn amplitude_estimate_distribution(prep: &CMatrix, good: &[usize], bits: usize) -> Result<Vec<(f64, f64)>> {
    let n = prep.dim();
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::invalid("preparation unitary must act on whole qubits"));
    }
    let sys = n.trailing_zeros() as usize;
    if bits + sys > MAX_AE_CIRCUIT_QUBITS {
        return Err(Error::TooLarge {
            what: "amplitude-estimation circuit qubits",
            requested: bits + sys,
            cap: MAX_AE_CIRCUIT_QUBITS,
        });
    }
    if !prep.is_unitary(1e-10) {
        return Err(Error::invalid("preparation is not unitary"));
    }
    let q = grover_iterate(prep, good)?;
    let psi = prep.column(0);
    let dist = qpe_distribution(&q, &psi, bits)?;
    let m = (1usize << bits) as f64;
    Ok(dist
        .into_iter()
        .enumerate()
        .map(|(y, p)| ((PI * y as f64 / m).sin().powi(2), p))
        .collect())
}

/// Samples one circuit-level amplitude estimate.
pub fn amplitude_estimate_circuit<R: Rng + ?Sized>(
    prep: &CMatrix,
    good: &[usize],
    bits: usize,
    rng: &mut R,
) -> Result<f64> {
    let dist = amplitude_estimate_distribution(prep, good, bits)?;
    let w = WeightedIndex::new(dist.iter().map(|(_, p)| p.max(0.0)))
        .map_err(|e| Error::invalid(format!("degenerate outcome distribution: {e}")))?;
    Ok(dist[w.sample(rng)].0)
}

/// Sampled phase-estimation outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseEstimateResult {
    /// `(y / 2^bits, multiplicity)` for every observed outcome `y`, in
    /// increasing order.
    pub samples: Vec<(f64, u64)>,
    pub bits: usize,
    /// Per-eigenvector probability of an outcome farther than one grid step
    /// from the true phase is at most `1 - 8/pi^2`.
    pub failure_prob: f64,
    /// Exact outcome distribution over the `2^bits` control states.
    pub distribution: Vec<f64>,
}

impl PhaseEstimateResult {
    pub fn shots(&self) -> u64 {
        self.samples.iter().map(|s| s.1).sum()
    }
}

fn pad_to_qubits(u: &CMatrix, psi: &CVector) -> Result<(CMatrix, CVector)> {
    let n = u.dim();
    if psi.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: psi.dim(),
        });
    }
    let p = n.next_power_of_two().max(2);
    if p == n {
        return Ok((u.clone(), psi.clone()));
    }
    let up = CMatrix::from_fn(p, |r, c| {
        if r < n && c < n {
            u[(r, c)]
        } else if r == c {
            real(1.0)
        } else {
            ZERO
        }
    });
    let mut v = psi.as_slice().to_vec();
    v.resize(p, ZERO);
    Ok((up, CVector::new(v)?))
}

/// Exact distribution of the `bits`-qubit control register after textbook
/// QPE: Hadamards, controlled `U^{2^m}`, inverse QFT. Non-power-of-two
/// systems are padded with an identity block.
pub fn qpe_distribution(u: &CMatrix, psi: &CVector, bits: usize) -> Result<Vec<f64>> {
    if bits == 0 || bits > MAX_QPE_BITS {
        return Err(Error::invalid(format!("bits must lie in 1..={MAX_QPE_BITS}, got {bits}")));
    }
    if !u.is_unitary(1e-8) {
        return Err(Error::invalid("phase estimation needs a unitary"));
    }
    if !psi.is_normalized(1e-10) {
        return Err(Error::invalid("input state is not normalized"));
    }
    let (u, psi) = pad_to_qubits(u, psi)?;
    let sys = u.dim().trailing_zeros() as usize;
    let total = bits + sys;
    check_qubits(total)?;

    let mut amps = vec![ZERO; 1 << total];
    amps[..psi.dim()].copy_from_slice(psi.as_slice());
    let mut reg = QuantumRegister {
        n_qubits: total,
        amps,
    };
    let control: Vec<usize> = (0..bits).collect();
    let system: Vec<usize> = (bits..total).collect();
    for &c in &control {
        reg.h(c)?;
    }
    let mut power = u;
    for m in 0..bits {
        reg.apply_unitary(&power, &system, &[bits - 1 - m])?;
        if m + 1 < bits {
            power = power.matmul(&power);
        }
    }
    reg.inverse_qft(&control)?;
    Ok(reg.marginal(&control))
}

/// QPE of `u` on `psi`, sampled `shots` times.
pub fn phase_estimate<R: Rng + ?Sized>(
    u: &CMatrix,
    psi: &CVector,
    bits: usize,
    shots: u64,
    rng: &mut R,
) -> Result<PhaseEstimateResult> {
    let distribution = qpe_distribution(u, psi, bits)?;
    let samples = sample_outcomes(&distribution, bits, shots, rng)?;
    Ok(PhaseEstimateResult {
        samples,
        bits,
        failure_prob: 1.0 - 8.0 / (PI * PI),
        distribution,
    })
}

pub(crate) fn sample_outcomes<R: Rng + ?Sized>(
    distribution: &[f64],
    bits: usize,
    shots: u64,
    rng: &mut R,
) -> Result<Vec<(f64, u64)>> {
    let mut counts = vec![0u64; distribution.len()];
    if shots > 0 {
        let w = WeightedIndex::new(distribution.iter().map(|p| p.max(0.0)))
            .map_err(|e| Error::invalid(format!("degenerate outcome distribution: {e}")))?;
        for _ in 0..shots {
            counts[w.sample(rng)] += 1;
        }
    }
    let m = (1u64 << bits) as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(y, c)| (y as f64 / m, c))
        .collect())
}

/// Maps a phase `phi` of `exp(-i H t)` to the eigenvalue of `H`, with
/// `E t` wrapped into `(-pi, pi]`.
pub fn phase_to_energy(phi: f64, t: f64) -> f64 {
    let mut a = -2.0 * PI * phi.rem_euclid(1.0);
    if a <= -PI {
        a += 2.0 * PI;
    }
    a / t
}

/// Inverse of [`phase_to_energy`]: the phase in `[0, 1)`.
pub fn energy_to_phase(e: f64, t: f64) -> f64 {
    (-e * t / (2.0 * PI)).rem_euclid(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{operator_exp, random_unit_vector, Hermitian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fejer(phi: f64, y: usize, bits: usize) -> f64 {
        let m = (1usize << bits) as f64;
        let x = phi - y as f64 / m;
        let num = (PI * m * x).sin();
        let den = (PI * x).sin();
        if den.abs() < 1e-15 {
            1.0
        } else {
            (num / (m * den)).powi(2)
        }
    }

    #[test]
    fn x_flips_zero() {
        let mut r = QuantumRegister::new(1).unwrap();
        r.x(0).unwrap();
        assert_eq!(r.amplitudes()[1], real(1.0));
    }

    #[test]
    fn cnot_truth_table() {
        let mut r = QuantumRegister::basis(2, 0b10).unwrap();
        r.cnot(0, 1).unwrap();
        assert_eq!(r.amplitudes()[0b11], real(1.0));
        let mut r = QuantumRegister::basis(2, 0b01).unwrap();
        r.cnot(0, 1).unwrap();
        assert_eq!(r.amplitudes()[0b01], real(1.0));
    }

    #[test]
    fn hadamard_is_an_involution() {
        let mut r = QuantumRegister::new(1).unwrap();
        r.h(0).unwrap();
        r.h(0).unwrap();
        assert!((r.amplitudes()[0] - real(1.0)).norm() < 1e-15);
    }

    #[test]
    fn rejects_overlap_and_bad_dimension() {
        let mut r = QuantumRegister::new(2).unwrap();
        assert!(r.apply_unitary(&gates::x(), &[0], &[0]).is_err());
        assert!(r.apply_unitary(&gates::swap(), &[0], &[]).is_err());
        assert!(r.apply_unitary(&gates::x(), &[2], &[]).is_err());
        assert!(QuantumRegister::new(25).is_err());
    }

    #[test]
    fn hadamard_test_examples() {
        let e = |i: usize| {
            let mut v = vec![0.0; 4];
            v[i] = 1.0;
            v
        };
        let a = 0.36f64;
        let b = (1.0 - a * a).sqrt();
        let prep = StatePrep::from_real(&[e(2), e(1), vec![a, 0.0, b, 0.0]]).unwrap();
        assert!((hadamard_test(&prep, 0, 2).unwrap() - 1.0).abs() < 1e-12);
        assert!((hadamard_test(&prep, 1, 3).unwrap() - 0.5).abs() < 1e-12);
        let dot: f64 = prep.vectors[2][0];
        assert!((hadamard_test(&prep, 2, 0).unwrap() - (1.0 + dot) / 2.0).abs() < 1e-12);
        assert!((hadamard_test(&prep, 2, 0).unwrap() - 0.68).abs() < 1e-12);
    }

    #[test]
    fn hadamard_test_rejects_complex_vectors() {
        let v = CVector::new(vec![c64(0.0, 1.0), real(0.0)]).unwrap();
        assert!(StatePrep::new(&[v]).is_err());
    }

    #[test]
    fn prep_unitary_maps_zero_to_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vs: Vec<CVector> = (0..3).map(|_| random_unit_vector(5, &mut rng, false)).collect();
        let prep = StatePrep::new(&vs).unwrap();
        let u = prep.unitary();
        assert!(u.is_unitary(1e-12));
        let d = 1 << prep.data_qubits();
        for (j, v) in vs.iter().enumerate() {
            let col = u.column(j * d);
            for i in 0..5 {
                assert!((col[j * d + i] - v[i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn contract_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counter = QueryCounter::new();
        for _ in 0..1000 {
            let s = amplitude_estimate(0.5, 0.01, 0.0, FailureMode::WorstCase, &mut rng, &mut counter).unwrap();
            assert!((0.49..=0.51).contains(&s.value));
            let z = amplitude_estimate(0.0, 0.05, 0.2, FailureMode::Uniform, &mut rng, &mut counter).unwrap();
            if z.success {
                assert!(z.value <= 0.05);
            }
        }
        assert_eq!(counter.total(), u64::MAX);
        let est = AmplitudeEstimator::new(0.1, 0.1, FailureMode::WorstCase).unwrap();
        assert_eq!(est.charge(), 800);
        assert!(AmplitudeEstimator::new(0.0, 0.1, FailureMode::WorstCase).is_err());
        assert!(AmplitudeEstimator::new(0.1, 1.0, FailureMode::WorstCase).is_err());
    }

    #[test]
    fn contract_failure_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counter = QueryCounter::new();
        let est = AmplitudeEstimator::new(0.02, 0.1, FailureMode::WorstCase).unwrap();
        let n = 100_000;
        let bad = (0..n)
            .filter(|_| {
                let s = est.estimate(0.3, &mut rng, &mut counter).unwrap();
                (s.value - 0.3).abs() > 0.02 + 1e-12
            })
            .count();
        let sigma = (0.1f64 * 0.9 / n as f64).sqrt();
        assert!((bad as f64 / n as f64) <= 0.1 + 3.0 * sigma, "{bad}");
    }

    #[test]
    fn qpe_exact_phase() {
        let u = CMatrix::diag(&[real(1.0), Complex64::from_polar(1.0, 2.0 * PI * 0.25)]);
        let psi = CVector::basis(2, 1);
        let d = qpe_distribution(&u, &psi, 2).unwrap();
        assert!((d[1] - 1.0).abs() < 1e-12);
        let id = CMatrix::identity(4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = random_unit_vector(4, &mut rng, true);
        let r = phase_estimate(&id, &v, 5, 100, &mut rng).unwrap();
        assert_eq!(r.samples, vec![(0.0, 100)]);
    }

    #[test]
    fn qpe_matches_fejer_kernel() {
        let u = CMatrix::diag(&[real(1.0), Complex64::from_polar(1.0, 2.0 * PI * 0.3)]);
        let psi = CVector::basis(2, 1);
        let d = qpe_distribution(&u, &psi, 4).unwrap();
        let modal = (0..16).max_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
        assert_eq!(modal, 5);
        for (y, p) in d.iter().enumerate() {
            assert!((p - fejer(0.3, y, 4)).abs() < 1e-10, "y={y}");
        }
    }

    #[test]
    fn qpe_is_linear_over_eigencomponents() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = crate::linalg::random_hermitian(6, &mut rng, true);
        let u = operator_exp(&h, 1.0).unwrap();
        let psi = random_unit_vector(6, &mut rng, true);
        let bits = 6;
        let d = qpe_distribution(&u, &psi, bits).unwrap();
        let eig = crate::linalg::eig_hermitian(&h).unwrap();
        let mut expect = vec![0.0; 1 << bits];
        for (e, v) in eig.values.iter().zip(&eig.vectors) {
            let w = v.inner(&psi).norm_sqr();
            let phi = energy_to_phase(*e, 1.0);
            for (y, x) in expect.iter_mut().enumerate() {
                *x += w * fejer(phi, y, bits);
            }
        }
        for (a, b) in d.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn shots_sum_and_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = Hermitian::diag(&[0.3, -0.7]);
        let u = operator_exp(&h, 1.0).unwrap();
        let psi = CVector::from_real(&[0.6, 0.8]).unwrap();
        let r = phase_estimate(&u, &psi, 7, 1234, &mut rng).unwrap();
        assert_eq!(r.shots(), 1234);
        for (phi, _) in &r.samples {
            assert_eq!((phi * 128.0).fract(), 0.0);
        }
    }

    #[test]
    fn energy_phase_roundtrip() {
        for &e in &[-3.0, -1.0, 0.0, 0.5, 3.1] {
            let phi = energy_to_phase(e, 1.0);
            assert!((0.0..1.0).contains(&phi));
            assert!((phase_to_energy(phi, 1.0) - e).abs() < 1e-12);
        }
        assert!((phase_to_energy(0.5, 1.0) - PI).abs() < 1e-12);
    }

    #[test]
    fn circuit_amplitude_estimation_meets_contract() {
        // A = Ry(2 theta) on one qubit, marked |1>: p = sin^2 theta.
        let theta: f64 = 0.4;
        let (s, c) = theta.sin_cos();
        let prep = CMatrix::from_real_rows(&[vec![c, -s], vec![s, c]]).unwrap();
        let p = s * s;
        let bits = 7;
        let dist = amplitude_estimate_distribution(&prep, &[1], bits).unwrap();
        let m = (1u32 << bits) as f64;
        let eps = 2.0 * PI * (p * (1.0 - p)).sqrt() / m + PI * PI / (m * m);
        let ok: f64 = dist.iter().filter(|(e, _)| (e - p).abs() <= eps).map(|x| x.1).sum();
        assert!(ok >= 8.0 / (PI * PI));
        let total: f64 = dist.iter().map(|x| x.1).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!(amplitude_estimate_distribution(&prep, &[1], 10).is_err());
    }
}
