//! Dense complex linear algebra.
//!
//! Square matrices are stored row-major. Hermitian operators are a validated
//! newtype over [`CMatrix`], and [`eig_hermitian`] diagonalizes them with a
//! cyclic Jacobi sweep. Everything here is small-dimension, single-threaded
//! and allocation-happy: the simulators above never go past a few thousand
//! rows.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

pub use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest matrix dimension accepted by the dense routines.
pub const MAX_DIM: usize = 4096;

/// Entrywise tolerance used when validating Hermitian symmetry.
pub const HERMITIAN_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    if dim > MAX_DIM {
        return Err(Error::TooLarge {
            what: "matrix dimension",
            requested: dim,
            cap: MAX_DIM,
        });
    }
    Ok(())
}

/// A column vector of complex amplitudes.
#[derive(Clone, PartialEq)]
pub struct CVector {
    data: Vec<Complex64>,
}

impl CVector {
    pub fn new(data: Vec<Complex64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidInput("vector dimension must be at least 1".into()));
        }
        Ok(Self { data })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "vector dimension must be at least 1");
        Self {
            data: vec![ZERO; dim],
        }
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| real(v)).collect())
    }

    /// Computational basis vector `e_index`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.data[index] = ONE;
        v
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Returns a unit-norm copy; fails on the zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        Ok(self.scale(real(1.0 / n)))
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    /// Inner product `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &CVector) -> Complex64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in inner product");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn axpy(&mut self, a: Complex64, x: &CVector) {
        assert_eq!(self.dim(), x.dim());
        for (y, xi) in self.data.iter_mut().zip(&x.data) {
            *y += a * xi;
        }
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CVector) -> Self {
        let mut data = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.data {
            for b in &other.data {
                data.push(a * b);
            }
        }
        Self { data }
    }

    /// Outer product `|self><other|`.
    pub fn outer(&self, other: &CVector) -> CMatrix {
        assert_eq!(self.dim(), other.dim(), "outer product needs equal dimensions");
        let n = self.dim();
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.data[i] * other.data[j].conj();
            }
        }
        m
    }

    /// True when every imaginary part is within `tol` of zero.
    pub fn is_real(&self, tol: f64) -> bool {
        self.data.iter().all(|z| z.im.abs() <= tol)
    }

    pub fn distance(&self, other: &CVector) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl fmt::Debug for CVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.iter()).finish()
    }
}

impl Index<usize> for CVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for CVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.data[i]
    }
}

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be at least 1");
        Self {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        check_dim(n)?;
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| real(v)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag(values: &[Complex64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let vals: Vec<Complex64> = values.iter().map(|&v| real(v)).collect();
        Self::diag(&vals)
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[CVector]) -> Result<Self> {
        let n = cols.len();
        check_dim(n)?;
        let mut m = Self::zeros(n);
        for (j, c) in cols.iter().enumerate() {
            if c.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: c.dim(),
                });
            }
            for i in 0..n {
                m[(i, j)] = c[i];
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> CVector {
        CVector {
            data: (0..self.n).map(|i| self[(i, j)]).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch in matmul");
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        assert_eq!(self.n, v.dim(), "dimension mismatch in matrix-vector product");
        let n = self.n;
        let data = (0..n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v.as_slice())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        CVector { data }
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let (n, m) = (self.n, other.n);
        let mut out = CMatrix::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Integer power by repeated squaring.
    pub fn pow(&self, mut e: u64) -> CMatrix {
        let mut base = self.clone();
        let mut acc = CMatrix::identity(self.n);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.matmul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.matmul(&base);
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest `|A_ij - conj(A_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in i..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let prod = self.adjoint().matmul(self);
        (&prod - &CMatrix::identity(self.n)).max_abs() <= tol
    }

    /// Number of nonzeros in row `i` with magnitude above `tol`.
    pub fn row_nnz(&self, i: usize, tol: f64) -> usize {
        self.row(i).iter().filter(|z| z.norm() > tol).count()
    }

    /// Maximum row sparsity at threshold `tol`.
    pub fn sparsity(&self, tol: f64) -> usize {
        (0..self.n).map(|i| self.row_nnz(i, tol)).max().unwrap_or(0)
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<CMatrix> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = CMatrix::identity(n);
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[(x, col)].norm().total_cmp(&a[(y, col)].norm()))
                .expect("non-empty range");
            if a[(pivot, col)].norm() <= 1e-14 * scale {
                return Err(Error::Singular);
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let p = a[(col, col)].inv();
            for j in 0..n {
                a[(col, j)] *= p;
                inv[(col, j)] *= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == ZERO {
                    continue;
                }
                for j in 0..n {
                    let (ac, ic) = (a[(col, j)], inv[(col, j)]);
                    a[(r, j)] -= f * ac;
                    inv[(r, j)] -= f * ic;
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        let n = self.n;
        for j in 0..n {
            self.data.swap(a * n + j, b * n + j);
        }
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[Complex64]> = (0..self.n).map(|i| self.row(i)).collect();
        f.debug_list().entries(rows).finish()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n);
        CMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n);
        CMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale(real(-1.0))
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

/// A dense Hermitian matrix. Construction checks symmetry and then forces the
/// stored matrix to be exactly Hermitian.
#[derive(Clone, PartialEq)]
pub struct Hermitian(CMatrix);

impl Hermitian {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_dim(m.dim())?;
        let defect = m.hermitian_defect();
        let tol = HERMITIAN_TOL * m.max_abs().max(1.0);
        if defect > tol {
            return Err(Error::NotHermitian { defect });
        }
        Ok(Self::symmetrize(&m))
    }

    /// `(M + M†)/2`, always Hermitian.
    pub fn symmetrize(m: &CMatrix) -> Self {
        let n = m.dim();
        Hermitian(CMatrix::from_fn(n, |i, j| {
            if i == j {
                real(m[(i, i)].re)
            } else {
                (m[(i, j)] + m[(j, i)].conj()) * 0.5
            }
        }))
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(CMatrix::from_real_rows(rows)?)
    }

    pub fn zeros(n: usize) -> Self {
        Hermitian(CMatrix::zeros(n))
    }

    pub fn identity(n: usize) -> Self {
        Hermitian(CMatrix::identity(n))
    }

    pub fn diag(values: &[f64]) -> Self {
        Hermitian(CMatrix::diag_real(values))
    }

    pub fn pauli_x() -> Self {
        Hermitian(CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).expect("2x2"))
    }

    pub fn pauli_z() -> Self {
        Self::diag(&[1.0, -1.0])
    }

    /// Projector `|v><v|` for a (not necessarily normalized) vector.
    pub fn projector(v: &CVector) -> Self {
        Hermitian::symmetrize(&v.outer(v))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        Hermitian(self.0.scale(real(s)))
    }

    pub fn add(&self, other: &Hermitian) -> Self {
        Hermitian(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Hermitian) -> Self {
        Hermitian(&self.0 - &other.0)
    }

    pub fn expectation(&self, v: &CVector) -> f64 {
        v.inner(&self.0.apply(v)).re
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.0.as_slice().iter().all(|z| z.im.abs() <= tol)
    }
}

impl fmt::Debug for Hermitian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Index<(usize, usize)> for Hermitian {
    type Output = Complex64;
    fn index(&self, ij: (usize, usize)) -> &Complex64 {
        &self.0[ij]
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Vec<CVector>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `Σ f(E_n) |E_n><E_n|`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n);
        for (e, v) in self.values.iter().zip(&self.vectors) {
            let w = f(*e);
            for i in 0..n {
                let vi = v[i] * w;
                if vi == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vi * v[j].conj();
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(real)
    }

    /// Smallest gap between consecutive eigenvalues.
    pub fn min_gap(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Projector onto the eigenvectors selected by `keep`.
    pub fn projector(&self, keep: impl Fn(usize, f64) -> bool) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n);
        for (k, (e, v)) in self.values.iter().zip(&self.vectors).enumerate() {
            if keep(k, *e) {
                out = &out + &v.outer(v);
            }
        }
        out
    }
}

const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Diagonalizes a Hermitian matrix with the cyclic Jacobi method.
///
/// Each rotation first removes the phase of the pivot `a_pq` with a diagonal
/// unitary and then applies the real symmetric 2x2 rotation, so the whole
/// sweep stays in complex arithmetic without ever forming a real embedding.
/// Sweeps stop once the off-diagonal Frobenius mass drops below
/// `1e-14 * ||H||_F`.
pub fn eig_hermitian(h: &Hermitian) -> Result<EigenDecomposition> {
    let n = h.dim();
    let mut a = h.matrix().clone();
    let mut v = CMatrix::identity(n);
    let fro = a.frobenius();
    let target = JACOBI_TOL * fro;

    let off_norm = |a: &CMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = n == 1 || off_norm(&a) <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                what: "Jacobi eigensolver",
                iterations: sweeps,
            });
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r == 0.0 || r <= 1e-300 {
                    continue;
                }
                let alpha = a[(p, p)].re;
                let beta = a[(q, q)].re;
                // Skip rotations whose effect is below round-off.
                if r < 1e-18 * (alpha.abs() + beta.abs()) {
                    a[(p, q)] = ZERO;
                    a[(q, p)] = ZERO;
                    continue;
                }
                let phase = apq / r; // e^{i phi}
                let theta = (beta - alpha) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G = diag(1, e^{-i phi}) * [[c, s], [-s, c]]
                let g_pp = real(c);
                let g_pq = real(s);
                let g_qp = phase.conj() * (-s);
                let g_qq = phase.conj() * c;

                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * g_pp + aiq * g_qp;
                    a[(i, q)] = aip * g_pq + aiq * g_qq;
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * g_pp + viq * g_qp;
                    v[(i, q)] = vip * g_pq + viq * g_qq;
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = g_pp.conj() * apj + g_qp.conj() * aqj;
                    a[(q, j)] = g_pq.conj() * apj + g_qq.conj() * aqj;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = real(a[(p, p)].re);
                a[(q, q)] = real(a[(q, q)].re);
            }
        }
        converged = off_norm(&a) <= target;
    }

    let mut pairs: Vec<(f64, CVector)> = (0..n)
        .map(|k| (a[(k, k)].re, canonical_phase(v.column(k))))
        .collect();
    pairs.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then_with(|| first_support(&x.1).cmp(&first_support(&y.1)))
    });
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(EigenDecomposition { values, vectors })
}

fn first_support(v: &CVector) -> usize {
    v.as_slice()
        .iter()
        .position(|z| z.norm() > 1e-10)
        .unwrap_or(v.dim())
}

/// Rotates the global phase so the first significant component is real and
/// positive.
fn canonical_phase(v: CVector) -> CVector {
    match v.as_slice().iter().find(|z| z.norm() > 1e-10) {
        Some(z) => {
            let ph = z.conj() / z.norm();
            v.scale(ph)
        }
        None => v,
    }
}

/// `exp(-i H t)` through the eigendecomposition of `H`.
pub fn operator_exp(h: &Hermitian, t: f64) -> Result<CMatrix> {
    let eig = eig_hermitian(h)?;
    Ok(eig.reconstruct_with(|e| Complex64::from_polar(1.0, -e * t)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    Spectral,
    Trace,
    MaxEntry,
}

/// Singular values, descending. Hermitian inputs are diagonalized directly;
/// anything else goes through `A†A`.
pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    let tol = HERMITIAN_TOL * a.max_abs().max(1.0);
    let mut sv: Vec<f64> = if a.hermitian_defect() <= tol {
        eig_hermitian(&Hermitian::symmetrize(a))?
            .values
            .into_iter()
            .map(f64::abs)
            .collect()
    } else {
        let gram = Hermitian::symmetrize(&a.adjoint().matmul(a));
        eig_hermitian(&gram)?
            .values
            .into_iter()
            .map(|e| e.max(0.0).sqrt())
            .collect()
    };
    sv.sort_by(|x, y| y.total_cmp(x));
    Ok(sv)
}

pub fn norm(a: &CMatrix, kind: NormKind) -> Result<f64> {
    Ok(match kind {
        NormKind::MaxEntry => a.max_abs(),
        NormKind::Spectral => singular_values(a)?.first().copied().unwrap_or(0.0),
        NormKind::Trace => singular_values(a)?.iter().sum(),
    })
}

pub fn spectral_norm(a: &CMatrix) -> f64 {
    norm(a, NormKind::Spectral).expect("spectral norm of a finite matrix")
}

/// Scaled and squared Taylor series for `exp(-i H t)`, kept independent of
/// the eigensolver so it can serve as a cross-check.
pub fn taylor_exp(h: &CMatrix, t: f64, terms: usize) -> CMatrix {
    let n = h.dim();
    let norm = h.max_abs() * n as f64 * t.abs();
    let mut squarings = 0u32;
    while norm / f64::from(1u32 << squarings.min(30)) > 0.5 && squarings < 30 {
        squarings += 1;
    }
    let step = t / f64::from(1u32 << squarings);
    let a = h.scale(c64(0.0, -step));
    let mut term = CMatrix::identity(n);
    let mut sum = CMatrix::identity(n);
    for k in 1..=terms {
        term = term.matmul(&a).scale(real(1.0 / k as f64));
        sum = &sum + &term;
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

/// Random Hermitian matrix with entries drawn uniformly from the unit box.
pub fn random_hermitian<R: rand::Rng + ?Sized>(n: usize, rng: &mut R, complex: bool) -> Hermitian {
    let mut m = CMatrix::zeros(n);
    for i in 0..n {
        m[(i, i)] = real(rng.random_range(-1.0..1.0));
        for j in i + 1..n {
            let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
            let z = c64(rng.random_range(-1.0..1.0), im);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    Hermitian(m)
}

/// Haar-ish random unit vector (Gaussian components, normalized).
pub fn random_unit_vector<R: rand::Rng + ?Sized>(n: usize, rng: &mut R, complex: bool) -> CVector {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let data: Vec<Complex64> = (0..n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = if complex { StandardNormal.sample(rng) } else { 0.0 };
                c64(re, im)
            })
            .collect();
        let v = CVector { data };
        if let Ok(u) = v.normalized() {
            return u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_eigenvalues() {
        let eig = eig_hermitian(&Hermitian::identity(4)).unwrap();
        assert_eq!(eig.values, vec![1.0; 4]);
    }

    #[test]
    fn pauli_z_eigenpairs() {
        let eig = eig_hermitian(&Hermitian::pauli_z()).unwrap();
        assert_eq!(eig.values, vec![-1.0, 1.0]);
        assert!(eig.vectors[0].distance(&CVector::basis(2, 1)) < 1e-15);
        assert!(eig.vectors[1].distance(&CVector::basis(2, 0)) < 1e-15);
    }

    #[test]
    fn random_hermitian_residuals_and_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let h = random_hermitian(8, &mut rng, true);
            let eig = eig_hermitian(&h).unwrap();
            let hn = spectral_norm(h.matrix());
            for (e, v) in eig.values.iter().zip(&eig.vectors) {
                let mut r = h.matrix().apply(v);
                r.axpy(real(-e), v);
                assert!(r.norm() <= 1e-10 * hn, "residual {}", r.norm());
            }
            for i in 0..8 {
                for j in 0..8 {
                    let ip = eig.vectors[i].inner(&eig.vectors[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - real(want)).norm() < 1e-10);
                }
            }
            let diff = &eig.reconstruct() - h.matrix();
            assert!(diff.max_abs() < 1e-12);
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(Hermitian::new(m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn rejects_oversized() {
        assert!(matches!(check_dim(MAX_DIM + 1), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn exp_zero_time_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(4, &mut rng, true);
        let u = operator_exp(&h, 0.0).unwrap();
        assert!((&u - &CMatrix::identity(4)).max_abs() < 1e-14);
    }

    #[test]
    fn exp_of_z_at_pi() {
        let u = operator_exp(&Hermitian::pauli_z(), std::f64::consts::PI).unwrap();
        let want = CMatrix::diag_real(&[-1.0, -1.0]);
        assert!((&u - &want).max_abs() < 1e-14);
    }

    #[test]
    fn exp_matches_taylor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(4, &mut rng, true);
        let u = operator_exp(&h, 0.7).unwrap();
        let oracle = taylor_exp(h.matrix(), 0.7, 20);
        assert!((&u - &oracle).max_abs() < 1e-9);
        assert!(u.is_unitary(1e-10));
    }

    #[test]
    fn identity_norms() {
        let i3 = CMatrix::identity(3);
        assert!((norm(&i3, NormKind::Spectral).unwrap() - 1.0).abs() < 1e-14);
        assert!((norm(&i3, NormKind::Trace).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(norm(&i3, NormKind::MaxEntry).unwrap(), 1.0);
        let z = &i3 - &i3;
        for kind in [NormKind::Spectral, NormKind::Trace, NormKind::MaxEntry] {
            assert_eq!(norm(&z, kind).unwrap(), 0.0);
        }
    }

    #[test]
    fn pure_state_trace_distance() {
        // |a> = e1, |b> = c e1 + s e2: the difference of projectors has
        // eigenvalues ±sqrt(1 - c^2).
        for &c in &[1.0, 0.8, 0.3, 0.0] {
            let s = (1.0f64 - c * c).sqrt();
            let a = CVector::from_real(&[1.0, 0.0, 0.0]).unwrap();
            let b = CVector::from_real(&[c, s, 0.0]).unwrap();
            let d = &a.outer(&a) - &b.outer(&b);
            let t = norm(&d, NormKind::Trace).unwrap();
            assert!((t - 2.0 * s).abs() < 1e-12, "c={c} t={t}");
        }
    }

    #[test]
    fn non_hermitian_singular_values() {
        // [[0, 2], [0, 0]] has singular values {2, 0}.
        let m = CMatrix::from_real_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        let sv = singular_values(&m).unwrap();
        assert!((sv[0] - 2.0).abs() < 1e-12 && sv[1].abs() < 1e-7);
    }

    #[test]
    fn inverse_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_hermitian(6, &mut rng, true);
        let m = &h.matrix().clone() + &CMatrix::identity(6).scale(c64(0.0, 3.0));
        let inv = m.inverse().unwrap();
        assert!((&m.matmul(&inv) - &CMatrix::identity(6)).max_abs() < 1e-12);
        assert!(matches!(CMatrix::zeros(2).inverse(), Err(Error::Singular)));
    }

    #[test]
    fn real_symmetric_spectrum_is_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = random_hermitian(7, &mut rng, false);
        let eig = eig_hermitian(&h).unwrap();
        for v in &eig.vectors {
            assert!(v.is_real(1e-12));
        }
    }

    #[test]
    fn degenerate_spectrum() {
        let h = Hermitian::diag(&[2.0, -1.0, 2.0, 0.5]);
        let eig = eig_hermitian(&h).unwrap();
        assert_eq!(eig.values, vec![-1.0, 0.5, 2.0, 2.0]);
        assert!(eig.vectors[2].distance(&CVector::basis(4, 0)) < 1e-15);
        assert!(eig.vectors[3].distance(&CVector::basis(4, 2)) < 1e-15);
    }
}
