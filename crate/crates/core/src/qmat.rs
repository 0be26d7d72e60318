//! Small dense complex matrices and density matrices.
//!
//! Everything here is sized for polarization states of one or two photons,
//! so matrices never exceed 4x4 in practice. The eigensolver is a cyclic
//! complex Jacobi sweep, which is exact enough (and deterministic) at these
//! sizes.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Maximum entrywise deviation from Hermiticity accepted for a density matrix.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Maximum deviation of the trace from one accepted for a density matrix.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues down to `-PSD_TOL` are clamped to zero; anything lower is rejected.
pub const PSD_TOL: f64 = 1e-10;

const MAX_DENSITY_DIM: usize = 4;
const JACOBI_MAX_SWEEPS: usize = 100;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Detection arm of the beamsplitter; also the subsystem index of a
/// two-photon state written in arm order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    One,
    Two,
}

impl Arm {
    pub fn from_index(i: usize) -> Result<Arm> {
        match i {
            1 => Ok(Arm::One),
            2 => Ok(Arm::Two),
            _ => Err(Error::input(format!("arm index must be 1 or 2, got {i}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("matrix dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::input("matrix entries must be finite"));
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn from_rows<const N: usize>(rows: [[C64; N]; N]) -> Self {
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        CMatrix {
            rows: N,
            cols: N,
            data,
        }
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = c(v, 0.0);
        }
        m
    }

    /// `|v><v|` for a column vector `v`.
    pub fn outer(v: &[C64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)];
            }
        }
        m
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(c(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|m[i][j] - conj(m[j][i])|`; infinite for non-square input.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// `(m + m†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_real(0.5)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CMatrix) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut m = Self::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        m[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        m
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &CMatrix) -> C64 {
        let mut acc = c(0.0, 0.0);
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut m = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    m[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        m
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Display for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "[{}]", row.join("  "))?;
        }
        Ok(())
    }
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.rows()).map(|i| self.vectors[(i, k)]).collect()
    }

    /// `V diag(f(λ)) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut m = CMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vi = self.vectors[(i, k)] * w;
                for j in 0..n {
                    m[(i, j)] += vi * self.vectors[(j, k)].conj();
                }
            }
        }
        m
    }
}

/// Eigenvalues (descending) and orthonormal eigenvectors of a Hermitian matrix.
///
/// Rejects input whose Hermitian deviation exceeds `1e-10`; the Hermitian
/// part is what gets diagonalized.
pub fn hermitian_eigen(m: &CMatrix) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let dev = m.hermitian_deviation();
    if dev > 1e-10 * m.frobenius_norm().max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    let n = m.rows();
    let mut a = m.hermitian_part();
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius_norm();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * 1e-2 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    // stable: equal eigenvalues keep their original column order
    order.sort_by(|&x, &y| diag[y].partial_cmp(&diag[x]).unwrap_or(std::cmp::Ordering::Equal));

    let mut vectors = CMatrix::zeros(n, n);
    for (new_k, &old_k) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, new_k)] = v[(i, old_k)];
        }
    }
    Ok(HermitianEigen {
        values: order.iter().map(|&k| diag[k]).collect(),
        vectors,
    })
}

/// One two-sided Jacobi rotation zeroing `a[p][q]`.
fn jacobi_rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let phase = apq / r;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = 0.5 * (2.0 * r).atan2(app - aqq);
    let (s, cth) = theta.sin_cos();

    // G = diag(1, conj(phase)) on (p, q), followed by a real rotation with
    // columns (c, s) and (-s, c).
    let gpp = c(cth, 0.0);
    let gpq = c(-s, 0.0);
    let gqp = phase.conj() * s;
    let gqq = phase.conj() * cth;

    let n = a.rows();
    // A <- A G
    for i in 0..n {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = aip * gpp + aiq * gqp;
        a[(i, q)] = aip * gpq + aiq * gqq;
    }
    // A <- G† A
    for j in 0..n {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a[(p, j)] = gpp.conj() * apj + gqp.conj() * aqj;
        a[(q, j)] = gpq.conj() * apj + gqq.conj() * aqj;
    }
    a[(p, q)] = c(0.0, 0.0);
    a[(q, p)] = c(0.0, 0.0);
    a[(p, p)] = c(a[(p, p)].re, 0.0);
    a[(q, q)] = c(a[(q, q)].re, 0.0);
    // V <- V G
    for i in 0..n {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * gpp + viq * gqp;
        v[(i, q)] = vip * gpq + viq * gqq;
    }
}

/// Square root of a positive semidefinite Hermitian matrix; negative
/// eigenvalues are treated as zero.
pub fn sqrt_psd(m: &CMatrix) -> Result<CMatrix> {
    Ok(hermitian_eigen(m)?.reconstruct_with(|l| l.max(0.0).sqrt()))
}

/// A random unitary, `exp(iH)` for a Gaussian Hermitian `H`.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let mut h = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            h[(i, j)] = c(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
    }
    let h = h.hermitian_part();
    let eig = hermitian_eigen(&h).expect("hermitian by construction");
    let n = dim;
    let mut u = CMatrix::zeros(n, n);
    for (k, &lam) in eig.values.iter().enumerate() {
        let ph = C64::from_polar(1.0, 3.0 * lam);
        for i in 0..n {
            for j in 0..n {
                u[(i, j)] += eig.vectors[(i, k)] * ph * eig.vectors[(j, k)].conj();
            }
        }
    }
    u
}

/// Hermitian, positive semidefinite, unit-trace polarization state of one
/// (dim 2) or two (dim 4) photons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityMatrixRecord", into = "DensityMatrixRecord")]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    /// Validates `m` as a density matrix.
    ///
    /// Eigenvalues in `[-PSD_TOL, 0)` are clamped to zero and the result is
    /// renormalized to unit trace.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() || !matches!(m.rows(), 2 | 4) {
            return Err(Error::Dimension(format!(
                "density matrix must be 2x2 or 4x4, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if m.entries().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let dev = m.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = m.trace();
        if (tr - c(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {} != 1", tr.re)));
        }
        let m = m.hermitian_part();
        let eig = hermitian_eigen(&m)?;
        let min = *eig.values.last().expect("nonempty");
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        if min < 0.0 {
            let clamped = eig.reconstruct_with(|l| l.max(0.0));
            let tr = clamped.trace().re;
            return Ok(DensityMatrix {
                m: clamped.scale_real(1.0 / tr).hermitian_part(),
            });
        }
        Ok(DensityMatrix { m })
    }

    /// Normalizes `m` by its trace and forces PSD by clamping all negative
    /// eigenvalues. Meant for estimator output that may be unphysical.
    pub fn project_psd(m: &CMatrix) -> Result<Self> {
        let h = m.hermitian_part();
        let eig = hermitian_eigen(&h)?;
        let clamped = eig.reconstruct_with(|l| l.max(0.0));
        let tr = clamped.trace().re;
        if tr <= 0.0 {
            return Err(Error::InvalidState("no positive eigenvalue to project onto".into()));
        }
        Self::new(clamped.scale_real(1.0 / tr).hermitian_part())
    }

    /// `|ψ><ψ|` for a (not necessarily normalized) state vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::input("state vector has zero norm"));
        }
        Self::new(CMatrix::outer(psi).scale_real(1.0 / norm))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::new(CMatrix::identity(dim).scale_real(1.0 / dim as f64))
    }

    /// Convex combination; weights must be non-negative and sum to one.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::input("empty mixture"))?
            .1;
        let mut acc = CMatrix::zeros(first.dim(), first.dim());
        for (w, rho) in parts {
            if *w < 0.0 {
                return Err(Error::input("negative mixture weight"));
            }
            if rho.dim() != first.dim() {
                return Err(Error::Dimension("mixture of different dimensions".into()));
            }
            acc = &acc + &rho.m.scale_real(*w);
        }
        Self::new(acc)
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn eigen(&self) -> HermitianEigen {
        hermitian_eigen(&self.m).expect("density matrices are Hermitian")
    }

    /// Conjugation `U ρ U†`.
    pub fn transform(&self, u: &CMatrix) -> Result<Self> {
        if u.rows() != self.dim() || u.cols() != self.dim() {
            return Err(Error::Dimension("unitary does not match state dimension".into()));
        }
        Self::new((&(u * &self.m) * &u.adjoint()).hermitian_part())
    }

    /// Exchanges the two photons of a dim-4 state.
    pub fn swap_subsystems(&self) -> Result<Self> {
        if self.dim() != 4 {
            return Err(Error::Dimension("swap needs a two-photon state".into()));
        }
        let perm = [0usize, 2, 1, 3];
        let mut m = CMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                m[(perm[i], perm[j])] = self.m[(i, j)];
            }
        }
        Self::new(m)
    }
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixRecord {
    dim: usize,
    entries: Vec<[f64; 2]>,
}

impl From<DensityMatrix> for DensityMatrixRecord {
    fn from(rho: DensityMatrix) -> Self {
        DensityMatrixRecord {
            dim: rho.dim(),
            entries: rho.m.entries().iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl TryFrom<DensityMatrixRecord> for DensityMatrix {
    type Error = Error;
    fn try_from(r: DensityMatrixRecord) -> Result<Self> {
        let data = r.entries.iter().map(|&[re, im]| c(re, im)).collect();
        DensityMatrix::new(CMatrix::from_vec(r.dim, r.dim, data)?)
    }
}

/// Kronecker product of two density matrices; the result must stay within 4x4.
pub fn tensor_product(a: &DensityMatrix, b: &DensityMatrix) -> Result<DensityMatrix> {
    if a.dim() * b.dim() > MAX_DENSITY_DIM {
        return Err(Error::Dimension(format!(
            "tensor product of dims {} and {} exceeds {MAX_DENSITY_DIM}",
            a.dim(),
            b.dim()
        )));
    }
    DensityMatrix::new(a.m.kron(&b.m))
}

/// Reduced state of the photon in arm `keep` of a two-photon state.
pub fn partial_trace(rho: &DensityMatrix, keep: Arm) -> Result<DensityMatrix> {
    if rho.dim() != 4 {
        return Err(Error::Dimension(format!(
            "partial trace needs a 4x4 state, got {}x{}",
            rho.dim(),
            rho.dim()
        )));
    }
    let m = &rho.m;
    let mut out = CMatrix::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            out[(i, j)] = match keep {
                // index = 2 * arm1 + arm2
                Arm::One => m[(2 * i, 2 * j)] + m[(2 * i + 1, 2 * j + 1)],
                Arm::Two => m[(i, j)] + m[(2 + i, 2 + j)],
            };
        }
    }
    DensityMatrix::new(out.hermitian_part())
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(ρ) σ sqrt(ρ)))²`, clamped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension(format!(
            "fidelity between dims {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let s = sqrt_psd(&rho.m)?;
    let inner = (&(&s * &sigma.m) * &s).hermitian_part();
    let root_trace: f64 = hermitian_eigen(&inner)?
        .values
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}
