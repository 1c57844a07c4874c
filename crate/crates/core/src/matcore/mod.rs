//! Dense matrix primitives shared by the rest of the crate: real and
//! complex square matrices, symmetric wrappers, LU factorization,
//! matrix exponential, Kronecker/vec algebra and Lyapunov solves.
//!
//! Everything here targets the small dimensions of the loss models
//! (n = 2 in all shipped experiments); no attempt is made to be fast
//! for large n.

mod eig;
mod expm;
mod lu;

pub use eig::{jacobi_eigen, jacobi_eigenvalues, min_singular_value};
pub use expm::expm;
pub use lu::Lu;

use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatError {
    #[error("matrix dimensions do not match: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("matrix is numerically singular (pivot {pivot:.3e} below {threshold:.3e})")]
    Singular { pivot: f64, threshold: f64 },
    #[error("matrix is not symmetric:|a[{i}][{j}] - a[{j}][{i}]| = {diff:.3e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("matrix is not positive definite (pivot {0:.3e})")]
    NotPositiveDefinite(f64),
    #[error("drift matrix must have eigenvalues with strictly negative real part")]
    UnstableDrift,
    #[error("Lyapunov residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    LyapunovResidual { residual: f64, tol: f64 },
}

/// Scalar field the dense kernels are generic over (`f64` and `Complex64`).
pub trait Scalar:
    Copy
    + PartialEq
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn modulus(self) -> f64;
    fn from_f64(x: f64) -> Self;
    fn scale(self, x: f64) -> Self;
    fn is_finite_scalar(self) -> bool;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
    fn is_finite_scalar(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    const ONE: Self = Complex64::new(1.0, 0.0);
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
    fn is_finite_scalar(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Dense square matrix, row major.
#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    n: usize,
    data: Vec<T>,
}

/// Real general matrix (drift matrices, propagators).
pub type GenMat = Mat<f64>;
/// Complex general matrix (MGF exponents along damped contours).
pub type CMat = Mat<Complex64>;

impl<T: Scalar> Mat<T> {
    pub fn zeros(n: usize) -> Self {
        Mat { n, data: vec![T::ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, MatError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(MatError::DimensionMismatch(row.len(), n));
            }
            data.extend_from_slice(row);
        }
        Ok(Mat { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite_scalar())
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "matmul dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == T::ZERO {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Mat { n: self.n, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Mat { n: self.n, data }
    }

    pub fn scale(&self, x: f64) -> Self {
        let data = self.data.iter().map(|&a| a.scale(x)).collect();
        Mat { n: self.n, data }
    }

    pub fn mul_scalar(&self, x: T) -> Self {
        let data = self.data.iter().map(|&a| a * x).collect();
        Mat { n: self.n, data }
    }

    pub fn neg(&self) -> Self {
        let data = self.data.iter().map(|&a| -a).collect();
        Mat { n: self.n, data }
    }

    pub fn trace(&self) -> T {
        let mut t = T::ZERO;
        for i in 0..self.n {
            t = t + self[(i, i)];
        }
        t
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|x| x.modulus().powi(2)).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.modulus()).fold(0.0, f64::max)
    }

    /// Column-stacking vectorization.
    pub fn vec(&self) -> Vec<T> {
        let n = self.n;
        let mut v = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                v.push(self[(i, j)]);
            }
        }
        v
    }

    pub fn from_vec_stacked(n: usize, v: &[T]) -> Self {
        assert_eq!(v.len(), n * n);
        let mut m = Self::zeros(n);
        for j in 0..n {
            for i in 0..n {
                m[(i, j)] = v[j * n + i];
            }
        }
        m
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (na, nb) = (self.n, other.n);
        let n = na * nb;
        let mut out = Self::zeros(n);
        for ia in 0..na {
            for ja in 0..na {
                let a = self[(ia, ja)];
                for ib in 0..nb {
                    for jb in 0..nb {
                        out[(ia * nb + ib, ja * nb + jb)] = a * other[(ib, jb)];
                    }
                }
            }
        }
        out
    }
}

impl GenMat {
    pub fn to_complex(&self) -> CMat {
        let data = self.data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Mat { n: self.n, data }
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &x) in entries.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }
}

impl CMat {
    pub fn real_part(&self) -> GenMat {
        let data = self.data.iter().map(|x| x.re).collect();
        Mat { n: self.n, data }
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

impl<T: Scalar> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat({}x{}) [", self.n, self.n)?;
        for i in 0..self.n {
            write!(f, "  ")?;
            for j in 0..self.n {
                write!(f, "{:?} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Real symmetric matrix; symmetry holds exactly by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMat {
    mat: GenMat,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        SymMat { mat: GenMat::zeros(n) }
    }

    pub fn identity(n: usize) -> Self {
        SymMat { mat: GenMat::identity(n) }
    }

    pub fn diag(entries: &[f64]) -> Self {
        SymMat { mat: GenMat::diag(entries) }
    }

    /// Builds from full rows, rejecting any exact asymmetry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatError> {
        let mat = GenMat::from_rows(rows)?;
        for i in 0..mat.dim() {
            for j in (i + 1)..mat.dim() {
                if mat[(i, j)] != mat[(j, i)] {
                    return Err(MatError::NotSymmetric {
                        i,
                        j,
                        diff: (mat[(i, j)] - mat[(j, i)]).abs(),
                    });
                }
            }
        }
        Ok(SymMat { mat })
    }

    /// `(X + X^T)/2`; used to restore exact symmetry after numeric solves.
    pub fn symmetrize(mat: &GenMat) -> Self {
        let n = mat.dim();
        let mut out = GenMat::zeros(n);
        for i in 0..n {
            out[(i, i)] = mat[(i, i)];
            for j in (i + 1)..n {
                let v = 0.5 * (mat[(i, j)] + mat[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        SymMat { mat: out }
    }

    /// Sets the (i, j) and (j, i) entries at once.
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.mat[(i, j)] = v;
        self.mat[(j, i)] = v;
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn as_mat(&self) -> &GenMat {
        &self.mat
    }

    pub fn to_complex(&self) -> CSymMat {
        CSymMat { mat: self.mat.to_complex() }
    }

    pub fn add(&self, other: &Self) -> Self {
        SymMat { mat: self.mat.add(&other.mat) }
    }

    pub fn sub(&self, other: &Self) -> Self {
        SymMat { mat: self.mat.sub(&other.mat) }
    }

    pub fn scale(&self, x: f64) -> Self {
        SymMat { mat: self.mat.scale(x) }
    }

    /// `A A` (square of a symmetric matrix is symmetric).
    pub fn square(&self) -> Self {
        SymMat { mat: self.mat.matmul(&self.mat) }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        jacobi_eigenvalues(self.as_mat())
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }

    /// Lower-triangular Cholesky factor `L` with `L L^T = A`.
    pub fn cholesky(&self) -> Result<GenMat, MatError> {
        let n = self.dim();
        let mut l = GenMat::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.mat[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(MatError::NotPositiveDefinite(s));
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Ok(l)
    }

    /// Symmetric square root via the spectral decomposition, clamping
    /// negative eigenvalues at zero (full truncation for Euler steps).
    pub fn sqrt_clamped(&self) -> SymMat {
        let (vals, vecs) = jacobi_eigen(self.as_mat());
        let n = self.dim();
        let mut out = GenMat::zeros(n);
        for k in 0..n {
            let s = vals[k].max(0.0).sqrt();
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += s * vecs[(i, k)] * vecs[(j, k)];
                }
            }
        }
        SymMat::symmetrize(&out)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }
}

/// Complex symmetric (not Hermitian) matrix; carries the damped contour
/// arguments fed to MGFs.
#[derive(Clone, Debug, PartialEq)]
pub struct CSymMat {
    mat: CMat,
}

impl CSymMat {
    pub fn zeros(n: usize) -> Self {
        CSymMat { mat: CMat::zeros(n) }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, MatError> {
        let mat = CMat::from_rows(rows)?;
        for i in 0..mat.dim() {
            for j in (i + 1)..mat.dim() {
                if mat[(i, j)] != mat[(j, i)] {
                    return Err(MatError::NotSymmetric {
                        i,
                        j,
                        diff: (mat[(i, j)] - mat[(j, i)]).norm(),
                    });
                }
            }
        }
        Ok(CSymMat { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn as_mat(&self) -> &CMat {
        &self.mat
    }

    pub fn add(&self, other: &Self) -> Self {
        CSymMat { mat: self.mat.add(&other.mat) }
    }

    pub fn mul_scalar(&self, z: Complex64) -> Self {
        CSymMat { mat: self.mat.mul_scalar(z) }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.mat[(i, j)]
    }
}

/// vec(varsigma_t) = A^{-1} (e^{tA} - I) vec(sigma^2) with
/// A = I (x) m + m (x) I; the covariance integral of the drift propagator.
///
/// Requires a stable drift (all eigenvalues with negative real part).
pub fn varsigma(t: f64, m: &GenMat, sigma2: &SymMat) -> Result<SymMat, MatError> {
    if !(t >= 0.0) || !m.is_finite() {
        return Err(MatError::NonFinite);
    }
    assert_stable(m)?;
    let n = m.dim();
    if t == 0.0 {
        return Ok(SymMat::zeros(n));
    }
    let eye = GenMat::identity(n);
    let a = eye.kron(m).add(&m.kron(&eye));
    let eta = expm(&a.scale(t))?;
    let rhs_mat = eta.sub(&GenMat::identity(n * n));
    let rhs = mat_vec(&rhs_mat, &sigma2.as_mat().vec());
    let lu = Lu::factor(&a)?;
    let sol = lu.solve_vec(&rhs)?;
    Ok(SymMat::symmetrize(&GenMat::from_vec_stacked(n, &sol)))
}

/// Solves `m X + X m^T = -rhs` for symmetric `rhs`, returning a symmetric X.
pub fn lyapunov_solve(m: &GenMat, rhs: &SymMat) -> Result<SymMat, MatError> {
    assert_stable(m)?;
    lyapunov_solve_unchecked(m, rhs)
}

fn lyapunov_solve_unchecked(m: &GenMat, rhs: &SymMat) -> Result<SymMat, MatError> {
    let n = m.dim();
    let eye = GenMat::identity(n);
    let a = eye.kron(m).add(&m.kron(&eye));
    let lu = Lu::factor(&a)?;
    let b: Vec<f64> = rhs.as_mat().vec().iter().map(|x| -x).collect();
    let sol = lu.solve_vec(&b)?;
    let x = SymMat::symmetrize(&GenMat::from_vec_stacked(n, &sol));
    // residual check: m X + X m^T + rhs
    let res = m
        .matmul(x.as_mat())
        .add(&x.as_mat().matmul(&m.transpose()))
        .add(rhs.as_mat());
    let tol = 1e-12 * rhs.as_mat().norm_fro().max(1.0);
    let r = res.norm_fro();
    if r > tol {
        return Err(MatError::LyapunovResidual { residual: r, tol });
    }
    Ok(x)
}

/// Stability test for the drift: `m` is Hurwitz iff the Lyapunov equation
/// `m X + X m^T = -I` has a symmetric positive definite solution.
pub fn assert_stable(m: &GenMat) -> Result<(), MatError> {
    let n = m.dim();
    let x = lyapunov_solve_stability(m, &SymMat::identity(n)).map_err(|_| MatError::UnstableDrift)?;
    if x.is_positive_definite() {
        Ok(())
    } else {
        Err(MatError::UnstableDrift)
    }
}

fn lyapunov_solve_stability(m: &GenMat, rhs: &SymMat) -> Result<SymMat, MatError> {
    let n = m.dim();
    let eye = GenMat::identity(n);
    let a = eye.kron(m).add(&m.kron(&eye));
    let lu = Lu::factor(&a)?;
    let b: Vec<f64> = rhs.as_mat().vec().iter().map(|x| -x).collect();
    let sol = lu.solve_vec(&b)?;
    Ok(SymMat::symmetrize(&GenMat::from_vec_stacked(n, &sol)))
}

pub fn mat_vec<T: Scalar>(m: &Mat<T>, v: &[T]) -> Vec<T> {
    let n = m.dim();
    assert_eq!(v.len(), n);
    let mut out = vec![T::ZERO; n];
    for i in 0..n {
        let mut s = T::ZERO;
        for j in 0..n {
            s = s + m[(i, j)] * v[j];
        }
        out[i] = s;
    }
    out
}

#[cfg(test)]
mod tests;
