//! LU factorization with partial pivoting over `f64` and `Complex64`.

use super::{Mat, MatError, Scalar};

/// Pivots smaller than `PIVOT_REL_TOL * ||A||_1` are treated as singular.
const PIVOT_REL_TOL: f64 = 1e-14;

pub struct Lu<T> {
    lu: Mat<T>,
    perm: Vec<usize>,
    sign_swaps: usize,
    anorm: f64,
}

impl<T: Scalar> Lu<T> {
    pub fn factor(a: &Mat<T>) -> Result<Self, MatError> {
        if !a.is_finite() {
            return Err(MatError::NonFinite);
        }
        let n = a.dim();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0usize;
        let anorm = a.norm_1();
        let threshold = PIVOT_REL_TOL * anorm.max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_mag = lu[(k, k)].modulus();
            for i in (k + 1)..n {
                let mag = lu[(i, k)].modulus();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = i;
                }
            }
            if pivot_mag < threshold {
                return Err(MatError::Singular { pivot: pivot_mag, threshold });
            }
            if pivot_row != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
                perm.swap(k, pivot_row);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in (k + 1)..n {
                    let v = lu[(i, j)] - factor * lu[(k, j)];
                    lu[(i, j)] = v;
                }
            }
        }
        Ok(Lu { lu, perm, sign_swaps: swaps, anorm })
    }

    pub fn solve_vec(&self, b: &[T]) -> Result<Vec<T>, MatError> {
        let n = self.lu.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] = x[i] - self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] = x[i] - self.lu[(i, j)] * x[j];
            }
            x[i] = x[i] / self.lu[(i, i)];
        }
        Ok(x)
    }

    /// Solves `A X = B` column by column.
    pub fn solve_mat(&self, b: &Mat<T>) -> Result<Mat<T>, MatError> {
        let n = self.lu.dim();
        let mut out = Mat::zeros(n);
        let mut col = vec![T::ZERO; n];
        for j in 0..n {
            for i in 0..n {
                col[i] = b[(i, j)];
            }
            let x = self.solve_vec(&col)?;
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<Mat<T>, MatError> {
        self.solve_mat(&Mat::identity(self.lu.dim()))
    }

    pub fn det(&self) -> T {
        let n = self.lu.dim();
        let mut d = if self.sign_swaps % 2 == 0 { T::ONE } else { -T::ONE };
        for i in 0..n {
            d = d * self.lu[(i, i)];
        }
        d
    }

    /// 1-norm condition estimate `||A||_1 ||A^-1||_1` (exact at these sizes).
    pub fn condition_1norm(&self) -> f64 {
        match self.inverse() {
            Ok(inv) => self.anorm * inv.norm_1(),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Convenience: inverse of `a`.
pub fn inv<T: Scalar>(a: &Mat<T>) -> Result<Mat<T>, MatError> {
    Lu::factor(a)?.inverse()
}

/// Convenience: determinant of `a`.
pub fn det<T: Scalar>(a: &Mat<T>) -> Result<T, MatError> {
    Ok(Lu::factor(a)?.det())
}

/// Convenience: solves `a x = b`.
pub fn solve<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Result<Mat<T>, MatError> {
    Lu::factor(a)?.solve_mat(b)
}
