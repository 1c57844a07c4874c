//! Cyclic Jacobi eigensolver for real symmetric matrices, plus a smallest
//! singular value helper for complex matrices via the real embedding of
//! the Hermitian Gram matrix.

use super::{CMat, GenMat};
use num_complex::Complex64;

/// Eigenvalues and orthonormal eigenvectors (columns) of a symmetric matrix.
pub fn jacobi_eigen(a: &GenMat) -> (Vec<f64>, GenMat) {
    let n = a.dim();
    let mut m = a.clone();
    let mut v = GenMat::identity(n);
    let tol = 1e-15 * a.norm_fro().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals = (0..n).map(|i| m[(i, i)]).collect();
    (vals, v)
}

pub fn jacobi_eigenvalues(a: &GenMat) -> Vec<f64> {
    jacobi_eigen(a).0
}

/// Smallest singular value of a complex matrix, via the eigenvalues of the
/// real 2n x 2n embedding of `M^H M` (each eigenvalue appears twice).
pub fn min_singular_value(m: &CMat) -> f64 {
    let n = m.dim();
    // h = m^H m (Hermitian)
    let mut h = CMat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..n {
                s += m[(k, i)].conj() * m[(k, j)];
            }
            h[(i, j)] = s;
        }
    }
    let mut emb = GenMat::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            emb[(i, j)] = h[(i, j)].re;
            emb[(i, j + n)] = -h[(i, j)].im;
            emb[(i + n, j)] = h[(i, j)].im;
            emb[(i + n, j + n)] = h[(i, j)].re;
        }
    }
    let vals = jacobi_eigenvalues(&emb);
    let min = vals.into_iter().fold(f64::INFINITY, f64::min);
    min.max(0.0).sqrt()
}
