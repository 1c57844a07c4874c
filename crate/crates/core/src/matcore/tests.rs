use super::*;
use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;

fn table1_m() -> GenMat {
    GenMat::diag(&[-0.01, -0.02])
}

fn table1_sigma() -> SymMat {
    let s12 = 0.5 * (0.06f64 * 0.04).sqrt();
    SymMat::from_rows(&[vec![0.06, s12], vec![s12, 0.04]]).unwrap()
}

/// Plain Taylor sum; independent of the Pade path, valid for ||A|| < 1.
fn expm_taylor(a: &GenMat) -> GenMat {
    let n = a.dim();
    let mut term = GenMat::identity(n);
    let mut sum = GenMat::identity(n);
    for k in 1..60 {
        term = term.matmul(a).scale(1.0 / k as f64);
        sum = sum.add(&term);
    }
    sum
}

#[test]
fn expm_zero_is_identity() {
    let e = expm(&GenMat::zeros(2)).unwrap();
    assert_eq!(e, GenMat::identity(2));
}

#[test]
fn expm_diagonal_case() {
    let e = expm(&GenMat::diag(&[-0.01, -0.02])).unwrap();
    assert_relative_eq!(e[(0, 0)], (-0.01f64).exp(), max_relative = 1e-14);
    assert_relative_eq!(e[(1, 1)], (-0.02f64).exp(), max_relative = 1e-14);
    assert_eq!(e[(0, 1)], 0.0);
}

#[test]
fn expm_matches_taylor_oracle() {
    let a = GenMat::from_rows(&[vec![0.31, -0.22], vec![0.15, 0.44]]).unwrap();
    let e = expm(&a).unwrap();
    let t = expm_taylor(&a);
    assert!(e.sub(&t).max_abs() < 1e-12 * t.max_abs());
}

#[test]
fn expm_large_norm_scaling() {
    // exp(diag(-40, 30)) through the squaring branch
    let a = GenMat::diag(&[-40.0, 30.0]);
    let e = expm(&a).unwrap();
    assert_relative_eq!(e[(0, 0)], (-40.0f64).exp(), max_relative = 1e-12);
    assert_relative_eq!(e[(1, 1)], (30.0f64).exp(), max_relative = 1e-12);
}

#[test]
fn expm_rejects_non_finite() {
    let a = GenMat::from_rows(&[vec![f64::NAN, 0.0], vec![0.0, 0.0]]).unwrap();
    assert!(matches!(expm(&a), Err(MatError::NonFinite)));
}

#[test]
fn varsigma_at_zero_vanishes() {
    let v = varsigma(0.0, &table1_m(), &table1_sigma().square()).unwrap();
    assert_eq!(v.as_mat().max_abs(), 0.0);
}

#[test]
fn varsigma_scalar_closed_form() {
    // n = 1, m = -a: varsigma_t = s (1 - e^{-2at}) / (2a)
    let a = 0.7;
    let s = 1.3;
    let m = GenMat::diag(&[-a]);
    let sigma2 = SymMat::diag(&[s]);
    for t in [0.1, 1.0, 5.0] {
        let v = varsigma(t, &m, &sigma2).unwrap();
        let expect = s * (1.0 - (-2.0 * a * t).exp()) / (2.0 * a);
        assert_relative_eq!(v.get(0, 0), expect, max_relative = 1e-13);
    }
}

#[test]
fn varsigma_matches_quadrature_oracle() {
    // trapezoid quadrature of int_0^1 e^{(1-s)m} sigma^2 e^{(1-s)m^T} ds
    let m = table1_m();
    let sigma2 = table1_sigma().square();
    let nodes = 100_000usize;
    let t = 1.0;
    let h = t / nodes as f64;
    let mut acc = GenMat::zeros(2);
    for k in 0..=nodes {
        let s = k as f64 * h;
        let e = expm(&m.scale(t - s)).unwrap();
        let term = e.matmul(sigma2.as_mat()).matmul(&e.transpose());
        let w = if k == 0 || k == nodes { 0.5 } else { 1.0 };
        acc = acc.add(&term.scale(w * h));
    }
    let v = varsigma(t, &m, &sigma2).unwrap();
    assert!(v.as_mat().sub(&acc).max_abs() < 1e-10);
}

#[test]
fn varsigma_symmetric_positive_definite_on_grid() {
    let m = table1_m();
    let sigma2 = table1_sigma().square();
    for t in [0.01, 0.5, 1.0, 10.0, 50.0, 200.0] {
        let v = varsigma(t, &m, &sigma2).unwrap();
        assert_eq!(v.get(0, 1), v.get(1, 0));
        assert!(v.eigenvalues().into_iter().all(|l| l > 0.0), "t = {t}");
    }
}

#[test]
fn varsigma_rejects_unstable_drift() {
    let m = GenMat::diag(&[0.01, -0.02]);
    assert!(matches!(
        varsigma(1.0, &m, &table1_sigma().square()),
        Err(MatError::UnstableDrift)
    ));
}

#[test]
fn lyapunov_reproduces_reference_initial_state() {
    let m = table1_m();
    let beta_sigma2 = table1_sigma().square().scale(4.0);
    let x0 = lyapunov_solve(&m, &beta_sigma2).unwrap();
    assert_relative_eq!(x0.get(0, 0), 0.84, epsilon = 1e-12);
    assert_relative_eq!(x0.get(1, 1), 0.22, epsilon = 1e-12);
    assert_relative_eq!(x0.get(0, 1), 0.3265986323710904, epsilon = 1e-10);
}

#[test]
fn lyapunov_identity_case() {
    let m = GenMat::identity(2).scale(-0.5);
    let x = lyapunov_solve(&m, &SymMat::identity(2)).unwrap();
    assert!(x.as_mat().sub(&GenMat::identity(2)).max_abs() < 1e-14);
}

#[test]
fn lyapunov_random_residual() {
    let m = GenMat::from_rows(&[vec![-1.2, 0.3], vec![-0.4, -0.8]]).unwrap();
    let rhs = SymMat::from_rows(&[vec![2.0, 0.7], vec![0.7, 1.1]]).unwrap();
    let x = lyapunov_solve(&m, &rhs).unwrap();
    let res = m
        .matmul(x.as_mat())
        .add(&x.as_mat().matmul(&m.transpose()))
        .add(rhs.as_mat());
    assert!(res.max_abs() < 1e-12);
    assert_eq!(x.get(0, 1), x.get(1, 0));
}

#[test]
fn complex_inverse_identity() {
    let eye = CMat::identity(3);
    let inv = Lu::factor(&eye).unwrap().inverse().unwrap();
    assert!(inv.sub(&eye).max_abs() < 1e-15);
}

#[test]
fn complex_det_diagonal() {
    let mut a = CMat::zeros(2);
    a[(0, 0)] = Complex64::new(2.0, 0.0);
    a[(1, 1)] = Complex64::new(3.0, 0.0);
    let d = Lu::factor(&a).unwrap().det();
    assert!((d - Complex64::new(6.0, 0.0)).norm() < 1e-15);
}

#[test]
fn complex_inverse_residual() {
    let a = CMat::from_rows(&[
        vec![Complex64::new(1.0, 0.5), Complex64::new(-0.3, 0.2)],
        vec![Complex64::new(0.4, -1.1), Complex64::new(2.0, 0.3)],
    ])
    .unwrap();
    let lu = Lu::factor(&a).unwrap();
    let inv = lu.inverse().unwrap();
    let res = inv.matmul(&a).sub(&CMat::identity(2));
    assert!(res.max_abs() < 1e-12);
    assert!(lu.condition_1norm() >= 1.0);
}

#[test]
fn singular_matrix_rejected() {
    let a = CMat::from_rows(&[
        vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)],
        vec![Complex64::new(2.0, 0.0), Complex64::new(4.0, 0.0)],
    ])
    .unwrap();
    assert!(matches!(Lu::factor(&a), Err(MatError::Singular { .. })));
}

#[test]
fn jacobi_recovers_spectrum() {
    let a = GenMat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
    let mut vals = jacobi_eigenvalues(&a);
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    assert_relative_eq!(vals[0], 1.0, epsilon = 1e-12);
    assert_relative_eq!(vals[1], 3.0, epsilon = 1e-12);
}

#[test]
fn min_singular_value_of_identity() {
    assert_relative_eq!(min_singular_value(&CMat::identity(2)), 1.0, epsilon = 1e-12);
}

#[test]
fn cholesky_roundtrip() {
    let a = SymMat::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
    let l = a.cholesky().unwrap();
    let back = l.matmul(&l.transpose());
    assert!(back.sub(a.as_mat()).max_abs() < 1e-14);
}

#[test]
fn sqrt_clamped_squares_back() {
    let a = SymMat::from_rows(&[vec![1.3, 0.4], vec![0.4, 0.9]]).unwrap();
    let r = a.sqrt_clamped();
    assert!(r.square().as_mat().sub(a.as_mat()).max_abs() < 1e-12);
}

proptest! {
    #[test]
    fn expm_commuting_pairs_multiply(c0 in -0.5f64..0.5, c1 in -0.5f64..0.5, d0 in -0.5f64..0.5, d1 in -0.5f64..0.5) {
        // polynomials in the same matrix commute
        let base = GenMat::from_rows(&[vec![0.2, -0.7], vec![0.5, -0.1]]).unwrap();
        let a = base.scale(c0).add(&base.matmul(&base).scale(c1));
        let b = base.scale(d0).add(&base.matmul(&base).scale(d1));
        let lhs = expm(&a.add(&b)).unwrap();
        let rhs = expm(&a).unwrap().matmul(&expm(&b).unwrap());
        prop_assert!(lhs.sub(&rhs).max_abs() < 1e-11 * rhs.max_abs().max(1.0));
    }

    #[test]
    fn complex_solve_residual(re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let a = CMat::from_rows(&[
            vec![Complex64::new(2.0 + re.abs(), im), Complex64::new(0.3, -0.1)],
            vec![Complex64::new(-0.2, 0.4), Complex64::new(1.5, -im)],
        ]).unwrap();
        let b = CMat::identity(2).mul_scalar(Complex64::new(1.0, 1.0));
        let x = Lu::factor(&a).unwrap().solve_mat(&b).unwrap();
        let res = a.matmul(&x).sub(&b);
        prop_assert!(res.max_abs() < 1e-11);
    }
}
