use super::*;
use approx::assert_relative_eq;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn table1_params() -> WishartParams {
    let s12 = 0.5 * (0.06f64 * 0.04).sqrt();
    let sigma = SymMat::from_rows(&[vec![0.06, s12], vec![s12, 0.04]]).unwrap();
    let m = GenMat::diag(&[-0.01, -0.02]);
    let x0 = lyapunov_solve(&m, &sigma.square().scale(4.0)).unwrap();
    WishartParams { mode: OmegaMode::Bru { beta: 4.0 }, m, sigma, x0 }
}

fn model() -> WishartModel {
    WishartModel::new(table1_params()).unwrap()
}

fn e11() -> SymMat {
    SymMat::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap()
}

fn eye2() -> SymMat {
    SymMat::identity(2)
}

fn csym(s: &SymMat) -> CSymMat {
    s.to_complex()
}

fn csym_scale(s: &SymMat, z: Complex64) -> CSymMat {
    s.to_complex().mul_scalar(z)
}

#[test]
fn mgf_at_zero_argument_is_one() {
    let m = model();
    let v = m.mgf(1.0, &CSymMat::zeros(2)).unwrap();
    assert_relative_eq!(v.value.re, 1.0, epsilon = 1e-14);
    assert_relative_eq!(v.value.im, 0.0, epsilon = 1e-14);
}

#[test]
fn mgf_slope_at_zero_is_the_mean() {
    let m = model();
    let eps = 1e-7;
    let up = m.mgf(1.0, &csym_scale(&eye2(), c(eps, 0.0))).unwrap().value.re;
    let dn = m.mgf(1.0, &csym_scale(&eye2(), c(-eps, 0.0))).unwrap().value.re;
    let fd = (up - dn) / (2.0 * eps);
    let mean = m.mean(1.0).unwrap();
    let analytic = mean.get(0, 0) + mean.get(1, 1);
    assert_relative_eq!(fd, analytic, max_relative = 1e-6);
    // drift-free part plus the compensator integral
    let prop = m.propagator(1.0).unwrap();
    let drift_free = prop.e_tm.matmul(m.params().x0.as_mat()).matmul(&prop.e_tm.transpose());
    let expect = drift_free.trace() + 4.0 * (prop.varsigma.get(0, 0) + prop.varsigma.get(1, 1));
    assert_relative_eq!(analytic, expect, max_relative = 1e-12);
}

#[test]
fn scalar_case_matches_independent_cir_formula() {
    // n = 1: closed scalar form written out without any matrix code
    let beta = 3.0;
    let mm = -0.4;
    let sig = 0.3;
    let x0 = 0.9;
    let params = WishartParams {
        mode: OmegaMode::Bru { beta },
        m: GenMat::diag(&[mm]),
        sigma: SymMat::diag(&[sig]),
        x0: SymMat::diag(&[x0]),
    };
    let model = WishartModel::new(params).unwrap();
    let t = 1.7;
    for theta in [-0.5, -0.1, 0.2] {
        let vs = sig * sig * ((2.0 * mm * t).exp() - 1.0) / (2.0 * mm);
        let a = theta * (2.0 * mm * t).exp() / (1.0 - 2.0 * theta * vs);
        let scalar = (a * x0).exp() * (1.0 - 2.0 * vs * theta).powf(-beta / 2.0);
        let v = model.mgf(t, &csym_scale(&SymMat::diag(&[1.0]), c(theta, 0.0))).unwrap();
        assert_relative_eq!(v.value.re, scalar, max_relative = 1e-12);
    }
}

#[test]
fn mgf_value_internal_consistency() {
    let m = model();
    let theta = csym_scale(&eye2(), c(0.3, -0.8));
    let v = m.mgf(1.0, &theta).unwrap();
    let recomposed = (v.a.matmul(&m.params().x0.as_mat().to_complex()).trace() + v.b).exp();
    assert!((v.value - recomposed).norm() < 1e-12 * v.value.norm());
    assert!(v.domain_margin > 0.0);
}

#[test]
fn jet_order_zero_is_the_mgf() {
    let m = model();
    let theta0 = csym_scale(&eye2(), c(2.0, -3.0));
    let jet = m.mgf_jet(1.0, &theta0, &e11(), 3).unwrap();
    let direct = m.mgf(1.0, &theta0).unwrap().value;
    assert!((jet.coeff(&[0]) - direct).norm() < 1e-12 * direct.norm());
}

#[test]
fn jet_first_order_matches_closed_form() {
    // a_nu = e^{tm^T}(I-2th0 vs)^{-1} 2 th1 vs (I-2 th0 vs)^{-1} th0 e^{tm}
    //      + e^{tm^T}(I-2 th0 vs)^{-1} th1 e^{tm},  b_nu = beta tr[(I-2 vs th0)^{-1} vs th1]
    let m = model();
    let t = 1.0;
    let prop = m.propagator(t).unwrap();
    let theta0 = csym_scale(&eye2(), c(1.5, -2.0));
    let theta1 = e11();

    let vs = prop.varsigma.as_mat().to_complex();
    let etm = prop.e_tm.to_complex();
    let etmt = prop.e_tm.transpose().to_complex();
    let th0 = theta0.as_mat().clone();
    let th1 = theta1.as_mat().to_complex();
    let eye = CMat::identity(2);
    let m1 = eye.sub(&th0.matmul(&vs).mul_scalar(c(2.0, 0.0)));
    let m1_inv = Lu::factor(&m1).unwrap().inverse().unwrap();
    let m2 = eye.sub(&vs.matmul(&th0).mul_scalar(c(2.0, 0.0)));
    let m2_inv = Lu::factor(&m2).unwrap().inverse().unwrap();
    let a_nu = etmt
        .matmul(&m1_inv)
        .matmul(&th1.mul_scalar(c(2.0, 0.0)))
        .matmul(&vs)
        .matmul(&m1_inv)
        .matmul(&th0)
        .matmul(&etm)
        .add(&etmt.matmul(&m1_inv).matmul(&th1).matmul(&etm));
    let b_nu = m2_inv.matmul(&vs).matmul(&th1).trace() * c(4.0, 0.0);
    let phi = m.mgf(t, &theta0).unwrap().value;
    let closed = (a_nu.matmul(&m.params().x0.as_mat().to_complex()).trace() + b_nu) * phi;

    let jet = m.mgf_jet(t, &theta0, &theta1, 1).unwrap();
    let d1 = jet.derivative(&[1]);
    assert!((d1 - closed).norm() <= 1e-10 * closed.norm(), "jet {d1} vs closed {closed}");
}

#[test]
fn jet_higher_orders_match_central_differences() {
    let m = model();
    let t = 1.0;
    let theta0 = csym_scale(&eye2(), c(1.0, -1.5));
    let theta1 = e11();
    let jet = m.mgf_jet(t, &theta0, &theta1, 3).unwrap();
    let h = 1e-3;
    let f = |nu: f64| m.mgf(t, &theta0.add(&csym_scale(&theta1, c(nu, 0.0)))).unwrap().value;
    let d2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
    let d3 = (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h * h * h);
    assert!((jet.derivative(&[2]) - d2).norm() <= 1e-5 * d2.norm());
    assert!((jet.derivative(&[3]) - d3).norm() <= 1e-4 * d3.norm());
}

#[test]
fn two_date_mgf_reduces_to_one_date() {
    let m = model();
    let theta = csym_scale(&e11(), c(-0.1, 0.4));
    // later-date argument zero: conditioning date marginal
    let v1 = m.mgf_two_dates(1.0, 1.5, &theta, &CSymMat::zeros(2)).unwrap().value;
    let d1 = m.mgf(1.0, &theta).unwrap().value;
    assert!((v1 - d1).norm() <= 1e-12 * d1.norm());
    // earlier-date argument zero: tower property to the later date
    let v2 = m.mgf_two_dates(1.0, 1.5, &CSymMat::zeros(2), &theta).unwrap().value;
    let d2 = m.mgf(1.5, &theta).unwrap().value;
    assert!((v2 - d2).norm() <= 1e-12 * d2.norm());
}

#[test]
fn two_date_jet_order_zero_matches_value() {
    let m = model();
    let theta_bar = csym_scale(&eye2(), c(1.2, -0.9));
    let jet = m.mgf_two_dates_jet(1.0, 1.5, &theta_bar, &[e11(), eye2()], &[1, 1]).unwrap();
    let direct = m.mgf_two_dates(1.0, 1.5, &theta_bar, &CSymMat::zeros(2)).unwrap().value;
    assert!((jet.coeff(&[0, 0]) - direct).norm() <= 1e-12 * direct.norm());
}

#[test]
fn two_date_jet_at_zero_base_is_the_later_date_jet() {
    let m = model();
    let jet2 = m.mgf_two_dates_jet(1.0, 1.5, &CSymMat::zeros(2), &[e11()], &[1]).unwrap();
    let jet1 = m.mgf_jet(1.5, &CSymMat::zeros(2), &e11(), 1).unwrap();
    let a = jet2.derivative(&[1]);
    let b = jet1.derivative(&[1]);
    assert!((a - b).norm() <= 1e-11 * b.norm());
}

#[test]
fn two_date_mixed_coefficient_matches_finite_differences() {
    let m = model();
    let theta_bar = csym_scale(&eye2(), c(1.0, -1.2));
    let (ta, tb) = (e11(), eye2());
    let jet = m.mgf_two_dates_jet(1.0, 1.5, &theta_bar, &[ta.clone(), tb.clone()], &[1, 1]).unwrap();
    let h = 1e-3;
    let f = |n0: f64, n1: f64| {
        let th1 = csym_scale(&ta, c(n0, 0.0)).add(&csym_scale(&tb, c(n1, 0.0)));
        m.mgf_two_dates(1.0, 1.5, &theta_bar, &th1).unwrap().value
    };
    let fd = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
    let d = jet.derivative(&[1, 1]);
    assert!((d - fd).norm() <= 1e-5 * fd.norm(), "jet {d} vs fd {fd}");
}

#[test]
fn base_zero_jet_scalar_terms_closed_form() {
    // around theta = 0 the exponent derivatives have fully explicit forms:
    // d/dnu_a F = tr[e^{dm^T} th_a e^{dm} x0] + beta tr[vs_d th_a]
    // d2/dnu_a dnu_b F = tr[e^{dm^T} 2(th_a vs th_b + th_b vs th_a) e^{dm} x0]
    //                    + 2 beta tr[vs_d th_b vs_d th_a]  (connected part)
    let m = model();
    let d = 0.5;
    let prop = m.propagator(d).unwrap();
    let (ta, tb) = (e11(), eye2());
    let jet = m.mgf_jet(d, &CSymMat::zeros(2), &ta, 0).unwrap();
    assert!((jet.coeff(&[0]) - c(1.0, 0.0)).norm() < 1e-14);

    let jet2 = m
        .mgf_norm_jet(d, &CSymMat::zeros(2), &[ta.clone(), tb.clone()], &[1, 1])
        .unwrap()
        .1;
    let vs = prop.varsigma.as_mat();
    let etm = &prop.e_tm;
    let x0 = m.params().x0.as_mat();
    let d_a = etm.transpose().matmul(ta.as_mat()).matmul(etm).matmul(x0).trace()
        + 4.0 * vs.matmul(ta.as_mat()).trace();
    let d_b = etm.transpose().matmul(tb.as_mat()).matmul(etm).matmul(x0).trace()
        + 4.0 * vs.matmul(tb.as_mat()).trace();
    let cross_mat = ta.as_mat().matmul(vs).matmul(tb.as_mat()).add(&tb.as_mat().matmul(vs).matmul(ta.as_mat()));
    let d_ab_connected = etm.transpose().matmul(&cross_mat.scale(2.0)).matmul(etm).matmul(x0).trace()
        + 2.0 * 4.0 * vs.matmul(tb.as_mat()).matmul(vs).matmul(ta.as_mat()).trace();

    assert_relative_eq!(jet2.derivative(&[1, 0]).re, d_a, max_relative = 1e-11);
    assert_relative_eq!(jet2.derivative(&[0, 1]).re, d_b, max_relative = 1e-11);
    // full mixed derivative = connected part + product of first orders
    let expect = d_ab_connected + d_a * d_b;
    assert_relative_eq!(jet2.derivative(&[1, 1]).re, expect, max_relative = 1e-10);
}

#[test]
fn stationary_mgf_basics() {
    let m = model();
    let vs_inf = m.stationary_varsigma().unwrap();
    // theta = 0 -> 1
    let one = stationary_mgf(4.0, &vs_inf, &CSymMat::zeros(2)).unwrap();
    assert!((one - c(1.0, 0.0)).norm() < 1e-14);
    // long-horizon MGF approaches the stationary law
    let theta = csym_scale(&eye2(), c(-0.2, 0.0));
    let far = m.mgf(2500.0, &theta).unwrap().value;
    let stat = stationary_mgf(4.0, &vs_inf, &theta).unwrap();
    assert_relative_eq!(far.re, stat.re, max_relative = 1e-8);
}

#[test]
fn stationary_diagonal_reduces_to_scalar_gamma() {
    // diagonal varsigma: each diagonal entry is gamma with shape beta/2
    // and scale 2 varsigma_ii
    let vs = SymMat::diag(&[0.21, 0.055]);
    let beta = 4.0;
    for z in [-1.0, -0.3, 0.5] {
        let theta = csym_scale(&e11(), c(z, 0.0));
        let v = stationary_mgf(beta, &vs, &theta).unwrap();
        let scalar = (1.0 - 2.0 * 0.21 * z).powf(-beta / 2.0);
        assert_relative_eq!(v.re, scalar, max_relative = 1e-12);
    }
}

#[test]
fn bru_scalar_exponent_agrees_with_general_omega_quadrature() {
    let p = table1_params();
    let general = WishartParams {
        mode: OmegaMode::General { omega: p.sigma2().scale(4.0) },
        m: p.m.clone(),
        sigma: p.sigma.clone(),
        x0: p.x0.clone(),
    };
    let m_bru = WishartModel::new(p).unwrap();
    let m_gen = WishartModel::new(general).unwrap();
    for z in [c(-0.5, 0.0), c(0.8, -1.3), c(2.0, 5.0)] {
        let theta = csym_scale(&eye2(), z);
        let b1 = m_bru.mgf(1.0, &theta).unwrap().b;
        let b2 = m_gen.mgf(1.0, &theta).unwrap().b;
        assert!((b1 - b2).norm() < 1e-9, "z = {z}: {b1} vs {b2}");
    }
}

#[test]
fn covariation_rates_reference_values() {
    let p = table1_params();
    let s12 = 0.5 * (0.06f64 * 0.04).sqrt();
    let rates = quadratic_covariations(&p, &p.x0).unwrap();
    assert_relative_eq!(rates.d_x11_x11, 4.0 * 0.84 * (0.06f64.powi(2) + s12 * s12), max_relative = 1e-12);
    // zero off-diagonal kills the cross rate
    let diag = WishartParams {
        mode: OmegaMode::Bru { beta: 4.0 },
        m: p.m.clone(),
        sigma: SymMat::diag(&[0.06, 0.04]),
        x0: SymMat::diag(&[0.72, 0.16]),
    };
    let r0 = quadratic_covariations(&diag, &diag.x0).unwrap();
    assert_eq!(r0.d_x11_x22, 0.0);
}

#[test]
fn zero_dependence_equivalent_construction() {
    let p = table1_params();
    let s12 = 0.5 * (0.06f64 * 0.04).sqrt();
    let tilde = zero_dependence_equivalent(&p).unwrap();
    assert_relative_eq!(tilde.sigma.get(0, 0), (0.06f64.powi(2) + s12 * s12).sqrt(), max_relative = 1e-14);
    assert_relative_eq!(tilde.sigma.get(1, 1), (0.04f64.powi(2) + s12 * s12).sqrt(), max_relative = 1e-14);
    assert_eq!(tilde.sigma.get(0, 1), 0.0);
    // x0 recomputed from the Lyapunov equation; diagonal preserved
    assert_relative_eq!(tilde.x0.get(0, 0), 0.84, epsilon = 1e-12);
    assert_relative_eq!(tilde.x0.get(1, 1), 0.22, epsilon = 1e-12);
    assert!(tilde.x0.get(0, 1).abs() < 1e-14);
    // no instantaneous cross covariation anywhere in the state space
    let rates = quadratic_covariations(&tilde, &tilde.x0).unwrap();
    assert_eq!(rates.d_x11_x22, 0.0);
    // per-loss normalized quadratic variation preserved
    let orig = quadratic_covariations(&p, &p.x0).unwrap();
    assert_relative_eq!(rates.d_x11_x11 / tilde.x0.get(0, 0), orig.d_x11_x11 / p.x0.get(0, 0), max_relative = 1e-12);
    // already-diagonal sigma is a fixed point
    let diag = WishartParams {
        mode: OmegaMode::Bru { beta: 4.0 },
        m: p.m.clone(),
        sigma: SymMat::diag(&[0.06, 0.04]),
        x0: lyapunov_solve(&p.m, &SymMat::diag(&[0.06, 0.04]).square().scale(4.0)).unwrap(),
    };
    let same = zero_dependence_equivalent(&diag).unwrap();
    assert_eq!(same.sigma, diag.sigma);
}

#[test]
fn mgf_along_negative_real_ray_is_decreasing() {
    let m = model();
    let mut prev = 1.0 + 1e-12;
    for k in 0..20 {
        let z = -0.1 * k as f64;
        let v = m.mgf(1.0, &csym_scale(&eye2(), c(z, 0.0))).unwrap().value;
        assert!(v.im.abs() < 1e-13);
        assert!(v.re > 0.0);
        assert!(v.re <= prev + 1e-12, "not decreasing at z = {z}");
        prev = v.re;
    }
}

#[test]
fn domain_margin_shrinks_toward_boundary() {
    let m = model();
    // positive-direction domain bound for the x11 payoff at t = 1
    let prop = m.propagator(1.0).unwrap();
    let l = prop.chol_varsigma.clone().unwrap();
    let b = SymMat::symmetrize(&l.transpose().matmul(e11().as_mat()).matmul(&l));
    let lam_max = b.eigenvalues().into_iter().fold(f64::NEG_INFINITY, f64::max);
    let bound = 1.0 / (2.0 * lam_max);
    let mut prev = f64::INFINITY;
    for frac in [0.1, 0.3, 0.5, 0.7, 0.9, 0.97] {
        let margin = m.mgf(1.0, &csym_scale(&e11(), c(frac * bound, 0.0))).unwrap().domain_margin;
        assert!(margin < prev, "margin not decreasing at {frac}");
        assert!(margin > 0.0);
        prev = margin;
    }
}

#[test]
fn validation_rejects_bad_parameters() {
    let p = table1_params();
    // beta below n + 1
    let bad_beta = WishartParams { mode: OmegaMode::Bru { beta: 2.5 }, ..p.clone() };
    let err = WishartModel::new(bad_beta).unwrap_err();
    assert!(err.to_string().contains("beta >= n + 1"), "{err}");
    // unstable drift
    let bad_m = WishartParams { m: GenMat::diag(&[0.01, -0.02]), ..p.clone() };
    assert!(WishartModel::new(bad_m).is_err());
    // non-positive-definite sigma
    let bad_sigma = WishartParams {
        sigma: SymMat::from_rows(&[vec![0.06, 0.2], vec![0.2, 0.04]]).unwrap(),
        ..p.clone()
    };
    assert!(WishartModel::new(bad_sigma).is_err());
    // general omega must dominate (n+1) sigma^2
    let thin = WishartParams {
        mode: OmegaMode::General { omega: p.sigma2().scale(2.9) },
        ..p.clone()
    };
    let err = WishartModel::new(thin).unwrap_err();
    assert!(err.to_string().contains("positive definite"), "{err}");
}

#[test]
fn domain_error_reports_nesting_stage() {
    let m = model();
    let prop = m.propagator(0.5).unwrap();
    let l = prop.chol_varsigma.clone().unwrap();
    let b = SymMat::symmetrize(&l.transpose().matmul(eye2().as_mat()).matmul(&l));
    let lam_max = b.eigenvalues().into_iter().fold(f64::NEG_INFINITY, f64::max);
    // exactly at the boundary (I - 2 theta varsigma) is singular
    let beyond = 1.0 / (2.0 * lam_max);
    let theta = csym_scale(&eye2(), c(beyond, 0.0));
    match m.mgf_two_dates(1.0, 1.5, &CSymMat::zeros(2), &theta) {
        Err(WishartError::Domain { stage: DomainStage::TwoDateInner, .. }) => {}
        other => panic!("expected inner-stage domain error, got {other:?}"),
    }
}


/// Central differences of the log-MGF (Richardson-extrapolated), mapped
/// back to plain derivatives through the exponential composition rule.
/// Differencing an O(1)-scaled analytic function is what makes order-4
/// accuracy ~1e-6 reachable in f64; the raw MGF hits the noise floor.
fn fd_derivs_via_log<F: Fn(f64) -> Complex64>(f: &F, h: f64) -> [Complex64; 4] {
    let f0 = f(0.0);
    let l = |nu: f64| (f(nu) / f0).ln();
    let (l1p, l1m) = (l(h), l(-h));
    let (l2p, l2m) = (l(2.0 * h), l(-2.0 * h));
    let (l4p, l4m) = (l(4.0 * h), l(-4.0 * h));
    // O(h^4) five-point stencils (l(0) = 0 drops out)
    let d1 = (8.0 * (l1p - l1m) - (l2p - l2m)) / (12.0 * h);
    let d2 = (16.0 * (l1p + l1m) - (l2p + l2m)) / (12.0 * h * h);
    // Richardson-extrapolated third and fourth differences
    let s3 = |m2: Complex64, m1: Complex64, p1: Complex64, p2: Complex64, hh: f64| {
        (p2 - p1.scale(2.0) + m1.scale(2.0) - m2) / (2.0 * hh * hh * hh)
    };
    let d3 = (s3(l2m, l1m, l1p, l2p, h).scale(4.0) - s3(l4m, l2m, l2p, l4p, 2.0 * h)) / 3.0;
    let s4 = |m2: Complex64, m1: Complex64, p1: Complex64, p2: Complex64, hh: f64| {
        (m2 - m1.scale(4.0) - p1.scale(4.0) + p2) / (hh * hh * hh * hh)
    };
    let d4 = (s4(l2m, l1m, l1p, l2p, h).scale(16.0) - s4(l4m, l2m, l2p, l4p, 2.0 * h)) / 15.0;
    // derivatives of exp(L): exponential Faa di Bruno up to order four
    let f1 = d1;
    let f2 = d2 + d1 * d1;
    let f3 = d3 + 3.0 * d2 * d1 + d1 * d1 * d1;
    let f4 = d4 + 4.0 * d3 * d1 + 3.0 * d2 * d2 + 6.0 * d2 * d1 * d1 + d1 * d1 * d1 * d1;
    [f0 * f1, f0 * f2, f0 * f3, f0 * f4]
}

#[test]
fn jet_chain_rule_randomized_sweep() {
    // orders 1..4 against log-domain central differences, 20 random
    // (theta0, direction) pairs inside the domain
    let m = model();
    let t = 1.0;
    let mut rng = StdRng::seed_from_u64(42);
    for it in 0..20usize {
        let z = c(rng.random_range(-2.0..2.0), rng.random_range(-3.0..3.0));
        let w11 = rng.random_range(0.1..1.0);
        let w22 = rng.random_range(0.1..1.0);
        let w12 = rng.random_range(-0.3..0.3);
        let dir = SymMat::from_rows(&[vec![w11, w12], vec![w12, w22]]).unwrap();
        let theta0 = csym_scale(&eye2(), z);
        let jet = m.mgf_jet(t, &theta0, &dir, 4).unwrap();
        let f = |nu: f64| m.mgf(t, &theta0.add(&csym_scale(&dir, c(nu, 0.0)))).unwrap().value;
        let d = fd_derivs_via_log(&f, 0.02);
        for (k, dk) in d.iter().enumerate() {
            let jd = jet.derivative(&[k + 1]);
            let rel = (jd - dk).norm() / dk.norm().max(1e-3);
            assert!(rel <= 1e-5, "iteration {it}, order {}: relative error {rel:.2e}", k + 1);
        }
    }
}
