//! The Wishart loss model: parameter validation, moment generating
//! function at one and two dates, exact MGF derivatives of any order via
//! jet lifting, the stationary matrix-gamma law, instantaneous
//! covariation rates and the zero-dependence counterfactual.

pub mod jet;

use crate::matcore::{
    assert_stable, expm, lyapunov_solve, min_singular_value, varsigma,
    CMat, CSymMat, GenMat, Lu, MatError, SymMat,
};
use jet::{Jet, MatJet};
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};
use thiserror::Error;

const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Condition estimates beyond this are treated as outside the MGF domain.
const DOMAIN_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum WishartError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("MGF argument outside domain at {stage}: (I - 2 theta varsigma) condition {condition:.3e}")]
    Domain { stage: DomainStage, condition: f64 },
    #[error(transparent)]
    Mat(#[from] MatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainStage {
    OneDate,
    TwoDateInner,
    TwoDateOuter,
}

impl std::fmt::Display for DomainStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DomainStage::OneDate => write!(f, "the evaluation date"),
            DomainStage::TwoDateInner => write!(f, "the inner (later-date) nesting level"),
            DomainStage::TwoDateOuter => write!(f, "the outer (earlier-date) nesting level"),
        }
    }
}

/// Drift-compensator specification of the process.
#[derive(Clone, Debug)]
pub enum OmegaMode {
    /// omega = beta sigma^2 with beta >= n + 1; the closed determinant
    /// form applies and every risk-measure path is available.
    Bru { beta: f64 },
    /// Explicit omega with omega - (n+1) sigma^2 positive definite; the
    /// scalar exponent is obtained by numerical integration.
    General { omega: SymMat },
}

#[derive(Clone, Debug)]
pub struct WishartParams {
    pub mode: OmegaMode,
    pub m: GenMat,
    pub sigma: SymMat,
    pub x0: SymMat,
}

impl WishartParams {
    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn sigma2(&self) -> SymMat {
        self.sigma.square()
    }

    /// The drift compensator omega (explicit or beta sigma^2).
    pub fn omega(&self) -> SymMat {
        match &self.mode {
            OmegaMode::Bru { beta } => self.sigma2().scale(*beta),
            OmegaMode::General { omega } => omega.clone(),
        }
    }

    pub fn bru_beta(&self) -> Option<f64> {
        match self.mode {
            OmegaMode::Bru { beta } => Some(beta),
            OmegaMode::General { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<(), WishartError> {
        let n = self.dim();
        if self.sigma.dim() != n || self.x0.dim() != n {
            return Err(WishartError::InvalidParams(format!(
                "dimension mismatch: m is {}x{}, sigma {}x{}, x0 {}x{}",
                n,
                n,
                self.sigma.dim(),
                self.sigma.dim(),
                self.x0.dim(),
                self.x0.dim()
            )));
        }
        match &self.mode {
            OmegaMode::Bru { beta } => {
                if !(*beta >= (n + 1) as f64) {
                    return Err(WishartError::InvalidParams(format!(
                        "beta = {beta} violates the positivity constraint beta >= n + 1 = {}",
                        n + 1
                    )));
                }
            }
            OmegaMode::General { omega } => {
                if omega.dim() != n {
                    return Err(WishartError::InvalidParams("omega dimension mismatch".into()));
                }
                let gap = omega.sub(&self.sigma2().scale((n + 1) as f64));
                if !gap.is_positive_definite() {
                    return Err(WishartError::InvalidParams(
                        "omega - (n+1) sigma^2 must be positive definite".into(),
                    ));
                }
            }
        }
        if !self.sigma.is_positive_definite() {
            return Err(WishartError::InvalidParams("sigma must be positive definite".into()));
        }
        if !self.x0.is_positive_definite() {
            return Err(WishartError::InvalidParams("x0 must be positive definite".into()));
        }
        assert_stable(&self.m)
            .map_err(|_| WishartError::InvalidParams("all eigenvalues of m must have strictly negative real part".into()))?;
        Ok(())
    }
}

/// Per-date cache: matrix exponential of the drift and the covariance
/// integral varsigma_t with its Cholesky factor.
pub struct Propagator {
    pub t: f64,
    pub e_tm: GenMat,
    pub varsigma: SymMat,
    pub chol_varsigma: Option<GenMat>,
    e_tm_c: CMat,
    e_tm_t_c: CMat,
    varsigma_c: CMat,
}

impl Propagator {
    fn build(t: f64, m: &GenMat, sigma2: &SymMat) -> Result<Self, WishartError> {
        let e_tm = expm(&m.scale(t))?;
        let vs = varsigma(t, m, sigma2)?;
        let chol = vs.cholesky().ok();
        Ok(Propagator {
            t,
            e_tm_c: e_tm.to_complex(),
            e_tm_t_c: e_tm.transpose().to_complex(),
            varsigma_c: vs.as_mat().to_complex(),
            chol_varsigma: chol,
            e_tm,
            varsigma: vs,
        })
    }
}

/// Value of the exponentially affine MGF together with its exponent parts
/// and a margin-from-singularity diagnostic.
#[derive(Clone, Debug)]
pub struct MgfValue {
    pub value: Complex64,
    /// log of the value; safe to use when the value itself would overflow.
    pub log_value: Complex64,
    /// Exponent matrix applied to the initial state.
    pub a: CMat,
    /// Scalar exponent.
    pub b: Complex64,
    /// Smallest singular value of (I - 2 theta varsigma_t).
    pub domain_margin: f64,
}

/// A Wishart process with validated parameters and per-date caches.
///
/// All evaluation methods take `&self`; the internal cache is behind a
/// lock, so a model can be shared read-only across threads.
pub struct WishartModel {
    params: WishartParams,
    sigma2: SymMat,
    x0_c: CMat,
    props: RwLock<HashMap<u64, Arc<Propagator>>>,
}

impl std::fmt::Debug for WishartModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WishartModel").field("params", &self.params).finish()
    }
}

impl WishartModel {
    pub fn new(params: WishartParams) -> Result<Self, WishartError> {
        params.validate()?;
        let sigma2 = params.sigma2();
        let x0_c = params.x0.as_mat().to_complex();
        Ok(WishartModel { params, sigma2, x0_c, props: RwLock::new(HashMap::new()) })
    }

    pub fn params(&self) -> &WishartParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn propagator(&self, t: f64) -> Result<Arc<Propagator>, WishartError> {
        if !(t >= 0.0) {
            return Err(WishartError::InvalidParams(format!("horizon t = {t} must be nonnegative")));
        }
        let key = t.to_bits();
        if let Some(p) = self.props.read().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(Propagator::build(t, &self.params.m, &self.sigma2)?);
        self.props.write().unwrap().insert(key, p.clone());
        Ok(p)
    }

    /// E[x_t] = e^{tm} x0 e^{tm^T} + integral of the propagated omega.
    pub fn mean(&self, t: f64) -> Result<SymMat, WishartError> {
        let prop = self.propagator(t)?;
        let drift_free = prop.e_tm.matmul(self.params.x0.as_mat()).matmul(&prop.e_tm.transpose());
        let omega_part = match &self.params.mode {
            OmegaMode::Bru { beta } => prop.varsigma.scale(*beta),
            OmegaMode::General { omega } => varsigma(t, &self.params.m, omega)?,
        };
        Ok(SymMat::symmetrize(&drift_free).add(&omega_part))
    }

    /// Limit of varsigma_t: the solution of m X + X m^T = -sigma^2.
    pub fn stationary_varsigma(&self) -> Result<SymMat, WishartError> {
        Ok(lyapunov_solve(&self.params.m, &self.sigma2)?)
    }

    /// Stationary mean, the solution of m X + X m^T = -omega.
    pub fn stationary_mean(&self) -> Result<SymMat, WishartError> {
        Ok(lyapunov_solve(&self.params.m, &self.params.omega())?)
    }

    /// One-date MGF E[exp(tr[theta x_t])] for complex symmetric theta.
    pub fn mgf(&self, t: f64, theta: &CSymMat) -> Result<MgfValue, WishartError> {
        let prop = self.propagator(t)?;
        self.mgf_at(&prop, theta, DomainStage::OneDate)
    }

    /// log of the one-date MGF without the singular-value diagnostic;
    /// the hot path for inversion providers.
    pub fn log_mgf(&self, t: f64, theta: &CSymMat) -> Result<Complex64, WishartError> {
        let prop = self.propagator(t)?;
        let theta_m = theta.as_mat();
        let m_mat = CMat::identity(self.dim())
            .sub(&theta_m.matmul(&prop.varsigma_c).mul_scalar(Complex64::new(2.0, 0.0)));
        let lu = factor_domain(&m_mat, DomainStage::OneDate)?;
        let a = prop.e_tm_t_c.matmul(&lu.solve_mat(theta_m).map_err(WishartError::from)?).matmul(&prop.e_tm_c);
        let b = self.scalar_exponent(&prop, theta)?;
        Ok(a.matmul(&self.x0_c).trace() + b)
    }

    fn mgf_at(&self, prop: &Propagator, theta: &CSymMat, stage: DomainStage) -> Result<MgfValue, WishartError> {
        let theta_m = theta.as_mat();
        let m_mat = CMat::identity(self.dim()).sub(&theta_m.matmul(&prop.varsigma_c).mul_scalar(Complex64::new(2.0, 0.0)));
        let lu = factor_domain(&m_mat, stage)?;
        let a = prop.e_tm_t_c.matmul(&lu.solve_mat(theta_m).map_err(WishartError::from)?).matmul(&prop.e_tm_c);
        let b = self.scalar_exponent(prop, theta)?;
        let log_value = a.matmul(&self.x0_c).trace() + b;
        Ok(MgfValue {
            value: log_value.exp(),
            log_value,
            a,
            b,
            domain_margin: min_singular_value(&m_mat),
        })
    }

    /// b(t, theta): closed determinant form in the Bru case, quadrature of
    /// tr[omega a(u, theta)] otherwise.
    fn scalar_exponent(&self, prop: &Propagator, theta: &CSymMat) -> Result<Complex64, WishartError> {
        match &self.params.mode {
            OmegaMode::Bru { beta } => {
                let ld = log_det_i_minus_2vs_theta(&prop.varsigma_c, theta.as_mat())?;
                Ok(ld * Complex64::new(-beta / 2.0, 0.0))
            }
            OmegaMode::General { omega } => self.scalar_exponent_quadrature(prop.t, theta, omega),
        }
    }

    /// Adaptive Gauss-Kronrod integration of u -> tr[omega a(u, theta)]
    /// on [0, t] to absolute tolerance 1e-12.
    fn scalar_exponent_quadrature(&self, t: f64, theta: &CSymMat, omega: &SymMat) -> Result<Complex64, WishartError> {
        let omega_c = omega.as_mat().to_complex();
        let f = |u: f64| -> Result<Complex64, WishartError> {
            let prop = Propagator::build(u, &self.params.m, &self.sigma2)?;
            let theta_m = theta.as_mat();
            let m_mat = CMat::identity(self.dim())
                .sub(&theta_m.matmul(&prop.varsigma_c).mul_scalar(Complex64::new(2.0, 0.0)));
            let lu = factor_domain(&m_mat, DomainStage::OneDate)?;
            let a = prop.e_tm_t_c.matmul(&lu.solve_mat(theta_m)?).matmul(&prop.e_tm_c);
            Ok(omega_c.matmul(&a).trace())
        };
        adaptive_complex(&f, 0.0, t, 1e-12, 200)
    }

    /// Jet of nu -> Phi(t, theta0 + nu theta1) truncated at `order`.
    ///
    /// Coefficient q times q! is the q-th derivative at nu = 0.
    pub fn mgf_jet(&self, t: f64, theta0: &CSymMat, theta1: &SymMat, order: usize) -> Result<Jet, WishartError> {
        let (log_phi0, norm_jet) = self.mgf_norm_jet(t, theta0, &[theta1.clone()], &[order])?;
        Ok(norm_jet.scale(log_phi0.exp()))
    }

    /// Normalized multi-direction jet: returns log Phi(t, theta0) and the
    /// jet of Phi(t, theta0 + sum nu_k dir_k)/Phi(t, theta0).
    pub fn mgf_norm_jet(
        &self,
        t: f64,
        theta0: &CSymMat,
        dirs: &[SymMat],
        orders: &[usize],
    ) -> Result<(Complex64, Jet), WishartError> {
        let beta = self.require_bru("MGF derivatives")?;
        let prop = self.propagator(t)?;
        self.mgf_norm_jet_at(&prop, theta0, dirs, orders, beta)
    }

    fn mgf_norm_jet_at(
        &self,
        prop: &Propagator,
        theta0: &CSymMat,
        dirs: &[SymMat],
        orders: &[usize],
        beta: f64,
    ) -> Result<(Complex64, Jet), WishartError> {
        assert_eq!(dirs.len(), orders.len());
        let n = self.dim();
        let shape: Vec<usize> = orders.iter().map(|&q| q + 1).collect();
        let two = Complex64::new(2.0, 0.0);

        // Theta(nu) and M(nu) = I - 2 Theta(nu) varsigma
        let mut theta_jet = MatJet::from_const(theta0.as_mat().clone(), &shape);
        let m0 = CMat::identity(n).sub(&theta0.as_mat().matmul(&prop.varsigma_c).mul_scalar(two));
        let mut m_jet = MatJet::from_const(m0.clone(), &shape);
        for (k, d) in dirs.iter().enumerate() {
            let d_c = d.as_mat().to_complex();
            m_jet.set_linear(k, d_c.matmul(&prop.varsigma_c).mul_scalar(-two));
            theta_jet.set_linear(k, d_c);
        }
        let lu = factor_domain(&m0, DomainStage::OneDate)?;
        let m0_inv = lu.inverse().map_err(WishartError::from)?;
        let logdet0 = log_det_i_minus_2vs_theta(&prop.varsigma_c, theta0.as_mat())?;

        let m_inv = m_jet.inverse_with(&m0_inv);
        let a_jet = m_inv.matmul(&theta_jet).mul_left(&prop.e_tm_t_c).mul_right(&prop.e_tm_c);
        // det(I - 2 Theta vs) == det(I - 2 vs Theta)
        let b_jet = m_jet.log_det_with(logdet0, &m0_inv).scale(Complex64::new(-beta / 2.0, 0.0));
        let f_jet = a_jet.trace_product(&self.x0_c).add(&b_jet);

        let f0 = f_jet.coeff(&vec![0; shape.len()]);
        let norm = f_jet.sub(&Jet::constant(f0, &shape)).exp();
        Ok((f0, norm))
    }

    /// Two-date MGF E[exp(tr[theta_bar0 x_{t0}] + tr[theta_t1 x_{t1}])],
    /// assembled through the conditional one-date form at horizon t1 - t0.
    pub fn mgf_two_dates(
        &self,
        t0: f64,
        t1: f64,
        theta_bar0: &CSymMat,
        theta_t1: &CSymMat,
    ) -> Result<MgfValue, WishartError> {
        check_two_dates(t0, t1)?;
        let prop_d = self.propagator(t1 - t0)?;
        let inner = self.mgf_at(&prop_d, theta_t1, DomainStage::TwoDateInner)?;
        // psi = theta_bar0 + a(t1 - t0, theta_t1)
        let psi = CSymMat::from_rows(
            &(0..self.dim())
                .map(|i| (0..self.dim()).map(|j| theta_bar0.get(i, j) + 0.5 * (inner.a[(i, j)] + inner.a[(j, i)])).collect())
                .collect::<Vec<_>>(),
        )?;
        let prop0 = self.propagator(t0)?;
        let outer = self.mgf_at(&prop0, &psi, DomainStage::TwoDateOuter)?;
        let log_value = outer.log_value + inner.b;
        Ok(MgfValue {
            value: log_value.exp(),
            log_value,
            a: outer.a,
            b: outer.b + inner.b,
            domain_margin: outer.domain_margin.min(inner.domain_margin),
        })
    }

    /// Jet of (nu_1, .., nu_k) -> two-date MGF with exponent
    /// tr[theta_bar0 x_{t0}] + tr[(sum nu_k dir_k) x_{t1}].
    pub fn mgf_two_dates_jet(
        &self,
        t0: f64,
        t1: f64,
        theta_bar0: &CSymMat,
        dirs: &[SymMat],
        orders: &[usize],
    ) -> Result<Jet, WishartError> {
        let (log_phi0, norm) = self.mgf_two_dates_norm_jet(t0, t1, theta_bar0, dirs, orders)?;
        Ok(norm.scale(log_phi0.exp()))
    }

    /// Normalized variant of [`Self::mgf_two_dates_jet`]; the base value
    /// equals the one-date MGF at (t0, theta_bar0).
    pub fn mgf_two_dates_norm_jet(
        &self,
        t0: f64,
        t1: f64,
        theta_bar0: &CSymMat,
        dirs: &[SymMat],
        orders: &[usize],
    ) -> Result<(Complex64, Jet), WishartError> {
        check_two_dates(t0, t1)?;
        let beta = self.require_bru("two-date MGF derivatives")?;
        let n = self.dim();
        let shape: Vec<usize> = orders.iter().map(|&q| q + 1).collect();
        let two = Complex64::new(2.0, 0.0);
        let prop_d = self.propagator(t1 - t0)?;
        let prop0 = self.propagator(t0)?;

        // inner leg around 0: Theta1(nu), M1 = I - 2 Theta1 vs_d (base I)
        let mut theta1_jet = MatJet::from_const(CMat::zeros(n), &shape);
        let mut m1_jet = MatJet::from_const(CMat::identity(n), &shape);
        for (k, d) in dirs.iter().enumerate() {
            let d_c = d.as_mat().to_complex();
            m1_jet.set_linear(k, d_c.matmul(&prop_d.varsigma_c).mul_scalar(-two));
            theta1_jet.set_linear(k, d_c);
        }
        let eye = CMat::identity(n);
        let m1_inv = m1_jet.inverse_with(&eye);
        let a1_jet = m1_inv.matmul(&theta1_jet).mul_left(&prop_d.e_tm_t_c).mul_right(&prop_d.e_tm_c);
        let b1_jet = m1_jet.log_det_with(Complex64::new(0.0, 0.0), &eye).scale(Complex64::new(-beta / 2.0, 0.0));

        // outer leg around theta_bar0: psi(nu) = theta_bar0 + a1(nu)
        let psi_jet = a1_jet.add(&MatJet::from_const(theta_bar0.as_mat().clone(), &shape));
        let m0 = CMat::identity(n).sub(&theta_bar0.as_mat().matmul(&prop0.varsigma_c).mul_scalar(two));
        let lu0 = factor_domain(&m0, DomainStage::TwoDateOuter)?;
        let m0_inv = lu0.inverse().map_err(WishartError::from)?;
        // M0(nu) = I - 2 psi(nu) vs_0 = m0 - 2 a1(nu) vs_0 (a1 has no constant term)
        let m0_jet = MatJet::from_const(m0.clone(), &shape)
            .add(&a1_jet.mul_right(&prop0.varsigma_c).scale(-two));
        let logdet0 = log_det_i_minus_2vs_theta(&prop0.varsigma_c, theta_bar0.as_mat())?;
        let m0_inv_jet = m0_jet.inverse_with(&m0_inv);
        let a0_jet = m0_inv_jet.matmul(&psi_jet).mul_left(&prop0.e_tm_t_c).mul_right(&prop0.e_tm_c);
        let b0_jet = m0_jet.log_det_with(logdet0, &m0_inv).scale(Complex64::new(-beta / 2.0, 0.0));

        let f_jet = a0_jet.trace_product(&self.x0_c).add(&b0_jet).add(&b1_jet);
        let f0 = f_jet.coeff(&vec![0; shape.len()]);
        let norm = f_jet.sub(&Jet::constant(f0, &shape)).exp();
        Ok((f0, norm))
    }

    fn require_bru(&self, what: &str) -> Result<f64, WishartError> {
        self.params.bru_beta().ok_or_else(|| {
            WishartError::InvalidParams(format!("{what} require the Bru parameterization omega = beta sigma^2"))
        })
    }
}

/// MGF of the stationary matrix-gamma law: det(I - 2 varsigma_inf theta)^{-beta/2}.
pub fn stationary_mgf(beta: f64, varsigma_inf: &SymMat, theta: &CSymMat) -> Result<Complex64, WishartError> {
    Ok(stationary_log_mgf(beta, varsigma_inf, theta)?.exp())
}

/// log of the stationary matrix-gamma MGF.
pub fn stationary_log_mgf(beta: f64, varsigma_inf: &SymMat, theta: &CSymMat) -> Result<Complex64, WishartError> {
    let vs_c = varsigma_inf.as_mat().to_complex();
    let ld = log_det_i_minus_2vs_theta(&vs_c, theta.as_mat())?;
    Ok(ld * Complex64::new(-beta / 2.0, 0.0))
}

/// Instantaneous quadratic covariation rates of a 2x2 Wishart process at
/// state `x` (coefficients of dt).
#[derive(Clone, Debug, PartialEq)]
pub struct CovariationRates {
    pub d_x11_x11: f64,
    pub d_x22_x22: f64,
    pub d_x12_x12: f64,
    pub d_x11_x22: f64,
}

pub fn quadratic_covariations(params: &WishartParams, x: &SymMat) -> Result<CovariationRates, WishartError> {
    if params.dim() != 2 || x.dim() != 2 {
        return Err(WishartError::InvalidParams("covariation rates are implemented for n = 2".into()));
    }
    let s11 = params.sigma.get(0, 0);
    let s12 = params.sigma.get(0, 1);
    let s22 = params.sigma.get(1, 1);
    let (x11, x12, x22) = (x.get(0, 0), x.get(0, 1), x.get(1, 1));
    Ok(CovariationRates {
        d_x11_x11: 4.0 * x11 * (s11 * s11 + s12 * s12),
        d_x22_x22: 4.0 * x22 * (s12 * s12 + s22 * s22),
        d_x12_x12: x11 * (s12 * s12 + s22 * s22) + 2.0 * x12 * s12 * (s11 + s22) + x22 * (s11 * s11 + s12 * s12),
        d_x11_x22: 4.0 * x12 * s12 * (s11 + s22),
    })
}

/// The zero-dependence counterfactual: diagonal sigma preserving each
/// loss's normalized quadratic variation, with the initial state restored
/// to the new stationary mean.
pub fn zero_dependence_equivalent(params: &WishartParams) -> Result<WishartParams, WishartError> {
    if params.dim() != 2 {
        return Err(WishartError::InvalidParams("zero-dependence equivalent is implemented for n = 2".into()));
    }
    let s11 = params.sigma.get(0, 0);
    let s12 = params.sigma.get(0, 1);
    let s22 = params.sigma.get(1, 1);
    let sigma_tilde = SymMat::diag(&[(s11 * s11 + s12 * s12).sqrt(), (s22 * s22 + s12 * s12).sqrt()]);
    let mode = params.mode.clone();
    let omega_tilde = match &mode {
        OmegaMode::Bru { beta } => sigma_tilde.square().scale(*beta),
        OmegaMode::General { omega } => omega.clone(),
    };
    let x0 = lyapunov_solve(&params.m, &omega_tilde)?;
    let out = WishartParams { mode, m: params.m.clone(), sigma: sigma_tilde, x0 };
    out.validate()?;
    Ok(out)
}

fn check_two_dates(t0: f64, t1: f64) -> Result<(), WishartError> {
    if !(0.0 < t0 && t0 < t1) {
        return Err(WishartError::InvalidParams(format!("two dates require 0 < t0 < t1, got t0 = {t0}, t1 = {t1}")));
    }
    Ok(())
}

fn factor_domain(m: &CMat, stage: DomainStage) -> Result<Lu<Complex64>, WishartError> {
    match Lu::factor(m) {
        Ok(lu) => {
            let cond = lu.condition_1norm();
            if cond > DOMAIN_CONDITION_LIMIT {
                Err(WishartError::Domain { stage, condition: cond })
            } else {
                Ok(lu)
            }
        }
        Err(_) => Err(WishartError::Domain { stage, condition: f64::INFINITY }),
    }
}

/// Branch-continuous log det(I - 2 varsigma theta).
///
/// For n = 2 the two eigenvalues of varsigma theta are split exactly and
/// each factor log(1 - 2 mu_k) is taken on the principal branch; on the
/// contours used by the inversion engine every factor stays in the right
/// half-plane, so the sum is continuous in the contour parameter. For
/// larger n the principal log of the LU determinant is used.
fn log_det_i_minus_2vs_theta(varsigma_c: &CMat, theta: &CMat) -> Result<Complex64, WishartError> {
    let n = varsigma_c.dim();
    let prod = varsigma_c.matmul(theta);
    if n == 1 {
        return Ok((C_ONE - 2.0 * prod[(0, 0)]).ln());
    }
    if n == 2 {
        // eigenvalues of the 2x2 product via the quadratic formula
        let tr = prod[(0, 0)] + prod[(1, 1)];
        let det = prod[(0, 0)] * prod[(1, 1)] - prod[(0, 1)] * prod[(1, 0)];
        let disc = (tr * tr - 4.0 * det).sqrt();
        let mu1 = 0.5 * (tr + disc);
        let mu2 = 0.5 * (tr - disc);
        return Ok((C_ONE - 2.0 * mu1).ln() + (C_ONE - 2.0 * mu2).ln());
    }
    let m = CMat::identity(n).sub(&prod.mul_scalar(Complex64::new(2.0, 0.0)));
    let lu = Lu::factor(&m).map_err(|_| WishartError::Domain { stage: DomainStage::OneDate, condition: f64::INFINITY })?;
    Ok(lu.det().ln())
}

/// Adaptive 15-point Gauss-Kronrod for complex-valued integrands with
/// fallible evaluation; used for the general-omega scalar exponent.
fn adaptive_complex<F>(f: &F, a: f64, b: f64, tol: f64, max_splits: usize) -> Result<Complex64, WishartError>
where
    F: Fn(f64) -> Result<Complex64, WishartError>,
{
    fn gk15<F>(f: &F, a: f64, b: f64) -> Result<(Complex64, f64), WishartError>
    where
        F: Fn(f64) -> Result<Complex64, WishartError>,
    {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut resk = Complex64::new(0.0, 0.0);
        let mut resg = Complex64::new(0.0, 0.0);
        let fc = f(c)?;
        resk += crate::inversion::quadrature::WGK[7] * fc;
        resg += crate::inversion::quadrature::WG[3] * fc;
        for j in 0..7 {
            let x = h * crate::inversion::quadrature::XGK[j];
            let f1 = f(c - x)?;
            let f2 = f(c + x)?;
            resk += crate::inversion::quadrature::WGK[j] * (f1 + f2);
            if j % 2 == 1 {
                resg += crate::inversion::quadrature::WG[j / 2] * (f1 + f2);
            }
        }
        Ok((resk * h, ((resk - resg) * h).norm()))
    }
    let mut stack = vec![(a, b)];
    let mut total = Complex64::new(0.0, 0.0);
    let mut splits = 0usize;
    while let Some((lo, hi)) = stack.pop() {
        let (v, e) = gk15(f, lo, hi)?;
        if e <= tol * ((hi - lo) / (b - a)).max(1e-3) || splits >= max_splits {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid));
            stack.push((mid, hi));
            splits += 1;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests;
