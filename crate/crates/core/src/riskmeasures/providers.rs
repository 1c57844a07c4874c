//! MGF providers wiring the Wishart model (and the stationary matrix
//! gamma law) into the inversion engine.

use crate::inversion::{InversionError, Mgf2dProvider, MgfJetProvider, MgfProvider};
use crate::matcore::{CSymMat, SymMat};
use crate::wishart::{stationary_log_mgf, WishartError, WishartModel};
use num_complex::Complex64;

fn map_err(e: WishartError) -> InversionError {
    match e {
        WishartError::Domain { .. } => InversionError::Domain(e.to_string()),
        other => InversionError::Provider(other.to_string()),
    }
}

/// Real eigenvalues of theta varsigma (equivalently of L^T theta L with
/// varsigma = L L^T); they fix the MGF domain along the ray z theta.
fn ray_eigenvalues(theta: &SymMat, varsigma: &SymMat) -> Result<Vec<f64>, WishartError> {
    let l = varsigma.cholesky()?;
    let b = SymMat::symmetrize(&l.transpose().matmul(theta.as_mat()).matmul(&l));
    Ok(b.eigenvalues())
}

fn damping_from_eigs(lambdas: &[f64]) -> (Option<f64>, Option<f64>) {
    let lam_max = lambdas.iter().copied().filter(|&l| l > 1e-300).fold(f64::NEG_INFINITY, f64::max);
    let lam_min = lambdas.iter().copied().filter(|&l| l < -1e-300).fold(f64::INFINITY, f64::min);
    let sup = if lam_max.is_finite() { Some(1.0 / (2.0 * lam_max)) } else { None };
    let inf = if lam_min.is_finite() { Some(1.0 / (2.0 * lam_min)) } else { None };
    (sup, inf)
}

fn scaled(theta: &SymMat, z: Complex64) -> CSymMat {
    theta.to_complex().mul_scalar(z)
}

/// One-date provider for the scalar payoff tr[theta x_t], jet-capable in
/// auxiliary directions.
pub struct WishartPayoffMgf<'a> {
    model: &'a WishartModel,
    t: f64,
    cond: SymMat,
    dirs: Vec<SymMat>,
    sup: Option<f64>,
    inf: Option<f64>,
}

impl<'a> WishartPayoffMgf<'a> {
    pub fn new(model: &'a WishartModel, t: f64, cond: SymMat, dirs: Vec<SymMat>) -> Result<Self, WishartError> {
        let prop = model.propagator(t)?;
        let lambdas = ray_eigenvalues(&cond, &prop.varsigma)?;
        let (sup, inf) = damping_from_eigs(&lambdas);
        Ok(WishartPayoffMgf { model, t, cond, dirs, sup, inf })
    }
}

impl MgfProvider for WishartPayoffMgf<'_> {
    fn log_mgf(&self, z: Complex64) -> Result<Complex64, InversionError> {
        self.model.log_mgf(self.t, &scaled(&self.cond, z)).map_err(map_err)
    }
    fn damping_sup(&self) -> Option<f64> {
        self.sup
    }
    fn damping_inf(&self) -> Option<f64> {
        self.inf
    }
}

impl MgfJetProvider for WishartPayoffMgf<'_> {
    fn log_mgf_and_norm_deriv(
        &self,
        z: Complex64,
        p0: u32,
        orders: &[u32],
    ) -> Result<(Complex64, Complex64), InversionError> {
        assert_eq!(orders.len(), self.dirs.len(), "order list does not match jet directions");
        let mut dirs: Vec<SymMat> = Vec::with_capacity(self.dirs.len() + 1);
        let mut all_orders: Vec<usize> = Vec::with_capacity(orders.len() + 1);
        if p0 > 0 {
            dirs.push(self.cond.clone());
            all_orders.push(p0 as usize);
        }
        dirs.extend(self.dirs.iter().cloned());
        all_orders.extend(orders.iter().map(|&q| q as usize));
        let (log_phi, jet) = self
            .model
            .mgf_norm_jet(self.t, &scaled(&self.cond, z), &dirs, &all_orders)
            .map_err(map_err)?;
        Ok((log_phi, jet.derivative(&all_orders)))
    }
}

/// Two-date provider: conditioner at t0, jet directions at t1.
pub struct WishartTwoDateMgf<'a> {
    model: &'a WishartModel,
    t0: f64,
    t1: f64,
    cond: SymMat,
    dirs: Vec<SymMat>,
    sup: Option<f64>,
    inf: Option<f64>,
}

impl<'a> WishartTwoDateMgf<'a> {
    pub fn new(
        model: &'a WishartModel,
        t0: f64,
        t1: f64,
        cond: SymMat,
        dirs: Vec<SymMat>,
    ) -> Result<Self, WishartError> {
        let prop = model.propagator(t0)?;
        let lambdas = ray_eigenvalues(&cond, &prop.varsigma)?;
        let (sup, inf) = damping_from_eigs(&lambdas);
        Ok(WishartTwoDateMgf { model, t0, t1, cond, dirs, sup, inf })
    }
}

impl MgfProvider for WishartTwoDateMgf<'_> {
    fn log_mgf(&self, z: Complex64) -> Result<Complex64, InversionError> {
        self.model.log_mgf(self.t0, &scaled(&self.cond, z)).map_err(map_err)
    }
    fn damping_sup(&self) -> Option<f64> {
        self.sup
    }
    fn damping_inf(&self) -> Option<f64> {
        self.inf
    }
}

impl MgfJetProvider for WishartTwoDateMgf<'_> {
    fn log_mgf_and_norm_deriv(
        &self,
        z: Complex64,
        p0: u32,
        orders: &[u32],
    ) -> Result<(Complex64, Complex64), InversionError> {
        if p0 > 0 {
            return Err(InversionError::Provider(
                "two-date queries carry conditioner powers as later-date jet directions".into(),
            ));
        }
        assert_eq!(orders.len(), self.dirs.len());
        let all_orders: Vec<usize> = orders.iter().map(|&q| q as usize).collect();
        let (log_phi, jet) = self
            .model
            .mgf_two_dates_norm_jet(self.t0, self.t1, &scaled(&self.cond, z), &self.dirs, &all_orders)
            .map_err(map_err)?;
        Ok((log_phi, jet.derivative(&all_orders)))
    }
}

/// Joint MGF of (tr[theta_y x_t], tr[theta_z x_t]) over two contours.
pub struct Wishart2dMgf<'a> {
    model: &'a WishartModel,
    t: f64,
    theta_y: SymMat,
    theta_z: SymMat,
    sup_y: Option<f64>,
    sup_z: Option<f64>,
}

impl<'a> Wishart2dMgf<'a> {
    pub fn new(model: &'a WishartModel, t: f64, theta_y: SymMat, theta_z: SymMat) -> Result<Self, WishartError> {
        let prop = model.propagator(t)?;
        let (sup_y, _) = damping_from_eigs(&ray_eigenvalues(&theta_y, &prop.varsigma)?);
        let (sup_z, _) = damping_from_eigs(&ray_eigenvalues(&theta_z, &prop.varsigma)?);
        Ok(Wishart2dMgf { model, t, theta_y, theta_z, sup_y, sup_z })
    }
}

impl Mgf2dProvider for Wishart2dMgf<'_> {
    fn log_mgf2(&self, z1: Complex64, z2: Complex64) -> Result<Complex64, InversionError> {
        let theta = scaled(&self.theta_y, z1).add(&scaled(&self.theta_z, z2));
        self.model.log_mgf(self.t, &theta).map_err(map_err)
    }
    fn damping_sup2(&self) -> (Option<f64>, Option<f64>) {
        (self.sup_y, self.sup_z)
    }
}

/// Stationary matrix-gamma provider: Phi(z) = det(I - 2 varsigma_inf z theta)^{-beta/2}.
pub struct MatrixGammaMgf {
    beta: f64,
    varsigma_inf: SymMat,
    theta: SymMat,
    sup: Option<f64>,
    inf: Option<f64>,
}

impl MatrixGammaMgf {
    pub fn new(beta: f64, varsigma_inf: SymMat, theta: SymMat) -> Result<Self, WishartError> {
        let lambdas = ray_eigenvalues(&theta, &varsigma_inf)?;
        let (sup, inf) = damping_from_eigs(&lambdas);
        Ok(MatrixGammaMgf { beta, varsigma_inf, theta, sup, inf })
    }
}

impl MgfProvider for MatrixGammaMgf {
    fn log_mgf(&self, z: Complex64) -> Result<Complex64, InversionError> {
        let theta = scaled(&self.theta, z);
        stationary_log_mgf(self.beta, &self.varsigma_inf, &theta).map_err(map_err)
    }
    fn damping_sup(&self) -> Option<f64> {
        self.sup
    }
    fn damping_inf(&self) -> Option<f64> {
        self.inf
    }
}
