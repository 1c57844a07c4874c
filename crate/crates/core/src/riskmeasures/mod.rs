//! User-facing conditional tail risk measures for the Wishart model:
//! conditional (cross-)moments at one or two dates, TCE, tail variance,
//! tail covariance and tail skewness, and the zero-dependence comparison
//! report.

pub mod providers;

use crate::inversion::{self, InversionConfig, InversionError, MomentResult};
use crate::matcore::SymMat;
use crate::wishart::{zero_dependence_equivalent, WishartError, WishartModel};
use providers::{WishartPayoffMgf, WishartTwoDateMgf};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error(transparent)]
    Wishart(#[from] WishartError),
    #[error(transparent)]
    Inversion(#[from] InversionError),
    #[error("tail probability {0:.3e} below 1e-12; conditioning event is numerically empty")]
    ZeroTailProbability(f64),
    #[error("tail variance {0:.3e} is negative; quadrature tolerance too loose for this query")]
    NegativeVariance(f64),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

/// A scalar payoff tr[theta x] of the matrix state.
#[derive(Clone, Debug)]
pub struct SpectralPayoff {
    pub theta: SymMat,
    pub label: String,
    /// Drives the Laplace-vs-Fourier branch and admissible damping signs.
    pub positive_semidefinite: bool,
}

impl SpectralPayoff {
    pub fn new(theta: SymMat, label: impl Into<String>) -> Self {
        let psd = theta.eigenvalues().into_iter().all(|l| l >= -1e-12);
        SpectralPayoff { theta, label: label.into(), positive_semidefinite: psd }
    }

    /// The individual loss x_ii.
    pub fn individual_loss(i: usize, n: usize) -> Self {
        let mut theta = SymMat::zeros(n);
        theta.set_sym(i, i, 1.0);
        Self::new(theta, format!("x{}{}", i + 1, i + 1))
    }

    /// The portfolio sum of diagonal losses.
    pub fn portfolio_sum(n: usize) -> Self {
        Self::new(SymMat::identity(n), "s")
    }

    /// The dependence entry x_ij via (e_ij + e_ji)/2.
    pub fn covariance_entry(i: usize, j: usize, n: usize) -> Self {
        let mut theta = SymMat::zeros(n);
        theta.set_sym(i, j, 0.5);
        Self::new(theta, format!("x{}{}", i + 1, j + 1))
    }

    fn same_direction(&self, other: &SpectralPayoff) -> bool {
        self.theta == other.theta
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QueryDates {
    OneDate(f64),
    /// Conditioner observed at t0, targets at t1.
    TwoDates { t0: f64, t1: f64 },
}

/// E[prod_k tr[theta_k x]^{q_k} | tr[theta_0 x] > threshold].
#[derive(Clone, Debug)]
pub struct TailQuery {
    pub conditioner: SpectralPayoff,
    pub threshold: f64,
    pub targets: Vec<(SpectralPayoff, u32)>,
    pub dates: QueryDates,
}

impl TailQuery {
    pub fn validate(&self) -> Result<(), RiskError> {
        if !self.threshold.is_finite() {
            return Err(RiskError::InvalidQuery("threshold must be finite".into()));
        }
        let total: u32 = self.targets.iter().map(|(_, q)| q).sum();
        if total > 6 {
            return Err(RiskError::InvalidQuery(format!("total derivative order {total} exceeds 6")));
        }
        if let QueryDates::TwoDates { t0, t1 } = self.dates {
            if !(0.0 < t0 && t0 < t1) {
                return Err(RiskError::InvalidQuery(format!("two dates require 0 < t0 < t1, got ({t0}, {t1})")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        for (p, q) in &self.targets {
            if *q == 1 {
                parts.push(p.label.clone());
            } else if *q > 1 {
                parts.push(format!("{}^{}", p.label, q));
            }
        }
        let inner = if parts.is_empty() { "1".to_string() } else { parts.join(" ") };
        match self.dates {
            QueryDates::OneDate(_) => format!("E[{} | {} > {}]", inner, self.conditioner.label, self.threshold),
            QueryDates::TwoDates { .. } => {
                format!("E[{}(t1) | {}(t0) > {}]", inner, self.conditioner.label, self.threshold)
            }
        }
    }
}

/// Tail probability of the conditioning event.
pub fn tail_probability(
    model: &WishartModel,
    conditioner: &SpectralPayoff,
    threshold: f64,
    t: f64,
    cfg: &InversionConfig,
) -> Result<MomentResult, RiskError> {
    let provider = WishartPayoffMgf::new(model, t, conditioner.theta.clone(), Vec::new())?;
    Ok(inversion::truncated_moment_1d(&provider, 0, threshold, cfg)?)
}

/// The conditional moment described by `query`, as a ratio of damped
/// inversions (numerator with MGF derivatives, denominator the tail
/// probability).
pub fn conditional_moment(
    model: &WishartModel,
    query: &TailQuery,
    cfg: &InversionConfig,
) -> Result<MomentResult, RiskError> {
    query.validate()?;
    let cond = &query.conditioner;

    // fold conditioner-direction targets into the kernel power at one
    // date; at two dates every target is a later-date jet direction
    let mut kernel_power = 0u32;
    let mut dirs: Vec<SymMat> = Vec::new();
    let mut orders: Vec<u32> = Vec::new();
    let fold = matches!(query.dates, QueryDates::OneDate(_));
    for (payoff, q) in &query.targets {
        if *q == 0 {
            continue;
        }
        if fold && payoff.same_direction(cond) {
            kernel_power += q;
        } else if let Some(pos) = dirs.iter().position(|d| *d == payoff.theta) {
            orders[pos] += q;
        } else {
            dirs.push(payoff.theta.clone());
            orders.push(*q);
        }
    }

    if kernel_power == 0 && dirs.is_empty() {
        let den = match query.dates {
            QueryDates::OneDate(t) | QueryDates::TwoDates { t0: t, .. } => {
                tail_probability(model, cond, query.threshold, t, cfg)?
            }
        };
        if den.value < 1e-12 {
            return Err(RiskError::ZeroTailProbability(den.value));
        }
        // conditioning on itself: exactly one by Bayes consistency
        return Ok(MomentResult { value: 1.0, abs_error_estimate: 0.0, evaluations: den.evaluations, warnings: den.warnings });
    }

    let (num, den) = match query.dates {
        QueryDates::OneDate(t) => {
            let provider = WishartPayoffMgf::new(model, t, cond.theta.clone(), dirs)?;
            let num = if orders.is_empty() {
                inversion::truncated_moment_1d(&provider, kernel_power, query.threshold, cfg)?
            } else {
                inversion::truncated_cross_moment_1d(&provider, kernel_power, &orders, query.threshold, cfg)?
            };
            let den = inversion::truncated_moment_1d(&provider, 0, query.threshold, cfg)?;
            (num, den)
        }
        QueryDates::TwoDates { t0, t1 } => {
            let provider = WishartTwoDateMgf::new(model, t0, t1, cond.theta.clone(), dirs)?;
            let num = inversion::truncated_cross_moment_1d(&provider, 0, &orders, query.threshold, cfg)?;
            let den = inversion::truncated_moment_1d(&provider, 0, query.threshold, cfg)?;
            (num, den)
        }
    };
    if den.value < 1e-12 {
        return Err(RiskError::ZeroTailProbability(den.value));
    }
    let value = num.value / den.value;
    let abs_error_estimate = (num.abs_error_estimate + value.abs() * den.abs_error_estimate) / den.value;
    let mut warnings = num.warnings;
    warnings.extend(den.warnings);
    warnings.dedup();
    Ok(MomentResult { value, abs_error_estimate, evaluations: num.evaluations + den.evaluations, warnings })
}

fn one_target_query(payoff: &SpectralPayoff, threshold: f64, dates: QueryDates, order: u32) -> TailQuery {
    TailQuery {
        conditioner: payoff.clone(),
        threshold,
        targets: vec![(payoff.clone(), order)],
        dates,
    }
}

/// Tail conditional expectation E[Y | Y > threshold].
pub fn tce(
    model: &WishartModel,
    payoff: &SpectralPayoff,
    threshold: f64,
    dates: QueryDates,
    cfg: &InversionConfig,
) -> Result<f64, RiskError> {
    Ok(conditional_moment(model, &one_target_query(payoff, threshold, dates, 1), cfg)?.value)
}

/// Tail variance E[Y^2 | Y > y*] - E[Y | Y > y*]^2.
pub fn tail_variance(
    model: &WishartModel,
    payoff: &SpectralPayoff,
    threshold: f64,
    dates: QueryDates,
    cfg: &InversionConfig,
) -> Result<f64, RiskError> {
    let m1 = conditional_moment(model, &one_target_query(payoff, threshold, dates, 1), cfg)?.value;
    let m2 = conditional_moment(model, &one_target_query(payoff, threshold, dates, 2), cfg)?.value;
    let tv = m2 - m1 * m1;
    if tv < 0.0 {
        return Err(RiskError::NegativeVariance(tv));
    }
    Ok(tv)
}

/// Tail covariance E[Y1 Y2 | S > s*] - E[Y1 | S > s*] E[Y2 | S > s*].
pub fn tail_covariance(
    model: &WishartModel,
    payoff_a: &SpectralPayoff,
    payoff_b: &SpectralPayoff,
    conditioner: &SpectralPayoff,
    threshold: f64,
    t: f64,
    cfg: &InversionConfig,
) -> Result<f64, RiskError> {
    let dates = QueryDates::OneDate(t);
    let q = |targets: Vec<(SpectralPayoff, u32)>| TailQuery {
        conditioner: conditioner.clone(),
        threshold,
        targets,
        dates,
    };
    let cross = conditional_moment(model, &q(vec![(payoff_a.clone(), 1), (payoff_b.clone(), 1)]), cfg)?.value;
    let ma = conditional_moment(model, &q(vec![(payoff_a.clone(), 1)]), cfg)?.value;
    let mb = conditional_moment(model, &q(vec![(payoff_b.clone(), 1)]), cfg)?.value;
    Ok(cross - ma * mb)
}

/// Standardized third central tail moment.
pub fn tail_skewness(
    model: &WishartModel,
    payoff: &SpectralPayoff,
    threshold: f64,
    dates: QueryDates,
    cfg: &InversionConfig,
) -> Result<f64, RiskError> {
    let m1 = conditional_moment(model, &one_target_query(payoff, threshold, dates, 1), cfg)?.value;
    let m2 = conditional_moment(model, &one_target_query(payoff, threshold, dates, 2), cfg)?.value;
    let m3 = conditional_moment(model, &one_target_query(payoff, threshold, dates, 3), cfg)?.value;
    let tv = m2 - m1 * m1;
    if tv < 0.0 {
        return Err(RiskError::NegativeVariance(tv));
    }
    let third_central = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;
    Ok(third_central / tv.powf(1.5))
}

/// Tail skewness of a sum through its component decomposition: the third
/// central moment expands into conditional joint moments of the parts.
pub fn tail_skewness_sum_decomposition(
    model: &WishartModel,
    components: &[SpectralPayoff],
    conditioner: &SpectralPayoff,
    threshold: f64,
    t: f64,
    cfg: &InversionConfig,
) -> Result<f64, RiskError> {
    if components.len() != 2 {
        return Err(RiskError::InvalidQuery("sum decomposition is implemented for two components".into()));
    }
    let dates = QueryDates::OneDate(t);
    let q = |targets: Vec<(SpectralPayoff, u32)>| TailQuery {
        conditioner: conditioner.clone(),
        threshold,
        targets,
        dates,
    };
    let (y1, y2) = (&components[0], &components[1]);
    let m = |targets: Vec<(SpectralPayoff, u32)>| -> Result<f64, RiskError> {
        Ok(conditional_moment(model, &q(targets), cfg)?.value)
    };
    // E[S^3 | .] by the binomial expansion over components, then the
    // central moment via E[S^3] - 3 TCE E[S^2] + 2 TCE^3
    let y1_3 = m(vec![(y1.clone(), 3)])?;
    let y1_2y2 = m(vec![(y1.clone(), 2), (y2.clone(), 1)])?;
    let y1y2_2 = m(vec![(y1.clone(), 1), (y2.clone(), 2)])?;
    let y2_3 = m(vec![(y2.clone(), 3)])?;
    let tce_s = m(vec![(y1.clone(), 1)])? + m(vec![(y2.clone(), 1)])?;
    let s2 = m(vec![(y1.clone(), 2)])? + 2.0 * m(vec![(y1.clone(), 1), (y2.clone(), 1)])? + m(vec![(y2.clone(), 2)])?;
    let tv_s = s2 - tce_s * tce_s;
    if tv_s < 0.0 {
        return Err(RiskError::NegativeVariance(tv_s));
    }
    let e_s3 = y1_3 + 3.0 * y1_2y2 + 3.0 * y1y2_2 + y2_3;
    let third_central = e_s3 - 3.0 * tce_s * s2 + 2.0 * tce_s * tce_s * tce_s;
    Ok(third_central / tv_s.powf(1.5))
}

/// One row of the dependence-effect comparison.
#[derive(Clone, Debug)]
pub struct DependenceRow {
    pub label: String,
    pub value: f64,
    pub tilde_value: f64,
    /// 100 (tilde - value) / value.
    pub diff_pct: f64,
}

/// Evaluates each query under the model and under its zero-dependence
/// equivalent, reporting values and percent differences.
pub fn dependence_report(
    model: &WishartModel,
    queries: &[TailQuery],
    cfg: &InversionConfig,
) -> Result<Vec<DependenceRow>, RiskError> {
    let tilde_params = zero_dependence_equivalent(model.params())?;
    let tilde = WishartModel::new(tilde_params)?;
    queries
        .par_iter()
        .map(|q| {
            let value = conditional_moment(model, q, cfg)?.value;
            let tilde_value = conditional_moment(&tilde, q, cfg)?.value;
            Ok(DependenceRow {
                label: q.label(),
                value,
                tilde_value,
                diff_pct: 100.0 * (tilde_value - value) / value,
            })
        })
        .collect()
}
