//! Tail mean-variance capital allocation: minimize
//! E[sum (Y_i - p_i)^2 | Z > z*] + gamma Var(sum (Y_i - p_i)^2 | Z > z*)
//! over allocations with sum p_i = c, every conditional moment supplied
//! analytically by the risk-measure layer.

use crate::inversion::{self, InversionConfig, InversionError};
use crate::riskmeasures::providers::WishartPayoffMgf;
use crate::riskmeasures::{conditional_moment, QueryDates, RiskError, SpectralPayoff, TailQuery};
use crate::wishart::WishartModel;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AllocationError {
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Inversion(#[from] InversionError),
    #[error("invalid allocation problem: {0}")]
    Invalid(String),
    #[error("optimizer did not reach the gradient tolerance after {0} multi-starts")]
    NonConvergence(usize),
}

#[derive(Clone, Debug)]
pub enum ThresholdSpec {
    Absolute(f64),
    /// Value-at-risk level; the threshold solves F-bar(z*) = 1 - level.
    VarLevel(f64),
}

#[derive(Clone, Debug)]
pub struct AllocationProblem {
    pub losses: Vec<SpectralPayoff>,
    pub conditioner: SpectralPayoff,
    pub threshold: ThresholdSpec,
    pub budget: f64,
    pub gamma: f64,
    pub t: f64,
}

impl AllocationProblem {
    fn validate(&self) -> Result<(), AllocationError> {
        if self.losses.len() < 2 {
            return Err(AllocationError::Invalid("at least two losses are required".into()));
        }
        if !(self.budget > 0.0) {
            return Err(AllocationError::Invalid("budget must be positive".into()));
        }
        if !(self.gamma >= 0.0) {
            return Err(AllocationError::Invalid("gamma must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Conditional moments E[prod Y_i^{k_i} | Z > z*] for all multi-indices
/// with total order up to four (the variance term is quartic in p).
#[derive(Clone, Debug)]
pub struct MomentTable {
    n: usize,
    entries: HashMap<Vec<u32>, f64>,
}

impl MomentTable {
    pub fn get(&self, idx: &[u32]) -> f64 {
        debug_assert_eq!(idx.len(), self.n);
        if idx.iter().all(|&k| k == 0) {
            return 1.0;
        }
        self.entries[idx]
    }

    pub fn single(&self, i: usize, order: u32) -> f64 {
        let mut idx = vec![0u32; self.n];
        idx[i] = order;
        self.get(&idx)
    }

    pub fn pair(&self, i: usize, a: u32, j: usize, b: u32) -> f64 {
        let mut idx = vec![0u32; self.n];
        idx[i] += a;
        idx[j] += b;
        self.get(&idx)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn multi_indices(n: usize, max_total: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, budget: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for k in 0..=budget {
            prefix.push(k);
            rec(n, budget - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, max_total, &mut Vec::new(), &mut out);
    out
}

/// Resolves a quantile-style threshold to an absolute one.
pub fn resolve_threshold(
    model: &WishartModel,
    problem: &AllocationProblem,
    cfg: &InversionConfig,
) -> Result<f64, AllocationError> {
    match problem.threshold {
        ThresholdSpec::Absolute(z) => Ok(z),
        ThresholdSpec::VarLevel(level) => {
            if !(0.0 < level && level < 1.0) {
                return Err(AllocationError::Invalid(format!("VaR level {level} must lie in (0, 1)")));
            }
            let provider = WishartPayoffMgf::new(model, problem.t, problem.conditioner.theta.clone(), Vec::new())
                .map_err(RiskError::from)?;
            Ok(inversion::quantile(&provider, 1.0 - level, cfg)?)
        }
    }
}

/// The full conditional-moment table behind the quartic objective.
pub fn conditional_moment_table(
    model: &WishartModel,
    problem: &AllocationProblem,
    z_star: f64,
    cfg: &InversionConfig,
) -> Result<MomentTable, AllocationError> {
    problem.validate()?;
    let n = problem.losses.len();
    let indices = multi_indices(n, 4);
    let entries: Result<Vec<(Vec<u32>, f64)>, AllocationError> = indices
        .par_iter()
        .map(|idx| {
            let targets: Vec<(SpectralPayoff, u32)> = problem
                .losses
                .iter()
                .zip(idx)
                .filter(|(_, &k)| k > 0)
                .map(|(p, &k)| (p.clone(), k))
                .collect();
            let query = TailQuery {
                conditioner: problem.conditioner.clone(),
                threshold: z_star,
                targets,
                dates: QueryDates::OneDate(problem.t),
            };
            let v = conditional_moment(model, &query, cfg)?.value;
            Ok((idx.clone(), v))
        })
        .collect();
    Ok(MomentTable { n, entries: entries?.into_iter().collect() })
}

/// The objective as a function of the allocation vector.
pub fn objective(table: &MomentTable, gamma: f64, p: &[f64]) -> f64 {
    let (et, et2) = expectations(table, p);
    et + gamma * (et2 - et * et)
}

fn expectations(table: &MomentTable, p: &[f64]) -> (f64, f64) {
    let n = p.len();
    let mut et = 0.0;
    for i in 0..n {
        et += table.single(i, 2) - 2.0 * p[i] * table.single(i, 1) + p[i] * p[i];
    }
    let binom = [1.0, 2.0, 1.0];
    let mut et2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for a in 0..=2u32 {
                for b in 0..=2u32 {
                    let ca = binom[a as usize] * (-p[i]).powi(2 - a as i32);
                    let cb = binom[b as usize] * (-p[j]).powi(2 - b as i32);
                    et2 += ca * cb * table.pair(i, a, j, b);
                }
            }
        }
    }
    (et, et2)
}

/// Analytic gradient of the objective.
fn gradient(table: &MomentTable, gamma: f64, p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let (et, _) = expectations(table, p);
    let binom = [1.0, 2.0, 1.0];
    let mut d_et = vec![0.0; n];
    for i in 0..n {
        d_et[i] = -2.0 * table.single(i, 1) + 2.0 * p[i];
    }
    let mut d_et2 = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            for a in 0..=2u32 {
                for b in 0..=2u32 {
                    let mom = table.pair(i, a, j, b);
                    let ca = binom[a as usize] * (-p[i]).powi(2 - a as i32);
                    let cb = binom[b as usize] * (-p[j]).powi(2 - b as i32);
                    // d/dp_i of ca (chain through -p_i)
                    if a < 2 {
                        let dca = -binom[a as usize] * (2 - a) as f64 * (-p[i]).powi(1 - a as i32);
                        d_et2[i] += dca * cb * mom;
                    }
                    if b < 2 {
                        let dcb = -binom[b as usize] * (2 - b) as f64 * (-p[j]).powi(1 - b as i32);
                        d_et2[j] += ca * dcb * mom;
                    }
                }
            }
        }
    }
    (0..n).map(|k| d_et[k] + gamma * (d_et2[k] - 2.0 * et * d_et[k])).collect()
}

#[derive(Clone, Debug)]
pub struct AllocationSolution {
    pub p: Vec<f64>,
    pub objective_value: f64,
    pub threshold: f64,
    pub gradient_norm: f64,
    pub moment_table: MomentTable,
}

/// Minimizes the quartic objective on the affine budget set by damped
/// Newton in reduced coordinates with random multi-starts.
pub fn solve(
    model: &WishartModel,
    problem: &AllocationProblem,
    cfg: &InversionConfig,
    multistart_seed: u64,
) -> Result<AllocationSolution, AllocationError> {
    problem.validate()?;
    let z_star = resolve_threshold(model, problem, cfg)?;
    let table = conditional_moment_table(model, problem, z_star, cfg)?;
    let n = problem.losses.len();
    let c = problem.budget;

    let expand = |q: &[f64]| -> Vec<f64> {
        let mut p = q.to_vec();
        p.push(c - q.iter().sum::<f64>());
        p
    };
    let reduced_grad = |q: &[f64]| -> Vec<f64> {
        let p = expand(q);
        let g = gradient(&table, problem.gamma, &p);
        (0..n - 1).map(|k| g[k] - g[n - 1]).collect()
    };
    let obj = |q: &[f64]| objective(&table, problem.gamma, &expand(q));

    let mut rng = StdRng::seed_from_u64(multistart_seed);
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let starts = 8usize;
    for s in 0..starts {
        let mut q: Vec<f64> = if s == 0 {
            // budget split evenly
            vec![c / n as f64; n - 1]
        } else {
            (0..n - 1).map(|_| rng.random_range(-c..2.0 * c)).collect()
        };
        for _ in 0..200 {
            let g = reduced_grad(&q);
            let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if gnorm <= 1e-12 {
                break;
            }
            // Hessian by central differences of the analytic gradient
            let m = n - 1;
            let mut hess = vec![vec![0.0; m]; m];
            let h = 1e-6 * (1.0 + q.iter().map(|x| x.abs()).fold(0.0, f64::max));
            for k in 0..m {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[k] += h;
                qm[k] -= h;
                let gp = reduced_grad(&qp);
                let gm = reduced_grad(&qm);
                for l in 0..m {
                    hess[l][k] = (gp[l] - gm[l]) / (2.0 * h);
                }
            }
            let step = solve_small(&hess, &g);
            let mut lambda = 1.0;
            let f0 = obj(&q);
            let mut accepted = false;
            for _ in 0..40 {
                let cand: Vec<f64> = q.iter().zip(&step).map(|(qi, si)| qi - lambda * si).collect();
                if obj(&cand) < f0 {
                    q = cand;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                // fall back to steepest descent
                let mut lambda = 1e-2;
                let mut moved = false;
                for _ in 0..60 {
                    let cand: Vec<f64> = q.iter().zip(&g).map(|(qi, gi)| qi - lambda * gi).collect();
                    if obj(&cand) < f0 {
                        q = cand;
                        moved = true;
                        break;
                    }
                    lambda *= 0.5;
                }
                if !moved {
                    break;
                }
            }
        }
        let g = reduced_grad(&q);
        let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let f = obj(&q);
        if best.as_ref().map_or(true, |(_, fb, _)| f < *fb) {
            best = Some((q, f, gnorm));
        }
    }
    let (q, f, gnorm) = best.ok_or(AllocationError::NonConvergence(starts))?;
    if gnorm > 1e-10 {
        return Err(AllocationError::NonConvergence(starts));
    }
    Ok(AllocationSolution {
        p: expand(&q),
        objective_value: f,
        threshold: z_star,
        gradient_norm: gnorm,
        moment_table: table,
    })
}

/// Dense Gaussian elimination for the tiny Newton systems.
fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut x = b.to_vec();
    for k in 0..n {
        let mut piv = k;
        for i in (k + 1)..n {
            if m[i][k].abs() > m[piv][k].abs() {
                piv = i;
            }
        }
        m.swap(k, piv);
        x.swap(k, piv);
        let d = m[k][k];
        if d.abs() < 1e-300 {
            // singular Hessian: gradient step
            return b.to_vec();
        }
        for i in (k + 1)..n {
            let f = m[i][k] / d;
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
            x[i] -= f * x[k];
        }
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            let xj = x[j];
            x[i] -= m[i][j] * xj;
        }
        x[i] /= m[i][i];
    }
    x
}

/// Brute-force optimality certificate for two losses: grid search over
/// p1 in [0, c] with the given step.
pub fn grid_certificate(table: &MomentTable, gamma: f64, budget: f64, step: f64) -> (f64, f64) {
    let mut best = (0.0, f64::INFINITY);
    let mut p1 = 0.0;
    while p1 <= budget + 1e-12 {
        let v = objective(table, gamma, &[p1, budget - p1]);
        if v < best.1 {
            best = (p1, v);
        }
        p1 += step;
    }
    best
}
