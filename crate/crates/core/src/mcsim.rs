//! Monte Carlo oracle: exact Wishart sampling for integer beta through
//! the sum-of-OU-outer-products construction, an Euler fallback for
//! general parameters, stationary matrix-gamma sampling, and conditional
//! moment estimators with delta-method standard errors.
//!
//! Verification-only: acceptance checks bracket the analytic engine with
//! these estimates; nothing in the measure pipeline depends on sampling.

use crate::matcore::{GenMat, MatError, SymMat};
use crate::wishart::{OmegaMode, WishartError, WishartModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("no draws exceed the threshold; conditional estimate undefined")]
    EmptyTail,
    #[error(transparent)]
    Wishart(#[from] WishartError),
    #[error(transparent)]
    Mat(#[from] MatError),
}

#[derive(Clone, Debug)]
pub enum Scheme {
    /// Exact in distribution; requires the Bru case with integer beta.
    ExactOuSum,
    /// Full-truncation Euler discretization of the SDE.
    Euler { dt: f64 },
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { paths: 1_000_000, seed: 0x5EED, scheme: Scheme::ExactOuSum }
    }
}

const CHUNK: usize = 1 << 14;

/// Sampled symmetric states in columnar layout: one column per upper
/// triangle entry (i <= j), one row per path.
#[derive(Clone, Debug)]
pub struct Draws {
    n: usize,
    cols: Vec<Vec<f64>>,
}

impl Draws {
    fn with_capacity(n: usize, paths: usize) -> Self {
        let cols = vec![Vec::with_capacity(paths); n * (n + 1) / 2];
        Draws { n, cols }
    }

    fn col_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // upper-triangle row-major offset
        i * self.n - i * (i + 1) / 2 + j
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.cols[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.cols[self.col_index(i, j)]
    }

    fn push_state(&mut self, x: &SymMat) {
        for i in 0..self.n {
            for j in i..self.n {
                let idx = self.col_index(i, j);
                self.cols[idx].push(x.get(i, j));
            }
        }
    }

    fn append(&mut self, other: Draws) {
        for (dst, src) in self.cols.iter_mut().zip(other.cols) {
            dst.extend(src);
        }
    }

    /// tr[theta x] per path.
    pub fn payoff_values(&self, theta: &SymMat) -> Vec<f64> {
        let paths = self.len();
        let mut out = vec![0.0; paths];
        for i in 0..self.n {
            for j in 0..self.n {
                let w = theta.get(i, j);
                if w == 0.0 {
                    continue;
                }
                let col = self.entry(i, j);
                for (o, &v) in out.iter_mut().zip(col) {
                    *o += w * v;
                }
            }
        }
        out
    }

    /// Columnar text dump: header of entry names, one row per path.
    pub fn write_columnar<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut names = Vec::new();
        for i in 0..self.n {
            for j in i..self.n {
                names.push(format!("x{}{}", i + 1, j + 1));
            }
        }
        writeln!(w, "{}", names.join(" "))?;
        for p in 0..self.len() {
            let row: Vec<String> = self.cols.iter().map(|c| format!("{:.12e}", c[p])).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed ^ (chunk as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn exact_beta(model: &WishartModel) -> Result<usize, SimError> {
    match model.params().mode {
        OmegaMode::Bru { beta } => {
            let k = beta.round();
            if (beta - k).abs() > 1e-12 || k < (model.dim() + 1) as f64 {
                return Err(SimError::InvalidConfig(format!(
                    "exact OU-sum sampling needs integer beta >= n + 1, got beta = {beta}"
                )));
            }
            Ok(k as usize)
        }
        OmegaMode::General { .. } => Err(SimError::InvalidConfig(
            "exact OU-sum sampling needs the Bru parameterization".into(),
        )),
    }
}

struct OuStep {
    e_tm: GenMat,
    chol: GenMat,
}

impl OuStep {
    fn build(model: &WishartModel, dt: f64) -> Result<Self, SimError> {
        let prop = model.propagator(dt)?;
        let chol = prop
            .chol_varsigma
            .clone()
            .ok_or_else(|| SimError::InvalidConfig("varsigma not positive definite at this horizon".into()))?;
        Ok(OuStep { e_tm: prop.e_tm.clone(), chol })
    }

    fn advance(&self, v: &mut [Vec<f64>], rng: &mut ChaCha12Rng) {
        let n = self.e_tm.dim();
        let mut z = vec![0.0; n];
        for factor in v.iter_mut() {
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            let mut out = vec![0.0; n];
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    s += self.e_tm[(i, j)] * factor[j];
                }
                // lower-triangular noise factor
                for j in 0..=i {
                    s += self.chol[(i, j)] * z[j];
                }
                out[i] = s;
            }
            factor.copy_from_slice(&out);
        }
    }
}

fn initial_factors(model: &WishartModel, beta: usize) -> Result<Vec<Vec<f64>>, SimError> {
    let n = model.dim();
    let l = model.params().x0.cholesky()?;
    let mut v = vec![vec![0.0; n]; beta];
    for (k, factor) in v.iter_mut().enumerate().take(n) {
        for i in 0..n {
            factor[i] = l[(i, k)];
        }
    }
    Ok(v)
}

fn outer_sum(factors: &[Vec<f64>], n: usize) -> SymMat {
    let mut x = SymMat::zeros(n);
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for f in factors {
                s += f[i] * f[j];
            }
            x.set_sym(i, j, s);
        }
    }
    x
}

/// Draws of x_t; exact for integer-beta Bru parameters, Euler otherwise.
pub fn sample_xt(model: &WishartModel, t: f64, cfg: &SimConfig) -> Result<Draws, SimError> {
    Ok(sample_dates(model, &[t], cfg)?.pop().unwrap())
}

/// Joint draws (x_{t0}, x_{t1}) along the same paths.
pub fn sample_two_dates(
    model: &WishartModel,
    t0: f64,
    t1: f64,
    cfg: &SimConfig,
) -> Result<(Draws, Draws), SimError> {
    if !(0.0 < t0 && t0 < t1) {
        return Err(SimError::InvalidConfig(format!("need 0 < t0 < t1, got ({t0}, {t1})")));
    }
    let mut pair = sample_dates(model, &[t0, t1], cfg)?;
    let d1 = pair.pop().unwrap();
    let d0 = pair.pop().unwrap();
    Ok((d0, d1))
}

fn sample_dates(model: &WishartModel, dates: &[f64], cfg: &SimConfig) -> Result<Vec<Draws>, SimError> {
    if cfg.paths == 0 {
        return Err(SimError::InvalidConfig("paths must be at least 1".into()));
    }
    match cfg.scheme {
        Scheme::ExactOuSum => sample_dates_exact(model, dates, cfg),
        Scheme::Euler { dt } => sample_dates_euler(model, dates, cfg, dt),
    }
}

fn sample_dates_exact(model: &WishartModel, dates: &[f64], cfg: &SimConfig) -> Result<Vec<Draws>, SimError> {
    let beta = exact_beta(model)?;
    let n = model.dim();
    // transition kernels between consecutive dates
    let mut steps = Vec::with_capacity(dates.len());
    let mut prev = 0.0;
    for &t in dates {
        steps.push(OuStep::build(model, t - prev)?);
        prev = t;
    }
    let init = initial_factors(model, beta)?;
    let chunks: Vec<(usize, usize)> = chunk_ranges(cfg.paths);
    let parts: Result<Vec<Vec<Draws>>, SimError> = chunks
        .par_iter()
        .map(|&(chunk_idx, count)| {
            let mut rng = chunk_rng(cfg.seed, chunk_idx);
            let mut out: Vec<Draws> = dates.iter().map(|_| Draws::with_capacity(n, count)).collect();
            for _ in 0..count {
                let mut factors = init.clone();
                for (step, draws) in steps.iter().zip(out.iter_mut()) {
                    step.advance(&mut factors, &mut rng);
                    draws.push_state(&outer_sum(&factors, n));
                }
            }
            Ok(out)
        })
        .collect();
    merge_parts(parts?, dates.len(), n, cfg.paths)
}

fn sample_dates_euler(
    model: &WishartModel,
    dates: &[f64],
    cfg: &SimConfig,
    dt: f64,
) -> Result<Vec<Draws>, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::InvalidConfig("Euler step must be positive".into()));
    }
    let n = model.dim();
    let omega = model.params().omega();
    let m = model.params().m.clone();
    let sigma = model.params().sigma.clone();
    let x0 = model.params().x0.clone();
    let chunks = chunk_ranges(cfg.paths);
    let parts: Result<Vec<Vec<Draws>>, SimError> = chunks
        .par_iter()
        .map(|&(chunk_idx, count)| {
            let mut rng = chunk_rng(cfg.seed, chunk_idx);
            let mut out: Vec<Draws> = dates.iter().map(|_| Draws::with_capacity(n, count)).collect();
            for _ in 0..count {
                let mut x = x0.clone();
                let mut t_now = 0.0;
                for (date_idx, &t_target) in dates.iter().enumerate() {
                    while t_now < t_target - 1e-15 {
                        let h = dt.min(t_target - t_now);
                        x = euler_step(&x, &omega, &m, &sigma, h, &mut rng);
                        t_now += h;
                    }
                    out[date_idx].push_state(&x);
                }
            }
            Ok(out)
        })
        .collect();
    merge_parts(parts?, dates.len(), n, cfg.paths)
}

fn euler_step(
    x: &SymMat,
    omega: &SymMat,
    m: &GenMat,
    sigma: &SymMat,
    dt: f64,
    rng: &mut ChaCha12Rng,
) -> SymMat {
    let n = x.dim();
    // full truncation: sqrt of the eigenvalue-clamped state
    let root = x.sqrt_clamped();
    let mut noise = GenMat::zeros(n);
    let scale = dt.sqrt();
    for i in 0..n {
        for j in 0..n {
            noise[(i, j)] = scale * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let drift = omega
        .as_mat()
        .add(&m.matmul(x.as_mat()))
        .add(&x.as_mat().matmul(&m.transpose()))
        .scale(dt);
    let diff = root.as_mat().matmul(&noise).matmul(sigma.as_mat());
    let incr = drift.add(&diff).add(&diff.transpose());
    SymMat::symmetrize(&x.as_mat().add(&incr))
}

fn chunk_ranges(paths: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut done = 0usize;
    let mut idx = 0usize;
    while done < paths {
        let count = CHUNK.min(paths - done);
        out.push((idx, count));
        done += count;
        idx += 1;
    }
    out
}

fn merge_parts(parts: Vec<Vec<Draws>>, dates: usize, n: usize, paths: usize) -> Result<Vec<Draws>, SimError> {
    let mut out: Vec<Draws> = (0..dates).map(|_| Draws::with_capacity(n, paths)).collect();
    for part in parts {
        for (dst, src) in out.iter_mut().zip(part) {
            dst.append(src);
        }
    }
    Ok(out)
}

/// Stationary matrix-gamma draws: sums of `beta` outer products of
/// N(0, varsigma_inf) vectors.
pub fn sample_stationary(
    beta: usize,
    varsigma_inf: &SymMat,
    paths: usize,
    seed: u64,
) -> Result<Draws, SimError> {
    let n = varsigma_inf.dim();
    if beta < n + 1 {
        return Err(SimError::InvalidConfig(format!("integer beta {beta} must be at least n + 1")));
    }
    let l = varsigma_inf.cholesky()?;
    let chunks = chunk_ranges(paths);
    let parts: Vec<Draws> = chunks
        .par_iter()
        .map(|&(chunk_idx, count)| {
            let mut rng = chunk_rng(seed, chunk_idx);
            let mut draws = Draws::with_capacity(n, count);
            let mut v = vec![0.0; n];
            for _ in 0..count {
                let mut factors = Vec::with_capacity(beta);
                for _ in 0..beta {
                    for zi in v.iter_mut() {
                        *zi = rng.sample(StandardNormal);
                    }
                    let mut f = vec![0.0; n];
                    for i in 0..n {
                        let mut s = 0.0;
                        for j in 0..=i {
                            s += l[(i, j)] * v[j];
                        }
                        f[i] = s;
                    }
                    factors.push(f);
                }
                draws.push_state(&outer_sum(&factors, n));
            }
            draws
        })
        .collect();
    let mut out = Draws::with_capacity(n, paths);
    for p in parts {
        out.append(p);
    }
    Ok(out)
}

/// Ratio estimator of E[w | cond > threshold] with its delta-method
/// standard error.
pub fn estimate_conditional_moment(
    weights: &[f64],
    cond: &[f64],
    threshold: f64,
) -> Result<(f64, f64), SimError> {
    assert_eq!(weights.len(), cond.len());
    let mut count = 0usize;
    let mut sum = 0.0;
    for (&w, &c) in weights.iter().zip(cond) {
        if c > threshold {
            count += 1;
            sum += w;
        }
    }
    if count == 0 {
        return Err(SimError::EmptyTail);
    }
    let est = sum / count as f64;
    let mut var = 0.0;
    for (&w, &c) in weights.iter().zip(cond) {
        if c > threshold {
            var += (w - est) * (w - est);
        }
    }
    let se = var.sqrt() / count as f64;
    Ok((est, se))
}

/// Plain sample mean and standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
