//! Truncated multivariate Taylor (jet) arithmetic over complex
//! coefficients, plus matrices with jet entries.
//!
//! A jet truncated at orders (q1, .., qk) carries every mixed coefficient
//! c_{i1..ik} with i_j <= q_j. Products follow the Cauchy convolution
//! rule, so lifting the closed-form MGF exponent through this algebra
//! yields exact mixed derivatives of any order without symbolic work or
//! finite differencing.

use crate::matcore::{CMat, MatError};
use num_complex::Complex64;

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Truncated Taylor expansion in one or more formal variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    shape: Vec<usize>,
    c: Vec<Complex64>,
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

fn decode(mut lin: usize, strides: &[usize]) -> Vec<usize> {
    strides
        .iter()
        .map(|&s| {
            let d = lin / s;
            lin %= s;
            d
        })
        .collect()
}

impl Jet {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Jet { shape: shape.to_vec(), c: vec![C_ZERO; len] }
    }

    pub fn constant(value: Complex64, shape: &[usize]) -> Self {
        let mut j = Self::zeros(shape);
        j.c[0] = value;
        j
    }

    /// The jet of the formal variable `var` around base point `base`.
    pub fn variable(base: Complex64, var: usize, shape: &[usize]) -> Self {
        let mut j = Self::constant(base, shape);
        if shape[var] > 1 {
            let s = strides(shape);
            j.c[s[var]] = C_ONE;
        }
        j
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Highest total degree the truncation can hold.
    pub fn total_degree(&self) -> usize {
        self.shape.iter().map(|&s| s - 1).sum()
    }

    pub fn coeff(&self, idx: &[usize]) -> Complex64 {
        let s = strides(&self.shape);
        let lin: usize = idx.iter().zip(&s).map(|(&i, &st)| i * st).sum();
        self.c[lin]
    }

    /// Mixed partial derivative: coefficient times the factorials.
    pub fn derivative(&self, idx: &[usize]) -> Complex64 {
        let fact: f64 = idx.iter().map(|&i| factorial(i)).product();
        self.coeff(idx) * fact
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        let c = self.c.iter().zip(&other.c).map(|(&a, &b)| a + b).collect();
        Jet { shape: self.shape.clone(), c }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        let c = self.c.iter().zip(&other.c).map(|(&a, &b)| a - b).collect();
        Jet { shape: self.shape.clone(), c }
    }

    pub fn scale(&self, z: Complex64) -> Self {
        let c = self.c.iter().map(|&a| a * z).collect();
        Jet { shape: self.shape.clone(), c }
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        let st = strides(&self.shape);
        let mut out = Self::zeros(&self.shape);
        for (ia, &ca) in self.c.iter().enumerate() {
            if ca == C_ZERO {
                continue;
            }
            let ma = decode(ia, &st);
            for (ib, &cb) in other.c.iter().enumerate() {
                if cb == C_ZERO {
                    continue;
                }
                let mb = decode(ib, &st);
                if ma.iter().zip(&mb).zip(&self.shape).all(|((&a, &b), &s)| a + b < s) {
                    out.c[ia + ib] += ca * cb;
                }
            }
        }
        out
    }

    /// Strips the constant term.
    fn nilpotent_part(&self) -> Self {
        let mut j = self.clone();
        j.c[0] = C_ZERO;
        j
    }

    /// exp of the jet: e^{c0} * sum_k n^k / k! with n the constant-free part.
    pub fn exp(&self) -> Self {
        let scale = self.c[0].exp();
        let n = self.nilpotent_part();
        let mut sum = Jet::constant(C_ONE, &self.shape);
        let mut term = Jet::constant(C_ONE, &self.shape);
        for k in 1..=self.total_degree() {
            term = term.mul(&n).scale(Complex64::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
        }
        sum.scale(scale)
    }

    /// 1 / jet, requiring a nonzero constant term.
    pub fn recip(&self) -> Result<Self, MatError> {
        let c0 = self.c[0];
        if c0.norm() == 0.0 {
            return Err(MatError::Singular { pivot: 0.0, threshold: 0.0 });
        }
        let u = self.scale(C_ONE / c0).nilpotent_part();
        let mut sum = Jet::constant(C_ONE, &self.shape);
        let mut term = Jet::constant(C_ONE, &self.shape);
        for _ in 1..=self.total_degree() {
            term = term.mul(&u).scale(-C_ONE);
            sum = sum.add(&term);
        }
        Ok(sum.scale(C_ONE / c0))
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Square matrix whose entries are jets, stored as one coefficient matrix
/// per multi-index.
#[derive(Clone, Debug)]
pub struct MatJet {
    n: usize,
    shape: Vec<usize>,
    coeffs: Vec<CMat>,
}

impl MatJet {
    pub fn from_const(base: CMat, shape: &[usize]) -> Self {
        let n = base.dim();
        let len = shape.iter().product();
        let mut coeffs = vec![CMat::zeros(n); len];
        coeffs[0] = base;
        MatJet { n, shape: shape.to_vec(), coeffs }
    }

    /// Sets the first-order coefficient of variable `var`.
    pub fn set_linear(&mut self, var: usize, mat: CMat) {
        debug_assert_eq!(mat.dim(), self.n);
        if self.shape[var] > 1 {
            let s = strides(&self.shape);
            self.coeffs[s[var]] = mat;
        }
    }

    pub fn constant_term(&self) -> &CMat {
        &self.coeffs[0]
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.add(b)).collect();
        MatJet { n: self.n, shape: self.shape.clone(), coeffs }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        let st = strides(&self.shape);
        let len = self.coeffs.len();
        let mut coeffs = vec![CMat::zeros(self.n); len];
        for ia in 0..len {
            if self.coeffs[ia].max_abs() == 0.0 {
                continue;
            }
            let ma = decode(ia, &st);
            for ib in 0..len {
                if other.coeffs[ib].max_abs() == 0.0 {
                    continue;
                }
                let mb = decode(ib, &st);
                if ma.iter().zip(&mb).zip(&self.shape).all(|((&a, &b), &s)| a + b < s) {
                    coeffs[ia + ib] = coeffs[ia + ib].add(&self.coeffs[ia].matmul(&other.coeffs[ib]));
                }
            }
        }
        MatJet { n: self.n, shape: self.shape.clone(), coeffs }
    }

    pub fn mul_left(&self, m: &CMat) -> Self {
        let coeffs = self.coeffs.iter().map(|c| m.matmul(c)).collect();
        MatJet { n: self.n, shape: self.shape.clone(), coeffs }
    }

    pub fn mul_right(&self, m: &CMat) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c.matmul(m)).collect();
        MatJet { n: self.n, shape: self.shape.clone(), coeffs }
    }

    pub fn scale(&self, z: Complex64) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c.mul_scalar(z)).collect();
        MatJet { n: self.n, shape: self.shape.clone(), coeffs }
    }

    pub fn trace(&self) -> Jet {
        let c = self.coeffs.iter().map(|m| m.trace()).collect();
        Jet { shape: self.shape.clone(), c }
    }

    /// tr(A X) for a constant matrix X, as a jet.
    pub fn trace_product(&self, x: &CMat) -> Jet {
        let c = self.coeffs.iter().map(|m| m.matmul(x).trace()).collect();
        Jet { shape: self.shape.clone(), c }
    }

    fn nilpotent_part(&self) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = CMat::zeros(self.n);
        out
    }

    fn total_degree(&self) -> usize {
        self.shape.iter().map(|&s| s - 1).sum()
    }

    fn identity_jet(&self) -> Self {
        Self::from_const(CMat::identity(self.n), &self.shape)
    }

    /// Inverse of the jet matrix given the inverse of its constant term:
    /// with M = M0 (I + N), N constant-free, the Neumann series in N is
    /// exact once it reaches the truncation degree.
    pub fn inverse_with(&self, base_inv: &CMat) -> Self {
        let n_jet = self.nilpotent_part().mul_left(base_inv); // M0^{-1}(M - M0)
        let mut sum = self.identity_jet();
        let mut term = self.identity_jet();
        for _ in 1..=self.total_degree() {
            term = term.matmul(&n_jet).scale(-C_ONE);
            sum = sum.add(&term);
        }
        sum.mul_right(base_inv)
    }

    /// log det of the jet matrix: logdet0 + tr log(I + N) with the same
    /// constant-free N as in `inverse_with`.
    pub fn log_det_with(&self, logdet0: Complex64, base_inv: &CMat) -> Jet {
        let n_jet = self.nilpotent_part().mul_left(base_inv);
        let mut acc = Jet::constant(logdet0, &self.shape);
        let mut pow = self.identity_jet();
        for k in 1..=self.total_degree() {
            pow = pow.matmul(&n_jet);
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            acc = acc.add(&pow.trace().scale(Complex64::new(sign / k as f64, 0.0)));
        }
        acc
    }
}
