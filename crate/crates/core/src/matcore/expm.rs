//! Matrix exponential by scaling-and-squaring with a [13/13] Pade
//! approximant (Higham 2005). At the dimensions used here the order-13
//! form is applied unconditionally; only the scaling power adapts.

use super::{Lu, Mat, MatError, Scalar};

const THETA_13: f64 = 5.371920351148152;

const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

pub fn expm<T: Scalar>(a: &Mat<T>) -> Result<Mat<T>, MatError> {
    if !a.is_finite() {
        return Err(MatError::NonFinite);
    }
    let norm = a.norm_1();
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a_scaled = a.scale(0.5_f64.powi(s));
    let mut r = pade_13(&a_scaled)?;
    for _ in 0..s {
        r = r.matmul(&r);
    }
    Ok(r)
}

fn pade_13<T: Scalar>(a: &Mat<T>) -> Result<Mat<T>, MatError> {
    let n = a.dim();
    let eye = Mat::identity(n);
    let b: Vec<T> = PADE_13.iter().map(|&c| T::from_f64(c)).collect();
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    // u = A [ A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I ]
    let w1 = a6.mul_scalar(b[13]).add(&a4.mul_scalar(b[11])).add(&a2.mul_scalar(b[9]));
    let w2 = a6
        .mul_scalar(b[7])
        .add(&a4.mul_scalar(b[5]))
        .add(&a2.mul_scalar(b[3]))
        .add(&eye.mul_scalar(b[1]));
    let u = a.matmul(&a6.matmul(&w1).add(&w2));

    // v = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let z1 = a6.mul_scalar(b[12]).add(&a4.mul_scalar(b[10])).add(&a2.mul_scalar(b[8]));
    let v = a6
        .matmul(&z1)
        .add(&a6.mul_scalar(b[6]))
        .add(&a4.mul_scalar(b[4]))
        .add(&a2.mul_scalar(b[2]))
        .add(&eye.mul_scalar(b[0]));

    // (v - u) r = (v + u)
    let lhs = v.sub(&u);
    let rhs = v.add(&u);
    Lu::factor(&lhs)?.solve_mat(&rhs)
}
