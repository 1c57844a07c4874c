//! Adaptive 15-point Gauss-Kronrod quadrature on finite intervals.

/// Kronrod abscissae (positive half), 15-point rule.
pub(crate) const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];

/// Kronrod weights matching `XGK`.
pub(crate) const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// Embedded 7-point Gauss weights.
pub(crate) const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

pub(crate) struct GkResult {
    pub value: f64,
    pub error: f64,
}

/// QUADPACK's conservative error rescaling: inflate the raw |K - G|
/// difference against the integrand's variation, floor at roundoff.
fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

pub(crate) fn gk15<F, E>(f: &mut F, a: f64, b: f64) -> Result<GkResult, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut fv1 = [0.0f64; 7];
    let mut fv2 = [0.0f64; 7];
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    let mut res_abs = resk.abs();
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x)?;
        let f2 = f(c + x)?;
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let err = ((resk - resg) * h).abs();
    Ok(GkResult {
        value: resk * h,
        error: rescale_error(err, res_abs * h.abs(), res_asc * h.abs()),
    })
}

pub(crate) struct AdaptiveOutcome {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Bisection-based adaptive integration driven by a worst-interval heap.
pub(crate) fn adaptive<F, E>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
    max_subdivisions: usize,
) -> Result<AdaptiveOutcome, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    use std::cmp::Ordering;
    use std::collections::BinaryHeap;

    struct Interval {
        err: f64,
        a: f64,
        b: f64,
        val: f64,
    }
    impl PartialEq for Interval {
        fn eq(&self, other: &Self) -> bool {
            self.err == other.err
        }
    }
    impl Eq for Interval {}
    impl PartialOrd for Interval {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Interval {
        fn cmp(&self, other: &Self) -> Ordering {
            self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
        }
    }

    let mut evals = 15usize;
    let first = gk15(f, a, b)?;
    let mut total_val = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(Interval { err: first.error, a, b, val: first.value });
    let mut splits = 0usize;
    while total_err > tol && splits < max_subdivisions {
        let worst = match heap.pop() {
            Some(w) => w,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            heap.push(Interval { err: 0.0, ..worst });
            break;
        }
        let left = gk15(f, worst.a, mid)?;
        let right = gk15(f, mid, worst.b)?;
        evals += 30;
        total_val += left.value + right.value - worst.val;
        total_err += left.error + right.error - worst.err;
        heap.push(Interval { err: left.error, a: worst.a, b: mid, val: left.value });
        heap.push(Interval { err: right.error, a: mid, b: worst.b, val: right.value });
        splits += 1;
    }
    Ok(AdaptiveOutcome { value: total_val, error: total_err.max(0.0), evaluations: evals, converged: total_err <= tol })
}
