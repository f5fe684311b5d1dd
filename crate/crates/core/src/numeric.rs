//! Quadrature and log-domain helpers.

use crate::error::{Error, Result};

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
// Gauss 7-point weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 30;

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = K15_WEIGHTS[7] * fc;
    let mut g = G7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += K15_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G7_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature with bisection until the local
/// error estimate falls below `tol` scaled by the interval share.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a < b) {
        return Err(Error::Numeric(format!("bad interval [{a}, {b}]")));
    }
    let width = b - a;
    let mut stack = vec![(a, b, 0u32)];
    let mut total = 0.0;
    let mut comp = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        if !val.is_finite() {
            return Err(Error::Numeric(format!("nonfinite integrand on [{lo}, {hi}]")));
        }
        let budget = tol * (hi - lo) / width;
        // Below a billionth of the range the estimate is dominated by rounding
        // noise in the integrand; further bisection cannot improve it.
        if err <= budget.max(1e-15 * val.abs()) || depth >= MAX_DEPTH {
            // Kahan summation keeps the many small contributions exact enough.
            let y = val - comp;
            let t = total + y;
            comp = (t - total) - y;
            total = t;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Ok(total)
}

/// Integrates `f` over `[a, b]` when `f` may blow up like `(b - u)^{-1/2}`
/// at the upper end; the substitution `u = b - (b - a) t^2` removes the
/// singularity.
pub fn integrate_upper_sqrt_singular(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64> {
    let w = b - a;
    integrate(|t| 2.0 * w * t * f(b - w * t * t), 0.0, 1.0, tol)
}

/// Integrates over `[a, b]` splitting at the given interior breakpoints.
pub fn integrate_with_breaks(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<f64> {
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut sum = 0.0;
    for w in pts.windows(2) {
        sum += integrate(&f, w[0], w[1], tol / (pts.len() - 1) as f64)?;
    }
    Ok(sum)
}

/// `log(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mut acc = LogSum::default();
    for &x in xs {
        acc.push(x);
    }
    acc.ln()
}

/// Running `log sum exp` kept as a maximum and a scaled sum, so that merging
/// shards is associative and equal terms reduce exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogSum {
    pub max: f64,
    /// `sum exp(x - max)`.
    pub scaled: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSum {
    pub fn push(&mut self, x: f64) {
        self.merge(&LogSum { max: x, scaled: 1.0 });
    }

    pub fn merge(&mut self, other: &LogSum) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if self.max == f64::NEG_INFINITY {
            *self = *other;
            return;
        }
        if other.max > self.max {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        } else {
            self.scaled += other.scaled * (other.max - self.max).exp();
        }
    }

    pub fn ln(&self) -> f64 {
        self.max + self.scaled.ln()
    }

    /// `log((1/m) sum exp(x))`.
    pub fn ln_mean(&self, m: f64) -> f64 {
        self.max + (self.scaled / m).ln()
    }
}

/// `log( (exp(k) - 1) / k )`, continuous at `k = 0`, overflow-free.
pub fn log_expm1_over(k: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else if k > 0.0 {
        k + (-(-k).exp_m1()).ln() - k.ln()
    } else {
        (-k.exp_m1()).ln() - (-k).ln()
    }
}

/// `log int_0^dt exp(c + m s) ds` in closed form.
pub fn log_int_exp_linear(c: f64, m: f64, dt: f64) -> f64 {
    if dt <= 0.0 {
        return f64::NEG_INFINITY;
    }
    c + dt.ln() + log_expm1_over(m * dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomials_exact() {
        let v = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-12).unwrap();
        assert!((v - (64.0 / 6.0 - 1.0 / 6.0 - 9.0)).abs() < 1e-12);
    }

    #[test]
    fn gk_sqrt_endpoint_singularity() {
        // int_0^{1/4} (1 - 4x)^{-1/2} dx = 1/2
        let f = |x: f64| 1.0 / (1.0 - 4.0 * x).max(0.0).sqrt();
        let v = integrate_upper_sqrt_singular(f, 0.0, 0.25, 1e-12).unwrap();
        assert!((v - 0.5).abs() < 1e-12, "{v}");
    }

    #[test]
    fn log_sum_exp_basics() {
        assert!((log_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
        let xs = [1000.0, 1000.0, 1000.0];
        assert!((log_sum_exp(&xs) - (1000.0 + 3f64.ln())).abs() < 1e-12);
        let mut acc = LogSum::default();
        for _ in 0..3 {
            acc.push(0.0);
        }
        assert_eq!(acc.ln_mean(3.0), 0.0);
    }

    #[test]
    fn exp_linear_closed_form() {
        // int_0^1 e^t dt = e - 1
        assert!((log_int_exp_linear(0.0, 1.0, 1.0) - (std::f64::consts::E - 1.0).ln()).abs() < 1e-15);
        assert_eq!(log_int_exp_linear(2.0, 0.0, 3.0), 2.0 + 3f64.ln());
        // large exponents stay finite
        let v = log_int_exp_linear(0.0, 1e4, 1.0);
        assert!((v - (1e4 - 1e4f64.ln())).abs() < 1e-9);
        let neg = log_int_exp_linear(0.0, -1.0, 1.0);
        assert!((neg - (1.0 - (-1f64).exp()).ln()).abs() < 1e-15);
    }
}
