//! Scalar math used throughout the crate.
//!
//! Transcendentals are routed through here so the crate builds without `std`
//! (falling back to `libm`). Also hosts the normal CDF and the numerically
//! stable log-domain helpers the scoring code relies on.

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

macro_rules! unary {
    ($name:ident, $libm:ident) => {
        #[inline]
        pub fn $name(x: f64) -> f64 {
            #[cfg(feature = "std")]
            {
                x.$name()
            }
            #[cfg(not(feature = "std"))]
            {
                libm::$libm(x)
            }
        }
    };
}

unary!(exp, exp);
unary!(ln, log);
unary!(ln_1p, log1p);
unary!(sqrt, sqrt);
unary!(tanh, tanh);
unary!(cos, cos);
unary!(floor, floor);
unary!(abs, fabs);

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.powf(y)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::pow(x, y)
    }
}

/// Logistic sigmoid, safe at both tails.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// log(sigmoid(x)) without overflow: -ln(1 + e^-x).
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -ln_1p(exp(-x))
    } else {
        x - ln_1p(exp(x))
    }
}

/// Complementary error function (Hastings-style rational approximation,
/// absolute error below 1.5e-7).
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    poly * exp(-x * x)
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * core::f64::consts::FRAC_1_SQRT_2)
}

/// log(norm_cdf(z)), with asymptotic tails so the result stays finite and
/// well-ordered far outside the central range.
pub fn log_norm_cdf(z: f64) -> f64 {
    if z < -6.0 {
        // Mills-ratio expansion: Phi(z) ~ phi(z)/(-z) * (1 - 1/z^2 + 3/z^4).
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2);
        -0.5 * z2 - LN_SQRT_2PI - ln(-z) + ln(series)
    } else if z > 6.0 {
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2);
        let tail = exp(-0.5 * z2 - LN_SQRT_2PI - ln(z)) * series;
        ln_1p(-tail)
    } else {
        ln(norm_cdf(z))
    }
}

/// log(sum(exp(xs))) with max subtraction.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &x in xs {
        if x > max {
            max = x;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let mut sum = 0.0;
    for &x in xs {
        sum += exp(x - max);
    }
    max + ln(sum)
}

/// Softmax of `logits` written into `out`.
pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    debug_assert_eq!(logits.len(), out.len());
    let mut max = f64::NEG_INFINITY;
    for &x in logits {
        if x > max {
            max = x;
        }
    }
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(logits) {
        let e = exp(x - max);
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Log-softmax of `logits` written into `out`.
pub fn log_softmax_into(logits: &[f64], out: &mut [f64]) {
    let lse = log_sum_exp(logits);
    for (o, &x) in out.iter_mut().zip(logits) {
        *o = x - lse;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_cdf_reference_points() {
        assert!(abs(norm_cdf(0.0) - 0.5) < 1e-9);
        assert!(abs(norm_cdf(1.0) - 0.841_344_746) < 1e-5);
        assert!(abs(norm_cdf(-1.0) - 0.158_655_254) < 1e-5);
        assert!(abs(norm_cdf(1.96) - 0.975_002_1) < 1e-5);
    }

    #[test]
    fn log_norm_cdf_matches_direct_in_center() {
        for i in -50..=50 {
            let z = i as f64 * 0.1;
            assert!(abs(log_norm_cdf(z) - ln(norm_cdf(z))) < 1e-9, "z={z}");
        }
    }

    #[test]
    fn log_norm_cdf_tail_is_finite_and_monotone() {
        let mut prev = f64::NEG_INFINITY;
        for i in -40..=40 {
            let z = i as f64;
            let v = log_norm_cdf(z);
            assert!(v.is_finite(), "z={z}");
            assert!(v >= prev, "z={z}");
            prev = v;
        }
    }

    #[test]
    fn softmax_normalizes() {
        let logits = [0.3, -2.0, 5.0, 1.1];
        let mut probs = [0.0; 4];
        softmax_into(&logits, &mut probs);
        let sum: f64 = probs.iter().sum();
        assert!(abs(sum - 1.0) < 1e-12);
    }

    #[test]
    fn log_sigmoid_consistent() {
        for &x in &[-30.0, -2.0, 0.0, 2.0, 30.0] {
            assert!(abs(exp(log_sigmoid(x)) - sigmoid(x)) < 1e-12);
        }
    }
}
