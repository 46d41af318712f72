//! Binomial interval estimation helpers.

use crate::error::{Error, Result};

/// Standard normal quantile (inverse CDF), Acklam's rational approximation.
///
/// Relative error below 1.2e-9 over (0, 1), plenty for confidence levels.
#[allow(clippy::excessive_precision)] // verbatim published coefficients
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile argument must lie in (0, 1)");

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Two-sided z value for a confidence level in (0, 1).
pub fn z_for_level(level: f64) -> Result<f64> {
    if level <= 0.0 || level >= 1.0 || !level.is_finite() {
        return Err(Error::InvalidLevel(level));
    }
    Ok(normal_quantile(0.5 + level / 2.0))
}

/// Wilson score interval for `successes` out of `trials`.
///
/// Behaves sensibly at the extremes: zero successes still yield a positive
/// upper bound, full successes a lower bound below one.
pub fn wilson_interval(successes: u64, trials: u64, level: f64) -> Result<(f64, f64)> {
    let z = z_for_level(level)?;
    if trials == 0 {
        return Ok((0.0, 1.0));
    }
    let n = trials as f64;
    let p_hat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p_hat + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt();
    // Rounding at the extremes must not push a bound past the point estimate.
    let lo = (center - half).max(0.0).min(p_hat);
    let hi = (center + half).min(1.0).max(p_hat);
    Ok((lo, hi))
}
