//! Small statistical helpers shared by the Monte-Carlo estimator and the
//! test suites.

use libm::{log, sqrt};

/// Inverse standard-normal CDF (Acklam's rational approximation,
/// |relative error| < 1.2e-9 over (0, 1)).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1), got {p}");

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
        let q = sqrt(-2.0 * log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

/// Two-sided z value for a confidence level, e.g. 0.99 -> 2.5758…
pub fn z_for_confidence(level: f64) -> f64 {
    assert!(level > 0.0 && level < 1.0, "confidence level must be in (0,1)");
    normal_quantile(0.5 + level / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_quantiles() {
        // Reference values of the standard normal quantile function.
        assert!((normal_quantile(0.5) - 0.0).abs() < 1e-12);
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-8);
        assert!((normal_quantile(0.995) - 2.5758293035489004).abs() < 1e-8);
        assert!((normal_quantile(0.0005) + 3.2905267314919255).abs() < 1e-7);
        assert!((normal_quantile(0.25) + 0.6744897501960817).abs() < 1e-8);
    }

    #[test]
    fn z_levels() {
        assert!((z_for_confidence(0.95) - 1.959963984540054).abs() < 1e-8);
        assert!((z_for_confidence(0.99) - 2.5758293035489004).abs() < 1e-8);
    }
}
