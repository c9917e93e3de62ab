//! Adaptive Simpson quadrature with a Richardson error estimate.
//!
//! Subdivision accepts an interval when the usual `|S2 - S1| <= 15 tol`
//! criterion holds and returns the extrapolated value `S2 + (S2 - S1)/15`;
//! the accumulated extrapolation terms bound the reported error.

use core::fmt;

use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QuadError {
    /// Tolerance still unmet at the maximum subdivision depth.
    ToleranceNotMet { depth: u32 },
}

impl fmt::Display for QuadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadError::ToleranceNotMet { depth } => {
                write!(f, "quadrature tolerance not met at subdivision depth {depth}")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Conservative absolute-error bound from the Richardson terms.
    pub error: f64,
}

struct Frame {
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

#[inline]
fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Degenerate ranges (`b <= a`) integrate to zero. Work proceeds on an
/// explicit stack so deep subdivision cannot overflow the call stack.
pub fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<QuadResult, QuadError> {
    if b <= a {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, fa, b, fb, fm);

    let mut stack: Vec<Frame> = Vec::with_capacity(64);
    stack.push(Frame { a, fa, m, fm, b, fb, whole, tol, depth: 0 });

    let mut value = 0.0;
    let mut error = 0.0;
    while let Some(fr) = stack.pop() {
        let lm = 0.5 * (fr.a + fr.m);
        let rm = 0.5 * (fr.m + fr.b);
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fr.a, fr.fa, fr.m, fr.fm, flm);
        let right = simpson(fr.m, fr.fm, fr.b, fr.fb, frm);
        let delta = left + right - fr.whole;
        if delta.abs() <= 15.0 * fr.tol {
            value += left + right + delta / 15.0;
            error += delta.abs() / 15.0;
        } else if fr.depth >= max_depth {
            return Err(QuadError::ToleranceNotMet { depth: fr.depth });
        } else {
            let half = 0.5 * fr.tol;
            stack.push(Frame {
                a: fr.a,
                fa: fr.fa,
                m: lm,
                fm: flm,
                b: fr.m,
                fb: fr.fm,
                whole: left,
                tol: half,
                depth: fr.depth + 1,
            });
            stack.push(Frame {
                a: fr.m,
                fa: fr.fm,
                m: rm,
                fm: frm,
                b: fr.b,
                fb: fr.fb,
                whole: right,
                tol: half,
                depth: fr.depth + 1,
            });
        }
    }
    Ok(QuadResult { value, error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::{exp, sin};

    #[test]
    fn polynomial_exact() {
        let r = integrate(&|x| x * x, 0.0, 1.0, 1e-12, 60).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_range_is_zero() {
        let r = integrate(&|x| x, 1.0, 1.0, 1e-12, 60).unwrap();
        assert_eq!(r.value, 0.0);
        let r = integrate(&|x| x, 2.0, 1.0, 1e-12, 60).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn oscillatory() {
        let r = integrate(&|x| sin(x), 0.0, core::f64::consts::PI, 1e-12, 60).unwrap();
        assert!((r.value - 2.0).abs() < 1e-11);
    }

    #[test]
    fn exponential_tail() {
        let r = integrate(&|x| exp(-x), 0.0, 30.0, 1e-12, 60).unwrap();
        assert!((r.value - (1.0 - exp(-30.0))).abs() < 1e-11);
    }

    #[test]
    fn near_singular_integrand() {
        // x^(-0.3), integrable at 0; clamped the way densities are.
        let f = |x: f64| libm::pow(x.max(1e-12), -0.3);
        let r = integrate(&f, 0.0, 1.0, 1e-10, 60).unwrap();
        assert!((r.value - 1.0 / 0.7).abs() < 1e-7, "got {}", r.value);
    }

    #[test]
    fn depth_exhaustion_reports_failure() {
        let f = |x: f64| libm::pow(x.max(1e-300), -0.5);
        let err = integrate(&f, 0.0, 1.0, 1e-14, 4).unwrap_err();
        assert!(matches!(err, QuadError::ToleranceNotMet { .. }));
    }
}
