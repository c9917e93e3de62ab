//! Extended non-negative failure times.
//!
//! A failure time is either a finite instant `t >= 0` or `+inf`, the time
//! of an event that never occurs. The order is total, so `min`/`max` (the
//! or/and gate semantics) are associative and commutative with identities
//! `Infinity` and `Finite(0)`.

use core::cmp::Ordering;
use core::fmt;

/// A failure time: finite and non-negative, or `+inf` (never fails).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtTime {
    Finite(f64),
    Infinity,
}

/// Rejected value for [`ExtTime::finite`]: negative, NaN or infinite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InvalidTime(pub f64);

impl fmt::Display for InvalidTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid failure time {} (must be finite and >= 0)", self.0)
    }
}

impl ExtTime {
    pub const ZERO: ExtTime = ExtTime::Finite(0.0);

    /// Wraps a finite instant, rejecting negatives, NaN and infinities.
    pub fn finite(t: f64) -> Result<ExtTime, InvalidTime> {
        if t.is_finite() && t >= 0.0 {
            Ok(ExtTime::Finite(t))
        } else {
            Err(InvalidTime(t))
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtTime::Finite(_))
    }

    /// The finite value, if any.
    pub fn value(self) -> Option<f64> {
        match self {
            ExtTime::Finite(t) => Some(t),
            ExtTime::Infinity => None,
        }
    }

    pub fn min(self, other: ExtTime) -> ExtTime {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: ExtTime) -> ExtTime {
        if self >= other {
            self
        } else {
            other
        }
    }
}

// The no-NaN invariant makes the f64 order total.
impl Eq for ExtTime {}

impl PartialOrd for ExtTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtTime {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtTime::Finite(a), ExtTime::Finite(b)) => {
                a.partial_cmp(b).expect("ExtTime holds no NaN")
            }
            (ExtTime::Finite(_), ExtTime::Infinity) => Ordering::Less,
            (ExtTime::Infinity, ExtTime::Finite(_)) => Ordering::Greater,
            (ExtTime::Infinity, ExtTime::Infinity) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ExtTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtTime::Finite(t) => write!(f, "{t}"),
            ExtTime::Infinity => write!(f, "inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_rejects_bad_values() {
        assert!(ExtTime::finite(-1.0).is_err());
        assert!(ExtTime::finite(f64::NAN).is_err());
        assert!(ExtTime::finite(f64::INFINITY).is_err());
        assert_eq!(ExtTime::finite(0.0).unwrap(), ExtTime::ZERO);
    }

    #[test]
    fn total_order() {
        let a = ExtTime::Finite(1.0);
        let b = ExtTime::Finite(2.0);
        assert!(a < b);
        assert!(b < ExtTime::Infinity);
        assert!(a < ExtTime::Infinity);
        assert_eq!(ExtTime::Infinity, ExtTime::Infinity);
    }

    #[test]
    fn min_max_identities() {
        let t = ExtTime::Finite(3.5);
        assert_eq!(t.min(ExtTime::Infinity), t);
        assert_eq!(t.max(ExtTime::ZERO), t);
        assert_eq!(ExtTime::Infinity.min(ExtTime::Infinity), ExtTime::Infinity);
    }

    #[test]
    fn min_max_assoc_comm() {
        let xs = [ExtTime::ZERO, ExtTime::Finite(1.0), ExtTime::Finite(7.25), ExtTime::Infinity];
        for &a in &xs {
            for &b in &xs {
                assert_eq!(a.min(b), b.min(a));
                assert_eq!(a.max(b), b.max(a));
                for &c in &xs {
                    assert_eq!(a.min(b.min(c)), a.min(b).min(c));
                    assert_eq!(a.max(b.max(c)), a.max(b).max(c));
                }
            }
        }
    }
}
