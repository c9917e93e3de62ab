//! Failure-time laws.
//!
//! Every shipped family is continuous with support in `[0, inf)` and a
//! proper CDF (components eventually fail). Sampling is inverse-CDF on an
//! explicit caller-provided random stream; the module holds no RNG state.

use core::fmt;

use libm::{exp, log, pow};

use crate::rng::SampleRng;

/// Parameter validation / capability errors.
#[derive(Clone, Debug, PartialEq)]
pub enum DistError {
    /// A rate, shape or scale parameter was not strictly positive.
    NonPositiveParameter {
        what: &'static str,
        value: f64,
    },
    /// Dormancy factor outside `(0, 1]`.
    InvalidDormancy(f64),
    /// The requested construction is not defined for this family.
    UnsupportedFamily {
        what: &'static str,
    },
}

impl fmt::Display for DistError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistError::NonPositiveParameter { what, value } => {
                write!(f, "{what} must be > 0, got {value}")
            }
            DistError::InvalidDormancy(a) => {
                write!(f, "dormancy factor must be in (0, 1], got {a}")
            }
            DistError::UnsupportedFamily { what } => write!(f, "{what}"),
        }
    }
}

/// Evaluating a Weibull density with `shape < 1` exactly at 0 diverges;
/// the integrators need finite values, so such densities are read at
/// `max(t, PDF_CLAMP)`. The mass misattributed on `[0, PDF_CLAMP]` is far
/// below the quadrature tolerances.
pub const PDF_CLAMP: f64 = 1e-12;

/// A continuous failure-time law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Distribution {
    Exponential { rate: f64 },
    Weibull { shape: f64, scale: f64 },
}

impl Distribution {
    /// Exponential law with the given hazard rate.
    pub fn exponential(rate: f64) -> Result<Self, DistError> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(DistError::NonPositiveParameter {
                what: "exponential rate",
                value: rate,
            });
        }
        Ok(Distribution::Exponential { rate })
    }

    /// Weibull law; `shape = 1` coincides with `exponential(1/scale)`.
    pub fn weibull(shape: f64, scale: f64) -> Result<Self, DistError> {
        if !(shape > 0.0) || !shape.is_finite() {
            return Err(DistError::NonPositiveParameter {
                what: "weibull shape",
                value: shape,
            });
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(DistError::NonPositiveParameter {
                what: "weibull scale",
                value: scale,
            });
        }
        Ok(Distribution::Weibull { shape, scale })
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            Distribution::Exponential { rate } => 1.0 - exp(-rate * t),
            Distribution::Weibull { shape, scale } => 1.0 - exp(-pow(t / scale, shape)),
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            Distribution::Exponential { rate } => rate * exp(-rate * t),
            Distribution::Weibull { shape, scale } => {
                // shape < 1 diverges at 0; clamp keeps the integrators total.
                let t = if shape < 1.0 { t.max(PDF_CLAMP) } else { t };
                let z = t / scale;
                if z == 0.0 {
                    return 0.0;
                }
                (shape / scale) * pow(z, shape - 1.0) * exp(-pow(z, shape))
            }
        }
    }

    /// Inverse CDF for `p` in `[0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        debug_assert!((0.0..1.0).contains(&p));
        match *self {
            Distribution::Exponential { rate } => -log(1.0 - p) / rate,
            Distribution::Weibull { shape, scale } => scale * pow(-log(1.0 - p), 1.0 / shape),
        }
    }

    /// Time beyond which the remaining mass is below `tail`; integrals on
    /// `[0, t]` may be truncated here.
    pub fn horizon(&self, tail: f64) -> f64 {
        self.quantile(1.0 - tail)
    }

    pub fn sample(&self, rng: &mut SampleRng) -> f64 {
        self.quantile(rng.next_f64())
    }

    /// The same law with its hazard scaled by a dormancy factor
    /// `alpha` in `(0, 1]`; `alpha = 1` returns the law unchanged (the
    /// hot-spare case).
    pub fn dormant_variant(&self, alpha: f64) -> Result<Self, DistError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(DistError::InvalidDormancy(alpha));
        }
        if alpha == 1.0 {
            return Ok(*self);
        }
        Ok(match *self {
            Distribution::Exponential { rate } => Distribution::Exponential { rate: alpha * rate },
            Distribution::Weibull { shape, scale } => Distribution::Weibull {
                shape,
                scale: scale / pow(alpha, 1.0 / shape),
            },
        })
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Distribution::Exponential { rate } => write!(f, "exp(lambda={rate})"),
            Distribution::Weibull { shape, scale } => {
                write!(f, "weibull(shape={shape}, scale={scale})")
            }
        }
    }
}

/// User-supplied joint law for a spare whose activation is not
/// memoryless: the conditional density is formed as the ratio
/// `joint(u, v) / marginal(v)`.
#[derive(Clone, Copy, Debug)]
pub struct JointLaw {
    /// Joint density `f(x, y)` of (active failure time, activation time).
    pub joint_pdf: fn(f64, f64) -> f64,
    /// Marginal density `f_y(y)` of the activation time.
    pub marginal_pdf: fn(f64) -> f64,
    /// Optional sampler `(v, u01) -> active failure time` for Monte-Carlo.
    pub sampler: Option<fn(f64, f64) -> f64>,
}

/// Conditional activation law of a spare: given that the main failed at
/// time `v`, the density of the spare's active-state failure time, with
/// support in `(v, inf)`.
#[derive(Clone, Copy, Debug)]
pub enum ConditionalLaw {
    /// Activation restarts an exponential clock at `v`.
    Memoryless { rate: f64 },
    /// Conditional density by the joint/marginal ratio.
    Joint(JointLaw),
}

impl ConditionalLaw {
    /// Memoryless activation of an exponential active-state law. Other
    /// families need an explicit [`JointLaw`].
    pub fn memoryless_activation(active: &Distribution) -> Result<Self, DistError> {
        match *active {
            Distribution::Exponential { rate } => Ok(ConditionalLaw::Memoryless { rate }),
            Distribution::Weibull { .. } => Err(DistError::UnsupportedFamily {
                what: "memoryless activation requires an exponential active law \
                       (supply a joint law for other families)",
            }),
        }
    }

    /// `f(u | activated at v)`; zero for `u <= v`.
    pub fn cond_pdf(&self, v: f64, u: f64) -> f64 {
        if u <= v {
            return 0.0;
        }
        match self {
            ConditionalLaw::Memoryless { rate } => rate * exp(-rate * (u - v)),
            ConditionalLaw::Joint(j) => {
                let m = (j.marginal_pdf)(v);
                if m > 0.0 {
                    (j.joint_pdf)(u, v) / m
                } else {
                    0.0
                }
            }
        }
    }

    /// Draws an active-state failure time given activation at `v`.
    pub fn cond_sample(&self, v: f64, rng: &mut SampleRng) -> Result<f64, DistError> {
        match self {
            ConditionalLaw::Memoryless { rate } => {
                Ok(v - log(1.0 - rng.next_f64()) / rate)
            }
            ConditionalLaw::Joint(j) => match j.sampler {
                Some(s) => Ok(s(v, rng.next_f64())),
                None => Err(DistError::UnsupportedFamily {
                    what: "joint conditional law has no sampler",
                }),
            },
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ConditionalLaw::Memoryless { .. } => "memoryless",
            ConditionalLaw::Joint(_) => "joint",
        }
    }
}
