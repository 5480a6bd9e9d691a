//! Online feedback rules: Gaussian-Optimal (GO) and the Particle Guess
//! Heuristic (PGH).
//!
//! GO reads the posterior only through its Gaussian summary `(mu, sigma)` and
//! moves the feedback phase to
//!
//! ```text
//! Phi = mu + s * (-pi + arccos A(sigma)),
//! A(sigma) = e^{sigma^2/2} (sigma^2 + sqrt((sigma^2 - 2)(sigma^2 - 4)) - 2) / (sigma^2 - 2),
//! ```
//!
//! with `s = +-1`. `A` is real with `|A| <= 1` up to `sigma ~= 0.921`; beyond that
//! the rule either keeps the real part of the complex solution or hands over to
//! PGH. PGH draws the feedback phase from the posterior itself.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interferometer::{uniform_phase, Phase};
use crate::posterior::{GaussianSummary, PosteriorGrid};
use crate::rng::{coin, SimRng};

/// Largest `sigma` for which the GO solution is real.
pub const GO_SIGMA_THRESHOLD: f64 = 0.921;

/// Branch of the `+-` in the GO rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// `s = (-1)^k` at step `k`.
    #[default]
    Alternate,
    /// Fair coin per step.
    Random,
}

/// What GO does once `sigma` exceeds [`GO_SIGMA_THRESHOLD`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoFallback {
    /// Keep the real part of the (complex) closed-form solution.
    #[default]
    RealPart,
    /// Draw the feedback from the posterior instead.
    Pgh,
}

impl FromStr for SignConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alternate" => Ok(SignConvention::Alternate),
            "random" => Ok(SignConvention::Random),
            other => Err(Error::InvalidArgument(format!(
                "unknown sign convention {other:?} (alternate, random)"
            ))),
        }
    }
}

impl FromStr for GoFallback {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real-part" => Ok(GoFallback::RealPart),
            "pgh" => Ok(GoFallback::Pgh),
            other => Err(Error::InvalidArgument(format!("unknown GO fallback {other:?} (real-part, pgh)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HeuristicKind {
    Go { sign: SignConvention, fallback: GoFallback },
    Pgh,
}

impl HeuristicKind {
    pub const fn go() -> Self {
        HeuristicKind::Go {
            sign: SignConvention::Alternate,
            fallback: GoFallback::RealPart,
        }
    }
}

impl Default for HeuristicKind {
    fn default() -> Self {
        Self::go()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// `(-1)^k`.
    pub fn alternating(k: usize) -> Sign {
        if k % 2 == 0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// `A(sigma)` on the real line, or `None` where the square root turns complex
/// (`2 < sigma^2 < 4`) or the expression is singular (`sigma^2 = 2`).
pub fn go_coefficient(sigma: f64) -> Option<f64> {
    let s2 = sigma * sigma;
    let radicand = (s2 - 2.0) * (s2 - 4.0);
    if radicand < 0.0 || s2 == 2.0 {
        return None;
    }
    Some((s2 / 2.0).exp() * (s2 + radicand.sqrt() - 2.0) / (s2 - 2.0))
}

/// `A(sigma)` continued into the complex plane.
pub fn go_coefficient_complex(sigma: f64) -> Complex64 {
    let s2 = sigma * sigma;
    let root = Complex64::new((s2 - 2.0) * (s2 - 4.0), 0.0).sqrt();
    (s2 / 2.0).exp() * (s2 + root - 2.0) / (s2 - 2.0)
}

/// Signed magnitude of the GO offset, `-pi + Re arccos A(sigma)`.
///
/// Real `A` outside `[-1, 1]` is clamped (the real part of `arccos` of a real
/// argument beyond the unit interval). In the complex window `2 < sigma^2 < 4`
/// the real part of the complex arc-cosine is used; non-finite values (huge
/// `sigma`, or `sigma^2 = 2`) collapse to the clamp of the dominant sign.
pub fn go_offset(sigma: f64) -> f64 {
    let arccos = match go_coefficient(sigma) {
        Some(a) if a.is_finite() => a.clamp(-1.0, 1.0).acos(),
        Some(a) => {
            if a > 0.0 {
                0.0
            } else {
                PI
            }
        }
        None => {
            let z = go_coefficient_complex(sigma);
            let re = z.acos().re;
            if re.is_finite() {
                re
            } else {
                // sigma^2 = 2: A diverges with the sign of its real part
                if z.re >= 0.0 {
                    0.0
                } else {
                    PI
                }
            }
        }
    };
    -PI + arccos
}

/// GO feedback phase for a Gaussian summary.
pub fn go_feedback(summary: &GaussianSummary, sign: Sign) -> Phase {
    summary.mu.shifted(sign.value() * go_offset(summary.sigma))
}

/// PGH feedback: a draw from the posterior.
pub fn pgh_feedback(grid: &PosteriorGrid, rng: &mut SimRng) -> Phase {
    grid.sample(rng)
}

/// Feedback phase for step `k` (1-based).
///
/// When the posterior has no defined mean (a flat prior) every feedback phase
/// is equally good, and a uniform random phase is returned.
pub fn next_feedback(heuristic: &HeuristicKind, grid: &PosteriorGrid, k: usize, rng: &mut SimRng) -> Result<Phase> {
    if k == 0 {
        return Err(Error::InvalidArgument("steps are numbered from 1".into()));
    }
    match *heuristic {
        HeuristicKind::Pgh => Ok(pgh_feedback(grid, rng)),
        HeuristicKind::Go { sign, fallback } => {
            let summary = match grid.gaussian_summary() {
                Ok(s) => s,
                Err(Error::UndefinedMean(_)) | Err(Error::InfiniteVariance(_)) => {
                    return Ok(uniform_phase(rng));
                }
                Err(e) => return Err(e),
            };
            if summary.sigma > GO_SIGMA_THRESHOLD && fallback == GoFallback::Pgh {
                return Ok(pgh_feedback(grid, rng));
            }
            let s = match sign {
                SignConvention::Alternate => Sign::alternating(k),
                SignConvention::Random => {
                    if coin(rng) {
                        Sign::Plus
                    } else {
                        Sign::Minus
                    }
                }
            };
            Ok(go_feedback(&summary, s))
        }
    }
}

/// `-pi/2 + arcsin(sqrt 2 - 1)`: the GO offset as `sigma -> 0`.
pub fn small_sigma_offset() -> f64 {
    -PI / 2.0 + (2f64.sqrt() - 1.0).asin()
}
