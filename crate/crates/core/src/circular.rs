//! Circular statistics shared by the posterior and the batch aggregates.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Resultant lengths below this are treated as zero.
pub const MIN_RESULTANT: f64 = 1e-12;

/// Reduces `x` into `[0, 2pi)`.
#[inline]
pub fn wrap_two_pi(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduces `x` into `(-pi, pi]`.
#[inline]
pub fn wrap_pi(x: f64) -> f64 {
    let r = PI - (PI - x).rem_euclid(TAU);
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Unnormalised mean resultant vector `(sum w cos, sum w sin)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Resultant {
    pub re: f64,
    pub im: f64,
}

impl Resultant {
    pub fn of_angles<I: IntoIterator<Item = f64>>(angles: I) -> (Self, usize) {
        let mut r = Resultant::default();
        let mut count = 0;
        for a in angles {
            r.re += a.cos();
            r.im += a.sin();
            count += 1;
        }
        (r, count)
    }

    pub fn scaled(self, factor: f64) -> Self {
        Resultant {
            re: self.re * factor,
            im: self.im * factor,
        }
    }

    pub fn length(self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Direction in `[0, 2pi)`.
    pub fn direction(self) -> Result<f64> {
        let len = self.length();
        if len < MIN_RESULTANT {
            return Err(Error::UndefinedMean(len));
        }
        Ok(wrap_two_pi(self.im.atan2(self.re)))
    }
}

/// Holevo variance `S^-2 - 1` for sharpness `S`.
pub fn holevo_from_sharpness(sharpness: f64) -> Result<f64> {
    if sharpness < MIN_RESULTANT {
        return Err(Error::InfiniteVariance(sharpness));
    }
    Ok((sharpness.powi(-2) - 1.0).max(0.0))
}
