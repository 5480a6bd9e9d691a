//! Two-mode Mach-Zehnder interferometer probed by single photons.
//!
//! The ideal detector statistics are `p(0 | phi; Phi) = cos^2((phi - Phi)/2)` and
//! `p(1 | phi; Phi) = sin^2((phi - Phi)/2)`. Both noise channels act as a contrast
//! reduction `p -> v p + (1 - v)/2`, with `v = 1 - p` for depolarizing noise and
//! `v = exp(-kappa^2 / 2)` for Gaussian phase kicks on the feedback arm.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circular::wrap_two_pi;
use crate::error::{Error, Result};
use crate::rng::{coin, standard_normal, uniform, SimRng};

/// An optical phase in `[0, 2pi)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Phase(f64);

impl Phase {
    pub const ZERO: Phase = Phase(0.0);

    /// Wraps `value` into `[0, 2pi)`.
    ///
    /// # Panics
    ///
    /// Panics if `value` is not finite.
    pub fn new(value: f64) -> Self {
        assert!(value.is_finite(), "phase must be finite, got {value}");
        Phase(wrap_two_pi(value))
    }

    pub fn try_new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(Phase(wrap_two_pi(value)))
        } else {
            Err(Error::InvalidArgument(format!("phase must be finite, got {value}")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `self + delta`, wrapped.
    #[inline]
    pub fn shifted(self, delta: f64) -> Phase {
        Phase::new(self.0 + delta)
    }
}

impl From<Phase> for f64 {
    fn from(p: Phase) -> f64 {
        p.0
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A detector click: which output port fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Zero,
    One,
}

impl Outcome {
    #[inline]
    pub fn bit(self) -> u8 {
        match self {
            Outcome::Zero => 0,
            Outcome::One => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Result<Self> {
        match bit {
            0 => Ok(Outcome::Zero),
            1 => Ok(Outcome::One),
            other => Err(Error::InvalidArgument(format!("outcome bit must be 0 or 1, got {other}"))),
        }
    }

    /// `+1` for outcome 0, `-1` for outcome 1: the sign of the fringe term.
    #[inline]
    pub fn fringe_sign(self) -> f64 {
        match self {
            Outcome::Zero => 1.0,
            Outcome::One => -1.0,
        }
    }
}

impl Serialize for Outcome {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.bit())
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let bit = u8::deserialize(d)?;
        Outcome::from_bit(bit).map_err(serde::de::Error::custom)
    }
}

/// Noise acting between the interferometer and the detector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseChannel {
    #[default]
    Ideal,
    /// With probability `p` the click is replaced by a fair coin.
    Depolarizing { p: f64 },
    /// Zero-mean Gaussian kick of standard deviation `kappa` on the feedback phase.
    Phase { kappa: f64 },
}

impl NoiseChannel {
    pub fn depolarizing(p: f64) -> Result<Self> {
        let ch = NoiseChannel::Depolarizing { p };
        ch.validate()?;
        Ok(ch)
    }

    pub fn phase(kappa: f64) -> Result<Self> {
        let ch = NoiseChannel::Phase { kappa };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseChannel::Ideal => Ok(()),
            NoiseChannel::Depolarizing { p } if (0.0..=1.0).contains(&p) => Ok(()),
            NoiseChannel::Depolarizing { p } => {
                Err(Error::InvalidChannel(format!("depolarizing probability {p} outside [0, 1]")))
            }
            NoiseChannel::Phase { kappa } if kappa >= 0.0 && kappa.is_finite() => Ok(()),
            NoiseChannel::Phase { kappa } => {
                Err(Error::InvalidChannel(format!("phase-noise strength {kappa} must be finite and >= 0")))
            }
        }
    }

    /// Fringe visibility `v` such that `p_noisy = v p_ideal + (1 - v)/2`.
    #[inline]
    pub fn visibility(&self) -> f64 {
        match *self {
            NoiseChannel::Ideal => 1.0,
            NoiseChannel::Depolarizing { p } => 1.0 - p,
            NoiseChannel::Phase { kappa } => (-kappa * kappa / 2.0).exp(),
        }
    }
}

impl fmt::Display for NoiseChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseChannel::Ideal => write!(f, "ideal"),
            NoiseChannel::Depolarizing { p } => write!(f, "depolarizing:{p}"),
            NoiseChannel::Phase { kappa } => write!(f, "phase:{kappa}"),
        }
    }
}

/// Parses `ideal`, `depolarizing:<p>` or `phase:<kappa>`.
impl FromStr for NoiseChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, param) = match s.split_once(':') {
            Some((k, v)) => (k.trim(), Some(v.trim())),
            None => (s, None),
        };
        let number = |v: Option<&str>| -> Result<f64> {
            let v = v.ok_or_else(|| Error::InvalidChannel(format!("`{s}` needs a parameter")))?;
            v.parse::<f64>()
                .map_err(|_| Error::InvalidChannel(format!("`{v}` is not a number")))
        };
        match kind {
            "ideal" if param.is_none() => Ok(NoiseChannel::Ideal),
            "depolarizing" | "dep" => NoiseChannel::depolarizing(number(param)?),
            "phase" | "pha" => NoiseChannel::phase(number(param)?),
            _ => Err(Error::InvalidChannel(format!("unknown channel `{s}`"))),
        }
    }
}

#[inline]
fn fringe(outcome: Outcome, visibility: f64, cos_diff: f64) -> f64 {
    (0.5 * (1.0 + outcome.fringe_sign() * visibility * cos_diff)).clamp(0.0, 1.0)
}

/// Noiseless outcome probability `cos^2((phi - Phi)/2)` or `sin^2((phi - Phi)/2)`.
pub fn ideal_likelihood(x: Outcome, phi: Phase, feedback: Phase) -> f64 {
    fringe(x, 1.0, (phi.0 - feedback.0).cos())
}

/// Outcome probability through `channel`.
pub fn noisy_likelihood(channel: &NoiseChannel, x: Outcome, phi: Phase, feedback: Phase) -> f64 {
    fringe(x, channel.visibility(), (phi.0 - feedback.0).cos())
}

/// Draws one detector click.
///
/// Depolarizing noise flips a `p`-biased coin first and reports a fair coin
/// when it lands; phase noise kicks the feedback phase by `N(0, kappa^2)` and
/// then draws from the ideal likelihood at the kicked phase.
pub fn sample_outcome(channel: &NoiseChannel, phi: Phase, feedback: Phase, rng: &mut SimRng) -> Outcome {
    let cos_diff = match *channel {
        NoiseChannel::Ideal => (phi.0 - feedback.0).cos(),
        NoiseChannel::Depolarizing { p } => {
            if uniform(rng) < p {
                return if coin(rng) { Outcome::Zero } else { Outcome::One };
            }
            (phi.0 - feedback.0).cos()
        }
        NoiseChannel::Phase { kappa } => {
            let kick = kappa * standard_normal(rng);
            (phi.0 - feedback.0 - kick).cos()
        }
    };
    if uniform(rng) < fringe(Outcome::Zero, 1.0, cos_diff) {
        Outcome::Zero
    } else {
        Outcome::One
    }
}

/// Per-probe Fisher information maximised over the operating point.
///
/// For visibility `v` the information at phase difference `d` is
/// `v^2 sin^2 d / (1 - v^2 cos^2 d)`, largest at `d = pi/2` where it equals `v^2`.
pub fn fisher_information(channel: &NoiseChannel) -> f64 {
    let v = channel.visibility();
    v * v
}

/// Cramér-Rao bound `[n I]^{-1/2}` on the phase uncertainty after `n` probes.
pub fn precision_bound(channel: &NoiseChannel, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::ZeroProbes);
    }
    Ok((n as f64 * fisher_information(channel)).powf(-0.5))
}

/// Standard quantum limit `n^{-1/2}`.
pub fn standard_quantum_limit(n: usize) -> Result<f64> {
    precision_bound(&NoiseChannel::Ideal, n)
}

/// Uniform phase on `[0, 2pi)`.
pub fn uniform_phase(rng: &mut SimRng) -> Phase {
    Phase::new(TAU * uniform(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn ph(x: f64) -> Phase {
        Phase::new(x)
    }

    #[test]
    fn ideal_examples() {
        assert_eq!(ideal_likelihood(Outcome::Zero, ph(FRAC_PI_2), ph(FRAC_PI_2)), 1.0);
        assert_eq!(ideal_likelihood(Outcome::Zero, ph(PI), ph(0.0)), 0.0);
        let half = ideal_likelihood(Outcome::Zero, ph(FRAC_PI_2), ph(0.0));
        assert!((half - (PI / 4.0).cos().powi(2)).abs() < 1e-15);
        assert!((half - 0.5).abs() < 1e-15);
    }

    #[test]
    fn noisy_examples() {
        let dep = NoiseChannel::depolarizing(0.25).unwrap();
        assert!((noisy_likelihood(&dep, Outcome::Zero, ph(1.0), ph(1.0)) - 0.875).abs() < 1e-15);

        let k0 = NoiseChannel::phase(0.0).unwrap();
        assert_eq!(noisy_likelihood(&k0, Outcome::One, ph(PI), ph(0.0)), 1.0);

        let k1 = NoiseChannel::phase(1.0).unwrap();
        let expected = (-0.5f64).exp() + (1.0 - (-0.5f64).exp()) / 2.0;
        let got = noisy_likelihood(&k1, Outcome::Zero, ph(0.4), ph(0.4));
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.80327).abs() < 1e-5);
    }

    #[test]
    fn channel_validation() {
        assert!(NoiseChannel::depolarizing(1.1).is_err());
        assert!(NoiseChannel::depolarizing(-0.1).is_err());
        assert!(NoiseChannel::phase(-1.0).is_err());
        assert!(NoiseChannel::phase(f64::NAN).is_err());
        assert!(NoiseChannel::depolarizing(1.0).is_ok());
    }

    #[test]
    fn channel_strings() {
        for s in ["ideal", "depolarizing:0.25", "phase:0.2"] {
            let ch: NoiseChannel = s.parse().unwrap();
            assert_eq!(ch.to_string(), s);
        }
        assert!("ideal:1".parse::<NoiseChannel>().is_err());
        assert!("phase".parse::<NoiseChannel>().is_err());
        assert!("thermal:0.1".parse::<NoiseChannel>().is_err());
        assert!("depolarizing:2".parse::<NoiseChannel>().is_err());
    }

    #[test]
    fn noiseless_limits_coincide_with_ideal() {
        let dep0 = NoiseChannel::depolarizing(0.0).unwrap();
        let pha0 = NoiseChannel::phase(0.0).unwrap();
        for j in 0..100 {
            let phi = ph(j as f64 * 0.0731);
            let fb = ph(j as f64 * -0.377);
            for x in [Outcome::Zero, Outcome::One] {
                let ideal = ideal_likelihood(x, phi, fb);
                assert_eq!(noisy_likelihood(&dep0, x, phi, fb), ideal);
                assert_eq!(noisy_likelihood(&pha0, x, phi, fb), ideal);
            }
        }
    }

    #[test]
    fn deterministic_clicks() {
        let mut rng = stream_rng(5, 0);
        for _ in 0..1000 {
            assert_eq!(sample_outcome(&NoiseChannel::Ideal, ph(1.2), ph(1.2), &mut rng), Outcome::Zero);
            assert_eq!(sample_outcome(&NoiseChannel::Ideal, ph(1.2 + PI), ph(1.2), &mut rng), Outcome::One);
        }
    }

    #[test]
    fn fully_depolarized_is_fair_coin() {
        let ch = NoiseChannel::depolarizing(1.0).unwrap();
        let mut rng = stream_rng(9, 0);
        let n = 100_000;
        let zeros = (0..n)
            .filter(|_| sample_outcome(&ch, ph(0.5), ph(0.5), &mut rng) == Outcome::Zero)
            .count();
        assert!((zeros as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn sampled_frequencies_match_likelihood() {
        // 4 binomial standard deviations at 1e5 samples
        let n = 100_000;
        let channels = [
            NoiseChannel::Ideal,
            NoiseChannel::depolarizing(0.25).unwrap(),
            NoiseChannel::phase(0.7).unwrap(),
        ];
        for (ci, ch) in channels.iter().enumerate() {
            for (di, diff) in [0.3, 1.2, 2.5].into_iter().enumerate() {
                let phi = ph(0.9 + diff);
                let fb = ph(0.9);
                let mut rng = stream_rng(100 + ci as u64, di as u64);
                let zeros = (0..n).filter(|_| sample_outcome(ch, phi, fb, &mut rng) == Outcome::Zero).count();
                let p = noisy_likelihood(ch, Outcome::Zero, phi, fb);
                let sd = (p * (1.0 - p) / n as f64).sqrt();
                let freq = zeros as f64 / n as f64;
                assert!((freq - p).abs() < 4.0 * sd, "{ch} d={diff}: {freq} vs {p}");
            }
        }
    }

    #[test]
    fn precision_bound_examples() {
        assert!((precision_bound(&NoiseChannel::Ideal, 100).unwrap() - 0.1).abs() < 1e-15);
        let dep = NoiseChannel::depolarizing(0.25).unwrap();
        assert!((precision_bound(&dep, 100).unwrap() - 1.0 / 7.5).abs() < 1e-12);
        let pha = NoiseChannel::phase(1.0).unwrap();
        assert!((precision_bound(&pha, 1).unwrap() - 0.5f64.exp()).abs() < 1e-12);
        assert_eq!(precision_bound(&NoiseChannel::Ideal, 0), Err(Error::ZeroProbes));
    }

    #[test]
    fn fisher_examples() {
        assert_eq!(fisher_information(&NoiseChannel::Ideal), 1.0);
        let dep = NoiseChannel::depolarizing(0.1).unwrap();
        assert!((fisher_information(&dep) - 0.81).abs() < 1e-12);
        let pha = NoiseChannel::phase(0.2).unwrap();
        assert!((fisher_information(&pha) - (-0.04f64).exp()).abs() < 1e-12);
        assert!((fisher_information(&pha) - 0.96079).abs() < 1e-5);
    }

    #[test]
    fn channel_json_shape() {
        let ch = NoiseChannel::depolarizing(0.1).unwrap();
        let json = serde_json::to_string(&ch).unwrap();
        assert_eq!(json, r#"{"kind":"depolarizing","p":0.1}"#);
        let back: NoiseChannel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ch);
        assert_eq!(serde_json::to_string(&NoiseChannel::Ideal).unwrap(), r#"{"kind":"ideal"}"#);
    }

    proptest! {
        #[test]
        fn outcome_probabilities_sum_to_one(phi in -10.0f64..10.0, fb in -10.0f64..10.0, p in 0.0f64..=1.0, kappa in 0.0f64..3.0) {
            for ch in [NoiseChannel::Ideal, NoiseChannel::Depolarizing { p }, NoiseChannel::Phase { kappa }] {
                let total = noisy_likelihood(&ch, Outcome::Zero, ph(phi), ph(fb))
                    + noisy_likelihood(&ch, Outcome::One, ph(phi), ph(fb));
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn joint_shift_invariance(phi in 0.0f64..TAU, fb in 0.0f64..TAU, c in -20.0f64..20.0, p in 0.0f64..=1.0) {
            let ch = NoiseChannel::Depolarizing { p };
            for x in [Outcome::Zero, Outcome::One] {
                let a = noisy_likelihood(&ch, x, ph(phi), ph(fb));
                let b = noisy_likelihood(&ch, x, ph(phi + c), ph(fb + c));
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn phase_construction_wraps(x in -1e3f64..1e3) {
            let p = Phase::new(x);
            prop_assert!((0.0..TAU).contains(&p.value()));
        }
    }
}
