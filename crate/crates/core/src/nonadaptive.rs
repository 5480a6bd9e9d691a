//! Non-adaptive baselines on `[0, pi]` with the feedback phase held at 0.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::interferometer::{NoiseChannel, Outcome, Phase};
use crate::posterior::{GridGeometry, Interval, PosteriorGrid};

/// Click counts from `N >= 1` probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountSummary {
    n0: usize,
    n1: usize,
}

impl CountSummary {
    pub fn new(n0: usize, n1: usize) -> Result<Self> {
        if n0 + n1 == 0 {
            return Err(Error::ZeroProbes);
        }
        Ok(CountSummary { n0, n1 })
    }

    pub fn from_outcomes(outcomes: &[Outcome]) -> Result<Self> {
        let n0 = outcomes.iter().filter(|&&x| x == Outcome::Zero).count();
        Self::new(n0, outcomes.len() - n0)
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn total(&self) -> usize {
        self.n0 + self.n1
    }
}

/// Inverts `cos^2(phi / 2) = N0 / N`.
pub fn inversion_estimate(counts: &CountSummary) -> Phase {
    let ratio = counts.n0 as f64 / counts.total() as f64;
    Phase::new((2.0 * ratio.sqrt().acos()).clamp(0.0, PI))
}

/// The half-circle support shared by both baselines.
pub fn half_circle() -> Interval {
    Interval::new(0.0, PI).expect("[0, pi] is a valid interval")
}

/// Bayesian estimate from clicks recorded at feedback phase 0 with a prior
/// truncated to `[0, pi]`.
pub fn fixed_phase_bayes(
    outcomes: &[Outcome],
    channel: &NoiseChannel,
    geometry: Arc<GridGeometry>,
) -> Result<(Phase, PosteriorGrid)> {
    if outcomes.is_empty() {
        return Err(Error::EmptyOutcomes);
    }
    let mut grid = PosteriorGrid::uniform(geometry, Some(half_circle()))?;
    for &x in outcomes {
        grid.bayes_update(x, Phase::ZERO, channel)?;
    }
    let estimate = grid.circular_mean()?;
    Ok((estimate, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circular::wrap_pi;
    use crate::interferometer::sample_outcome;
    use crate::rng::stream_rng;
    use std::f64::consts::FRAC_PI_2;

    fn geom() -> Arc<GridGeometry> {
        GridGeometry::new(1 << 12).unwrap()
    }

    fn clicks(channel: &NoiseChannel, phi: f64, n: usize, seed: u64, stream: u64) -> Vec<Outcome> {
        let mut rng = stream_rng(seed, stream);
        (0..n)
            .map(|_| sample_outcome(channel, Phase::new(phi), Phase::ZERO, &mut rng))
            .collect()
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(inversion_estimate(&CountSummary::new(10, 0).unwrap()).value(), 0.0);
        assert!((inversion_estimate(&CountSummary::new(0, 10).unwrap()).value() - PI).abs() < 1e-15);
        assert!((inversion_estimate(&CountSummary::new(5, 5).unwrap()).value() - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(CountSummary::new(0, 0), Err(Error::ZeroProbes));
    }

    #[test]
    fn inversion_is_monotone() {
        let n = 200;
        let mut last = f64::INFINITY;
        for n0 in 0..=n {
            let e = inversion_estimate(&CountSummary::new(n0, n - n0).unwrap()).value();
            assert!(e <= last);
            assert!((0.0..=PI).contains(&e));
            last = e;
        }
    }

    #[test]
    fn bayes_fixed_examples() {
        let zeros = vec![Outcome::Zero; 50];
        let (e, grid) = fixed_phase_bayes(&zeros, &NoiseChannel::Ideal, geom()).unwrap();
        assert!(e.value() < 0.3, "{e}");
        // grid oracle: circular mean of cos^100(phi/2) on the half circle
        let g = geom();
        let (mut re, mut im) = (0.0, 0.0);
        for &p in g.points() {
            if p <= PI + 1e-12 {
                let w = (p / 2.0).cos().powi(100);
                re += w * p.cos();
                im += w * p.sin();
            }
        }
        assert!((e.value() - im.atan2(re)).abs() < 1e-10);
        assert!(grid.weights().iter().zip(g.points()).all(|(w, p)| *p <= PI + 1e-12 || *w == 0.0));

        let ones = vec![Outcome::One; 50];
        let (e, _) = fixed_phase_bayes(&ones, &NoiseChannel::Ideal, geom()).unwrap();
        assert!(e.value() > PI - 0.3, "{e}");

        assert_eq!(
            fixed_phase_bayes(&[], &NoiseChannel::Ideal, geom()).unwrap_err(),
            Error::EmptyOutcomes
        );
    }

    #[test]
    fn losses_shrink_with_more_probes() {
        let g = geom();
        for phi in [0.5, 1.4, 2.6] {
            let median_losses: Vec<(f64, f64)> = [10usize, 40, 160]
                .iter()
                .map(|&n| {
                    let mut inv = Vec::new();
                    let mut bay = Vec::new();
                    for r in 0..100 {
                        let xs = clicks(&NoiseChannel::Ideal, phi, n, 77 + n as u64, r);
                        let a = inversion_estimate(&CountSummary::from_outcomes(&xs).unwrap());
                        let (b, _) = fixed_phase_bayes(&xs, &NoiseChannel::Ideal, g.clone()).unwrap();
                        inv.push(wrap_pi(a.value() - phi).powi(2));
                        bay.push(wrap_pi(b.value() - phi).powi(2));
                    }
                    (median(inv), median(bay))
                })
                .collect();
            for w in median_losses.windows(2) {
                assert!(w[1].0 < w[0].0, "inversion at {phi}: {median_losses:?}");
                assert!(w[1].1 < w[0].1, "bayes at {phi}: {median_losses:?}");
            }
        }
    }

    #[test]
    fn depolarized_inversion_is_pulled_to_half_pi() {
        let channel = NoiseChannel::depolarizing(0.25).unwrap();
        let phi = 0.3;
        let estimates: Vec<f64> = (0..1000)
            .map(|r| {
                let xs = clicks(&channel, phi, 100, 5, r);
                inversion_estimate(&CountSummary::from_outcomes(&xs).unwrap()).value()
            })
            .collect();
        let m = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / m;
        let sd = (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
        let se = sd / m.sqrt();
        assert!(mean - phi >= 10.0 * se, "mean {mean}, se {se}");
        assert!(mean > phi && mean < FRAC_PI_2);
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}
