//! Simulated estimation experiments, batches and phase sweeps.
//!
//! Run `i` of a batch draws from `stream_rng(base_seed, i)`; phase `j` of a
//! sweep uses `base_seed + j` (wrapping) as its batch seed, so a one-phase
//! sweep reproduces [`run_batch`] exactly. Runs inside a batch execute on the
//! rayon pool; aggregation happens in run order.
//!
//! Every strategy chooses its feedback from past clicks only, so the first
//! `n` steps of an `N`-probe run coincide with an `n`-probe run. Scans over the
//! probe count therefore simulate the largest count once and read the
//! per-step estimates.

use std::f64::consts::TAU;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circular::{wrap_pi, Resultant, MIN_RESULTANT};
use crate::error::{Error, Result};
use crate::heuristics::{next_feedback, GoFallback, HeuristicKind, SignConvention};
use crate::interferometer::{
    precision_bound, sample_outcome, standard_quantum_limit, uniform_phase, NoiseChannel, Outcome, Phase,
};
use crate::nonadaptive::{half_circle, inversion_estimate, CountSummary};
use crate::posterior::{GridGeometry, Interval, PosteriorGrid};
use crate::pso::{apply_policy_step, Policy};
use crate::rng::{stream_rng, SimRng};

/// How feedback phases are chosen and the phase is estimated.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Gaussian-optimal online feedback.
    Go { sign: SignConvention, fallback: GoFallback },
    /// Feedback drawn from the posterior.
    Pgh,
    /// Offline policy; the estimate after `k` probes is `Phi_k`.
    Policy(Arc<Policy>),
    /// Feedback fixed at 0, estimate by inverting the click frequency.
    Inversion,
    /// Feedback fixed at 0, Bayesian estimate with a prior on `[0, pi]`.
    BayesFixed,
}

impl Strategy {
    pub fn go() -> Self {
        Strategy::from_heuristic(HeuristicKind::go())
    }

    pub fn from_heuristic(h: HeuristicKind) -> Self {
        match h {
            HeuristicKind::Go { sign, fallback } => Strategy::Go { sign, fallback },
            HeuristicKind::Pgh => Strategy::Pgh,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Go { .. } => "go",
            Strategy::Pgh => "pgh",
            Strategy::Policy(_) => "policy",
            Strategy::Inversion => "inversion",
            Strategy::BayesFixed => "bayes-fixed",
        }
    }

    fn heuristic(&self) -> Option<HeuristicKind> {
        match *self {
            Strategy::Go { sign, fallback } => Some(HeuristicKind::Go { sign, fallback }),
            Strategy::Pgh => Some(HeuristicKind::Pgh),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a run needs besides the true phase and its random stream.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub n: usize,
    pub strategy: Strategy,
    /// Noise the simulated detector actually applies.
    pub sample_channel: NoiseChannel,
    /// Noise the Bayes update assumes; ideal for noise-unaware protocols.
    pub model_channel: NoiseChannel,
    pub geometry: Arc<GridGeometry>,
    /// Prior support for the online strategies; the full circle when `None`.
    pub support: Option<Interval>,
}

impl RunSetup {
    pub fn new(n: usize, strategy: Strategy, geometry: Arc<GridGeometry>) -> Self {
        RunSetup {
            n,
            strategy,
            sample_channel: NoiseChannel::Ideal,
            model_channel: NoiseChannel::Ideal,
            geometry,
            support: None,
        }
    }

    pub fn with_sample_channel(mut self, channel: NoiseChannel) -> Self {
        self.sample_channel = channel;
        self
    }

    pub fn with_model_channel(mut self, channel: NoiseChannel) -> Self {
        self.model_channel = channel;
        self
    }

    pub fn with_support(mut self, support: Option<Interval>) -> Self {
        self.support = support;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::ZeroProbes);
        }
        self.sample_channel.validate()?;
        self.model_channel.validate()?;
        if let Strategy::Policy(p) = &self.strategy {
            p.validate()?;
            if p.n < self.n {
                return Err(Error::PolicyTooShort {
                    policy: p.n,
                    requested: self.n,
                });
            }
        }
        Ok(())
    }
}

/// State after probe `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub feedback: Phase,
    pub outcome: Outcome,
    pub estimate: Option<Phase>,
    /// Posterior Holevo standard deviation, when a posterior is kept.
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub phi_true: Phase,
    pub strategy: String,
    pub channel: NoiseChannel,
    pub model_channel: NoiseChannel,
    pub n: usize,
    pub seed: u64,
    pub stream: u64,
    pub steps: Vec<StepRecord>,
    pub final_estimate: Phase,
}

impl RunRecord {
    /// Estimate after the first `k` probes.
    pub fn estimate_at(&self, k: usize) -> Result<Phase> {
        let step = self
            .steps
            .get(k.wrapping_sub(1))
            .ok_or(Error::StepOutOfRange { k, n: self.steps.len() })?;
        step.estimate.ok_or(Error::UndefinedMean(0.0))
    }
}

/// One run at `phi_true` using stream `stream` of `seed`.
pub fn run_estimation(setup: &RunSetup, phi_true: Phase, seed: u64, stream: u64) -> Result<RunRecord> {
    let mut rng = stream_rng(seed, stream);
    run_with_rng(setup, phi_true, seed, stream, &mut rng, &mut |_, _| {})
}

/// As [`run_estimation`], calling `observer(k, grid)` with the posterior
/// before the first probe (`k = 0`) and after every update. Inversion keeps
/// no posterior and never calls the observer.
pub fn run_estimation_observed<F>(
    setup: &RunSetup,
    phi_true: Phase,
    seed: u64,
    stream: u64,
    mut observer: F,
) -> Result<RunRecord>
where
    F: FnMut(usize, &PosteriorGrid),
{
    let mut rng = stream_rng(seed, stream);
    run_with_rng(setup, phi_true, seed, stream, &mut rng, &mut observer)
}

fn run_with_rng(
    setup: &RunSetup,
    phi_true: Phase,
    seed: u64,
    stream: u64,
    rng: &mut SimRng,
    observer: &mut dyn FnMut(usize, &PosteriorGrid),
) -> Result<RunRecord> {
    setup.validate()?;
    let n = setup.n;
    let mut steps = Vec::with_capacity(n);

    let mut grid = match setup.strategy {
        Strategy::Inversion => None,
        Strategy::BayesFixed => Some(PosteriorGrid::uniform(setup.geometry.clone(), Some(half_circle()))?),
        _ => Some(PosteriorGrid::uniform(setup.geometry.clone(), setup.support)?),
    };
    if let Some(g) = &grid {
        observer(0, g);
    }

    let mut feedback = Phase::ZERO;
    let mut outcome = Outcome::Zero;
    let (mut n0, mut n1) = (0usize, 0usize);

    for k in 1..=n {
        feedback = match &setup.strategy {
            Strategy::Go { .. } | Strategy::Pgh => {
                let h = setup.strategy.heuristic().expect("online strategy");
                next_feedback(&h, grid.as_ref().expect("online strategies keep a posterior"), k, rng)?
            }
            Strategy::Policy(p) => apply_policy_step(p, feedback, outcome, k)?,
            Strategy::Inversion | Strategy::BayesFixed => Phase::ZERO,
        };
        outcome = sample_outcome(&setup.sample_channel, phi_true, feedback, rng);
        match outcome {
            Outcome::Zero => n0 += 1,
            Outcome::One => n1 += 1,
        }

        let mut sigma = None;
        let mut posterior_mean = None;
        if let Some(g) = grid.as_mut() {
            g.bayes_update(outcome, feedback, &setup.model_channel)?;
            observer(k, g);
            sigma = g.holevo_variance().ok().map(f64::sqrt);
            posterior_mean = g.circular_mean().ok();
        }

        let estimate = match setup.strategy {
            Strategy::Policy(_) => Some(feedback),
            Strategy::Inversion => Some(inversion_estimate(&CountSummary::new(n0, n1)?)),
            _ => posterior_mean,
        };
        steps.push(StepRecord {
            k,
            feedback,
            outcome,
            estimate,
            sigma,
        });
    }

    let final_estimate = steps
        .last()
        .and_then(|s| s.estimate)
        .ok_or(Error::UndefinedMean(0.0))?;
    Ok(RunRecord {
        phi_true,
        strategy: setup.strategy.name().to_string(),
        channel: setup.sample_channel,
        model_channel: setup.model_channel,
        n,
        seed,
        stream,
        steps,
        final_estimate,
    })
}

/// Aggregate of `m` final-estimate errors `theta_i = est_i - phi_true_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub m: usize,
    /// Circular mean of the estimates; `None` when they cancel.
    pub circ_mean: Option<Phase>,
    /// Circular mean of the errors, in `(-pi, pi]`; `None` when they cancel.
    pub mean_error: Option<f64>,
    /// `|sum e^{i theta}| / m`.
    pub sharpness: f64,
    /// `sqrt(S^-2 - 1)`; infinite when `S` vanishes.
    pub sigma_est: f64,
    pub err_mean: f64,
    pub err_sigma: f64,
    /// Mean of `theta^2` with `theta` wrapped to `(-pi, pi]`.
    pub quad_loss: f64,
}

impl BatchStats {
    /// Statistics from `(phi_true, estimate)` pairs; needs at least two.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Phase, Phase)>,
    {
        let mut errors = Resultant::default();
        let mut estimates = Resultant::default();
        let mut loss = 0.0;
        let mut m = 0usize;
        for (truth, est) in pairs {
            let theta = wrap_pi(est.value() - truth.value());
            let (s, c) = theta.sin_cos();
            errors.re += c;
            errors.im += s;
            let (s, c) = est.value().sin_cos();
            estimates.re += c;
            estimates.im += s;
            loss += theta * theta;
            m += 1;
        }
        if m < 2 {
            return Err(Error::TooFewRuns { min: 2, got: m });
        }
        let mf = m as f64;
        let sharpness = (errors.length() / mf).min(1.0);
        let sigma_est = if sharpness < MIN_RESULTANT {
            f64::INFINITY
        } else {
            (sharpness.powi(-2) - 1.0).max(0.0).sqrt()
        };
        Ok(BatchStats {
            m,
            circ_mean: estimates.direction().ok().map(Phase::new),
            mean_error: errors.direction().ok().map(wrap_pi),
            sharpness,
            sigma_est,
            err_mean: sigma_est / mf.sqrt(),
            err_sigma: sigma_est / (2.0 * (mf - 1.0)).sqrt(),
            quad_loss: loss / mf,
        })
    }

    pub fn from_records(records: &[RunRecord]) -> Result<Self> {
        Self::from_pairs(records.iter().map(|r| (r.phi_true, r.final_estimate)))
    }
}

/// Where the true phases of a batch come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruePhase {
    Fixed(Phase),
    /// Each run draws its own phase uniformly from its stream before probing.
    Uniform,
}

/// Statistics at one probe count of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub n: usize,
    pub stats: BatchStats,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    /// Statistics at `setup.n`.
    pub stats: BatchStats,
    /// One entry per requested probe count, in request order.
    pub scan: Vec<ScanPoint>,
    /// Empty unless records were requested.
    pub records: Vec<RunRecord>,
}

/// Options for [`run_batch_scan`].
#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    /// Probe counts to report besides `setup.n`; each must be `<= setup.n`.
    pub scan: Vec<usize>,
    pub keep_records: bool,
}

/// `m` runs at `phi_true` with `setup.n` probes, records kept.
pub fn run_batch(setup: &RunSetup, phi_true: Phase, m: usize, base_seed: u64) -> Result<BatchOutcome> {
    run_batch_scan(
        setup,
        TruePhase::Fixed(phi_true),
        m,
        base_seed,
        &BatchOptions {
            scan: Vec::new(),
            keep_records: true,
        },
    )
}

/// `m` runs, each at its own uniformly drawn true phase.
pub fn run_batch_random_phases(setup: &RunSetup, m: usize, base_seed: u64) -> Result<BatchOutcome> {
    run_batch_scan(
        setup,
        TruePhase::Uniform,
        m,
        base_seed,
        &BatchOptions {
            scan: Vec::new(),
            keep_records: true,
        },
    )
}

pub fn run_batch_scan(
    setup: &RunSetup,
    phi_true: TruePhase,
    m: usize,
    base_seed: u64,
    options: &BatchOptions,
) -> Result<BatchOutcome> {
    if m < 2 {
        return Err(Error::TooFewRuns { min: 2, got: m });
    }
    setup.validate()?;
    if let Some(&bad) = options.scan.iter().find(|&&k| k == 0 || k > setup.n) {
        return Err(Error::StepOutOfRange { k: bad, n: setup.n });
    }

    let records: Vec<RunRecord> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(base_seed, i);
            let phi = match phi_true {
                TruePhase::Fixed(p) => p,
                TruePhase::Uniform => uniform_phase(&mut rng),
            };
            run_with_rng(setup, phi, base_seed, i, &mut rng, &mut |_, _| {})
        })
        .collect::<Result<_>>()?;

    let stats = BatchStats::from_records(&records)?;
    let scan = options
        .scan
        .iter()
        .map(|&k| {
            let pairs = records
                .iter()
                .map(|r| Ok((r.phi_true, r.estimate_at(k)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(ScanPoint {
                n: k,
                stats: BatchStats::from_pairs(pairs)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchOutcome {
        stats,
        scan,
        records: if options.keep_records { records } else { Vec::new() },
    })
}

/// True phases for a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseSet {
    List(Vec<Phase>),
    /// `count` cell midpoints evenly spread over `[lo, hi)`.
    Even { count: usize, lo: f64, hi: f64 },
}

impl PhaseSet {
    /// `count` evenly spread phases over the full circle.
    pub fn full_circle(count: usize) -> Self {
        PhaseSet::Even { count, lo: 0.0, hi: TAU }
    }

    pub fn phases(&self) -> Result<Vec<Phase>> {
        let out = match self {
            PhaseSet::List(v) => v.clone(),
            PhaseSet::Even { count, lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                    return Err(Error::InvalidArgument(format!("phase range [{lo}, {hi}) is empty")));
                }
                let step = (hi - lo) / *count as f64;
                (0..*count).map(|j| Phase::new(lo + (j as f64 + 0.5) * step)).collect()
            }
        };
        if out.is_empty() {
            return Err(Error::InvalidArgument("a sweep needs at least one phase".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub phi_true: Phase,
    pub n: usize,
    pub stats: BatchStats,
}

/// Means over phases at one probe count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseAverage {
    pub n: usize,
    pub phases: usize,
    pub sigma_est: f64,
    /// Standard error of `sigma_est` across phases.
    pub sigma_est_err: f64,
    pub quad_loss: f64,
    pub quad_loss_err: f64,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    /// Rows ordered by phase, then probe count.
    pub rows: Vec<SweepRow>,
    /// One per probe count, ascending.
    pub averages: Vec<PhaseAverage>,
    pub records: Vec<RunRecord>,
}

impl Sweep {
    pub fn average_at(&self, n: usize) -> Option<&PhaseAverage> {
        self.averages.iter().find(|a| a.n == n)
    }
}

/// Batches of `m` runs at every phase; `scan` adds probe counts below
/// `setup.n` to the report.
pub fn sweep_phases(
    setup: &RunSetup,
    phases: &PhaseSet,
    m: usize,
    base_seed: u64,
    scan: &[usize],
    keep_records: bool,
) -> Result<Sweep> {
    let phases = phases.phases()?;
    let mut ns: Vec<usize> = scan.iter().copied().chain([setup.n]).collect();
    ns.sort_unstable();
    ns.dedup();

    let options = BatchOptions {
        scan: ns.clone(),
        keep_records,
    };
    let mut rows = Vec::with_capacity(phases.len() * ns.len());
    let mut records = Vec::new();
    for (j, &phi) in phases.iter().enumerate() {
        let batch = run_batch_scan(setup, TruePhase::Fixed(phi), m, base_seed.wrapping_add(j as u64), &options)?;
        rows.extend(batch.scan.iter().map(|p| SweepRow {
            phi_true: phi,
            n: p.n,
            stats: p.stats,
        }));
        records.extend(batch.records);
    }
    let averages = ns
        .iter()
        .map(|&n| phase_average(n, rows.iter().filter(|r| r.n == n).map(|r| &r.stats)))
        .collect();
    Ok(Sweep { rows, averages, records })
}

fn phase_average<'a, I: Iterator<Item = &'a BatchStats>>(n: usize, stats: I) -> PhaseAverage {
    let (sig, loss): (Vec<f64>, Vec<f64>) = stats.map(|s| (s.sigma_est, s.quad_loss)).unzip();
    let (sigma_est, sigma_est_err) = mean_and_error(&sig);
    let (quad_loss, quad_loss_err) = mean_and_error(&loss);
    PhaseAverage {
        n,
        phases: sig.len(),
        sigma_est,
        sigma_est_err,
        quad_loss,
        quad_loss_err,
    }
}

fn mean_and_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub n: usize,
    pub sql: f64,
    pub crb: f64,
}

/// `N^-1/2` and `[N I]^-1/2` for each probe count.
pub fn reference_curves(channel: &NoiseChannel, ns: &[usize]) -> Result<Vec<ReferenceRow>> {
    if ns.is_empty() {
        return Err(Error::InvalidArgument("no probe counts given".into()));
    }
    ns.iter()
        .map(|&n| {
            Ok(ReferenceRow {
                n,
                sql: standard_quantum_limit(n)?,
                crb: precision_bound(channel, n)?,
            })
        })
        .collect()
}

/// One line of a benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub strategy: String,
    pub channel: String,
    /// Empty for batches over random phases.
    pub phi_true: Option<f64>,
    pub n: usize,
    pub m: usize,
    pub circ_mean: Option<f64>,
    pub sigma_est: f64,
    pub err_mean: f64,
    pub err_sigma: f64,
    pub quad_loss: f64,
    pub sql: f64,
    pub crb: f64,
}

impl StatsRow {
    pub fn new(strategy: &str, channel: &NoiseChannel, phi_true: Option<Phase>, n: usize, stats: &BatchStats) -> Result<Self> {
        Ok(StatsRow {
            strategy: strategy.to_string(),
            channel: channel.to_string(),
            phi_true: phi_true.map(Phase::value),
            n,
            m: stats.m,
            circ_mean: stats.circ_mean.map(Phase::value),
            sigma_est: stats.sigma_est,
            err_mean: stats.err_mean,
            err_sigma: stats.err_sigma,
            quad_loss: stats.quad_loss,
            sql: standard_quantum_limit(n)?,
            crb: precision_bound(channel, n)?,
        })
    }
}

/// Writes rows with a header line.
pub fn write_stats_csv<W: Write>(out: W, rows: &[StatsRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for row in rows {
        wtr.serialize(row)?;
    }
    if rows.is_empty() {
        wtr.write_record([
            "strategy", "channel", "phi_true", "n", "m", "circ_mean", "sigma_est", "err_mean", "err_sigma",
            "quad_loss", "sql", "crb",
        ])?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}
