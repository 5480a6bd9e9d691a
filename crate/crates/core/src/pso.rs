//! Offline feedback policies trained by particle swarm optimisation.
//!
//! A policy `{dPhi_1 .. dPhi_N}` drives the feedback phase through
//! `Phi_k = Phi_{k-1} - (-1)^{x_{k-1}} dPhi_k`, starting from `Phi_0 = 0` and
//! `x_0 = 0`; the final feedback phase `Phi_N` is the estimate. The swarm
//! maximises a Monte-Carlo estimate of the sharpness `|E e^{i(phi - Phi_N)}|`
//! over uniformly drawn true phases.
//!
//! Particle moves follow
//!
//! ```text
//! delta <- beta1 xi1 (best - rho) + alpha2 xi2 (local_best - rho) + delta
//! rho   <- omega delta + rho
//! ```
//!
//! with the inertia weight acting on the position update, a ring neighbourhood
//! of configurable radius, and velocities clamped component-wise once the
//! particle has moved.
//!
//! Random streams: the swarm initialisation and the `xi` draws come from stream
//! 0 of `config.seed`; the fitness of particle `i` at iteration `t` uses stream
//! `i` of `derive_seed(config.seed, t + 1)`. Results therefore do not depend on
//! how fitness evaluations are scheduled across threads.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circular::{wrap_pi, Resultant};
use crate::error::{Error, Result};
use crate::interferometer::{sample_outcome, uniform_phase, NoiseChannel, Outcome, Phase};
use crate::rng::{derive_seed, stream_rng, uniform, SimRng};

/// Beyond this many probes trained policies stop tracking the standard limit.
pub const POLICY_PROBE_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub omega: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub neighborhood_radius: usize,
    pub fitness_samples: usize,
    pub velocity_clamp: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            swarm_size: 40,
            iterations: 300,
            omega: 0.7,
            beta1: 1.5,
            alpha2: 1.5,
            neighborhood_radius: 2,
            fitness_samples: 1000,
            velocity_clamp: PI,
            seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPsoConfig(msg));
        if self.swarm_size < 2 {
            return bad(format!("swarm_size must be at least 2, got {}", self.swarm_size));
        }
        if self.fitness_samples < 1 {
            return bad("fitness_samples must be at least 1".into());
        }
        for (name, v) in [("omega", self.omega), ("beta1", self.beta1), ("alpha2", self.alpha2)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.velocity_clamp > 0.0) {
            return bad(format!("velocity_clamp must be positive, got {}", self.velocity_clamp));
        }
        Ok(())
    }

    /// FNV-1a over the canonical field encoding; identifies the training setup.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                hash ^= *b as u64;
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(&(self.swarm_size as u64).to_le_bytes());
        eat(&(self.iterations as u64).to_le_bytes());
        eat(&self.omega.to_bits().to_le_bytes());
        eat(&self.beta1.to_bits().to_le_bytes());
        eat(&self.alpha2.to_bits().to_le_bytes());
        eat(&(self.neighborhood_radius as u64).to_le_bytes());
        eat(&(self.fitness_samples as u64).to_le_bytes());
        eat(&self.velocity_clamp.to_bits().to_le_bytes());
        eat(&self.seed.to_le_bytes());
        hash
    }
}

/// A trained (or hand-written) feedback sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub n: usize,
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub channel: NoiseChannel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PsoConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sharpness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Policy {
    /// Policy from raw shifts, each wrapped into `(-pi, pi]`.
    pub fn new(deltas: Vec<f64>) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::ZeroProbes);
        }
        if deltas.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidArgument("policy shifts must be finite".into()));
        }
        Ok(Policy {
            n: deltas.len(),
            deltas: deltas.into_iter().map(wrap_pi).collect(),
            channel: NoiseChannel::Ideal,
            config: None,
            config_hash: None,
            sharpness: None,
            seed: None,
        })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    /// Checks a deserialised policy.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::ZeroProbes);
        }
        if self.deltas.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "policy declares n = {} but has {} shifts",
                self.n,
                self.deltas.len()
            )));
        }
        if self.deltas.iter().any(|d| !(d.is_finite() && *d > -PI && *d <= PI)) {
            return Err(Error::InvalidArgument("policy shifts must lie in (-pi, pi]".into()));
        }
        self.channel.validate()
    }
}

/// `Phi_k = Phi_{k-1} - (-1)^{x_{k-1}} dPhi_k` for `1 <= k <= n`.
pub fn apply_policy_step(policy: &Policy, prev_phi: Phase, prev_outcome: Outcome, k: usize) -> Result<Phase> {
    if k == 0 || k > policy.n {
        return Err(Error::StepOutOfRange { k, n: policy.n });
    }
    Ok(policy_step(&policy.deltas, prev_phi, prev_outcome, k))
}

#[inline]
fn policy_step(deltas: &[f64], prev_phi: Phase, prev_outcome: Outcome, k: usize) -> Phase {
    prev_phi.shifted(-prev_outcome.fringe_sign() * deltas[k - 1])
}

/// One policy-driven run at true phase `phi`; returns `Phi_N`.
pub fn policy_estimate(deltas: &[f64], channel: &NoiseChannel, phi: Phase, rng: &mut SimRng) -> Phase {
    let mut feedback = Phase::ZERO;
    let mut outcome = Outcome::Zero;
    for k in 1..=deltas.len() {
        feedback = policy_step(deltas, feedback, outcome, k);
        outcome = sample_outcome(channel, phi, feedback, rng);
    }
    feedback
}

/// `|sum_k e^{i(phi_k - est_k)}| / K` over `samples` uniformly drawn true phases.
pub fn estimate_sharpness(deltas: &[f64], channel: &NoiseChannel, samples: usize, rng: &mut SimRng) -> f64 {
    if samples == 0 {
        return 0.0;
    }
    let (r, count) = Resultant::of_angles((0..samples).map(|_| {
        let phi = uniform_phase(rng);
        let est = policy_estimate(deltas, channel, phi, rng);
        phi.value() - est.value()
    }));
    (r.length() / count as f64).min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    /// Best personal best in the ring neighbourhood, refreshed each step.
    pub neighborhood_best: Vec<f64>,
}

impl Particle {
    pub fn new(position: Vec<f64>, velocity: Vec<f64>) -> Self {
        assert_eq!(position.len(), velocity.len(), "position and velocity lengths differ");
        Particle {
            best_position: position.clone(),
            neighborhood_best: position.clone(),
            position,
            velocity,
            best_fitness: f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub iteration: usize,
}

impl Swarm {
    pub fn new(particles: Vec<Particle>) -> Self {
        let dim = particles.first().map_or(0, |p| p.position.len());
        Swarm {
            best_position: vec![0.0; dim],
            best_fitness: f64::NEG_INFINITY,
            particles,
            iteration: 0,
        }
    }

    /// Positions uniform in `[-pi, pi)`, velocities uniform in `[-clamp, clamp)`.
    pub fn random(dim: usize, config: &PsoConfig, rng: &mut SimRng) -> Self {
        let particles = (0..config.swarm_size)
            .map(|_| {
                let position = (0..dim).map(|_| TAU * uniform(rng) - PI).collect();
                let velocity = (0..dim)
                    .map(|_| config.velocity_clamp * (2.0 * uniform(rng) - 1.0))
                    .collect();
                Particle::new(position, velocity)
            })
            .collect();
        Swarm::new(particles)
    }
}

/// One swarm iteration: evaluate, refresh bests, move.
///
/// `fitness(i, position)` scores particle `i`; evaluations run in parallel.
/// Velocities are clamped to `+-velocity_clamp` after the position update.
pub fn pso_step<F>(swarm: &mut Swarm, config: &PsoConfig, fitness: F, rng: &mut SimRng)
where
    F: Fn(usize, &[f64]) -> f64 + Sync,
{
    let scores: Vec<f64> = swarm
        .particles
        .par_iter()
        .enumerate()
        .map(|(i, p)| fitness(i, &p.position))
        .collect();

    for (p, &score) in swarm.particles.iter_mut().zip(&scores) {
        if score > p.best_fitness {
            p.best_fitness = score;
            p.best_position.clone_from(&p.position);
        }
        if score > swarm.best_fitness {
            swarm.best_fitness = score;
            swarm.best_position.clone_from(&p.position);
        }
    }

    let size = swarm.particles.len();
    let radius = config.neighborhood_radius.min(size / 2);
    let local: Vec<usize> = (0..size)
        .map(|i| {
            (0..=2 * radius)
                .map(|o| (i + size - radius + o) % size)
                .fold(i, |best, j| {
                    if swarm.particles[j].best_fitness > swarm.particles[best].best_fitness {
                        j
                    } else {
                        best
                    }
                })
        })
        .collect();
    for (i, &j) in local.iter().enumerate() {
        let lb = swarm.particles[j].best_position.clone();
        swarm.particles[i].neighborhood_best = lb;
    }

    let clamp = config.velocity_clamp;
    for p in &mut swarm.particles {
        for d in 0..p.position.len() {
            let xi1 = uniform(rng);
            let xi2 = uniform(rng);
            let rho = p.position[d];
            let v = config.beta1 * xi1 * (p.best_position[d] - rho)
                + config.alpha2 * xi2 * (p.neighborhood_best[d] - rho)
                + p.velocity[d];
            p.position[d] = config.omega * v + rho;
            p.velocity[d] = v.clamp(-clamp, clamp);
        }
    }
    swarm.iteration += 1;
}

/// Trains an `n`-probe policy against `channel`.
pub fn train_policy(n: usize, channel: &NoiseChannel, config: &PsoConfig) -> Result<Policy> {
    if n == 0 {
        return Err(Error::ZeroProbes);
    }
    config.validate()?;
    channel.validate()?;

    let mut rng = stream_rng(config.seed, 0);
    let mut swarm = Swarm::random(n, config, &mut rng);
    for t in 0..config.iterations {
        let iteration_seed = derive_seed(config.seed, t as u64 + 1);
        let fitness = |i: usize, position: &[f64]| {
            let mut frng = stream_rng(iteration_seed, i as u64);
            estimate_sharpness(position, channel, config.fitness_samples, &mut frng)
        };
        pso_step(&mut swarm, config, fitness, &mut rng);
    }
    if !swarm.best_fitness.is_finite() {
        // zero iterations: score the initial positions once
        let fitness = |i: usize, position: &[f64]| {
            let mut frng = stream_rng(derive_seed(config.seed, 1), i as u64);
            estimate_sharpness(position, channel, config.fitness_samples, &mut frng)
        };
        pso_step(&mut swarm, config, fitness, &mut rng);
    }

    let mut policy = Policy::new(swarm.best_position)?;
    policy.channel = *channel;
    policy.config = Some(*config);
    policy.config_hash = Some(format!("{:016x}", config.fingerprint()));
    policy.sharpness = Some(swarm.best_fitness);
    policy.seed = Some(config.seed);
    Ok(policy)
}
