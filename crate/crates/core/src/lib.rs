//! Adaptive single-photon phase estimation in a two-mode Mach-Zehnder
//! interferometer.
//!
//! The crate simulates photon-by-photon estimation of an unknown phase with
//! online Bayesian feedback ([`heuristics`]), offline swarm-trained policies
//! ([`pso`]) and non-adaptive baselines ([`nonadaptive`]), under ideal,
//! depolarizing and phase-noise detection ([`interferometer`]). The
//! [`harness`] module runs repeated experiments and aggregates their circular
//! statistics.

pub mod circular;
pub mod error;
pub mod harness;
pub mod heuristics;
pub mod interferometer;
pub mod nonadaptive;
pub mod posterior;
pub mod pso;
pub mod rng;

pub use error::{Error, Result};
pub use heuristics::{GoFallback, HeuristicKind, SignConvention};
pub use interferometer::{NoiseChannel, Outcome, Phase};
pub use posterior::{GaussianSummary, GridGeometry, Interval, PosteriorGrid};
