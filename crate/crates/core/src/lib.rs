//! Asynchronous decentralized computation of entropic Wasserstein
//! barycenters.
//!
//! Each node of a communication graph holds a private probability measure.
//! The nodes jointly minimise the dual of the entropic barycenter problem,
//! with the consensus constraint encoded by the graph Laplacian `W`:
//!
//! ```text
//! min_η  Σ_i W*_{β,μ_i}([√W η]_i)
//! ```
//!
//! * [`optimizer`] holds the accelerated block coordinate method with stale
//!   reads, in its reference form (full histories) and its practical form
//!   (`η = u + θ²v`, one block per step).
//! * [`sim`] replays the decentralized version on a virtual clock: nodes
//!   wake up one at a time, use whatever neighbour gradients have arrived,
//!   and broadcast their own with random delays.
//! * [`transport`] evaluates the smoothed semi-discrete dual and its
//!   stochastic gradient; [`topology`] builds graphs and their spectra.
//! * [`experiments`], [`config`], [`mnist`] and [`cli`] turn runs into CSV
//!   traces, and [`diagnostics`] checks the numerical invariants.
//!
//! Every random draw comes from a ChaCha stream keyed by
//! `(seed, domain, a, b)` (see [`rng`]), so a run is a pure function of its
//! configuration.

pub mod blocks;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod mnist;
pub mod optimizer;
pub mod rng;
pub mod sim;
pub mod topology;
pub mod transport;

pub use error::{Error, Result};
