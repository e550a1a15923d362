//! Differentially private network statistics, synthetic network models,
//! and epidemic simulation.
//!
//! The crate implements a three-stage pipeline over attributed contact
//! networks:
//!
//! 1. [`dp`]: release network summary statistics under node-level
//!    differential privacy (degree truncation, Laplace noise, budget
//!    allocation, clipping);
//! 2. [`sbm`] / [`ergm`]: fit stochastic block models and exponential
//!    random graph models to those (noisy or exact) summaries and sample
//!    synthetic networks from them;
//! 3. [`sim`]: run discrete-time SIS epidemics on the synthetic networks,
//!    with a baseline and a test-and-treat intervention scenario.
//!
//! The [`experiment`] module orchestrates the full factorial sweep over
//! privacy budgets and truncation degrees, and [`anova`] decomposes the
//! resulting variation into release, network-sampling and simulation
//! components.
//!
//! See the `examples/` directory for one runnable example per capability,
//! and the `dpnetsim` binary for the file-in/file-out command-line
//! interface.

#![allow(clippy::needless_range_loop)] // index loops mirror the k x k matrix math

pub mod anova;
pub mod dp;
pub mod ergm;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod io;
pub mod results;
pub mod sbm;
pub mod seed;
pub mod sim;
pub mod stats;

pub use dp::{release_statistics, truncate_degree, Epsilon, PrivateRelease, ReleaseSpec};
pub use error::{Error, Result};
pub use graph::{AttributeSchema, AttributedGraph};
pub use stats::StatKind;
