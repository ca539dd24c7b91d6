//! SIR epidemics on Erdős–Rényi graphs whose S–I edges are deleted (delSIR)
//! or rewired to a uniformly random vertex (evoSIR).
//!
//! The crate is split along the lines of the analysis:
//!
//! * [`graph`]: G(n, μ/n) generation and a mutable multigraph.
//! * [`analytic`]: transmissibilities, critical values, generating-function
//!   fixed points and final-size predictions.
//! * [`sim`]: exact event-driven simulation of StaticSIR, delSIR and evoSIR.
//! * [`percolation`]: bond percolation and the sequential exploration
//!   processes whose fluid limits give epidemic sizes.
//! * [`ode`]: deterministic limit systems.
//! * [`cli`]: the `evosir` command-line front end.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod graph;
pub mod numeric;
pub mod ode;
pub mod params;
pub mod percolation;
pub mod seed;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{ComponentSummary, EvolvingGraph};
pub use params::{EpidemicParams, InfectionModel, Variant};

/// Version string echoed into every CSV header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
