//! Simulation and verification toolkit for bond percolation on random
//! d-regular graphs near the critical point p = 1/(d-1).
//!
//! * [`config_graph`]: configuration model sampling, percolation masks, union-find components.
//! * [`exploration`]: the stub-level exploration process in lazy and fixed-matching modes.
//! * [`coupled_walks`]: increment series evaluated pathwise on an exploration trace.
//! * [`theory`]: closed-form exponents, curves and bounds.
//! * [`oracles`]: exact small-scale computations, independent of the modules above.
//! * [`mc_harness`]: reproducible parallel Monte Carlo runs and bound audits.

pub mod config_graph;
pub mod coupled_walks;
pub mod error;
pub mod exploration;
pub mod mc_harness;
pub mod oracles;
pub mod rng;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
