//! Trajectory design for a mobile agent that gathers or disseminates
//! status updates over a mobility graph, with exact age-of-information
//! analytics for randomized trajectories and slotted simulators to check
//! them.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: mobility graphs, terminal weights and the experimental
//!   graph families.
//! * [`markov`]: stationary distribution, fundamental matrix, return-time
//!   moments, discrepancy and SLEM of a transition matrix.
//! * [`design`]: the peak-age optimal target distribution, the
//!   Metropolis-Hastings trajectory and the fastest-mixing solver.
//! * [`analysis`]: closed-form peak and average ages plus bounds.
//! * [`simulation`]: the information-gathering simulator (randomized,
//!   age-based and periodic trajectories) and a periodic brute-force search.
//! * [`dissemination`]: Ber/G/1-with-vacations formulas, the separation
//!   principle policy and the FCFS dissemination simulator.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{} vs {} (tol {})", a, b, $tol);
    }};
}

pub mod analysis;
pub mod design;
pub mod dissemination;
pub mod error;
pub mod graph;
pub mod markov;
pub mod rng;
pub mod simulation;
pub mod tolerances;

pub use analysis::{AgeReport, FactorReport};
pub use design::{DesignResult, SolverOptions};
pub use error::{Error, ErrorKind, Result};
pub use graph::{MobilityGraph, WeightMode};
pub use markov::{ChainAnalysis, TransitionMatrix};
pub use simulation::{AgeFunction, AgeStats, AgeTrace};
