//! Exact and Monte Carlo machinery for random-walk cover times on bounded
//! degree graphs.
//!
//! * [`graph`]: graphs, generators, the edge-list format, balls and annuli.
//! * [`green`]: expected visits to a center before hitting an annulus.
//! * [`mdp`]: the adversarial cover-and-exit problem solved as an MDP.
//! * [`walk`]: seeded walks, cover-time tails and excursion statistics.
//! * [`martingale`]: the optional-infimum process built on the MDP values.
//! * [`exec`]: sequential / rayon sample scheduling.

pub mod error;
pub mod exec;
pub mod graph;
pub mod green;
pub mod mdp;
pub mod walk;
pub mod martingale;

pub use error::{Error, Result};
pub use exec::Execution;
pub use graph::{Ball, Graph, Region};
