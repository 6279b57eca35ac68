//! Near-optimal single-sample distributions for estimating the average of an
//! adversarially chosen 1-Lipschitz function on a finite metric space.
//!
//! The pieces, bottom up:
//!
//! - [`metric`]: validated, diameter-normalized metric spaces, 1-medians and
//!   the universal lower bound on randomized error.
//! - [`lipschitz`]: functions, the error functional, and the repair of
//!   relaxed-Lipschitz functions into Lipschitz ones.
//! - [`lp`]: a small dense simplex used by the oracles and the game solver.
//! - [`adversary`]: separation oracles (exact sign enumeration, a dynamic
//!   program on the line, and exhaustive search over a doubling-metric grid).
//! - [`solver`]: constraint generation over an oracle with certified bounds.
//! - [`interval`]: the closed-form optimum on `[0, 1]` and its numeric checks.
//! - [`io`]: JSON schemas for metrics, functions and distributions.

pub mod adversary;
pub mod error;
pub mod interval;
pub mod io;
pub mod lipschitz;
pub mod lp;
pub mod metric;
pub mod solver;

pub use error::{Error, Result};
pub use lipschitz::{DiscreteFunction, SamplingDistribution, SlackVector};
pub use metric::{LineMetric, MedianInfo, MetricSpace};
