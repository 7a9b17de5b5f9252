//! Hawkes process toolkit: simulation, nonparametric kernel estimation by
//! covariance spectral inversion, and automatic decomposition of the
//! estimate into sums and products of four interpretable base kernels.
//!
//! The pipeline, end to end:
//!
//! 1. [`covariance::covariance_grid`] bins the events and estimates the
//!    stationary covariance on a lag grid.
//! 2. [`spectral::invert_to_kernel`] turns the covariance into a
//!    nonparametric kernel estimate through a minimum-phase factorization.
//! 3. [`fit`] matches base kernels and one-level compositions to the
//!    estimate by L1 residue.
//! 4. [`search::decompose`] runs the greedy two-level selection with
//!    stationarity gating and compares against an exponential model fitted
//!    by likelihood ascent.
// `!(x > 0.0)` checks are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod error;
pub mod events;
pub mod fit;
pub mod io;
pub mod kernels;
pub mod likelihood;
pub mod numeric;
pub mod optim;
pub mod report;
pub mod search;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
pub use events::EventSequence;
pub use kernels::{BaseKernel, CompositeKernel, KernelFamily, StationarityVerdict};
pub use simulate::HawkesModel;
