//! Fleet sizing for mixed static/dynamic feeder bus service when the
//! demand predictions that drive it are noisy.
//!
//! The pieces, roughly in pipeline order:
//!
//! * [`noise`]: six zero-mean noise families, their moments, and
//!   reproducible per-cell draws used to perturb ground-truth OD counts.
//! * [`routes`]: candidate routes (one shortest Hamiltonian path per
//!   station subset) and their waiting times.
//! * [`formulation`] and [`fleet`]: the allocation MILP, fleet sizing and
//!   re-evaluation of an allocation on realized demand.
//! * [`metrics`]: MAPE/RMSNE and the per-passenger time loss and gain.
//! * [`data`], [`experiment`], [`report`]: trip data, the parallel sweep
//!   and table output.
//!
//! The LP/MIP engine lives in the `dynfleet-lp` crate and is re-exported
//! as [`lp`].

pub mod data;
pub mod domain;
pub mod experiment;
pub mod error;
pub mod fleet;
pub mod formulation;
pub mod metrics;
pub mod noise;
pub mod quad;
pub mod report;
pub mod routes;

pub use dynfleet_lp as lp;
pub use error::{Error, Result};
