//! Size-structured birth-death population with hierarchical (rank-based)
//! resource competition: deterministic stationary analysis, quasi-stationary
//! analysis of the stochastic model, and exact event-driven simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod det;
pub mod error;
pub mod experiments;
pub mod io;
pub mod model;
pub mod numerics;
pub mod qsd;
pub mod sim;
pub mod specfun;
pub mod stats;
pub mod tables;
pub mod verify;

pub use error::{Error, Result};
pub use model::{BirthLaw, GrowthLaw, ModelParams};
