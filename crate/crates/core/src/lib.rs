//! Multi-vehicle trajectory planning as a generalized potential game.
//!
//! Pairwise passing orders (homotopy classes) are encoded with big-M
//! collision rows over per-player arc-length progress, and the joint problem
//! is solved as one mixed-integer QP by an embedded branch-and-bound.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod homotopy;
pub mod model;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod solver;

pub use error::{GeometryError, HomotopyError, ModelError, ScenarioError, SolverError};
