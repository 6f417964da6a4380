//! Prescribed scalar curvature on fiber bundles by vertical warping.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]
pub mod base;
pub mod commands;
pub mod config;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod feasibility;
pub mod field_io;
pub mod solver;
pub mod verification;

pub use base::{BaseManifold, BaseSpec, ScalarField};
pub use curvature::{constants, DimConstants, FiberSpec, SubmersionData};
pub use error::{Error, Result};
