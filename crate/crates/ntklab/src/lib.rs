// Indexed loops are the house style in the dense linear-algebra kernels;
// iterator rewrites of triangular solves and layout walks read worse.
#![allow(clippy::needless_range_loop)]

//! Numerical laboratory for the NTK view of model reprogramming.
//!
//! The crate builds kernel ridge source models from explicit feature maps,
//! composes them with trainable input transformations and output mappings,
//! computes the empirical NTK blocks of the composed model, and verifies the
//! eigenvalue-spectrum bounds that relate source-model quality to target-model
//! quality. A small experiment pipeline sweeps source-model depth and records
//! the kernel spectrum alongside source/target losses.
//!
//! Module layout mirrors the data flow:
//!
//! * [`linalg`] — dense matrices, Jacobi eigensolver, ridge solves.
//! * [`nets`] — small feed-forward networks with exact Jacobians.
//! * [`kernels`] — feature maps, empirical NTKs, kernel ridge regression.
//! * [`reprogram`] — input transforms, output mappings, composed-model NTKs,
//!   gradient-descent reprogramming.
//! * [`bounds`] — numeric checkers for every spectrum bound and the
//!   generalization-gap bound.
//! * [`experiments`] — synthetic tasks, depth sweeps, report files.
//! * [`cli`] — config parsing and the command drivers behind the binary.

pub mod bounds;
pub mod cli;
pub mod experiments;
pub mod kernels;
pub mod linalg;
pub mod nets;
pub mod reprogram;

#[cfg(test)]
pub(crate) mod testutil;
