//! Sparse kernel interpolation by greedy center insertion and removal, with
//! fixed-size fine-tuning by the kernel exchange algorithm (KEA).

// `!(x > tol)` comparisons are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod greedy;
pub mod io;
pub mod kea;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod points;

#[cfg(test)]
mod testutil;

pub use error::{KeaError, Result};
pub use kernel::{matern_radial, KernelDescriptor, KernelFamily, LinearTransform};
pub use linalg::{cholesky, CholeskyFactor, PIVOT_TOL};
pub use model::{Dataset, KernelModel};
pub use points::Points;
