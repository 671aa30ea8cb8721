//! Surface finite elements (P1, Crouzeix-Raviart, interior-penalty DG) for the
//! Laplace-Beltrami problem `-Δu + cu = f` on closed hypersurfaces, with
//! auxiliary-space multilevel preconditioners and a kernel-aware PCG.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod krylov;
pub mod linalg;
pub mod mesh;
pub mod precond;
pub mod simplex;
pub mod transfer;

pub use error::{Error, Result};
