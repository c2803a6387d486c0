//! Riemannian optimization on normalized tensor trains.
//!
//! The crate provides a tensor-train (TT) toolkit ([`tt`]), the geometry of
//! the manifold of unit-norm fixed-rank TT tensors ([`manifold`]), a
//! Riemannian conjugate-gradient solver ([`opt`]) and three applications:
//! tensor completion ([`completion`]), extremal eigenvectors of Kronecker-sum
//! operators ([`eigen`]) and quantum-information objectives ([`quantum`]).

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod completion;
pub mod dense;
pub mod eigen;
pub mod error;
pub mod exec;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod opt;
pub mod quantum;
pub mod tt;

pub use dense::DenseTensor;
pub use error::{Error, Result};
pub use exec::Exec;
pub use linalg::{Matrix, C64};
pub use manifold::{NttPoint, Tangent};
pub use tt::{TtCore, TtRank, TtTensor};

/// Library version recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
