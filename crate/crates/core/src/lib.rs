//! Generalized Lelong numbers of plurisubharmonic functions: exact values for
//! toric families and Monte Carlo estimates for everything expressible in
//! the expression language.

// `!(x > 0.0)` is how NaN gets rejected alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bergman;
pub mod error;
pub mod exec;
pub mod expr;
pub mod geometry;
pub mod kiselman;
pub mod montecarlo;
pub mod rng;
pub mod toric;
pub mod weights;

pub use error::{LelongError, Result};
pub use exec::Exec;
pub use expr::{classify_toric, parse, parse_in_dim, ComplexPoint, Poly, PolyMap, PshExpr, ToricForm, ToricKind};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
