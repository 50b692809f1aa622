//! Numerical geometry for Nikodym-type maximal operators on curved 3-manifolds.
//!
//! The crate covers metrics and curvature, geodesic integration with parallel
//! transport, Fermi charts about a geodesic, curvature classifiers along
//! geodesics, δ-tube averages and maximal operators on grids, tube
//! combinatorics, and the model canonical relation with its fold analysis.

// `!(x > 0.0)` also rejects NaN; tensor code indexes by component
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod boxcount;
pub mod classify;
pub mod combinatorics;
pub mod counterexample;
pub mod error;
pub mod expr;
pub mod fermi;
pub mod fold;
pub mod geodesic;
pub mod grid;
pub mod la;
pub mod maximal;
pub mod metric;
pub mod par;
pub mod scalar;
pub mod tube;

pub use error::{Error, Result};
pub use la::{Mat3, Vec3};
pub use metric::{builtin_metric, Aabb, BuiltinKind, BuiltinMetric, ExprMetric, Metric};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
