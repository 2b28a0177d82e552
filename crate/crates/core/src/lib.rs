//! Gauss–Bonnet–Chern mass of asymptotically flat graphs `{(x, f(x))} ⊂ ℝ^{n+m}`.
//!
//! The crate computes the q-th mass three ways (flux at infinity, bulk integral of
//! the Gauss–Bonnet curvature, boundary term on the inner boundary), checks the
//! pointwise identities that connect them, and evaluates Penrose-type and
//! Minkowski-type inequalities on explicit models.
//!
//! Layers, bottom up: [`tensor_algebra`] (antisymmetrised contractions),
//! [`jet`] and [`graph_geometry`] (metric and curvature of a graph from an
//! analytic third-order jet), [`gbc`] (the flux field and its divergence),
//! [`quadrature`] and [`mass`] (integrals), [`models`] (the model zoo) and
//! [`cli`] (batch runs).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod gbc;
pub mod graph_geometry;
pub mod jet;
pub mod mass;
pub mod models;
pub mod numerics;
pub mod quadrature;
pub mod tensor_algebra;

pub use error::{GbcError, Result};
