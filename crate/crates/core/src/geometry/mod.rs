//! Scalar fields and implicit submanifolds of Euclidean space.
//!
//! A [`ScalarField`] is a closed expression over ambient coordinates
//! `x1..xN` (arithmetic, powers, `sin cos exp sqrt`), evaluated together
//! with its first and second derivatives by forward-mode jets. An
//! [`ImplicitManifold`] is the zero set of one or more constraint fields;
//! tangent projection and Newton retraction give the induced Riemannian
//! structure used by the gradient-flow backend.

mod expr;
mod jet;
mod manifold;

pub use expr::{ParseError, ScalarField};
pub use jet::{Jet1, Jet2};
pub use manifold::{AmbientPoint, Axis, ImplicitManifold, TorusAngles};

use thiserror::Error;

/// Constraint satisfaction tolerance; one order below the flow-integration
/// tolerance so constraint drift never dominates.
pub const TOL_CONSTRAINT: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum GeometryError {
    /// The expression is not smooth (or not defined) at the probed point.
    #[error("field `{field}` undefined at ({location}): {reason}")]
    UndefinedAtPoint {
        field: String,
        location: String,
        reason: String,
    },
    /// Constraint Jacobian is singular where full rank is required.
    #[error("constraint Jacobian rank-deficient at ({location})")]
    RankDeficient { location: String },
    /// Newton retraction failed to reach the constraint tolerance.
    #[error("retraction did not converge after {iters} iterations (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },
    /// Point has the wrong ambient dimension for the manifold or field.
    #[error("expected {expected} ambient coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, GeometryError>;
