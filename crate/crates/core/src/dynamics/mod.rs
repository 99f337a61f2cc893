//! Critical points and negative-gradient dynamics of a scalar field on an
//! implicit manifold.
//!
//! Critical points come from Newton iteration on the first-order
//! stationarity system over a seeding grid; their indices come from the
//! eigenvalue signature of the projected second-order stationarity matrix.
//! Flow lines are integrated with an embedded Runge-Kutta pair plus
//! per-step retraction, classifying alpha/omega limits by basin entry.

mod audit;
mod config;
mod critical;
mod flow;

pub use audit::{morse_smale_audit, MorseSmaleReport};
pub use config::FlowConfig;
pub use critical::{find_critical_points, CriticalPoint, CriticalSet};
pub use flow::{flow_to_level, integrate_flow, FlowDirection, SaddlePassage, Trajectory};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("degenerate critical point at ({location}): tangential Hessian eigenvalue {eigenvalue:.3e} below tolerance {tol:.3e}")]
    DegenerateCritical {
        location: String,
        eigenvalue: f64,
        tol: f64,
    },
    #[error("step size underflow at ({location}) after {steps} steps")]
    StepSizeUnderflow { location: String, steps: usize },
    #[error("no critical points found (grid density {0} may be too low)")]
    NoCriticalPoints(usize),
    #[error("unknown critical point id `{0}`")]
    UnknownCritical(String),
}

pub type Result<T> = std::result::Result<T, DynamicsError>;
