//! Moduli spaces of connecting flow lines on surfaces.
//!
//! For an index difference of one the moduli space is a signed finite set
//! of orbits; for an index difference of two it is a disjoint union of
//! open arcs and circles inside the unstable sphere of the source, whose
//! arc ends are broken flow lines through intermediate critical points.
//! The broken-end multiset must reproduce the product structure
//! `U_R  M^P_R x M^R_Q` exactly; that integer identity is checked, not
//! assumed. Loop extraction closes flow lines up through a fixed base
//! path, and compactified unstable manifolds assemble the same data into
//! disk-like cell complexes.

mod chart;
mod compactified;
mod connecting;
mod loops;

pub use chart::{ChartParam, CircleScan, ModuliContext, Transition, UnstableSphereChart};
pub use compactified::{compactified_unstable, BoundaryStratum, CompactifiedUnstable};
pub use connecting::{
    connecting_0d, connecting_1d, Arc1D, BrokenEnd, ConnectingManifold0D, ConnectingManifold1D,
    Orbit,
};
pub use loops::{extract_loop, extract_loop_broken, BasePath, LoopImage};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModuliError {
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("index difference of {got} where {want} is required for {context}")]
    WrongIndexDifference {
        got: i64,
        want: i64,
        context: &'static str,
    },
    #[error("unresolved omega limit near parameter {param:.12}: {reason}")]
    UnresolvedLimit { param: f64, reason: String },
    #[error("boundary identity violated for M^{source}_{target}: {ends} ends vs {expected} broken pairs")]
    InconsistentBoundary {
        source: String,
        target: String,
        ends: usize,
        expected: usize,
    },
    #[error("boundary strata fail to close up at {0}")]
    StrataGap(String),
    #[error("open loop: endpoints differ by {0:.3e}")]
    OpenLoop(f64),
    #[error("no simple base path found through the critical points")]
    NoBasePath,
    #[error("moduli computation needs a surface (dim 2), manifold has dim {0}")]
    NotASurface(usize),
}

pub type Result<T> = std::result::Result<T, ModuliError>;
