//! Computational Morse theory on embedded manifolds.
//!
//! Two backends compute the same algebraic invariants:
//!
//! * a **numerical backend** ([`geometry`], [`dynamics`], [`moduli`]) that
//!   integrates the negative gradient flow of a smooth function on an
//!   implicit surface, classifies critical points, and measures the moduli
//!   spaces of connecting flow lines together with their broken-boundary
//!   structure;
//! * an **exact combinatorial backend** ([`dmt`]) based on acyclic matchings
//!   on simplicial complexes, valid in any dimension.
//!
//! Both feed the exact homological-algebra layer ([`algebra`]): chain
//! complexes over Z and Z/2, Smith-normal-form homology, filtered complexes
//! and their spectral sequences. Loop-space coefficient models and the
//! extended complex built from them live in [`coefficients`];
//! intersection-theoretic operations (representing cycles, triple counts) in
//! [`ops`]. The [`pipeline`] module is the user surface: declarative TOML
//! scenes, cached task execution, JSON reports, and SVG/CSV plot emission.

pub mod algebra;
pub mod coefficients;
pub mod dmt;
pub mod dynamics;
pub mod geometry;
pub mod moduli;
pub mod ops;
pub mod pipeline;

/// Tool version stamped into every report and cache key.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
