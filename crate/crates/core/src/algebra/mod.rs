//! Exact homological algebra: chain complexes over Z and Z/2, homology via
//! Smith normal form, filtered complexes, and a spectral-sequence engine
//! with a convergence certificate.
//!
//! No floating point enters this module; GF(2) work uses bitset rows and
//! integer work uses arbitrary-precision arithmetic where elimination can
//! grow entries.

mod complex;
mod filtered;
mod gf2;
mod snf;
mod spectral;

pub use complex::{DSquaredWitness, FreeChainComplex, HomologyResult, Ring};
pub use filtered::FilteredComplex;
pub use gf2::Gf2Matrix;
pub use snf::smith_normal_form;
pub use spectral::{compare_pages, PageDiff, PageEntry, PageTable, SpectralSequencePages};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("differential shape mismatch in degree {degree}: d_{degree} is {rows}x{cols}, expected {expected_rows} rows")]
    ShapeMismatch {
        degree: usize,
        rows: usize,
        cols: usize,
        expected_rows: usize,
    },
    #[error("d^2 != 0 first fails at d({from}) -> {to}")]
    NotAComplex { from: String, to: String },
    #[error("filtration increases along the differential: {from} (level {from_level}) -> {to} (level {to_level})")]
    FiltrationViolated {
        from: String,
        to: String,
        from_level: usize,
        to_level: usize,
    },
    #[error("spectral sequence not stabilized at page {0}")]
    NotStabilized(usize),
    #[error("homology over Z/2 requested on a Z complex (or vice versa)")]
    RingMismatch,
    #[error("unknown generator label `{0}`")]
    UnknownLabel(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, AlgebraError>;
