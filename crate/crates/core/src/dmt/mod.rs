//! Exact combinatorial backend: simplicial complexes, acyclic matchings,
//! V-paths, and the discrete Morse complex over Z and Z/2.
//!
//! The matching plays the role of the negative gradient flow: matched pairs
//! are collapsed, unmatched cells are critical, and alternating V-paths
//! between critical cells count like isolated flow lines. Everything here
//! is exact integer arithmetic, valid in any dimension.

mod complex;
mod matching;
mod morse;

pub use complex::{corpus_complex, SimplicialComplex};
pub use matching::{greedy_discrete_gradient, DiscreteVectorField};
pub use morse::{discrete_morse_complex, enumerate_v_paths, VPath};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DmtError {
    #[error("duplicate facet {0:?}")]
    DuplicateFacet(Vec<String>),
    #[error("facet with repeated or empty vertex set: {0:?}")]
    InvalidVertex(Vec<String>),
    #[error("matching is not acyclic: closed V-path through a {dim}-cell")]
    AcyclicityViolated { dim: usize },
    #[error("matched pair is not a codimension-1 incidence")]
    BadPair,
    #[error("unknown corpus complex `{0}`")]
    UnknownCorpus(String),
    #[error("facet file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Algebra(#[from] crate::algebra::AlgebraError),
}

pub type Result<T> = std::result::Result<T, DmtError>;
