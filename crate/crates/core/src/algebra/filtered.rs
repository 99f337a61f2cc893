//! Filtered chain complexes and their JSON interchange format.

use serde::{Deserialize, Serialize};

use super::complex::{FreeChainComplex, Ring};
use super::{AlgebraError, Result};

/// A chain complex with an increasing filtration assigned per generator.
/// The differential must not increase filtration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilteredComplex {
    pub complex: FreeChainComplex,
    /// Filtration level per generator, indexed like `complex.basis`.
    pub filtration: Vec<Vec<usize>>,
}

/// Flat interchange schema: ring, generators, differential entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilteredComplexFile {
    pub ring: Ring,
    pub generators: Vec<GeneratorRecord>,
    /// Entries (from_label, to_label, coeff).
    pub differential: Vec<(String, String, i64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorRecord {
    pub label: String,
    pub degree: usize,
    pub filtration: usize,
}

impl FilteredComplex {
    /// Validates the filtration invariant d F^k ⊆ F^k.
    pub fn new(complex: FreeChainComplex, filtration: Vec<Vec<usize>>) -> Result<Self> {
        assert_eq!(filtration.len(), complex.basis.len());
        for (k, f) in filtration.iter().enumerate() {
            assert_eq!(f.len(), complex.dim(k));
        }
        let fc = FilteredComplex {
            complex,
            filtration,
        };
        fc.check_filtration()?;
        Ok(fc)
    }

    fn check_filtration(&self) -> Result<()> {
        for k in 1..self.complex.basis.len() {
            if let Some(d) = self.complex.differential(k) {
                for (i, row) in d.iter().enumerate() {
                    for (j, &e) in row.iter().enumerate() {
                        if e != 0 && self.filtration[k - 1][i] > self.filtration[k][j] {
                            return Err(AlgebraError::FiltrationViolated {
                                from: self.complex.basis[k][j].clone(),
                                to: self.complex.basis[k - 1][i].clone(),
                                from_level: self.filtration[k][j],
                                to_level: self.filtration[k - 1][i],
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Trivial filtration (everything at level 0).
    pub fn trivial(complex: FreeChainComplex) -> Self {
        let filtration = complex.basis.iter().map(|b| vec![0; b.len()]).collect();
        FilteredComplex {
            complex,
            filtration,
        }
    }

    pub fn max_filtration(&self) -> usize {
        self.filtration
            .iter()
            .flat_map(|f| f.iter().copied())
            .max()
            .unwrap_or(0)
    }

    pub fn to_file(&self) -> FilteredComplexFile {
        let mut generators = Vec::new();
        for (deg, names) in self.complex.basis.iter().enumerate() {
            for (i, label) in names.iter().enumerate() {
                generators.push(GeneratorRecord {
                    label: label.clone(),
                    degree: deg,
                    filtration: self.filtration[deg][i],
                });
            }
        }
        FilteredComplexFile {
            ring: self.complex.ring,
            generators,
            differential: self.complex.entries(),
        }
    }

    pub fn from_file(file: &FilteredComplexFile) -> Result<Self> {
        let max_deg = file.generators.iter().map(|g| g.degree).max().unwrap_or(0);
        let mut basis: Vec<Vec<String>> = vec![Vec::new(); max_deg + 1];
        let mut filtration: Vec<Vec<usize>> = vec![Vec::new(); max_deg + 1];
        for g in &file.generators {
            basis[g.degree].push(g.label.clone());
            filtration[g.degree].push(g.filtration);
        }
        let dims: Vec<usize> = basis.iter().map(Vec::len).collect();
        let mut differentials: Vec<Vec<Vec<i64>>> = (0..max_deg)
            .map(|k| vec![vec![0i64; dims[k + 1]]; dims[k]])
            .collect();
        let locate = |label: &str| -> Result<(usize, usize)> {
            for (deg, names) in basis.iter().enumerate() {
                if let Some(i) = names.iter().position(|n| n == label) {
                    return Ok((deg, i));
                }
            }
            Err(AlgebraError::UnknownLabel(label.to_string()))
        };
        for (from, to, coeff) in &file.differential {
            let (fd, fi) = locate(from)?;
            let (td, ti) = locate(to)?;
            if fd != td + 1 {
                return Err(AlgebraError::ShapeMismatch {
                    degree: fd,
                    rows: td,
                    cols: fi,
                    expected_rows: fd.saturating_sub(1),
                });
            }
            differentials[td][ti][fi] = *coeff;
        }
        let complex = FreeChainComplex::new(file.ring, basis, differentials)?;
        FilteredComplex::new(complex, filtration)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_step() -> FilteredComplex {
        let complex = FreeChainComplex::new(
            Ring::Z2,
            vec![
                vec!["m".into()],
                vec!["s".into()],
                vec!["t".into()],
            ],
            vec![vec![vec![1]], vec![vec![0]]],
        )
        .unwrap();
        FilteredComplex::new(complex, vec![vec![0], vec![1], vec![1]]).unwrap()
    }

    #[test]
    fn filtration_violation_detected() {
        let complex = FreeChainComplex::new(
            Ring::Z2,
            vec![vec!["a".into()], vec!["b".into()]],
            vec![vec![vec![1]]],
        )
        .unwrap();
        let r = FilteredComplex::new(complex, vec![vec![3], vec![1]]);
        assert!(matches!(r, Err(AlgebraError::FiltrationViolated { .. })));
    }

    #[test]
    fn interchange_round_trip() {
        let fc = two_step();
        let file = fc.to_file();
        let json = serde_json::to_string(&file).unwrap();
        let back: FilteredComplexFile = serde_json::from_str(&json).unwrap();
        let fc2 = FilteredComplex::from_file(&back).unwrap();
        assert_eq!(fc2.complex.basis, fc.complex.basis);
        assert_eq!(fc2.filtration, fc.filtration);
        assert_eq!(fc2.complex.differentials, fc.complex.differentials);
    }
}
