//! Free chain complexes over Z and Z/2 with labeled bases.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

use super::gf2::Gf2Matrix;
use super::snf::smith_normal_form;
use super::{AlgebraError, Result};

/// Coefficient ring of a complex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ring {
    Z,
    Z2,
}

/// A free chain complex with labeled graded basis and integer differential
/// matrices. Over Z/2 the entries are read mod 2.
///
/// `d[k]` maps degree k to degree k-1; entry `(i, j)` is the coefficient of
/// the i-th degree-(k-1) generator in the boundary of the j-th degree-k
/// generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreeChainComplex {
    pub ring: Ring,
    /// Generator labels per degree, degree 0 first.
    pub basis: Vec<Vec<String>>,
    /// Differential matrices; `differentials[k]` is d_{k+1}: C_{k+1} -> C_k.
    pub differentials: Vec<Vec<Vec<i64>>>,
}

/// First nonzero entry of d∘d, reported with its generator labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DSquaredWitness {
    pub from: String,
    pub to: String,
    pub degree: usize,
    pub value: i64,
}

/// Homology of a complex: free rank per degree, and over Z the torsion
/// coefficients (a divisibility chain) per degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomologyResult {
    pub ring: Ring,
    pub free_ranks: Vec<usize>,
    /// torsion[k] lists the torsion coefficients of H_k (Z only; empty
    /// lists over Z/2).
    pub torsion: Vec<Vec<u64>>,
}

impl HomologyResult {
    /// Betti numbers with trailing zeros trimmed.
    pub fn betti(&self) -> Vec<usize> {
        let mut b = self.free_ranks.clone();
        while b.last() == Some(&0) {
            b.pop();
        }
        b
    }
}

impl FreeChainComplex {
    /// Builds a complex and validates matrix shapes (not d² — callers that
    /// construct differentials numerically verify that separately and want
    /// the witness).
    pub fn new(
        ring: Ring,
        basis: Vec<Vec<String>>,
        differentials: Vec<Vec<Vec<i64>>>,
    ) -> Result<Self> {
        let c = FreeChainComplex {
            ring,
            basis,
            differentials,
        };
        c.check_shapes()?;
        Ok(c)
    }

    pub fn max_degree(&self) -> usize {
        self.basis.len().saturating_sub(1)
    }

    pub fn dim(&self, degree: usize) -> usize {
        self.basis.get(degree).map_or(0, Vec::len)
    }

    pub fn total_dim(&self) -> usize {
        self.basis.iter().map(Vec::len).sum()
    }

    /// d_{degree}: C_degree -> C_{degree-1} as raw entries (empty if out of
    /// range).
    pub fn differential(&self, degree: usize) -> Option<&Vec<Vec<i64>>> {
        if degree == 0 {
            return None;
        }
        self.differentials.get(degree - 1)
    }

    fn check_shapes(&self) -> Result<()> {
        for (k, d) in self.differentials.iter().enumerate() {
            let rows = d.len();
            let cols = d.first().map_or(0, Vec::len);
            let want_rows = self.dim(k);
            let want_cols = self.dim(k + 1);
            // A map into or out of a zero module may be written as an empty
            // vector; only shapes carrying entries must match exactly.
            if (want_rows == 0 || want_cols == 0) && d.iter().all(|r| r.is_empty() || want_cols > 0)
            {
                continue;
            }
            if rows != want_rows || d.iter().any(|r| r.len() != cols) || cols != want_cols {
                return Err(AlgebraError::ShapeMismatch {
                    degree: k + 1,
                    rows,
                    cols,
                    expected_rows: want_rows,
                });
            }
        }
        Ok(())
    }

    /// Verifies d∘d = 0; returns the first offending entry as a witness.
    pub fn verify_d_squared(&self) -> Result<Option<DSquaredWitness>> {
        self.check_shapes()?;
        let modulus: i64 = match self.ring {
            Ring::Z => 0,
            Ring::Z2 => 2,
        };
        for k in 1..self.differentials.len() {
            let lo = &self.differentials[k - 1]; // C_k -> C_{k-1}
            let hi = &self.differentials[k]; // C_{k+1} -> C_k
            let rows = self.dim(k - 1);
            let mid = self.dim(k);
            let cols = self.dim(k + 1);
            let entry = |d: &[Vec<i64>], i: usize, j: usize| -> i64 {
                d.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0)
            };
            for j in 0..cols {
                for i in 0..rows {
                    let mut acc: i64 = 0;
                    for m in 0..mid {
                        acc += entry(lo, i, m) * entry(hi, m, j);
                    }
                    if modulus != 0 {
                        acc = acc.rem_euclid(modulus);
                    }
                    if acc != 0 {
                        return Ok(Some(DSquaredWitness {
                            from: self.basis[k + 1][j].clone(),
                            to: self.basis[k - 1][i].clone(),
                            degree: k + 1,
                            value: acc,
                        }));
                    }
                }
            }
        }
        Ok(None)
    }

    fn gf2_differential(&self, degree: usize) -> Gf2Matrix {
        let rows = self.dim(degree.saturating_sub(1));
        let cols = self.dim(degree);
        let mut m = Gf2Matrix::zeros(rows, cols);
        if let Some(d) = self.differential(degree) {
            for (i, row) in d.iter().enumerate() {
                for (j, &e) in row.iter().enumerate() {
                    if e.rem_euclid(2) == 1 {
                        m.set(i, j, true);
                    }
                }
            }
        }
        m
    }

    /// Homology: Gaussian elimination over Z/2, Smith normal form over Z.
    pub fn homology(&self) -> HomologyResult {
        let degrees = self.basis.len();
        let mut free_ranks = vec![0usize; degrees];
        let mut torsion = vec![Vec::new(); degrees];
        match self.ring {
            Ring::Z2 => {
                for k in 0..degrees {
                    let rank_dk = if k == 0 { 0 } else { self.gf2_differential(k).rank() };
                    let rank_dk1 = if k + 1 < degrees {
                        self.gf2_differential(k + 1).rank()
                    } else {
                        0
                    };
                    free_ranks[k] = self.dim(k) - rank_dk - rank_dk1;
                }
            }
            Ring::Z => {
                let one = BigInt::one();
                let empty: Vec<BigInt> = Vec::new();
                let factors: Vec<Vec<BigInt>> = (0..degrees)
                    .map(|k| {
                        self.differential(k + 1)
                            .map(|d| smith_normal_form(d))
                            .unwrap_or_default()
                    })
                    .collect();
                for k in 0..degrees {
                    let rank_dk = if k == 0 {
                        &empty
                    } else {
                        &factors[k - 1]
                    };
                    let rank_dk1 = &factors[k];
                    free_ranks[k] = self.dim(k) - rank_dk.len() - rank_dk1.len();
                    torsion[k] = rank_dk1
                        .iter()
                        .filter(|f| **f != one)
                        .map(|f| u64::try_from(f).expect("torsion coefficient fits u64"))
                        .collect();
                }
            }
        }
        HomologyResult {
            ring: self.ring,
            free_ranks,
            torsion,
        }
    }

    /// Looks up a generator by label.
    pub fn locate(&self, label: &str) -> Result<(usize, usize)> {
        for (deg, names) in self.basis.iter().enumerate() {
            if let Some(i) = names.iter().position(|n| n == label) {
                return Ok((deg, i));
            }
        }
        Err(AlgebraError::UnknownLabel(label.to_string()))
    }

    /// Total-complex Z/2 Betti numbers per degree (used by the spectral
    /// sequence convergence certificate, which works over Z/2).
    pub fn z2_betti(&self) -> Vec<usize> {
        let degrees = self.basis.len();
        (0..degrees)
            .map(|k| {
                let rank_dk = if k == 0 { 0 } else { self.gf2_differential(k).rank() };
                let rank_dk1 = if k + 1 < degrees {
                    self.gf2_differential(k + 1).rank()
                } else {
                    0
                };
                self.dim(k) - rank_dk - rank_dk1
            })
            .collect()
    }

    /// All differential entries as (from_label, to_label, coeff) triples.
    pub fn entries(&self) -> Vec<(String, String, i64)> {
        let mut out = Vec::new();
        for k in 1..self.basis.len() {
            if let Some(d) = self.differential(k) {
                for (i, row) in d.iter().enumerate() {
                    for (j, &e) in row.iter().enumerate() {
                        if e != 0 {
                            out.push((
                                self.basis[k][j].clone(),
                                self.basis[k - 1][i].clone(),
                                e,
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    /// Serializable summary keyed by degree.
    pub fn dims_by_degree(&self) -> BTreeMap<usize, usize> {
        self.basis
            .iter()
            .enumerate()
            .map(|(k, b)| (k, b.len()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(pre: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{pre}{i}")).collect()
    }

    #[test]
    fn zero_differential_is_a_complex() {
        let c = FreeChainComplex::new(
            Ring::Z2,
            vec![labels("m", 1), vec![], labels("x", 1)],
            vec![vec![], vec![]],
        )
        .unwrap();
        assert_eq!(c.verify_d_squared().unwrap(), None);
        assert_eq!(c.homology().betti(), vec![1, 0, 1]);
    }

    #[test]
    fn witness_points_at_first_failure() {
        // d_2 = [1], d_1 = [1] over Z/2: d^2 = 1 at the unique entry.
        let c = FreeChainComplex::new(
            Ring::Z2,
            vec![labels("a", 1), labels("b", 1), labels("c", 1)],
            vec![vec![vec![1]], vec![vec![1]]],
        )
        .unwrap();
        let w = c.verify_d_squared().unwrap().unwrap();
        assert_eq!(w.from, "c0");
        assert_eq!(w.to, "a0");
        assert_eq!(w.value, 1);
    }

    #[test]
    fn circle_over_z() {
        // Two vertices, two edges glued into a circle.
        let c = FreeChainComplex::new(
            Ring::Z,
            vec![labels("v", 2), labels("e", 2)],
            vec![vec![vec![-1, 1], vec![1, -1]]],
        )
        .unwrap();
        assert_eq!(c.verify_d_squared().unwrap(), None);
        let h = c.homology();
        assert_eq!(h.free_ranks, vec![1, 1]);
        assert!(h.torsion.iter().all(Vec::is_empty));
    }

    #[test]
    fn torsion_from_degree_two_map() {
        // 0 -> Z --2--> Z -> 0 gives H_0 = Z/2.
        let c = FreeChainComplex::new(
            Ring::Z,
            vec![labels("a", 1), labels("b", 1)],
            vec![vec![vec![2]]],
        )
        .unwrap();
        let h = c.homology();
        assert_eq!(h.free_ranks, vec![0, 0]);
        assert_eq!(h.torsion[0], vec![2]);
    }

    #[test]
    fn shape_mismatch_is_caught() {
        let r = FreeChainComplex::new(
            Ring::Z2,
            vec![labels("a", 2), labels("b", 1)],
            vec![vec![vec![1]]],
        );
        assert!(matches!(r, Err(AlgebraError::ShapeMismatch { .. })));
    }
}
