//! Simplicial complexes from facet lists, with signed boundary matrices.

use std::collections::{BTreeMap, BTreeSet};

use crate::algebra::{FreeChainComplex, Ring};

use super::{DmtError, Result};

/// A finite simplicial complex. Cells are stored per dimension as sorted
/// vertex-id tuples; orientation comes from the sorted vertex order, so the
/// boundary of `[v0..vk]` is `sum_i (-1)^i [v0..v̂i..vk]`.
#[derive(Debug, Clone)]
pub struct SimplicialComplex {
    /// Vertex labels in id order.
    pub vertex_labels: Vec<String>,
    /// cells[d] lists the d-cells as sorted vertex-id vectors, ordered
    /// lexicographically.
    pub cells: Vec<Vec<Vec<u32>>>,
}

impl SimplicialComplex {
    /// Builds the downward closure of a facet list and verifies the signed
    /// boundary satisfies d∘d = 0 over Z.
    pub fn from_facets(facets: &[Vec<String>]) -> Result<Self> {
        if facets.is_empty() {
            return Err(DmtError::BadFile("empty facet list".into()));
        }
        let mut labels: Vec<String> = Vec::new();
        let mut by_label: BTreeMap<String, u32> = BTreeMap::new();
        let mut seen: BTreeSet<Vec<u32>> = BTreeSet::new();
        let mut all: BTreeSet<Vec<u32>> = BTreeSet::new();
        for facet in facets {
            if facet.is_empty() {
                return Err(DmtError::InvalidVertex(facet.clone()));
            }
            let mut ids: Vec<u32> = facet
                .iter()
                .map(|v| {
                    *by_label.entry(v.clone()).or_insert_with(|| {
                        labels.push(v.clone());
                        (labels.len() - 1) as u32
                    })
                })
                .collect();
            ids.sort_unstable();
            if ids.windows(2).any(|w| w[0] == w[1]) {
                return Err(DmtError::InvalidVertex(facet.clone()));
            }
            if !seen.insert(ids.clone()) {
                return Err(DmtError::DuplicateFacet(facet.clone()));
            }
            // Downward closure by subset enumeration.
            let k = ids.len();
            for mask in 1u32..(1 << k) {
                let sub: Vec<u32> = (0..k)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| ids[i])
                    .collect();
                all.insert(sub);
            }
        }
        let max_dim = all.iter().map(|s| s.len() - 1).max().unwrap_or(0);
        let mut cells: Vec<Vec<Vec<u32>>> = vec![Vec::new(); max_dim + 1];
        for s in all {
            cells[s.len() - 1].push(s);
        }
        // BTreeSet iteration is sorted, but group insertion interleaves
        // dimensions; sort each dimension for a canonical order.
        for c in &mut cells {
            c.sort_unstable();
        }
        let complex = SimplicialComplex {
            vertex_labels: labels,
            cells,
        };
        debug_assert_eq!(
            complex
                .chain_complex(Ring::Z)
                .verify_d_squared()
                .expect("shapes consistent"),
            None
        );
        Ok(complex)
    }

    /// Parses the facet-list format: one facet per line, whitespace
    /// separated vertex labels, `#` comments.
    pub fn from_facet_text(text: &str) -> Result<Self> {
        let mut facets = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            facets.push(line.split_whitespace().map(str::to_string).collect());
        }
        Self::from_facets(&facets)
    }

    pub fn dim(&self) -> usize {
        self.cells.len() - 1
    }

    /// Cell counts per dimension.
    pub fn cell_counts(&self) -> Vec<usize> {
        self.cells.iter().map(Vec::len).collect()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.cells
            .iter()
            .enumerate()
            .map(|(d, c)| if d % 2 == 0 { c.len() as i64 } else { -(c.len() as i64) })
            .sum()
    }

    /// Index of a cell within its dimension.
    pub fn cell_index(&self, cell: &[u32]) -> Option<usize> {
        let d = cell.len() - 1;
        self.cells.get(d)?.binary_search_by(|c| c.as_slice().cmp(cell)).ok()
    }

    /// Faces of a cell with their incidence signs (+1 at even positions).
    pub fn faces_signed(cell: &[u32]) -> Vec<(Vec<u32>, i64)> {
        if cell.len() == 1 {
            return Vec::new();
        }
        (0..cell.len())
            .map(|i| {
                let mut f = cell.to_vec();
                f.remove(i);
                (f, if i % 2 == 0 { 1 } else { -1 })
            })
            .collect()
    }

    pub fn cell_label(&self, cell: &[u32]) -> String {
        let names: Vec<&str> = cell
            .iter()
            .map(|&v| self.vertex_labels[v as usize].as_str())
            .collect();
        format!("[{}]", names.join(" "))
    }

    /// The full simplicial chain complex over the requested ring.
    pub fn chain_complex(&self, ring: Ring) -> FreeChainComplex {
        let basis: Vec<Vec<String>> = self
            .cells
            .iter()
            .map(|cs| cs.iter().map(|c| self.cell_label(c)).collect())
            .collect();
        let mut differentials = Vec::new();
        for d in 1..self.cells.len() {
            let rows = self.cells[d - 1].len();
            let cols = self.cells[d].len();
            let mut m = vec![vec![0i64; cols]; rows];
            for (j, cell) in self.cells[d].iter().enumerate() {
                for (face, sign) in Self::faces_signed(cell) {
                    let i = self.cell_index(&face).expect("closure contains faces");
                    m[i][j] = sign;
                }
            }
            differentials.push(m);
        }
        FreeChainComplex::new(ring, basis, differentials).expect("simplicial shapes consistent")
    }

    /// Cofaces (cells having `cell` as a codimension-1 face), by index
    /// in dimension `cell.len()`.
    pub fn cofaces(&self, cell: &[u32]) -> Vec<usize> {
        let d = cell.len(); // coface dimension index
        let Some(cofs) = self.cells.get(d) else {
            return Vec::new();
        };
        cofs.iter()
            .enumerate()
            .filter(|(_, c)| is_subset(cell, c))
            .map(|(i, _)| i)
            .collect()
    }
}

fn is_subset(small: &[u32], big: &[u32]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == s))
}

/// Built-in corpus:
/// - `delta{n}`: full n-simplex,
/// - `boundary_delta{n}`: boundary of the n-simplex (a sphere S^{n-1}),
/// - `torus7`: 7-vertex triangulation of the torus,
/// - `rp2_6`: 6-vertex triangulation of the real projective plane.
pub fn corpus_complex(id: &str) -> Result<SimplicialComplex> {
    fn simplex_facets(n: usize) -> Vec<Vec<String>> {
        vec![(0..=n).map(|v| v.to_string()).collect()]
    }
    fn boundary_facets(n: usize) -> Vec<Vec<String>> {
        // All n-subsets of {0..n}.
        (0..=n)
            .map(|skip| {
                (0..=n)
                    .filter(|&v| v != skip)
                    .map(|v| v.to_string())
                    .collect()
            })
            .collect()
    }
    if let Some(n) = id.strip_prefix("boundary_delta") {
        let n: usize = n
            .parse()
            .map_err(|_| DmtError::UnknownCorpus(id.to_string()))?;
        if n == 0 {
            return Err(DmtError::UnknownCorpus(id.to_string()));
        }
        return SimplicialComplex::from_facets(&boundary_facets(n));
    }
    if let Some(n) = id.strip_prefix("delta") {
        let n: usize = n
            .parse()
            .map_err(|_| DmtError::UnknownCorpus(id.to_string()))?;
        return SimplicialComplex::from_facets(&simplex_facets(n));
    }
    match id {
        "torus7" => {
            // 2-neighborly 7-vertex torus: triangles {i,i+1,i+3} and
            // {i,i+2,i+3} mod 7.
            let mut facets = Vec::new();
            for i in 0..7u32 {
                facets.push(vec![i, (i + 1) % 7, (i + 3) % 7]);
                facets.push(vec![i, (i + 2) % 7, (i + 3) % 7]);
            }
            let facets: Vec<Vec<String>> = facets
                .into_iter()
                .map(|f| f.into_iter().map(|v| v.to_string()).collect())
                .collect();
            SimplicialComplex::from_facets(&facets)
        }
        "rp2_6" => {
            let facets = [
                [1, 2, 3],
                [1, 2, 4],
                [1, 3, 5],
                [1, 4, 6],
                [1, 5, 6],
                [2, 3, 6],
                [2, 4, 5],
                [2, 5, 6],
                [3, 4, 5],
                [3, 4, 6],
            ];
            let facets: Vec<Vec<String>> = facets
                .iter()
                .map(|f| f.iter().map(|v| v.to_string()).collect())
                .collect();
            SimplicialComplex::from_facets(&facets)
        }
        _ => Err(DmtError::UnknownCorpus(id.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_delta3_counts() {
        let k = corpus_complex("boundary_delta3").unwrap();
        assert_eq!(k.cell_counts(), vec![4, 6, 4]);
        assert_eq!(k.euler_characteristic(), 2);
    }

    #[test]
    fn torus7_is_a_closed_surface() {
        let k = corpus_complex("torus7").unwrap();
        assert_eq!(k.cell_counts(), vec![7, 21, 14]);
        assert_eq!(k.euler_characteristic(), 0);
        // Closed surface: every edge lies in exactly two triangles.
        for edge in &k.cells[1] {
            assert_eq!(k.cofaces(edge).len(), 2, "edge {edge:?}");
        }
    }

    #[test]
    fn rp2_counts() {
        let k = corpus_complex("rp2_6").unwrap();
        assert_eq!(k.cell_counts(), vec![6, 15, 10]);
        assert_eq!(k.euler_characteristic(), 1);
        for edge in &k.cells[1] {
            assert_eq!(k.cofaces(edge).len(), 2);
        }
    }

    #[test]
    fn simplicial_homology_oracle_values() {
        let t = corpus_complex("torus7").unwrap();
        assert_eq!(t.chain_complex(Ring::Z2).homology().betti(), vec![1, 2, 1]);
        let h = t.chain_complex(Ring::Z).homology();
        assert_eq!(h.free_ranks, vec![1, 2, 1]);
        assert!(h.torsion.iter().all(Vec::is_empty));

        let rp2 = corpus_complex("rp2_6").unwrap();
        assert_eq!(rp2.chain_complex(Ring::Z2).homology().betti(), vec![1, 1, 1]);
        let h = rp2.chain_complex(Ring::Z).homology();
        assert_eq!(h.free_ranks, vec![1, 0, 0]);
        assert_eq!(h.torsion[1], vec![2]);

        for n in 2..=6 {
            let s = corpus_complex(&format!("boundary_delta{n}")).unwrap();
            let betti = s.chain_complex(Ring::Z2).homology().betti();
            let mut want = vec![0; n];
            want[0] = 1;
            want[n - 1] = 1;
            assert_eq!(betti, want, "boundary_delta{n}");
        }
    }

    #[test]
    fn facet_text_parsing() {
        let k = SimplicialComplex::from_facet_text("# triangle\na b c\n\nb c d # another\n")
            .unwrap();
        assert_eq!(k.cell_counts(), vec![4, 5, 2]);
        assert!(SimplicialComplex::from_facet_text("a a b").is_err());
        assert!(SimplicialComplex::from_facet_text("a b\na b").is_err());
        assert!(SimplicialComplex::from_facet_text("# nothing").is_err());
    }
}
