//! Acyclic partial matchings on the face poset (discrete vector fields).

use std::collections::{BTreeMap, VecDeque};

use super::complex::SimplicialComplex;
use super::{DmtError, Result};

/// A discrete vector field: a partial matching pairing each cell with at
/// most one codimension-1 coface, with no closed V-path.
#[derive(Debug, Clone)]
pub struct DiscreteVectorField {
    /// pair_up[d][i] = index of the (d+1)-cell matched above the i-th
    /// d-cell, if any.
    pub pair_up: Vec<Vec<Option<usize>>>,
    /// pair_down[d][i] = index of the (d-1)-cell matched below the i-th
    /// d-cell, if any.
    pub pair_down: Vec<Vec<Option<usize>>>,
}

impl DiscreteVectorField {
    /// The empty matching: every cell critical, trivially acyclic.
    pub fn empty(k: &SimplicialComplex) -> Self {
        DiscreteVectorField {
            pair_up: k.cells.iter().map(|c| vec![None; c.len()]).collect(),
            pair_down: k.cells.iter().map(|c| vec![None; c.len()]).collect(),
        }
    }

    /// Builds a vector field from explicit (face, coface) cell pairs and
    /// validates the matching discipline plus acyclicity.
    pub fn from_pairs(k: &SimplicialComplex, pairs: &[(Vec<u32>, Vec<u32>)]) -> Result<Self> {
        let mut v = Self::empty(k);
        for (lo, hi) in pairs {
            if hi.len() != lo.len() + 1 {
                return Err(DmtError::BadPair);
            }
            let d = lo.len() - 1;
            let (Some(li), Some(hi_idx)) = (k.cell_index(lo), k.cell_index(hi)) else {
                return Err(DmtError::BadPair);
            };
            if !k.cofaces(lo).contains(&hi_idx) {
                return Err(DmtError::BadPair);
            }
            if v.pair_up[d][li].is_some()
                || v.pair_down[d][li].is_some()
                || v.pair_down[d + 1][hi_idx].is_some()
                || v.pair_up[d + 1][hi_idx].is_some()
            {
                return Err(DmtError::BadPair);
            }
            v.pair_up[d][li] = Some(hi_idx);
            v.pair_down[d + 1][hi_idx] = Some(li);
        }
        v.check_acyclic(k)?;
        Ok(v)
    }

    pub fn is_critical(&self, d: usize, i: usize) -> bool {
        self.pair_up[d][i].is_none() && self.pair_down[d][i].is_none()
    }

    /// Critical cell indices per dimension.
    pub fn critical_cells(&self) -> Vec<Vec<usize>> {
        self.pair_up
            .iter()
            .zip(&self.pair_down)
            .map(|(up, down)| {
                (0..up.len())
                    .filter(|&i| up[i].is_none() && down[i].is_none())
                    .collect()
            })
            .collect()
    }

    pub fn critical_count(&self) -> usize {
        self.critical_cells().iter().map(Vec::len).sum()
    }

    /// Verifies that no closed V-path exists, dimension by dimension, by
    /// topological sort of the modified Hasse digraph on d-cells:
    /// an edge a -> b when b != a is a face of V(a).
    pub fn check_acyclic(&self, k: &SimplicialComplex) -> Result<()> {
        for d in 0..k.cells.len() {
            let n = k.cells[d].len();
            let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
            let mut indeg = vec![0usize; n];
            for (i, up) in self.pair_up[d].iter().enumerate() {
                let Some(up) = up else { continue };
                let coface = &k.cells[d + 1][*up];
                for (face, _) in SimplicialComplex::faces_signed(coface) {
                    let j = k.cell_index(&face).expect("closed complex");
                    if j != i {
                        out[i].push(j);
                        indeg[j] += 1;
                    }
                }
            }
            let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
            let mut seen = 0;
            while let Some(i) = queue.pop_front() {
                seen += 1;
                for &j in &out[i] {
                    indeg[j] -= 1;
                    if indeg[j] == 0 {
                        queue.push_back(j);
                    }
                }
            }
            if seen != n {
                return Err(DmtError::AcyclicityViolated { dim: d });
            }
        }
        Ok(())
    }
}

/// Greedy matching by repeated coreduction: whenever some cell has exactly
/// one unprocessed face, match the two; otherwise declare the smallest
/// unprocessed cell critical and continue. The vertex `priority`
/// permutation orders ties, so different priorities explore different
/// matchings (random restarts reuse this hook). Coreduction never creates
/// closed V-paths, but the result is re-checked anyway.
pub fn greedy_discrete_gradient(
    k: &SimplicialComplex,
    priority: &[u32],
) -> Result<DiscreteVectorField> {
    let nv = k.vertex_labels.len();
    assert_eq!(priority.len(), nv, "priority must permute the vertex set");
    let mut rank = vec![0usize; nv];
    for (r, &v) in priority.iter().enumerate() {
        rank[v as usize] = r;
    }
    let key = |cell: &[u32]| -> Vec<usize> {
        let mut ks: Vec<usize> = cell.iter().map(|&v| rank[v as usize]).collect();
        ks.sort_unstable();
        ks
    };

    let mut v = DiscreteVectorField::empty(k);
    let dims = k.cells.len();
    let mut alive: Vec<Vec<bool>> = k.cells.iter().map(|c| vec![true; c.len()]).collect();
    // Remaining alive-face counts per cell, plus the face lists.
    let mut face_idx: Vec<Vec<Vec<usize>>> = Vec::with_capacity(dims);
    for d in 0..dims {
        let mut per_dim = Vec::with_capacity(k.cells[d].len());
        for cell in &k.cells[d] {
            let faces: Vec<usize> = if d == 0 {
                Vec::new()
            } else {
                SimplicialComplex::faces_signed(cell)
                    .into_iter()
                    .map(|(f, _)| k.cell_index(&f).expect("closed complex"))
                    .collect()
            };
            per_dim.push(faces);
        }
        face_idx.push(per_dim);
    }
    let mut alive_faces: Vec<Vec<usize>> = face_idx
        .iter()
        .map(|per| per.iter().map(Vec::len).collect())
        .collect();
    let mut remaining: usize = k.cells.iter().map(Vec::len).sum();

    // Sorted queues by priority key for deterministic choices.
    let mut order: Vec<(usize, usize)> = Vec::new(); // (dim, idx) sorted by (dim, key)
    for d in 0..dims {
        let mut idxs: Vec<usize> = (0..k.cells[d].len()).collect();
        idxs.sort_by_key(|&i| key(&k.cells[d][i]));
        order.extend(idxs.into_iter().map(|i| (d, i)));
    }

    let mut kill = |d: usize,
                    i: usize,
                    alive: &mut Vec<Vec<bool>>,
                    alive_faces: &mut Vec<Vec<usize>>,
                    remaining: &mut usize,
                    queue: &mut VecDeque<(usize, usize)>| {
        if !alive[d][i] {
            return;
        }
        alive[d][i] = false;
        *remaining -= 1;
        for cof in k.cofaces(&k.cells[d][i]) {
            if alive[d + 1][cof] {
                alive_faces[d + 1][cof] -= 1;
                if alive_faces[d + 1][cof] == 1 {
                    queue.push_back((d + 1, cof));
                }
            }
        }
    };

    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    while remaining > 0 {
        // Coreduction sweep: match cells with a unique alive face.
        while let Some((d, i)) = queue.pop_front() {
            if !alive[d][i] || alive_faces[d][i] != 1 {
                continue;
            }
            let lo = *face_idx[d][i]
                .iter()
                .find(|&&f| alive[d - 1][f])
                .expect("count said one alive face");
            v.pair_up[d - 1][lo] = Some(i);
            v.pair_down[d][i] = Some(lo);
            kill(d, i, &mut alive, &mut alive_faces, &mut remaining, &mut queue);
            kill(
                d - 1,
                lo,
                &mut alive,
                &mut alive_faces,
                &mut remaining,
                &mut queue,
            );
        }
        if remaining == 0 {
            break;
        }
        // No coreduction pair available: the first alive cell in priority
        // order becomes critical.
        let (d, i) = *order
            .iter()
            .find(|&&(d, i)| alive[d][i])
            .expect("remaining > 0");
        kill(d, i, &mut alive, &mut alive_faces, &mut remaining, &mut queue);
    }

    v.check_acyclic(k)?;
    Ok(v)
}

/// Summary used by reports: critical cell count per dimension.
pub fn critical_histogram(v: &DiscreteVectorField) -> BTreeMap<usize, usize> {
    v.critical_cells()
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_empty())
        .map(|(d, c)| (d, c.len()))
        .collect()
}
