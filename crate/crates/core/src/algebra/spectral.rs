//! Spectral sequence of a filtered chain complex over Z/2.
//!
//! Pages are computed from the standard approximation subspaces
//! `Z^r_{p,q} = { x in F_p C_{p+q} : dx in F_{p-r} }` by exact GF(2) linear
//! algebra, with explicit representatives so page differentials can be
//! reported in terms of generator labels. A page differential d^r can only
//! be nonzero for r <= max filtration level, so computing through page
//! max_filt + 1 certifies stabilization; the convergence certificate
//! `sum_p dim E^inf_{p,k-p} = dim H_k(total)` ties the limit to the
//! homology of the total complex.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::filtered::FilteredComplex;
use super::gf2::{Gf2Matrix, Gf2Subspace};
use super::{AlgebraError, Result};

/// One (p, q) spot on a page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageEntry {
    pub p: usize,
    pub q: i64,
    pub dim: usize,
    /// Generator-label rendering of each chosen representative.
    pub representatives: Vec<String>,
}

/// A nonzero block of d^r with its matrix (rows indexed by target reps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageDifferentialBlock {
    pub from: (usize, i64),
    pub to: (usize, i64),
    pub rank: usize,
    pub matrix: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub r: usize,
    pub entries: Vec<PageEntry>,
    pub differentials: Vec<PageDifferentialBlock>,
}

impl Page {
    pub fn dim_at(&self, p: usize, q: i64) -> usize {
        self.entries
            .iter()
            .find(|e| e.p == p && e.q == q)
            .map_or(0, |e| e.dim)
    }

    pub fn rank_from(&self, p: usize, q: i64) -> usize {
        self.differentials
            .iter()
            .filter(|d| d.from == (p, q))
            .map(|d| d.rank)
            .sum()
    }

    pub fn rank_into(&self, p: usize, q: i64) -> usize {
        self.differentials
            .iter()
            .filter(|d| d.to == (p, q))
            .map(|d| d.rank)
            .sum()
    }

    pub fn total_dim(&self) -> usize {
        self.entries.iter().map(|e| e.dim).sum()
    }
}

/// All computed pages of the spectral sequence of a filtered complex.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralSequencePages {
    /// pages[i] is page r = i + 1.
    pub pages: Vec<Page>,
    /// First page from which all differentials vanish.
    pub r_stab: usize,
    /// Z/2 Betti numbers of the total complex.
    pub total_betti: Vec<usize>,
    /// Whether E^inf dims summed along antidiagonals equal total homology.
    pub convergence_ok: bool,
}

/// Serializable page table for cross-checking against expected tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageTable {
    pub pages: Vec<PageTableEntry>,
    /// Entries with p + q beyond this bound are ignored by comparisons.
    pub max_total_degree: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageTableEntry {
    pub r: usize,
    /// (p, q, dim), nonzero dims only.
    pub dims: Vec<(usize, i64, usize)>,
    /// (p, q, rank of d^r out of (p, q)), nonzero ranks only.
    pub ranks: Vec<(usize, i64, usize)>,
}

/// One disagreement between two page tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageDiff {
    pub r: usize,
    pub p: usize,
    pub q: i64,
    pub kind: String,
    pub got: usize,
    pub want: usize,
}

struct Spot {
    den: Gf2Subspace,
    reps: Vec<Gf2Matrix>,
}

/// Computes pages 1 through max_filtration + 1. `r_max` caps the work; if
/// the cap is below what certification needs, `NotStabilized(r_max)` is
/// returned rather than an uncertified answer.
pub fn spectral_sequence(fc: &FilteredComplex, r_max: usize) -> Result<SpectralSequencePages> {
    let cx = &fc.complex;
    let max_deg = cx.max_degree();
    let max_filt = fc.max_filtration();
    let total_betti = cx.z2_betti();

    let r_needed = max_filt + 1;
    if r_max < r_needed {
        return Err(AlgebraError::NotStabilized(r_max));
    }

    // Full mod-2 differential per degree: d_mats[n]: C_n -> C_{n-1}.
    let d_mats: Vec<Gf2Matrix> = (0..=max_deg)
        .map(|n| {
            let rows = if n == 0 { 0 } else { cx.dim(n - 1) };
            let mut m = Gf2Matrix::zeros(rows, cx.dim(n));
            if let Some(d) = cx.differential(n) {
                for (i, row) in d.iter().enumerate() {
                    for (j, &e) in row.iter().enumerate() {
                        if e.rem_euclid(2) == 1 {
                            m.set(i, j, true);
                        }
                    }
                }
            }
            m
        })
        .collect();

    // Image of a row vector x in C_n under d, as a row in C_{n-1}.
    let apply_d = |n: usize, x: &Gf2Matrix| -> Gf2Matrix {
        let d = &d_mats[n];
        let mut out = Gf2Matrix::zeros(1, d.rows().max(1));
        for j in 0..d.cols() {
            if x.get(0, j) {
                for i in 0..d.rows() {
                    if d.get(i, j) {
                        out.set(0, i, !out.get(0, i));
                    }
                }
            }
        }
        out
    };

    // Basis of Z^r_{p,q} = { x in F_p C_n : dx in F_{p-r} } as rows in
    // C_n coordinates. Returns a 0-row matrix with the right width when
    // empty; out-of-range n or negative p give the zero space.
    let z_space = |r: i64, p: i64, n: i64| -> Gf2Matrix {
        if n < 0 || n as usize > max_deg {
            return Gf2Matrix::zeros(0, 1);
        }
        let n = n as usize;
        let dim_n = cx.dim(n);
        if dim_n == 0 || p < 0 {
            return Gf2Matrix::zeros(0, dim_n.max(1));
        }
        let in_fp: Vec<usize> = (0..dim_n)
            .filter(|&i| (fc.filtration[n][i] as i64) <= p)
            .collect();
        if in_fp.is_empty() {
            return Gf2Matrix::zeros(0, dim_n);
        }
        let cut = p - r;
        let target_rows: Vec<usize> = if n == 0 {
            Vec::new()
        } else {
            (0..cx.dim(n - 1))
                .filter(|&i| (fc.filtration[n - 1][i] as i64) > cut)
                .collect()
        };
        let mut a = Gf2Matrix::zeros(target_rows.len(), in_fp.len());
        for (col, &j) in in_fp.iter().enumerate() {
            for (row, &i) in target_rows.iter().enumerate() {
                if d_mats[n].get(i, j) {
                    a.set(row, col, true);
                }
            }
        }
        let ker = a.kernel_basis();
        let mut out = Gf2Matrix::zeros(ker.rows(), dim_n);
        for krow in 0..ker.rows() {
            for (col, &j) in in_fp.iter().enumerate() {
                if ker.get(krow, col) {
                    out.set(krow, j, true);
                }
            }
        }
        out
    };

    let label_of = |n: usize, v: &Gf2Matrix| -> String {
        (0..cx.dim(n))
            .filter(|&i| v.get(0, i))
            .map(|i| cx.basis[n][i].as_str())
            .collect::<Vec<_>>()
            .join("+")
    };

    let mut pages: Vec<Page> = Vec::new();

    for r in 1..=r_needed {
        let mut spots: BTreeMap<(usize, i64), Spot> = BTreeMap::new();
        for p in 0..=max_filt {
            for n in 0..=max_deg {
                if cx.dim(n) == 0 {
                    continue;
                }
                let q = n as i64 - p as i64;
                let zr = z_space(r as i64, p as i64, n as i64);
                if zr.rows() == 0 {
                    continue;
                }
                let mut den_rows = z_space(r as i64 - 1, p as i64 - 1, n as i64);
                let src = z_space(r as i64 - 1, p as i64 + r as i64 - 1, n as i64 + 1);
                for i in 0..src.rows() {
                    let img = apply_d(n + 1, &src.select_rows(&[i]));
                    den_rows = den_rows.vstack(&img);
                }
                let den = Gf2Subspace::from_rows(&den_rows);
                let mut reps: Vec<Gf2Matrix> = Vec::new();
                let mut span = den.clone();
                for i in 0..zr.rows() {
                    let mut v = zr.select_rows(&[i]);
                    span.reduce(&mut v);
                    if !v.is_zero() {
                        span = span.sum(&Gf2Subspace::from_rows(&v));
                        reps.push(v);
                    }
                }
                if !reps.is_empty() {
                    spots.insert((p, q), Spot { den, reps });
                }
            }
        }

        let mut entries = Vec::new();
        let mut differentials = Vec::new();
        for (&(p, q), spot) in &spots {
            let n = (p as i64 + q) as usize;
            entries.push(PageEntry {
                p,
                q,
                dim: spot.reps.len(),
                representatives: spot.reps.iter().map(|v| label_of(n, v)).collect(),
            });
            if (p as i64) < r as i64 {
                continue;
            }
            let (tp, tq) = (p - r, q + r as i64 - 1);
            let Some(target) = spots.get(&(tp, tq)) else {
                continue;
            };
            // Solve for each rep's class in the target representative
            // basis: coordinates over [target reps | target denominator].
            let mut solve_rows = Gf2Matrix::zeros(0, cx.dim(n - 1).max(1));
            for rep in &target.reps {
                solve_rows = solve_rows.vstack(rep);
            }
            solve_rows = solve_rows.vstack(target.den.basis());
            let mut matrix = vec![vec![0u8; spot.reps.len()]; target.reps.len()];
            let mut any = false;
            for (col, x) in spot.reps.iter().enumerate() {
                let dx = apply_d(n, x);
                let coeffs = Gf2Matrix::express_in_rows(&solve_rows, &dx)
                    .ok_or_else(|| AlgebraError::Internal(format!(
                        "page {r}: boundary of a Z^r class escapes the target spot at ({tp},{tq})"
                    )))?;
                for (row, &c) in coeffs.iter().take(target.reps.len()).enumerate() {
                    if c {
                        matrix[row][col] = 1;
                        any = true;
                    }
                }
            }
            if any {
                let mut gm = Gf2Matrix::zeros(target.reps.len(), spot.reps.len());
                for (i, row) in matrix.iter().enumerate() {
                    for (j, &c) in row.iter().enumerate() {
                        if c == 1 {
                            gm.set(i, j, true);
                        }
                    }
                }
                differentials.push(PageDifferentialBlock {
                    from: (p, q),
                    to: (tp, tq),
                    rank: gm.rank(),
                    matrix,
                });
            }
        }

        let page = Page {
            r,
            entries,
            differentials,
        };

        // E^{r} must equal H(E^{r-1}, d^{r-1}) dimension-wise.
        if let Some(prev) = pages.last() {
            for e in &prev.entries {
                let expect = e.dim - prev.rank_from(e.p, e.q) - prev.rank_into(e.p, e.q);
                if page.dim_at(e.p, e.q) != expect {
                    return Err(AlgebraError::Internal(format!(
                        "page {} at ({}, {}): dim {} but homology of previous page gives {}",
                        r,
                        e.p,
                        e.q,
                        page.dim_at(e.p, e.q),
                        expect
                    )));
                }
            }
        }

        pages.push(page);
    }

    // Differentials vanish identically from r_stab on. The final computed
    // page always qualifies because d^r shifts filtration by r > max_filt.
    let mut r_stab = r_needed;
    for page in pages.iter().rev() {
        if page.differentials.is_empty() {
            r_stab = page.r;
        } else {
            break;
        }
    }

    // Convergence certificate against total Z/2 homology.
    let last = pages.last().expect("at least one page");
    let mut by_total: BTreeMap<i64, usize> = BTreeMap::new();
    for e in &last.entries {
        *by_total.entry(e.p as i64 + e.q).or_default() += e.dim;
    }
    let mut convergence_ok = true;
    for (k, &b) in total_betti.iter().enumerate() {
        if by_total.get(&(k as i64)).copied().unwrap_or(0) != b {
            convergence_ok = false;
        }
    }
    for (&k, &v) in &by_total {
        let b = usize::try_from(k)
            .ok()
            .and_then(|k| total_betti.get(k).copied())
            .unwrap_or(0);
        if v != b {
            convergence_ok = false;
        }
    }

    Ok(SpectralSequencePages {
        pages,
        r_stab,
        total_betti,
        convergence_ok,
    })
}

impl SpectralSequencePages {
    /// Page r (1-based); pages past the last computed one repeat it.
    pub fn page(&self, r: usize) -> &Page {
        let idx = r.saturating_sub(1).min(self.pages.len() - 1);
        &self.pages[idx]
    }

    pub fn to_table(&self, max_total_degree: Option<i64>) -> PageTable {
        let within = |p: usize, q: i64| max_total_degree.is_none_or(|m| p as i64 + q <= m);
        PageTable {
            pages: self
                .pages
                .iter()
                .map(|pg| PageTableEntry {
                    r: pg.r,
                    dims: pg
                        .entries
                        .iter()
                        .filter(|e| within(e.p, e.q))
                        .map(|e| (e.p, e.q, e.dim))
                        .collect(),
                    ranks: pg
                        .differentials
                        .iter()
                        .filter(|d| within(d.from.0, d.from.1) && within(d.to.0, d.to.1))
                        .map(|d| (d.from.0, d.from.1, d.rank))
                        .collect(),
                })
                .collect(),
            max_total_degree,
        }
    }
}

/// Compares two page tables on their shared (r, p, q) range; reports every
/// dimension or differential-rank disagreement (empty diff = agreement).
pub fn compare_pages(computed: &PageTable, expected: &PageTable) -> Vec<PageDiff> {
    let mut diffs = Vec::new();
    let bound = match (computed.max_total_degree, expected.max_total_degree) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let within = |p: usize, q: i64| bound.is_none_or(|m| p as i64 + q <= m);
    for exp_page in &expected.pages {
        let Some(comp_page) = computed.pages.iter().find(|p| p.r == exp_page.r) else {
            continue;
        };
        let mut keys: Vec<(usize, i64)> = Vec::new();
        for &(p, q, _) in exp_page
            .dims
            .iter()
            .chain(comp_page.dims.iter())
            .chain(exp_page.ranks.iter())
            .chain(comp_page.ranks.iter())
        {
            if within(p, q) && !keys.contains(&(p, q)) {
                keys.push((p, q));
            }
        }
        keys.sort();
        let lookup = |list: &[(usize, i64, usize)], p: usize, q: i64| -> usize {
            list.iter()
                .find(|&&(tp, tq, _)| tp == p && tq == q)
                .map_or(0, |&(_, _, d)| d)
        };
        for (p, q) in keys {
            let (got, want) = (lookup(&comp_page.dims, p, q), lookup(&exp_page.dims, p, q));
            if got != want {
                diffs.push(PageDiff {
                    r: exp_page.r,
                    p,
                    q,
                    kind: "dim".into(),
                    got,
                    want,
                });
            }
            let (got, want) = (
                lookup(&comp_page.ranks, p, q),
                lookup(&exp_page.ranks, p, q),
            );
            if got != want {
                diffs.push(PageDiff {
                    r: exp_page.r,
                    p,
                    q,
                    kind: "rank".into(),
                    got,
                    want,
                });
            }
        }
    }
    diffs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::complex::{FreeChainComplex, Ring};

    fn circle_complex() -> FreeChainComplex {
        FreeChainComplex::new(
            Ring::Z2,
            vec![
                vec!["v0".into(), "v1".into()],
                vec!["e0".into(), "e1".into()],
            ],
            vec![vec![vec![1, 1], vec![1, 1]]],
        )
        .unwrap()
    }

    #[test]
    fn trivial_filtration_gives_homology_at_e1() {
        let fc = FilteredComplex::trivial(circle_complex());
        let ss = spectral_sequence(&fc, 5).unwrap();
        assert_eq!(ss.r_stab, 1);
        assert!(ss.convergence_ok);
        let e1 = ss.page(1);
        assert_eq!(e1.dim_at(0, 0), 1);
        assert_eq!(e1.dim_at(0, 1), 1);
    }

    #[test]
    fn r_max_below_certification_is_rejected() {
        let cx = circle_complex();
        let fc = FilteredComplex::new(cx, vec![vec![0, 3], vec![3, 3]]).unwrap();
        assert!(matches!(
            spectral_sequence(&fc, 2),
            Err(AlgebraError::NotStabilized(2))
        ));
    }

    #[test]
    fn two_step_filtration_collapses_correctly() {
        // Interval: v0 at level 0; v1, e at level 1; de = v0 + v1.
        let cx = FreeChainComplex::new(
            Ring::Z2,
            vec![vec!["v0".into(), "v1".into()], vec!["e".into()]],
            vec![vec![vec![1], vec![1]]],
        )
        .unwrap();
        let fc = FilteredComplex::new(cx, vec![vec![0, 1], vec![1]]).unwrap();
        let ss = spectral_sequence(&fc, 6).unwrap();
        assert!(ss.convergence_ok);
        // E^1 is the homology of the associated graded: the level-1 pair
        // (v1, e) cancels there already.
        let e1 = ss.page(1);
        assert_eq!(e1.dim_at(0, 0), 1);
        assert_eq!(e1.dim_at(1, -1), 0);
        assert_eq!(e1.dim_at(1, 0), 0);
        assert_eq!(ss.r_stab, 1);
        let last = ss.page(ss.r_stab);
        assert_eq!(last.total_dim(), 1);
        assert_eq!(last.dim_at(0, 0), 1);
    }

    #[test]
    fn nontrivial_d1_appears_on_page_one() {
        // Interval with both vertices below the edge's level: the
        // cancellation is seen by d^1 across filtration levels.
        let cx = FreeChainComplex::new(
            Ring::Z2,
            vec![vec!["v0".into(), "v1".into()], vec!["e".into()]],
            vec![vec![vec![1], vec![1]]],
        )
        .unwrap();
        let fc = FilteredComplex::new(cx, vec![vec![0, 0], vec![1]]).unwrap();
        let ss = spectral_sequence(&fc, 6).unwrap();
        let e1 = ss.page(1);
        assert_eq!(e1.dim_at(0, 0), 2);
        assert_eq!(e1.dim_at(1, 0), 1);
        assert_eq!(e1.rank_from(1, 0), 1);
        assert_eq!(ss.r_stab, 2);
        assert!(ss.convergence_ok);
        assert_eq!(ss.page(2).total_dim(), 1);
    }

    #[test]
    fn page_dims_monotone_nonincreasing() {
        let cx = FreeChainComplex::new(
            Ring::Z2,
            vec![
                vec!["a0".into(), "a1".into()],
                vec!["b0".into(), "b1".into(), "b2".into()],
                vec!["c0".into()],
            ],
            vec![
                vec![vec![1, 1, 0], vec![1, 0, 1]],
                vec![vec![1], vec![1], vec![1]],
            ],
        )
        .unwrap();
        assert_eq!(cx.verify_d_squared().unwrap(), None);
        let fc = FilteredComplex::new(cx, vec![vec![0, 1], vec![1, 1, 2], vec![2]]).unwrap();
        let ss = spectral_sequence(&fc, 8).unwrap();
        assert!(ss.convergence_ok);
        for w in ss.pages.windows(2) {
            for e in &w[0].entries {
                assert!(w[1].dim_at(e.p, e.q) <= e.dim);
            }
            for e in &w[1].entries {
                assert!(w[0].dim_at(e.p, e.q) >= e.dim);
            }
        }
    }

    #[test]
    fn compare_pages_reports_mismatch() {
        let fc = FilteredComplex::trivial(circle_complex());
        let ss = spectral_sequence(&fc, 5).unwrap();
        let table = ss.to_table(None);
        assert!(compare_pages(&table, &table).is_empty());
        let mut corrupted = table.clone();
        corrupted.pages[0].dims[0].2 += 1;
        let diffs = compare_pages(&table, &corrupted);
        assert_eq!(diffs.len(), 1);
        assert_eq!(diffs[0].kind, "dim");
    }
}
