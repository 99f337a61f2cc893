//! Dense GF(2) linear algebra on u64-packed bitset rows.

/// Dense matrix over GF(2). Rows are bit-packed; columns are indexed
/// logically. Sizes stay small (corpus complexes are < 5000 columns), so
/// dense storage wins over sparse formats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    data: Vec<u64>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64).max(1);
        Gf2Matrix {
            rows,
            cols,
            words_per_row,
            data: vec![0; rows * words_per_row],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        let w = self.data[r * self.words_per_row + c / 64];
        (w >> (c % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let idx = r * self.words_per_row + c / 64;
        let bit = 1u64 << (c % 64);
        if v {
            self.data[idx] |= bit;
        } else {
            self.data[idx] &= !bit;
        }
    }

    fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.words_per_row..(r + 1) * self.words_per_row]
    }

    /// rows[a] ^= rows[b]
    fn xor_row(&mut self, a: usize, b: usize) {
        let (wa, wb) = (a * self.words_per_row, b * self.words_per_row);
        for i in 0..self.words_per_row {
            let v = self.data[wb + i];
            self.data[wa + i] ^= v;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.words_per_row {
            self.data
                .swap(a * self.words_per_row + i, b * self.words_per_row + i);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|w| *w == 0)
    }

    /// Matrix product over GF(2); panics on shape mismatch.
    pub fn mul(&self, rhs: &Gf2Matrix) -> Gf2Matrix {
        assert_eq!(self.cols, rhs.rows, "gf2 matmul shape mismatch");
        let mut out = Gf2Matrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    let (or, rr) = (r * out.words_per_row, c * rhs.words_per_row);
                    for i in 0..out.words_per_row {
                        out.data[or + i] ^= rhs.data[rr + i];
                    }
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Gf2Matrix {
        let mut out = Gf2Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    out.set(c, r, true);
                }
            }
        }
        out
    }

    /// Row-reduces in place; returns pivot column per pivot row.
    pub fn row_reduce(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            if row == self.rows {
                break;
            }
            let Some(p) = (row..self.rows).find(|&r| self.get(r, col)) else {
                continue;
            };
            self.swap_rows(row, p);
            for r in 0..self.rows {
                if r != row && self.get(r, col) {
                    self.xor_row(r, row);
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().row_reduce().len()
    }

    /// Basis of the null space (as row vectors of length `cols`).
    pub fn kernel_basis(&self) -> Gf2Matrix {
        let mut rr = self.clone();
        let pivots = rr.row_reduce();
        let pivot_set: std::collections::HashSet<usize> = pivots.iter().copied().collect();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivot_set.contains(c)).collect();
        let mut out = Gf2Matrix::zeros(free.len(), self.cols);
        for (k, &fc) in free.iter().enumerate() {
            out.set(k, fc, true);
            for (prow, &pc) in pivots.iter().enumerate() {
                if rr.get(prow, fc) {
                    out.set(k, pc, true);
                }
            }
        }
        out
    }

    /// Stacks `self` on top of `other` (column counts must agree).
    pub fn vstack(&self, other: &Gf2Matrix) -> Gf2Matrix {
        assert_eq!(self.cols, other.cols);
        let mut out = Gf2Matrix::zeros(self.rows + other.rows, self.cols);
        out.data[..self.rows * self.words_per_row].copy_from_slice(&self.data);
        out.data[self.rows * self.words_per_row..].copy_from_slice(&other.data);
        out
    }

    /// Returns the sub-matrix of the given rows.
    pub fn select_rows(&self, rows: &[usize]) -> Gf2Matrix {
        let mut out = Gf2Matrix::zeros(rows.len(), self.cols);
        for (i, &r) in rows.iter().enumerate() {
            let (oi, ri) = (i * out.words_per_row, r * self.words_per_row);
            out.data[oi..oi + self.words_per_row]
                .copy_from_slice(&self.data[ri..ri + self.words_per_row]);
        }
        out
    }

    /// Solves `sum c_i row_i = target` for the coefficient vector `c`
    /// (unique when the rows are independent). `target` is a 1-row matrix
    /// with the same column count. Returns `None` if unsolvable.
    pub fn express_in_rows(rows: &Gf2Matrix, target: &Gf2Matrix) -> Option<Vec<bool>> {
        assert_eq!(target.rows(), 1);
        assert_eq!(target.cols(), rows.cols());
        let n = rows.rows();
        let cols = rows.cols();
        // Augment each row with an identity tag so reductions remember the
        // combination of original rows they represent.
        let mut aug = Gf2Matrix::zeros(n, cols + n);
        for i in 0..n {
            for c in 0..cols {
                if rows.get(i, c) {
                    aug.set(i, c, true);
                }
            }
            aug.set(i, cols + i, true);
        }
        let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
        let mut row = 0;
        for col in 0..cols {
            if row == n {
                break;
            }
            let Some(p) = (row..n).find(|&r| aug.get(r, col)) else {
                continue;
            };
            aug.swap_rows(row, p);
            for r in 0..n {
                if r != row && aug.get(r, col) {
                    aug.xor_row(r, row);
                }
            }
            pivots.push((row, col));
            row += 1;
        }
        let mut t = Gf2Matrix::zeros(1, cols + n);
        for c in 0..cols {
            if target.get(0, c) {
                t.set(0, c, true);
            }
        }
        for &(prow, pcol) in &pivots {
            if t.get(0, pcol) {
                let base = prow * aug.words_per_row;
                for i in 0..aug.words_per_row {
                    let w = aug.data[base + i];
                    t.data[i] ^= w;
                }
            }
        }
        if (0..cols).any(|c| t.get(0, c)) {
            return None;
        }
        Some((0..n).map(|i| t.get(0, cols + i)).collect())
    }
}

/// A subspace of GF(2)^n stored as a row-reduced basis.
#[derive(Debug, Clone)]
pub struct Gf2Subspace {
    /// Reduced basis rows.
    basis: Gf2Matrix,
    /// Pivot column of each basis row.
    pivots: Vec<usize>,
    dim_ambient: usize,
}

impl Gf2Subspace {
    pub fn zero(n: usize) -> Self {
        Gf2Subspace {
            basis: Gf2Matrix::zeros(0, n),
            pivots: Vec::new(),
            dim_ambient: n,
        }
    }

    /// Builds a subspace from (possibly dependent) spanning rows.
    pub fn from_rows(rows: &Gf2Matrix) -> Self {
        let mut m = rows.clone();
        let pivots = m.row_reduce();
        let rank = pivots.len();
        let basis = m.select_rows(&(0..rank).collect::<Vec<_>>());
        Gf2Subspace {
            basis,
            pivots,
            dim_ambient: rows.cols(),
        }
    }

    pub fn dim(&self) -> usize {
        self.pivots.len()
    }

    pub fn ambient(&self) -> usize {
        self.dim_ambient
    }

    pub fn basis(&self) -> &Gf2Matrix {
        &self.basis
    }

    /// Reduces `v` modulo this subspace in place (v is a bit row as Vec<u64>
    /// inside a 1-row matrix).
    pub fn reduce(&self, v: &mut Gf2Matrix) {
        debug_assert_eq!(v.rows(), 1);
        for (row, &pc) in self.pivots.iter().enumerate() {
            if v.get(0, pc) {
                let bw = row * self.basis.words_per_row;
                for i in 0..self.basis.words_per_row {
                    let w = self.basis.data[bw + i];
                    v.data[i] ^= w;
                }
            }
        }
    }

    pub fn contains(&self, v: &Gf2Matrix) -> bool {
        let mut r = v.clone();
        self.reduce(&mut r);
        r.is_zero()
    }

    /// Sum of two subspaces.
    pub fn sum(&self, other: &Gf2Subspace) -> Gf2Subspace {
        Gf2Subspace::from_rows(&self.basis.vstack(&other.basis))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_bits(rows: usize, cols: usize, bits: &[&[u8]]) -> Gf2Matrix {
        let mut m = Gf2Matrix::zeros(rows, cols);
        for (r, row) in bits.iter().enumerate() {
            for (c, b) in row.iter().enumerate() {
                m.set(r, c, *b == 1);
            }
        }
        m
    }

    #[test]
    fn rank_and_kernel() {
        let m = from_bits(3, 4, &[&[1, 0, 1, 0], &[0, 1, 1, 0], &[1, 1, 0, 0]]);
        assert_eq!(m.rank(), 2);
        let k = m.kernel_basis();
        assert_eq!(k.rows(), 2);
        // Every kernel row maps to zero.
        let prod = m.mul(&k.transpose());
        assert!(prod.is_zero());
    }

    #[test]
    fn reduce_and_contains() {
        let s = Gf2Subspace::from_rows(&from_bits(2, 3, &[&[1, 1, 0], &[0, 1, 1]]));
        assert_eq!(s.dim(), 2);
        assert!(s.contains(&from_bits(1, 3, &[&[1, 0, 1]])));
        assert!(!s.contains(&from_bits(1, 3, &[&[1, 0, 0]])));
    }

    #[test]
    fn express_recovers_combinations() {
        let rows = from_bits(3, 5, &[&[1, 1, 0, 0, 0], &[0, 1, 1, 0, 0], &[0, 0, 0, 1, 1]]);
        let target = from_bits(1, 5, &[&[1, 0, 1, 1, 1]]);
        let c = Gf2Matrix::express_in_rows(&rows, &target).unwrap();
        assert_eq!(c, vec![true, true, true]);
        let bad = from_bits(1, 5, &[&[0, 0, 0, 0, 1]]);
        assert!(Gf2Matrix::express_in_rows(&rows, &bad).is_none());
    }

    #[test]
    fn wide_matrix_crosses_word_boundary() {
        let n = 130;
        let mut m = Gf2Matrix::zeros(2, n);
        m.set(0, 0, true);
        m.set(0, 129, true);
        m.set(1, 129, true);
        assert_eq!(m.rank(), 2);
        let k = m.kernel_basis();
        assert_eq!(k.rows(), n - 2);
        assert!(m.mul(&k.transpose()).is_zero());
    }
}
