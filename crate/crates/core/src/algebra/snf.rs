//! Smith normal form of integer matrices with arbitrary-precision entries.

use num_bigint::BigInt;
use num_traits::{sign::Signed, Zero};

/// Diagonalizes an integer matrix by unimodular row/column operations and
/// returns the invariant factors d_1 | d_2 | ... (nonzero diagonal entries,
/// made positive). Transforms are not tracked; homology only needs the
/// factors.
pub fn smith_normal_form(entries: &[Vec<i64>]) -> Vec<BigInt> {
    let rows = entries.len();
    let cols = entries.first().map_or(0, Vec::len);
    let mut m: Vec<Vec<BigInt>> = entries
        .iter()
        .map(|r| r.iter().map(|&e| BigInt::from(e)).collect())
        .collect();
    let mut factors = Vec::new();
    let mut t = 0usize;

    while t < rows.min(cols) {
        // Find a nonzero pivot with minimal absolute value in the
        // remaining block; small pivots keep entry growth down.
        let mut pivot: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if !m[i][j].is_zero()
                    && pivot
                        .map(|(pi, pj)| m[i][j].abs() < m[pi][pj].abs())
                        .unwrap_or(true)
                {
                    pivot = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        m.swap(t, pi);
        for row in m.iter_mut() {
            row.swap(t, pj);
        }

        // Clear row and column t; restart whenever a remainder replaces
        // the pivot (Euclidean descent terminates).
        loop {
            let mut clean = true;
            for i in t + 1..rows {
                if m[i][t].is_zero() {
                    continue;
                }
                let q = &m[i][t] / &m[t][t];
                for j in t..cols {
                    let sub = &q * &m[t][j];
                    m[i][j] -= sub;
                }
                if !m[i][t].is_zero() {
                    m.swap(t, i);
                    clean = false;
                }
            }
            for j in t + 1..cols {
                if m[t][j].is_zero() {
                    continue;
                }
                let q = &m[t][j] / &m[t][t];
                for row in m.iter_mut().take(rows).skip(t) {
                    let sub = &q * &row[t];
                    row[j] -= sub;
                }
                if !m[t][j].is_zero() {
                    for row in m.iter_mut() {
                        row.swap(t, j);
                    }
                    clean = false;
                }
            }
            if clean {
                break;
            }
        }

        // Enforce divisibility d_t | m[i][j] for the rest of the block: if
        // some entry is not divisible, fold its column in and redo.
        let mut redo = false;
        'scan: for i in t + 1..rows {
            for j in t + 1..cols {
                if !(&m[i][j] % &m[t][t]).is_zero() {
                    // Add row i to row t, which reintroduces work in row t
                    // but strictly decreases the eventual pivot gcd.
                    for col in t..cols {
                        let add = m[i][col].clone();
                        m[t][col] += add;
                    }
                    redo = true;
                    break 'scan;
                }
            }
        }
        if redo {
            continue;
        }

        factors.push(m[t][t].abs());
        t += 1;
    }
    factors
}

/// Rank of an integer matrix (number of invariant factors).
pub fn integer_rank(entries: &[Vec<i64>]) -> usize {
    smith_normal_form(entries).len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn snf_i64(entries: &[Vec<i64>]) -> Vec<i64> {
        smith_normal_form(entries)
            .iter()
            .map(|b| i64::try_from(b).unwrap())
            .collect()
    }

    #[test]
    fn classic_examples() {
        assert_eq!(snf_i64(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, 4, 16]]), vec![2, 2, 156]);
        assert_eq!(snf_i64(&[vec![1, 0], vec![0, 1]]), vec![1, 1]);
        assert_eq!(snf_i64(&[vec![0, 0], vec![0, 0]]), Vec::<i64>::new());
        // Diagonal (3, 5) has invariant factors (1, 15).
        assert_eq!(snf_i64(&[vec![3, 0], vec![0, 5]]), vec![1, 15]);
    }

    #[test]
    fn divisibility_chain_holds() {
        let m = vec![
            vec![6, 10, -4, 2],
            vec![2, 0, 8, 4],
            vec![-2, 4, 6, 12],
        ];
        let f = smith_normal_form(&m);
        for w in f.windows(2) {
            assert!((&w[1] % &w[0]).is_zero(), "{:?}", f);
        }
        assert!(f.iter().all(|d| d >= &BigInt::one()));
    }

    #[test]
    fn rank_matches_float_rank_on_random_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let r = rng.gen_range(1..6);
            let c = rng.gen_range(1..6);
            let m: Vec<Vec<i64>> = (0..r)
                .map(|_| (0..c).map(|_| rng.gen_range(-4..=4)).collect())
                .collect();
            let fm = nalgebra::DMatrix::from_fn(r, c, |i, j| m[i][j] as f64);
            let frank = fm.svd(false, false).rank(1e-9);
            assert_eq!(integer_rank(&m), frank, "matrix {m:?}");
        }
    }
}
