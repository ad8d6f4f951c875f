//! Kuhn-Munkres assignment for maximum-affinity bipartite matching.
//!
//! Maximization is solved as minimization of negated affinities. Rectangular
//! inputs are padded to a square problem whose dummy cells cost more than any
//! real cell. Rows are inserted in ascending index order, which fixes the
//! output among equal-total optima.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AssignmentResult {
    /// `(row, column)` pairs sorted by row.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl AssignmentResult {
    /// Sum of the matched entries, accumulated in row order.
    pub fn total(&self, matrix: &DMatrix<f64>) -> f64 {
        self.matches.iter().map(|&(r, c)| matrix[(r, c)]).sum()
    }

    pub fn col_for_row(&self, row: usize) -> Option<usize> {
        self.matches.iter().find(|m| m.0 == row).map(|m| m.1)
    }
}

/// Minimum-cost perfect matching on a square cost matrix; returns the column
/// assigned to each row.
fn hungarian_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based potentials; index 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if col_owner[j] != 0 {
            row_to_col[col_owner[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Maximum-total matching of cardinality `min(rows, cols)`.
pub fn solve_max(matrix: &DMatrix<f64>) -> Result<AssignmentResult> {
    let (rows, cols) = matrix.shape();
    if let Some(bad) = matrix.iter().find(|v| !v.is_finite()) {
        return Err(Error::contract(format!(
            "assignment matrix has non-finite entry {bad}"
        )));
    }
    if rows == 0 || cols == 0 {
        return Ok(AssignmentResult {
            matches: Vec::new(),
            unmatched_rows: (0..rows).collect(),
            unmatched_cols: (0..cols).collect(),
        });
    }
    let n = rows.max(cols);
    let worst = matrix.iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max);
    let pad = worst + 1.0;
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i < rows && j < cols {
                        -matrix[(i, j)]
                    } else {
                        pad
                    }
                })
                .collect()
        })
        .collect();
    let row_to_col = hungarian_min(&cost);

    let mut result = AssignmentResult::default();
    let mut col_used = vec![false; cols];
    for (r, &c) in row_to_col.iter().enumerate().take(rows) {
        if c < cols {
            result.matches.push((r, c));
            col_used[c] = true;
        } else {
            result.unmatched_rows.push(r);
        }
    }
    result.unmatched_cols = (0..cols).filter(|&c| !col_used[c]).collect();
    Ok(result)
}

/// [`solve_max`] followed by demotion of every match below `min_affinity`.
pub fn solve_max_gated(matrix: &DMatrix<f64>, min_affinity: f64) -> Result<AssignmentResult> {
    let full = solve_max(matrix)?;
    let mut out = AssignmentResult {
        matches: Vec::with_capacity(full.matches.len()),
        unmatched_rows: full.unmatched_rows,
        unmatched_cols: full.unmatched_cols,
    };
    for (r, c) in full.matches {
        if matrix[(r, c)] >= min_affinity {
            out.matches.push((r, c));
        } else {
            out.unmatched_rows.push(r);
            out.unmatched_cols.push(c);
        }
    }
    out.unmatched_rows.sort_unstable();
    out.unmatched_cols.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    /// Exhaustive optimum over all injective maps from the smaller side.
    fn brute_force(m: &DMatrix<f64>) -> f64 {
        fn rec(m: &DMatrix<f64>, row: usize, used: &mut Vec<bool>, transpose: bool) -> f64 {
            let (rows, cols) = if transpose {
                (m.ncols(), m.nrows())
            } else {
                m.shape()
            };
            if row == rows {
                return 0.0;
            }
            let mut best = f64::NEG_INFINITY;
            for c in 0..cols {
                if used[c] {
                    continue;
                }
                used[c] = true;
                let v = if transpose { m[(c, row)] } else { m[(row, c)] };
                best = best.max(v + rec(m, row + 1, used, transpose));
                used[c] = false;
            }
            best
        }
        let transpose = m.nrows() > m.ncols();
        let cols = if transpose { m.nrows() } else { m.ncols() };
        rec(m, 0, &mut vec![false; cols], transpose)
    }

    fn check_structure(res: &AssignmentResult, rows: usize, cols: usize) {
        let mut seen_r = vec![0; rows];
        let mut seen_c = vec![0; cols];
        for &(r, c) in &res.matches {
            seen_r[r] += 1;
            seen_c[c] += 1;
        }
        for &r in &res.unmatched_rows {
            seen_r[r] += 1;
        }
        for &c in &res.unmatched_cols {
            seen_c[c] += 1;
        }
        assert!(seen_r.iter().all(|&k| k == 1));
        assert!(seen_c.iter().all(|&k| k == 1));
    }

    #[test]
    fn two_by_two() {
        let m = mat(2, 2, &[0.9, 0.1, 0.2, 0.8]);
        let r = solve_max(&m).unwrap();
        assert_eq!(r.matches, vec![(0, 0), (1, 1)]);
        assert!((r.total(&m) - 1.7).abs() < 1e-12);
        assert_eq!(r.total(&m), brute_force(&m));
    }

    #[test]
    fn single_cell() {
        let r = solve_max(&mat(1, 1, &[0.5])).unwrap();
        assert_eq!(r.matches, vec![(0, 0)]);
    }

    #[test]
    fn rectangular() {
        let m = mat(2, 3, &[0.1, 0.9, 0.3, 0.8, 0.7, 0.2]);
        let r = solve_max(&m).unwrap();
        assert_eq!(r.matches.len(), 2);
        assert_eq!(r.unmatched_cols.len(), 1);
        check_structure(&r, 2, 3);
        assert_eq!(r.matches, vec![(0, 1), (1, 0)]);
        let t = solve_max(&m.transpose()).unwrap();
        assert_eq!(t.matches, vec![(0, 1), (1, 0)]);
        assert_eq!(t.unmatched_rows, vec![2]);
    }

    #[test]
    fn empty_sides() {
        let r = solve_max(&DMatrix::zeros(0, 3)).unwrap();
        assert!(r.matches.is_empty());
        assert_eq!(r.unmatched_cols, vec![0, 1, 2]);
        let r = solve_max(&DMatrix::zeros(2, 0)).unwrap();
        assert_eq!(r.unmatched_rows, vec![0, 1]);
    }

    #[test]
    fn nan_is_rejected() {
        assert!(solve_max(&mat(1, 2, &[0.1, f64::NAN])).is_err());
        assert!(solve_max(&mat(1, 1, &[f64::INFINITY])).is_err());
    }

    #[test]
    fn gated() {
        let m = mat(2, 2, &[0.9, 0.1, 0.2, 0.8]);
        let r = solve_max_gated(&m, 0.85).unwrap();
        assert_eq!(r.matches, vec![(0, 0)]);
        assert_eq!(r.unmatched_rows, vec![1]);
        assert_eq!(r.unmatched_cols, vec![1]);
        assert_eq!(
            solve_max_gated(&m, f64::NEG_INFINITY).unwrap(),
            solve_max(&m).unwrap()
        );
        let none = solve_max_gated(&m, 0.95).unwrap();
        assert!(none.matches.is_empty());
        check_structure(&none, 2, 2);
    }

    #[test]
    fn negative_entries() {
        let m = mat(
            3,
            3,
            &[-1.0, -2.0, -3.0, -3.0, -1.0, -2.0, -2.0, -3.0, -0.5],
        );
        let r = solve_max(&m).unwrap();
        assert_eq!(r.total(&m), brute_force(&m));
    }

    #[test]
    fn deterministic_on_ties() {
        let m = mat(3, 3, &[1.0; 9]);
        assert_eq!(solve_max(&m).unwrap(), solve_max(&m).unwrap());
    }

    fn arb_matrix() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..=6, 1usize..=6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-1.0..1.0f64, r * c)
                .prop_map(move |v| DMatrix::from_row_slice(r, c, &v))
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(m in arb_matrix()) {
            let r = solve_max(&m).unwrap();
            check_structure(&r, m.nrows(), m.ncols());
            prop_assert_eq!(r.matches.len(), m.nrows().min(m.ncols()));
            prop_assert!((r.total(&m) - brute_force(&m)).abs() <= 1e-12);
        }

        #[test]
        fn row_permutation_equivariance(m in arb_matrix(), seed in 0u64..1000) {
            let n = m.nrows();
            let mut perm: Vec<usize> = (0..n).collect();
            // deterministic shuffle from the seed
            for i in (1..n).rev() {
                let j = (seed as usize * 31 + i * 17) % (i + 1);
                perm.swap(i, j);
            }
            let permuted = DMatrix::from_fn(n, m.ncols(), |i, j| m[(perm[i], j)]);
            let a = solve_max(&m).unwrap();
            let b = solve_max(&permuted).unwrap();
            prop_assert!((a.total(&m) - b.total(&permuted)).abs() <= 1e-12);
            // the permuted solution, mapped back, is optimal for the original
            let mapped: f64 = b.matches.iter().map(|&(i, j)| m[(perm[i], j)]).sum();
            prop_assert!((mapped - brute_force(&m)).abs() <= 1e-12);
        }

        #[test]
        fn constant_shift(m in arb_matrix(), c in -5.0..5.0f64) {
            let shifted = m.map(|v| v + c);
            let a = solve_max(&m).unwrap();
            let b = solve_max(&shifted).unwrap();
            let k = m.nrows().min(m.ncols()) as f64;
            prop_assert!((b.total(&shifted) - a.total(&m) - k * c).abs() <= 1e-9);
            prop_assert!((b.total(&m) - brute_force(&m)).abs() <= 1e-12);
        }
    }
}
