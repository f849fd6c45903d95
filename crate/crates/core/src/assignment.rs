//! Bipartite matching between predicted and ground-truth grasps.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{GraspSet, PoseVector};

/// Dense `rows x cols` matrix of nonnegative finite costs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Validation(format!(
                "cost entry ({}, {}) = {} is not finite and nonnegative",
                i / cols.max(1),
                i % cols.max(1),
                values[i]
            )));
        }
        Ok(CostMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged cost rows".into()));
        }
        CostMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    /// Largest entry, or 0 for an empty matrix.
    pub fn values_max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Matched `(pred, gt)` pairs sorted by prediction index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_preds: Vec<usize>,
}

impl Assignment {
    /// Sum of matched costs, accumulated in pair order.
    pub fn total_cost(&self, cost: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(i, j)| cost.get(i, j)).sum()
    }

    /// `labels[i]` is 1 for matched predictions and 0 otherwise.
    pub fn match_labels(&self, n_pred: usize) -> Vec<u8> {
        let mut labels = vec![0u8; n_pred];
        for &(i, _) in &self.pairs {
            labels[i] = 1;
        }
        labels
    }
}

/// L1 distance over all seven pose components between encoded pose lists.
pub fn l1_cost_matrix(preds: &[PoseVector], gts: &[PoseVector]) -> CostMatrix {
    let values: Vec<f64> = preds
        .par_iter()
        .flat_map_iter(|p| gts.iter().map(move |g| p.l1_distance(g)))
        .collect();
    CostMatrix {
        rows: preds.len(),
        cols: gts.len(),
        values,
    }
}

pub fn build_cost_matrix(preds: &GraspSet, gts: &GraspSet) -> Result<CostMatrix> {
    if preds.is_empty() {
        return Err(Error::EmptyPrediction);
    }
    if gts.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    Ok(l1_cost_matrix(&preds.encode()?, &gts.encode()?))
}

/// Minimum-cost assignment of `min(rows, cols)` pairs.
///
/// Among optimal assignments the lexicographically smallest pair sequence wins.
/// Costs within `1e-9` (scaled by the largest entry) of the optimum count as ties.
pub fn hungarian(cost: &CostMatrix) -> Assignment {
    let (n_rows, n_cols) = (cost.rows, cost.cols);
    if n_rows == 0 || n_cols == 0 {
        return Assignment {
            pairs: Vec::new(),
            unmatched_preds: (0..n_rows).collect(),
        };
    }
    let n = n_rows.max(n_cols);
    // padding rows and columns cost nothing
    let at = |i: usize, j: usize| -> f64 {
        if i < n_rows && j < n_cols {
            cost.get(i, j)
        } else {
            0.0
        }
    };

    let (row_dual, col_dual, mut row_match) = solve_square(n, &at);

    let scale = cost.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let eps = 1e-9 * scale;
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| at(i, j) - row_dual[i] - col_dual[j] <= eps)
                .collect()
        })
        .collect();
    lexicographic_refine(&tight, &mut row_match, n_rows);

    let mut pairs = Vec::with_capacity(n_rows.min(n_cols));
    let mut unmatched_preds = Vec::new();
    for (i, &j) in row_match.iter().enumerate().take(n_rows) {
        if j < n_cols {
            pairs.push((i, j));
        } else {
            unmatched_preds.push(i);
        }
    }
    Assignment {
        pairs,
        unmatched_preds,
    }
}

/// Shortest-augmenting-path Hungarian method on a square matrix.
/// Returns row duals, column duals and the column matched to each row.
fn solve_square(n: usize, at: &dyn Fn(usize, usize) -> f64) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    // 1-based internally; index 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
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

    let mut row_match = vec![0usize; n];
    for j in 1..=n {
        row_match[col_owner[j] - 1] = j - 1;
    }
    (u[1..].to_vec(), v[1..].to_vec(), row_match)
}

/// Rewrites a perfect matching on the tight-edge graph into the
/// lexicographically smallest one, fixing rows `0..fix_rows` in order.
fn lexicographic_refine(tight: &[Vec<usize>], row_match: &mut [usize], fix_rows: usize) {
    let n = row_match.len();
    let mut col_match = vec![0usize; n];
    for (i, &j) in row_match.iter().enumerate() {
        col_match[j] = i;
    }
    let mut col_fixed = vec![false; n];

    for i in 0..fix_rows {
        for &j in &tight[i] {
            if row_match[i] == j {
                break;
            }
            if col_fixed[j] {
                continue;
            }
            // give j to i, then re-seat j's previous owner so that i's old column is reused
            let displaced = col_match[j];
            let freed = row_match[i];
            col_fixed[j] = true;
            let mut visited = vec![false; n];
            if let Some(path) = alternating_path(tight, displaced, freed, row_match, &col_fixed, &mut visited) {
                row_match[i] = j;
                col_match[j] = i;
                for (r, c) in path {
                    row_match[r] = c;
                    col_match[c] = r;
                }
                break;
            }
            col_fixed[j] = false;
        }
        col_fixed[row_match[i]] = true;
    }
}

/// Alternating path from `row` to the free column `target` over unfixed columns.
/// Returns the `(row, column)` edges to install.
fn alternating_path(
    tight: &[Vec<usize>],
    row: usize,
    target: usize,
    row_match: &[usize],
    col_fixed: &[bool],
    visited: &mut [bool],
) -> Option<Vec<(usize, usize)>> {
    // iterative DFS: stack of (row, next edge position)
    let col_owner = {
        let mut owner = vec![usize::MAX; row_match.len()];
        for (r, &c) in row_match.iter().enumerate() {
            owner[c] = r;
        }
        owner
    };
    let mut stack: Vec<(usize, usize, usize)> = vec![(row, 0, usize::MAX)];
    loop {
        let top = stack.last_mut()?;
        let r = top.0;
        if top.1 >= tight[r].len() {
            stack.pop();
            continue;
        }
        let c = tight[r][top.1];
        top.1 += 1;
        if col_fixed[c] || visited[c] {
            continue;
        }
        visited[c] = true;
        top.2 = c;
        if c == target {
            return Some(stack.iter().map(|&(r, _, c)| (r, c)).collect());
        }
        stack.push((col_owner[c], 0, usize::MAX));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(cost: &CostMatrix) -> (f64, Vec<(usize, usize)>) {
        // square only; lexicographic order of permutations makes the first optimum the smallest
        let n = cost.rows();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = (f64::INFINITY, Vec::new());
        loop {
            let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum();
            if total < best.0 {
                best = (total, perm.iter().copied().enumerate().collect());
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        best
    }

    fn next_permutation(p: &mut [usize]) -> bool {
        let n = p.len();
        if n < 2 {
            return false;
        }
        let mut i = n - 1;
        while i > 0 && p[i - 1] >= p[i] {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        let mut j = n - 1;
        while p[j] <= p[i - 1] {
            j -= 1;
        }
        p.swap(i - 1, j);
        p[i..].reverse();
        true
    }

    #[test]
    fn diagonal_minimum() {
        let c = CostMatrix::from_rows(&[vec![0.0, 5.0, 5.0], vec![5.0, 0.0, 5.0], vec![5.0, 5.0, 0.0]]).unwrap();
        assert_eq!(hungarian(&c).pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn two_by_two() {
        let c = CostMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let a = hungarian(&c);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(a.total_cost(&c), 2.0);
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let c = CostMatrix::from_rows(&[vec![1.0; 3], vec![1.0; 3], vec![1.0; 3]]).unwrap();
        assert_eq!(hungarian(&c).pairs, vec![(0, 0), (1, 1), (2, 2)]);

        // both (0,1),(1,0) and (0,0),(1,1) cost 2
        let c = CostMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(hungarian(&c).pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn integer_ties_match_brute_force_choice() {
        let mut state = 7u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) % 4) as f64
        };
        for n in 2..=6 {
            for _ in 0..30 {
                let values: Vec<f64> = (0..n * n).map(|_| next()).collect();
                let c = CostMatrix::new(n, n, values).unwrap();
                let (best, pairs) = brute_force(&c);
                let a = hungarian(&c);
                assert_eq!(a.total_cost(&c), best);
                assert_eq!(a.pairs, pairs);
            }
        }
    }

    #[test]
    fn more_predictions_than_truth() {
        let c = CostMatrix::from_rows(&[vec![3.0], vec![1.0], vec![2.0]]).unwrap();
        let a = hungarian(&c);
        assert_eq!(a.pairs, vec![(1, 0)]);
        assert_eq!(a.unmatched_preds, vec![0, 2]);
    }

    #[test]
    fn more_truth_than_predictions() {
        let c = CostMatrix::from_rows(&[vec![3.0, 1.0, 1.0]]).unwrap();
        let a = hungarian(&c);
        assert_eq!(a.pairs, vec![(0, 1)]);
        assert!(a.unmatched_preds.is_empty());
    }

    #[test]
    fn rectangular_tie_prefers_earlier_prediction() {
        let c = CostMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(hungarian(&c).pairs, vec![(0, 0)]);
    }

    #[test]
    fn empty_matrix() {
        let c = CostMatrix::new(2, 0, vec![]).unwrap();
        let a = hungarian(&c);
        assert!(a.pairs.is_empty());
        assert_eq!(a.unmatched_preds, vec![0, 1]);
    }

    #[test]
    fn rejects_negative_or_nan() {
        assert!(CostMatrix::new(1, 1, vec![-1.0]).is_err());
        assert!(CostMatrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(CostMatrix::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn cost_matrix_from_poses() {
        let p = GraspSet::from_vectors(&[PoseVector::from([0.0; 7])], None).unwrap();
        let g = GraspSet::from_vectors(&[PoseVector::from([0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1])], None).unwrap();
        let c = build_cost_matrix(&p, &g).unwrap();
        assert!((c.get(0, 0) - 0.3).abs() < 1e-15);
        assert_eq!(build_cost_matrix(&p, &p).unwrap().get(0, 0), 0.0);
        assert!(matches!(build_cost_matrix(&p, &GraspSet::default()), Err(Error::EmptyGroundTruth)));
    }
}
