//! Exact binary optimal transport: assign each of `N` rows to one of `K`
//! columns, column `k` receiving exactly `m_k` rows, at minimum total cost.
//!
//! Rows are inserted one at a time. After each insertion the partial
//! assignment is optimal for the rows seen so far, and the next row is placed
//! along a shortest augmenting path in the residual graph restricted to the
//! `K` column nodes: moving some row `j` from column `k` to `k'` costs
//! `L[j,k'] − L[j,k]`, and the path ends at a column with spare capacity. An
//! optimal partial assignment has no negative residual cycle, so Bellman-Ford
//! on `K` nodes finds the path exactly even with negative costs; no cost
//! shifting is needed. Ties resolve toward lower row and column indices
//! because every comparison is a strict improvement scanned in index order.

use std::ops::{Add, Sub};

use num_traits::Zero;

use crate::binmat::MarginBinaryMatrix;
use crate::error::{invalid, HfdpError, Result};

/// Size guard of [`brute_force_ot`].
pub const BRUTE_FORCE_MAX_ROWS: usize = 8;
pub const BRUTE_FORCE_MAX_COLS: usize = 3;

/// Cost types the solver accepts: floats, integers, rationals.
pub trait Cost: Copy + PartialOrd + Zero + Add<Output = Self> + Sub<Output = Self> {}

impl<T> Cost for T where T: Copy + PartialOrd + Zero + Add<Output = T> + Sub<Output = T> {}

/// An `N×K` cost matrix (row-major) with column capacities `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportProblem<C> {
    rows: usize,
    cols: usize,
    cost: Vec<C>,
    col_sums: Vec<usize>,
}

impl<C: Cost> TransportProblem<C> {
    pub fn new(rows: usize, cols: usize, cost: Vec<C>, col_sums: Vec<usize>) -> Result<Self> {
        if cols == 0 {
            return invalid("transport problem needs at least one column");
        }
        if cost.len() != rows * cols {
            return invalid(format!("cost matrix has {} entries, expected {}", cost.len(), rows * cols));
        }
        if col_sums.len() != cols {
            return invalid("column margins do not match the number of columns");
        }
        if col_sums.iter().sum::<usize>() != rows {
            return invalid(format!("column margins sum to {}, not to the {rows} rows", col_sums.iter().sum::<usize>()));
        }
        Ok(Self { rows, cols, cost, col_sums })
    }

    pub fn from_rows(cost: &[Vec<C>], col_sums: Vec<usize>) -> Result<Self> {
        let cols = col_sums.len();
        if cost.iter().any(|r| r.len() != cols) {
            return invalid("cost rows differ in length from the column margins");
        }
        Self::new(cost.len(), cols, cost.concat(), col_sums)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col_sums(&self) -> &[usize] {
        &self.col_sums
    }

    #[inline]
    pub fn cost(&self, i: usize, k: usize) -> C {
        self.cost[i * self.cols + k]
    }

    /// `⟨B, L⟩` of an assignment, summed in row order.
    pub fn total_cost(&self, assignment: &[usize]) -> C {
        assignment.iter().enumerate().fold(C::zero(), |acc, (i, &k)| acc + self.cost(i, k))
    }
}

/// Optimal assignment and its cost.
#[derive(Clone, Debug, PartialEq)]
pub struct OtSolution<C> {
    pub assignment: Vec<usize>,
    pub cost: C,
}

/// Minimum-cost assignment by successive shortest augmenting paths.
pub fn solve_assignment<C: Cost>(p: &TransportProblem<C>) -> Result<OtSolution<C>> {
    let k = p.cols;
    let mut assignment = vec![usize::MAX; p.rows];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut dist: Vec<Option<C>> = vec![None; k];
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; k];
    // cheapest move out of column a into column b, with the row that achieves it
    let mut edge: Vec<Option<(C, usize)>> = vec![None; k * k];

    for i in 0..p.rows {
        for a in 0..k {
            for b in 0..k {
                edge[a * k + b] = None;
                if a == b {
                    continue;
                }
                for &j in &members[a] {
                    let c = p.cost(j, b) - p.cost(j, a);
                    if edge[a * k + b].is_none_or(|(best, _)| c < best) {
                        edge[a * k + b] = Some((c, j));
                    }
                }
            }
            dist[a] = Some(p.cost(i, a));
            pred[a] = None;
        }
        for _ in 0..k {
            let mut changed = false;
            for a in 0..k {
                let Some(da) = dist[a] else { continue };
                for b in 0..k {
                    let Some((c, j)) = edge[a * k + b] else { continue };
                    let cand = da + c;
                    if dist[b].is_none_or(|db| cand < db) {
                        dist[b] = Some(cand);
                        pred[b] = Some((a, j));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut end: Option<usize> = None;
        for a in 0..k {
            if members[a].len() < p.col_sums[a] {
                if let Some(da) = dist[a] {
                    if end.is_none_or(|e| da < dist[e].expect("end has a distance")) {
                        end = Some(a);
                    }
                }
            }
        }
        let Some(mut at) = end else {
            return Err(HfdpError::Internal("no column with spare capacity".into()));
        };
        // walk back, shifting one row per hop, then seat row i at the head
        let mut hops = 0;
        while let Some((from, j)) = pred[at] {
            hops += 1;
            if hops > k {
                return Err(HfdpError::Internal("augmenting path does not terminate".into()));
            }
            let pos = members[from].iter().position(|&x| x == j).expect("moved row sits in its column");
            members[from].swap_remove(pos);
            members[at].push(j);
            assignment[j] = at;
            at = from;
        }
        members[at].push(i);
        assignment[i] = at;
    }
    let cost = p.total_cost(&assignment);
    Ok(OtSolution { assignment, cost })
}

/// [`solve_assignment`] returned as an `N×K` one-hot matrix.
pub fn solve_binary_ot<C: Cost>(p: &TransportProblem<C>) -> Result<MarginBinaryMatrix> {
    let sol = solve_assignment(p)?;
    MarginBinaryMatrix::from_assignment(&sol.assignment, p.cols)
}

/// Exhaustive minimum over all label vectors with the required occupancy,
/// visited in lexicographic order; the first minimizer is returned.
pub fn brute_force_ot<C: Cost>(p: &TransportProblem<C>) -> Result<OtSolution<C>> {
    if p.rows > BRUTE_FORCE_MAX_ROWS || p.cols > BRUTE_FORCE_MAX_COLS {
        return Err(HfdpError::Capacity(format!(
            "brute force is limited to {BRUTE_FORCE_MAX_ROWS} rows and {BRUTE_FORCE_MAX_COLS} columns"
        )));
    }
    let mut labels: Vec<usize> = p.col_sums.iter().enumerate().flat_map(|(k, &m)| std::iter::repeat_n(k, m)).collect();
    let mut best: Option<OtSolution<C>> = None;
    loop {
        let cost = p.total_cost(&labels);
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(OtSolution { assignment: labels.clone(), cost });
        }
        if !next_permutation(&mut labels) {
            break;
        }
    }
    best.ok_or_else(|| HfdpError::Internal("no feasible assignment".into()))
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("a larger element follows");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
