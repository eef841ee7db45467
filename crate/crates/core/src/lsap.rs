//! Linear sum assignment via the Hungarian algorithm (shortest augmenting
//! paths with dual potentials), O(rows² · cols).
//!
//! Entries may be `+inf` to forbid a cell; the problem must stay feasible.
//! Ties are broken by scan order: each row is augmented in turn and the
//! lowest column index wins among equal reduced costs.

use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> DenseMatrix<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }
}

/// Minimum-cost assignment of every row to a distinct column (`rows <= cols`
/// required; use [`assign_min`] for arbitrary shapes). Returns the column of
/// each row, or `None` when no finite-cost assignment exists.
fn hungarian<T: Real>(cost: &DenseMatrix<T>) -> Option<Vec<usize>> {
    let n = cost.rows;
    let m = cost.cols;
    debug_assert!(n <= m);
    if n == 0 {
        return Some(Vec::new());
    }
    let inf = T::infinity();
    // 1-based bookkeeping; index 0 is the virtual source column.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![inf; m + 1];
    let mut used = vec![false; m + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        minv.iter_mut().for_each(|x| *x = inf);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = inf;
            let mut col1 = 0usize;
            for c in 1..=m {
                if used[c] {
                    continue;
                }
                let a = cost.get(r0 - 1, c - 1);
                let cur = if a == inf { inf } else { a - u[r0] - v[c] };
                if cur < minv[c] {
                    minv[c] = cur;
                    way[c] = col0;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    col1 = c;
                }
            }
            if col1 == 0 {
                return None;
            }
            for c in 0..=m {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else if minv[c] != inf {
                    minv[c] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for c in 1..=m {
        if owner[c] != 0 {
            assignment[owner[c] - 1] = c - 1;
        }
    }
    Some(assignment)
}

/// Minimum-cost assignment for any shape: `min(rows, cols)` cells are chosen,
/// one per row and per column. Returns `(row, col)` pairs sorted by row.
pub fn assign_min<T: Real>(cost: &DenseMatrix<T>) -> Option<Vec<(usize, usize)>> {
    if cost.rows <= cost.cols {
        let a = hungarian(cost)?;
        Some(a.into_iter().enumerate().collect())
    } else {
        let a = hungarian(&cost.transpose())?;
        let mut pairs: Vec<(usize, usize)> = a.into_iter().enumerate().map(|(c, r)| (r, c)).collect();
        pairs.sort_unstable();
        Some(pairs)
    }
}

/// Maximum-weight bipartite matching where leaving rows and columns
/// unmatched is allowed. Only cells with a finite, strictly positive weight
/// are ever matched. Returns the matched `(row, col)` pairs sorted by row.
pub fn max_weight_matching<T: Real>(weights: &DenseMatrix<T>) -> Vec<(usize, usize)> {
    let gain = |w: T| if w.is_finite() && w > T::zero() { w } else { T::zero() };
    let cost = DenseMatrix::from_fn(weights.rows, weights.cols, |r, c| -gain(weights.get(r, c)));
    let pairs = assign_min(&cost).expect("finite cost matrix always has an assignment");
    pairs.into_iter().filter(|&(r, c)| gain(weights.get(r, c)) > T::zero()).collect()
}
