//! Dense Hungarian algorithm over `f64` costs (potentials formulation).

pub(crate) struct Assignment {
    /// `row_to_col[i]` is the column assigned to row `i`.
    pub row_to_col: Vec<usize>,
    /// Row potentials.
    pub u: Vec<f64>,
    /// Column potentials.
    pub v: Vec<f64>,
}

impl Assignment {
    /// `c[i][j] - u[i] - v[j]`; non-negative (up to rounding) at optimum and
    /// zero on every edge some optimal assignment can use.
    pub fn reduced_cost(&self, costs: &[Vec<f64>], i: usize, j: usize) -> f64 {
        costs[i][j] - self.u[i] - self.v[j]
    }
}

/// Minimum-cost perfect assignment of a square matrix.
pub(crate) fn solve(costs: &[Vec<f64>]) -> Assignment {
    let n = costs.len();
    if n == 0 {
        return Assignment {
            row_to_col: Vec::new(),
            u: Vec::new(),
            v: Vec::new(),
        };
    }
    debug_assert!(costs.iter().all(|row| row.len() == n));

    // 1-based internally; index 0 is the virtual root.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[i0 - 1][j - 1] - u[i0] - v[j];
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
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    Assignment {
        row_to_col,
        u: u[1..].to_vec(),
        v: v[1..].to_vec(),
    }
}
