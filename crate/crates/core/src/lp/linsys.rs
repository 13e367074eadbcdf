use alloc::vec;
use alloc::vec::Vec;

use crate::num::abs;

#[derive(Debug, Clone, PartialEq)]
pub enum SystemSolution {
    /// Full column rank and consistent.
    Unique(Vec<f64>),
    /// Consistent but rank deficient; free variables are set to zero.
    Underdetermined { rank: usize, particular: Vec<f64> },
    Inconsistent { rank: usize },
}

impl SystemSolution {
    pub fn solution(&self) -> Option<&[f64]> {
        match self {
            SystemSolution::Unique(x) => Some(x),
            SystemSolution::Underdetermined { particular, .. } => Some(particular),
            SystemSolution::Inconsistent { .. } => None,
        }
    }
}

/// Solves `A x = b` for a (possibly rectangular) row-major `A` by Gaussian
/// elimination with partial pivoting.
pub fn solve_linear_system(a: &[Vec<f64>], b: &[f64]) -> SystemSolution {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    debug_assert_eq!(rows, b.len());
    let scale = a
        .iter()
        .flatten()
        .chain(b)
        .fold(1.0f64, |m, v| m.max(abs(*v)));
    let tol = 1e-12 * scale;

    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();

    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, val) = (r..rows)
            .map(|i| (i, abs(m[i][c])))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= tol {
            continue;
        }
        m.swap(r, best);
        let p = m[r][c];
        for j in c..=cols {
            m[r][j] /= p;
        }
        for i in 0..rows {
            if i != r {
                let f = m[i][c];
                if f != 0.0 {
                    for j in c..=cols {
                        let v = m[r][j];
                        m[i][j] -= f * v;
                    }
                }
            }
        }
        pivot_cols.push(c);
        r += 1;
    }

    let rank = pivot_cols.len();
    if (rank..rows).any(|i| abs(m[i][cols]) > 1e-9 * scale) {
        return SystemSolution::Inconsistent { rank };
    }
    let mut x = vec![0.0; cols];
    for (i, &c) in pivot_cols.iter().enumerate() {
        x[c] = m[i][cols];
    }
    if rank == cols {
        SystemSolution::Unique(x)
    } else {
        SystemSolution::Underdetermined { rank, particular: x }
    }
}
