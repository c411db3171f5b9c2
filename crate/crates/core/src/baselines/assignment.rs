//! Minimum-cost perfect matching on a dense square cost matrix.
//!
//! Successive shortest augmenting paths with dual potentials (the
//! Jonker-Volgenant formulation of the Hungarian method), `O(n^3)` worst case.
//! Each Dijkstra search only rescans columns not yet reached and defers the
//! potential updates to the end of the search.

use crate::error::{validation, NptError, Result};

const NONE: usize = usize::MAX;

/// Returns `assignment` with `assignment[row] = column` minimizing the sum of
/// `cost[row * n + column]`.
pub fn solve_assignment(cost: &[f64], n: usize) -> Result<Vec<usize>> {
    if cost.len() != n * n {
        return Err(validation(format!("cost matrix has {} entries, expected {}", cost.len(), n * n)));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(validation("cost matrix has non-finite entries"));
    }

    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n];
    let mut col_of = vec![NONE; n];
    let mut row_of = vec![NONE; n];
    let mut path = vec![NONE; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut scanned_rows = vec![false; n];
    let mut scanned_cols = vec![false; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);

    for start in 0..n {
        dist.fill(f64::INFINITY);
        scanned_rows.fill(false);
        scanned_cols.fill(false);
        remaining.clear();
        remaining.extend((0..n).rev());

        let mut row = start;
        let mut reached = 0.0f64;
        let sink = loop {
            scanned_rows[row] = true;
            let c = &cost[row * n..(row + 1) * n];
            let ur = u[row];
            let mut lowest = f64::INFINITY;
            let mut pick = NONE;
            for (k, &col) in remaining.iter().enumerate() {
                let r = reached + c[col] - ur - v[col];
                if r < dist[col] {
                    path[col] = row;
                    dist[col] = r;
                }
                // ties go to an unassigned column so the search ends sooner
                if dist[col] < lowest || (dist[col] == lowest && row_of[col] == NONE) {
                    lowest = dist[col];
                    pick = k;
                }
            }
            if pick == NONE || !lowest.is_finite() {
                return Err(NptError::Numerical("assignment solver found no augmenting path".into()));
            }
            reached = lowest;
            let col = remaining.swap_remove(pick);
            scanned_cols[col] = true;
            if row_of[col] == NONE {
                break col;
            }
            row = row_of[col];
        };

        u[start] += reached;
        for r in 0..n {
            if scanned_rows[r] && r != start {
                u[r] += reached - dist[col_of[r]];
            }
        }
        for col in 0..n {
            if scanned_cols[col] {
                v[col] -= reached - dist[col];
            }
        }

        let mut col = sink;
        loop {
            let r = path[col];
            row_of[col] = r;
            std::mem::swap(&mut col_of[r], &mut col);
            if r == start {
                break;
            }
        }
    }
    Ok(col_of)
}
