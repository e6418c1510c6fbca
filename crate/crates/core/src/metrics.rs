//! Localization and mapping error metrics.

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Mean Euclidean error between paired sequences.
pub fn mae(estimates: &[Point2], truth: &[Point2]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::LengthMismatch(estimates.len(), truth.len()));
    }
    if estimates.is_empty() {
        return Err(Error::Empty("mae input"));
    }
    let total: f64 = estimates.iter().zip(truth).map(|(e, t)| e.distance(*t)).sum();
    Ok(total / estimates.len() as f64)
}

/// OSPA distance with cutoff `cutoff` and order `order`.
pub fn ospa(estimates: &[Point2], truth: &[Point2], cutoff: f64, order: f64) -> f64 {
    let (small, large) = if estimates.len() <= truth.len() { (estimates, truth) } else { (truth, estimates) };
    if large.is_empty() {
        return 0.0;
    }
    let cost: Vec<Vec<f64>> = small
        .iter()
        .map(|a| large.iter().map(|b| a.distance(*b).min(cutoff).powf(order)).collect())
        .collect();
    let assignment = hungarian(&cost);
    let matched: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    let penalty = cutoff.powf(order) * (large.len() - small.len()) as f64;
    ((matched + penalty) / large.len() as f64).powf(1.0 / order)
}

/// Minimum-cost assignment of every row to a distinct column (rows <= columns).
///
/// Shortest augmenting path with potentials, O(n^2 m).
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian needs rows <= columns");
    // 1-based arrays; column 0 is a virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
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
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if owner[j] > 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}
