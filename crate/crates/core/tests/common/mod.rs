//! Oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vrpslam::active::Rsp;
use vrpslam::geometry::Point2;

/// Mirror `p` across the line through `a` with direction `dir`, written
/// independently of the library's geometry module.
pub fn mirror_point(p: Point2, a: Point2, dir: Point2) -> Point2 {
    let u = dir / dir.norm();
    let t = (p - a).dot(u);
    let foot = a + u * t;
    foot * 2.0 - p
}

/// Least-squares VRPs: per draw, perturb each RSP distance radially, fit a
/// total-least-squares line and reflect `rp` across it.
pub fn least_squares_vrp_draws(rp: Point2, rsps: &[Rsp], draws: usize, seed: u64) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..draws)
        .map(|_| {
            let pts: Vec<Point2> = rsps
                .iter()
                .map(|r| {
                    let z: f64 = rng.sample(StandardNormal);
                    let d = r.d_mean + r.d_var.sqrt() * z;
                    rp + Point2::new(d * r.phi.cos(), d * r.phi.sin())
                })
                .collect();
            let n = pts.len() as f64;
            let c = pts.iter().fold(Point2::ORIGIN, |a, &p| a + p) / n;
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            for p in &pts {
                let d = *p - c;
                sxx += d.x * d.x;
                sxy += d.x * d.y;
                syy += d.y * d.y;
            }
            let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
            mirror_point(rp, c, Point2::new(theta.cos(), theta.sin()))
        })
        .collect()
}

/// Exact association marginals by enumerating every one-to-one assignment.
///
/// Same conventions as the library: `weights[i][0]` is feature `i` missed,
/// `weights[i][j + 1]` is feature `i` producing measurement `j`, and
/// `new_weights[j]` is measurement `j` left to clutter or a new feature.
pub fn exhaustive_association(weights: &[Vec<f64>], new_weights: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = weights.len();
    let m = new_weights.len();
    let mut feature = vec![vec![0.0; m + 1]; k];
    let mut measurement = vec![vec![0.0; k + 1]; m];
    let mut a = vec![0usize; k];
    let mut total = 0.0;
    loop {
        let mut used = vec![false; m];
        let mut valid = true;
        for &ai in &a {
            if ai > 0 {
                if used[ai - 1] {
                    valid = false;
                    break;
                }
                used[ai - 1] = true;
            }
        }
        if valid {
            let mut p: f64 = a.iter().enumerate().map(|(i, &ai)| weights[i][ai]).product();
            p *= (0..m).filter(|&j| !used[j]).map(|j| new_weights[j]).product::<f64>();
            total += p;
            for (i, &ai) in a.iter().enumerate() {
                feature[i][ai] += p;
                if ai > 0 {
                    measurement[ai - 1][i + 1] += p;
                }
            }
            for j in (0..m).filter(|&j| !used[j]) {
                measurement[j][0] += p;
            }
        }
        // Next assignment in mixed radix m + 1.
        let mut i = 0;
        while i < k {
            a[i] += 1;
            if a[i] <= m {
                break;
            }
            a[i] = 0;
            i += 1;
        }
        if i == k {
            break;
        }
    }
    for row in feature.iter_mut().chain(measurement.iter_mut()) {
        row.iter_mut().for_each(|x| *x /= total);
    }
    (feature, measurement)
}

/// Total-variation distance between two distributions.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Central-difference Jacobian of the VRP (reflection of `rp` across the line
/// through `p1` and `p2`) with respect to `(x1, x2, y1, y2)`.
pub fn finite_difference_vrp_jacobian(rp: Point2, p1: Point2, p2: Point2, h: f64) -> [[f64; 2]; 4] {
    let vrp = |q: [f64; 4]| mirror_point(rp, Point2::new(q[0], q[2]), Point2::new(q[1] - q[0], q[3] - q[2]));
    let base = [p1.x, p2.x, p1.y, p2.y];
    let mut out = [[0.0; 2]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        let (mut plus, mut minus) = (base, base);
        plus[i] += h;
        minus[i] -= h;
        let d = (vrp(plus) - vrp(minus)) / (2.0 * h);
        *row = [d.x, d.y];
    }
    out
}
