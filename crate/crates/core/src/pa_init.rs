//! Anchor initialization at the first time slot.
//!
//! A TOA seen at the reference point puts the anchor's image on a circle
//! around RP. Mirroring that circle through a surface prior gives a circle of
//! the same radius around the VRP, which passes through the anchor when the
//! surface is the right one. The anchor sits where circles from several
//! TOAs coincide.

use std::collections::{HashMap, HashSet};
use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::active::GaussianVrp;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::metrics::hungarian;
use crate::scenario::MeasurementFrame;
use crate::slam::{image_of, range_density, systematic_resample, FeatureBelief, FeatureKind};
use crate::SPEED_OF_LIGHT;

/// Existence given to an anchor whose position is only known up to a circle.
pub const UNINFORMED_EXISTENCE: f64 = 0.5;

fn ranges_of(frame: &MeasurementFrame, k: usize) -> Result<Vec<f64>> {
    let toas = frame.per_pa.get(k).ok_or(Error::InvalidParameter(format!("no measurements for anchor {k}")))?;
    if toas.is_empty() {
        return Err(Error::Empty("anchor measurements"));
    }
    let mut r: Vec<f64> = toas.iter().map(|z| z * SPEED_OF_LIGHT).collect();
    r.sort_by(f64::total_cmp);
    Ok(r)
}

fn ring<R: Rng + ?Sized>(center: Point2, radius: f64, sigma: f64, n: usize, rng: &mut R) -> Vec<Point2> {
    let noise = Normal::new(0.0, sigma).expect("positive sigma");
    (0..n)
        .map(|_| Point2::from_polar((radius + noise.sample(rng)).abs(), rng.random::<f64>() * TAU) + center)
        .collect()
}

/// Image-position clouds around RP, one per TOA except the smallest.
pub fn va_candidates<R: Rng + ?Sized>(
    rp: Point2,
    frame: &MeasurementFrame,
    k: usize,
    n_particles: usize,
    toa_sigma: f64,
    rng: &mut R,
) -> Result<Vec<Vec<Point2>>> {
    let ranges = ranges_of(frame, k)?;
    Ok(ranges[1..].iter().map(|&r| ring(rp, r, toa_sigma, n_particles, rng)).collect())
}

/// Map an image cloud through every surface prior (one VRP draw per particle).
pub fn pa_candidates<R: Rng + ?Sized>(
    va_cloud: &[Point2],
    priors: &[GaussianVrp],
    rp: Point2,
    rng: &mut R,
) -> Vec<Vec<Point2>> {
    priors
        .iter()
        .map(|prior| va_cloud.iter().map(|&va| image_of(va, rp, prior.sample(rng))).collect())
        .collect()
}

/// Grid cell index of a point.
fn cell_of(p: Point2, cell: f64) -> (i64, i64) {
    ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
}

/// Occupancy fusion: cells reached by at least three image candidates carry the belief.
///
/// `clouds[c][l]` is the anchor cloud from image candidate `c` through surface
/// `l`. A candidate occupies every cell within one cell of its points. Among
/// the cells of highest occupancy, the largest connected cluster is kept and
/// its points are resampled in proportion to occupancy.
pub fn fuse_pa_candidates<R: Rng + ?Sized>(
    clouds: &[Vec<Vec<Point2>>],
    grid_cell: f64,
    n_particles: usize,
    rng: &mut R,
) -> FeatureBelief {
    let union: Vec<Point2> = clouds.iter().flatten().flatten().copied().collect();
    let uninformed = |rng: &mut R| {
        let pts = (0..n_particles)
            .filter_map(|_| union.get(rng.random_range(0..union.len().max(1))).copied())
            .collect();
        FeatureBelief::new(0, FeatureKind::Pa, 0, pts, UNINFORMED_EXISTENCE)
    };
    if clouds.len() < 3 {
        return uninformed(rng);
    }
    let mut occupancy: HashMap<(i64, i64), usize> = HashMap::new();
    for candidate in clouds {
        let mut cells: Vec<(i64, i64)> = candidate
            .iter()
            .flatten()
            .flat_map(|&p| {
                let (cx, cy) = cell_of(p, grid_cell);
                (-1..=1).flat_map(move |dx| (-1..=1).map(move |dy| (cx + dx, cy + dy)))
            })
            .collect();
        cells.sort_unstable();
        cells.dedup();
        for c in cells {
            *occupancy.entry(c).or_default() += 1;
        }
    }
    let top = occupancy.values().copied().max().unwrap_or(0);
    if top < 3 {
        return uninformed(rng);
    }
    let mut pending: Vec<(i64, i64)> = occupancy.iter().filter(|(_, &o)| o == top).map(|(&c, _)| c).collect();
    pending.sort_unstable();
    let mut unvisited: HashSet<(i64, i64)> = pending.iter().copied().collect();
    let mut best: Vec<(i64, i64)> = Vec::new();
    for start in pending {
        if !unvisited.remove(&start) {
            continue;
        }
        let mut cluster = vec![start];
        let mut i = 0;
        while i < cluster.len() {
            let (cx, cy) = cluster[i];
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if unvisited.remove(&(cx + dx, cy + dy)) {
                        cluster.push((cx + dx, cy + dy));
                    }
                }
            }
            i += 1;
        }
        if cluster.len() > best.len() {
            best = cluster;
        }
    }
    let keep: HashSet<(i64, i64)> = best.into_iter().collect();
    let (pts, weights): (Vec<Point2>, Vec<f64>) = union
        .iter()
        .filter_map(|&p| {
            let c = cell_of(p, grid_cell);
            keep.contains(&c).then(|| (p, occupancy[&c] as f64))
        })
        .unzip();
    if pts.is_empty() {
        return uninformed(rng);
    }
    let total: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
    let particles = systematic_resample(&w, n_particles, rng).into_iter().map(|i| pts[i]).collect();
    FeatureBelief::new(0, FeatureKind::Pa, 0, particles, 0.999)
}

/// Settings of the scored initializer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitOptions {
    pub n_particles: usize,
    pub toa_sigma: f64,
    pub p_detect: f64,
    /// Clutter intensity per meter of range.
    pub clutter_density: f64,
    pub grid_cell: f64,
    /// Distinct TOAs whose circles must meet near a candidate.
    pub min_coincidence: usize,
    /// Arc length between scanned candidate points (m).
    pub arc_step: f64,
    pub existence: f64,
}

impl InitOptions {
    pub fn new(n_particles: usize, toa_sigma: f64, p_detect: f64, clutter_density: f64) -> Self {
        Self {
            n_particles,
            toa_sigma,
            p_detect,
            clutter_density,
            grid_cell: 1.0,
            min_coincidence: 3,
            arc_step: 0.1,
            existence: 0.999,
        }
    }
}

/// Anchor belief plus the surface priors it is expected to reflect off.
#[derive(Debug, Clone)]
pub struct AnchorInit {
    pub belief: FeatureBelief,
    /// Indices into the prior list.
    pub links: Vec<usize>,
    /// Whether the circles met; false means the belief is an uninformed circle.
    pub informed: bool,
}

/// Circle of the smallest TOA around RP: all that passive sensing alone says.
pub fn passive_anchor<R: Rng + ?Sized>(
    rp: Point2,
    frame: &MeasurementFrame,
    k: usize,
    n_particles: usize,
    toa_sigma: f64,
    rng: &mut R,
) -> Result<FeatureBelief> {
    let ranges = ranges_of(frame, k)?;
    let pts = ring(rp, ranges[0], toa_sigma, n_particles, rng);
    Ok(FeatureBelief::new(0, FeatureKind::Pa, k, pts, UNINFORMED_EXISTENCE))
}

/// Log-likelihood ratio of the best explanation of the frame for an anchor at `p`,
/// against "every source missed, every TOA clutter".
///
/// Each source (direct path or one surface) explains at most one TOA and each
/// TOA at most one source; the best such assignment is found exactly.
fn anchor_score(p: Point2, rp: Point2, ranges: &[f64], priors: &[(Point2, f64)], opts: &InitOptions) -> f64 {
    let sigma2 = opts.toa_sigma * opts.toa_sigma;
    let sources: Vec<(f64, f64)> = std::iter::once((p.distance(rp), opts.toa_sigma))
        .chain(priors.iter().map(|(v, var)| (p.distance(*v), (sigma2 + var).sqrt())))
        .collect();
    let baseline = ((1.0 - opts.p_detect) * opts.clutter_density).max(f64::MIN_POSITIVE);
    let m = ranges.len();
    let gain = |r: f64, &(d, sd): &(f64, f64)| (opts.p_detect * range_density(r - d, sd) / baseline).ln();
    // Columns: sources, then one "clutter" column per TOA at zero gain.
    let cost: Vec<Vec<f64>> = ranges
        .iter()
        .map(|&r| {
            sources
                .iter()
                .map(|s| -gain(r, s).max(-1e6))
                .chain(std::iter::repeat(0.0).take(m))
                .collect()
        })
        .collect();
    let assignment = hungarian(&cost);
    assignment
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c < sources.len())
        .map(|(j, &c)| -cost[j][c])
        .sum()
}

/// Scored initializer: scan all candidate circles, keep points where enough
/// TOAs coincide, take the best-scoring point and sample its neighbourhood.
pub fn initialize_anchor<R: Rng + ?Sized>(
    rp: Point2,
    frame: &MeasurementFrame,
    k: usize,
    priors: &[GaussianVrp],
    opts: &InitOptions,
    rng: &mut R,
) -> Result<AnchorInit> {
    let ranges = ranges_of(frame, k)?;
    let circle_fallback = |rng: &mut R| -> Result<AnchorInit> {
        let belief = passive_anchor(rp, frame, k, opts.n_particles, opts.toa_sigma, rng)?;
        Ok(AnchorInit { belief, links: Vec::new(), informed: false })
    };
    if priors.is_empty() || ranges.len() < opts.min_coincidence {
        return circle_fallback(rng);
    }
    let sigma2 = opts.toa_sigma * opts.toa_sigma;
    let surfaces: Vec<(Point2, f64)> = priors.iter().map(|g| (g.mean, (g.trace() / 2.0).max(0.0))).collect();
    let centers: Vec<(Point2, f64)> = std::iter::once((rp, 0.0)).chain(surfaces.iter().copied()).collect();

    // Candidate points on every circle, tagged with the TOA they come from.
    let mut points: Vec<(Point2, usize)> = Vec::new();
    let mut halo: Vec<i64> = Vec::new();
    for &(c, var) in &centers {
        let h = ((2.0 * (sigma2 + var).sqrt()) / opts.grid_cell).ceil().max(1.0) as i64;
        for (j, &r) in ranges.iter().enumerate() {
            let n = ((TAU * r / opts.arc_step).ceil() as usize).max(64);
            for s in 0..n {
                points.push((c + Point2::from_polar(r, TAU * s as f64 / n as f64), j));
                halo.push(h);
            }
        }
    }

    // Coincidence grid: bit j set where circle of TOA j passes nearby.
    let (mut min, mut max) = ((i64::MAX, i64::MAX), (i64::MIN, i64::MIN));
    for (&(p, _), &h) in points.iter().zip(&halo) {
        let c = cell_of(p, opts.grid_cell);
        min = (min.0.min(c.0 - h), min.1.min(c.1 - h));
        max = (max.0.max(c.0 + h), max.1.max(c.1 + h));
    }
    let width = (max.0 - min.0 + 1) as usize;
    let height = (max.1 - min.1 + 1) as usize;
    let mut grid = vec![0u64; width * height];
    let bit = |j: usize| 1u64 << (j % 64);
    for (&(p, j), &h) in points.iter().zip(&halo) {
        let c = cell_of(p, opts.grid_cell);
        for dx in -h..=h {
            for dy in -h..=h {
                let ix = (c.0 + dx - min.0) as usize;
                let iy = (c.1 + dy - min.1) as usize;
                grid[iy * width + ix] |= bit(j);
            }
        }
    }
    let passes = |p: Point2| {
        let c = cell_of(p, opts.grid_cell);
        grid[(c.1 - min.1) as usize * width + (c.0 - min.0) as usize].count_ones() as usize >= opts.min_coincidence
    };

    let scored: Vec<(Point2, f64)> = points
        .iter()
        .filter(|(p, _)| passes(*p))
        .map(|&(p, _)| (p, anchor_score(p, rp, &ranges, &surfaces, opts)))
        .collect();
    let Some(&(best, best_score)) = scored.iter().max_by(|a, b| a.1.total_cmp(&b.1)) else {
        return circle_fallback(rng);
    };

    let (near, weights): (Vec<Point2>, Vec<f64>) = scored
        .iter()
        .filter(|(p, _)| p.distance(best) <= opts.grid_cell)
        .map(|&(p, s)| (p, (s - best_score).exp()))
        .unzip();
    let total: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
    let jitter = Normal::new(0.0, opts.toa_sigma).expect("positive sigma");
    let particles: Vec<Point2> = systematic_resample(&w, opts.n_particles, rng)
        .into_iter()
        .map(|i| near[i] + Point2::new(jitter.sample(rng), jitter.sample(rng)))
        .collect();
    let mut belief = FeatureBelief::new(0, FeatureKind::Pa, k, particles, opts.existence);
    belief.pa_index = k;

    let center = belief.mean();
    let links = surfaces
        .iter()
        .enumerate()
        .filter(|(_, (v, var))| {
            let d = center.distance(*v);
            let gate = 3.0 * (sigma2 + var).sqrt();
            ranges.iter().any(|&r| (d - r).abs() < gate)
        })
        .map(|(l, _)| l)
        .collect();
    Ok(AnchorInit { belief, links, informed: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame_from_ranges(ranges: &[f64]) -> MeasurementFrame {
        MeasurementFrame { t: 0, per_pa: vec![ranges.iter().map(|r| r / SPEED_OF_LIGHT).collect()] }
    }

    #[test]
    fn candidate_circles() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rp = Point2::new(1.0, 2.0);
        let frame = frame_from_ranges(&[10.0, 4.0]);
        let c = va_candidates(rp, &frame, 0, 500, 1e-3, &mut rng).unwrap();
        assert_eq!(c.len(), 1, "smallest TOA is the direct path");
        assert!(c[0].iter().all(|p| (p.distance(rp) - 10.0).abs() < 0.01));
        assert!(va_candidates(rp, &frame_from_ranges(&[]), 0, 10, 0.1, &mut rng).is_err());
    }

    #[test]
    fn right_surface_maps_circle_through_anchor() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rp = Point2::new(10.0, 15.0);
        let pa = Point2::new(30.0, 30.0);
        let vrp = Point2::new(-10.0, 15.0);
        let va = Point2::new(-30.0, 30.0);
        let cloud = ring(rp, va.distance(rp), 1e-9, 20_000, &mut rng);
        let mapped = pa_candidates(&cloud, &[GaussianVrp::isotropic(vrp, 0.0)], rp, &mut rng);
        let closest = mapped[0].iter().map(|p| p.distance(pa)).fold(f64::INFINITY, f64::min);
        assert!(closest < 0.05, "closest {closest}");
        assert!(mapped[0].iter().all(|p| (p.distance(vrp) - va.distance(rp)).abs() < 1e-6));
    }

    #[test]
    fn three_surfaces_locate_the_anchor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rp = Point2::new(10.0, 15.0);
        let pa = Point2::new(30.0, 30.0);
        let vrps = [Point2::new(-10.0, 15.0), Point2::new(10.0, 65.0), Point2::new(10.0, -15.0)];
        // VA distance from RP equals anchor distance from the VRP.
        let mut ranges: Vec<f64> = vrps.iter().map(|v| v.distance(pa)).collect();
        ranges.push(rp.distance(pa));
        let priors: Vec<GaussianVrp> = vrps.iter().map(|&v| GaussianVrp::isotropic(v, 0.0)).collect();
        let frame = frame_from_ranges(&ranges);
        let opts = InitOptions::new(2000, 0.1, 0.95, 1.0 / 360.0);
        let init = initialize_anchor(rp, &frame, 0, &priors, &opts, &mut rng).unwrap();
        assert!(init.informed);
        assert!(init.belief.mean().distance(pa) < opts.grid_cell);
        assert_eq!(init.links, vec![0, 1, 2]);
        assert_eq!(init.belief.particles.len(), 2000);

        let clouds: Vec<Vec<Vec<Point2>>> = va_candidates(rp, &frame, 0, 4000, 1e-3, &mut rng)
            .unwrap()
            .iter()
            .map(|c| pa_candidates(c, &priors, rp, &mut rng))
            .collect();
        let fused = fuse_pa_candidates(&clouds, 1.0, 1000, &mut rng);
        assert!(fused.mean().distance(pa) < 1.0, "{:?}", fused.mean());
        assert_eq!(fused.existence, 0.999);
    }

    #[test]
    fn without_priors_the_anchor_is_a_circle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let frame = frame_from_ranges(&[25.0, 40.0, 52.0]);
        let opts = InitOptions::new(500, 0.1, 0.95, 1.0 / 360.0);
        let init = initialize_anchor(Point2::ORIGIN, &frame, 0, &[], &opts, &mut rng).unwrap();
        assert!(!init.informed);
        assert_eq!(init.belief.existence, UNINFORMED_EXISTENCE);
        assert!(init.belief.particles.iter().all(|p| (p.norm() - 25.0).abs() < 1.0));
    }
}
