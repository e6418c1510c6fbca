//! Synthetic world: floor plan, trajectory, single-bounce propagation and
//! measurement synthesis for both sensing modes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::active::{rcs_of_incidence, simulate_echo, DistanceEstimator, Rsp, SignalConfig};
use crate::error::{Error, Result};
use crate::geometry::{reflect_across_line, Point2, DEGENERACY_TOL};
use crate::seeding::{derive_seed, Stream};
use crate::slam::AgentState;
use crate::SPEED_OF_LIGHT;

/// Finite reflective segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub a: Point2,
    pub b: Point2,
}

impl Wall {
    pub fn new(a: Point2, b: Point2) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a.distance(b) < DEGENERACY_TOL {
            return Err(Error::Degenerate("wall endpoints coincide"));
        }
        Ok(Self { a, b })
    }

    /// Mirror image of `p` across the wall's supporting line.
    pub fn mirror(&self, p: Point2) -> Point2 {
        reflect_across_line(p, self.a, self.b).expect("wall endpoints validated on construction")
    }

    fn direction(&self) -> Point2 {
        let d = self.b - self.a;
        d / d.norm()
    }
}

/// Floor plan, anchors and the agent's route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub walls: Vec<Wall>,
    pub pas: Vec<Point2>,
    pub waypoints: Vec<Point2>,
    pub step_length: f64,
    pub sample_period: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.pas.is_empty() {
            return Err(Error::InvalidParameter("scenario needs at least one PA".into()));
        }
        if !(self.step_length > 0.0) || !(self.sample_period > 0.0) {
            return Err(Error::InvalidParameter("step_length and sample_period must be positive".into()));
        }
        if self.waypoints.is_empty() {
            return Err(Error::InvalidParameter("scenario needs waypoints".into()));
        }
        Ok(())
    }

    /// Start point of the agent; the origin of the relative map.
    pub fn reference_point(&self) -> Point2 {
        self.waypoints[0]
    }
}

/// Passive-sensing noise and clutter model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Range-domain standard deviation (m).
    pub toa_sigma: f64,
    pub p_detect: f64,
    pub mu_false: f64,
    pub roi_radius: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_detect > 0.0 && self.p_detect <= 1.0) {
            return Err(Error::InvalidParameter(format!("noise.p_detect must lie in (0, 1], got {}", self.p_detect)));
        }
        if !(self.mu_false >= 0.0) {
            return Err(Error::InvalidParameter(format!("noise.mu_false must be nonnegative, got {}", self.mu_false)));
        }
        if !(self.toa_sigma > 0.0) || !(self.roi_radius > 0.0) {
            return Err(Error::InvalidParameter("noise.toa_sigma and noise.roi_radius must be positive".into()));
        }
        Ok(())
    }
}

/// TOAs (seconds) received from every PA in one time slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFrame {
    pub t: usize,
    pub per_pa: Vec<Vec<f64>>,
}

/// Ground-truth features of one anchor, VAs and VRPs listed per wall.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorFeatures {
    pub pa: Point2,
    pub vas: Vec<Point2>,
    pub vrps: Vec<Point2>,
}

pub fn ground_truth_features(scn: &Scenario) -> Vec<AnchorFeatures> {
    let rp = scn.reference_point();
    scn.pas
        .iter()
        .map(|&pa| AnchorFeatures {
            pa,
            vas: scn.walls.iter().map(|w| w.mirror(pa)).collect(),
            vrps: scn.walls.iter().map(|w| w.mirror(rp)).collect(),
        })
        .collect()
}

/// Distinct VRPs of the floor plan (collinear wall segments share one).
pub fn ground_truth_vrps(scn: &Scenario) -> Vec<Point2> {
    let rp = scn.reference_point();
    let mut out: Vec<Point2> = Vec::new();
    for w in &scn.walls {
        let v = w.mirror(rp);
        if out.iter().all(|u| u.distance(v) > 1e-6) {
            out.push(v);
        }
    }
    out
}

/// Parameters `(s, u)` of the intersection `p + s (q - p) = a + u (b - a)`.
fn segment_params(p: Point2, q: Point2, a: Point2, b: Point2) -> Option<(f64, f64)> {
    let r = q - p;
    let e = b - a;
    let denom = r.cross(e);
    if denom.abs() < 1e-12 {
        return None;
    }
    let ap = a - p;
    Some((ap.cross(e) / denom, ap.cross(r) / denom))
}

const EDGE_TOL: f64 = 1e-9;

/// True when any wall (other than `skip`) cuts the open segment `p`-`q`.
fn blocked(p: Point2, q: Point2, walls: &[Wall], skip: Option<usize>) -> bool {
    walls.iter().enumerate().any(|(i, w)| {
        if Some(i) == skip {
            return false;
        }
        matches!(
            segment_params(p, q, w.a, w.b),
            Some((s, u)) if s > EDGE_TOL && s < 1.0 - EDGE_TOL && (-EDGE_TOL..=1.0 + EDGE_TOL).contains(&u)
        )
    })
}

/// LOS path length between agent and anchor, if unobstructed.
pub fn visible_los(agent: Point2, pa: Point2, walls: &[Wall]) -> Option<f64> {
    (!blocked(agent, pa, walls, None)).then(|| agent.distance(pa))
}

/// Length of the specular path agent -> `walls[wall]` -> anchor, if it exists.
pub fn visible_single_bounce(agent: Point2, pa: Point2, wall: usize, walls: &[Wall]) -> Option<f64> {
    let w = walls[wall];
    let va = w.mirror(pa);
    let (s, u) = segment_params(agent, va, w.a, w.b)?;
    if !(s > EDGE_TOL && s < 1.0 - EDGE_TOL && (0.0..=1.0).contains(&u)) {
        return None;
    }
    let q = agent + (va - agent) * s;
    if blocked(agent, q, walls, Some(wall)) || blocked(q, pa, walls, Some(wall)) {
        return None;
    }
    Some(agent.distance(va))
}

/// Noiseless path lengths from anchor `k` at the agent position: LOS first, then walls in order.
pub fn path_lengths(scn: &Scenario, agent: Point2, k: usize) -> Vec<f64> {
    let pa = scn.pas[k];
    visible_los(agent, pa, &scn.walls)
        .into_iter()
        .chain((0..scn.walls.len()).filter_map(|w| visible_single_bounce(agent, pa, w, &scn.walls)))
        .collect()
}

/// Passive TOA frame at slot `t` of `trajectory`.
pub fn generate_measurements(
    scn: &Scenario,
    noise: &NoiseModel,
    trajectory: &[AgentState],
    t: usize,
    seed: u64,
) -> Result<MeasurementFrame> {
    let agent = trajectory.get(t).ok_or(Error::SlotOutOfRange { t, len: trajectory.len() })?.pos;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let range_noise = Normal::new(0.0, noise.toa_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let clutter_max = 2.0 * noise.roi_radius;
    let per_pa = (0..scn.pas.len())
        .map(|k| {
            let mut ranges: Vec<f64> = path_lengths(scn, agent, k)
                .into_iter()
                .filter_map(|d| {
                    let kept = rng.random::<f64>() < noise.p_detect;
                    let noisy = (d + range_noise.sample(&mut rng)).max(1e-6);
                    kept.then_some(noisy)
                })
                .collect();
            let n_false = if noise.mu_false > 0.0 {
                Poisson::new(noise.mu_false).expect("positive mean").sample(&mut rng) as usize
            } else {
                0
            };
            ranges.extend((0..n_false).map(|_| rng.random_range(f64::EPSILON..clutter_max)));
            ranges.shuffle(&mut rng);
            ranges.into_iter().map(|d| d / SPEED_OF_LIGHT).collect()
        })
        .collect();
    Ok(MeasurementFrame { t, per_pa })
}

/// First wall hit by the ray from `origin` along `phi`: (distance, incidence angle).
pub fn cast_ray(origin: Point2, phi: f64, walls: &[Wall]) -> Option<(f64, f64)> {
    let dir = Point2::from_polar(1.0, phi);
    walls
        .iter()
        .filter_map(|w| {
            let far = origin + dir;
            let (s, u) = segment_params(origin, far, w.a, w.b)?;
            (s > EDGE_TOL && (0.0..=1.0).contains(&u)).then(|| {
                let cos_psi = dir.cross(w.direction()).abs().min(1.0);
                (s, cos_psi.acos())
            })
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// Active beam sweep from `agent`: one RSP per beam whose echo resolves within `max_range`.
pub fn generate_active_scan(
    scn: &Scenario,
    cfg: &SignalConfig,
    agent: Point2,
    n_beams: usize,
    seed: u64,
    max_range: f64,
) -> Result<Vec<Rsp>> {
    if n_beams == 0 {
        return Err(Error::InvalidParameter("n_beams must be at least 1".into()));
    }
    cfg.validate()?;
    let estimator = DistanceEstimator::new(cfg).with_max_range(max_range);
    let mut rsps = Vec::new();
    for i in 0..n_beams {
        let phi = std::f64::consts::TAU * i as f64 / n_beams as f64;
        let Some((d, psi)) = cast_ray(agent, phi, &scn.walls) else { continue };
        if d > max_range {
            continue;
        }
        let rcs = rcs_of_incidence(cfg, psi)?;
        let echo = simulate_echo(cfg, d, rcs, derive_seed(seed, Stream::ActiveScan, i as u64))?;
        match estimator.estimate(&echo, rcs) {
            Ok((d_mean, d_var)) => rsps.push(Rsp { phi, d_mean, d_var }),
            Err(Error::NoPeak { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(rsps)
}

/// Constant-speed walk along the waypoints; velocity is the displacement of the step into each slot.
pub fn generate_trajectory(scn: &Scenario) -> Result<Vec<AgentState>> {
    if scn.waypoints.len() < 2 {
        return Err(Error::Degenerate("trajectory needs at least two waypoints"));
    }
    if !(scn.step_length > 0.0) {
        return Err(Error::InvalidParameter("step_length must be positive".into()));
    }
    let legs: Vec<(Point2, Point2, f64)> = scn
        .waypoints
        .windows(2)
        .map(|w| (w[0], w[1], w[0].distance(w[1])))
        .filter(|&(_, _, len)| len > DEGENERACY_TOL)
        .collect();
    let total: f64 = legs.iter().map(|l| l.2).sum();
    if legs.is_empty() {
        return Err(Error::Degenerate("all waypoints coincide"));
    }
    let n_full = (total / scn.step_length + 1e-9).floor() as usize;
    let mut arc: Vec<f64> = (0..=n_full).map(|i| i as f64 * scn.step_length).collect();
    if total - arc[n_full] > 1e-9 {
        arc.push(total);
    }
    let mut positions = Vec::with_capacity(arc.len());
    let mut leg = 0;
    let mut leg_start = 0.0;
    for s in arc {
        while leg + 1 < legs.len() && s > leg_start + legs[leg].2 + 1e-12 {
            leg_start += legs[leg].2;
            leg += 1;
        }
        let (a, b, len) = legs[leg];
        let frac = ((s - leg_start) / len).clamp(0.0, 1.0);
        positions.push(a + (b - a) * frac);
    }
    let dt = scn.sample_period;
    let states = (0..positions.len())
        .map(|i| {
            let vel = if i == 0 {
                (positions[1] - positions[0]) / dt
            } else {
                (positions[i] - positions[i - 1]) / dt
            };
            AgentState { pos: positions[i], vel }
        })
        .collect();
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn wall(ax: f64, ay: f64, bx: f64, by: f64) -> Wall {
        Wall::new(p(ax, ay), p(bx, by)).unwrap()
    }

    fn line_scenario(waypoints: Vec<Point2>, step: f64) -> Scenario {
        Scenario { walls: vec![], pas: vec![p(0.0, 0.0)], waypoints, step_length: step, sample_period: 1.0 }
    }

    #[test]
    fn mirrors_of_reference_point() {
        let scn = Scenario {
            walls: vec![wall(-1.0, 10.0, 1.0, 10.0), wall(0.0, 0.0, 0.0, 40.0)],
            pas: vec![p(0.0, 0.0)],
            waypoints: vec![p(10.0, 15.0), p(11.0, 15.0)],
            step_length: 0.5,
            sample_period: 1.0,
        };
        let gt = ground_truth_features(&scn);
        assert!(gt[0].vas[0].distance(p(0.0, 20.0)) < 1e-12);
        assert!(gt[0].vrps[1].distance(p(-10.0, 15.0)) < 1e-12);
    }

    #[test]
    fn single_bounce_open_geometry() {
        let walls = [wall(-100.0, 0.0, 100.0, 0.0)];
        let agent = p(-2.0, 1.0);
        let pa = p(2.0, 1.0);
        let d = visible_single_bounce(agent, pa, 0, &walls).unwrap();
        assert!((d - agent.distance(p(2.0, -1.0))).abs() < 1e-12);
    }

    #[test]
    fn single_bounce_needs_the_segment() {
        let walls = [wall(5.0, 0.0, 10.0, 0.0)];
        assert!(visible_single_bounce(p(-2.0, 1.0), p(2.0, 1.0), 0, &walls).is_none());
    }

    #[test]
    fn single_bounce_occluded() {
        let walls = [wall(-100.0, 0.0, 100.0, 0.0), wall(-1.0, 0.2, -1.0, 5.0)];
        assert!(visible_single_bounce(p(-2.0, 1.0), p(2.0, 1.0), 0, &walls).is_none());
        assert!(visible_los(p(-2.0, 1.0), p(2.0, 1.0), &walls).is_none());
    }

    #[test]
    fn noiseless_measurements_are_exact() {
        let scn = Scenario {
            walls: vec![wall(-100.0, 0.0, 100.0, 0.0)],
            pas: vec![p(2.0, 1.0)],
            waypoints: vec![p(-2.0, 1.0), p(-1.0, 1.0)],
            step_length: 0.5,
            sample_period: 1.0,
        };
        let traj = generate_trajectory(&scn).unwrap();
        let noise = NoiseModel { toa_sigma: 1e-12, p_detect: 1.0, mu_false: 0.0, roi_radius: 50.0 };
        let frame = generate_measurements(&scn, &noise, &traj, 0, 3).unwrap();
        let mut ranges: Vec<f64> = frame.per_pa[0].iter().map(|z| z * SPEED_OF_LIGHT).collect();
        ranges.sort_by(f64::total_cmp);
        assert!((ranges[0] - 4.0).abs() < 1e-9);
        assert!((ranges[1] - 20f64.sqrt()).abs() < 1e-9);
        assert!(generate_measurements(&scn, &noise, &traj, 99, 3).is_err());
    }

    #[test]
    fn trajectory_interpolation() {
        let traj = generate_trajectory(&line_scenario(vec![p(0.0, 0.0), p(1.0, 0.0)], 0.5)).unwrap();
        let pos: Vec<Point2> = traj.iter().map(|s| s.pos).collect();
        assert_eq!(pos, vec![p(0.0, 0.0), p(0.5, 0.0), p(1.0, 0.0)]);
        assert_eq!(traj[1].vel, p(0.5, 0.0));
    }

    #[test]
    fn closed_loop_returns_to_start() {
        let wp = vec![p(0.0, 0.0), p(2.0, 0.0), p(2.0, 2.0), p(0.0, 2.0), p(0.0, 0.0)];
        let traj = generate_trajectory(&line_scenario(wp, 0.5)).unwrap();
        assert_eq!(traj.len(), 17);
        assert!(traj.last().unwrap().pos.distance(p(0.0, 0.0)) < 1e-12);
        assert!(generate_trajectory(&line_scenario(vec![p(0.0, 0.0)], 0.5)).is_err());
    }

    #[test]
    fn square_room_scan() {
        let scn = Scenario {
            walls: vec![
                wall(-5.0, -5.0, 5.0, -5.0),
                wall(5.0, -5.0, 5.0, 5.0),
                wall(5.0, 5.0, -5.0, 5.0),
                wall(-5.0, 5.0, -5.0, -5.0),
            ],
            pas: vec![p(0.0, 0.0)],
            waypoints: vec![p(0.0, 0.0), p(1.0, 0.0)],
            step_length: 1.0,
            sample_period: 1.0,
        };
        let cfg = SignalConfig {
            carrier_freq: 28e9,
            subcarrier_spacing: 120e3,
            num_subcarriers: 200,
            noise_var: 1e-30,
            rcs_gamma: 1.0,
            rcs_eta: 0.2,
        };
        let rsps = generate_active_scan(&scn, &cfg, p(0.0, 0.0), 4, 1, 180.0).unwrap();
        assert_eq!(rsps.len(), 4);
        for r in rsps {
            assert!((r.d_mean - 5.0).abs() < 1e-4, "{r:?}");
        }
    }

    #[test]
    fn ray_incidence_angle() {
        let walls = [wall(5.0, -50.0, 5.0, 50.0)];
        let (d, psi) = cast_ray(p(0.0, 0.0), std::f64::consts::FRAC_PI_4, &walls).unwrap();
        assert!((d - 5.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((psi - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }
}
