//! Time-slot recursion of the particle filter.
//!
//! Agent and feature particle sets are paired by index: particle `n` of every
//! feature is evaluated against particle `n` of the agent. The agent set is
//! shuffled after each resampling so the pairing stays uninformative.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::refinement::refine;
use crate::scenario::MeasurementFrame;
use crate::SPEED_OF_LIGHT;

use super::association::loopy_data_association;
use super::factors::{apparent_source, image_of, range_density};
use super::types::{
    systematic_resample, AgentBelief, AgentState, AssociationMarginals, FeatureBelief, FeatureKind,
    SlamParams,
};

/// Residuals beyond this many standard deviations contribute nothing.
const GATE_SIGMAS: f64 = 8.0;
/// A feature must have been detected this many slots before the map remembers it after pruning.
const MEMORY_MIN_SLOTS: usize = 5;
/// Gate, in standard deviations, for explaining a new range with a remembered surface.
const RECALL_SIGMAS: f64 = 3.0;

/// Add zero-mean Gaussian noise to the velocity, then move with the old velocity.
pub fn predict_agent<R: Rng + ?Sized>(belief: &mut AgentBelief, params: &SlamParams, dt: f64, rng: &mut R) {
    let noise = (params.driving_var_agent > 0.0).then(|| Normal::new(0.0, params.driving_var_agent.sqrt()).unwrap());
    for s in &mut belief.particles {
        s.pos += s.vel * dt;
        if let Some(noise) = &noise {
            s.vel += Point2::new(noise.sample(rng), noise.sample(rng));
        }
    }
}

/// Survival and position jitter for every feature.
pub fn predict_features<R: Rng + ?Sized>(features: &mut [FeatureBelief], params: &SlamParams, rng: &mut R) {
    let noise =
        (params.driving_var_feature > 0.0).then(|| Normal::new(0.0, params.driving_var_feature.sqrt()).unwrap());
    for f in features {
        f.existence *= params.p_survive;
        if let Some(noise) = &noise {
            for p in &mut f.particles {
                *p += Point2::new(noise.sample(rng), noise.sample(rng));
            }
        }
    }
}

/// Per-particle evidence of the legacy features for one anchor's measurements.
#[derive(Debug, Clone)]
pub struct AnchorEvaluation {
    /// Indices into the feature list that take part.
    pub participants: Vec<usize>,
    /// Measured ranges (m).
    pub ranges: Vec<f64>,
    /// `ratios[i][j * n + p]`: detection likelihood ratio of participant `i`,
    /// measurement `j`, particle pair `p`.
    pub ratios: Vec<Vec<f64>>,
    /// Association weights: `[missed, measurement 1, .., measurement M]` per participant.
    pub weights: Vec<Vec<f64>>,
}

/// Scale turning a range density into a ratio against the clutter-or-new hypothesis.
fn ratio_scale(params: &SlamParams) -> f64 {
    let baseline = (params.mu_false + params.mu_new).max(1e-300) * params.false_density();
    params.p_detect / baseline
}

/// Evaluate the measurement model for every feature that anchor `k` can see.
pub fn evaluate(
    agent: &AgentBelief,
    features: &[FeatureBelief],
    participants: Vec<usize>,
    pa_estimate: Point2,
    rp: Point2,
    ranges: &[f64],
    params: &SlamParams,
) -> AnchorEvaluation {
    let n = agent.len();
    let m = ranges.len();
    let scale = ratio_scale(params);
    let sigma = params.toa_sigma;
    let gate = GATE_SIGMAS * sigma;
    let mut ratios = Vec::with_capacity(participants.len());
    let mut weights = Vec::with_capacity(participants.len());
    for &i in &participants {
        let f = &features[i];
        let mut r = vec![0.0; m * n];
        let mut sums = vec![0.0; m];
        for (p, (a, &pos)) in agent.particles.iter().zip(&f.particles).enumerate() {
            let d = a.pos.distance(apparent_source(f.kind, pos, pa_estimate, rp));
            for (j, &rho) in ranges.iter().enumerate() {
                let res = rho - d;
                if res.abs() < gate {
                    let v = scale * range_density(res, sigma);
                    r[j * n + p] = v;
                    sums[j] += v;
                }
            }
        }
        let e = f.existence;
        let mut w = Vec::with_capacity(m + 1);
        w.push(e * (1.0 - params.p_detect) + (1.0 - e));
        w.extend(sums.iter().map(|s| e * s / n as f64));
        ratios.push(r);
        weights.push(w);
    }
    AnchorEvaluation { participants, ranges: ranges.to_vec(), ratios, weights }
}

/// Outcome of fusing one anchor's association result into the beliefs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateReport {
    /// The agent weights underflowed and the predicted particles were kept.
    pub degenerate: bool,
}

/// Reweight agent and participating features with the association messages,
/// then resample everything to `params.n_particles`.
pub fn update_beliefs<R: Rng + ?Sized>(
    agent: &mut AgentBelief,
    features: &mut [FeatureBelief],
    eval: &AnchorEvaluation,
    marginals: &AssociationMarginals,
    params: &SlamParams,
    update_feature: impl Fn(&FeatureBelief) -> bool,
    rng: &mut R,
) -> UpdateReport {
    let n = agent.len();
    let m = eval.ranges.len();
    let mut agent_log = vec![0.0; n];
    let mut w = vec![0.0; n];
    for (slot, &i) in eval.participants.iter().enumerate() {
        let r = &eval.ratios[slot];
        w.iter_mut().for_each(|x| *x = 1.0 - params.p_detect);
        for j in 0..m {
            let mu = marginals.to_feature[slot][j];
            if mu == 0.0 {
                continue;
            }
            for (x, &v) in w.iter_mut().zip(&r[j * n..(j + 1) * n]) {
                *x += v * mu;
            }
        }
        let f = &mut features[i];
        let e = f.existence;
        for (l, &x) in agent_log.iter_mut().zip(&w) {
            *l += (e * x + 1.0 - e).max(1e-300).ln();
        }
        if !update_feature(f) {
            continue;
        }
        let mean_w = w.iter().sum::<f64>() / n as f64;
        f.existence = if e * mean_w + 1.0 - e > 0.0 { e * mean_w / (e * mean_w + 1.0 - e) } else { 0.0 };
        f.fresh = false;
        if mean_w > 0.0 && mean_w.is_finite() {
            let weights: Vec<f64> = w.iter().map(|x| x / (mean_w * n as f64)).collect();
            let idx = systematic_resample(&weights, params.n_particles, rng);
            f.particles = idx.iter().map(|&p| f.particles[p]).collect();
            f.weights = vec![1.0 / params.n_particles as f64; params.n_particles];
            roughen(f, params, rng);
        }
    }
    let mut report = UpdateReport::default();
    if agent.reweight_resample(&agent_log, params.n_particles, rng).is_err() {
        report.degenerate = true;
    }
    agent.particles.shuffle(rng);
    report
}

/// Kernel jitter restoring particle diversity after resampling.
///
/// The kernel is the particle covariance scaled by the Gaussian-optimal bandwidth,
/// shrunk so its largest standard deviation stays within one range sigma.
pub fn roughen<R: Rng + ?Sized>(f: &mut FeatureBelief, params: &SlamParams, rng: &mut R) {
    let n = f.particles.len();
    if params.roughening <= 0.0 || n < 2 {
        return;
    }
    let h = params.roughening * (4.0 / (4.0 * n as f64)).powf(1.0 / 6.0);
    let mut cov = f.covariance() * (h * h);
    let eig = cov.symmetric_eigenvalues();
    let largest = eig.max();
    if !(largest > 0.0) || !largest.is_finite() {
        return;
    }
    let cap = params.toa_sigma * params.toa_sigma;
    if largest > cap {
        cov *= cap / largest;
    }
    // Cholesky of a 2x2 PSD matrix, tolerant of a zero minor.
    let l11 = cov[(0, 0)].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { cov[(1, 0)] / l11 } else { 0.0 };
    let l22 = (cov[(1, 1)] - l21 * l21).max(0.0).sqrt();
    for p in &mut f.particles {
        let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        p.x += l11 * a;
        p.y += l21 * a + l22 * b;
    }
}

/// How the filter treats surface features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SurfacePolicy {
    /// Surfaces are refined, born and pruned.
    #[default]
    Adaptive,
    /// Surfaces stay at their initial beliefs; only anchors are refined.
    Frozen,
}

#[derive(Debug, Clone)]
struct MapEntry {
    belief: FeatureBelief,
    detected_slots: usize,
    retired: bool,
}

/// Estimated feature reported by [`estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEstimate {
    pub id: u64,
    pub kind: FeatureKind,
    pub pa_index: usize,
    pub feature_index: usize,
    pub mean: Point2,
    pub existence: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub links: BTreeSet<usize>,
}

impl FeatureEstimate {
    fn of(f: &FeatureBelief) -> Self {
        let c = f.covariance();
        Self {
            id: f.id,
            kind: f.kind,
            pa_index: f.pa_index,
            feature_index: f.feature_index,
            mean: f.mean(),
            existence: f.existence,
            var_x: c[(0, 0)],
            var_y: c[(1, 1)],
            links: f.links.clone(),
        }
    }

    pub fn variance(&self) -> f64 {
        self.var_x + self.var_y
    }
}

/// MMSE agent state and the detected features.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub agent: AgentState,
    pub features: Vec<FeatureEstimate>,
}

/// Complete filter state between time slots.
#[derive(Debug, Clone)]
pub struct SlamState {
    pub t: usize,
    pub rp: Point2,
    pub num_pas: usize,
    pub agent: AgentBelief,
    pub features: Vec<FeatureBelief>,
    pub surfaces: SurfacePolicy,
    /// Time slots whose agent update had to be skipped.
    pub degenerate_slots: Vec<usize>,
    map: BTreeMap<u64, MapEntry>,
    snapshots: BTreeMap<u64, (Vec<Point2>, f64)>,
    next_id: u64,
    next_feature_index: Vec<usize>,
    rng: ChaCha8Rng,
}

impl SlamState {
    /// Start the recursion at slot 0. Identities and per-anchor indices of
    /// `features` are reassigned in order.
    pub fn new(
        rp: Point2,
        agent: AgentBelief,
        features: Vec<FeatureBelief>,
        num_pas: usize,
        surfaces: SurfacePolicy,
        params: &SlamParams,
        seed: u64,
    ) -> Result<Self> {
        if agent.is_empty() {
            return Err(Error::Empty("agent particles"));
        }
        if features.iter().any(|f| f.particles.len() != agent.len() || f.pa_index >= num_pas) {
            return Err(Error::InvalidParameter("feature particle counts or anchor indices inconsistent".into()));
        }
        let mut state = Self {
            t: 0,
            rp,
            num_pas,
            agent,
            features: Vec::new(),
            surfaces,
            degenerate_slots: Vec::new(),
            map: BTreeMap::new(),
            snapshots: BTreeMap::new(),
            next_id: 0,
            next_feature_index: vec![2; num_pas],
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        for f in features {
            state.adopt(f);
        }
        state.take_snapshots();
        state.update_map(params);
        Ok(state)
    }

    fn adopt(&mut self, mut f: FeatureBelief) {
        f.id = self.next_id;
        self.next_id += 1;
        f.feature_index = match f.kind {
            FeatureKind::Pa => 1,
            FeatureKind::Vrp => {
                let idx = self.next_feature_index[f.pa_index];
                self.next_feature_index[f.pa_index] += 1;
                idx
            }
        };
        self.features.push(f);
    }

    fn adaptive(&self) -> bool {
        self.surfaces == SurfacePolicy::Adaptive
    }

    fn pa_estimate(&self, k: usize) -> Option<Point2> {
        self.features.iter().find(|f| f.kind == FeatureKind::Pa && f.pa_index == k).map(FeatureBelief::mean)
    }

    /// One time slot: predict, then fuse every anchor's measurements in turn.
    pub fn step(&mut self, frame: &MeasurementFrame, params: &SlamParams, dt: f64) -> Result<()> {
        if frame.per_pa.len() != self.num_pas {
            return Err(Error::LengthMismatch(frame.per_pa.len(), self.num_pas));
        }
        self.t = frame.t;
        predict_agent(&mut self.agent, params, dt, &mut self.rng);
        let adaptive = self.adaptive();
        for f in self.features.iter_mut().filter(|f| adaptive || f.kind == FeatureKind::Pa) {
            predict_features(std::slice::from_mut(f), params, &mut self.rng);
        }

        for k in 0..self.num_pas {
            let ranges: Vec<f64> = frame.per_pa[k].iter().map(|z| z * SPEED_OF_LIGHT).collect();
            self.process_anchor(k, &ranges, params)?;
        }
        self.post_process(params);
        Ok(())
    }

    fn process_anchor(&mut self, k: usize, ranges: &[f64], params: &SlamParams) -> Result<()> {
        let Some(pa_hat) = self.pa_estimate(k) else { return Ok(()) };
        let participants: Vec<usize> = (0..self.features.len()).filter(|&i| self.features[i].detectable_by(k)).collect();
        let eval = evaluate(&self.agent, &self.features, participants, pa_hat, self.rp, ranges, params);
        let marginals =
            loopy_data_association(&eval.weights, &vec![1.0; ranges.len()], params.da_iterations, params.da_tolerance);
        let adaptive = self.adaptive();
        let report = update_beliefs(
            &mut self.agent,
            &mut self.features,
            &eval,
            &marginals,
            params,
            |f| adaptive || f.kind == FeatureKind::Pa,
            &mut self.rng,
        );
        if report.degenerate {
            self.degenerate_slots.push(self.t);
        }
        if adaptive && params.mu_new > 0.0 {
            let birth_share = params.mu_new / (params.mu_false + params.mu_new);
            let agent_hat = self.agent.mean();
            let agent_var = self.agent.position_variance();
            for (j, row) in marginals.measurement.iter().enumerate() {
                if row[0] > params.birth_relevance {
                    let existence = row[0] * birth_share;
                    match self.recall(pa_hat, agent_hat.pos, agent_var, ranges[j], params) {
                        Some(id) => self.revive(id, k, existence),
                        None => {
                            let f = self.spawn_surface(k, pa_hat, ranges[j], existence, params);
                            self.adopt(f);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Retired surface from the map that explains `range` for anchor `k`.
    fn recall(&self, pa_hat: Point2, agent: Point2, agent_var: f64, range: f64, params: &SlamParams) -> Option<u64> {
        let sigma2 = params.toa_sigma * params.toa_sigma + agent_var;
        self.map
            .iter()
            .filter(|(_, e)| e.retired && e.belief.kind == FeatureKind::Vrp)
            .filter_map(|(&id, e)| {
                let vrp = e.belief.mean();
                let res = range - agent.distance(image_of(pa_hat, self.rp, vrp));
                let gate = RECALL_SIGMAS * (sigma2 + e.belief.variance()).sqrt();
                (res.abs() < gate).then_some((id, res.abs()))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(id, _)| id)
    }

    /// Put a retired surface back into the filter as a fresh hypothesis.
    fn revive(&mut self, id: u64, k: usize, existence: f64) {
        let Some(entry) = self.map.get_mut(&id) else { return };
        entry.retired = false;
        let mut f = entry.belief.clone();
        f.existence = existence;
        f.links.insert(k);
        f.fresh = true;
        self.features.push(f);
    }

    /// Surface hypothesis for an unexplained range: images on the range circle
    /// around each agent particle, mapped to surfaces through the anchor estimate.
    fn spawn_surface(&mut self, k: usize, pa_hat: Point2, range: f64, existence: f64, params: &SlamParams) -> FeatureBelief {
        let particles = self
            .agent
            .particles
            .iter()
            .map(|a| loop {
                let theta = self.rng.random::<f64>() * std::f64::consts::TAU;
                let image = a.pos + Point2::from_polar(range, theta);
                let vrp = image_of(self.rp, pa_hat, image);
                if vrp.is_finite() && vrp.distance(self.rp) > 1e-6 {
                    break vrp;
                }
            })
            .collect();
        let mut f = FeatureBelief::new(0, FeatureKind::Vrp, k, particles, existence);
        f.links.insert(k);
        f.fresh = true;
        debug_assert_eq!(f.particles.len(), params.n_particles);
        f
    }

    fn post_process(&mut self, params: &SlamParams) {
        let adaptive = self.adaptive();
        let touched = |f: &FeatureBelief| adaptive || f.kind == FeatureKind::Pa;

        // A feature whose belief widened without moving keeps its previous particles.
        for f in self.features.iter_mut().filter(|f| !f.fresh && touched(f)) {
            if let Some((prev, prev_var)) = self.snapshots.get(&f.id) {
                let var = f.variance();
                if var > *prev_var {
                    let old = FeatureBelief { particles: prev.clone(), ..f.clone() };
                    if old.mean().distance(f.mean()) < params.sim_threshold {
                        f.particles = old.particles;
                    }
                }
            }
        }

        if adaptive {
            self.merge_duplicates(params);
            let threshold = params.prune_threshold;
            let mut pruned = Vec::new();
            self.features.retain(|f| {
                let keep = f.kind == FeatureKind::Pa || f.fresh || f.existence >= threshold;
                if !keep {
                    pruned.push(f.id);
                }
                keep
            });
            for id in pruned {
                self.snapshots.remove(&id);
                if let Some(e) = self.map.get_mut(&id) {
                    if e.detected_slots >= MEMORY_MIN_SLOTS {
                        e.retired = true;
                    } else {
                        self.map.remove(&id);
                    }
                }
            }
        }
        self.take_snapshots();
        self.update_map(params);
    }

    fn merge_duplicates(&mut self, params: &SlamParams) {
        let tight = params.sim_threshold * params.sim_threshold;
        loop {
            let stats: Vec<(Point2, f64)> = self.features.iter().map(|f| (f.mean(), f.variance())).collect();
            let mut found = None;
            'outer: for a in 0..self.features.len() {
                for b in a + 1..self.features.len() {
                    let (fa, fb) = (&self.features[a], &self.features[b]);
                    if fa.kind != FeatureKind::Vrp || fb.kind != FeatureKind::Vrp || fa.fresh || fb.fresh {
                        continue;
                    }
                    if stats[a].1 < tight && stats[b].1 < tight && stats[a].0.distance(stats[b].0) < params.sim_threshold {
                        found = Some(if stats[a].1 <= stats[b].1 { (a, b) } else { (b, a) });
                        break 'outer;
                    }
                }
            }
            let Some((keep, drop)) = found else { break };
            let dropped = self.features[drop].clone();
            let kept = &mut self.features[keep];
            kept.links.extend(dropped.links.iter().copied());
            kept.existence = kept.existence.max(dropped.existence);
            if let Some(old) = self.map.remove(&dropped.id) {
                let entry = self.map.entry(kept.id).or_insert(MapEntry { belief: kept.clone(), detected_slots: 0, retired: false });
                entry.detected_slots = entry.detected_slots.max(old.detected_slots);
            }
            self.snapshots.remove(&dropped.id);
            self.features.remove(drop);
        }
    }

    fn take_snapshots(&mut self) {
        for f in self.features.iter().filter(|f| !f.fresh) {
            self.snapshots.insert(f.id, (f.particles.clone(), f.variance()));
        }
    }

    fn update_map(&mut self, params: &SlamParams) {
        let localized = params.sim_threshold * params.sim_threshold;
        for f in &self.features {
            if f.existence <= params.detect_threshold || f.variance() >= localized {
                continue;
            }
            match self.map.get_mut(&f.id) {
                None => {
                    self.map.insert(f.id, MapEntry { belief: f.clone(), detected_slots: 1, retired: false });
                }
                Some(e) => {
                    e.detected_slots += 1;
                    e.retired = false;
                    let moved = e.belief.mean().distance(f.mean()) >= params.sim_threshold;
                    if moved || f.variance() <= e.belief.variance() {
                        e.belief = f.clone();
                    } else {
                        e.belief.existence = f.existence;
                        e.belief.links = f.links.clone();
                    }
                }
            }
        }
    }

    /// Map with memory: live detected features plus retired ones that were
    /// detected long enough, duplicates resolved by identity distance.
    pub fn map_estimate(&self, params: &SlamParams) -> Vec<FeatureEstimate> {
        let live: BTreeMap<u64, &FeatureBelief> = self.features.iter().map(|f| (f.id, f)).collect();
        let mut retired = Vec::new();
        let mut current = Vec::new();
        for (id, e) in &self.map {
            if e.retired {
                retired.push(e.belief.clone());
            } else if e.detected_slots >= MEMORY_MIN_SLOTS
                || live.get(id).is_some_and(|f| f.existence > params.detect_threshold)
            {
                current.push(e.belief.clone());
            }
        }
        refine(&retired, &current, params.sim_threshold).iter().map(FeatureEstimate::of).collect()
    }

    /// Mutable access to the filter's random stream, for callers that extend the recursion.
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// MMSE agent state and the live features above the detection threshold.
pub fn estimate(state: &SlamState, params: &SlamParams) -> Estimate {
    Estimate {
        agent: state.agent.mean(),
        features: state
            .features
            .iter()
            .filter(|f| f.existence > params.detect_threshold)
            .map(FeatureEstimate::of)
            .collect(),
    }
}

/// Agent particles at `rp` with velocities drawn around `velocity`.
pub fn initial_agent<R: Rng + ?Sized>(rp: Point2, velocity: Point2, params: &SlamParams, rng: &mut R) -> AgentBelief {
    let spread = params.init_velocity_std;
    let particles = (0..params.n_particles)
        .map(|_| {
            let jitter = if spread > 0.0 {
                let n = Normal::new(0.0, spread).unwrap();
                Point2::new(n.sample(rng), n.sample(rng))
            } else {
                Point2::ORIGIN
            };
            AgentState { pos: rp, vel: velocity + jitter }
        })
        .collect();
    AgentBelief::uniform(particles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize) -> SlamParams {
        SlamParams { n_particles: n, ..SlamParams::default() }
    }

    #[test]
    fn constant_velocity_prediction() {
        let p = SlamParams { driving_var_agent: 0.0, ..params(2) };
        let mut b = AgentBelief::uniform(vec![
            AgentState { pos: Point2::ORIGIN, vel: Point2::new(1.0, 0.0) },
            AgentState { pos: Point2::new(2.0, 2.0), vel: Point2::ORIGIN },
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        predict_agent(&mut b, &p, 1.0, &mut rng);
        assert_eq!(b.particles[0].pos, Point2::new(1.0, 0.0));
        assert_eq!(b.particles[1].pos, Point2::new(2.0, 2.0));
    }

    #[test]
    fn survival_scales_existence() {
        let p = SlamParams { driving_var_feature: 0.0, ..params(1) };
        let mut f = vec![FeatureBelief::new(0, FeatureKind::Vrp, 0, vec![Point2::new(1.0, 1.0)], 0.8)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        predict_features(&mut f, &p, &mut rng);
        assert!((f[0].existence - 0.7992).abs() < 1e-12);
        assert_eq!(f[0].particles[0], Point2::new(1.0, 1.0));
        let keep = SlamParams { p_survive: 1.0, ..p };
        predict_features(&mut f, &keep, &mut rng);
        assert!((f[0].existence - 0.7992).abs() < 1e-12);
    }

    #[test]
    fn estimate_respects_threshold() {
        let p = params(2);
        let agent = AgentBelief::uniform(vec![AgentState::default(); 2]);
        let pts = vec![Point2::new(-1.0, 0.0), Point2::new(1.0, 0.0)];
        let mut low = FeatureBelief::new(0, FeatureKind::Vrp, 0, pts.clone(), 0.49);
        low.links.insert(0);
        let pa = FeatureBelief::new(0, FeatureKind::Pa, 0, pts, 0.9);
        let state = SlamState::new(Point2::ORIGIN, agent, vec![pa, low], 1, SurfacePolicy::Adaptive, &p, 1).unwrap();
        let est = estimate(&state, &p);
        assert_eq!(est.features.len(), 1);
        assert_eq!(est.features[0].kind, FeatureKind::Pa);
        assert!(est.features[0].mean.norm() < 1e-15);
        assert_eq!(est.agent.pos, Point2::ORIGIN);
    }

    #[test]
    fn missed_feature_loses_existence() {
        let n = 200;
        let p = params(n);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut agent = AgentBelief::uniform(vec![AgentState::default(); n]);
        let mut features = vec![FeatureBelief::new(0, FeatureKind::Pa, 0, vec![Point2::new(10.0, 0.0); n], 0.9)];
        let eval = evaluate(&agent, &features, vec![0], Point2::new(10.0, 0.0), Point2::ORIGIN, &[], &p);
        let marg = loopy_data_association(&eval.weights, &[], 10, 1e-9);
        update_beliefs(&mut agent, &mut features, &eval, &marg, &p, |_| true, &mut rng);
        assert!(features[0].existence < 0.9);
    }
}
