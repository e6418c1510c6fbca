use std::collections::BTreeSet;

use nalgebra::Matrix2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Position and velocity of the mobile agent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentState {
    pub pos: Point2,
    pub vel: Point2,
}

/// Weighted particle approximation of the agent state.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentBelief {
    pub particles: Vec<AgentState>,
    pub weights: Vec<f64>,
}

impl AgentBelief {
    pub fn uniform(particles: Vec<AgentState>) -> Self {
        let w = 1.0 / particles.len() as f64;
        let weights = vec![w; particles.len()];
        Self { particles, weights }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Weighted mean state.
    pub fn mean(&self) -> AgentState {
        let mut pos = Point2::ORIGIN;
        let mut vel = Point2::ORIGIN;
        for (s, &w) in self.particles.iter().zip(&self.weights) {
            pos += s.pos * w;
            vel += s.vel * w;
        }
        AgentState { pos, vel }
    }

    /// Trace of the weighted position covariance.
    pub fn position_variance(&self) -> f64 {
        let m = self.mean().pos;
        self.particles.iter().zip(&self.weights).map(|(s, &w)| w * (s.pos - m).norm_squared()).sum()
    }

    /// Reweight by log-factors and resample to `n` equally weighted particles.
    pub fn reweight_resample<R: Rng + ?Sized>(&mut self, log_factors: &[f64], n: usize, rng: &mut R) -> Result<()> {
        let weights = normalized_from_log(&self.weights, log_factors)?;
        let idx = systematic_resample(&weights, n, rng);
        self.particles = idx.iter().map(|&i| self.particles[i]).collect();
        self.weights = vec![1.0 / n as f64; n];
        Ok(())
    }
}

/// Whether a feature is a physical anchor or a virtual reference point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Pa,
    Vrp,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Pa => "pa",
            FeatureKind::Vrp => "vrp",
        }
    }
}

/// Particle belief over one feature position plus its existence probability.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBelief {
    /// Stable identity across time slots.
    pub id: u64,
    pub kind: FeatureKind,
    /// Anchor this feature was created for (PA features: their own anchor).
    pub pa_index: usize,
    /// 1 for the anchor itself, 2.. for surfaces in order of creation.
    pub feature_index: usize,
    pub particles: Vec<Point2>,
    pub weights: Vec<f64>,
    pub existence: f64,
    /// Anchors whose reflection off this surface the filter expects to see.
    pub links: BTreeSet<usize>,
    /// Newborn features skip pruning until their first legacy update.
    pub fresh: bool,
}

impl FeatureBelief {
    pub fn new(id: u64, kind: FeatureKind, pa_index: usize, particles: Vec<Point2>, existence: f64) -> Self {
        let n = particles.len();
        Self {
            id,
            kind,
            pa_index,
            feature_index: if kind == FeatureKind::Pa { 1 } else { 2 },
            particles,
            weights: vec![1.0 / n as f64; n],
            existence,
            links: BTreeSet::new(),
            fresh: false,
        }
    }

    pub fn mean(&self) -> Point2 {
        self.particles
            .iter()
            .zip(&self.weights)
            .fold(Point2::ORIGIN, |acc, (p, &w)| acc + *p * w)
    }

    pub fn covariance(&self) -> Matrix2<f64> {
        let m = self.mean();
        let mut c = Matrix2::zeros();
        for (p, &w) in self.particles.iter().zip(&self.weights) {
            let d = *p - m;
            c[(0, 0)] += w * d.x * d.x;
            c[(0, 1)] += w * d.x * d.y;
            c[(1, 1)] += w * d.y * d.y;
        }
        c[(1, 0)] = c[(0, 1)];
        c
    }

    /// Scalar spread: trace of the particle covariance.
    pub fn variance(&self) -> f64 {
        self.covariance().trace()
    }

    pub fn detectable_by(&self, pa: usize) -> bool {
        match self.kind {
            FeatureKind::Pa => self.pa_index == pa,
            FeatureKind::Vrp => self.links.contains(&pa),
        }
    }

    pub fn weight_sum_error(&self) -> f64 {
        (self.weights.iter().sum::<f64>() - 1.0).abs()
    }
}

/// Filter parameters. Defaults follow the reference experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlamParams {
    pub p_detect: f64,
    pub p_survive: f64,
    pub mu_false: f64,
    pub mu_new: f64,
    pub prune_threshold: f64,
    pub detect_threshold: f64,
    /// Feature identity distance (m).
    pub sim_threshold: f64,
    pub n_particles: usize,
    /// Agent velocity driving-noise variance per axis and slot.
    pub driving_var_agent: f64,
    /// Feature position jitter variance per axis and slot.
    pub driving_var_feature: f64,
    pub da_iterations: usize,
    pub da_tolerance: f64,
    /// Range noise standard deviation assumed by the filter (m).
    pub toa_sigma: f64,
    /// Radius of the region of interest (m); clutter and births are uniform in range over twice this.
    pub roi_radius: f64,
    /// Standard deviation of the initial velocity around its prior mean (m/s).
    pub init_velocity_std: f64,
    /// Minimum posterior probability of "not from a legacy feature" before a measurement spawns a feature.
    pub birth_relevance: f64,
    /// Existence assigned to surfaces initialized from active sensing.
    pub prior_existence: f64,
    /// Scale of the kernel jitter applied to feature particles after resampling,
    /// relative to the Gaussian-optimal bandwidth; 0 disables it.
    pub roughening: f64,
}

impl Default for SlamParams {
    fn default() -> Self {
        Self {
            p_detect: 0.95,
            p_survive: 0.999,
            mu_false: 1.0,
            mu_new: 1e-4,
            prune_threshold: 1e-4,
            detect_threshold: 0.5,
            sim_threshold: 1.0,
            n_particles: 5000,
            driving_var_agent: 0.0278,
            driving_var_feature: 1e-8,
            da_iterations: 20,
            da_tolerance: 1e-6,
            toa_sigma: 0.1,
            roi_radius: 180.0,
            init_velocity_std: 0.05,
            birth_relevance: 0.5,
            prior_existence: 0.999,
            roughening: 1.0,
        }
    }
}

impl SlamParams {
    pub fn validate(&self) -> Result<()> {
        let probs = [("p_detect", self.p_detect), ("p_survive", self.p_survive)];
        for (name, p) in probs {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidParameter(format!("slam.{name} must lie in (0, 1], got {p}")));
            }
        }
        let positive = [
            ("prune_threshold", self.prune_threshold),
            ("detect_threshold", self.detect_threshold),
            ("sim_threshold", self.sim_threshold),
            ("toa_sigma", self.toa_sigma),
            ("roi_radius", self.roi_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("slam.{name} must be positive, got {v}")));
            }
        }
        if self.mu_false < 0.0
            || self.mu_new < 0.0
            || self.driving_var_agent < 0.0
            || self.driving_var_feature < 0.0
            || self.roughening < 0.0
        {
            return Err(Error::InvalidParameter("slam rates and variances must be nonnegative".into()));
        }
        if self.n_particles == 0 {
            return Err(Error::InvalidParameter("slam.n_particles must be positive".into()));
        }
        Ok(())
    }

    /// Clutter density in range units: uniform over `(0, 2 * roi_radius)`.
    pub fn false_density(&self) -> f64 {
        1.0 / (2.0 * self.roi_radius)
    }
}

/// Approximate association marginals and the converged messages behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMarginals {
    /// Row `i`: probabilities of feature `i` taking measurement `0..=M` (0 = missed).
    pub feature: Vec<Vec<f64>>,
    /// Row `j`: probabilities of measurement `j` coming from feature `0..=K` (0 = clutter or new).
    pub measurement: Vec<Vec<f64>>,
    /// `[i][j]`: message from measurement `j` to feature `i`.
    pub to_feature: Vec<Vec<f64>>,
    /// `[i][j]`: message from feature `i` to measurement `j`.
    pub to_measurement: Vec<Vec<f64>>,
    pub iterations: usize,
}

/// Normalize `prior * exp(log_factors)` in a numerically safe way.
pub(crate) fn normalized_from_log(prior: &[f64], log_factors: &[f64]) -> Result<Vec<f64>> {
    let logs: Vec<f64> = prior
        .iter()
        .zip(log_factors)
        .map(|(&w, &l)| if w > 0.0 { w.ln() + l } else { f64::NEG_INFINITY })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let mut w: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    Ok(w)
}

/// Systematic resampling: indices of `n` draws from normalized `weights`.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let step = 1.0 / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut i = 0;
    for _ in 0..n {
        while u > cum && i + 1 < weights.len() {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
        u += step;
    }
    out
}
