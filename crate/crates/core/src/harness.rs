//! Experiment runner: simulate, filter, score and write result files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::active::{vrp_priors_from_scan, GaussianVrp, ScanGrouping};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::metrics::ospa;
use crate::pa_init::{initialize_anchor, passive_anchor, InitOptions};
use crate::scenario::{generate_active_scan, generate_measurements, generate_trajectory, ground_truth_vrps, Scenario};
use crate::seeding::{derive_seed, Stream};
use crate::slam::{
    estimate, image_of, initial_agent, FeatureBelief, FeatureEstimate, FeatureKind, SlamParams, SlamState,
    SurfacePolicy,
};

/// OSPA cutoff (m) and order used for every reported mapping error.
pub const OSPA_CUTOFF: f64 = 10.0;
pub const OSPA_ORDER: f64 = 1.0;
/// A live surface estimate this close to a true VRP counts as detecting it (m).
pub const DETECTION_RADIUS: f64 = 2.0;

/// Which sensing pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Hybrid,
    PassiveOnly,
    ActiveOnly,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Hybrid => "hybrid",
            Mode::PassiveOnly => "passive-only",
            Mode::ActiveOnly => "active-only",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(Mode::Hybrid),
            "passive-only" => Ok(Mode::PassiveOnly),
            "active-only" => Ok(Mode::ActiveOnly),
            other => Err(Error::InvalidParameter(format!(
                "unknown mode '{other}' (expected hybrid, passive-only or active-only)"
            ))),
        }
    }
}

/// Per-run overrides of the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunOverrides {
    pub n_particles: Option<usize>,
    /// Number of time slots to simulate, counting the initial one.
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: usize,
    pub true_x: f64,
    pub true_y: f64,
    pub est_x: f64,
    pub est_y: f64,
    pub err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRow {
    pub t: usize,
    pub pa_index: usize,
    pub feature_index: usize,
    pub kind: &'static str,
    pub est_x: f64,
    pub est_y: f64,
    pub existence: f64,
    pub var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub t: usize,
    pub mae_cum: f64,
    pub ospa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleRow {
    pub pa_index: usize,
    pub x: f64,
    pub y: f64,
}

/// First slot at which a true VRP had a live detected estimate nearby.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDetection {
    pub vrp: [f64; 2],
    pub first_detected: Option<usize>,
}

/// Per-seed summary; together with the echoed config it reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub seed: u64,
    pub steps: usize,
    pub config: ScenarioConfig,
    pub final_mae: f64,
    pub final_ospa: f64,
    /// First slot with mapping OSPA below 2 m.
    pub ospa_below_2m_at: Option<usize>,
    pub surfaces: Vec<SurfaceDetection>,
    pub degenerate_slots: Vec<usize>,
}

/// Everything one seed produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: RunSummary,
    pub trajectory: Vec<TrajectoryRow>,
    pub features: Vec<FeatureRow>,
    pub metrics: Vec<MetricRow>,
    /// Mapping error measured on anchor images instead of VRPs.
    pub metrics_va: Vec<MetricRow>,
    /// Anchor particle clouds right after initialization.
    pub init_particles: Vec<ParticleRow>,
}

/// Config with the overrides applied, as actually run.
pub fn effective_config(cfg: &ScenarioConfig, overrides: &RunOverrides) -> ScenarioConfig {
    let mut cfg = cfg.clone();
    if let Some(n) = overrides.n_particles {
        cfg.slam.n_particles = n;
    }
    cfg
}

fn surface_beliefs<R: rand::Rng + ?Sized>(priors: &[GaussianVrp], n: usize, rng: &mut R) -> Vec<FeatureBelief> {
    priors
        .iter()
        .map(|g| FeatureBelief::new(0, FeatureKind::Vrp, 0, (0..n).map(|_| g.sample(rng)).collect(), 0.0))
        .collect()
}

/// Initial features for `mode` from the first frame and, if used, the active scan.
fn initial_features(
    scn: &Scenario,
    cfg: &ScenarioConfig,
    params: &SlamParams,
    mode: Mode,
    frame0: &crate::scenario::MeasurementFrame,
    seed: u64,
) -> Result<Vec<FeatureBelief>> {
    let rp = scn.reference_point();
    let n = params.n_particles;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::Init, 0));
    if mode == Mode::PassiveOnly {
        return (0..scn.pas.len()).map(|k| passive_anchor(rp, frame0, k, n, params.toa_sigma, &mut rng)).collect();
    }
    let rsps = generate_active_scan(
        scn,
        &cfg.signal,
        rp,
        cfg.n_beams,
        derive_seed(seed, Stream::ActiveScan, 0),
        params.roi_radius,
    )?;
    let priors = vrp_priors_from_scan(rp, &rsps, &ScanGrouping::default());
    initialize_with_priors(rp, scn.pas.len(), frame0, &priors, params, &mut rng)
}

/// Anchor beliefs from the first frame plus one surface belief per prior, linked to
/// the anchors whose measurements they explain.
pub fn initialize_with_priors<R: rand::Rng + ?Sized>(
    rp: Point2,
    num_pas: usize,
    frame0: &crate::scenario::MeasurementFrame,
    priors: &[GaussianVrp],
    params: &SlamParams,
    rng: &mut R,
) -> Result<Vec<FeatureBelief>> {
    let opts = InitOptions {
        existence: params.prior_existence,
        ..InitOptions::new(params.n_particles, params.toa_sigma, params.p_detect, params.mu_false * params.false_density())
    };
    let mut surfaces = surface_beliefs(priors, params.n_particles, rng);
    for s in &mut surfaces {
        s.existence = params.prior_existence;
    }
    let mut anchors = Vec::with_capacity(num_pas);
    for k in 0..num_pas {
        let init = initialize_anchor(rp, frame0, k, priors, &opts, rng)?;
        for &l in &init.links {
            surfaces[l].links.insert(k);
        }
        anchors.push(init.belief);
    }
    for s in &mut surfaces {
        s.pa_index = s.links.iter().next().copied().unwrap_or(0);
    }
    anchors.extend(surfaces);
    Ok(anchors)
}

fn anchor_images(estimates: &[FeatureEstimate], rp: Point2) -> Vec<Point2> {
    let mut out = Vec::new();
    for pa in estimates.iter().filter(|f| f.kind == FeatureKind::Pa) {
        for v in estimates.iter().filter(|f| f.kind == FeatureKind::Vrp && f.links.contains(&pa.pa_index)) {
            out.push(image_of(pa.mean, rp, v.mean));
        }
    }
    out
}

fn true_images(scn: &Scenario) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::new();
    for &pa in &scn.pas {
        for w in &scn.walls {
            let va = w.mirror(pa);
            if out.iter().all(|u| u.distance(va) > 1e-6) {
                out.push(va);
            }
        }
    }
    out
}

/// Simulate and filter one seed.
pub fn run_single(cfg: &ScenarioConfig, mode: Mode, seed: u64, overrides: &RunOverrides) -> Result<RunResult> {
    let cfg = effective_config(cfg, overrides);
    cfg.validate()?;
    let scn = cfg.scenario()?;
    let params = cfg.slam_params();
    let mut trajectory = generate_trajectory(&scn)?;
    if let Some(steps) = overrides.steps {
        trajectory.truncate(steps.max(1));
    }
    let rp = scn.reference_point();
    let truth_vrps = ground_truth_vrps(&scn);
    let truth_map: Vec<Point2> = scn.pas.iter().copied().chain(truth_vrps.iter().copied()).collect();
    let truth_images = true_images(&scn);

    let frame_at =
        |t: usize| generate_measurements(&scn, &cfg.noise, &trajectory, t, derive_seed(seed, Stream::Measurements, t as u64));
    let frame0 = frame_at(0)?;
    let features = initial_features(&scn, &cfg, &params, mode, &frame0, seed)?;
    let init_particles = features
        .iter()
        .filter(|f| f.kind == FeatureKind::Pa)
        .flat_map(|f| f.particles.iter().map(move |p| ParticleRow { pa_index: f.pa_index, x: p.x, y: p.y }))
        .collect();

    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::Init, 1));
    let agent = initial_agent(rp, trajectory[0].vel, &params, &mut init_rng);
    let policy = if mode == Mode::ActiveOnly { SurfacePolicy::Frozen } else { SurfacePolicy::Adaptive };
    let mut state =
        SlamState::new(rp, agent, features, scn.pas.len(), policy, &params, derive_seed(seed, Stream::Filter, 0))?;

    let mut rows = Vec::with_capacity(trajectory.len());
    let mut feature_rows = Vec::new();
    let mut metrics = Vec::with_capacity(trajectory.len());
    let mut metrics_va = Vec::with_capacity(trajectory.len());
    let mut surfaces: Vec<SurfaceDetection> =
        truth_vrps.iter().map(|v| SurfaceDetection { vrp: [v.x, v.y], first_detected: None }).collect();
    let mut err_sum = 0.0;
    for (t, truth_state) in trajectory.iter().enumerate() {
        if t > 0 {
            state.step(&frame_at(t)?, &params, scn.sample_period)?;
        }
        let est = estimate(&state, &params);
        let truth = truth_state.pos;
        let err = est.agent.pos.distance(truth);
        err_sum += err;
        rows.push(TrajectoryRow { t, true_x: truth.x, true_y: truth.y, est_x: est.agent.pos.x, est_y: est.agent.pos.y, err });

        for (det, v) in surfaces.iter_mut().zip(&truth_vrps) {
            if det.first_detected.is_none()
                && est.features.iter().any(|f| f.kind == FeatureKind::Vrp && f.mean.distance(*v) < DETECTION_RADIUS)
            {
                det.first_detected = Some(t);
            }
        }

        let map = state.map_estimate(&params);
        let means: Vec<Point2> = map.iter().map(|f| f.mean).collect();
        let mae_cum = err_sum / (t + 1) as f64;
        metrics.push(MetricRow { t, mae_cum, ospa: ospa(&means, &truth_map, OSPA_CUTOFF, OSPA_ORDER) });
        let images = anchor_images(&map, rp);
        metrics_va.push(MetricRow { t, mae_cum, ospa: ospa(&images, &truth_images, OSPA_CUTOFF, OSPA_ORDER) });
        feature_rows.extend(map.iter().map(|f| FeatureRow {
            t,
            pa_index: f.pa_index,
            feature_index: f.feature_index,
            kind: f.kind.as_str(),
            est_x: f.mean.x,
            est_y: f.mean.y,
            existence: f.existence,
            var: f.variance(),
        }));
    }

    let last = metrics.last().expect("at least one slot");
    let summary = RunSummary {
        mode,
        seed,
        steps: trajectory.len(),
        final_mae: last.mae_cum,
        final_ospa: last.ospa,
        ospa_below_2m_at: metrics.iter().find(|m| m.ospa < 2.0).map(|m| m.t),
        surfaces,
        degenerate_slots: state.degenerate_slots.clone(),
        config: cfg,
    };
    Ok(RunResult { summary, trajectory: rows, features: feature_rows, metrics, metrics_va, init_particles })
}

fn write_csv<T: Serialize>(path: &Path, headers: &[&str], rows: &[T]) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    w.write_record(headers).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
    fs::write(path, text + "\n").map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })
}

pub const TRAJECTORY_HEADERS: [&str; 6] = ["t", "true_x", "true_y", "est_x", "est_y", "err"];
pub const FEATURE_HEADERS: [&str; 8] = ["t", "pa_index", "feature_index", "kind", "est_x", "est_y", "existence", "var"];
pub const METRIC_HEADERS: [&str; 3] = ["t", "mae_cum", "ospa"];
pub const AGGREGATE_HEADERS: [&str; 6] = ["t", "mae_cum_mean", "mae_cum_std", "ospa_mean", "ospa_std", "runs"];

/// Write one run's files into `dir`.
pub fn emit_results(run: &RunResult, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_csv(&dir.join("trajectory.csv"), &TRAJECTORY_HEADERS, &run.trajectory)?;
    write_csv(&dir.join("features.csv"), &FEATURE_HEADERS, &run.features)?;
    write_csv(&dir.join("metrics.csv"), &METRIC_HEADERS, &run.metrics)?;
    write_csv(&dir.join("metrics_va.csv"), &METRIC_HEADERS, &run.metrics_va)?;
    write_csv(&dir.join("init_particles.csv"), &["pa_index", "x", "y"], &run.init_particles)?;
    write_json(&dir.join("summary.json"), &run.summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub t: usize,
    pub mae_cum_mean: f64,
    pub mae_cum_std: f64,
    pub ospa_mean: f64,
    pub ospa_std: f64,
    pub runs: usize,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Mean and sample standard deviation across runs for every slot.
pub fn aggregate(runs: &[Vec<MetricRow>]) -> Vec<AggregateRow> {
    let len = runs.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|t| {
            let rows: Vec<&MetricRow> = runs.iter().filter_map(|r| r.get(t)).collect();
            let (mae_cum_mean, mae_cum_std) = mean_std(&rows.iter().map(|r| r.mae_cum).collect::<Vec<_>>());
            let (ospa_mean, ospa_std) = mean_std(&rows.iter().map(|r| r.ospa).collect::<Vec<_>>());
            AggregateRow { t, mae_cum_mean, mae_cum_std, ospa_mean, ospa_std, runs: rows.len() }
        })
        .collect()
}

/// Cross-seed outcome of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub mode: Mode,
    pub seeds: Vec<u64>,
    pub median_final_mae: f64,
    pub median_final_ospa: f64,
    pub median_ospa_below_2m_at: Option<usize>,
    pub runs: Vec<RunSummary>,
}

/// Median of the values, `None` counted as larger than any step.
pub fn median_step(values: &[Option<usize>]) -> Option<usize> {
    let mut v: Vec<usize> = values.iter().map(|x| x.unwrap_or(usize::MAX)).collect();
    v.sort_unstable();
    let m = *v.get(v.len().saturating_sub(1) / 2)?;
    (m != usize::MAX).then_some(m)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Run all seeds (in parallel) and summarize them.
pub fn run_seeds(cfg: &ScenarioConfig, mode: Mode, seeds: &[u64], overrides: &RunOverrides) -> Result<Vec<RunResult>> {
    seeds.par_iter().map(|&s| run_single(cfg, mode, s, overrides)).collect()
}

pub fn summarize(mode: Mode, runs: &[RunResult]) -> ExperimentSummary {
    let finals_mae: Vec<f64> = runs.iter().map(|r| r.summary.final_mae).collect();
    let finals_ospa: Vec<f64> = runs.iter().map(|r| r.summary.final_ospa).collect();
    let below: Vec<Option<usize>> = runs.iter().map(|r| r.summary.ospa_below_2m_at).collect();
    ExperimentSummary {
        mode,
        seeds: runs.iter().map(|r| r.summary.seed).collect(),
        median_final_mae: median(&finals_mae),
        median_final_ospa: median(&finals_ospa),
        median_ospa_below_2m_at: median_step(&below),
        runs: runs.iter().map(|r| r.summary.clone()).collect(),
    }
}

/// Load the config, run every seed and write per-seed and aggregate files under `out_dir`.
pub fn run_experiment(
    config_path: &Path,
    mode: Mode,
    seeds: &[u64],
    out_dir: &Path,
    overrides: &RunOverrides,
) -> Result<ExperimentSummary> {
    if seeds.is_empty() {
        return Err(Error::Empty("seed list"));
    }
    let cfg = ScenarioConfig::load(config_path)?;
    let runs = run_seeds(&cfg, mode, seeds, overrides)?;
    create_dir(out_dir)?;
    for run in &runs {
        emit_results(run, &seed_dir(out_dir, run.summary.seed))?;
    }
    let metrics: Vec<Vec<MetricRow>> = runs.iter().map(|r| r.metrics.clone()).collect();
    write_csv(&out_dir.join("aggregate.csv"), &AGGREGATE_HEADERS, &aggregate(&metrics))?;
    let metrics_va: Vec<Vec<MetricRow>> = runs.iter().map(|r| r.metrics_va.clone()).collect();
    write_csv(&out_dir.join("aggregate_va.csv"), &AGGREGATE_HEADERS, &aggregate(&metrics_va))?;
    let summary = summarize(mode, &runs);
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn seed_dir(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("seed_{seed:04}"))
}
