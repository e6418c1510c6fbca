//! Filter-level properties: reproducibility, particle bookkeeping, clutter
//! rejection and convergence on clean data.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrpslam::active::GaussianVrp;
use vrpslam::config::ScenarioConfig;
use vrpslam::geometry::Point2;
use vrpslam::harness::{initialize_with_priors, run_single, Mode, RunOverrides};
use vrpslam::scenario::{generate_measurements, generate_trajectory, ground_truth_vrps, MeasurementFrame, NoiseModel};
use vrpslam::slam::{
    estimate, initial_agent, FeatureBelief, FeatureKind, SlamParams, SlamState, SurfacePolicy,
};
use vrpslam::SPEED_OF_LIGHT;

fn reproduction() -> ScenarioConfig {
    ScenarioConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reproduction.toml")).unwrap()
}

/// Filter seeded with priors at the true VRPs, driven by frames from `noise`.
struct Bench {
    cfg: ScenarioConfig,
    params: SlamParams,
    state: SlamState,
    noise: NoiseModel,
}

impl Bench {
    fn new(n_particles: usize, noise: NoiseModel, seed: u64) -> Self {
        let cfg = reproduction();
        let scn = cfg.scenario().unwrap();
        let params = SlamParams { n_particles, ..cfg.slam_params() };
        let trajectory = generate_trajectory(&scn).unwrap();
        let rp = scn.reference_point();
        let priors: Vec<GaussianVrp> =
            ground_truth_vrps(&scn).into_iter().map(|v| GaussianVrp::isotropic(v, 0.05)).collect();
        let frame0 = generate_measurements(&scn, &noise, &trajectory, 0, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = initialize_with_priors(rp, scn.pas.len(), &frame0, &priors, &params, &mut rng).unwrap();
        let agent = initial_agent(rp, trajectory[0].vel, &params, &mut rng);
        let state = SlamState::new(rp, agent, features, scn.pas.len(), SurfacePolicy::Adaptive, &params, seed).unwrap();
        Self { cfg, params, state, noise }
    }

    fn run(&mut self, steps: usize, seed: u64, mut check: impl FnMut(&SlamState, usize)) {
        let scn = self.cfg.scenario().unwrap();
        let trajectory = generate_trajectory(&scn).unwrap();
        for t in 1..=steps {
            let frame = generate_measurements(&scn, &self.noise, &trajectory, t, seed ^ (t as u64) << 20).unwrap();
            self.state.step(&frame, &self.params, scn.sample_period).unwrap();
            check(&self.state, t);
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let cfg = reproduction();
    let overrides = RunOverrides { n_particles: Some(300), steps: Some(15) };
    let a = run_single(&cfg, Mode::Hybrid, 11, &overrides).unwrap();
    let b = run_single(&cfg, Mode::Hybrid, 11, &overrides).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.features, b.features);
    assert_eq!(a.summary, b.summary);
}

#[test]
fn particle_counts_and_existence_stay_valid() {
    let cfg = reproduction();
    let n = 400;
    let mut bench = Bench::new(n, cfg.noise, 5);
    bench.run(40, 5, |state, t| {
        assert_eq!(state.agent.len(), n, "agent particles at slot {t}");
        assert!((state.agent.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for f in &state.features {
            assert_eq!(f.particles.len(), n, "feature {} particles at slot {t}", f.id);
            assert!(f.weight_sum_error() < 1e-9);
            assert!((0.0..=1.0).contains(&f.existence), "existence {} at slot {t}", f.existence);
        }
        // Anchors are never dropped.
        assert_eq!(state.features.iter().filter(|f| f.kind == FeatureKind::Pa).count(), 2);
    });
}

#[test]
fn clutter_alone_detects_nothing() {
    let params = SlamParams { n_particles: 300, mu_new: 1e-4, ..SlamParams::default() };
    let rp = Point2::new(10.0, 15.0);
    let pas = [Point2::new(30.0, 30.0), Point2::new(55.0, 35.0)];
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features: Vec<FeatureBelief> = pas
            .iter()
            .enumerate()
            .map(|(k, &pa)| FeatureBelief::new(0, FeatureKind::Pa, k, vec![pa; params.n_particles], 0.999))
            .collect();
        let agent = initial_agent(rp, Point2::new(0.5, 0.0), &params, &mut rng);
        let mut state = SlamState::new(rp, agent, features, pas.len(), SurfacePolicy::Adaptive, &params, seed).unwrap();
        let per_pa = (0..pas.len())
            .map(|_| (0..rng.random_range(1..=3)).map(|_| rng.random_range(1.0..360.0) / SPEED_OF_LIGHT).collect())
            .collect();
        state.step(&MeasurementFrame { t: 1, per_pa }, &params, 1.0).unwrap();
        let est = estimate(&state, &params);
        assert!(
            est.features.iter().all(|f| f.kind == FeatureKind::Pa),
            "seed {seed}: clutter produced a detected surface"
        );
    }
}

#[test]
fn converges_on_clean_measurements() {
    let clean = NoiseModel { toa_sigma: 1e-9, p_detect: 1.0, mu_false: 0.0, roi_radius: 180.0 };
    let mut bench = Bench::new(1000, clean, 9);
    let scn = bench.cfg.scenario().unwrap();
    let trajectory = generate_trajectory(&scn).unwrap();
    let mut worst: f64 = 0.0;
    bench.run(60, 9, |state, t| {
        worst = worst.max(state.agent.mean().pos.distance(trajectory[t].pos));
    });
    assert!(worst < 0.5, "agent error reached {worst} m");
    for f in bench.state.features.iter().filter(|f| f.kind == FeatureKind::Pa) {
        let err = f.mean().distance(scn.pas[f.pa_index]);
        assert!(err < 0.5, "anchor {} off by {err} m", f.pa_index);
    }
}
