//! Fixtures shared by the benchmarks.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vrpslam::active::{vrp_priors_from_scan, ScanGrouping};
use vrpslam::config::ScenarioConfig;
use vrpslam::harness::initialize_with_priors;
use vrpslam::scenario::{generate_active_scan, generate_measurements, generate_trajectory, MeasurementFrame};
use vrpslam::slam::{initial_agent, SlamParams, SlamState, SurfacePolicy};

pub fn reproduction_config() -> ScenarioConfig {
    ScenarioConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reproduction.toml"))
        .expect("reproduction config")
}

/// Hybrid filter at slot 0 with `n_particles`, plus the next `frames` passive frames.
pub fn hybrid_filter(n_particles: usize, frames: usize, seed: u64) -> (SlamState, SlamParams, Vec<MeasurementFrame>) {
    let cfg = reproduction_config();
    let scn = cfg.scenario().unwrap();
    let params = SlamParams { n_particles, ..cfg.slam_params() };
    let traj = generate_trajectory(&scn).unwrap();
    let rp = scn.reference_point();
    let frame = |t: usize| generate_measurements(&scn, &cfg.noise, &traj, t, seed + t as u64).unwrap();
    let rsps = generate_active_scan(&scn, &cfg.signal, rp, cfg.n_beams, seed, params.roi_radius).unwrap();
    let priors = vrp_priors_from_scan(rp, &rsps, &ScanGrouping::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = initialize_with_priors(rp, scn.pas.len(), &frame(0), &priors, &params, &mut rng).unwrap();
    let agent = initial_agent(rp, traj[0].vel, &params, &mut rng);
    let state = SlamState::new(rp, agent, features, scn.pas.len(), SurfacePolicy::Adaptive, &params, seed).unwrap();
    (state, params, (1..=frames).map(frame).collect())
}
