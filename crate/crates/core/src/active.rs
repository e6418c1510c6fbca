//! Active sensing: the OFDM echo model, distance bounds and estimation, and
//! propagation of distance uncertainty into Gaussian VRP estimates.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix4x2, Vector4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{vrp_closed_form_terms, Point2};
use crate::SPEED_OF_LIGHT;

/// OFDM sensing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalConfig {
    pub carrier_freq: f64,
    pub subcarrier_spacing: f64,
    pub num_subcarriers: usize,
    pub noise_var: f64,
    pub rcs_gamma: f64,
    pub rcs_eta: f64,
}

impl SignalConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_freq", self.carrier_freq),
            ("subcarrier_spacing", self.subcarrier_spacing),
            ("noise_var", self.noise_var),
            ("rcs_gamma", self.rcs_gamma),
            ("rcs_eta", self.rcs_eta),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("signal.{name} must be positive, got {v}")));
            }
        }
        if self.num_subcarriers < 2 {
            return Err(Error::InvalidParameter("signal.num_subcarriers must be at least 2".into()));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    pub fn bandwidth(&self) -> f64 {
        self.num_subcarriers as f64 * self.subcarrier_spacing
    }

    /// Squared echo amplitude factor `lambda^2 * rcs / (4 pi)^3`.
    pub fn amplitude_sq(&self, rcs: f64) -> f64 {
        let lambda = self.wavelength();
        lambda * lambda * rcs / (4.0 * PI).powi(3)
    }

    /// Noise variance that yields `snr_db` at distance `d` for the given RCS.
    pub fn noise_var_for_snr(&self, d: f64, rcs: f64, snr_db: f64) -> f64 {
        self.amplitude_sq(rcs) / d.powi(4) / 10f64.powf(snr_db / 10.0)
    }

    /// Phase slope of subcarrier `n` per meter of target distance.
    fn phase_rate(&self, n: usize) -> f64 {
        let offset = n as f64 - self.num_subcarriers as f64 / 2.0;
        2.0 * PI * offset * self.subcarrier_spacing * 2.0 / SPEED_OF_LIGHT
    }
}

/// One reflection sample point from a beam sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rsp {
    /// Beam angle (radians).
    pub phi: f64,
    pub d_mean: f64,
    pub d_var: f64,
}

impl Rsp {
    pub fn position(&self, agent: Point2) -> Point2 {
        agent + Point2::from_polar(self.d_mean, self.phi)
    }

    /// Per-axis variances under the diagonal radial-to-axis mapping.
    fn axis_vars(&self) -> (f64, f64) {
        let (s, c) = self.phi.sin_cos();
        (self.d_var * c * c, self.d_var * s * s)
    }
}

/// A VRP estimate with Gaussian uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianVrp {
    pub mean: Point2,
    pub cov: Matrix2<f64>,
}

impl GaussianVrp {
    pub fn isotropic(mean: Point2, var: f64) -> Self {
        Self { mean, cov: Matrix2::identity() * var }
    }

    /// Draw a sample. Indefinite directions (tiny negative eigenvalues) are
    /// clamped to zero spread.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        let c = &self.cov;
        let l11 = c[(0, 0)].max(0.0).sqrt();
        let l21 = if l11 > 0.0 { c[(1, 0)] / l11 } else { 0.0 };
        let l22 = (c[(1, 1)] - l21 * l21).max(0.0).sqrt();
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        Point2::new(self.mean.x + l11 * z1, self.mean.y + l21 * z1 + l22 * z2)
    }

    pub fn trace(&self) -> f64 {
        self.cov.trace()
    }
}

fn check_distance(d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveDistance(d))
    }
}

/// Per-subcarrier reflection gain of a point reflector at distance `d`.
pub fn reflection_gain(cfg: &SignalConfig, d: f64, rcs: f64, n: usize) -> Result<Complex64> {
    check_distance(d)?;
    if n == 0 || n > cfg.num_subcarriers {
        return Err(Error::SubcarrierIndex { index: n, count: cfg.num_subcarriers });
    }
    let amp = cfg.amplitude_sq(rcs).sqrt() / (d * d);
    Ok(Complex64::from_polar(amp, -cfg.phase_rate(n) * d))
}

/// Radar cross section at incidence angle `psi` from the surface normal.
pub fn rcs_of_incidence(cfg: &SignalConfig, psi: f64) -> Result<f64> {
    if !(psi.abs() < PI / 2.0) {
        return Err(Error::GrazingIncidence(psi.abs()));
    }
    Ok(cfg.rcs_gamma * psi.cos().powf(2.0 * cfg.rcs_eta))
}

/// Noisy echo across all subcarriers; deterministic for a given seed.
pub fn simulate_echo(cfg: &SignalConfig, d: f64, rcs: f64, seed: u64) -> Result<Vec<Complex64>> {
    check_distance(d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = (cfg.noise_var / 2.0).sqrt();
    (1..=cfg.num_subcarriers)
        .map(|n| {
            let g = reflection_gain(cfg, d, rcs, n)?;
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Ok(g + Complex64::new(re * sd, im * sd))
        })
        .collect()
}

/// Per-subcarrier signal-to-noise ratio (linear).
pub fn snr(cfg: &SignalConfig, d: f64, rcs: f64) -> Result<f64> {
    check_distance(d)?;
    Ok(cfg.amplitude_sq(rcs) / (d.powi(4) * cfg.noise_var))
}

/// Large-`N_s` lower bound on the distance variance (m^2).
pub fn distance_crlb(cfg: &SignalConfig, d: f64, rcs: f64) -> Result<f64> {
    let snr = snr(cfg, d, rcs)?;
    let b = cfg.bandwidth();
    let c = SPEED_OF_LIGHT;
    Ok(1.0 / (8.0 * PI * PI * b * b * cfg.num_subcarriers as f64 / (3.0 * c * c) * snr))
}

/// Fisher information on distance, summed exactly over subcarriers (1/m^2).
pub fn exact_fisher_info(cfg: &SignalConfig, d: f64, rcs: f64) -> Result<f64> {
    check_distance(d)?;
    let b2 = cfg.amplitude_sq(rcs);
    let scale = 2.0 / cfg.noise_var * b2 / d.powi(4);
    let sum: f64 = (1..=cfg.num_subcarriers)
        .map(|n| {
            let w = cfg.phase_rate(n);
            4.0 / (d * d) + w * w
        })
        .sum();
    Ok(scale * sum)
}

/// Periodogram distance estimator with a cached FFT plan.
///
/// The coarse search evaluates the matched-filter output on a grid of
/// spacing `c / (4B)` over the unambiguous range `c / (2 delta_f)`, which is
/// exactly a zero-padded inverse DFT of length `2 N_s`.
///
/// The peak search can be limited to a maximum range (the sensing range);
/// the noise floor is always taken over the full grid.
pub struct DistanceEstimator {
    cfg: SignalConfig,
    fft: Arc<dyn Fft<f64>>,
    rates: Vec<f64>,
    max_bin: usize,
}

const NEWTON_TOL: f64 = 1e-6;
const NEWTON_MAX_ITERS: usize = 20;
const PEAK_TO_FLOOR: f64 = 3.0;

impl DistanceEstimator {
    pub fn new(cfg: &SignalConfig) -> Self {
        let fft = FftPlanner::new().plan_fft_inverse(2 * cfg.num_subcarriers);
        let rates = (1..=cfg.num_subcarriers).map(|n| cfg.phase_rate(n)).collect();
        Self { cfg: *cfg, fft, rates, max_bin: 2 * cfg.num_subcarriers }
    }

    /// Restrict the peak search to distances up to `max_range` meters.
    pub fn with_max_range(mut self, max_range: f64) -> Self {
        let bins = (max_range / self.grid_step()).ceil() as usize + 2;
        self.max_bin = bins.clamp(2, 2 * self.cfg.num_subcarriers);
        self
    }

    /// Largest distance the grid can represent without aliasing.
    pub fn unambiguous_range(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.cfg.subcarrier_spacing)
    }

    pub fn grid_step(&self) -> f64 {
        SPEED_OF_LIGHT / (4.0 * self.cfg.bandwidth())
    }

    /// Returns `(d_hat, d_var)` where `d_var` is the bound at `d_hat`.
    pub fn estimate(&self, echo: &[Complex64], rcs: f64) -> Result<(f64, f64)> {
        let ns = self.cfg.num_subcarriers;
        if echo.len() != ns {
            return Err(Error::EchoLength { got: echo.len(), expected: ns });
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * ns];
        buf[..ns].copy_from_slice(echo);
        self.fft.process(&mut buf);
        let power: Vec<f64> = buf.iter().map(|z| z.norm_sqr()).collect();

        let (k_best, &peak) = power[..self.max_bin]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid is nonempty");
        let mut sorted = power.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        if !(peak > PEAK_TO_FLOOR * median) {
            return Err(Error::NoPeak { ratio: peak / median });
        }

        let step = self.grid_step();
        let span = 2 * ns;
        // Parabolic interpolation on the log-free power around the grid peak.
        let left = power[(k_best + span - 1) % span];
        let right = power[(k_best + 1) % span];
        let denom = left - 2.0 * peak + right;
        let frac = if denom < 0.0 { (0.5 * (left - right) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        let mut d = (k_best as f64 + frac) * step;

        for _ in 0..NEWTON_MAX_ITERS {
            let (_, d1, d2) = self.objective_derivs(echo, d);
            let delta = if d2 < 0.0 { -d1 / d2 } else { d1.signum() * step * 0.25 };
            let delta = delta.clamp(-0.5 * step, 0.5 * step);
            d += delta;
            if delta.abs() < NEWTON_TOL {
                break;
            }
        }
        if !(d > 0.0) {
            return Err(Error::NonPositiveDistance(d));
        }
        let var = distance_crlb(&self.cfg, d, rcs)?;
        Ok((d, var))
    }

    /// Matched-filter objective `|S(d)|^2` and its first two derivatives.
    pub fn objective_derivs(&self, echo: &[Complex64], d: f64) -> (f64, f64, f64) {
        let mut s = Complex64::new(0.0, 0.0);
        let mut s1 = Complex64::new(0.0, 0.0);
        let mut s2 = Complex64::new(0.0, 0.0);
        for (r, &w) in echo.iter().zip(&self.rates) {
            let term = r * Complex64::from_polar(1.0, w * d);
            s += term;
            s1 += term * Complex64::new(0.0, w);
            s2 -= term * (w * w);
        }
        let j = s.norm_sqr();
        let j1 = 2.0 * (s.conj() * s1).re;
        let j2 = 2.0 * (s1.norm_sqr() + (s.conj() * s2).re);
        (j, j1, j2)
    }
}

/// One-shot distance estimate; see [`DistanceEstimator`] for repeated use.
pub fn estimate_distance(echo: &[Complex64], cfg: &SignalConfig, rcs: f64) -> Result<(f64, f64)> {
    DistanceEstimator::new(cfg).estimate(echo, rcs)
}

/// Gradient of the closed-form VRP with respect to `(x1, x2, y1, y2)`.
///
/// Row `i` holds the derivatives of the VRP's x and y coordinates.
pub fn vrp_jacobian(rp: Point2, p1: Point2, p2: Point2) -> Result<Matrix4x2<f64>> {
    let (a0, b0, c0) = vrp_closed_form_terms(rp, p1, p2);
    if b0 < 1e-12 {
        return Err(Error::Degenerate("coincident reflection sample points"));
    }
    let (xr, yr) = (rp.x, rp.y);
    let dx = p2.x - p1.x;
    let dy = p2.y - p1.y;
    let ey = yr - p1.y;
    let ex = xr - p1.x;

    let a = Vector4::new(
        -2.0 * xr * dx + 2.0 * dy * dy - 2.0 * ey * dy,
        2.0 * xr * dx + 2.0 * ey * dy,
        2.0 * (xr - 2.0 * p1.x) * dy + 2.0 * dx * (-p2.y - yr + 2.0 * p1.y),
        -2.0 * (xr - 2.0 * p1.x) * dy + 2.0 * ey * dx,
    );
    let b = Vector4::new(-2.0 * dx, 2.0 * dx, -2.0 * dy, 2.0 * dy);
    let c = Vector4::new(
        2.0 * (yr - 2.0 * p1.y) * dx + 2.0 * dy * (-p2.x - xr + 2.0 * p1.x),
        -2.0 * (yr - 2.0 * p1.y) * dx + 2.0 * ex * dy,
        -2.0 * yr * dy + 2.0 * dx * dx - 2.0 * ex * dx,
        2.0 * yr * dy + 2.0 * ex * dx,
    );

    let b0sq = b0 * b0;
    let mut q = Matrix4x2::zeros();
    for i in 0..4 {
        q[(i, 0)] = (a[i] * b0 - a0 * b[i]) / b0sq;
        q[(i, 1)] = (c[i] * b0 - c0 * b[i]) / b0sq;
    }
    Ok(q)
}

/// First-order Gaussian VRP from two RSPs measured at `rp`.
pub fn taylor_vrp_pair(rp: Point2, rsp1: &Rsp, rsp2: &Rsp) -> Result<GaussianVrp> {
    let p1 = rsp1.position(rp);
    let p2 = rsp2.position(rp);
    let (a0, b0, c0) = vrp_closed_form_terms(rp, p1, p2);
    if b0 < 1e-12 {
        return Err(Error::Degenerate("coincident reflection sample points"));
    }
    let q = vrp_jacobian(rp, p1, p2)?;
    let (vx1, vy1) = rsp1.axis_vars();
    let (vx2, vy2) = rsp2.axis_vars();
    let w = Vector4::new(vx1, vx2, vy1, vy2);
    let mut cov = Matrix2::zeros();
    for i in 0..4 {
        let row = q.row(i);
        cov += row.transpose() * row * w[i];
    }
    cov = (cov + cov.transpose()) * 0.5;
    Ok(GaussianVrp { mean: Point2::new(a0 / b0, c0 / b0), cov })
}

/// Combine pairwise solutions `(1, m)`: average the means and scale the
/// summed covariance by `1 / (M - 1)^2`.
pub fn fuse_vrp_solutions(solutions: &[GaussianVrp]) -> Result<GaussianVrp> {
    if solutions.is_empty() {
        return Err(Error::Empty("no VRP solutions to fuse"));
    }
    let k = solutions.len() as f64;
    let mean = solutions.iter().fold(Point2::ORIGIN, |acc, s| acc + s.mean) / k;
    let cov = solutions.iter().fold(Matrix2::zeros(), |acc, s| acc + s.cov) / (k * k);
    Ok(GaussianVrp { mean, cov })
}

/// Tuning for grouping a beam sweep into per-wall RSP runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrouping {
    /// Minimum RSPs per wall.
    pub min_points: usize,
    /// Collinearity gate in units of the RSP distance standard deviation.
    pub sigma_gate: f64,
    /// Additive collinearity tolerance (m).
    pub floor: f64,
}

impl Default for ScanGrouping {
    fn default() -> Self {
        Self { min_points: 3, sigma_gate: 4.0, floor: 0.05 }
    }
}

/// Total-least-squares line through `pts`: returns `(centroid, unit direction)`.
fn fit_line(pts: &[Point2]) -> (Point2, Point2) {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Point2::ORIGIN, |a, &p| a + p) / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let d = *p - c;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    (c, Point2::from_polar(1.0, theta))
}

fn line_residual(p: Point2, c: Point2, dir: Point2) -> f64 {
    (p - c).cross(dir).abs()
}

/// Group a beam-ordered sweep into runs of collinear RSPs, fuse one Gaussian
/// VRP per run, and return them.
///
/// Runs are found by recursive splitting at the point farthest from the
/// chord, then adjacent runs (including across the angular wrap) are merged
/// when their union is still collinear. Within a run the first RSP is paired
/// with each RSP in the far half of the run, so every pair has a baseline of
/// at least half the run length.
pub fn vrp_priors_from_scan(rp: Point2, rsps: &[Rsp], opts: &ScanGrouping) -> Vec<GaussianVrp> {
    let mut order: Vec<usize> = (0..rsps.len()).collect();
    order.sort_by(|&a, &b| rsps[a].phi.rem_euclid(2.0 * PI).total_cmp(&rsps[b].phi.rem_euclid(2.0 * PI)));
    let n = order.len();
    if n < opts.min_points {
        return Vec::new();
    }
    let pts: Vec<Point2> = order.iter().map(|&i| rsps[i].position(rp)).collect();
    let tol: Vec<f64> = order
        .iter()
        .map(|&i| opts.sigma_gate * rsps[i].d_var.sqrt() + opts.floor)
        .collect();

    // Start the linear sequence after the largest jump between neighbours.
    let start = (0..n)
        .max_by(|&a, &b| {
            let ja = pts[a].distance(pts[(a + 1) % n]);
            let jb = pts[b].distance(pts[(b + 1) % n]);
            ja.total_cmp(&jb)
        })
        .map(|i| (i + 1) % n)
        .unwrap_or(0);
    let seq: Vec<usize> = (0..n).map(|k| (start + k) % n).collect();

    let mut runs: Vec<Vec<usize>> = Vec::new();
    split_runs(&seq, &pts, &tol, &mut runs);

    let collinear = |idx: &[usize]| -> bool {
        if idx.len() < 3 {
            return true;
        }
        let sample: Vec<Point2> = idx.iter().map(|&i| pts[i]).collect();
        let (c, dir) = fit_line(&sample);
        idx.iter().all(|&i| line_residual(pts[i], c, dir) <= tol[i])
    };

    // Merge neighbours whose union stays collinear.
    let mut merged: Vec<Vec<usize>> = Vec::new();
    for run in runs {
        if let Some(last) = merged.last_mut() {
            let mut union = last.clone();
            union.extend(run.iter().copied().filter(|i| !last.contains(i)));
            if collinear(&union) {
                *last = union;
                continue;
            }
        }
        merged.push(run);
    }
    if merged.len() > 1 {
        let mut union = merged[merged.len() - 1].clone();
        let extra: Vec<usize> = merged[0].iter().copied().filter(|i| !union.contains(i)).collect();
        union.extend(extra);
        if collinear(&union) {
            merged.pop();
            merged[0] = union;
        }
    }

    let mut out = Vec::new();
    for run in merged {
        // Drop points that do not sit on the run's own line (corner hits).
        let mut members = run.clone();
        if members.len() >= 4 {
            let sample: Vec<Point2> = members.iter().map(|&i| pts[i]).collect();
            let (c, dir) = fit_line(&sample);
            members.retain(|&i| line_residual(pts[i], c, dir) <= tol[i]);
        }
        if members.len() < opts.min_points {
            continue;
        }
        let first = &rsps[order[members[0]]];
        let half = members.len() / 2;
        let pairs: Vec<GaussianVrp> = members[half.max(1)..]
            .iter()
            .filter_map(|&m| taylor_vrp_pair(rp, first, &rsps[order[m]]).ok())
            .collect();
        if let Ok(v) = fuse_vrp_solutions(&pairs) {
            out.push(v);
        }
    }
    out
}

fn split_runs(seq: &[usize], pts: &[Point2], tol: &[f64], out: &mut Vec<Vec<usize>>) {
    if seq.len() <= 2 {
        out.push(seq.to_vec());
        return;
    }
    let a = pts[seq[0]];
    let b = pts[seq[seq.len() - 1]];
    let chord = b - a;
    let len = chord.norm();
    let mut worst = None;
    let mut worst_excess = 0.0;
    for (k, &i) in seq.iter().enumerate().take(seq.len() - 1).skip(1) {
        let dist = if len > 0.0 { (pts[i] - a).cross(chord).abs() / len } else { pts[i].distance(a) };
        let excess = dist - tol[i];
        if excess > worst_excess {
            worst_excess = excess;
            worst = Some(k);
        }
    }
    match worst {
        None => out.push(seq.to_vec()),
        Some(k) => {
            split_runs(&seq[..=k], pts, tol, out);
            let mut tail: Vec<Vec<usize>> = Vec::new();
            split_runs(&seq[k..], pts, tol, &mut tail);
            // The split point was assigned to the left run; drop it from the right.
            if let Some(first) = tail.first_mut() {
                first.remove(0);
                if first.is_empty() {
                    tail.remove(0);
                }
            }
            out.extend(tail);
        }
    }
}
