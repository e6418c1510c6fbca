//! Measurement model and the per-feature factors of the association graph.

use std::f64::consts::PI;

use crate::geometry::Point2;
use crate::SPEED_OF_LIGHT;

use super::types::{AgentState, FeatureKind, SlamParams};

/// Gaussian density of a range residual.
#[inline]
pub fn range_density(residual: f64, sigma: f64) -> f64 {
    (-0.5 * (residual / sigma).powi(2)).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// Density of TOA `z` (seconds) for an agent and the point that acts as its transmitter.
pub fn toa_likelihood(z: f64, agent: &AgentState, source: Point2, toa_sigma: f64) -> f64 {
    range_density(SPEED_OF_LIGHT * z - agent.pos.distance(source), toa_sigma)
}

/// Mirror `pa` across the surface encoded by `(rp, vrp)`: the anchor's image.
///
/// Unchecked variant of the geometry routine for the inner particle loops;
/// callers guarantee `vrp != rp`.
#[inline]
pub fn image_of(pa: Point2, rp: Point2, vrp: Point2) -> Point2 {
    let n = vrp - rp;
    let nn = n.norm_squared();
    let mid = rp.midpoint(vrp);
    pa - n * (2.0 * (pa - mid).dot(n) / nn)
}

/// Point whose range from the agent a feature predicts: the anchor itself, or
/// for a surface, the anchor's image through it.
#[inline]
pub fn apparent_source(kind: FeatureKind, feature: Point2, pa: Point2, rp: Point2) -> Point2 {
    match kind {
        FeatureKind::Pa => feature,
        FeatureKind::Vrp => image_of(pa, rp, feature),
    }
}

/// Factor linking a legacy feature to the association variable `a`.
///
/// `a = 0` means the feature produced no measurement; `a = j` means it produced
/// `ranges[j - 1]`. A nonexistent feature contributes a constant 1; the
/// association constraint keeps it from claiming a measurement.
pub fn g_factor(
    agent: &AgentState,
    source: Point2,
    exists: bool,
    a: usize,
    toas: &[f64],
    params: &SlamParams,
) -> f64 {
    if !exists {
        return 1.0;
    }
    if a == 0 {
        return 1.0 - params.p_detect;
    }
    let l = toa_likelihood(toas[a - 1], agent, source, params.toa_sigma);
    l * params.p_detect / (params.mu_false * params.false_density())
}

/// Factor of a potential new feature attached to measurement `toa`.
///
/// `new_density` is the birth proposal density evaluated at the hypothesized feature.
pub fn h_factor(
    agent: &AgentState,
    source: Point2,
    exists: bool,
    b: usize,
    toa: f64,
    new_density: f64,
    params: &SlamParams,
) -> f64 {
    if !exists {
        return 1.0;
    }
    if b != 0 {
        return 0.0;
    }
    let l = toa_likelihood(toa, agent, source, params.toa_sigma);
    params.mu_new * new_density * l / (params.mu_false * params.false_density())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{va_from_pa, SurfaceFrame};

    fn agent_at(x: f64, y: f64) -> AgentState {
        AgentState { pos: Point2::new(x, y), vel: Point2::ORIGIN }
    }

    #[test]
    fn likelihood_shape() {
        let a = agent_at(0.0, 0.0);
        let src = Point2::new(30.0, 40.0);
        let sigma = 0.1;
        let peak = toa_likelihood(50.0 / SPEED_OF_LIGHT, &a, src, sigma);
        assert!((peak - 1.0 / ((2.0 * PI).sqrt() * sigma)).abs() < 1e-9);
        let off = toa_likelihood(50.3 / SPEED_OF_LIGHT, &a, src, sigma);
        assert!((off / peak - (-4.5f64).exp()).abs() < 1e-6);
        let under = toa_likelihood(49.7 / SPEED_OF_LIGHT, &a, src, sigma);
        assert!((off - under).abs() / off < 1e-6);
    }

    #[test]
    fn image_matches_geometry() {
        let rp = Point2::new(10.0, 15.0);
        let vrp = Point2::new(10.0, 65.0);
        let pa = Point2::new(30.0, 30.0);
        let frame = SurfaceFrame::new(rp, vrp).unwrap();
        assert!(image_of(pa, rp, vrp).distance(va_from_pa(&frame, pa).unwrap()) < 1e-12);
    }

    #[test]
    fn factor_branches() {
        let p = SlamParams::default();
        let a = agent_at(0.0, 0.0);
        let src = Point2::new(10.0, 0.0);
        let z = [10.0 / SPEED_OF_LIGHT];
        assert_eq!(g_factor(&a, src, false, 1, &z, &p), 1.0);
        let certain = SlamParams { p_detect: 1.0, ..p };
        assert_eq!(g_factor(&a, src, true, 0, &z, &certain), 0.0);
        let want = p.p_detect / (p.mu_false * p.false_density() * (2.0 * PI).sqrt() * p.toa_sigma);
        assert!((g_factor(&a, src, true, 1, &z, &p) - want).abs() / want < 1e-9);
        assert_eq!(h_factor(&a, src, true, 3, z[0], 1.0, &p), 0.0);
        assert_eq!(h_factor(&a, src, false, 0, z[0], 1.0, &p), h_factor(&a, src, false, 0, 5.0, 1.0, &p));
        let barren = SlamParams { mu_new: 0.0, ..p };
        assert_eq!(h_factor(&a, src, true, 0, z[0], 1.0, &barren), 0.0);
    }
}
