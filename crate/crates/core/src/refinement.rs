//! Feature identity across time and anchors, keeping the sharper belief.

use crate::geometry::Point2;
use crate::slam::{FeatureBelief, FeatureKind};

/// Distance between two feature means.
pub fn similarity(a: Point2, b: Point2) -> f64 {
    a.distance(b)
}

fn compatible(a: &FeatureBelief, b: &FeatureBelief) -> bool {
    a.kind == b.kind && (a.kind == FeatureKind::Vrp || a.pa_index == b.pa_index)
}

/// Greedy closest-first matching of `legacy` to `current` under `sim_threshold`.
///
/// Returns `(legacy index, current index)` pairs; each feature is used at most once.
pub fn match_features(legacy: &[FeatureBelief], current: &[FeatureBelief], sim_threshold: f64) -> Vec<(usize, usize)> {
    let lm: Vec<Point2> = legacy.iter().map(FeatureBelief::mean).collect();
    let cm: Vec<Point2> = current.iter().map(FeatureBelief::mean).collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, l) in legacy.iter().enumerate() {
        for (j, c) in current.iter().enumerate() {
            let d = similarity(lm[i], cm[j]);
            if d < sim_threshold && compatible(l, c) {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_l = vec![false; legacy.len()];
    let mut used_c = vec![false; current.len()];
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !used_l[i] && !used_c[j] {
            used_l[i] = true;
            used_c[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// Merge two feature lists: matched pairs keep the lower-variance belief, the rest pass through.
///
/// Output order: matched and unmatched legacy features in legacy order, then unmatched current ones.
pub fn refine(legacy: &[FeatureBelief], current: &[FeatureBelief], sim_threshold: f64) -> Vec<FeatureBelief> {
    let matches = match_features(legacy, current, sim_threshold);
    let mut partner = vec![None; legacy.len()];
    let mut taken = vec![false; current.len()];
    for &(i, j) in &matches {
        partner[i] = Some(j);
        taken[j] = true;
    }
    let mut out = Vec::with_capacity(legacy.len() + current.len() - matches.len());
    for (i, l) in legacy.iter().enumerate() {
        match partner[i] {
            Some(j) if current[j].variance() < l.variance() => out.push(current[j].clone()),
            _ => out.push(l.clone()),
        }
    }
    out.extend(current.iter().zip(&taken).filter(|(_, &t)| !t).map(|(c, _)| c.clone()));
    out
}
