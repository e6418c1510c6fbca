//! Loopy sum-product data association under the one-to-one constraint.

use super::types::AssociationMarginals;

/// Iterate feature/measurement messages until they settle.
///
/// `weights[i]` holds `[w_i(0), w_i(1), .., w_i(M)]`: the evidence for legacy
/// feature `i` being missed (index 0) or producing measurement `j`.
/// `new_weights[j]` is the evidence for measurement `j` being clutter or a new feature.
pub fn loopy_data_association(
    weights: &[Vec<f64>],
    new_weights: &[f64],
    max_iterations: usize,
    tolerance: f64,
) -> AssociationMarginals {
    let k = weights.len();
    let m = new_weights.len();
    debug_assert!(weights.iter().all(|w| w.len() == m + 1));

    let mut to_feature = vec![vec![1.0; m]; k];
    let mut to_measurement = vec![vec![0.0; m]; k];
    let mut iterations = 0;
    while iterations < max_iterations.max(1) {
        iterations += 1;
        let mut change: f64 = 0.0;
        for i in 0..k {
            let w = &weights[i];
            let total: f64 = w[0] + (0..m).map(|j| w[j + 1] * to_feature[i][j]).sum::<f64>();
            for j in 0..m {
                let denom = total - w[j + 1] * to_feature[i][j];
                let nu = if w[j + 1] > 0.0 { w[j + 1] / denom.max(f64::MIN_POSITIVE) } else { 0.0 };
                change = change.max((nu - to_measurement[i][j]).abs() / nu.max(1.0));
                to_measurement[i][j] = nu;
            }
        }
        for j in 0..m {
            let total: f64 = new_weights[j] + (0..k).map(|i| to_measurement[i][j]).sum::<f64>();
            for i in 0..k {
                let denom = total - to_measurement[i][j];
                to_feature[i][j] = 1.0 / denom.max(f64::MIN_POSITIVE);
            }
        }
        if iterations > 1 && change < tolerance {
            break;
        }
    }

    let feature = (0..k)
        .map(|i| {
            let w = &weights[i];
            let mut row: Vec<f64> = std::iter::once(w[0]).chain((0..m).map(|j| w[j + 1] * to_feature[i][j])).collect();
            normalize(&mut row);
            row
        })
        .collect();
    let measurement = (0..m)
        .map(|j| {
            let mut row: Vec<f64> = std::iter::once(new_weights[j]).chain((0..k).map(|i| to_measurement[i][j])).collect();
            normalize(&mut row);
            row
        })
        .collect();
    AssociationMarginals { feature, measurement, to_feature, to_measurement, iterations }
}

fn normalize(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        row.iter_mut().for_each(|x| *x /= sum);
    } else {
        row.iter_mut().for_each(|x| *x = 0.0);
        row[0] = 1.0;
    }
}
