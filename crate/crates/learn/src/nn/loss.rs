//! Reconstruction and classification losses with their gradients.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use qtomo_core::{ComplexMatrix, Error, Result};

pub const PROB_CLAMP: f64 = 1e-12;
const DIST_TOL: f64 = 1e-6;

/// (1/N_b) Σ_i ‖ρ_i − ρ̂_i‖_F over complex matrices.
pub fn reconstruction_loss(pairs: &[(&ComplexMatrix, &ComplexMatrix)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::ShapeMismatch("empty batch".into()));
    }
    let mut total = 0.0;
    for (truth, pred) in pairs {
        if truth.shape() != pred.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} target vs {:?} prediction",
                truth.shape(),
                pred.shape()
            )));
        }
        total += (*truth - *pred).frobenius_norm();
    }
    Ok(total / pairs.len() as f64)
}

/// Row-wise `scale·‖pred_i − target_i‖₂` averaged over rows, and its
/// gradient w.r.t. `pred`. The gradient at a zero difference is zero.
pub fn row_norm_loss(
    pred: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    scale: f64,
) -> (f64, Array2<f64>) {
    assert_eq!(pred.dim(), target.dim());
    let n = pred.nrows() as f64;
    let mut grad = &pred - &target;
    let mut total = 0.0;
    for mut row in grad.axis_iter_mut(Axis(0)) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        total += norm;
        if norm > 0.0 {
            row.mapv_inplace(|v| scale * v / (norm * n));
        } else {
            row.fill(0.0);
        }
    }
    (scale * total / n, grad)
}

/// Per-row losses `scale·‖pred_i − target_i‖₂` without gradients.
pub fn row_norms(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>, scale: f64) -> Vec<f64> {
    let mut out = vec![0.0; pred.nrows()];
    Zip::from(&mut out)
        .and(pred.rows())
        .and(target.rows())
        .for_each(|o, p, t| {
            *o = scale
                * p.iter()
                    .zip(t)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
        });
    out
}

/// −log p[target] with p clamped below at 1e-12.
pub fn cross_entropy(p: &[f64], target: usize) -> Result<f64> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > DIST_TOL {
        return Err(Error::InvalidDistribution(format!(
            "entries must be nonnegative and sum to 1 (sum {sum})"
        )));
    }
    let pt = *p.get(target).ok_or_else(|| {
        Error::InvalidDistribution(format!("target {target} outside {} classes", p.len()))
    })?;
    Ok(-pt.max(PROB_CLAMP).ln())
}

/// Softmax over the entries with `mask[k] == false`; masked entries get
/// probability 0. Returns `None` when everything is masked.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Option<Vec<f64>> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| !m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let mut p: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { 0.0 } else { (l - max).exp() })
        .collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    Some(p)
}
