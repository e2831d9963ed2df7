//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::Rng;

use super::weights::ModelWeights;

#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    pub step: f64,
    /// Number of parameter coordinates sampled (all of them if the model is smaller).
    pub samples: usize,
    /// Denominator floor: central differences carry ~1e-10 absolute error, so
    /// gradients below the floor are compared absolutely at floor × tolerance.
    pub floor: f64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            step: 1e-5,
            samples: 64,
            floor: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

/// Compares `analytic` with (L(θ + h e_k) − L(θ − h e_k)) / 2h on sampled
/// coordinates k. `weights` is restored before returning.
pub fn check_gradients(
    weights: &mut ModelWeights,
    analytic: &[f64],
    loss: impl Fn(&ModelWeights) -> f64,
    cfg: &GradCheck,
    rng: &mut impl Rng,
) -> GradCheckReport {
    assert_eq!(analytic.len(), weights.len());
    let n = weights.len();
    let picks: Vec<usize> = if cfg.samples >= n {
        (0..n).collect()
    } else {
        sample(rng, n, cfg.samples).into_vec()
    };
    let mut worst = (0.0, 0);
    for &k in &picks {
        let orig = weights.flat()[k];
        weights.flat_mut()[k] = orig + cfg.step;
        let up = loss(weights);
        weights.flat_mut()[k] = orig - cfg.step;
        let down = loss(weights);
        weights.flat_mut()[k] = orig;
        let numeric = (up - down) / (2.0 * cfg.step);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
        if rel > worst.0 {
            worst = (rel, k);
        }
    }
    GradCheckReport {
        max_rel_error: worst.0,
        worst_index: worst.1,
        checked: picks.len(),
    }
}
