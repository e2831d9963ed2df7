//! Spectral statistics of raw (unrepaired) reconstructions.

use qtomo_core::metrics::{lowest_eigenvalues, mean_std};
use qtomo_core::{ComplexMatrix, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdStats {
    pub lowest_mean: f64,
    pub lowest_std: f64,
    pub second_mean: f64,
    pub second_std: f64,
    pub n: usize,
}

pub fn psd_stats(recons: &[ComplexMatrix]) -> Result<PsdStats> {
    let pairs = recons
        .iter()
        .map(lowest_eigenvalues)
        .collect::<Result<Vec<_>>>()?;
    let (first, second): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (lowest_mean, lowest_std) = mean_std(&first);
    let (second_mean, second_std) = mean_std(&second);
    Ok(PsdStats {
        lowest_mean,
        lowest_std,
        second_mean,
        second_std,
        n: recons.len(),
    })
}

/// Smallest lowest eigenvalue over the set.
pub fn min_lowest(recons: &[ComplexMatrix]) -> Result<f64> {
    recons
        .iter()
        .map(|r| lowest_eigenvalues(r).map(|p| p.0))
        .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)))
}
