//! Fidelity, Bures distance and spectral statistics of reconstructions.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, ComplexMatrix};
use crate::states::DensityMatrix;

/// Allowed excess of the computed fidelity over 1 before it is treated as an error.
pub const FIDELITY_EXCESS_TOL: f64 = 1e-8;
/// Eigenvalues below this fraction of the largest are treated as zero support.
pub const SUPPORT_RCOND: f64 = 1e-12;

/// Clips negative eigenvalues of the Hermitian part to zero and rescales to unit trace.
pub fn repair_psd(raw: &ComplexMatrix) -> Result<DensityMatrix> {
    let eig = hermitian_eig(&raw.hermitian_part())?;
    let kept: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum();
    if !(kept > 0.0) {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.eigenvalues.first().copied().unwrap_or(0.0),
        });
    }
    let mut m = eig.reassemble(|l| l.max(0.0) / kept);
    m = m.hermitian_part();
    crate::states::validate(m)
}

/// (Tr √(√ρ σ √ρ))², clamped to [0, 1].
pub fn fidelity(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    fidelity_matrices(r1.matrix(), r2.matrix())
}

fn fidelity_matrices(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "fidelity of {:?} and {:?} matrices",
            a.shape(),
            b.shape()
        )));
    }
    let ea = hermitian_eig(a)?;
    let eb = hermitian_eig(b)?;
    let rank = |ev: &[f64]| {
        let top = ev.last().copied().unwrap_or(0.0).max(0.0);
        ev.iter().filter(|&&l| l > SUPPORT_RCOND * top).count()
    };
    // take the square root of the argument with smaller support
    let (root_eig, other) = if rank(&ea.eigenvalues) <= rank(&eb.eigenvalues) {
        (ea, b)
    } else {
        (eb, a)
    };
    let top = root_eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    let support: Vec<usize> = (0..root_eig.eigenvalues.len())
        .filter(|&k| root_eig.eigenvalues[k] > SUPPORT_RCOND * top)
        .collect();
    let v = &root_eig.eigenvectors;
    // K = diag(√λ) V_s† σ V_s diag(√λ) on the support
    let vs = ComplexMatrix::from_fn(v.rows(), support.len(), |r, c| v[(r, support[c])]);
    let inner = &(&vs.adjoint() * other) * &vs;
    let sq: Vec<f64> = support
        .iter()
        .map(|&k| root_eig.eigenvalues[k].sqrt())
        .collect();
    let k = ComplexMatrix::from_fn(support.len(), support.len(), |r, c| {
        inner[(r, c)] * (sq[r] * sq[c])
    });
    let root_sum: f64 = if support.is_empty() {
        0.0
    } else {
        hermitian_eig(&k.hermitian_part())?
            .eigenvalues
            .iter()
            .map(|l| l.max(0.0).sqrt())
            .sum()
    };
    let f = root_sum * root_sum;
    if f > 1.0 + FIDELITY_EXCESS_TOL || !f.is_finite() {
        return Err(Error::FidelityOutOfRange(f));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// Fidelity of a raw reconstruction (repaired first) against a valid state.
pub fn fidelity_raw(raw: &ComplexMatrix, truth: &DensityMatrix) -> Result<f64> {
    let repaired = repair_psd(raw)?;
    fidelity(&repaired, truth)
}

pub fn bures_from_fidelity(f: f64) -> f64 {
    (2.0 - 2.0 * f.clamp(0.0, 1.0).sqrt()).max(0.0).sqrt()
}

/// √(2 − 2√F).
pub fn bures(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    fidelity(r1, r2).map(bures_from_fidelity)
}

pub fn bures_raw(raw: &ComplexMatrix, truth: &DensityMatrix) -> Result<f64> {
    fidelity_raw(raw, truth).map(bures_from_fidelity)
}

/// The two smallest eigenvalues of the Hermitian part, ascending. For a
/// 1×1 input the second entry repeats the first.
pub fn lowest_eigenvalues(raw: &ComplexMatrix) -> Result<(f64, f64)> {
    let ev = hermitian_eig(&raw.hermitian_part())?.eigenvalues;
    let first = ev[0];
    Ok((first, ev.get(1).copied().unwrap_or(first)))
}

/// Mean and population standard deviation; `(NaN, NaN)` for an empty slice.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
