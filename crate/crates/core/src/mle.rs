//! Maximum-likelihood reconstruction from the measured subset by the diluted
//! RρR fixed-point iteration.
//!
//! Each measured projector is treated as a two-outcome measurement (Π, I − Π)
//! with observed frequencies (m, 1 − m). The log-likelihood
//! Σ_ν m_ν log p_ν + (1 − m_ν) log(1 − p_ν), p_ν = Tr(Π_ν ρ), peaks at p_ν = m_ν
//! whenever some state reproduces the data.

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};
use crate::measurement::{tomography, MeasurementRecord};
use crate::states::{validate, DensityMatrix};

const PROB_FLOOR: f64 = 1e-15;
const DECREASE_SLACK: f64 = 1e-12;
const MAX_DECREASES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MleConfig {
    pub max_iters: usize,
    /// Stop once both the log-likelihood and every measured probability
    /// change by less than this in one iteration.
    pub tol: f64,
    /// ε in R_ε = (1 − ε) I + ε R.
    pub dilution: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol: 1e-10,
            dilution: 0.5,
        }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if !(self.dilution > 0.0 && self.dilution <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "dilution must be in (0, 1], got {}",
                self.dilution
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MleReport {
    pub state: DensityMatrix,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub converged: bool,
}

/// ⟨ψ|ρ|ψ⟩ for a unit vector ψ.
fn projector_prob(rho: &ComplexMatrix, psi: &[C64]) -> f64 {
    let rpsi = rho.matvec(psi).expect("projector state matches dimension");
    psi.iter().zip(&rpsi).map(|(a, b)| (a.conj() * b).re).sum()
}

fn log_likelihood(probs: &[f64], m: &[f64]) -> f64 {
    probs
        .iter()
        .zip(m)
        .map(|(&p, &mi)| {
            let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            let mut l = 0.0;
            if mi > 0.0 {
                l += mi * p.ln();
            }
            if mi < 1.0 {
                l += (1.0 - mi) * (1.0 - p).ln();
            }
            l
        })
        .sum()
}

pub fn mle_reconstruct(
    record: &MeasurementRecord,
    n_qubits: usize,
    cfg: &MleConfig,
) -> Result<DensityMatrix> {
    mle_run(record, n_qubits, cfg).map(|r| r.state)
}

pub fn mle_run(record: &MeasurementRecord, n_qubits: usize, cfg: &MleConfig) -> Result<MleReport> {
    cfg.validate()?;
    if record.n_qubits != n_qubits {
        return Err(Error::ShapeMismatch(format!(
            "{}-qubit record for a {n_qubits}-qubit reconstruction",
            record.n_qubits
        )));
    }
    if record.is_empty() {
        return Err(Error::InvalidConfig(
            "MLE needs at least one measurement".into(),
        ));
    }
    let tomo = tomography(n_qubits)?;
    let states: Vec<&[C64]> = record
        .subset
        .iter()
        .map(|&nu| tomo.projectors.states[nu - 1].as_slice())
        .collect();
    let m: Vec<f64> = record.outcomes.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    let d = tomo.dim();
    let count = m.len() as f64;
    let eps = cfg.dilution;

    let mut rho = DensityMatrix::maximally_mixed(n_qubits).into_matrix();
    let mut probs: Vec<f64> = states.iter().map(|s| projector_prob(&rho, s)).collect();
    let mut ll = log_likelihood(&probs, &m);
    let mut decreases = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        // R = (1/M) Σ [ (m/p) Π + ((1−m)/(1−p)) (I − Π) ], written as α I + Σ β |ψ⟩⟨ψ|
        let mut alpha = 0.0;
        let mut r = ComplexMatrix::zeros(d, d);
        for ((psi, &p), &mi) in states.iter().zip(&probs).zip(&m) {
            let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            let w_in = if mi > 0.0 { mi / p } else { 0.0 };
            let w_out = if mi < 1.0 {
                (1.0 - mi) / (1.0 - p)
            } else {
                0.0
            };
            alpha += w_out;
            let beta = (w_in - w_out) / count;
            for i in 0..d {
                let left = psi[i] * beta;
                for j in 0..d {
                    r[(i, j)] += left * psi[j].conj();
                }
            }
        }
        let diag = (1.0 - eps) + eps * alpha / count;
        let mut r_eps = r.scale(eps);
        for i in 0..d {
            r_eps[(i, i)] += C64::new(diag, 0.0);
        }
        let next = &(&r_eps * &rho) * &r_eps;
        let tr = next.trace().re;
        if !(tr > 0.0) || !next.is_finite() {
            return Err(Error::Divergence(iterations));
        }
        rho = next.scale(1.0 / tr).hermitian_part();
        let new_probs: Vec<f64> = states.iter().map(|s| projector_prob(&rho, s)).collect();
        let prob_step = new_probs
            .iter()
            .zip(&probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        probs = new_probs;
        let new_ll = log_likelihood(&probs, &m);
        let delta = new_ll - ll;
        ll = new_ll;
        if delta < -DECREASE_SLACK {
            decreases += 1;
            if decreases >= MAX_DECREASES {
                return Err(Error::Divergence(iterations));
            }
        } else {
            decreases = 0;
        }
        if delta.abs() < cfg.tol && prob_step < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(MleReport {
        state: validate(rho)?,
        iterations,
        log_likelihood: ll,
        converged,
    })
}
