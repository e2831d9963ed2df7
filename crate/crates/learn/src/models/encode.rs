//! Network input encoding of measurement records.

use std::sync::OnceLock;

use qtomo_core::{tomography, ComplexMatrix, MeasurementRecord, Result};

use super::data::to_channels;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CorrectorVariant {
    /// Conditioned on operators and outcomes, linear correction.
    FullM,
    /// Conditioned on operators only, linear correction.
    PiOnly,
    /// Conditioned on operators only, linear plus quadratic correction.
    Quadratic,
}

impl CorrectorVariant {
    pub fn uses_outcomes(self) -> bool {
        matches!(self, CorrectorVariant::FullM)
    }

    pub fn kind_tag(self) -> &'static str {
        match self {
            CorrectorVariant::FullM => "CORR_M",
            CorrectorVariant::PiOnly => "CORR_PI",
            CorrectorVariant::Quadratic => "CORR_Q",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "CORR_M" => Some(Self::FullM),
            "CORR_PI" => Some(Self::PiOnly),
            "CORR_Q" => Some(Self::Quadratic),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CorrectorVariant::FullM => "full_m",
            CorrectorVariant::PiOnly => "pi_only",
            CorrectorVariant::Quadratic => "quadratic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full_m" | "fullm" | "full-m" => Some(Self::FullM),
            "pi_only" | "pionly" | "pi-only" => Some(Self::PiOnly),
            "quadratic" => Some(Self::Quadratic),
            _ => None,
        }
    }
}

/// Two-channel flattening of a projector: 2·4^N reals.
pub fn operator_features(pi: &ComplexMatrix) -> Vec<f64> {
    to_channels(pi)
}

static FEATURES: [OnceLock<Vec<Vec<f64>>>; 4] = [
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
];

/// Features of every basis projector, indexed by ν − 1.
pub fn basis_features(n_qubits: usize) -> Result<&'static [Vec<f64>]> {
    let tomo = tomography(n_qubits)?;
    Ok(FEATURES[n_qubits - 1].get_or_init(|| {
        tomo.projectors
            .projectors
            .iter()
            .map(operator_features)
            .collect()
    }))
}

/// Width of one measurement slot.
pub fn slot_width(n_qubits: usize, with_outcome: bool) -> usize {
    2 * (1 << (2 * n_qubits)) + usize::from(with_outcome)
}

/// Writes the slots for `subset` with outcomes `m` into `out`.
pub fn encode_into(
    n_qubits: usize,
    subset: &[usize],
    m: &[f64],
    variant: CorrectorVariant,
    out: &mut [f64],
) -> Result<()> {
    let feats = basis_features(n_qubits)?;
    let w = slot_width(n_qubits, variant.uses_outcomes());
    assert_eq!(out.len(), w * subset.len());
    for (k, (&nu, &mv)) in subset.iter().zip(m).enumerate() {
        let slot = &mut out[k * w..(k + 1) * w];
        let f = &feats[nu - 1];
        slot[..f.len()].copy_from_slice(f);
        if variant.uses_outcomes() {
            slot[f.len()] = mv;
        }
    }
    Ok(())
}

/// Per measurement, in record order: the projector's real parts, its
/// imaginary parts and (FullM only) the outcome.
pub fn encode_input(record: &MeasurementRecord, variant: CorrectorVariant) -> Result<Vec<f64>> {
    let w = slot_width(record.n_qubits, variant.uses_outcomes());
    let mut out = vec![0.0; w * record.len()];
    encode_into(
        record.n_qubits,
        &record.subset,
        &record.outcomes,
        variant,
        &mut out,
    )?;
    Ok(out)
}
