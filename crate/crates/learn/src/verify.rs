//! Finite-difference verification of every model's training gradient.

use qtomo_core::Result;

use crate::models::{
    episode_gradient_check, training_gradient_check, CorrectorVariant, LstmArch, SelectionMode,
};
use crate::nn::gradcheck::GradCheckReport;

/// Named reports covering each corrector variant and each selection mode
/// (one and two qubits, one and two LSTM layers).
pub fn gradient_suite(seed: u64) -> Result<Vec<(String, GradCheckReport)>> {
    let mut out = Vec::new();
    for v in [
        CorrectorVariant::FullM,
        CorrectorVariant::PiOnly,
        CorrectorVariant::Quadratic,
    ] {
        out.push((
            format!("corrector_{}", v.name()),
            training_gradient_check(v, seed)?,
        ));
    }
    let modes = [
        SelectionMode::Random,
        SelectionMode::Predefined,
        SelectionMode::Custom,
    ];
    for mode in modes {
        for (n, layers) in [(1, 1), (2, 2)] {
            let arch = LstmArch { hidden: 5, layers };
            let rep = episode_gradient_check(mode, n, arch, 3, seed)?;
            out.push((format!("lstm_{}_n{n}_l{layers}", mode.name()), rep));
        }
    }
    Ok(out)
}
