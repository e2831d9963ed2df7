//! Bures-distance sweeps over the number of measurements.

use qtomo_core::metrics::{bures_raw, mean_std};
use qtomo_core::mle::{mle_reconstruct, MleConfig};
use qtomo_core::reconstruct::{analytic_1q, pinv_reconstruct};
use qtomo_core::{ComplexMatrix, DensityMatrix, Error, MeasurementRecord, Result};
use qtomo_learn::models::{sample_collections, CorrectorModel, SelectorReconstructor, StateTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::parallel::par_map;

/// A reconstruction method under evaluation.
#[derive(Clone, Debug)]
pub enum Method<'a> {
    Pseudoinverse,
    Mle(MleConfig),
    /// Closed-form single-qubit pair reconstruction (N = 1, M = 2 only).
    Analytic1q,
    /// One trained corrector per M.
    Corrector(Vec<&'a CorrectorModel>),
    Lstm(&'a SelectorReconstructor),
}

impl Method<'_> {
    pub fn label(&self) -> String {
        match self {
            Method::Pseudoinverse => "pinv".into(),
            Method::Mle(_) => "mle".into(),
            Method::Analytic1q => "analytic".into(),
            Method::Corrector(ms) => ms
                .first()
                .map(|m| format!("corrector_{}", m.variant.name()))
                .unwrap_or_else(|| "corrector".into()),
            Method::Lstm(m) => format!("lstm_{}", m.mode.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub m_values: Vec<usize>,
    /// Collections sampled per M for subset-based methods.
    pub collections: usize,
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
}

impl SweepSpec {
    pub fn new(m_values: Vec<usize>, seed: u64) -> Self {
        Self {
            m_values,
            collections: 100,
            seed,
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub m: usize,
    pub mean_bures: f64,
    pub std_bures: f64,
    pub n_samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub method: String,
    pub n_qubits: usize,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
    /// Run metadata emitted as comment lines.
    pub meta: Vec<(String, String)>,
}

impl SweepResult {
    pub fn row(&self, m: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.m == m)
    }
}

/// Seed for the collections at a given M, independent across M.
pub fn derive_seed(seed: u64, m: usize) -> u64 {
    let mut z = seed ^ (m as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn collections_for(
    method: &Method<'_>,
    n_qubits: usize,
    m: usize,
    spec: &SweepSpec,
) -> Result<Vec<Vec<usize>>> {
    let size = 1 << (2 * n_qubits);
    if m > size {
        return Err(Error::UnsupportedCombination(format!(
            "M = {m} exceeds 4^N = {size}"
        )));
    }
    match method {
        Method::Corrector(models) => models
            .iter()
            .find(|c| c.m == m)
            .map(|c| c.pool.clone())
            .ok_or_else(|| {
                Error::UnsupportedCombination(format!("no corrector trained for M = {m}"))
            }),
        Method::Analytic1q if n_qubits != 1 || m != 2 => Err(Error::UnsupportedCombination(
            "the analytic reconstruction covers one qubit with two measurements".into(),
        )),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, m));
            Ok(sample_collections(
                size,
                m,
                spec.collections.max(1),
                &mut rng,
            ))
        }
    }
}

fn subset_reconstruct(
    method: &Method<'_>,
    record: &MeasurementRecord,
    n: usize,
) -> Result<ComplexMatrix> {
    match method {
        Method::Pseudoinverse => pinv_reconstruct(record, n),
        Method::Mle(cfg) => Ok(mle_reconstruct(record, n, cfg)?.into_matrix()),
        Method::Analytic1q => {
            let s = &record.subset;
            analytic_1q((s[0], s[1]), [record.outcomes[0], record.outcomes[1]])
        }
        Method::Corrector(models) => models
            .iter()
            .find(|c| c.m == record.len())
            .ok_or_else(|| Error::UnsupportedCombination("no corrector for this M".into()))?
            .reconstruct(record),
        Method::Lstm(_) => unreachable!("episodes are evaluated separately"),
    }
}

/// Raw reconstructions of every test state for each M in `spec`, in order.
/// State i is measured with collection i mod K; M = 0 yields I/d.
pub fn reconstruct_sweep(
    test: &StateTable,
    method: &Method<'_>,
    spec: &SweepSpec,
) -> Result<Vec<(usize, Vec<ComplexMatrix>)>> {
    let n = test.n_qubits;
    let mixed = DensityMatrix::maximally_mixed(n).into_matrix();
    if let Method::Lstm(model) = method {
        if model.n_qubits != n {
            return Err(Error::ShapeMismatch(
                "LSTM model qubit count differs from the test set".into(),
            ));
        }
        let longest = spec.m_values.iter().copied().max().unwrap_or(0);
        let episodes = if longest > 0 {
            model.run_episodes(test, longest, spec.seed)?
        } else {
            Vec::new()
        };
        return Ok(spec
            .m_values
            .iter()
            .map(|&m| {
                let recs = (0..test.len())
                    .map(|i| {
                        if m == 0 {
                            mixed.clone()
                        } else {
                            episodes[i].reconstructions[m - 1].clone()
                        }
                    })
                    .collect();
                (m, recs)
            })
            .collect());
    }
    let mut out = Vec::with_capacity(spec.m_values.len());
    for &m in &spec.m_values {
        if m == 0 {
            out.push((m, vec![mixed.clone(); test.len()]));
            continue;
        }
        let cols = collections_for(method, n, m, spec)?;
        let recs = par_map(test.len(), spec.jobs, |i| {
            let subset = &cols[i % cols.len()];
            let outcomes = subset
                .iter()
                .map(|&nu| test.outcomes[[i, nu - 1]])
                .collect();
            let record = MeasurementRecord::new(n, subset.clone(), outcomes)?;
            subset_reconstruct(method, &record, n)
        })?;
        out.push((m, recs));
    }
    Ok(out)
}

/// Mean and spread of the Bures distance (PSD-repaired reconstructions) per M.
pub fn bures_sweep(
    test: &StateTable,
    method: &Method<'_>,
    spec: &SweepSpec,
) -> Result<SweepResult> {
    if test.is_empty() {
        return Err(Error::InvalidConfig("empty test set".into()));
    }
    let truths: Vec<DensityMatrix> = test
        .states
        .iter()
        .map(|s| qtomo_core::states::validate(s.clone()))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (m, recs) in reconstruct_sweep(test, method, spec)? {
        let b = par_map(recs.len(), spec.jobs, |i| bures_raw(&recs[i], &truths[i]))?;
        let (mean, std) = mean_std(&b);
        rows.push(SweepRow {
            m,
            mean_bures: mean,
            std_bures: std,
            n_samples: b.len(),
        });
    }
    Ok(SweepResult {
        method: method.label(),
        n_qubits: test.n_qubits,
        seed: spec.seed,
        rows,
        meta: vec![
            ("collections".into(), spec.collections.to_string()),
            ("psd_repair".into(), "clip_renormalize".into()),
            ("test_states".into(), test.len().to_string()),
        ],
    })
}
