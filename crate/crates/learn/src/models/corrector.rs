//! Corrector networks: an MLP that maps a measurement record to additive
//! corrections of the pseudoinverse reconstructor.
//!
//! Training works in Pauli-coefficient space, where the Frobenius distance of
//! density matrices is 2^{N/2} times the Euclidean distance of coefficients.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use qtomo_core::reconstruct::{corrected_coefficients, CorrectionTerms};
use qtomo_core::{tomography, ComplexMatrix, Error, MeasurementRecord, Result};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::data::StateTable;
use super::encode::{encode_into, slot_width, CorrectorVariant};
use crate::nn::gradcheck::{check_gradients, GradCheck, GradCheckReport};
use crate::nn::{Adam, Checkpoint, Mlp, ModelWeights, TrainConfig, TrainingCurve};

pub const DEFAULT_HIDDEN: [usize; 6] = [64; 6];
pub const DEFAULT_COLLECTIONS: usize = 100;

#[derive(Clone, Debug)]
pub struct CorrectorModel {
    pub variant: CorrectorVariant,
    pub n_qubits: usize,
    pub m: usize,
    pub hidden: Vec<usize>,
    /// Sorted measurement collections the model was trained on.
    pub pool: Vec<Vec<usize>>,
    pub weights: ModelWeights,
    mlp: Mlp,
}

fn binomial_at_least(n: usize, k: usize, cap: usize) -> bool {
    let mut acc: u128 = 1;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc >= cap as u128 {
            return true;
        }
    }
    acc >= cap as u128
}

fn all_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (1..=k).collect();
    if k == 0 {
        return vec![Vec::new()];
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Up to `count` distinct sorted M-subsets of 1..=size, drawn without
/// replacement; every subset when there are no more than `count`.
pub fn sample_collections(
    size: usize,
    m: usize,
    count: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<usize>> {
    assert!(m <= size && count >= 1);
    if !binomial_at_least(size, m, count + 1) {
        return all_subsets(size, m);
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut s: Vec<usize> = sample(rng, size, m).into_iter().map(|i| i + 1).collect();
        s.sort_unstable();
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    out
}

fn format_pool(pool: &[Vec<usize>]) -> String {
    pool.iter()
        .map(|s| {
            s.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("-")
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_pool(text: &str) -> Result<Vec<Vec<usize>>> {
    text.split(';')
        .map(|s| {
            s.split('-')
                .map(|v| {
                    v.parse()
                        .map_err(|_| Error::Format(format!("bad collection entry {v:?}")))
                })
                .collect()
        })
        .collect()
}

fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|v| {
            v.parse()
                .map_err(|_| Error::Format(format!("bad layer size {v:?}")))
        })
        .collect()
}

/// Per-collection constants reused across batches.
struct PoolEntry {
    subset: Vec<usize>,
    /// B⁺ for the subset, 4^N × M row-major.
    pinv: Vec<f64>,
}

impl CorrectorModel {
    /// Untrained model with a zeroed output layer, so its initial terms are
    /// zero and its reconstruction is the pseudoinverse.
    pub fn new(
        variant: CorrectorVariant,
        n_qubits: usize,
        m: usize,
        hidden: &[usize],
        pool: Vec<Vec<usize>>,
        seed: u64,
    ) -> Result<Self> {
        let tomo = tomography(n_qubits)?;
        if m == 0 || m > tomo.size() {
            return Err(Error::InvalidConfig(format!(
                "corrector needs 1 <= M <= {}, got {m}",
                tomo.size()
            )));
        }
        if pool.is_empty() {
            return Err(Error::InvalidConfig("empty collection pool".into()));
        }
        for s in &pool {
            if s.len() != m {
                return Err(Error::ShapeMismatch(format!(
                    "collection of size {} for M = {m}",
                    s.len()
                )));
            }
            tomo.projectors.check_subset(s)?;
        }
        let sizes = Self::layer_sizes(variant, n_qubits, m, hidden);
        let mut weights = ModelWeights::new();
        let mlp = Mlp::new(&mut weights, "corr", &sizes);
        mlp.init(&mut weights, &mut ChaCha8Rng::seed_from_u64(seed));
        mlp.zero_output_layer(&mut weights);
        Ok(Self {
            variant,
            n_qubits,
            m,
            hidden: hidden.to_vec(),
            pool,
            weights,
            mlp,
        })
    }

    fn layer_sizes(variant: CorrectorVariant, n: usize, m: usize, hidden: &[usize]) -> Vec<usize> {
        let size = 1 << (2 * n);
        let out = size * m
            + size
            + if variant == CorrectorVariant::Quadratic {
                size * m * m
            } else {
                0
            };
        let mut sizes = vec![m * slot_width(n, variant.uses_outcomes())];
        sizes.extend_from_slice(hidden);
        sizes.push(out);
        sizes
    }

    pub fn size(&self) -> usize {
        1 << (2 * self.n_qubits)
    }

    pub fn input_size(&self) -> usize {
        self.mlp.input_size()
    }

    pub fn output_size(&self) -> usize {
        self.mlp.output_size()
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.len()
    }

    fn decode(&self, out: &[f64]) -> CorrectionTerms {
        let (size, m) = (self.size(), self.m);
        let mut terms = CorrectionTerms {
            size,
            m,
            b: out[..size * m].to_vec(),
            c: out[size * m..size * m + size].to_vec(),
            s: (self.variant == CorrectorVariant::Quadratic)
                .then(|| out[size * m + size..].to_vec()),
        };
        terms.symmetrize();
        terms
    }

    fn check(&self, record: &MeasurementRecord) -> Result<()> {
        if record.n_qubits != self.n_qubits || record.len() != self.m {
            return Err(Error::ShapeMismatch(format!(
                "record ({} qubits, M = {}) for a corrector of ({} qubits, M = {})",
                record.n_qubits,
                record.len(),
                self.n_qubits,
                self.m
            )));
        }
        Ok(())
    }

    /// Correction terms for any record of size M.
    pub fn predict(&self, record: &MeasurementRecord) -> Result<CorrectionTerms> {
        Ok(self.predict_batch(std::slice::from_ref(record))?.remove(0))
    }

    pub fn predict_batch(&self, records: &[MeasurementRecord]) -> Result<Vec<CorrectionTerms>> {
        let w = self.input_size();
        let mut input = Array2::zeros((records.len(), w));
        for (row, r) in input.rows_mut().into_iter().zip(records) {
            self.check(r)?;
            let mut row = row;
            encode_into(
                self.n_qubits,
                &r.subset,
                &r.outcomes,
                self.variant,
                row.as_slice_mut().expect("row-major"),
            )?;
        }
        let (out, _) = self.mlp.forward(&self.weights, input.view())?;
        Ok(out
            .rows()
            .into_iter()
            .map(|o| self.decode(o.as_slice().expect("row-major")))
            .collect())
    }

    /// Pauli coefficients of the corrected reconstruction.
    pub fn coefficients(&self, record: &MeasurementRecord) -> Result<Vec<f64>> {
        let terms = self.predict(record)?;
        let p = qtomo_core::reconstruct::pinv_coefficients(record)?;
        Ok(corrected_coefficients(&p, &record.outcomes, &terms))
    }

    /// Raw (not PSD-projected) corrected reconstructions.
    pub fn reconstruct_batch(&self, records: &[MeasurementRecord]) -> Result<Vec<ComplexMatrix>> {
        let tomo = tomography(self.n_qubits)?;
        let terms = self.predict_batch(records)?;
        records
            .iter()
            .zip(&terms)
            .map(|(r, t)| {
                let p = qtomo_core::reconstruct::pinv_coefficients(r)?;
                Ok(tomo
                    .paulis
                    .synthesize(&corrected_coefficients(&p, &r.outcomes, t)))
            })
            .collect()
    }

    pub fn reconstruct(&self, record: &MeasurementRecord) -> Result<ComplexMatrix> {
        Ok(self
            .reconstruct_batch(std::slice::from_ref(record))?
            .remove(0))
    }

    /// Mean Frobenius reconstruction loss over `data`, each state paired with
    /// pool collection `i mod K`.
    pub fn evaluate_loss(&self, data: &StateTable) -> Result<f64> {
        let scale = (self.n_qubits as f64 / 2.0).exp2();
        let mut total = 0.0;
        for i in 0..data.len() {
            let subset = &self.pool[i % self.pool.len()];
            let m: Vec<f64> = subset
                .iter()
                .map(|&nu| data.outcomes[[i, nu - 1]])
                .collect();
            let rec = MeasurementRecord::new(self.n_qubits, subset.clone(), m)?;
            let x = self.coefficients(&rec)?;
            let d: f64 = x
                .iter()
                .zip(data.coeffs.row(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += scale * d.sqrt();
        }
        Ok(total / data.len() as f64)
    }

    pub fn to_checkpoint(&self, cfg: Option<&TrainConfig>) -> Checkpoint {
        let mut meta = BTreeMap::new();
        meta.insert("n_qubits".into(), self.n_qubits.to_string());
        meta.insert("m".into(), self.m.to_string());
        meta.insert(
            "hidden".into(),
            self.hidden
                .iter()
                .map(|h| h.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        meta.insert("pool".into(), format_pool(&self.pool));
        if let Some(cfg) = cfg {
            cfg.to_meta(&mut meta);
        }
        Checkpoint {
            kind: self.variant.kind_tag().into(),
            meta,
            weights: self.weights.clone(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let variant = CorrectorVariant::from_tag(&ck.kind)
            .ok_or_else(|| Error::Format(format!("{} is not a corrector checkpoint", ck.kind)))?;
        let n_qubits: usize = ck.meta_get("n_qubits")?;
        let m: usize = ck.meta_get("m")?;
        let hidden = parse_sizes(&ck.meta_get::<String>("hidden")?)?;
        let pool = parse_pool(&ck.meta_get::<String>("pool")?)?;
        let sizes = Self::layer_sizes(variant, n_qubits, m, &hidden);
        let mlp = Mlp::bind(&ck.weights, "corr", &sizes)?;
        if ck.weights.len() != mlp_param_count(&sizes) {
            return Err(Error::Format(
                "corrector checkpoint has extra tensors".into(),
            ));
        }
        let tomo = tomography(n_qubits)?;
        for s in &pool {
            if s.len() != m {
                return Err(Error::Format("collection size does not match M".into()));
            }
            tomo.projectors.check_subset(s)?;
        }
        Ok(Self {
            variant,
            n_qubits,
            m,
            hidden,
            pool,
            weights: ck.weights.clone(),
            mlp,
        })
    }
}

fn mlp_param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

/// Options for [`train_corrector`] beyond the shared [`TrainConfig`].
#[derive(Clone, Debug)]
pub struct CorrectorSpec {
    pub variant: CorrectorVariant,
    pub m: usize,
    pub hidden: Vec<usize>,
    /// Explicit pool; sampled with `collections` entries when `None`.
    pub pool: Option<Vec<Vec<usize>>>,
    pub collections: usize,
}

impl CorrectorSpec {
    pub fn new(variant: CorrectorVariant, m: usize) -> Self {
        Self {
            variant,
            m,
            hidden: DEFAULT_HIDDEN.to_vec(),
            pool: None,
            collections: DEFAULT_COLLECTIONS,
        }
    }

    /// One model for a single fixed collection.
    pub fn per_collection(variant: CorrectorVariant, subset: Vec<usize>) -> Self {
        Self {
            m: subset.len(),
            pool: Some(vec![subset]),
            ..Self::new(variant, 0)
        }
    }
}

/// Minimizes the mean Frobenius reconstruction loss plus
/// `ortho_weight · Σ_ν' (B_ν'·(b m + c))²` over the measured rows ν'.
pub fn train_corrector(
    data: &StateTable,
    spec: &CorrectorSpec,
    cfg: &TrainConfig,
) -> Result<(CorrectorModel, TrainingCurve)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    let n = data.n_qubits;
    let tomo = tomography(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pool = match &spec.pool {
        Some(p) => p.clone(),
        None => sample_collections(tomo.size(), spec.m, spec.collections.max(1), &mut rng),
    };
    let mut model = CorrectorModel::new(spec.variant, n, spec.m, &spec.hidden, pool, rng.random())?;
    let curve = fit_corrector(&mut model, data, cfg, &mut rng)?;
    Ok((model, curve))
}

/// Continues training a loaded model. Optimizer moments start from zero; the
/// shuffling stream is derived from the seed and the steps already taken.
pub fn resume_corrector(
    model: &mut CorrectorModel,
    data: &StateTable,
    cfg: &TrainConfig,
    steps_done: u64,
) -> Result<TrainingCurve> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    if data.n_qubits != model.n_qubits {
        return Err(Error::ShapeMismatch(format!(
            "{}-qubit data for a {}-qubit model",
            data.n_qubits, model.n_qubits
        )));
    }
    let mut rng =
        ChaCha8Rng::seed_from_u64(cfg.seed ^ steps_done.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    fit_corrector(model, data, cfg, &mut rng)
}

fn fit_corrector(
    model: &mut CorrectorModel,
    data: &StateTable,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainingCurve> {
    let tomo = tomography(model.n_qubits)?;
    let entries: Vec<PoolEntry> = model
        .pool
        .iter()
        .map(|s| {
            Ok(PoolEntry {
                subset: s.clone(),
                pinv: tomo.b_pinv(s)?,
            })
        })
        .collect::<Result<_>>()?;

    let mut adam = Adam::new(cfg.adam(), model.weights.len());
    let mut grads = model.weights.zeros_like();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = TrainingCurve::default();

    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let (mut epoch_loss, mut epoch_aux) = (0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            let samples: Vec<(usize, usize)> = batch
                .iter()
                .map(|&i| (i, rng.random_range(0..entries.len())))
                .collect();
            grads.zero();
            let (l, a) = batch_gradient(
                model,
                &entries,
                data,
                &samples,
                cfg.ortho_weight,
                &mut grads,
            )?;
            epoch_loss += l;
            epoch_aux += a;
            if let Some(c) = cfg.grad_clip {
                grads.clip_norm(c);
            }
            adam.step(&mut model.weights, &grads);
        }
        curve.epoch_loss.push(epoch_loss / data.len() as f64);
        curve.epoch_aux.push(epoch_aux / data.len() as f64);
    }
    curve.steps = adam.steps_taken();
    Ok(curve)
}

/// Accumulates into `grads` the gradient of
/// (1/B) Σ_i [2^{N/2}‖x_i − x_true,i‖ + w Σ_ν' (B_ν'·v_i)²] over `samples`
/// (state index, pool index); returns the summed loss and penalty.
fn batch_gradient(
    model: &CorrectorModel,
    entries: &[PoolEntry],
    data: &StateTable,
    samples: &[(usize, usize)],
    ortho_weight: f64,
    grads: &mut crate::nn::Grads,
) -> Result<(f64, f64)> {
    let n = model.n_qubits;
    let tomo = tomography(n)?;
    let (size, m) = (tomo.size(), model.m);
    let scale = (n as f64 / 2.0).exp2();
    let bsz = samples.len();
    let quadratic = model.variant == CorrectorVariant::Quadratic;
    let mut input = Array2::zeros((bsz, model.input_size()));
    let mut ms = Vec::with_capacity(bsz);
    for (k, &(i, p)) in samples.iter().enumerate() {
        let e = &entries[p];
        let mv: Vec<f64> = e
            .subset
            .iter()
            .map(|&nu| data.outcomes[[i, nu - 1]])
            .collect();
        let mut row = input.row_mut(k);
        encode_into(
            n,
            &e.subset,
            &mv,
            model.variant,
            row.as_slice_mut().unwrap(),
        )?;
        ms.push(mv);
    }
    let (out, cache) = model.mlp.forward(&model.weights, input.view())?;
    let mut d_out = Array2::zeros((bsz, model.output_size()));
    let (mut loss, mut aux) = (0.0, 0.0);
    for (k, &(i, p)) in samples.iter().enumerate() {
        let e = &entries[p];
        let mv = &ms[k];
        let o = out.row(k);
        let o = o.as_slice().unwrap();
        let (b, c) = (&o[..size * m], &o[size * m..size * m + size]);
        // v = b m + c, x = B⁺ m + v [+ S m m]
        let mut v = c.to_vec();
        let mut x = vec![0.0; size];
        for mu in 0..size {
            v[mu] += dot(&b[mu * m..(mu + 1) * m], mv);
            x[mu] = v[mu] + dot(&e.pinv[mu * m..(mu + 1) * m], mv);
        }
        if quadratic {
            let s = &o[size * m + size..];
            for mu in 0..size {
                let blk = &s[mu * m * m..(mu + 1) * m * m];
                x[mu] += (0..m)
                    .map(|a| mv[a] * dot(&blk[a * m..(a + 1) * m], mv))
                    .sum::<f64>();
            }
        }
        let diff: Vec<f64> = x
            .iter()
            .zip(data.coeffs.row(i))
            .map(|(a, t)| a - t)
            .collect();
        let norm = dot(&diff, &diff).sqrt();
        loss += scale * norm;
        let mut dx = vec![0.0; size];
        if norm > 0.0 {
            for (g, d) in dx.iter_mut().zip(&diff) {
                *g = scale * d / (norm * bsz as f64);
            }
        }
        let mut dv = dx.clone();
        if ortho_weight > 0.0 {
            for &nu in &e.subset {
                let row = tomo.b_row(nu);
                let r = dot(row, &v);
                aux += r * r;
                let k2 = 2.0 * ortho_weight * r / bsz as f64;
                for (g, a) in dv.iter_mut().zip(row) {
                    *g += k2 * a;
                }
            }
        }
        let mut drow = d_out.row_mut(k);
        let drow = drow.as_slice_mut().unwrap();
        for mu in 0..size {
            for a in 0..m {
                drow[mu * m + a] = dv[mu] * mv[a];
            }
            drow[size * m + mu] = dv[mu];
        }
        if quadratic {
            let ds = &mut drow[size * m + size..];
            for mu in 0..size {
                for a in 0..m {
                    for bb in 0..m {
                        ds[(mu * m + a) * m + bb] = dx[mu] * mv[a] * mv[bb];
                    }
                }
            }
        }
    }
    model
        .mlp
        .backward(&model.weights, &cache, d_out.view(), grads)?;
    Ok((loss, aux))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Compares the training gradient (loss plus orthogonality penalty) of a
/// small random corrector with central differences of a loss recomputed
/// through `predict`/`coefficients`.
pub fn training_gradient_check(variant: CorrectorVariant, seed: u64) -> Result<GradCheckReport> {
    let states = qtomo_core::Ensemble::default_for(1).generate(1, 3, seed + 1)?;
    let data = StateTable::new(&states)?;
    let subset = vec![1, 3];
    let mut model = CorrectorModel::new(variant, 1, 2, &[6], vec![subset.clone()], seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in model.weights.flat_mut() {
        *v = rng.random_range(-0.4..0.4);
    }
    let w = 0.3;
    let tomo = tomography(1)?;
    let loss = |mw: &ModelWeights| -> f64 {
        let mut mm = model.clone();
        mm.weights = mw.clone();
        let mut total = 0.0;
        for i in 0..data.len() {
            let mv: Vec<f64> = subset
                .iter()
                .map(|&nu| data.outcomes[[i, nu - 1]])
                .collect();
            let rec = MeasurementRecord::new(1, subset.clone(), mv.clone()).unwrap();
            let x = mm.coefficients(&rec).unwrap();
            let t = mm.predict(&rec).unwrap();
            let d: f64 = x
                .iter()
                .zip(data.coeffs.row(i))
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            total += 2f64.sqrt() * d.sqrt();
            let v = t.linear_part(&mv);
            for &nu in &subset {
                let r: f64 = tomo.b_row(nu).iter().zip(&v).map(|(a, b)| a * b).sum();
                total += w * r * r;
            }
        }
        total / data.len() as f64
    };
    let entries = vec![PoolEntry {
        subset: subset.clone(),
        pinv: tomo.b_pinv(&subset)?,
    }];
    let samples: Vec<(usize, usize)> = (0..data.len()).map(|i| (i, 0)).collect();
    let mut g = model.weights.zeros_like();
    batch_gradient(&model, &entries, &data, &samples, w, &mut g)?;
    let mut weights = model.weights.clone();
    Ok(check_gradients(
        &mut weights,
        g.flat(),
        loss,
        &GradCheck::default(),
        &mut rng,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use qtomo_core::reconstruct::{orthogonality_residual, pinv_reconstruct};
    use qtomo_core::{DensityMatrix, Ensemble};

    fn table(n: usize, count: usize, seed: u64) -> StateTable {
        StateTable::new(&Ensemble::default_for(n).generate(n, count, seed).unwrap()).unwrap()
    }

    #[test]
    fn collections_are_distinct_and_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = sample_collections(16, 4, 100, &mut rng);
        assert_eq!(c.len(), 100);
        let set: BTreeSet<_> = c.iter().cloned().collect();
        assert_eq!(set.len(), 100);
        assert!(c.iter().all(|s| s.windows(2).all(|w| w[0] < w[1])));
        assert_eq!(sample_collections(4, 2, 100, &mut rng).len(), 6);
        assert_eq!(
            sample_collections(16, 16, 100, &mut rng),
            vec![(1..=16).collect::<Vec<_>>()]
        );
        assert_eq!(sample_collections(16, 15, 100, &mut rng).len(), 16);
    }

    #[test]
    fn untrained_model_is_pseudoinverse() {
        for variant in [
            CorrectorVariant::FullM,
            CorrectorVariant::PiOnly,
            CorrectorVariant::Quadratic,
        ] {
            let model =
                CorrectorModel::new(variant, 2, 3, &[16, 16], vec![vec![1, 5, 9]], 1).unwrap();
            let rho = Ensemble::default_for(2)
                .generate(2, 1, 4)
                .unwrap()
                .remove(0);
            let rec = MeasurementRecord::measure(&rho, &[1, 5, 9]).unwrap();
            let t = model.predict(&rec).unwrap();
            assert!(t.b.iter().chain(&t.c).all(|&v| v == 0.0));
            let r = model.reconstruct(&rec).unwrap();
            assert!(r.max_abs_diff(&pinv_reconstruct(&rec, 2).unwrap()) < 1e-14);
        }
    }

    #[test]
    fn pi_only_ignores_outcomes_and_quadratic_is_symmetric() {
        let mut model = CorrectorModel::new(
            CorrectorVariant::Quadratic,
            1,
            3,
            &[8, 8],
            vec![vec![1, 2, 3]],
            2,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for v in model.weights.flat_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
        let a = MeasurementRecord::new(1, vec![1, 3, 4], vec![0.1, 0.9, 0.4]).unwrap();
        let b = MeasurementRecord::new(1, vec![1, 3, 4], vec![0.8, 0.2, 0.5]).unwrap();
        let (ta, tb) = (model.predict(&a).unwrap(), model.predict(&b).unwrap());
        assert_eq!(ta, tb);
        let s = ta.s.unwrap();
        for mu in 0..4 {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(s[(mu * 3 + i) * 3 + j], s[(mu * 3 + j) * 3 + i]);
                }
            }
        }
    }

    #[test]
    fn default_parameter_counts_are_near_reference_table() {
        // full-measurement correctors: 2 qubits 7.36e4, 3 qubits 6.64e5
        for (n, reference) in [(2usize, 7.36e4), (3, 6.64e5)] {
            let size = 1 << (2 * n);
            let model = CorrectorModel::new(
                CorrectorVariant::FullM,
                n,
                size,
                &DEFAULT_HIDDEN,
                vec![(1..=size).collect()],
                0,
            )
            .unwrap();
            let ratio = model.num_parameters() as f64 / reference;
            assert!(
                (0.5..=2.0).contains(&ratio),
                "n={n}: {}",
                model.num_parameters()
            );
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let (model, _) = train_corrector(
            &table(1, 64, 1),
            &CorrectorSpec {
                hidden: vec![8, 8],
                ..CorrectorSpec::new(CorrectorVariant::FullM, 2)
            },
            &TrainConfig {
                epochs: 2,
                batch_size: 16,
                ..Default::default()
            },
        )
        .unwrap();
        let ck = model.to_checkpoint(Some(&TrainConfig::default()));
        let back =
            CorrectorModel::from_checkpoint(&Checkpoint::from_bytes(&ck.to_bytes()).unwrap())
                .unwrap();
        assert_eq!(back.pool, model.pool);
        let rec = MeasurementRecord::new(1, vec![1, 3], vec![0.3, 0.6]).unwrap();
        assert_eq!(back.predict(&rec).unwrap(), model.predict(&rec).unwrap());
    }

    /// Training loss gradient through the decoder matches finite differences.
    #[test]
    fn training_gradient_matches_finite_differences() {
        for variant in [
            CorrectorVariant::FullM,
            CorrectorVariant::PiOnly,
            CorrectorVariant::Quadratic,
        ] {
            let rep = training_gradient_check(variant, 4).unwrap();
            assert!(rep.max_rel_error < 1e-5, "{variant:?}: {rep:?}");
        }
    }

    #[test]
    fn residual_shrinks_with_training() {
        let data = table(1, 512, 11);
        let spec = CorrectorSpec {
            hidden: vec![32, 32],
            ..CorrectorSpec::per_collection(CorrectorVariant::FullM, vec![1, 2])
        };
        let cfg = TrainConfig {
            epochs: 30,
            batch_size: 32,
            ortho_weight: 0.0,
            learning_rate: 3e-3,
            ..Default::default()
        };
        let (model, curve) = train_corrector(&data, &spec, &cfg).unwrap();
        assert!(curve.last().unwrap() < curve.first().unwrap());
        let test = Ensemble::default_for(1).generate(1, 50, 99).unwrap();
        let mean_res: f64 = test
            .iter()
            .map(|r: &DensityMatrix| {
                let rec = MeasurementRecord::measure(r, &[1, 2]).unwrap();
                orthogonality_residual(&rec, &model.predict(&rec).unwrap(), 1).unwrap()
            })
            .sum::<f64>()
            / 50.0;
        assert!(mean_res < 0.05, "mean residual {mean_res}");
    }
}
