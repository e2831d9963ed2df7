//! Recurrent selector/reconstructor pair.
//!
//! Both networks consume the same step input (two-channel Π_l, m_l). The
//! reconstructor emits ρ_l after every step; the selector proposes the
//! operator for the next step. Every episode starts from Π₁ = |0…0⟩⟨0…0|.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use qtomo_core::{tomography, ComplexMatrix, DensityMatrix, Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::custom::ProductProjector;
use super::data::{from_channels, hermitize_channels, to_channels, StateTable};
use super::encode::basis_features;
use crate::nn::gradcheck::{check_gradients, GradCheck, GradCheckReport};
use crate::nn::loss::{masked_softmax, row_norm_loss};
use crate::nn::lstm::LstmStepCache;
use crate::nn::mlp::MlpCache;
use crate::nn::{
    Adam, Checkpoint, Grads, Lstm, LstmState, Mlp, ModelWeights, TrainConfig, TrainingCurve,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SelectionMode {
    /// No selector: a seeded random non-repeating index stream.
    Random,
    /// Selector picks unused indices of the basis set.
    Predefined,
    /// Selector emits a product projector.
    Custom,
}

impl SelectionMode {
    pub fn kind_tag(self) -> &'static str {
        match self {
            SelectionMode::Random => "LSTM_RND",
            SelectionMode::Predefined => "LSTM_PRE",
            SelectionMode::Custom => "LSTM_CUS",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "LSTM_RND" => Some(Self::Random),
            "LSTM_PRE" => Some(Self::Predefined),
            "LSTM_CUS" => Some(Self::Custom),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SelectionMode::Random => "random",
            SelectionMode::Predefined => "predefined",
            SelectionMode::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(Self::Random),
            "predefined" => Some(Self::Predefined),
            "custom" => Some(Self::Custom),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmArch {
    pub hidden: usize,
    pub layers: usize,
}

impl LstmArch {
    /// 256 units; one layer up to two qubits, two layers beyond.
    pub fn default_for(n_qubits: usize) -> Self {
        Self {
            hidden: 256,
            layers: if n_qubits <= 2 { 1 } else { 2 },
        }
    }
}

/// Probabilities over the basis with used entries masked out, and the
/// argmax (lowest index on ties), 1-based.
pub fn select_from_logits(logits: &[f64], used: &[bool]) -> Result<(Vec<f64>, usize)> {
    let p = masked_softmax(logits, used).ok_or(Error::AllUsed)?;
    let mut best = 0;
    for (k, &v) in p.iter().enumerate() {
        if used[best] || (!used[k] && v > p[best]) {
            best = k;
        }
    }
    Ok((p, best + 1))
}

/// One reconstruction episode.
#[derive(Clone, Debug)]
pub struct Episode {
    /// Selected 1-based indices (predefined and random modes).
    pub indices: Option<Vec<usize>>,
    pub operators: Vec<ComplexMatrix>,
    pub outcomes: Vec<f64>,
    /// ρ_l after each step, Hermitian but otherwise raw.
    pub reconstructions: Vec<ComplexMatrix>,
    /// Selector distributions P^l for l ≥ 2 (predefined mode).
    pub probabilities: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct SelectorReconstructor {
    pub mode: SelectionMode,
    pub n_qubits: usize,
    pub arch: LstmArch,
    pub weights: ModelWeights,
    lstm_r: Lstm,
    head_r: Mlp,
    selector: Option<(Lstm, Mlp)>,
}

/// Forward record of one step for the whole batch.
struct StepTrace {
    r_cache: LstmStepCache,
    r_head: MlpCache,
    recon: Array2<f64>,
    s: Option<(LstmStepCache, MlpCache, Array2<f64>)>,
}

impl SelectorReconstructor {
    pub fn new(mode: SelectionMode, n_qubits: usize, arch: LstmArch, seed: u64) -> Result<Self> {
        tomography(n_qubits)?;
        if arch.hidden == 0 || arch.layers == 0 {
            return Err(Error::InvalidConfig(
                "LSTM needs hidden units and layers".into(),
            ));
        }
        let mut weights = ModelWeights::new();
        let (lstm_r, head_r, selector) = Self::register(&mut weights, mode, n_qubits, arch);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        lstm_r.init(&mut weights, &mut rng);
        head_r.init(&mut weights, &mut rng);
        // start the reconstruction head at the maximally mixed state
        let d = 1 << n_qubits;
        let bias = weights.find("rec.head.l0.b").expect("registered");
        for k in 0..d {
            weights.view_mut(bias)[[0, k * d + k]] = 1.0 / d as f64;
        }
        if let Some((l, h)) = &selector {
            l.init(&mut weights, &mut rng);
            h.init(&mut weights, &mut rng);
        }
        Ok(Self {
            mode,
            n_qubits,
            arch,
            weights,
            lstm_r,
            head_r,
            selector,
        })
    }

    fn input_size(n: usize) -> usize {
        2 * (1 << (2 * n)) + 1
    }

    fn selector_out(mode: SelectionMode, n: usize) -> Option<usize> {
        match mode {
            SelectionMode::Random => None,
            SelectionMode::Predefined => Some(1 << (2 * n)),
            SelectionMode::Custom => Some(4 * n),
        }
    }

    fn register(
        weights: &mut ModelWeights,
        mode: SelectionMode,
        n: usize,
        arch: LstmArch,
    ) -> (Lstm, Mlp, Option<(Lstm, Mlp)>) {
        let input = Self::input_size(n);
        let d = 1 << n;
        let lstm_r = Lstm::new(weights, "rec.lstm", input, arch.hidden, arch.layers);
        let head_r = Mlp::new(weights, "rec.head", &[arch.hidden, 2 * d * d]);
        let selector = Self::selector_out(mode, n).map(|out| {
            (
                Lstm::new(weights, "sel.lstm", input, arch.hidden, arch.layers),
                Mlp::new(weights, "sel.head", &[arch.hidden, out]),
            )
        });
        (lstm_r, head_r, selector)
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn size(&self) -> usize {
        1 << (2 * self.n_qubits)
    }

    /// (reconstructor, selector) parameter counts.
    pub fn parameter_counts(&self) -> (usize, usize) {
        let count = |prefix: &str| {
            self.weights
                .specs()
                .iter()
                .filter(|s| s.name.starts_with(prefix))
                .map(|s| s.len())
                .sum()
        };
        (count("rec."), count("sel."))
    }

    fn r_step(
        &self,
        state: &LstmState,
        x: ArrayView2<'_, f64>,
    ) -> Result<(LstmState, LstmStepCache, MlpCache, Array2<f64>)> {
        let (next, cache) = self.lstm_r.step(&self.weights, state, x)?;
        let (mut out, head) = self.head_r.forward(&self.weights, next.top().view())?;
        let d = self.dim();
        for mut row in out.rows_mut() {
            hermitize_channels(row.as_slice_mut().expect("row-major"), d);
        }
        Ok((next, cache, head, out))
    }

    fn s_step(
        &self,
        state: &LstmState,
        x: ArrayView2<'_, f64>,
    ) -> Result<(LstmState, LstmStepCache, MlpCache, Array2<f64>)> {
        let (lstm, head) = self.selector.as_ref().expect("selector present");
        let (next, cache) = lstm.step(&self.weights, state, x)?;
        let (out, hc) = head.forward(&self.weights, next.top().view())?;
        Ok((next, cache, hc, out))
    }

    fn basis_input(&self, data: &StateTable, rows: &[usize], nus: &[usize]) -> Result<Array2<f64>> {
        let feats = basis_features(self.n_qubits)?;
        let w = Self::input_size(self.n_qubits);
        let mut x = Array2::zeros((rows.len(), w));
        for (k, (&i, &nu)) in rows.iter().zip(nus).enumerate() {
            let mut row = x.row_mut(k);
            let row = row.as_slice_mut().unwrap();
            row[..w - 1].copy_from_slice(&feats[nu - 1]);
            row[w - 1] = data.outcomes[[i, nu - 1]];
        }
        Ok(x)
    }

    fn custom_input(&self, projs: &[ProductProjector], ms: &[f64]) -> Array2<f64> {
        let w = Self::input_size(self.n_qubits);
        let mut x = Array2::zeros((projs.len(), w));
        for (k, (p, &m)) in projs.iter().zip(ms).enumerate() {
            let mut row = x.row_mut(k);
            let row = row.as_slice_mut().unwrap();
            row[..w - 1].copy_from_slice(&to_channels(&p.projector));
            row[w - 1] = m;
        }
        x
    }

    fn check_steps(&self, steps: usize) -> Result<()> {
        if steps == 0 {
            return Err(Error::InvalidConfig(
                "episodes need at least one step".into(),
            ));
        }
        if self.mode != SelectionMode::Custom && steps > self.size() {
            return Err(Error::InvalidConfig(format!(
                "{steps} steps exceed the {} basis operators",
                self.size()
            )));
        }
        Ok(())
    }

    /// Per-sample random index streams: 1, then a shuffled remainder.
    fn random_streams(&self, count: usize, steps: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
        (0..count)
            .map(|_| {
                let mut rest: Vec<usize> = (2..=self.size()).collect();
                rest.shuffle(rng);
                std::iter::once(1).chain(rest).take(steps).collect()
            })
            .collect()
    }

    /// Runs `steps`-step episodes on every state of `data`. `seed` drives
    /// the random mode's index streams.
    pub fn run_episodes(&self, data: &StateTable, steps: usize, seed: u64) -> Result<Vec<Episode>> {
        self.check_steps(steps)?;
        if data.n_qubits != self.n_qubits {
            return Err(Error::ShapeMismatch(format!(
                "{}-qubit data for a {}-qubit model",
                data.n_qubits, self.n_qubits
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let streams = (self.mode == SelectionMode::Random)
            .then(|| self.random_streams(data.len(), steps, &mut rng));
        let rows: Vec<usize> = (0..data.len()).collect();
        let mut out = Vec::with_capacity(data.len());
        for chunk in rows.chunks(256) {
            out.extend(self.episode_chunk(data, chunk, steps, streams.as_deref())?);
        }
        Ok(out)
    }

    fn episode_chunk(
        &self,
        data: &StateTable,
        rows: &[usize],
        steps: usize,
        streams: Option<&[Vec<usize>]>,
    ) -> Result<Vec<Episode>> {
        let tomo = tomography(self.n_qubits)?;
        let (b, d, size) = (rows.len(), self.dim(), self.size());
        let mut eps: Vec<Episode> = (0..b)
            .map(|_| Episode {
                indices: (self.mode != SelectionMode::Custom).then(Vec::new),
                operators: Vec::new(),
                outcomes: Vec::new(),
                reconstructions: Vec::new(),
                probabilities: Vec::new(),
            })
            .collect();
        let mut st_r = self.lstm_r.zero_state(b);
        let mut st_s = self.selector.as_ref().map(|(l, _)| l.zero_state(b));
        let mut used = vec![vec![false; size]; b];
        let mut nus = vec![1usize; b];
        let mut projs: Vec<ProductProjector> = (0..b)
            .map(|_| ProductProjector::ground(self.n_qubits))
            .collect();
        for l in 0..steps {
            let x = match self.mode {
                SelectionMode::Custom => {
                    let ms: Vec<f64> = rows
                        .iter()
                        .zip(&projs)
                        .map(|(&i, p)| p.outcome(&data.states[i]).0)
                        .collect();
                    for ((e, p), &m) in eps.iter_mut().zip(&projs).zip(&ms) {
                        e.operators.push(p.projector.clone());
                        e.outcomes.push(m);
                    }
                    self.custom_input(&projs, &ms)
                }
                _ => {
                    if let Some(st) = streams {
                        for (k, &i) in rows.iter().enumerate() {
                            nus[k] = st[i][l];
                        }
                    }
                    for (k, (e, &i)) in eps.iter_mut().zip(rows).enumerate() {
                        used[k][nus[k] - 1] = true;
                        e.indices.as_mut().unwrap().push(nus[k]);
                        e.operators
                            .push(tomo.projectors.projectors[nus[k] - 1].clone());
                        e.outcomes.push(data.outcomes[[i, nus[k] - 1]]);
                    }
                    self.basis_input(data, rows, &nus)?
                }
            };
            let (next, _, _, recon) = self.r_step(&st_r, x.view())?;
            st_r = next;
            for (e, r) in eps.iter_mut().zip(recon.rows()) {
                e.reconstructions
                    .push(from_channels(r.as_slice().unwrap(), d));
            }
            if l + 1 == steps {
                break;
            }
            if let Some(state) = st_s.as_ref() {
                let (next, _, _, out) = self.s_step(state, x.view())?;
                st_s = Some(next);
                for (k, row) in out.rows().into_iter().enumerate() {
                    let row = row.as_slice().unwrap();
                    if self.mode == SelectionMode::Custom {
                        projs[k] = ProductProjector::new(row);
                    } else {
                        let (p, nu) = select_from_logits(row, &used[k])?;
                        eps[k].probabilities.push(p);
                        nus[k] = nu;
                    }
                }
            }
        }
        Ok(eps)
    }

    /// One forward/backward pass over a training batch. Accumulates the
    /// gradient into `grads` and returns (mean step-averaged reconstruction
    /// loss, mean selector cross-entropy).
    fn batch_gradient(
        &self,
        data: &StateTable,
        rows: &[usize],
        steps: usize,
        streams: Option<&[Vec<usize>]>,
        grads: &mut Grads,
    ) -> Result<(f64, f64)> {
        let (b, d, size) = (rows.len(), self.dim(), self.size());
        let target = data.channels.select(ndarray::Axis(0), rows);
        let mut st_r = self.lstm_r.zero_state(b);
        let mut st_s = self.selector.as_ref().map(|(l, _)| l.zero_state(b));
        let mut used = vec![vec![false; size]; b];
        let mut nus = vec![1usize; b];
        let mut projs: Vec<ProductProjector> = (0..b)
            .map(|_| ProductProjector::ground(self.n_qubits))
            .collect();
        // per step: custom projectors with ρψ, and selector output gradients
        let mut proj_trace: Vec<Vec<(ProductProjector, Vec<qtomo_core::C64>)>> = Vec::new();
        let mut d_sel: Vec<Option<Array2<f64>>> = Vec::new();
        let mut traces: Vec<StepTrace> = Vec::with_capacity(steps);
        let (mut loss, mut ce_total) = (0.0, 0.0);

        for l in 0..steps {
            let x = if self.mode == SelectionMode::Custom {
                let mut ms = Vec::with_capacity(b);
                let mut step_proj = Vec::with_capacity(b);
                for (&i, p) in rows.iter().zip(&projs) {
                    let (m, rho_psi) = p.outcome(&data.states[i]);
                    ms.push(m);
                    step_proj.push((p.clone(), rho_psi));
                }
                let x = self.custom_input(&projs, &ms);
                proj_trace.push(step_proj);
                x
            } else {
                if let Some(st) = streams {
                    for k in 0..b {
                        nus[k] = st[k][l];
                    }
                }
                for k in 0..b {
                    used[k][nus[k] - 1] = true;
                }
                self.basis_input(data, rows, &nus)?
            };
            let (next_r, r_cache, r_head, recon) = self.r_step(&st_r, x.view())?;
            st_r = next_r;
            let mut trace = StepTrace {
                r_cache,
                r_head,
                recon,
                s: None,
            };
            if l + 1 < steps {
                if let Some(state) = st_s.as_ref() {
                    let (next, sc, sh, out) = self.s_step(state, x.view())?;
                    st_s = Some(next);
                    match self.mode {
                        SelectionMode::Custom => {
                            for (k, row) in out.rows().into_iter().enumerate() {
                                projs[k] = ProductProjector::new(row.as_slice().unwrap());
                            }
                            d_sel.push(None);
                        }
                        SelectionMode::Predefined => {
                            let star = self.best_candidate(data, rows, &st_r, &used, &target)?;
                            let mut g = Array2::zeros((b, size));
                            let mut ps = Vec::with_capacity(b);
                            for (k, row) in out.rows().into_iter().enumerate() {
                                let (p, nu) =
                                    select_from_logits(row.as_slice().unwrap(), &used[k])?;
                                nus[k] = nu;
                                ps.push(p);
                            }
                            if let Some(star) = star {
                                // mean over takers, then over the steps - 1 selections
                                let takers: Vec<usize> =
                                    (0..b).filter(|&k| !used[k][star - 1]).collect();
                                let w = 1.0 / (takers.len() * (steps - 1)) as f64;
                                for &k in &takers {
                                    ce_total +=
                                        -ps[k][star - 1].max(crate::nn::loss::PROB_CLAMP).ln() * w;
                                    let mut row = g.row_mut(k);
                                    for (j, pj) in ps[k].iter().enumerate() {
                                        row[j] = pj * w;
                                    }
                                    row[star - 1] -= w;
                                }
                            }
                            d_sel.push(Some(g));
                        }
                        SelectionMode::Random => unreachable!(),
                    }
                    trace.s = Some((sc, sh, out));
                }
            }
            traces.push(trace);
        }

        // backward
        let scale = 1.0 / steps as f64;
        let mut d_r = self.lstm_r.zero_grad(b);
        let mut d_s = self.selector.as_ref().map(|(l, _)| l.zero_grad(b));
        let mut d_u_next: Option<Array2<f64>> = None;
        let w = Self::input_size(self.n_qubits);
        for l in (0..steps).rev() {
            let tr = &traces[l];
            let (lv, mut g) = row_norm_loss(tr.recon.view(), target.view(), 1.0);
            loss += lv * b as f64 * scale;
            g.mapv_inplace(|v| v * scale);
            for mut row in g.rows_mut() {
                hermitize_channels(row.as_slice_mut().unwrap(), d);
            }
            let d_top = self
                .head_r
                .backward(&self.weights, &tr.r_head, g.view(), grads)?;
            let (dx_r, next) = self.lstm_r.step_backward(
                &self.weights,
                &tr.r_cache,
                Some(d_top.view()),
                &d_r,
                grads,
            );
            d_r = next;
            let mut dx = dx_r;
            if let (Some((sc, sh, _)), Some((lstm_s, head_s))) = (&tr.s, &self.selector) {
                let d_out = match self.mode {
                    SelectionMode::Custom => d_u_next
                        .take()
                        .unwrap_or_else(|| Array2::zeros((b, 4 * self.n_qubits))),
                    _ => d_sel[l].clone().expect("selector gradient recorded"),
                };
                let d_top_s = head_s.backward(&self.weights, sh, d_out.view(), grads)?;
                let (dx_s, next) = lstm_s.step_backward(
                    &self.weights,
                    sc,
                    Some(d_top_s.view()),
                    d_s.as_ref().unwrap(),
                    grads,
                );
                d_s = Some(next);
                if self.mode == SelectionMode::Custom {
                    dx += &dx_s;
                }
            }
            if self.mode == SelectionMode::Custom && l > 0 {
                let mut du = Array2::zeros((b, 4 * self.n_qubits));
                for (k, (p, rho_psi)) in proj_trace[l].iter().enumerate() {
                    let row = dx.row(k);
                    let row = row.as_slice().unwrap();
                    let gamma = p.psi_gradient(&row[..w - 1], row[w - 1], rho_psi);
                    du.row_mut(k)
                        .assign(&ndarray::ArrayView1::from(&p.backward(&gamma)));
                }
                d_u_next = Some(du);
            }
        }
        Ok((loss / b as f64, ce_total))
    }

    /// Pushes every candidate index through the reconstructor from `st_r` and
    /// returns the one with the lowest batch-mean loss over the samples that
    /// have not used it (lowest index on ties).
    fn best_candidate(
        &self,
        data: &StateTable,
        rows: &[usize],
        st_r: &LstmState,
        used: &[Vec<bool>],
        target: &Array2<f64>,
    ) -> Result<Option<usize>> {
        let base = self.lstm_r.recurrent_base(&self.weights, st_r);
        let d = self.dim();
        let mut best: Option<(f64, usize)> = None;
        for nu in 1..=self.size() {
            let free: Vec<usize> = (0..rows.len()).filter(|&k| !used[k][nu - 1]).collect();
            if free.is_empty() {
                continue;
            }
            let x = self.basis_input(data, rows, &vec![nu; rows.len()])?;
            let (next, _) = self
                .lstm_r
                .step_with_base(&self.weights, st_r, x.view(), &base)?;
            let (mut out, _) = self.head_r.forward(&self.weights, next.top().view())?;
            let mut total = 0.0;
            for &k in &free {
                let mut row = out.row_mut(k);
                let row = row.as_slice_mut().unwrap();
                hermitize_channels(row, d);
                total += row
                    .iter()
                    .zip(target.row(k))
                    .map(|(a, t)| (a - t) * (a - t))
                    .sum::<f64>()
                    .sqrt();
            }
            let mean = total / free.len() as f64;
            if best.is_none_or(|(v, _)| mean < v) {
                best = Some((mean, nu));
            }
        }
        Ok(best.map(|(_, nu)| nu))
    }

    /// Next basis index from the selector given its state and the previous
    /// step input; returns the advanced state, P and the chosen index.
    pub fn select_next_predefined(
        &self,
        state: &LstmState,
        prev_op: &ComplexMatrix,
        prev_m: f64,
        used: &[bool],
    ) -> Result<(LstmState, Vec<f64>, usize)> {
        if self.mode != SelectionMode::Predefined {
            return Err(Error::UnsupportedCombination(format!(
                "{} model has no basis selector",
                self.mode.name()
            )));
        }
        let x = self.single_input(prev_op, prev_m);
        let (next, _, _, out) = self.s_step(state, x.view())?;
        let (p, nu) = select_from_logits(out.row(0).as_slice().unwrap(), used)?;
        Ok((next, p, nu))
    }

    /// Next custom projector from the selector.
    pub fn select_next_custom(
        &self,
        state: &LstmState,
        prev_op: &ComplexMatrix,
        prev_m: f64,
    ) -> Result<(LstmState, ProductProjector)> {
        if self.mode != SelectionMode::Custom {
            return Err(Error::UnsupportedCombination(format!(
                "{} model has no custom selector",
                self.mode.name()
            )));
        }
        let x = self.single_input(prev_op, prev_m);
        let (next, _, _, out) = self.s_step(state, x.view())?;
        Ok((next, ProductProjector::new(out.row(0).as_slice().unwrap())))
    }

    fn single_input(&self, op: &ComplexMatrix, m: f64) -> Array2<f64> {
        let mut v = to_channels(op);
        v.push(m);
        Array2::from_shape_vec((1, v.len()), v).expect("shape")
    }

    /// Zero selector state for a batch of one (None in random mode).
    pub fn selector_state(&self) -> Option<LstmState> {
        self.selector.as_ref().map(|(l, _)| l.zero_state(1))
    }

    pub fn to_checkpoint(
        &self,
        cfg: Option<&TrainConfig>,
        episode_len: Option<usize>,
    ) -> Checkpoint {
        let mut meta = BTreeMap::new();
        meta.insert("n_qubits".into(), self.n_qubits.to_string());
        meta.insert("hidden".into(), self.arch.hidden.to_string());
        meta.insert("layers".into(), self.arch.layers.to_string());
        if let Some(e) = episode_len {
            meta.insert("episode_len".into(), e.to_string());
        }
        if let Some(cfg) = cfg {
            cfg.to_meta(&mut meta);
        }
        Checkpoint {
            kind: self.mode.kind_tag().into(),
            meta,
            weights: self.weights.clone(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let mode = SelectionMode::from_tag(&ck.kind)
            .ok_or_else(|| Error::Format(format!("{} is not an LSTM checkpoint", ck.kind)))?;
        let n_qubits: usize = ck.meta_get("n_qubits")?;
        tomography(n_qubits)?;
        let arch = LstmArch {
            hidden: ck.meta_get("hidden")?,
            layers: ck.meta_get("layers")?,
        };
        let mut probe = ModelWeights::new();
        Self::register(&mut probe, mode, n_qubits, arch);
        if probe.specs().len() != ck.weights.specs().len()
            || probe
                .specs()
                .iter()
                .zip(ck.weights.specs())
                .any(|(a, b)| (&a.name, a.rows, a.cols) != (&b.name, b.rows, b.cols))
        {
            return Err(Error::Format(
                "checkpoint tensors do not match the architecture".into(),
            ));
        }
        let input = Self::input_size(n_qubits);
        let d = 1 << n_qubits;
        let lstm_r = Lstm::bind(&ck.weights, "rec.lstm", input, arch.hidden, arch.layers)?;
        let head_r = Mlp::bind(&ck.weights, "rec.head", &[arch.hidden, 2 * d * d])?;
        let selector = match Self::selector_out(mode, n_qubits) {
            Some(out) => Some((
                Lstm::bind(&ck.weights, "sel.lstm", input, arch.hidden, arch.layers)?,
                Mlp::bind(&ck.weights, "sel.head", &[arch.hidden, out])?,
            )),
            None => None,
        };
        Ok(Self {
            mode,
            n_qubits,
            arch,
            weights: ck.weights.clone(),
            lstm_r,
            head_r,
            selector,
        })
    }
}

/// Single-state episode.
pub fn lstm_reconstruct_episode(
    model: &SelectorReconstructor,
    rho: &DensityMatrix,
    steps: usize,
    seed: u64,
) -> Result<Episode> {
    let table = StateTable::new(std::slice::from_ref(rho))?;
    Ok(model.run_episodes(&table, steps, seed)?.remove(0))
}

#[derive(Clone, Debug)]
pub struct SelectorSpec {
    pub mode: SelectionMode,
    pub arch: LstmArch,
    /// Steps per training episode.
    pub episode_len: usize,
}

/// Trains the pair on step-averaged reconstruction loss; in predefined mode
/// the selector is trained by cross-entropy towards the best candidate.
pub fn train_selector_reconstructor(
    data: &StateTable,
    spec: &SelectorSpec,
    cfg: &TrainConfig,
) -> Result<(SelectorReconstructor, TrainingCurve)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = SelectorReconstructor::new(spec.mode, data.n_qubits, spec.arch, rng.random())?;
    let curve = fit_selector(&mut model, data, spec.episode_len, cfg, &mut rng)?;
    Ok((model, curve))
}

/// Continues training a loaded model; see `resume_corrector`.
pub fn resume_selector(
    model: &mut SelectorReconstructor,
    data: &StateTable,
    episode_len: usize,
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
    fit_selector(model, data, episode_len, cfg, &mut rng)
}

fn fit_selector(
    model: &mut SelectorReconstructor,
    data: &StateTable,
    episode_len: usize,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainingCurve> {
    model.check_steps(episode_len)?;
    let mut adam = Adam::new(cfg.adam(), model.weights.len());
    let mut grads = model.weights.zeros_like();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = TrainingCurve::default();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let (mut el, mut ea, mut batches) = (0.0, 0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let streams = (model.mode == SelectionMode::Random)
                .then(|| model.random_streams(batch.len(), episode_len, rng));
            grads.zero();
            let (l, a) =
                model.batch_gradient(data, batch, episode_len, streams.as_deref(), &mut grads)?;
            if let Some(c) = cfg.grad_clip {
                grads.clip_norm(c);
            }
            adam.step(&mut model.weights, &grads);
            el += l * batch.len() as f64;
            ea += a;
            batches += 1;
        }
        curve.epoch_loss.push(el / data.len() as f64);
        curve.epoch_aux.push(ea / batches as f64);
    }
    curve.steps = adam.steps_taken();
    Ok(curve)
}

/// Reconstruction after `m` steps for every state of `data`.
pub fn reconstructions_at(episodes: &[Episode], m: usize) -> Vec<ComplexMatrix> {
    episodes
        .iter()
        .map(|e| e.reconstructions[m - 1].clone())
        .collect()
}

/// Compares the full training gradient of a small random model (episode
/// loss, selector cross-entropy and, for custom operators, the path through
/// the emitted projectors) with central differences of the episode loss.
pub fn episode_gradient_check(
    mode: SelectionMode,
    n_qubits: usize,
    arch: LstmArch,
    steps: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let states = qtomo_core::Ensemble::default_for(n_qubits).generate(n_qubits, 3, seed + 1)?;
    let data = StateTable::new(&states)?;
    let rows: Vec<usize> = (0..data.len()).collect();
    let model = SelectorReconstructor::new(mode, n_qubits, arch, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let streams =
        (mode == SelectionMode::Random).then(|| model.random_streams(rows.len(), steps, &mut rng));
    let mut g = model.weights.zeros_like();
    model.batch_gradient(&data, &rows, steps, streams.as_deref(), &mut g)?;
    let loss = |w: &ModelWeights| {
        let mut probe = model.clone();
        probe.weights = w.clone();
        let mut scratch = probe.weights.zeros_like();
        probe
            .batch_gradient(&data, &rows, steps, streams.as_deref(), &mut scratch)
            .map(|r| r.0 + r.1)
            .unwrap_or(f64::NAN)
    };
    let mut weights = model.weights.clone();
    let cfg = GradCheck {
        samples: 300,
        ..Default::default()
    };
    Ok(check_gradients(
        &mut weights,
        g.flat(),
        loss,
        &cfg,
        &mut rng,
    ))
}
