//! Stacked LSTM cell with explicit backpropagation through time.
//!
//! Layer k has one weight tensor W of shape (in_k + hs) × 4hs, whose first
//! in_k rows act on the layer input and the rest on the previous hidden
//! state, and one bias of width 4hs. Gate columns are ordered i, f, g, o.

use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use qtomo_core::{Error, Result};
use rand::Rng;

use super::weights::{Grads, ModelWeights, TensorId};

pub const FORGET_BIAS_INIT: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    input: usize,
    hidden: usize,
    layers: Vec<(TensorId, TensorId)>,
}

/// Hidden and cell state of every layer; rows are batch samples.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<Array2<f64>>,
    pub cell: Vec<Array2<f64>>,
}

impl LstmState {
    pub fn batch(&self) -> usize {
        self.hidden[0].nrows()
    }

    pub fn top(&self) -> &Array2<f64> {
        self.hidden.last().unwrap()
    }

    pub fn is_finite(&self) -> bool {
        self.hidden
            .iter()
            .chain(&self.cell)
            .all(|a| a.iter().all(|v| v.is_finite()))
    }

    /// Keeps only the listed batch rows.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let pick = |a: &Array2<f64>| a.select(Axis(0), rows);
        Self {
            hidden: self.hidden.iter().map(pick).collect(),
            cell: self.cell.iter().map(pick).collect(),
        }
    }
}

/// Gradient with respect to an [`LstmState`].
#[derive(Clone, Debug)]
pub struct StateGrad {
    pub hidden: Vec<Array2<f64>>,
    pub cell: Vec<Array2<f64>>,
}

#[derive(Clone, Debug)]
struct LayerCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    /// Activated gates i, f, g, o.
    gates: Array2<f64>,
    tanh_c: Array2<f64>,
}

#[derive(Clone, Debug)]
pub struct LstmStepCache {
    layers: Vec<LayerCache>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Lstm {
    pub fn new(
        weights: &mut ModelWeights,
        prefix: &str,
        input: usize,
        hidden: usize,
        layers: usize,
    ) -> Self {
        assert!(layers >= 1);
        let layers = (0..layers)
            .map(|k| {
                let fan_in = if k == 0 { input } else { hidden };
                (
                    weights.register(&format!("{prefix}.l{k}.w"), fan_in + hidden, 4 * hidden),
                    weights.register(&format!("{prefix}.l{k}.b"), 1, 4 * hidden),
                )
            })
            .collect();
        Self {
            input,
            hidden,
            layers,
        }
    }

    pub fn bind(
        weights: &ModelWeights,
        prefix: &str,
        input: usize,
        hidden: usize,
        layers: usize,
    ) -> Result<Self> {
        let mut ids = Vec::new();
        for k in 0..layers {
            let fan_in = if k == 0 { input } else { hidden };
            let get = |suffix: &str, rows: usize, cols: usize| -> Result<TensorId> {
                let name = format!("{prefix}.l{k}.{suffix}");
                let id = weights
                    .find(&name)
                    .ok_or_else(|| Error::ShapeMismatch(format!("missing tensor {name}")))?;
                let sp = weights.spec(id);
                if (sp.rows, sp.cols) != (rows, cols) {
                    return Err(Error::ShapeMismatch(format!("{name} has the wrong shape")));
                }
                Ok(id)
            };
            ids.push((
                get("w", fan_in + hidden, 4 * hidden)?,
                get("b", 1, 4 * hidden)?,
            ));
        }
        Ok(Self {
            input,
            hidden,
            layers: ids,
        })
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Glorot-uniform weights over (fan_in + hs, 4hs), zero biases except the forget gate.
    pub fn init(&self, weights: &mut ModelWeights, rng: &mut impl Rng) {
        let hs = self.hidden;
        for &(w, b) in &self.layers {
            weights.glorot(w, rng);
            weights.fill(b, 0.0);
            weights
                .view_mut(b)
                .slice_mut(s![.., hs..2 * hs])
                .fill(FORGET_BIAS_INIT);
        }
    }

    pub fn zero_state(&self, batch: usize) -> LstmState {
        let z = || Array2::zeros((batch, self.hidden));
        LstmState {
            hidden: (0..self.layers.len()).map(|_| z()).collect(),
            cell: (0..self.layers.len()).map(|_| z()).collect(),
        }
    }

    pub fn zero_grad(&self, batch: usize) -> StateGrad {
        let s = self.zero_state(batch);
        StateGrad {
            hidden: s.hidden,
            cell: s.cell,
        }
    }

    /// h_prev·W_h + b for the first layer; shared by every candidate input
    /// that is stepped from the same state.
    pub fn recurrent_base(&self, weights: &ModelWeights, state: &LstmState) -> Array2<f64> {
        let (w, b) = self.layers[0];
        let wv = weights.view(w);
        let mut base = state.hidden[0].dot(&wv.slice(s![self.input.., ..]));
        base += &weights.view(b);
        base
    }

    fn cell(
        &self,
        z: Array2<f64>,
        x: Array2<f64>,
        h_prev: &Array2<f64>,
        c_prev: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>, LayerCache) {
        let hs = self.hidden;
        let mut gates = z;
        gates.slice_mut(s![.., ..2 * hs]).mapv_inplace(sigmoid);
        gates
            .slice_mut(s![.., 2 * hs..3 * hs])
            .mapv_inplace(f64::tanh);
        gates.slice_mut(s![.., 3 * hs..]).mapv_inplace(sigmoid);
        let mut c = Array2::zeros(c_prev.raw_dim());
        Zip::from(&mut c)
            .and(c_prev)
            .and(gates.slice(s![.., ..hs]))
            .and(gates.slice(s![.., hs..2 * hs]))
            .and(gates.slice(s![.., 2 * hs..3 * hs]))
            .for_each(|c, &cp, &i, &f, &g| *c = f * cp + i * g);
        let tanh_c = c.mapv(f64::tanh);
        let h = &gates.slice(s![.., 3 * hs..]) * &tanh_c;
        let cache = LayerCache {
            x,
            h_prev: h_prev.clone(),
            c_prev: c_prev.clone(),
            gates,
            tanh_c,
        };
        (h, c, cache)
    }

    /// One time step for the whole batch.
    pub fn step(
        &self,
        weights: &ModelWeights,
        state: &LstmState,
        x: ArrayView2<'_, f64>,
    ) -> Result<(LstmState, LstmStepCache)> {
        let base = self.recurrent_base(weights, state);
        self.step_with_base(weights, state, x, &base)
    }

    /// As [`Self::step`] with the first layer's recurrent term precomputed.
    pub fn step_with_base(
        &self,
        weights: &ModelWeights,
        state: &LstmState,
        x: ArrayView2<'_, f64>,
        base: &Array2<f64>,
    ) -> Result<(LstmState, LstmStepCache)> {
        if x.ncols() != self.input || x.nrows() != state.batch() {
            return Err(Error::ShapeMismatch(format!(
                "LSTM input {:?}, expected ({}, {})",
                x.dim(),
                state.batch(),
                self.input
            )));
        }
        let mut hidden = Vec::with_capacity(self.layers.len());
        let mut cell = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut input = x.to_owned();
        for (k, &(w, b)) in self.layers.iter().enumerate() {
            let wv = weights.view(w);
            let fan_in = input.ncols();
            let z = if k == 0 {
                input.dot(&wv.slice(s![..fan_in, ..])) + base
            } else {
                let mut z = input.dot(&wv.slice(s![..fan_in, ..]));
                z += &state.hidden[k].dot(&wv.slice(s![fan_in.., ..]));
                z += &weights.view(b);
                z
            };
            let (h, c, cache) = self.cell(z, input, &state.hidden[k], &state.cell[k]);
            input = h.clone();
            hidden.push(h);
            cell.push(c);
            caches.push(cache);
        }
        Ok((LstmState { hidden, cell }, LstmStepCache { layers: caches }))
    }

    /// Backward through one step. `d_top` is the loss gradient w.r.t. the new
    /// top-layer hidden state from the output head; `d_next` is the gradient
    /// w.r.t. the new state arriving from later steps. Returns the gradients
    /// w.r.t. the step input and the previous state.
    pub fn step_backward(
        &self,
        weights: &ModelWeights,
        cache: &LstmStepCache,
        d_top: Option<ArrayView2<'_, f64>>,
        d_next: &StateGrad,
        grads: &mut Grads,
    ) -> (Array2<f64>, StateGrad) {
        let hs = self.hidden;
        let n = self.layers.len();
        let mut d_prev_h = vec![Array2::zeros((0, 0)); n];
        let mut d_prev_c = vec![Array2::zeros((0, 0)); n];
        let mut dh_from_above: Option<Array2<f64>> = d_top.map(|d| d.to_owned());
        let mut dx_out = Array2::zeros((0, 0));
        for k in (0..n).rev() {
            let lc = &cache.layers[k];
            let (w, b) = self.layers[k];
            let mut dh = d_next.hidden[k].clone();
            if let Some(extra) = dh_from_above.take() {
                dh += &extra;
            }
            let gates = &lc.gates;
            let (i, f, g, o) = (
                gates.slice(s![.., ..hs]),
                gates.slice(s![.., hs..2 * hs]),
                gates.slice(s![.., 2 * hs..3 * hs]),
                gates.slice(s![.., 3 * hs..]),
            );
            let mut dc = d_next.cell[k].clone();
            Zip::from(&mut dc)
                .and(&dh)
                .and(&o)
                .and(&lc.tanh_c)
                .for_each(|dc, &dh, &o, &t| *dc += dh * o * (1.0 - t * t));
            let mut dz = Array2::zeros(gates.raw_dim());
            {
                let (mut dzi, rest) = dz.view_mut().split_at(Axis(1), hs);
                let (mut dzf, rest) = rest.split_at(Axis(1), hs);
                let (mut dzg, mut dzo) = rest.split_at(Axis(1), hs);
                Zip::from(&mut dzi)
                    .and(&dc)
                    .and(&i)
                    .and(&g)
                    .for_each(|d, &dc, &i, &g| *d = dc * g * i * (1.0 - i));
                Zip::from(&mut dzf)
                    .and(&dc)
                    .and(&f)
                    .and(&lc.c_prev)
                    .for_each(|d, &dc, &f, &cp| *d = dc * cp * f * (1.0 - f));
                Zip::from(&mut dzg)
                    .and(&dc)
                    .and(&i)
                    .and(&g)
                    .for_each(|d, &dc, &i, &g| *d = dc * i * (1.0 - g * g));
                Zip::from(&mut dzo)
                    .and(&dh)
                    .and(&o)
                    .and(&lc.tanh_c)
                    .for_each(|d, &dh, &o, &t| *d = dh * t * o * (1.0 - o));
            }
            let fan_in = lc.x.ncols();
            {
                let mut gw = grads.view_mut(w);
                gw.slice_mut(s![..fan_in, ..])
                    .scaled_add(1.0, &lc.x.t().dot(&dz));
                gw.slice_mut(s![fan_in.., ..])
                    .scaled_add(1.0, &lc.h_prev.t().dot(&dz));
            }
            grads
                .view_mut(b)
                .scaled_add(1.0, &dz.sum_axis(Axis(0)).insert_axis(Axis(0)));
            let wv = weights.view(w);
            let dx = dz.dot(&wv.slice(s![..fan_in, ..]).t());
            d_prev_h[k] = dz.dot(&wv.slice(s![fan_in.., ..]).t());
            d_prev_c[k] = &dc * &f;
            if k > 0 {
                dh_from_above = Some(dx);
            } else {
                dx_out = dx;
            }
        }
        (
            dx_out,
            StateGrad {
                hidden: d_prev_h,
                cell: d_prev_c,
            },
        )
    }
}
