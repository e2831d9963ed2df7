//! Fully connected network: affine layers with ReLU between them and a linear output.

use ndarray::{Array2, ArrayView2, Axis};
use qtomo_core::{Error, Result};
use rand::Rng;

use super::weights::{Grads, ModelWeights, TensorId};

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    layers: Vec<(TensorId, TensorId)>,
}

/// Activations kept from a forward pass: the input of every layer.
#[derive(Clone, Debug)]
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
}

impl Mlp {
    /// Registers `sizes.len() - 1` layers named `{prefix}.l{k}.w` / `.b`.
    pub fn new(weights: &mut ModelWeights, prefix: &str, sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, io)| {
                (
                    weights.register(&format!("{prefix}.l{k}.w"), io[0], io[1]),
                    weights.register(&format!("{prefix}.l{k}.b"), 1, io[1]),
                )
            })
            .collect();
        Self {
            sizes: sizes.to_vec(),
            layers,
        }
    }

    /// Rebinds to tensors already present in `weights` (e.g. after loading a checkpoint).
    pub fn bind(weights: &ModelWeights, prefix: &str, sizes: &[usize]) -> Result<Self> {
        let mut layers = Vec::new();
        for (k, io) in sizes.windows(2).enumerate() {
            let find = |suffix: &str, rows: usize, cols: usize| -> Result<TensorId> {
                let name = format!("{prefix}.l{k}.{suffix}");
                let id = weights
                    .find(&name)
                    .ok_or_else(|| Error::ShapeMismatch(format!("missing tensor {name}")))?;
                let s = weights.spec(id);
                if (s.rows, s.cols) != (rows, cols) {
                    return Err(Error::ShapeMismatch(format!(
                        "{name} is {}x{}, expected {rows}x{cols}",
                        s.rows, s.cols
                    )));
                }
                Ok(id)
            };
            layers.push((find("w", io[0], io[1])?, find("b", 1, io[1])?));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            layers,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn init(&self, weights: &mut ModelWeights, rng: &mut impl Rng) {
        for &(w, b) in &self.layers {
            weights.glorot(w, rng);
            weights.fill(b, 0.0);
        }
    }

    /// Zeroes the last layer so the initial output is exactly zero.
    pub fn zero_output_layer(&self, weights: &mut ModelWeights) {
        let &(w, b) = self.layers.last().unwrap();
        weights.fill(w, 0.0);
        weights.fill(b, 0.0);
    }

    /// Batched forward pass; rows of `input` are samples.
    pub fn forward(
        &self,
        weights: &ModelWeights,
        input: ArrayView2<'_, f64>,
    ) -> Result<(Array2<f64>, MlpCache)> {
        if input.ncols() != self.input_size() {
            return Err(Error::ShapeMismatch(format!(
                "input width {} for an MLP expecting {}",
                input.ncols(),
                self.input_size()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        let last = self.layers.len() - 1;
        for (k, &(w, b)) in self.layers.iter().enumerate() {
            let mut z = x.dot(&weights.view(w));
            z += &weights.view(b);
            if k < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(x);
            x = z;
        }
        Ok((x, MlpCache { inputs }))
    }

    /// Accumulates parameter gradients into `grads` and returns the input gradient.
    pub fn backward(
        &self,
        weights: &ModelWeights,
        cache: &MlpCache,
        output_grad: ArrayView2<'_, f64>,
        grads: &mut Grads,
    ) -> Result<Array2<f64>> {
        let batch = cache.inputs[0].nrows();
        if output_grad.dim() != (batch, self.output_size()) {
            return Err(Error::ShapeMismatch(format!(
                "output gradient {:?}, expected ({batch}, {})",
                output_grad.dim(),
                self.output_size()
            )));
        }
        let mut dz = output_grad.to_owned();
        for (k, &(w, b)) in self.layers.iter().enumerate().rev() {
            let x = &cache.inputs[k];
            grads.view_mut(w).scaled_add(1.0, &x.t().dot(&dz));
            grads
                .view_mut(b)
                .scaled_add(1.0, &dz.sum_axis(Axis(0)).insert_axis(Axis(0)));
            let mut dx = dz.dot(&weights.view(w).t());
            if k > 0 {
                // x is a ReLU output, so x > 0 exactly where the unit was active
                ndarray::Zip::from(&mut dx).and(x).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            dz = dx;
        }
        Ok(dz)
    }
}

/// Single-sample forward pass.
pub fn mlp_forward(
    mlp: &Mlp,
    weights: &ModelWeights,
    input: &[f64],
) -> Result<(Vec<f64>, MlpCache)> {
    let x = ArrayView2::from_shape((1, input.len()), input)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let (y, cache) = mlp.forward(weights, x)?;
    Ok((y.into_raw_vec_and_offset().0, cache))
}

/// Single-sample backward pass; returns the input gradient.
pub fn mlp_backward(
    mlp: &Mlp,
    weights: &ModelWeights,
    cache: &MlpCache,
    output_grad: &[f64],
    grads: &mut Grads,
) -> Result<Vec<f64>> {
    let g = ArrayView2::from_shape((1, output_grad.len()), output_grad)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    Ok(mlp
        .backward(weights, cache, g, grads)?
        .into_raw_vec_and_offset()
        .0)
}
