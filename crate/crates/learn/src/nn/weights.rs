//! Named parameter tensors stored in one contiguous buffer.

use ndarray::{ArrayView2, ArrayViewMut2};
use qtomo_core::{Error, Result};
use rand::Rng;

/// Index of a tensor inside a [`ModelWeights`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// All trainable parameters of a model. Tensors are 2-D and row-major; the
/// flat view concatenates them in registration order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ModelWeights {
    specs: Vec<TensorSpec>,
    data: Vec<f64>,
}

impl ModelWeights {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a zero tensor and returns its id.
    pub fn register(&mut self, name: &str, rows: usize, cols: usize) -> TensorId {
        let offset = self.data.len();
        self.specs.push(TensorSpec {
            name: name.to_string(),
            rows,
            cols,
            offset,
        });
        self.data.resize(offset + rows * cols, 0.0);
        TensorId(self.specs.len() - 1)
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn spec(&self, id: TensorId) -> &TensorSpec {
        &self.specs[id.0]
    }

    pub fn find(&self, name: &str) -> Option<TensorId> {
        self.specs.iter().position(|s| s.name == name).map(TensorId)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Replaces every parameter from a flat vector laid out like [`Self::flat`].
    pub fn load_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "flat vector of {} values for {} parameters",
                values.len(),
                self.data.len()
            )));
        }
        self.data.copy_from_slice(values);
        Ok(())
    }

    pub fn view(&self, id: TensorId) -> ArrayView2<'_, f64> {
        let s = &self.specs[id.0];
        ArrayView2::from_shape((s.rows, s.cols), &self.data[s.range()]).expect("tensor shape")
    }

    pub fn view_mut(&mut self, id: TensorId) -> ArrayViewMut2<'_, f64> {
        let s = self.specs[id.0].clone();
        ArrayViewMut2::from_shape((s.rows, s.cols), &mut self.data[s.range()])
            .expect("tensor shape")
    }

    /// Zeroed buffer with the same layout, for gradients and optimizer moments.
    pub fn zeros_like(&self) -> Grads {
        Grads {
            specs: self.specs.clone(),
            data: vec![0.0; self.data.len()],
        }
    }

    /// Uniform ±√(6/(fan_in + fan_out)) using the tensor's rows and columns as fans.
    pub fn glorot(&mut self, id: TensorId, rng: &mut impl Rng) {
        let s = self.specs[id.0].clone();
        let limit = (6.0 / (s.rows + s.cols) as f64).sqrt();
        for v in &mut self.data[s.range()] {
            *v = rng.random_range(-limit..limit);
        }
    }

    pub fn fill(&mut self, id: TensorId, value: f64) {
        let s = self.specs[id.0].clone();
        self.data[s.range()].fill(value);
    }
}

/// Gradient buffer sharing the layout of a [`ModelWeights`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    specs: Vec<TensorSpec>,
    data: Vec<f64>,
}

impl Grads {
    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn view(&self, id: TensorId) -> ArrayView2<'_, f64> {
        let s = &self.specs[id.0];
        ArrayView2::from_shape((s.rows, s.cols), &self.data[s.range()]).expect("tensor shape")
    }

    pub fn view_mut(&mut self, id: TensorId) -> ArrayViewMut2<'_, f64> {
        let s = self.specs[id.0].clone();
        ArrayViewMut2::from_shape((s.rows, s.cols), &mut self.data[s.range()])
            .expect("tensor shape")
    }

    pub fn zero(&mut self) {
        self.data.fill(0.0);
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|g| *g *= k);
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Rescales so the global norm is at most `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f64) {
        let n = self.norm();
        if n > max_norm && n > 0.0 {
            self.scale(max_norm / n);
        }
    }
}
