//! Training data in the forms the models consume.

use ndarray::Array2;
use qtomo_core::{tomography, ComplexMatrix, DensityMatrix, Error, Result};

/// States stored as Pauli coefficients x_μ = Tr(Γ_μ ρ)/2^N, full outcome
/// vectors m = B x, and the two-channel (real, imaginary) flattening of ρ.
#[derive(Clone, Debug)]
pub struct StateTable {
    pub n_qubits: usize,
    pub states: Vec<ComplexMatrix>,
    pub coeffs: Array2<f64>,
    pub outcomes: Array2<f64>,
    pub channels: Array2<f64>,
}

/// Real parts row-major, then imaginary parts row-major.
pub fn to_channels(m: &ComplexMatrix) -> Vec<f64> {
    m.as_slice()
        .iter()
        .map(|z| z.re)
        .chain(m.as_slice().iter().map(|z| z.im))
        .collect()
}

pub fn from_channels(v: &[f64], dim: usize) -> ComplexMatrix {
    let d2 = dim * dim;
    assert_eq!(v.len(), 2 * d2);
    ComplexMatrix::from_fn(dim, dim, |r, c| {
        qtomo_core::C64::new(v[r * dim + c], v[d2 + r * dim + c])
    })
}

/// Projects a two-channel matrix onto its Hermitian part in place. The map is
/// an orthogonal projection, so it is also its own adjoint for gradients.
pub fn hermitize_channels(v: &mut [f64], dim: usize) {
    let d2 = dim * dim;
    for r in 0..dim {
        for c in r..dim {
            let (a, b) = (r * dim + c, c * dim + r);
            let re = 0.5 * (v[a] + v[b]);
            v[a] = re;
            v[b] = re;
            let im = 0.5 * (v[d2 + a] - v[d2 + b]);
            v[d2 + a] = im;
            v[d2 + b] = -im;
        }
    }
}

impl StateTable {
    pub fn new(states: &[DensityMatrix]) -> Result<Self> {
        let n_qubits = states
            .first()
            .ok_or_else(|| Error::InvalidConfig("empty state set".into()))?
            .n_qubits();
        let tomo = tomography(n_qubits)?;
        let size = tomo.size();
        let d = tomo.dim();
        let count = states.len();
        let mut coeffs = Array2::zeros((count, size));
        let mut outcomes = Array2::zeros((count, size));
        let mut channels = Array2::zeros((count, 2 * d * d));
        let all: Vec<usize> = (1..=size).collect();
        for (i, s) in states.iter().enumerate() {
            if s.n_qubits() != n_qubits {
                return Err(Error::ShapeMismatch(format!(
                    "state {i} has {} qubits, expected {n_qubits}",
                    s.n_qubits()
                )));
            }
            let x = tomo.paulis.coefficients(s.matrix());
            let m = tomo.outcomes_from_coefficients(&x, &all);
            coeffs.row_mut(i).assign(&ndarray::ArrayView1::from(&x));
            outcomes.row_mut(i).assign(&ndarray::ArrayView1::from(&m));
            channels
                .row_mut(i)
                .assign(&ndarray::ArrayView1::from(&to_channels(s.matrix())));
        }
        Ok(Self {
            n_qubits,
            states: states.iter().map(|s| s.matrix().clone()).collect(),
            coeffs,
            outcomes,
            channels,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn size(&self) -> usize {
        1 << (2 * self.n_qubits)
    }
}
