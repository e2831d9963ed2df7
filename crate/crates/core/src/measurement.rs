//! Tomographic measurement sets built from the four-state single-qubit basis
//! {|0⟩, |1⟩, (|0⟩+|1⟩)/√2, (|0⟩−i|1⟩)/√2}, the Pauli operator basis, and the
//! matrix linking the two.
//!
//! Measurement indices `ν` are 1-based and enumerate multi-indices
//! `(i_1, …, i_N)` row-major with the first qubit most significant:
//! `ν = Σ_k i_k·4^(N−k) + 1`. Pauli products are ordered the same way over
//! `(j_1, …, j_N)` with single-qubit order (I, X, Y, Z).

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{kron, kron_vec, pseudoinverse, ComplexMatrix, C64, I, ONE, ZERO};
use crate::states::{DensityMatrix, MAX_QUBITS};

const IMAG_TOL: f64 = 1e-12;

pub fn james_states() -> [Vec<C64>; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [
        vec![ONE, ZERO],
        vec![ZERO, ONE],
        vec![C64::new(h, 0.0), C64::new(h, 0.0)],
        vec![C64::new(h, 0.0), C64::new(0.0, -h)],
    ]
}

/// Projectors |ψ⟩⟨ψ| of [`james_states`], written out so the ½ entries are exact.
pub fn james_basis() -> [ComplexMatrix; 4] {
    let h = C64::new(0.5, 0.0);
    let ih = C64::new(0.0, 0.5);
    [
        ComplexMatrix::from_vec(2, 2, vec![ONE, ZERO, ZERO, ZERO]).unwrap(),
        ComplexMatrix::from_vec(2, 2, vec![ZERO, ZERO, ZERO, ONE]).unwrap(),
        ComplexMatrix::from_vec(2, 2, vec![h, h, h, h]).unwrap(),
        ComplexMatrix::from_vec(2, 2, vec![h, ih, -ih, h]).unwrap(),
    ]
}

pub fn pauli_matrices() -> [ComplexMatrix; 4] {
    [
        ComplexMatrix::identity(2),
        ComplexMatrix::from_vec(2, 2, vec![ZERO, ONE, ONE, ZERO]).unwrap(),
        ComplexMatrix::from_vec(2, 2, vec![ZERO, -I, I, ZERO]).unwrap(),
        ComplexMatrix::from_vec(2, 2, vec![ONE, ZERO, ZERO, -ONE]).unwrap(),
    ]
}

/// The 4×4 table Tr(μ_i σ_j); its N-fold Kronecker power is the full tomography matrix.
pub fn single_qubit_table() -> ComplexMatrix {
    let mus = james_basis();
    let sigmas = pauli_matrices();
    ComplexMatrix::from_fn(4, 4, |i, j| mus[i].trace_product(&sigmas[j]).unwrap())
}

/// Base-4 digits of a 0-based index, most significant first.
pub fn multi_index(index0: usize, n_qubits: usize) -> Vec<usize> {
    (0..n_qubits)
        .map(|k| (index0 >> (2 * (n_qubits - 1 - k))) & 3)
        .collect()
}

fn check_qubits(n: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "n_qubits must be in 1..={MAX_QUBITS}, got {n}"
        )))
    }
}

#[derive(Clone, Debug)]
pub struct ProjectorSet {
    pub n_qubits: usize,
    pub states: Vec<Vec<C64>>,
    pub projectors: Vec<ComplexMatrix>,
    pub indices: Vec<Vec<usize>>,
}

impl ProjectorSet {
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let singles = james_states();
        let single_projectors = james_basis();
        let count = 1 << (2 * n_qubits);
        let mut states = Vec::with_capacity(count);
        let mut indices = Vec::with_capacity(count);
        let mut projectors = Vec::with_capacity(count);
        for nu0 in 0..count {
            let idx = multi_index(nu0, n_qubits);
            let psi = idx.iter().skip(1).fold(singles[idx[0]].clone(), |acc, &i| {
                kron_vec(&acc, &singles[i])
            });
            let proj = idx
                .iter()
                .skip(1)
                .fold(single_projectors[idx[0]].clone(), |acc, &i| {
                    kron(&acc, &single_projectors[i])
                });
            states.push(psi);
            projectors.push(proj);
            indices.push(idx);
        }
        Ok(Self {
            n_qubits,
            states,
            projectors,
            indices,
        })
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Projector for 1-based index `nu`.
    pub fn projector(&self, nu: usize) -> Result<&ComplexMatrix> {
        self.check_index(nu)?;
        Ok(&self.projectors[nu - 1])
    }

    pub fn check_index(&self, nu: usize) -> Result<()> {
        if nu == 0 || nu > self.len() {
            Err(Error::IndexOutOfRange {
                index: nu,
                max: self.len(),
            })
        } else {
            Ok(())
        }
    }

    pub fn check_subset(&self, subset: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.len()];
        for &nu in subset {
            self.check_index(nu)?;
            if std::mem::replace(&mut seen[nu - 1], true) {
                return Err(Error::DuplicateIndex(nu));
            }
        }
        Ok(())
    }
}

pub fn projector_set(n_qubits: usize) -> Result<ProjectorSet> {
    ProjectorSet::new(n_qubits)
}

#[derive(Clone, Debug)]
pub struct PauliBasis {
    pub n_qubits: usize,
    pub gammas: Vec<ComplexMatrix>,
}

impl PauliBasis {
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let sigmas = pauli_matrices();
        let gammas = (0..1 << (2 * n_qubits))
            .map(|mu0| {
                let idx = multi_index(mu0, n_qubits);
                idx.iter()
                    .skip(1)
                    .fold(sigmas[idx[0]].clone(), |acc, &j| kron(&acc, &sigmas[j]))
            })
            .collect();
        Ok(Self { n_qubits, gammas })
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    /// Σ_μ x_μ Γ_μ.
    pub fn synthesize(&self, coeffs: &[f64]) -> ComplexMatrix {
        assert_eq!(coeffs.len(), self.len(), "coefficient count");
        let d = 1 << self.n_qubits;
        let mut out = ComplexMatrix::zeros(d, d);
        for (g, &x) in self.gammas.iter().zip(coeffs) {
            if x == 0.0 {
                continue;
            }
            for (o, z) in out.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *o += z * x;
            }
        }
        out
    }

    /// Real coefficients x_μ = Tr(Γ_μ ρ)/2^N of a Hermitian matrix.
    pub fn coefficients(&self, m: &ComplexMatrix) -> Vec<f64> {
        let d = (1 << self.n_qubits) as f64;
        self.gammas
            .iter()
            .map(|g| g.trace_product(m).expect("matching dims").re / d)
            .collect()
    }
}

pub fn pauli_basis(n_qubits: usize) -> Result<PauliBasis> {
    PauliBasis::new(n_qubits)
}

/// m_ν = Tr(Π_ν ρ) for every projector in the set.
pub fn outcomes(rho: &DensityMatrix, pset: &ProjectorSet) -> Result<Vec<f64>> {
    outcomes_raw(rho.matrix(), pset)
}

pub fn outcomes_raw(rho: &ComplexMatrix, pset: &ProjectorSet) -> Result<Vec<f64>> {
    if rho.rows() != pset.dim() || rho.cols() != pset.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} state against {}-qubit projectors",
            rho.rows(),
            rho.cols(),
            pset.n_qubits
        )));
    }
    pset.states
        .iter()
        .map(|psi| expectation(rho, psi))
        .collect()
}

/// ⟨ψ|A|ψ⟩ for Hermitian A, after checking the imaginary residue.
pub fn expectation(a: &ComplexMatrix, psi: &[C64]) -> Result<f64> {
    let av = a.matvec(psi)?;
    let z: C64 = psi.iter().zip(&av).map(|(p, v)| p.conj() * v).sum();
    if z.im.abs() > IMAG_TOL * a.frobenius_norm().max(1.0) {
        return Err(Error::NotHermitian {
            deviation: z.im.abs(),
        });
    }
    Ok(z.re)
}

/// B_νμ = Tr(Π_ν Γ_μ), restricted to the rows in `subset` (1-based) when given.
pub fn b_matrix(pset: &ProjectorSet, subset: Option<&[usize]>) -> Result<ComplexMatrix> {
    let paulis = PauliBasis::new(pset.n_qubits)?;
    let rows: Vec<usize> = match subset {
        Some(s) => {
            pset.check_subset(s)?;
            s.iter().map(|nu| nu - 1).collect()
        }
        None => (0..pset.len()).collect(),
    };
    let mut out = ComplexMatrix::zeros(rows.len(), paulis.len());
    for (r, &nu0) in rows.iter().enumerate() {
        for (c, g) in paulis.gammas.iter().enumerate() {
            let z = pset.projectors[nu0].trace_product(g)?;
            debug_assert!(z.im.abs() <= IMAG_TOL);
            out[(r, c)] = C64::new(z.re, 0.0);
        }
    }
    Ok(out)
}

/// G_νν' = Tr(Π_ν Π_ν').
pub fn gramian(pset: &ProjectorSet) -> ComplexMatrix {
    let n = pset.len();
    ComplexMatrix::from_fn(n, n, |a, b| {
        let overlap: C64 = pset.states[a]
            .iter()
            .zip(&pset.states[b])
            .map(|(x, y)| x.conj() * y)
            .sum();
        C64::new(overlap.norm_sqr(), 0.0)
    })
}

/// Per-qubit-count cache of the measurement geometry in real form.
#[derive(Debug)]
pub struct Tomography {
    pub n_qubits: usize,
    pub projectors: ProjectorSet,
    pub paulis: PauliBasis,
    /// Full 4^N × 4^N tomography matrix, row-major, real.
    pub b_full: Vec<f64>,
    /// Its inverse (4^N × 4^N, μ × ν), row-major.
    pub b_inv: Vec<f64>,
}

static TOMOGRAPHY: [OnceLock<Tomography>; MAX_QUBITS] = [
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
];

pub fn tomography(n_qubits: usize) -> Result<&'static Tomography> {
    check_qubits(n_qubits)?;
    Ok(TOMOGRAPHY[n_qubits - 1].get_or_init(|| Tomography::build(n_qubits)))
}

impl Tomography {
    fn build(n_qubits: usize) -> Self {
        let projectors = ProjectorSet::new(n_qubits).expect("checked");
        let paulis = PauliBasis::new(n_qubits).expect("checked");
        let b = b_matrix(&projectors, None).expect("full set");
        let b_inv = pseudoinverse(&b);
        Self {
            n_qubits,
            b_full: b.as_slice().iter().map(|z| z.re).collect(),
            b_inv: b_inv.as_slice().iter().map(|z| z.re).collect(),
            projectors,
            paulis,
        }
    }

    /// 4^N.
    pub fn size(&self) -> usize {
        self.paulis.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Row ν (1-based) of the tomography matrix.
    pub fn b_row(&self, nu: usize) -> &[f64] {
        let n = self.size();
        &self.b_full[(nu - 1) * n..nu * n]
    }

    /// Rows of the tomography matrix for `subset`, as a complex matrix.
    pub fn b_rows(&self, subset: &[usize]) -> Result<ComplexMatrix> {
        self.projectors.check_subset(subset)?;
        let n = self.size();
        let data: Vec<f64> = subset
            .iter()
            .flat_map(|&nu| self.b_row(nu).to_vec())
            .collect();
        ComplexMatrix::from_real(subset.len(), n, &data)
    }

    /// Real pseudoinverse of the rows in `subset`: a 4^N × M matrix, row-major.
    pub fn b_pinv(&self, subset: &[usize]) -> Result<Vec<f64>> {
        let rows = self.b_rows(subset)?;
        Ok(pseudoinverse(&rows)
            .as_slice()
            .iter()
            .map(|z| z.re)
            .collect())
    }

    /// Outcomes of all projectors for a state given by Pauli coefficients.
    pub fn outcomes_from_coefficients(&self, x: &[f64], subset: &[usize]) -> Vec<f64> {
        subset
            .iter()
            .map(|&nu| self.b_row(nu).iter().zip(x).map(|(b, x)| b * x).sum())
            .collect()
    }
}

/// A collection of measured projectors and their exact outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub n_qubits: usize,
    /// Distinct 1-based indices into the projector set.
    pub subset: Vec<usize>,
    pub operators: Vec<ComplexMatrix>,
    pub outcomes: Vec<f64>,
}

const OUTCOME_TOL: f64 = 1e-9;

impl MeasurementRecord {
    pub fn new(n_qubits: usize, subset: Vec<usize>, outcomes: Vec<f64>) -> Result<Self> {
        let tomo = tomography(n_qubits)?;
        tomo.projectors.check_subset(&subset)?;
        if outcomes.len() != subset.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} outcomes for {} measurements",
                outcomes.len(),
                subset.len()
            )));
        }
        if let Some(&m) = outcomes
            .iter()
            .find(|&&m| !(-OUTCOME_TOL..=1.0 + OUTCOME_TOL).contains(&m))
        {
            return Err(Error::InvalidConfig(format!("outcome {m} outside [0, 1]")));
        }
        let operators = subset
            .iter()
            .map(|&nu| tomo.projectors.projectors[nu - 1].clone())
            .collect();
        Ok(Self {
            n_qubits,
            subset,
            operators,
            outcomes,
        })
    }

    /// Measures `rho` with the projectors in `subset`.
    pub fn measure(rho: &DensityMatrix, subset: &[usize]) -> Result<Self> {
        let tomo = tomography(rho.n_qubits())?;
        tomo.projectors.check_subset(subset)?;
        let outcomes = subset
            .iter()
            .map(|&nu| expectation(rho.matrix(), &tomo.projectors.states[nu - 1]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rho.n_qubits(), subset.to_vec(), outcomes)
    }

    pub fn len(&self) -> usize {
        self.subset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subset.is_empty()
    }
}
