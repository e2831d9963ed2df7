//! Linear reconstruction engines: exact inversion of the full tomography
//! matrix, least-squares (pseudoinverse) reconstruction from a subset, additive
//! correction terms, and the closed-form optimal single-qubit reconstructors.
//!
//! All outputs except [`full_linear`] are returned raw: Hermitian by
//! construction, but not necessarily unit-trace or positive.

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};
use crate::measurement::{tomography, MeasurementRecord};
use crate::states::{validate, DensityMatrix};

/// ρ = Γ_μ (B⁻¹)_μν m_ν from a complete outcome vector.
pub fn full_linear(m: &[f64], n_qubits: usize) -> Result<DensityMatrix> {
    let tomo = tomography(n_qubits)?;
    let size = tomo.size();
    if m.len() != size {
        return Err(Error::ShapeMismatch(format!(
            "{} outcomes, full set has {size}",
            m.len()
        )));
    }
    let x = mat_vec(&tomo.b_inv, size, m);
    validate(tomo.paulis.synthesize(&x))
}

/// Solves B x = m for a square tomography matrix of some other basis.
pub fn solve_full(b: &ComplexMatrix, m: &[f64]) -> Result<Vec<f64>> {
    if !b.is_square() || b.rows() != m.len() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} system with {} outcomes",
            b.rows(),
            b.cols(),
            m.len()
        )));
    }
    let lu = nalgebra::DMatrix::from_row_slice(b.rows(), b.cols(), b.as_slice()).lu();
    let rhs = nalgebra::DVector::from_iterator(m.len(), m.iter().map(|&x| C64::new(x, 0.0)));
    let x = lu.solve(&rhs).ok_or(Error::NotInvertible)?;
    Ok(x.iter().map(|z| z.re).collect())
}

fn mat_vec(a: &[f64], cols: usize, v: &[f64]) -> Vec<f64> {
    a.chunks_exact(cols)
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

/// Pauli coefficients B⁺ m for the measured subset.
pub fn pinv_coefficients(record: &MeasurementRecord) -> Result<Vec<f64>> {
    let tomo = tomography(record.n_qubits)?;
    if record.is_empty() {
        return Ok(vec![0.0; tomo.size()]);
    }
    let pinv = tomo.b_pinv(&record.subset)?;
    Ok(mat_vec(&pinv, record.len(), &record.outcomes))
}

/// ρ ≈ Γ_μ B⁺_μν m_ν.
pub fn pinv_reconstruct(record: &MeasurementRecord, n_qubits: usize) -> Result<ComplexMatrix> {
    check_record(record, n_qubits)?;
    let x = pinv_coefficients(record)?;
    Ok(tomography(n_qubits)?.paulis.synthesize(&x))
}

fn check_record(record: &MeasurementRecord, n_qubits: usize) -> Result<()> {
    if record.n_qubits != n_qubits {
        return Err(Error::ShapeMismatch(format!(
            "{}-qubit record for a {n_qubits}-qubit reconstruction",
            record.n_qubits
        )));
    }
    Ok(())
}

/// Additive corrections to the pseudoinverse reconstructor.
///
/// `b` is 4^N × M (row-major, indexed `[μ·M + ν]`), `c` has 4^N entries and
/// the optional quadratic tensor `s` is 4^N × M × M, indexed `[(μ·M + ν)·M + ν']`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionTerms {
    pub size: usize,
    pub m: usize,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub s: Option<Vec<f64>>,
}

impl CorrectionTerms {
    pub fn zeros(n_qubits: usize, m: usize, quadratic: bool) -> Self {
        let size = 1 << (2 * n_qubits);
        Self {
            size,
            m,
            b: vec![0.0; size * m],
            c: vec![0.0; size],
            s: quadratic.then(|| vec![0.0; size * m * m]),
        }
    }

    pub fn check(&self, n_qubits: usize, m: usize) -> Result<()> {
        let size = 1 << (2 * n_qubits);
        let ok = self.size == size
            && self.m == m
            && self.b.len() == size * m
            && self.c.len() == size
            && self.s.as_ref().is_none_or(|s| s.len() == size * m * m);
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "correction terms (size {}, M {}) do not fit 4^N = {size}, M = {m}",
                self.size, self.m
            )))
        }
    }

    /// v = b·m + c.
    pub fn linear_part(&self, m: &[f64]) -> Vec<f64> {
        (0..self.size)
            .map(|mu| {
                let row = &self.b[mu * self.m..(mu + 1) * self.m];
                row.iter().zip(m).map(|(b, x)| b * x).sum::<f64>() + self.c[mu]
            })
            .collect()
    }

    /// Σ_νν' S_μνν' m_ν m_ν'.
    pub fn quadratic_part(&self, m: &[f64]) -> Option<Vec<f64>> {
        let s = self.s.as_ref()?;
        let mm = self.m;
        Some(
            (0..self.size)
                .map(|mu| {
                    let block = &s[mu * mm * mm..(mu + 1) * mm * mm];
                    let mut acc = 0.0;
                    for (i, &mi) in m.iter().enumerate() {
                        for (j, &mj) in m.iter().enumerate() {
                            acc += block[i * mm + j] * mi * mj;
                        }
                    }
                    acc
                })
                .collect(),
        )
    }

    /// Replaces `s` by its symmetrization over the two measurement indices.
    pub fn symmetrize(&mut self) {
        let mm = self.m;
        if let Some(s) = self.s.as_mut() {
            for block in s.chunks_exact_mut(mm * mm) {
                for i in 0..mm {
                    for j in i + 1..mm {
                        let v = 0.5 * (block[i * mm + j] + block[j * mm + i]);
                        block[i * mm + j] = v;
                        block[j * mm + i] = v;
                    }
                }
            }
        }
    }
}

/// Pauli coefficients (B⁺ + b) m + c [+ S m m].
pub fn corrected_coefficients(pinv_coeffs: &[f64], m: &[f64], terms: &CorrectionTerms) -> Vec<f64> {
    let mut x = terms.linear_part(m);
    for (xi, p) in x.iter_mut().zip(pinv_coeffs) {
        *xi += p;
    }
    if let Some(q) = terms.quadratic_part(m) {
        for (xi, qi) in x.iter_mut().zip(q) {
            *xi += qi;
        }
    }
    x
}

/// ρ = Γ_μ((B⁺ + b)_μν m_ν + c_μ) plus Γ_μ S_μνν' m_ν m_ν' when `s` is present.
pub fn apply_corrector(
    record: &MeasurementRecord,
    terms: &CorrectionTerms,
    n_qubits: usize,
) -> Result<ComplexMatrix> {
    check_record(record, n_qubits)?;
    terms.check(n_qubits, record.len())?;
    let p = pinv_coefficients(record)?;
    let x = corrected_coefficients(&p, &record.outcomes, terms);
    Ok(tomography(n_qubits)?.paulis.synthesize(&x))
}

/// max over measured rows ν' of |B_ν'μ v_μ| with v = b·m + c.
pub fn orthogonality_residual(
    record: &MeasurementRecord,
    terms: &CorrectionTerms,
    n_qubits: usize,
) -> Result<f64> {
    check_record(record, n_qubits)?;
    terms.check(n_qubits, record.len())?;
    let tomo = tomography(n_qubits)?;
    let v = terms.linear_part(&record.outcomes);
    Ok(record
        .subset
        .iter()
        .map(|&nu| {
            tomo.b_row(nu)
                .iter()
                .zip(&v)
                .map(|(b, x)| b * x)
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max))
}

/// Closed-form best single-qubit reconstruction from the outcomes of the
/// projector pair (ν, ν'). Population `a` comes from m₁ or 1 − m₂, Re b from
/// m₃ − ½ and Im b from m₄ − ½; anything the pair does not determine is left
/// at its maximally mixed value.
pub fn analytic_1q(pair: (usize, usize), m: [f64; 2]) -> Result<ComplexMatrix> {
    let (nu, nu2) = pair;
    if !(1 <= nu && nu < nu2 && nu2 <= 4) {
        return Err(Error::InvalidPair(nu, nu2));
    }
    let mut a = 0.5;
    let mut coherence = C64::new(0.0, 0.0);
    for (idx, val) in [(nu, m[0]), (nu2, m[1])] {
        match idx {
            1 => a = val,
            2 => a = 1.0 - val,
            3 => coherence.re = val - 0.5,
            _ => coherence.im = val - 0.5,
        }
    }
    ComplexMatrix::from_vec(
        2,
        2,
        vec![
            C64::new(a, 0.0),
            coherence,
            coherence.conj(),
            C64::new(1.0 - a, 0.0),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pseudoinverse;
    use crate::measurement::{b_matrix, outcomes, ProjectorSet};
    use crate::states::{maximally_entangled, BellKind, Ensemble};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn qubit(a: f64, b: C64) -> ComplexMatrix {
        ComplexMatrix::from_vec(
            2,
            2,
            vec![C64::new(a, 0.0), b, b.conj(), C64::new(1.0 - a, 0.0)],
        )
        .unwrap()
    }

    /// Uniform draws of valid single-qubit (a, b).
    fn random_qubit(rng: &mut impl Rng) -> (f64, C64) {
        loop {
            let a: f64 = rng.random();
            let b = C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            if a - a * a - b.norm_sqr() >= 0.0 {
                return (a, b);
            }
        }
    }

    fn record_for(a: f64, b: C64, subset: &[usize]) -> MeasurementRecord {
        MeasurementRecord::measure(&validate(qubit(a, b)).unwrap(), subset).unwrap()
    }

    /// Correction terms that turn the (1,3) pseudoinverse into the optimal estimate.
    fn terms_13() -> CorrectionTerms {
        let col = [-1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0];
        CorrectionTerms {
            size: 4,
            m: 2,
            b: col.iter().flat_map(|&x| [x, x]).collect(),
            c: vec![0.5, -0.5, 0.0, -0.5],
            s: None,
        }
    }

    #[test]
    fn pinv_of_subsets_matches_closed_forms() {
        let p = ProjectorSet::new(1).unwrap();
        let p12 = pseudoinverse(&b_matrix(&p, Some(&[1, 2])).unwrap());
        let e12 = ComplexMatrix::from_real(4, 2, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0])
            .unwrap()
            .scale(0.5);
        assert!(p12.max_abs_diff(&e12) < 1e-12);
        let p13 = pseudoinverse(&b_matrix(&p, Some(&[1, 3])).unwrap());
        let e13 = ComplexMatrix::from_real(4, 2, &[1.0, 1.0, -1.0, 2.0, 0.0, 0.0, 2.0, -1.0])
            .unwrap()
            .scale(1.0 / 3.0);
        assert!(p13.max_abs_diff(&e13) < 1e-12);
    }

    #[test]
    fn full_linear_examples() {
        let rho = full_linear(&[0.7, 0.3, 0.6, 0.7], 1).unwrap();
        assert!(rho.matrix().max_abs_diff(&qubit(0.7, C64::new(0.1, 0.2))) < 1e-12);
        let bell = maximally_entangled(BellKind::PhiPlus);
        let m = outcomes(&bell, &ProjectorSet::new(2).unwrap()).unwrap();
        assert!(
            full_linear(&m, 2)
                .unwrap()
                .matrix()
                .max_abs_diff(bell.matrix())
                < 1e-10
        );
        assert!(full_linear(&[0.5; 3], 1).is_err());
    }

    #[test]
    fn full_linear_round_trips_random_states() {
        for n in 1..=3 {
            let pset = ProjectorSet::new(n).unwrap();
            for rho in Ensemble::default_for(n).generate(n, 200, 8).unwrap() {
                let m = outcomes(&rho, &pset).unwrap();
                let back = full_linear(&m, n).unwrap();
                assert!((back.matrix() - rho.matrix()).frobenius_norm() < 1e-10);
            }
        }
    }

    #[test]
    fn solve_full_detects_singular_basis() {
        let b = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(solve_full(&b, &[1.0, 1.0]), Err(Error::NotInvertible));
        let b1 = b_matrix(&ProjectorSet::new(1).unwrap(), None).unwrap();
        let x = solve_full(&b1, &[0.7, 0.3, 0.6, 0.7]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pinv_reconstruct_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let (a, b) = random_qubit(&mut rng);
            let r12 = pinv_reconstruct(&record_for(a, b, &[1, 2]), 1).unwrap();
            assert!(r12.max_abs_diff(&ComplexMatrix::diag_real(&[a, 1.0 - a])) < 1e-12);
            let r13 = pinv_reconstruct(&record_for(a, b, &[1, 3]), 1).unwrap();
            let t = (1.0 - a + 2.0 * b.re) / 3.0;
            let e13 = ComplexMatrix::from_real(2, 2, &[a, t, t, t]).unwrap();
            assert!(r13.max_abs_diff(&e13) < 1e-12);
            assert!(r13.hermitian_deviation() < 1e-12);
        }
    }

    #[test]
    fn pinv_full_subset_is_exact() {
        let rho = Ensemble::default_for(2)
            .generate(2, 1, 3)
            .unwrap()
            .remove(0);
        let subset: Vec<usize> = (1..=16).collect();
        let r = pinv_reconstruct(&MeasurementRecord::measure(&rho, &subset).unwrap(), 2).unwrap();
        assert!(r.max_abs_diff(rho.matrix()) < 1e-10);
    }

    #[test]
    fn corrector_with_zero_terms_is_pinv() {
        let rec = record_for(0.6, C64::new(0.1, -0.2), &[2, 4]);
        let zero = CorrectionTerms::zeros(1, 2, true);
        let a = apply_corrector(&rec, &zero, 1).unwrap();
        let b = pinv_reconstruct(&rec, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(orthogonality_residual(&rec, &zero, 1).unwrap(), 0.0);
        assert!(apply_corrector(&rec, &CorrectionTerms::zeros(1, 3, false), 1).is_err());
    }

    #[test]
    fn optimal_13_correction() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let terms = terms_13();
        for _ in 0..1000 {
            let (a, b) = random_qubit(&mut rng);
            let rec = record_for(a, b, &[1, 3]);
            let r = apply_corrector(&rec, &terms, 1).unwrap();
            assert!(r.max_abs_diff(&qubit(a, C64::new(b.re, 0.0))) < 1e-12);
            let v = terms.linear_part(&rec.outcomes);
            let s = (1.0 - a - b.re) / 3.0;
            for (vi, e) in v.iter().zip([s, -s, 0.0, -s]) {
                assert!((vi - e).abs() < 1e-12);
            }
            assert!(orthogonality_residual(&rec, &terms, 1).unwrap() < 1e-12);
            assert!(
                r.max_abs_diff(&analytic_1q((1, 3), [rec.outcomes[0], rec.outcomes[1]]).unwrap())
                    < 1e-12
            );
        }
    }

    #[test]
    fn zero_residual_implies_data_consistency() {
        let tomo = tomography(1).unwrap();
        let rec = record_for(0.35, C64::new(-0.2, 0.15), &[1, 3]);
        let r = apply_corrector(&rec, &terms_13(), 1).unwrap();
        for (&nu, &m) in rec.subset.iter().zip(&rec.outcomes) {
            let got = crate::measurement::expectation(&r, &tomo.projectors.states[nu - 1]).unwrap();
            assert!((got - m).abs() < 1e-10);
        }
    }

    #[test]
    fn random_terms_break_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let rec = record_for(0.35, C64::new(-0.2, 0.15), &[2, 3]);
        let mut terms = CorrectionTerms::zeros(1, 2, false);
        terms
            .b
            .iter_mut()
            .for_each(|x| *x = rng.random_range(-1.0..1.0));
        terms
            .c
            .iter_mut()
            .for_each(|x| *x = rng.random_range(-1.0..1.0));
        assert!(orthogonality_residual(&rec, &terms, 1).unwrap() > 1e-3);
    }

    #[test]
    fn quadratic_terms_and_symmetrization() {
        let rec = record_for(0.5, C64::new(0.1, 0.1), &[1, 4]);
        let mut terms = CorrectionTerms::zeros(1, 2, true);
        // S_0,0,1 = 1 and S_0,1,0 = 0 act like 0.5 + 0.5 after symmetrization
        terms.s.as_mut().unwrap()[1] = 1.0;
        let before = apply_corrector(&rec, &terms, 1).unwrap();
        terms.symmetrize();
        let s = terms.s.as_ref().unwrap();
        assert_eq!((s[1], s[2]), (0.5, 0.5));
        let after = apply_corrector(&rec, &terms, 1).unwrap();
        assert!(before.max_abs_diff(&after) < 1e-15);
        let expected_shift = rec.outcomes[0] * rec.outcomes[1];
        let base = pinv_reconstruct(&rec, 1).unwrap();
        assert!(((after[(0, 0)] - base[(0, 0)]).re - expected_shift).abs() < 1e-12);
    }

    #[test]
    fn analytic_table() {
        let (a, b) = (0.8, C64::new(0.2, -0.1));
        let m = [a, 1.0 - a, 0.5 + b.re, 0.5 + b.im];
        let get = |p: (usize, usize)| analytic_1q(p, [m[p.0 - 1], m[p.1 - 1]]).unwrap();
        let re = C64::new(b.re, 0.0);
        let im = C64::new(0.0, b.im);
        assert!(get((1, 2)).max_abs_diff(&ComplexMatrix::diag_real(&[a, 1.0 - a])) < 1e-15);
        assert!(get((1, 3)).max_abs_diff(&qubit(a, re)) < 1e-15);
        assert!(get((1, 4)).max_abs_diff(&qubit(a, im)) < 1e-15);
        assert!(get((2, 3)).max_abs_diff(&qubit(a, re)) < 1e-15);
        assert!(get((2, 4)).max_abs_diff(&qubit(a, im)) < 1e-15);
        assert!(get((3, 4)).max_abs_diff(&qubit(0.5, b)) < 1e-15);
        assert_eq!(
            analytic_1q((3, 1), [0.0, 0.0]),
            Err(Error::InvalidPair(3, 1))
        );
        assert_eq!(
            analytic_1q((2, 5), [0.0, 0.0]),
            Err(Error::InvalidPair(2, 5))
        );
    }
}
