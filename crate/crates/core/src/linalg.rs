//! Dense complex linear algebra for the small matrices used throughout the
//! workbench (dimension 2..64).
//!
//! Storage is row-major. Eigen- and singular-value decompositions are
//! delegated to `nalgebra`; everything else is written out directly.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Relative Hermiticity tolerance accepted by [`hermitian_eig`].
pub const HERMITIAN_RTOL: f64 = 1e-8;
/// Negative eigenvalues above this are treated as numerical zero.
pub const PSD_TOL: f64 = 1e-9;
/// Singular values below `PINV_RCOND * sigma_max` are dropped.
pub const SQRT_RCOND: f64 = 1e-14;
pub const PINV_RCOND: f64 = 1e-12;

const EIG_MAX_ITERS: usize = 10_000;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { ONE } else { ZERO })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |r, c| {
            if r == c {
                C64::new(values[r], 0.0)
            } else {
                ZERO
            }
        })
    }

    /// Outer product |v⟩⟨v|.
    pub fn outer(v: &[C64]) -> Self {
        let n = v.len();
        Self::from_fn(n, n, |r, c| v[r] * v[c].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// ‖A − A†‖_F, or infinity for non-square input.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                acc += (self[(r, c)] - self[(c, r)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// (A + A†)/2.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| {
            (self[(r, c)] + self[(c, r)].conj()) * 0.5
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Tr(A B) without forming the product.
    pub fn trace_product(&self, other: &Self) -> Result<C64> {
        if self.cols != other.rows || self.rows != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "Tr of {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut acc = ZERO;
        for r in 0..self.rows {
            for k in 0..self.cols {
                acc += self.data[r * self.cols + k] * other.data[k * other.cols + r];
            }
        }
        Ok(acc)
    }

    /// Rows selected (in the given order) by 0-based index.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn determinant(&self) -> Result<C64> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "determinant of a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        Ok(self.to_nalgebra().determinant())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }

    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "inverse of a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        self.to_nalgebra()
            .try_inverse()
            .map(|m| Self::from_nalgebra(&m))
            .ok_or(Error::NotInvertible)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in add");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in sub");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    /// Panics on a dimension mismatch; use [`ComplexMatrix::matmul`] to get an error instead.
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("dimension mismatch in mul")
    }
}

/// Kronecker product. Entry `(ia*rb + ib, ja*cb + jb)` is `a[ia,ja] * b[ib,jb]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = ComplexMatrix::zeros(ra * rb, ca * cb);
    for ia in 0..ra {
        for ja in 0..ca {
            let s = a[(ia, ja)];
            for ib in 0..rb {
                for jb in 0..cb {
                    out[(ia * rb + ib, ja * cb + jb)] = s * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Kronecker product of state vectors.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

#[derive(Clone, Debug)]
pub struct HermitianEig {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors stored as columns, in eigenvalue order.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    /// V · diag(f(λ)) · V†.
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        ComplexMatrix::from_fn(n, n, |r, c| {
            (0..n)
                .filter(|&k| weights[k] != 0.0)
                .map(|k| v[(r, k)] * v[(c, k)].conj() * weights[k])
                .sum()
        })
    }
}

pub fn hermitian_eig(h: &ComplexMatrix) -> Result<HermitianEig> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            h.rows(),
            h.cols()
        )));
    }
    let deviation = h.hermitian_deviation();
    if deviation > HERMITIAN_RTOL * h.frobenius_norm() {
        return Err(Error::NotHermitian { deviation });
    }
    let eig = SymmetricEigen::try_new(
        h.hermitian_part().to_nalgebra(),
        f64::EPSILON,
        EIG_MAX_ITERS,
    )
    .ok_or(Error::ConvergenceFailure {
        max_iters: EIG_MAX_ITERS,
    })?;
    let n = h.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

pub fn eigenvalues_hermitian(h: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eig(h)?.eigenvalues)
}

/// Principal square root of a PSD matrix; eigenvalues down to `-PSD_TOL` are clipped to zero.
pub fn matrix_sqrt_psd(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(h)?;
    let min = eig.eigenvalues.first().copied().unwrap_or(0.0);
    if min < -PSD_TOL {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    // eigenvalues at rounding level would otherwise contribute O(√ε)
    let floor = SQRT_RCOND * eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    Ok(eig.reassemble(|l| if l > floor { l.sqrt() } else { 0.0 }))
}

/// Moore–Penrose pseudoinverse by SVD, dropping singular values below
/// `PINV_RCOND * sigma_max`.
pub fn pseudoinverse(b: &ComplexMatrix) -> ComplexMatrix {
    let (rows, cols) = b.shape();
    if rows == 0 || cols == 0 {
        return ComplexMatrix::zeros(cols, rows);
    }
    let svd = SVD::new(b.to_nalgebra(), true, true);
    let u = svd.u.as_ref().expect("U requested");
    let v_t = svd.v_t.as_ref().expect("V^T requested");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = PINV_RCOND * sigma_max;
    let mut out = ComplexMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let inv = 1.0 / s;
        // column k of V is conj of row k of V^T; row k of U^† is conj of column k of U
        for r in 0..cols {
            let vk = v_t[(k, r)].conj() * inv;
            for c in 0..rows {
                out[(r, c)] += vk * u[(c, k)].conj();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
    }

    fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_hermitian(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
        random_matrix(rng, n, n).hermitian_part()
    }

    #[test]
    fn kron_identity_and_projectors() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
        let mu0 = ComplexMatrix::diag_real(&[1.0, 0.0]);
        assert_eq!(
            kron(&mu0, &mu0),
            ComplexMatrix::diag_real(&[1.0, 0.0, 0.0, 0.0])
        );
    }

    #[test]
    fn kron_pauli_block_structure() {
        // σx ⊗ σz = [[0, σz], [σz, 0]] written out entrywise
        let expected = ComplexMatrix::from_real(
            4,
            4,
            &[
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, -1.0, //
                1.0, 0.0, 0.0, 0.0, //
                0.0, -1.0, 0.0, 0.0,
            ],
        )
        .unwrap();
        assert_eq!(kron(&pauli_x(), &pauli_z()), expected);
    }

    #[test]
    fn kron_associative_and_trace_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 2, 2);
            let b = random_matrix(&mut rng, 2, 3);
            let c = random_matrix(&mut rng, 3, 2);
            let left = kron(&kron(&a, &b), &c);
            let right = kron(&a, &kron(&b, &c));
            assert_eq!(left.shape(), right.shape());
            assert!(left.max_abs_diff(&right) < 1e-14);

            let a = random_matrix(&mut rng, 2, 2);
            let b = random_matrix(&mut rng, 2, 2);
            let t = kron(&a, &b).trace();
            assert!((t - a.trace() * b.trace()).norm() < 1e-12);
        }
    }

    #[test]
    fn eig_examples() {
        let e = hermitian_eig(&ComplexMatrix::diag_real(&[0.7, 0.3])).unwrap();
        assert!((e.eigenvalues[0] - 0.3).abs() < 1e-14 && (e.eigenvalues[1] - 0.7).abs() < 1e-14);
        let e = hermitian_eig(&pauli_x()).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-14 && (e.eigenvalues[1] - 1.0).abs() < 1e-14);
        let p = ComplexMatrix::from_real(2, 2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        let e = hermitian_eig(&p).unwrap();
        assert!(e.eigenvalues[0].abs() < 1e-14 && (e.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real(2, 2, &[0.5, 1.0, 0.0, 0.5]).unwrap();
        assert!(matches!(hermitian_eig(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eig_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..100 {
            let n = 1 + k % 8;
            let h = random_hermitian(&mut rng, n);
            let e = hermitian_eig(&h).unwrap();
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let back = e.reassemble(|l| l);
            assert!((&back - &h).frobenius_norm() <= 1e-10 * h.frobenius_norm().max(1.0));
            let v = &e.eigenvectors;
            let gram = &v.adjoint() * v;
            assert!((&gram - &ComplexMatrix::identity(n)).frobenius_norm() < 1e-10);
            let av = &h * v;
            let vl = ComplexMatrix::from_fn(n, n, |r, c| v[(r, c)] * e.eigenvalues[c]);
            assert!((&av - &vl).frobenius_norm() <= 1e-10 * h.frobenius_norm().max(1.0));
        }
    }

    #[test]
    fn sqrt_examples() {
        let id = ComplexMatrix::identity(3);
        assert!(matrix_sqrt_psd(&id).unwrap().max_abs_diff(&id) < 1e-14);
        let s = matrix_sqrt_psd(&ComplexMatrix::diag_real(&[4.0, 9.0])).unwrap();
        assert!(s.max_abs_diff(&ComplexMatrix::diag_real(&[2.0, 3.0])) < 1e-14);
        let psi = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let p = ComplexMatrix::outer(&psi);
        assert!(matrix_sqrt_psd(&p).unwrap().max_abs_diff(&p) < 1e-12);
        assert!(matches!(
            matrix_sqrt_psd(&ComplexMatrix::diag_real(&[1.2, -0.2])),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=8 {
            let g = random_matrix(&mut rng, n, n);
            let h = &g * &g.adjoint();
            let s = matrix_sqrt_psd(&h).unwrap();
            assert!((&(&s * &s) - &h).frobenius_norm() < 1e-8);
        }
    }

    fn penrose_residuals(b: &ComplexMatrix, p: &ComplexMatrix) -> [f64; 4] {
        let bp = b * p;
        let pb = p * b;
        [
            (&(&bp * b) - b).frobenius_norm(),
            (&(&pb * p) - p).frobenius_norm(),
            (&bp.adjoint() - &bp).frobenius_norm(),
            (&pb.adjoint() - &pb).frobenius_norm(),
        ]
    }

    #[test]
    fn pinv_penrose_conditions_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let rows = rng.random_range(1..=16);
            let cols = rng.random_range(1..=16);
            let mut b = random_matrix(&mut rng, rows, cols);
            if rng.random_bool(0.3) && rows > 1 {
                // force rank deficiency by duplicating a row
                for c in 0..cols {
                    b[(rows - 1, c)] = b[(0, c)];
                }
            }
            let p = pseudoinverse(&b);
            assert_eq!(p.shape(), (cols, rows));
            for r in penrose_residuals(&b, &p) {
                assert!(r < 1e-9, "penrose residual {r}");
            }
        }
    }

    #[test]
    fn pinv_full_row_rank_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let b = random_matrix(&mut rng, 3, 6);
        let bbh = &b * &b.adjoint();
        let inv = bbh.inverse().unwrap();
        let expected = &b.adjoint() * &inv;
        assert!(pseudoinverse(&b).max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn pinv_identity() {
        let id = ComplexMatrix::identity(5);
        assert!(pseudoinverse(&id).max_abs_diff(&id) < 1e-14);
    }

    #[test]
    fn determinant_of_diagonal() {
        let d = ComplexMatrix::diag_real(&[2.0, 3.0, 0.5]);
        assert!((d.determinant().unwrap() - C64::new(3.0, 0.0)).norm() < 1e-14);
    }
}
