//! Custom measurement operators: rank-1 product projectors built from
//! unconstrained network outputs, with gradients back to those outputs.

use qtomo_core::{ComplexMatrix, C64};

/// Below this norm a single-qubit factor falls back to |0⟩.
pub const NORM_FLOOR: f64 = 1e-9;

/// Π = ψψ† with ψ = ⊗_k φ_k and φ_k = w_k/‖w_k‖, where w_k is read from four
/// reals (Re w₀, Im w₀, Re w₁, Im w₁). The first qubit is most significant.
#[derive(Clone, Debug)]
pub struct ProductProjector {
    pub factors: Vec<[C64; 2]>,
    /// ‖w_k‖, or 0 where the fallback was taken.
    pub norms: Vec<f64>,
    pub psi: Vec<C64>,
    pub projector: ComplexMatrix,
}

impl ProductProjector {
    pub fn new(raw: &[f64]) -> Self {
        assert!(!raw.is_empty() && raw.len().is_multiple_of(4));
        let n = raw.len() / 4;
        let mut factors = Vec::with_capacity(n);
        let mut norms = Vec::with_capacity(n);
        for u in raw.chunks_exact(4) {
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < NORM_FLOOR {
                factors.push([C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
                norms.push(0.0);
            } else {
                factors.push([
                    C64::new(u[0] / norm, u[1] / norm),
                    C64::new(u[2] / norm, u[3] / norm),
                ]);
                norms.push(norm);
            }
        }
        let d = 1 << n;
        let psi: Vec<C64> = (0..d)
            .map(|a| {
                (0..n).fold(C64::new(1.0, 0.0), |acc, k| {
                    acc * factors[k][(a >> (n - 1 - k)) & 1]
                })
            })
            .collect();
        let projector = ComplexMatrix::from_fn(d, d, |r, c| psi[r] * psi[c].conj());
        Self {
            factors,
            norms,
            psi,
            projector,
        }
    }

    /// |0…0⟩⟨0…0|.
    pub fn ground(n_qubits: usize) -> Self {
        let raw: Vec<f64> = (0..n_qubits).flat_map(|_| [1.0, 0.0, 0.0, 0.0]).collect();
        Self::new(&raw)
    }

    pub fn n_qubits(&self) -> usize {
        self.factors.len()
    }

    /// Tr(Π ρ) = ψ†ρψ, together with ρψ.
    pub fn outcome(&self, rho: &ComplexMatrix) -> (f64, Vec<C64>) {
        let d = self.psi.len();
        let rho_psi: Vec<C64> = (0..d)
            .map(|r| (0..d).map(|c| rho[(r, c)] * self.psi[c]).sum())
            .collect();
        let m = self
            .psi
            .iter()
            .zip(&rho_psi)
            .map(|(p, q)| (p.conj() * q).re)
            .sum();
        (m, rho_psi)
    }

    /// Gradient w.r.t. ψ (as ∂/∂Re + i ∂/∂Im) from the gradients of the
    /// two-channel encoding of Π and of the outcome m = ψ†ρψ.
    pub fn psi_gradient(&self, g_channels: &[f64], g_m: f64, rho_psi: &[C64]) -> Vec<C64> {
        let d = self.psi.len();
        let d2 = d * d;
        assert_eq!(g_channels.len(), 2 * d2);
        let g = |a: usize, b: usize| C64::new(g_channels[a * d + b], g_channels[d2 + a * d + b]);
        (0..d)
            .map(|a| {
                let mut acc = 2.0 * g_m * rho_psi[a];
                for b in 0..d {
                    acc += (g(a, b) + g(b, a).conj()) * self.psi[b];
                }
                acc
            })
            .collect()
    }

    /// Chains a ψ gradient through the product and the normalizations back to
    /// the raw 4N outputs.
    pub fn backward(&self, gamma: &[C64]) -> Vec<f64> {
        let n = self.n_qubits();
        let d = self.psi.len();
        let mut out = vec![0.0; 4 * n];
        for k in 0..n {
            if self.norms[k] == 0.0 {
                continue;
            }
            let mut gk = [C64::new(0.0, 0.0); 2];
            for a in 0..d {
                let rest = (0..n)
                    .filter(|&q| q != k)
                    .fold(C64::new(1.0, 0.0), |acc, q| {
                        acc * self.factors[q][(a >> (n - 1 - q)) & 1]
                    });
                gk[(a >> (n - 1 - k)) & 1] += gamma[a] * rest.conj();
            }
            let phi = [
                self.factors[k][0].re,
                self.factors[k][0].im,
                self.factors[k][1].re,
                self.factors[k][1].im,
            ];
            let g = [gk[0].re, gk[0].im, gk[1].re, gk[1].im];
            let proj: f64 = phi.iter().zip(&g).map(|(a, b)| a * b).sum();
            for j in 0..4 {
                out[4 * k + j] = (g[j] - phi[j] * proj) / self.norms[k];
            }
        }
        out
    }
}
