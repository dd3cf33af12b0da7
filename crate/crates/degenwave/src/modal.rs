//! Discrete eigenmode basis of the stiffness pencil A phi = lambda M phi on
//! the interior nodes, used for spectral filtering and low-frequency
//! ensembles.
//!
//! The discrete high-frequency modes of the pencil have vanishing group
//! velocity and are invisible from the boundary, so observability ensembles
//! and HUM data are built from (or projected onto) the lowest modes.

use crate::error::Result;
use crate::mesh::DiscreteOperators;
use crate::tridiag::SymTridiag;

/// The lowest eigenpairs of the interior stiffness pencil, M-orthonormal.
#[derive(Debug, Clone)]
pub struct ModalBasis {
    /// Eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Full-length mode vectors (zero boundary entries), M-orthonormal.
    pub modes: Vec<Vec<f64>>,
    n_nodes: usize,
}

impl ModalBasis {
    /// Compute the lowest `count` modes by Sturm bisection on the
    /// mass-symmetrized tridiagonal plus inverse iteration.
    pub fn lowest(ops: &DiscreteOperators, count: usize) -> Result<ModalBasis> {
        let n = ops.n_cells();
        let count = count.min(n - 1).max(1);
        let stiff = ops.interior_stiffness();
        let mass = ops.interior_mass();
        let sqrt_m: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
        let sym = SymTridiag {
            diag: stiff.diag.iter().zip(&mass).map(|(d, m)| d / m).collect(),
            off: stiff
                .off
                .iter()
                .enumerate()
                .map(|(i, o)| o / (sqrt_m[i] * sqrt_m[i + 1]))
                .collect(),
        };
        let eigenvalues = sym.lowest_eigenvalues(count)?;
        let mut modes = Vec::with_capacity(count);
        for &lambda in &eigenvalues {
            let psi = sym.eigenvector(lambda)?;
            // Transform back (phi = M^{-1/2} psi) and M-normalize.
            let mut phi = vec![0.0; n + 1];
            for i in 0..n - 1 {
                phi[i + 1] = psi[i] / sqrt_m[i];
            }
            let norm = ops.lumped_inner(&phi, &phi).sqrt();
            for x in phi.iter_mut() {
                *x /= norm;
            }
            modes.push(phi);
        }
        Ok(ModalBasis { eigenvalues, modes, n_nodes: n + 1 })
    }

    pub fn count(&self) -> usize {
        self.modes.len()
    }

    /// Basis restricted to the lowest `k` modes.
    pub fn truncated(&self, k: usize) -> ModalBasis {
        let k = k.min(self.count());
        ModalBasis {
            eigenvalues: self.eigenvalues[..k].to_vec(),
            modes: self.modes[..k].to_vec(),
            n_nodes: self.n_nodes,
        }
    }

    /// M-inner-product coefficients of a node vector against the basis.
    pub fn coefficients(&self, ops: &DiscreteOperators, u: &[f64]) -> Vec<f64> {
        self.modes.iter().map(|phi| ops.lumped_inner(phi, u)).collect()
    }

    /// Linear combination of modes.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes];
        for (c, phi) in coeffs.iter().zip(&self.modes) {
            for (o, p) in out.iter_mut().zip(phi) {
                *o += c * p;
            }
        }
        out
    }

    /// M-orthogonal projection onto the span of the basis.
    pub fn project(&self, ops: &DiscreteOperators, u: &[f64]) -> Vec<f64> {
        self.synthesize(&self.coefficients(ops, u))
    }
}

/// Number of retained modes for a filter fraction: ceil(frac * n_cells),
/// capped at the size of the interior problem.
pub fn filtered_mode_count(n_cells: usize, filter_frac: f64) -> usize {
    ((filter_frac * n_cells as f64).ceil() as usize)
        .clamp(1, n_cells - 1)
}
