//! Spatial grid on [c, d] with x = 1 as an exact node, and the finite-volume
//! stiffness/energy forms built on it.
//!
//! The flux coefficient is evaluated at cell midpoints only, so the vanishing
//! nodal value a(1) = 0 never enters a stencil. Both transmission regimes then
//! emerge from the same discretization: in the weak case the two midpoint
//! fluxes adjacent to 1 converge to a common limit under refinement, in the
//! strong case they vanish.

use crate::error::{Error, Result};
use crate::tridiag::SymTridiag;
use crate::weights::{DomainSpec, WeightSpec};

/// Nonuniform grid with geometric clustering toward the degeneracy point.
#[derive(Debug, Clone)]
pub struct Mesh {
    /// Node coordinates, x_0 = c < ... < x_N = d with x_{j1} = 1 exactly.
    pub nodes: Vec<f64>,
    /// Cell widths, length N.
    pub cell_widths: Vec<f64>,
    /// Index of the node at the degeneracy point.
    pub j1: usize,
    /// Geometric ratio between consecutive cell widths (>= 1).
    pub grading: f64,
    /// Coefficient at nodes.
    pub a_node: Vec<f64>,
    /// Coefficient at cell midpoints (always positive for valid weights).
    pub a_mid: Vec<f64>,
    /// Coefficient derivative at cell midpoints.
    pub da_mid: Vec<f64>,
}

/// Geometric cell widths over a length `len`, finest cell adjacent to the
/// degeneracy. `toward_one = true` lays them coarse-to-fine.
fn graded_widths(len: f64, m: usize, grading: f64, toward_one: bool) -> Vec<f64> {
    let widths: Vec<f64> = if grading == 1.0 {
        vec![len / m as f64; m]
    } else {
        // Coarsest width w0 with w_k = w0 / grading^k summing to len.
        let q = 1.0 / grading;
        let w0 = len * (1.0 - q) / (1.0 - q.powi(m as i32));
        (0..m).map(|k| w0 * q.powi(k as i32)).collect()
    };
    if toward_one {
        widths
    } else {
        widths.into_iter().rev().collect()
    }
}

/// Build a mesh with n cells (n even, >= 8), n/2 per side of the degeneracy,
/// geometrically graded toward x = 1 with the given ratio.
pub fn build_mesh(dom: &DomainSpec, w: &WeightSpec, n: usize, grading: f64) -> Result<Mesh> {
    w.validate(dom)?;
    if n < 8 || !n.is_multiple_of(2) {
        return Err(Error::InvalidMesh(format!(
            "need an even cell count >= 8 so that x = 1 is a node, got {n}"
        )));
    }
    if grading.is_nan() || grading < 1.0 {
        return Err(Error::InvalidMesh(format!("grading {grading} < 1")));
    }
    let m = n / 2;
    let left = graded_widths(1.0 - dom.c, m, grading, true);
    let right = graded_widths(dom.d - 1.0, m, grading, false);

    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(dom.c);
    for w in &left {
        nodes.push(nodes.last().unwrap() + w);
    }
    nodes[m] = 1.0; // absorb accumulated round-off
    for w in &right {
        nodes.push(nodes.last().unwrap() + w);
    }
    nodes[n] = dom.d;

    let cell_widths: Vec<f64> = nodes.windows(2).map(|p| p[1] - p[0]).collect();
    if cell_widths.iter().any(|&h| h <= 0.0) {
        return Err(Error::InvalidMesh(
            "grading produced a non-positive cell width (too aggressive for this n)".into(),
        ));
    }
    let a_node: Vec<f64> = nodes.iter().map(|&x| w.eval_unchecked(x).0).collect();
    let mut a_mid = Vec::with_capacity(n);
    let mut da_mid = Vec::with_capacity(n);
    for k in 0..n {
        let xm = 0.5 * (nodes[k] + nodes[k + 1]);
        let (a, da) = w.eval_unchecked(xm);
        if a <= 0.0 {
            return Err(Error::InvalidMesh(format!(
                "coefficient vanishes at cell midpoint x = {xm}"
            )));
        }
        a_mid.push(a);
        da_mid.push(da);
    }
    Ok(Mesh {
        nodes,
        cell_widths,
        j1: m,
        grading,
        a_node,
        a_mid,
        da_mid,
    })
}

impl Mesh {
    pub fn n_cells(&self) -> usize {
        self.cell_widths.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Two-column dump (node, a at node) for plotting.
    pub fn dump(&self, out: &mut impl std::io::Write) -> Result<()> {
        for (x, a) in self.nodes.iter().zip(&self.a_node) {
            writeln!(out, "{x} {a}")?;
        }
        Ok(())
    }
}

/// Precomputed stiffness and energy forms for a mesh.
///
/// The stiffness acts on node vectors as
/// (A y)_i = -[a_{i+1/2} (y_{i+1}-y_i)/h_{i+1/2} - a_{i-1/2} (y_i-y_{i-1})/h_{i-1/2}] / m_i
/// with lumped masses m_i; rows 0 and N are Dirichlet rows and return 0.
#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    pub nodes: Vec<f64>,
    pub cell_widths: Vec<f64>,
    pub mid_x: Vec<f64>,
    pub a_mid: Vec<f64>,
    pub da_mid: Vec<f64>,
    /// a_mid[k] / h[k] per cell: the coefficient of (y_{k+1} - y_k) in the flux.
    pub flux_coef: Vec<f64>,
    /// Lumped masses per node.
    pub lumped: Vec<f64>,
    pub j1: usize,
    pub a_c: f64,
    pub a_d: f64,
}

impl DiscreteOperators {
    pub fn new(mesh: &Mesh) -> Self {
        let n = mesh.n_cells();
        let flux_coef: Vec<f64> = (0..n).map(|k| mesh.a_mid[k] / mesh.cell_widths[k]).collect();
        let mut lumped = vec![0.0; n + 1];
        for k in 0..n {
            lumped[k] += 0.5 * mesh.cell_widths[k];
            lumped[k + 1] += 0.5 * mesh.cell_widths[k];
        }
        let mid_x: Vec<f64> = mesh
            .nodes
            .windows(2)
            .map(|p| 0.5 * (p[0] + p[1]))
            .collect();
        DiscreteOperators {
            nodes: mesh.nodes.clone(),
            cell_widths: mesh.cell_widths.clone(),
            mid_x,
            a_mid: mesh.a_mid.clone(),
            da_mid: mesh.da_mid.clone(),
            flux_coef,
            lumped,
            j1: mesh.j1,
            a_c: mesh.a_node[0],
            a_d: mesh.a_node[n],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.cell_widths.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n_nodes() {
            return Err(Error::LengthMismatch {
                got: y.len(),
                expected: self.n_nodes(),
            });
        }
        Ok(())
    }

    /// Finite-volume flux-difference form of -(a y_x)_x; Dirichlet rows 0.
    pub fn apply_stiffness(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        let mut out = vec![0.0; y.len()];
        self.apply_stiffness_into(y, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_stiffness_into(&self, y: &[f64], out: &mut [f64]) {
        let n = self.n_cells();
        out[0] = 0.0;
        out[n] = 0.0;
        for i in 1..n {
            let left = self.flux_coef[i - 1] * (y[i] - y[i - 1]);
            let right = self.flux_coef[i] * (y[i] - y[i + 1]);
            out[i] = (left + right) / self.lumped[i];
        }
    }

    /// Discrete energy (1/2)(sum m_i v_i^2 + sum_cells a_mid (dy/h)^2 h).
    pub fn discrete_energy(&self, y: &[f64], v: &[f64]) -> Result<f64> {
        self.check_len(y)?;
        self.check_len(v)?;
        let mut kinetic = 0.0;
        for (vi, mi) in v.iter().zip(&self.lumped) {
            kinetic += mi * vi * vi;
        }
        let mut elastic = 0.0;
        for k in 0..self.n_cells() {
            let dy = y[k + 1] - y[k];
            elastic += self.flux_coef[k] * dy * dy;
        }
        Ok(0.5 * (kinetic + elastic))
    }

    /// Energies restricted to the left and right of the degeneracy point.
    /// The node at x = 1 contributes half a cell of mass to each side.
    ///
    /// The elastic terms of the two cells touching x = 1 are attributed to
    /// neither side: their difference quotients straddle the singular node,
    /// so for strongly degenerate weights (where the relaxed solution may
    /// jump at x = 1) they represent the interface's vanishing-flux objects
    /// rather than field energy of either open side.
    pub fn side_energies(&self, y: &[f64], v: &[f64]) -> (f64, f64) {
        let n = self.n_cells();
        let mut left = 0.0;
        let mut right = 0.0;
        for k in 0..n {
            let dy = y[k + 1] - y[k];
            let interface_cell = k + 1 == self.j1 || k == self.j1;
            let elastic = if interface_cell {
                0.0
            } else {
                self.flux_coef[k] * dy * dy
            };
            let kinetic =
                0.5 * self.cell_widths[k] * (v[k] * v[k] + v[k + 1] * v[k + 1]);
            if self.mid_x[k] < 1.0 {
                left += elastic + kinetic;
            } else {
                right += elastic + kinetic;
            }
        }
        (0.5 * left, 0.5 * right)
    }

    /// Second-order one-sided derivative of y at the two boundary nodes
    /// (exact for quadratics, also on nonuniform cells).
    pub fn boundary_flux(&self, y: &[f64]) -> Result<(f64, f64)> {
        self.check_len(y)?;
        let n = self.n_cells();
        if n < 2 {
            return Err(Error::InvalidMesh("need at least 2 cells for traces".into()));
        }
        let h1 = self.cell_widths[0];
        let h2 = self.cell_widths[1];
        let at_c = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * y[0]
            + (h1 + h2) / (h1 * h2) * y[1]
            - h1 / (h2 * (h1 + h2)) * y[2];
        let g1 = self.cell_widths[n - 1];
        let g2 = self.cell_widths[n - 2];
        let at_d = g1 / (g2 * (g1 + g2)) * y[n - 2]
            - (g1 + g2) / (g1 * g2) * y[n - 1]
            + (2.0 * g1 + g2) / (g1 * (g1 + g2)) * y[n];
        Ok((at_c, at_d))
    }

    /// First-order wall derivatives (y_1 - y_0)/h_{1/2} and
    /// (y_N - y_{N-1})/h_{N-1/2}: the exact discrete adjoints of strong
    /// Dirichlet injection, used by the control machinery.
    pub fn wall_flux(&self, y: &[f64]) -> (f64, f64) {
        let n = self.n_cells();
        (
            (y[1] - y[0]) / self.cell_widths[0],
            (y[n] - y[n - 1]) / self.cell_widths[n - 1],
        )
    }

    /// Coefficient at the first and last cell midpoints (the weights that
    /// pair with `wall_flux` in the exact discrete duality).
    pub fn wall_coefficients(&self) -> (f64, f64) {
        (self.a_mid[0], self.a_mid[self.n_cells() - 1])
    }

    /// Lumped-mass inner product over all nodes.
    pub fn lumped_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter()
            .zip(v)
            .zip(&self.lumped)
            .map(|((a, b), m)| a * b * m)
            .sum()
    }

    /// Stiffness-energy bilinear form: sum_cells a_mid (du)(dv)/h.
    pub fn stiffness_energy(&self, u: &[f64], v: &[f64]) -> f64 {
        (0..self.n_cells())
            .map(|k| self.flux_coef[k] * (u[k + 1] - u[k]) * (v[k + 1] - v[k]))
            .sum()
    }

    /// Assembled interior stiffness (rows/columns for nodes 1..N-1); symmetric
    /// positive definite tridiagonal.
    pub fn interior_stiffness(&self) -> SymTridiag {
        let n = self.n_cells();
        let diag: Vec<f64> = (1..n).map(|i| self.flux_coef[i - 1] + self.flux_coef[i]).collect();
        let off: Vec<f64> = (1..n - 1).map(|i| -self.flux_coef[i]).collect();
        SymTridiag { diag, off }
    }

    /// Interior lumped masses (nodes 1..N-1).
    pub fn interior_mass(&self) -> Vec<f64> {
        self.lumped[1..self.n_cells()].to_vec()
    }

    /// Solve the interior Dirichlet problem (assembled stiffness) for a
    /// full-length right-hand side given at interior nodes; returns a
    /// full-length vector with zero boundary entries.
    pub fn stiffness_solve(&self, rhs_interior: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_cells();
        if rhs_interior.len() != n - 1 {
            return Err(Error::LengthMismatch {
                got: rhs_interior.len(),
                expected: n - 1,
            });
        }
        let sol = self.interior_stiffness().solve(rhs_interior)?;
        let mut full = vec![0.0; n + 1];
        full[1..n].copy_from_slice(&sol);
        Ok(full)
    }
}
