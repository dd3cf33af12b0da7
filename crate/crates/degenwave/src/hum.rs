//! Boundary null control by the Hilbert Uniqueness Method.
//!
//! The Gramian equation G Z = R is solved by conjugate gradients in the
//! discrete V1 x L2 metric. One Gramian application is: backward-solve the
//! adjoint from the final datum Z, read off the boundary controls, forward-
//! solve from rest with those controls, and pack the terminal state as the
//! Riesz representative of the pairing functional.
//!
//! With the implicit midpoint scheme, first-order wall traces, and the
//! midpoint-in-time trace quadrature, the discrete transposition identity
//! holds exactly (to round-off), so the realized Gramian is symmetric
//! positive semidefinite to machine precision and the terminal L2 x V-1 norm
//! of the controlled run equals the final CG residual. Boundary nodes are
//! control-constrained degrees of freedom; terminal norms and energies are
//! therefore reported for the interior state with homogeneous extension.

use crate::error::{Error, Result};
use crate::mesh::DiscreteOperators;
use crate::modal::{filtered_mode_count, ModalBasis};
use crate::solver::{
    midpoint_product_quadrature, solve_backward, solve_forward, trapz, BoundaryData, Scheme,
    SolveOptions, Trajectory,
};
use crate::weights::DegeneracyClass;
use serde::{Deserialize, Serialize};

/// Which boundary points carry controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActiveSide {
    Both,
    RightOnly,
}

/// Final datum (w(T), w_t(T)) of the backward adjoint problem; position and
/// velocity components vanish at the endpoints.
#[derive(Debug, Clone)]
pub struct FinalData {
    pub w0: Vec<f64>,
    pub w1: Vec<f64>,
}

impl FinalData {
    pub fn zero(n_nodes: usize) -> Self {
        FinalData { w0: vec![0.0; n_nodes], w1: vec![0.0; n_nodes] }
    }

    pub fn validate(&self, ops: &DiscreteOperators) -> Result<()> {
        let n = ops.n_nodes();
        if self.w0.len() != n || self.w1.len() != n {
            return Err(Error::LengthMismatch {
                got: self.w0.len().max(self.w1.len()),
                expected: n,
            });
        }
        let last = n - 1;
        if self.w0[0] != 0.0 || self.w0[last] != 0.0 || self.w1[0] != 0.0 || self.w1[last] != 0.0 {
            return Err(Error::Precondition(
                "final data must vanish at the boundary nodes".into(),
            ));
        }
        Ok(())
    }

    fn axpy(&mut self, alpha: f64, other: &FinalData) {
        for (a, b) in self.w0.iter_mut().zip(&other.w0) {
            *a += alpha * b;
        }
        for (a, b) in self.w1.iter_mut().zip(&other.w1) {
            *a += alpha * b;
        }
    }

    fn scale_add(&self, beta: f64, rhs: &FinalData) -> FinalData {
        FinalData {
            w0: rhs.w0.iter().zip(&self.w0).map(|(r, p)| r + beta * p).collect(),
            w1: rhs.w1.iter().zip(&self.w1).map(|(r, p)| r + beta * p).collect(),
        }
    }
}

/// Boundary Dirichlet controls sampled on the solver time grid.
#[derive(Debug, Clone)]
pub struct ControlPair {
    pub f_c: Vec<f64>,
    pub f_d: Vec<f64>,
    pub dt: f64,
    pub active: ActiveSide,
}

impl ControlPair {
    pub fn zero(t_final: f64, active: ActiveSide) -> Self {
        ControlPair { f_c: vec![0.0, 0.0], f_d: vec![0.0, 0.0], dt: t_final, active }
    }

    pub fn to_boundary_data(&self) -> BoundaryData {
        BoundaryData { f_c: self.f_c.clone(), f_d: self.f_d.clone(), dt: self.dt }
    }

    /// L2(0,T) norm of the combined control pair.
    pub fn l2_norm(&self) -> f64 {
        let sq_c: Vec<f64> = self.f_c.iter().map(|f| f * f).collect();
        let sq_d: Vec<f64> = self.f_d.iter().map(|f| f * f).collect();
        (trapz(&sq_c, self.dt) + trapz(&sq_d, self.dt)).sqrt()
    }
}

/// Outcome of a HUM solve or a verification run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HumReport {
    pub iterations: usize,
    pub cg_residual: f64,
    pub converged: bool,
    /// Discrete energy of the terminal interior state (homogeneous extension).
    pub terminal_energy: f64,
    /// L2 x V-1 norm of (y(T), y_t(T)), interior state.
    pub terminal_state_norm: f64,
    /// Same norm of the (filtered) initial data.
    pub initial_state_norm: f64,
    pub control_l2: f64,
    /// Smallest Rayleigh quotient <Gp, p>/<p, p> seen during CG; an empirical
    /// coercivity measure for the (possibly one-sided) bilinear form.
    pub lambda_coercivity_estimate: f64,
    /// Set when the weight degenerates strongly: the two sides decouple and
    /// boundary controls cannot reach across x = 1.
    pub decoupled: bool,
    pub warning: Option<String>,
}

/// Controls plus the verification report.
#[derive(Debug, Clone)]
pub struct HumSolution {
    pub controls: ControlPair,
    pub report: HumReport,
}

#[derive(Debug, Clone)]
pub struct HumParams {
    /// Relative CG tolerance in the V1 x L2 metric.
    pub tol: f64,
    pub max_iterations: usize,
    /// Fraction of discrete modes kept when filtering the initial data.
    pub filter_frac: f64,
    /// Optional modal projection of Gramian applications (fraction of modes);
    /// None applies the Gramian unprojected.
    pub gram_filter_frac: Option<f64>,
    pub active: ActiveSide,
    /// Time steps for every solve inside the HUM loop; defaults to a grid
    /// matching the spatial resolution.
    pub steps: Option<usize>,
}

impl Default for HumParams {
    fn default() -> Self {
        HumParams {
            tol: 1e-8,
            max_iterations: 500,
            filter_frac: 0.25,
            gram_filter_frac: None,
            active: ActiveSide::Both,
            steps: None,
        }
    }
}

fn hum_steps(ops: &DiscreteOperators, t_final: f64, params: &HumParams) -> usize {
    params.steps.unwrap_or_else(|| {
        let n = ops.n_cells() as f64;
        let width = ops.nodes[ops.n_cells()] - ops.nodes[0];
        ((t_final * n / width).ceil() as usize).max(256)
    })
}

fn solve_opts(steps: usize) -> SolveOptions {
    SolveOptions { steps: Some(steps), ..Default::default() }
}

/// Dual-space norm: ||g||_{V-1}^2 = <z, g>_M where the interior Dirichlet
/// stiffness problem A z = M g defines z. `g` must vanish at the endpoints.
pub fn vminus_norm(ops: &DiscreteOperators, g: &[f64]) -> Result<f64> {
    if g.len() != ops.n_nodes() {
        return Err(Error::LengthMismatch { got: g.len(), expected: ops.n_nodes() });
    }
    let n = ops.n_cells();
    let rhs: Vec<f64> = (1..n).map(|i| ops.lumped[i] * g[i]).collect();
    let z = ops.stiffness_solve(&rhs)?;
    Ok(ops.lumped_inner(&z, g).max(0.0).sqrt())
}

/// V1 x L2 inner product of final-data pairs.
pub fn hum_inner(ops: &DiscreteOperators, a: &FinalData, b: &FinalData) -> f64 {
    ops.stiffness_energy(&a.w0, &b.w0) + ops.lumped_inner(&a.w1, &b.w1)
}

/// Controls read off the backward trajectory: f_c = -w_x(t, c) and
/// f_d = +w_x(t, d), sampled on the solver grid (first-order wall
/// derivatives, the discrete adjoints of Dirichlet injection).
pub fn extract_controls(backward: &Trajectory, active: ActiveSide) -> ControlPair {
    let f_c = match active {
        ActiveSide::Both => backward.wall_c.iter().map(|w| -w).collect(),
        ActiveSide::RightOnly => vec![0.0; backward.wall_c.len()],
    };
    ControlPair {
        f_c,
        f_d: backward.wall_d.clone(),
        dt: backward.dt,
        active,
    }
}

/// Interior L2 x V-1 norm of a state (boundary nodes excluded).
fn interior_state_norm(ops: &DiscreteOperators, y: &[f64], v: &[f64]) -> Result<f64> {
    let n = ops.n_cells();
    let mut yi = y.to_vec();
    let mut vi = v.to_vec();
    yi[0] = 0.0;
    yi[n] = 0.0;
    vi[0] = 0.0;
    vi[n] = 0.0;
    let l2 = ops.lumped_inner(&yi, &yi);
    let dual = vminus_norm(ops, &vi)?;
    Ok((l2 + dual * dual).sqrt())
}

fn interior_energy(ops: &DiscreteOperators, y: &[f64], v: &[f64]) -> Result<f64> {
    let n = ops.n_cells();
    let mut yi = y.to_vec();
    let mut vi = v.to_vec();
    yi[0] = 0.0;
    yi[n] = 0.0;
    vi[0] = 0.0;
    vi[n] = 0.0;
    ops.discrete_energy(&yi, &vi)
}

/// Riesz representative of the terminal pairing of a trajectory:
/// (-(A^-1 M v(T)), y(T)) with zeroed boundary entries, so that
/// <G z, zhat> = Lambda(z, zhat) for all admissible zhat.
fn terminal_dual(ops: &DiscreteOperators, traj: &Trajectory) -> Result<FinalData> {
    let n = ops.n_cells();
    let rhs: Vec<f64> = (1..n).map(|i| -ops.lumped[i] * traj.last.v[i]).collect();
    let g0 = ops.stiffness_solve(&rhs)?;
    let mut g1 = traj.last.y.clone();
    g1[0] = 0.0;
    g1[n] = 0.0;
    Ok(FinalData { w0: g0, w1: g1 })
}

/// Apply the HUM Gramian to a final datum. Returns the Riesz representative
/// of z -> Lambda(z, .) together with the controls generated along the way.
pub fn gramian_apply(
    ops: &DiscreteOperators,
    t_final: f64,
    z: &FinalData,
    active: ActiveSide,
    steps: usize,
) -> Result<(FinalData, ControlPair)> {
    z.validate(ops)?;
    let opts = solve_opts(steps);
    let backward = solve_backward(ops, &z.w0, &z.w1, t_final, Scheme::ImplicitMidpoint, &opts)?;
    let controls = extract_controls(&backward, active);
    let n = ops.n_nodes();
    let zero = vec![0.0; n];
    let forward = solve_forward(
        ops,
        &zero,
        &zero,
        &controls.to_boundary_data(),
        t_final,
        Scheme::ImplicitMidpoint,
        &opts,
    )?;
    Ok((terminal_dual(ops, &forward)?, controls))
}

/// Trace-quadrature evaluation of the HUM bilinear form on two backward
/// trajectories: a_mid(c) int w_x(t,c) what_x(t,c) + a_mid(d) int ... with the
/// midpoint-in-time product quadrature. This is the independent route against
/// which `gramian_apply` is verified.
pub fn lambda_quadrature(
    ops: &DiscreteOperators,
    w: &Trajectory,
    what: &Trajectory,
    active: ActiveSide,
) -> f64 {
    let (kc, kd) = ops.wall_coefficients();
    let side_d = kd * midpoint_product_quadrature(&w.wall_d, &what.wall_d, w.dt);
    match active {
        ActiveSide::Both => {
            kc * midpoint_product_quadrature(&w.wall_c, &what.wall_c, w.dt) + side_d
        }
        ActiveSide::RightOnly => side_d,
    }
}

/// Riesz representative of the right-hand functional
/// l(zhat) = <y1, what(0)> - <y0, what_t(0)>, realized through one free
/// forward solve from (y0, y1).
fn rhs_functional(
    ops: &DiscreteOperators,
    y0: &[f64],
    y1: &[f64],
    t_final: f64,
    steps: usize,
) -> Result<FinalData> {
    let opts = solve_opts(steps);
    let free = solve_forward(
        ops,
        y0,
        y1,
        &BoundaryData::zero(t_final),
        t_final,
        Scheme::ImplicitMidpoint,
        &opts,
    )?;
    let n = ops.n_cells();
    let rhs: Vec<f64> = (1..n).map(|i| ops.lumped[i] * free.last.v[i]).collect();
    let r0 = ops.stiffness_solve(&rhs)?;
    let mut r1: Vec<f64> = free.last.y.iter().map(|y| -y).collect();
    r1[0] = 0.0;
    r1[n] = 0.0;
    Ok(FinalData { w0: r0, w1: r1 })
}

struct GramContext<'a> {
    ops: &'a DiscreteOperators,
    t_final: f64,
    steps: usize,
    active: ActiveSide,
    projector: Option<&'a ModalBasis>,
}

impl GramContext<'_> {
    fn project(&self, z: &FinalData) -> FinalData {
        match self.projector {
            Some(basis) => FinalData {
                w0: basis.project(self.ops, &z.w0),
                w1: basis.project(self.ops, &z.w1),
            },
            None => z.clone(),
        }
    }

    fn apply(&self, z: &FinalData) -> Result<FinalData> {
        let input = self.project(z);
        let (out, _) = gramian_apply(self.ops, self.t_final, &input, self.active, self.steps)?;
        Ok(self.project(&out))
    }
}

/// Solve the HUM variational problem for boundary null controls of the data
/// (y0, y1) over [0, T], by conjugate gradients on the Gramian equation.
///
/// The initial data are projected onto the lowest ceil(filter_frac * N)
/// stiffness eigenmodes first; discrete high-frequency modes carry no
/// boundary information and would make the Gramian numerically singular.
pub fn solve_hum(
    ops: &DiscreteOperators,
    class: DegeneracyClass,
    observability_time: Option<f64>,
    y0: &[f64],
    y1: &[f64],
    t_final: f64,
    params: &HumParams,
) -> Result<HumSolution> {
    if t_final <= 0.0 {
        return Err(Error::Precondition(format!("t_final = {t_final} <= 0")));
    }
    let n = ops.n_cells();
    if y0.len() != n + 1 || y1.len() != n + 1 {
        return Err(Error::LengthMismatch { got: y0.len().max(y1.len()), expected: n + 1 });
    }
    let steps = hum_steps(ops, t_final, params);
    let decoupled = class == DegeneracyClass::Strong;
    let mut warning = None;
    if let Some(ta) = observability_time {
        if t_final <= ta {
            warning = Some(format!(
                "horizon T = {t_final} does not exceed the observability time T_a = {ta}; \
                 the discrete Gramian may still be invertible but no guarantee applies"
            ));
        }
    }
    if decoupled {
        let msg = "strong degeneration: sides decouple, boundary controls cannot reach \
                   across x = 1";
        warning = Some(match warning {
            Some(w) => format!("{w}; {msg}"),
            None => msg.into(),
        });
    }

    // Spectral filtering of the data.
    let (y0f, y1f, data_basis) = if params.filter_frac < 1.0 {
        let k = filtered_mode_count(n, params.filter_frac);
        let basis = ModalBasis::lowest(ops, k)?;
        (basis.project(ops, y0), basis.project(ops, y1), Some(basis))
    } else {
        (y0.to_vec(), y1.to_vec(), None)
    };
    let initial_state_norm = interior_state_norm(ops, &y0f, &y1f)?;

    // Reuse the data basis for the Gramian projection when large enough.
    let gram_basis = match params.gram_filter_frac {
        Some(frac) => {
            let k = filtered_mode_count(n, frac);
            match &data_basis {
                Some(b) if b.count() >= k => Some(b.truncated(k)),
                _ => Some(ModalBasis::lowest(ops, k)?),
            }
        }
        None => None,
    };

    let ctx = GramContext {
        ops,
        t_final,
        steps,
        active: params.active,
        projector: gram_basis.as_ref(),
    };

    let rhs = ctx.project(&rhs_functional(ops, &y0f, &y1f, t_final, steps)?);
    let rhs_norm = hum_inner(ops, &rhs, &rhs).sqrt();
    if rhs_norm == 0.0 {
        let controls = ControlPair::zero(t_final, params.active);
        let report = HumReport {
            iterations: 0,
            cg_residual: 0.0,
            converged: true,
            terminal_energy: 0.0,
            terminal_state_norm: 0.0,
            initial_state_norm,
            control_l2: 0.0,
            lambda_coercivity_estimate: 0.0,
            decoupled,
            warning,
        };
        return Ok(HumSolution { controls, report });
    }

    // Conjugate gradients in the V1 x L2 metric.
    let mut z = FinalData::zero(n + 1);
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = hum_inner(ops, &r, &r);
    let mut coercivity = f64::INFINITY;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iterations {
        let gp = ctx.apply(&p)?;
        let p_gp = hum_inner(ops, &p, &gp);
        let p_p = hum_inner(ops, &p, &p);
        if p_p > 0.0 {
            coercivity = coercivity.min(p_gp / p_p);
        }
        if p_gp <= 0.0 {
            // Semidefinite breakdown: the direction is invisible to the
            // boundary (possible in the decoupled regime).
            break;
        }
        let alpha = rr / p_gp;
        z.axpy(alpha, &p);
        r.axpy(-alpha, &gp);
        let rr_new = hum_inner(ops, &r, &r);
        let rel = rr_new.sqrt() / rhs_norm;
        history.push(rel);
        iterations += 1;
        if rel <= params.tol {
            converged = true;
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        p = p.scale_add(beta, &r);
    }
    let final_residual = hum_inner(ops, &r, &r).sqrt() / rhs_norm;
    if coercivity == f64::INFINITY {
        coercivity = 0.0;
    }

    // Controls from the (best) iterate and closed-loop verification.
    let opts = solve_opts(steps);
    let backward = solve_backward(ops, &z.w0, &z.w1, t_final, Scheme::ImplicitMidpoint, &opts)?;
    let controls = extract_controls(&backward, params.active);
    let verify = solve_forward(
        ops,
        &y0f,
        &y1f,
        &controls.to_boundary_data(),
        t_final,
        Scheme::ImplicitMidpoint,
        &opts,
    )?;
    let report = HumReport {
        iterations,
        cg_residual: final_residual,
        converged,
        terminal_energy: interior_energy(ops, &verify.last.y, &verify.last.v)?,
        terminal_state_norm: interior_state_norm(ops, &verify.last.y, &verify.last.v)?,
        initial_state_norm,
        control_l2: controls.l2_norm(),
        lambda_coercivity_estimate: coercivity,
        decoupled,
        warning,
    };
    let solution = HumSolution { controls, report };
    if converged {
        Ok(solution)
    } else {
        Err(Error::HumNonConvergence {
            residual: final_residual,
            iterations,
            residual_history: history,
            best: Box::new(solution),
        })
    }
}

/// Closed-loop check: forward solve from (y0, y1) with the given controls and
/// report the terminal quantities.
pub fn verify_null(
    ops: &DiscreteOperators,
    y0: &[f64],
    y1: &[f64],
    controls: &ControlPair,
    t_final: f64,
) -> Result<HumReport> {
    let steps = controls.f_d.len().saturating_sub(1).max(2);
    let opts = solve_opts(steps);
    let traj = solve_forward(
        ops,
        y0,
        y1,
        &controls.to_boundary_data(),
        t_final,
        Scheme::ImplicitMidpoint,
        &opts,
    )?;
    Ok(HumReport {
        iterations: 0,
        cg_residual: 0.0,
        converged: true,
        terminal_energy: interior_energy(ops, &traj.last.y, &traj.last.v)?,
        terminal_state_norm: interior_state_norm(ops, &traj.last.y, &traj.last.v)?,
        initial_state_norm: interior_state_norm(ops, y0, y1)?,
        control_l2: controls.l2_norm(),
        lambda_coercivity_estimate: 0.0,
        decoupled: false,
        warning: None,
    })
}
