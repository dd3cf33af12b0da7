//! Time integration of the degenerate wave transmission problem: forward with
//! Dirichlet boundary data, backward (adjoint) with homogeneous data, boundary
//! trace and energy recording, and the multiplier/virial identity
//! accumulators.
//!
//! Two integrators: explicit leapfrog (fast, CFL-bound) and implicit midpoint
//! (unconditionally stable, conserves the discrete energy exactly up to
//! round-off for homogeneous boundary data). The midpoint scheme is also
//! time-reversible and self-adjoint, which is what the HUM Gramian needs.

use crate::error::{Error, Result};
use crate::mesh::DiscreteOperators;
use crate::tridiag::{pcg_solve, SymTridiag};

/// Displacement/velocity pair at one instant.
#[derive(Debug, Clone)]
pub struct State {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

/// Time-sampled Dirichlet boundary data, linearly interpolated between
/// samples.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub f_c: Vec<f64>,
    pub f_d: Vec<f64>,
    pub dt: f64,
}

impl BoundaryData {
    pub fn zero(t_final: f64) -> Self {
        BoundaryData {
            f_c: vec![0.0, 0.0],
            f_d: vec![0.0, 0.0],
            dt: t_final.max(f64::MIN_POSITIVE),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.f_c.iter().all(|&v| v == 0.0) && self.f_d.iter().all(|&v| v == 0.0)
    }

    fn sample(values: &[f64], dt: f64, t: f64) -> f64 {
        if values.is_empty() {
            return 0.0;
        }
        let s = t / dt;
        let k = s.floor() as isize;
        if k < 0 {
            return values[0];
        }
        let k = k as usize;
        if k + 1 >= values.len() {
            return *values.last().unwrap();
        }
        let frac = s - k as f64;
        values[k] * (1.0 - frac) + values[k + 1] * frac
    }

    pub fn eval_c(&self, t: f64) -> f64 {
        Self::sample(&self.f_c, self.dt, t)
    }

    pub fn eval_d(&self, t: f64) -> f64 {
        Self::sample(&self.f_d, self.dt, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Leapfrog,
    ImplicitMidpoint,
}

/// How the implicit midpoint linear systems are solved. The matrices are
/// symmetric positive definite tridiagonal, so the direct sweep is exact;
/// diagonally preconditioned CG is available as the iterative alternative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearSolver {
    Direct,
    Pcg { tol: f64 },
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Explicit step count; dt = T / steps.
    pub steps: Option<usize>,
    /// Target dt when `steps` is unset; rounded so the grid hits T exactly.
    pub dt_hint: Option<f64>,
    /// Safety factor for the leapfrog stability bound.
    pub cfl_safety: f64,
    /// Accumulate the multiplier/virial identity integrals.
    pub record_identities: bool,
    /// Record per-side energies at every step.
    pub record_side_energy: bool,
    /// Keep every k-th state (0 = none).
    pub snapshot_stride: usize,
    pub linear_solver: LinearSolver,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            steps: None,
            dt_hint: None,
            cfl_safety: 0.9,
            record_identities: false,
            record_side_energy: false,
            snapshot_stride: 0,
            linear_solver: LinearSolver::Direct,
        }
    }
}

/// Accumulated space-time integrals for the boundary-trace multiplier
/// identity and the virial identity of the homogeneous problem.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    /// (1-c) a(c) int y_x(t,c)^2 + (d-1) a(d) int y_x(t,d)^2.
    pub multiplier_boundary: f64,
    /// 2 [int (x-1) y_x y_t dx]_0^T
    /// + int int (y_t^2 + [a - (x-1) a'] y_x^2) dx dt.
    pub multiplier_interior: f64,
    /// int int (a y_x^2 - y_t^2) dx dt.
    pub virial_bulk: f64,
    /// [int y y_t dx]_0^T.
    pub virial_boundary: f64,
    /// int int (a y_x^2 + y_t^2) dx dt, for normalization.
    pub action_scale: f64,
}

impl IdentityReport {
    pub fn multiplier_residual(&self) -> f64 {
        (self.multiplier_boundary - self.multiplier_interior).abs()
            / self.multiplier_boundary.abs().max(self.multiplier_interior.abs())
    }

    pub fn virial_residual(&self) -> f64 {
        (self.virial_bulk + self.virial_boundary).abs() / self.action_scale.max(f64::MIN_POSITIVE)
    }
}

/// Recorded run: boundary derivative traces and energy at every step, plus
/// the first and last states (optionally decimated snapshots in between).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Second-order one-sided y_x at x = c and x = d.
    pub flux_c: Vec<f64>,
    pub flux_d: Vec<f64>,
    /// First-order wall derivatives (the discrete adjoints of Dirichlet
    /// injection; used by the HUM machinery).
    pub wall_c: Vec<f64>,
    pub wall_d: Vec<f64>,
    pub energy: Vec<f64>,
    pub snapshots: Vec<State>,
    pub first: State,
    pub last: State,
    pub identities: Option<IdentityReport>,
    /// (left, right) energies per step when requested.
    pub side_energy: Option<(Vec<f64>, Vec<f64>)>,
    pub dt: f64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }
}

/// Trapezoidal quadrature on a uniform grid.
pub fn trapz(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    dt * (0.5 * values[0] + inner + 0.5 * values[values.len() - 1])
}

/// Midpoint-in-time quadrature of a product of step samples:
/// sum_n dt * mean(u_n, u_{n+1}) * mean(v_n, v_{n+1}).
/// This is the quadrature under which the midpoint scheme satisfies the
/// discrete transposition identity exactly.
pub fn midpoint_product_quadrature(u: &[f64], v: &[f64], dt: f64) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let mut sum = 0.0;
    for n in 0..u.len().saturating_sub(1) {
        sum += 0.25 * (u[n] + u[n + 1]) * (v[n] + v[n + 1]);
    }
    dt * sum
}

/// Stability bound for the explicit scheme: safety * min over cells of
/// h / sqrt(a at the cell midpoint).
pub fn cfl_dt(ops: &DiscreteOperators, safety: f64) -> f64 {
    let min_ratio = ops
        .cell_widths
        .iter()
        .zip(&ops.a_mid)
        .map(|(h, a)| h / a.sqrt())
        .fold(f64::INFINITY, f64::min);
    safety * min_ratio
}

fn resolve_steps(
    ops: &DiscreteOperators,
    t_final: f64,
    scheme: Scheme,
    opts: &SolveOptions,
) -> Result<(usize, f64)> {
    if t_final <= 0.0 {
        return Err(Error::Precondition(format!("t_final = {t_final} <= 0")));
    }
    let steps = if let Some(s) = opts.steps {
        s.max(1)
    } else if let Some(hint) = opts.dt_hint {
        (t_final / hint).ceil().max(1.0) as usize
    } else {
        match scheme {
            Scheme::Leapfrog => {
                let dt = cfl_dt(ops, opts.cfl_safety);
                (t_final / dt).ceil().max(1.0) as usize
            }
            // Resolution comparable to the spatial grid.
            Scheme::ImplicitMidpoint => {
                let n = ops.n_cells() as f64;
                ((t_final * n / (ops.nodes[ops.n_cells()] - ops.nodes[0])).ceil() as usize).max(256)
            }
        }
    };
    let dt = t_final / steps as f64;
    if scheme == Scheme::Leapfrog {
        let bound = cfl_dt(ops, 1.0);
        if dt > bound {
            return Err(Error::Stability { dt, bound });
        }
    }
    Ok((steps, dt))
}

struct Recorder<'a> {
    ops: &'a DiscreteOperators,
    dt: f64,
    steps: usize,
    traj: Trajectory,
    // Identity accumulators (trapezoid over integer steps).
    acc_mult: f64,
    acc_virial: f64,
    acc_action: f64,
    cross_first: f64,
    virial_first: f64,
}

impl<'a> Recorder<'a> {
    fn new(ops: &'a DiscreteOperators, dt: f64, steps: usize, opts: &SolveOptions) -> Self {
        let cap = steps + 1;
        Recorder {
            ops,
            dt,
            steps,
            traj: Trajectory {
                times: Vec::with_capacity(cap),
                flux_c: Vec::with_capacity(cap),
                flux_d: Vec::with_capacity(cap),
                wall_c: Vec::with_capacity(cap),
                wall_d: Vec::with_capacity(cap),
                energy: Vec::with_capacity(cap),
                snapshots: Vec::new(),
                first: State { y: Vec::new(), v: Vec::new(), t: 0.0 },
                last: State { y: Vec::new(), v: Vec::new(), t: 0.0 },
                identities: if opts.record_identities {
                    Some(IdentityReport {
                        multiplier_boundary: 0.0,
                        multiplier_interior: 0.0,
                        virial_bulk: 0.0,
                        virial_boundary: 0.0,
                        action_scale: 0.0,
                    })
                } else {
                    None
                },
                side_energy: if opts.record_side_energy {
                    Some((Vec::with_capacity(cap), Vec::with_capacity(cap)))
                } else {
                    None
                },
                dt,
            },
            acc_mult: 0.0,
            acc_virial: 0.0,
            acc_action: 0.0,
            cross_first: 0.0,
            virial_first: 0.0,
        }
    }

    fn record(&mut self, step: usize, y: &[f64], v: &[f64], stride: usize) -> Result<()> {
        let t = step as f64 * self.dt;
        let (fc, fd) = self.ops.boundary_flux(y)?;
        let (wc, wd) = self.ops.wall_flux(y);
        let e = self.ops.discrete_energy(y, v)?;
        self.traj.times.push(t);
        self.traj.flux_c.push(fc);
        self.traj.flux_d.push(fd);
        self.traj.wall_c.push(wc);
        self.traj.wall_d.push(wd);
        self.traj.energy.push(e);
        if let Some((left, right)) = self.traj.side_energy.as_mut() {
            let (l, r) = self.ops.side_energies(y, v);
            left.push(l);
            right.push(r);
        }
        if stride > 0 && step.is_multiple_of(stride) {
            self.traj.snapshots.push(State { y: y.to_vec(), v: v.to_vec(), t });
        }
        if step == 0 {
            self.traj.first = State { y: y.to_vec(), v: v.to_vec(), t };
        }
        if step == self.steps {
            self.traj.last = State { y: y.to_vec(), v: v.to_vec(), t };
        }
        if self.traj.identities.is_some() {
            self.accumulate_identities(step, y, v);
        }
        Ok(())
    }

    fn accumulate_identities(&mut self, step: usize, y: &[f64], v: &[f64]) {
        let ops = self.ops;
        let kinetic = ops.lumped_inner(v, v);
        let mut elastic = 0.0;
        let mut mult_term = 0.0;
        let mut cross = 0.0;
        for k in 0..ops.n_cells() {
            let h = ops.cell_widths[k];
            let slope = (y[k + 1] - y[k]) / h;
            let a = ops.a_mid[k];
            let da = ops.da_mid[k];
            let xm1 = ops.mid_x[k] - 1.0;
            elastic += a * slope * slope * h;
            mult_term += (a - xm1 * da) * slope * slope * h;
            cross += xm1 * slope * 0.5 * (v[k] + v[k + 1]) * h;
        }
        let weight = if step == 0 || step == self.steps { 0.5 } else { 1.0 };
        self.acc_mult += weight * self.dt * (kinetic + mult_term);
        self.acc_virial += weight * self.dt * (elastic - kinetic);
        self.acc_action += weight * self.dt * (elastic + kinetic);
        let virial_bnd = ops.lumped_inner(y, v);
        if step == 0 {
            self.cross_first = cross;
            self.virial_first = virial_bnd;
        }
        if step == self.steps {
            if let Some(id) = self.traj.identities.as_mut() {
                id.multiplier_interior = 2.0 * (cross - self.cross_first) + self.acc_mult;
                id.virial_bulk = self.acc_virial;
                id.virial_boundary = virial_bnd - self.virial_first;
                id.action_scale = self.acc_action;
            }
        }
    }

    fn finish(mut self, c: f64, d: f64) -> Trajectory {
        if let Some(id) = self.traj.identities.as_mut() {
            let int_c = trapz(
                &self.traj.flux_c.iter().map(|f| f * f).collect::<Vec<_>>(),
                self.dt,
            );
            let int_d = trapz(
                &self.traj.flux_d.iter().map(|f| f * f).collect::<Vec<_>>(),
                self.dt,
            );
            id.multiplier_boundary =
                (1.0 - c) * self.ops.a_c * int_c + (d - 1.0) * self.ops.a_d * int_d;
        }
        self.traj
    }
}

/// Integrate the controlled problem forward over [0, T].
///
/// Dirichlet values are imposed strongly at the boundary nodes each step (the
/// stored boundary entries of y0 are overridden by the data at t = 0, which
/// keeps the discrete transposition identity exact for controls that do not
/// vanish initially).
pub fn solve_forward(
    ops: &DiscreteOperators,
    y0: &[f64],
    y1: &[f64],
    bdata: &BoundaryData,
    t_final: f64,
    scheme: Scheme,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    let n = ops.n_cells();
    for vec in [y0, y1] {
        if vec.len() != n + 1 {
            return Err(Error::LengthMismatch { got: vec.len(), expected: n + 1 });
        }
    }
    let (steps, dt) = resolve_steps(ops, t_final, scheme, opts)?;
    match scheme {
        Scheme::ImplicitMidpoint => {
            run_midpoint(ops, y0, y1, bdata, steps, dt, opts)
        }
        Scheme::Leapfrog => run_leapfrog(ops, y0, y1, bdata, steps, dt, opts),
    }
}

fn run_midpoint(
    ops: &DiscreteOperators,
    y0: &[f64],
    y1: &[f64],
    bdata: &BoundaryData,
    steps: usize,
    dt: f64,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    let n = ops.n_cells();
    let quarter = 0.25 * dt * dt;
    let mass = ops.interior_mass();
    let stiff = ops.interior_stiffness();
    let system = SymTridiag {
        diag: stiff
            .diag
            .iter()
            .zip(&mass)
            .map(|(a, m)| m + quarter * a)
            .collect(),
        off: stiff.off.iter().map(|o| quarter * o).collect(),
    };

    let mut y = y0.to_vec();
    let mut v = y1.to_vec();
    y[0] = bdata.eval_c(0.0);
    y[n] = bdata.eval_d(0.0);

    let mut recorder = Recorder::new(ops, dt, steps, opts);
    recorder.record(0, &y, &v, opts.snapshot_stride)?;

    let mut staged = vec![0.0; n + 1];
    let mut rhs = vec![0.0; n - 1];
    for step in 0..steps {
        let t_next = (step + 1) as f64 * dt;
        let gc = bdata.eval_c(t_next);
        let gd = bdata.eval_d(t_next);
        ops.apply_stiffness_into(&y, &mut staged);
        for i in 1..n {
            rhs[i - 1] = mass[i - 1] * (y[i] + dt * v[i]) - quarter * mass[i - 1] * staged[i];
        }
        rhs[0] += quarter * ops.flux_coef[0] * gc;
        rhs[n - 2] += quarter * ops.flux_coef[n - 1] * gd;
        let interior = match opts.linear_solver {
            LinearSolver::Direct => system.solve(&rhs)?,
            LinearSolver::Pcg { tol } => pcg_solve(&system, &rhs, tol, 10 * (n + 1))?,
        };
        let mut y_next = vec![0.0; n + 1];
        y_next[0] = gc;
        y_next[n] = gd;
        y_next[1..n].copy_from_slice(&interior);
        for i in 0..=n {
            v[i] = 2.0 * (y_next[i] - y[i]) / dt - v[i];
        }
        y = y_next;
        recorder.record(step + 1, &y, &v, opts.snapshot_stride)?;
    }
    Ok(recorder.finish(ops.nodes[0], ops.nodes[n]))
}

fn run_leapfrog(
    ops: &DiscreteOperators,
    y0: &[f64],
    y1: &[f64],
    bdata: &BoundaryData,
    steps: usize,
    dt: f64,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    let n = ops.n_cells();
    let mut y_prev = y0.to_vec();
    y_prev[0] = bdata.eval_c(0.0);
    y_prev[n] = bdata.eval_d(0.0);

    let mut recorder = Recorder::new(ops, dt, steps, opts);
    let mut staged = vec![0.0; n + 1];

    // Taylor start-up keeps second-order accuracy.
    ops.apply_stiffness_into(&y_prev, &mut staged);
    let mut y_cur = vec![0.0; n + 1];
    for i in 1..n {
        y_cur[i] = y_prev[i] + dt * y1[i] - 0.5 * dt * dt * staged[i];
    }
    y_cur[0] = bdata.eval_c(dt);
    y_cur[n] = bdata.eval_d(dt);

    recorder.record(0, &y_prev, y1, opts.snapshot_stride)?;
    if steps == 1 {
        let v_end = end_velocity(&y_cur, &y_prev, y0, dt);
        recorder.record(1, &y_cur, &v_end, opts.snapshot_stride)?;
        return Ok(recorder.finish(ops.nodes[0], ops.nodes[n]));
    }

    let mut y_older;
    for step in 1..steps {
        ops.apply_stiffness_into(&y_cur, &mut staged);
        let t_next = (step + 1) as f64 * dt;
        let mut y_next = vec![0.0; n + 1];
        for i in 1..n {
            y_next[i] = 2.0 * y_cur[i] - y_prev[i] - dt * dt * staged[i];
        }
        y_next[0] = bdata.eval_c(t_next);
        y_next[n] = bdata.eval_d(t_next);
        // Central-difference velocity at the current step.
        let v_cur: Vec<f64> = (0..=n)
            .map(|i| (y_next[i] - y_prev[i]) / (2.0 * dt))
            .collect();
        recorder.record(step, &y_cur, &v_cur, opts.snapshot_stride)?;
        y_older = y_prev;
        y_prev = y_cur;
        y_cur = y_next;
        if step + 1 == steps {
            let v_end = end_velocity(&y_cur, &y_prev, &y_older, dt);
            recorder.record(steps, &y_cur, &v_end, opts.snapshot_stride)?;
        }
    }
    Ok(recorder.finish(ops.nodes[0], ops.nodes[n]))
}

/// Second-order one-sided velocity at the final step.
fn end_velocity(y_end: &[f64], y_mid: &[f64], y_old: &[f64], dt: f64) -> Vec<f64> {
    (0..y_end.len())
        .map(|i| (3.0 * y_end[i] - 4.0 * y_mid[i] + y_old[i]) / (2.0 * dt))
        .collect()
}

/// Integrate the backward homogeneous problem with final data (w0, w1) at
/// t = T, via the substitution u(s, x) = w(T - s, x). The returned trajectory
/// is indexed by the original time t: traces and energies are reversed,
/// `first` holds (w(0), w_t(0)) and `last` the supplied final data.
pub fn solve_backward(
    ops: &DiscreteOperators,
    w0_final: &[f64],
    w1_final: &[f64],
    t_final: f64,
    scheme: Scheme,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    let n = ops.n_cells();
    if w0_final.len() != n + 1 || w1_final.len() != n + 1 {
        return Err(Error::LengthMismatch {
            got: w0_final.len().max(w1_final.len()),
            expected: n + 1,
        });
    }
    if w0_final[0] != 0.0 || w0_final[n] != 0.0 {
        return Err(Error::Precondition(
            "backward final position datum must vanish at the endpoints".into(),
        ));
    }
    let negated: Vec<f64> = w1_final.iter().map(|v| -v).collect();
    let bdata = BoundaryData::zero(t_final);
    let mut forward = solve_forward(ops, w0_final, &negated, &bdata, t_final, scheme, opts)?;

    forward.flux_c.reverse();
    forward.flux_d.reverse();
    forward.wall_c.reverse();
    forward.wall_d.reverse();
    forward.energy.reverse();
    if let Some((l, r)) = forward.side_energy.as_mut() {
        l.reverse();
        r.reverse();
    }
    for s in forward.snapshots.iter_mut() {
        s.t = t_final - s.t;
        for v in s.v.iter_mut() {
            *v = -*v;
        }
    }
    forward.snapshots.reverse();
    let first = State {
        y: forward.last.y.clone(),
        v: forward.last.v.iter().map(|v| -v).collect(),
        t: 0.0,
    };
    let last = State {
        y: w0_final.to_vec(),
        v: w1_final.to_vec(),
        t: t_final,
    };
    forward.first = first;
    forward.last = last;
    forward.identities = None;
    Ok(forward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, DiscreteOperators};
    use crate::weights::{DomainSpec, WeightSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn dom02() -> DomainSpec {
        DomainSpec::whole_interval(0.0, 2.0).unwrap()
    }

    fn make_ops(w: &WeightSpec, n: usize, grading: f64) -> DiscreteOperators {
        DiscreteOperators::new(&build_mesh(&dom02(), w, n, grading).unwrap())
    }

    #[test]
    fn cfl_uniform_coefficient() {
        let ops = make_ops(&WeightSpec::Uniform { value: 1.0 }, 8, 1.0);
        assert_relative_eq!(cfl_dt(&ops, 1.0), 0.25, max_relative = 1e-14);
        assert_relative_eq!(cfl_dt(&ops, 0.9), 0.225, max_relative = 1e-14);
    }

    #[test]
    fn cfl_capped_by_largest_coefficient() {
        // |x-1| on a uniform 8-cell mesh: the binding cell is the one with
        // the largest midpoint coefficient, a = 0.875.
        let ops = make_ops(&WeightSpec::SymmetricPower { p: 1.0 }, 8, 1.0);
        assert_relative_eq!(
            cfl_dt(&ops, 1.0),
            0.25 / 0.875f64.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn zero_data_stays_zero() {
        let ops = make_ops(&WeightSpec::SymmetricPower { p: 0.5 }, 16, 1.0);
        let z = vec![0.0; 17];
        let bdata = BoundaryData::zero(1.0);
        for scheme in [Scheme::Leapfrog, Scheme::ImplicitMidpoint] {
            let traj =
                solve_forward(&ops, &z, &z, &bdata, 1.0, scheme, &SolveOptions::default()).unwrap();
            assert!(traj.energy.iter().all(|&e| e == 0.0));
            assert!(traj.last.y.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn leapfrog_refuses_unstable_step() {
        let ops = make_ops(&WeightSpec::Uniform { value: 1.0 }, 16, 1.0);
        let z = vec![0.0; 17];
        let opts = SolveOptions { dt_hint: Some(0.5), ..Default::default() };
        let err = solve_forward(
            &ops,
            &z,
            &z,
            &BoundaryData::zero(1.0),
            1.0,
            Scheme::Leapfrog,
            &opts,
        );
        assert!(matches!(err, Err(Error::Stability { .. })));
    }

    /// Nondegenerate eigenmode: y0 = sin(pi x / 2) on (0,2) evolves as
    /// cos(pi t / 2) sin(pi x / 2); the terminal L2 error is O(h^2).
    fn eigenmode_error(scheme: Scheme, n: usize) -> f64 {
        let ops = make_ops(&WeightSpec::Uniform { value: 1.0 }, n, 1.0);
        let y0: Vec<f64> = ops.nodes.iter().map(|x| (PI * x / 2.0).sin()).collect();
        let y1 = vec![0.0; n + 1];
        let opts = SolveOptions { steps: Some(2 * n), ..Default::default() };
        let traj = solve_forward(
            &ops,
            &y0,
            &y1,
            &BoundaryData::zero(1.0),
            1.0,
            scheme,
            &opts,
        )
        .unwrap();
        let mut err2 = 0.0;
        for (i, x) in ops.nodes.iter().enumerate() {
            let exact = (PI / 2.0).cos() * (PI * x / 2.0).sin();
            err2 += ops.lumped[i] * (traj.last.y[i] - exact).powi(2);
        }
        err2.sqrt()
    }

    #[test]
    fn forward_solver_is_second_order() {
        for scheme in [Scheme::Leapfrog, Scheme::ImplicitMidpoint] {
            let e1 = eigenmode_error(scheme, 32);
            let e2 = eigenmode_error(scheme, 64);
            let e3 = eigenmode_error(scheme, 128);
            let order1 = (e1 / e2).log2();
            let order2 = (e2 / e3).log2();
            assert!(
                (1.7..2.3).contains(&order1) && (1.7..2.3).contains(&order2),
                "{scheme:?}: orders {order1:.2}, {order2:.2}"
            );
        }
    }

    #[test]
    fn midpoint_conserves_energy_exactly() {
        let ops = make_ops(&WeightSpec::SymmetricPower { p: 0.5 }, 128, 1.05);
        let y0: Vec<f64> = ops.nodes.iter().map(|x| (PI * x / 2.0).sin()).collect();
        let y1: Vec<f64> = ops.nodes.iter().map(|x| (PI * x).sin()).collect();
        let opts = SolveOptions { steps: Some(12_000), ..Default::default() };
        let traj = solve_forward(
            &ops,
            &y0,
            &y1,
            &BoundaryData::zero(12.0),
            12.0,
            Scheme::ImplicitMidpoint,
            &opts,
        )
        .unwrap();
        let e0 = traj.energy[0];
        for e in &traj.energy {
            assert!((e - e0).abs() <= 1e-8 * e0, "drift {}", (e - e0).abs() / e0);
        }
    }

    #[test]
    fn leapfrog_energy_oscillates_without_drift() {
        let ops = make_ops(&WeightSpec::SymmetricPower { p: 0.5 }, 128, 1.0);
        let y0: Vec<f64> = ops.nodes.iter().map(|x| (PI * x / 2.0).sin()).collect();
        let y1 = vec![0.0; 129];
        let traj = solve_forward(
            &ops,
            &y0,
            &y1,
            &BoundaryData::zero(10.0),
            10.0,
            Scheme::Leapfrog,
            &SolveOptions::default(),
        )
        .unwrap();
        let e0 = traj.energy[0];
        for e in &traj.energy {
            assert!((e - e0).abs() <= 1e-3 * e0, "oscillation {}", (e - e0).abs() / e0);
        }
    }

    #[test]
    fn strong_weight_decouples_the_sides() {
        // Data supported right of 1 with a strongly degenerate coefficient:
        // the left side stays quiet.
        let ops = make_ops(&WeightSpec::SymmetricPower { p: 1.5 }, 256, 1.05);
        let y0: Vec<f64> = ops
            .nodes
            .iter()
            .map(|&x| {
                if (1.2..=1.8).contains(&x) {
                    (PI * (x - 1.2) / 0.6).sin().powi(2)
                } else {
                    0.0
                }
            })
            .collect();
        let y1 = vec![0.0; 257];
        let opts = SolveOptions {
            steps: Some(2048),
            record_side_energy: true,
            ..Default::default()
        };
        let traj = solve_forward(
            &ops,
            &y0,
            &y1,
            &BoundaryData::zero(2.0),
            2.0,
            Scheme::ImplicitMidpoint,
            &opts,
        )
        .unwrap();
        let (left, _right) = traj.side_energy.as_ref().unwrap();
        let total = traj.energy[0];
        let max_leak = left.iter().fold(0.0f64, |m, &l| m.max(l)) / total;
        assert!(max_leak < 1e-4, "leak fraction {max_leak}");
    }

    #[test]
    fn backward_of_zero_data_is_zero() {
        let ops = make_ops(&WeightSpec::SymmetricPower { p: 0.5 }, 16, 1.0);
        let z = vec![0.0; 17];
        let traj =
            solve_backward(&ops, &z, &z, 1.0, Scheme::ImplicitMidpoint, &SolveOptions::default())
                .unwrap();
        assert!(traj.energy.iter().all(|&e| e == 0.0));
        assert!(traj.first.y.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn backward_reverses_forward() {
        let ops = make_ops(&WeightSpec::SymmetricPower { p: 0.5 }, 64, 1.0);
        let y0: Vec<f64> = ops.nodes.iter().map(|x| (PI * x / 2.0).sin()).collect();
        let y1: Vec<f64> = ops
            .nodes
            .iter()
            .map(|&x| if x < 1.0 { x * (1.0 - x) } else { 0.0 })
            .collect();
        let opts = SolveOptions { steps: Some(512), ..Default::default() };
        let t_final = 1.5;
        let fwd = solve_forward(
            &ops,
            &y0,
            &y1,
            &BoundaryData::zero(t_final),
            t_final,
            Scheme::ImplicitMidpoint,
            &opts,
        )
        .unwrap();
        let back =
            solve_backward(&ops, &fwd.last.y, &fwd.last.v, t_final, Scheme::ImplicitMidpoint, &opts)
                .unwrap();
        // The midpoint scheme is time-reversible, so w(0) reproduces the
        // initial data to round-off.
        for i in 0..=64 {
            assert_relative_eq!(back.first.y[i], y0[i], epsilon = 1e-10);
            assert_relative_eq!(back.first.v[i], y1[i], epsilon = 1e-10);
        }
        // Backward energy is the forward energy, constant in time.
        let e_final = back.energy[back.energy.len() - 1];
        for e in &back.energy {
            assert!((e - e_final).abs() <= 1e-8 * e_final);
        }
    }

    #[test]
    fn backward_rejects_nonzero_endpoint_datum() {
        let ops = make_ops(&WeightSpec::SymmetricPower { p: 0.5 }, 16, 1.0);
        let mut w0 = vec![0.0; 17];
        w0[0] = 1.0;
        let w1 = vec![0.0; 17];
        assert!(matches!(
            solve_backward(&ops, &w0, &w1, 1.0, Scheme::ImplicitMidpoint, &SolveOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn pcg_linear_solver_matches_direct() {
        let ops = make_ops(&WeightSpec::SymmetricPower { p: 0.5 }, 64, 1.0);
        let y0: Vec<f64> = ops.nodes.iter().map(|x| (PI * x / 2.0).sin()).collect();
        let y1 = vec![0.0; 65];
        let bdata = BoundaryData::zero(1.0);
        let base = SolveOptions { steps: Some(128), ..Default::default() };
        let direct =
            solve_forward(&ops, &y0, &y1, &bdata, 1.0, Scheme::ImplicitMidpoint, &base).unwrap();
        let pcg_opts = SolveOptions {
            linear_solver: LinearSolver::Pcg { tol: 1e-12 },
            ..base
        };
        let iterative =
            solve_forward(&ops, &y0, &y1, &bdata, 1.0, Scheme::ImplicitMidpoint, &pcg_opts)
                .unwrap();
        for (a, b) in direct.last.y.iter().zip(&iterative.last.y) {
            assert_relative_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn dirichlet_data_enters_through_the_boundary() {
        // Constant boundary lift: with f_c = f_d = 1 and zero initial data the
        // solution tends toward the constant 1 profile near the walls.
        let ops = make_ops(&WeightSpec::Uniform { value: 1.0 }, 32, 1.0);
        let z = vec![0.0; 33];
        let bdata = BoundaryData { f_c: vec![1.0, 1.0], f_d: vec![1.0, 1.0], dt: 1.0 };
        let traj = solve_forward(
            &ops,
            &z,
            &z,
            &bdata,
            1.0,
            Scheme::ImplicitMidpoint,
            &SolveOptions { steps: Some(256), ..Default::default() },
        )
        .unwrap();
        assert_eq!(traj.last.y[0], 1.0);
        assert_eq!(traj.last.y[32], 1.0);
        assert!(traj.last.y[1] > 0.1);
        assert!(traj.energy.last().unwrap() > &0.0);
    }
}
