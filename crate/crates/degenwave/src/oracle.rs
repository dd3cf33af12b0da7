//! Independent reference computations for tests: the eigenmode series
//! solution of the constant-coefficient string, self-convergence order
//! measurement, and the strong-regime decoupling check.

use crate::error::{Error, Result};
use crate::mesh::{build_mesh, DiscreteOperators};
use crate::solver::{solve_forward, BoundaryData, Scheme, SolveOptions};
use crate::weights::{classify, DegeneracyClass, DomainSpec, WeightSpec};
use std::f64::consts::PI;

/// Eigenmode series solution of y_tt = speed^2 y_xx on (c, d) with
/// homogeneous Dirichlet conditions.
#[derive(Debug, Clone)]
pub struct ModalSeries {
    pub c: f64,
    pub length: f64,
    pub speed: f64,
    /// Coefficients of the position datum against sin(k pi (x-c)/L).
    pub pos_coeffs: Vec<f64>,
    /// Coefficients of the velocity datum.
    pub vel_coeffs: Vec<f64>,
    /// L2 norm of the projection residual of the data (truncation tail).
    pub tail_bound: f64,
}

impl ModalSeries {
    /// Project initial data onto the lowest `n_modes` eigenmodes by composite
    /// Simpson quadrature.
    pub fn project(
        c: f64,
        d: f64,
        speed: f64,
        y0: impl Fn(f64) -> f64,
        y1: impl Fn(f64) -> f64,
        n_modes: usize,
    ) -> Result<ModalSeries> {
        if d <= c || speed <= 0.0 {
            return Err(Error::Precondition("need c < d and speed > 0".into()));
        }
        let length = d - c;
        let n_modes = n_modes.max(1);
        let quad_points = (8 * n_modes).max(2048);
        let pos_coeffs = sine_coefficients(&y0, c, length, n_modes, quad_points);
        let vel_coeffs = sine_coefficients(&y1, c, length, n_modes, quad_points);
        // Truncation tail: L2 distance between the data and their projection.
        let tail = |f: &dyn Fn(f64) -> f64, coeffs: &[f64]| -> f64 {
            let mut acc = 0.0;
            let m = quad_points;
            for i in 0..=m {
                let x = c + length * i as f64 / m as f64;
                let series: f64 = coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * ((k + 1) as f64 * PI * (x - c) / length).sin())
                    .sum();
                let w = if i == 0 || i == m { 0.5 } else { 1.0 };
                acc += w * (f(x) - series).powi(2) * length / m as f64;
            }
            acc.sqrt()
        };
        let tail_bound = tail(&y0, &pos_coeffs).max(tail(&y1, &vel_coeffs));
        Ok(ModalSeries { c, length, speed, pos_coeffs, vel_coeffs, tail_bound })
    }

    /// Series constructed directly from mode coefficients.
    pub fn from_coefficients(
        c: f64,
        d: f64,
        speed: f64,
        pos_coeffs: Vec<f64>,
        vel_coeffs: Vec<f64>,
    ) -> ModalSeries {
        ModalSeries {
            c,
            length: d - c,
            speed,
            pos_coeffs,
            vel_coeffs,
            tail_bound: 0.0,
        }
    }

    fn omega(&self, k: usize) -> f64 {
        self.speed * (k + 1) as f64 * PI / self.length
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let mut sum = 0.0;
        for k in 0..self.pos_coeffs.len().max(self.vel_coeffs.len()) {
            let omega = self.omega(k);
            let phi = ((k + 1) as f64 * PI * (x - self.c) / self.length).sin();
            let a = self.pos_coeffs.get(k).copied().unwrap_or(0.0);
            let b = self.vel_coeffs.get(k).copied().unwrap_or(0.0);
            sum += (a * (omega * t).cos() + b / omega * (omega * t).sin()) * phi;
        }
        sum
    }

    pub fn eval_velocity(&self, t: f64, x: f64) -> f64 {
        let mut sum = 0.0;
        for k in 0..self.pos_coeffs.len().max(self.vel_coeffs.len()) {
            let omega = self.omega(k);
            let phi = ((k + 1) as f64 * PI * (x - self.c) / self.length).sin();
            let a = self.pos_coeffs.get(k).copied().unwrap_or(0.0);
            let b = self.vel_coeffs.get(k).copied().unwrap_or(0.0);
            sum += (-a * omega * (omega * t).sin() + b * (omega * t).cos()) * phi;
        }
        sum
    }

    /// Conserved energy of the truncated series (Parseval):
    /// (L/4) sum (omega_k^2 A_k^2 + B_k^2).
    pub fn energy(&self) -> f64 {
        let mut sum = 0.0;
        for k in 0..self.pos_coeffs.len().max(self.vel_coeffs.len()) {
            let omega = self.omega(k);
            let a = self.pos_coeffs.get(k).copied().unwrap_or(0.0);
            let b = self.vel_coeffs.get(k).copied().unwrap_or(0.0);
            sum += omega * omega * a * a + b * b;
        }
        0.25 * self.length * sum
    }

    /// Centered finite-difference residual of y_tt - speed^2 y_xx at (t, x).
    pub fn pde_residual(&self, t: f64, x: f64, step: f64) -> f64 {
        let ytt =
            (self.eval(t + step, x) - 2.0 * self.eval(t, x) + self.eval(t - step, x)) / (step * step);
        let yxx =
            (self.eval(t, x + step) - 2.0 * self.eval(t, x) + self.eval(t, x - step)) / (step * step);
        ytt - self.speed * self.speed * yxx
    }
}

fn sine_coefficients(
    f: &impl Fn(f64) -> f64,
    c: f64,
    length: f64,
    n_modes: usize,
    quad_points: usize,
) -> Vec<f64> {
    // Composite Simpson with an even panel count.
    let m = if quad_points.is_multiple_of(2) { quad_points } else { quad_points + 1 };
    let h = length / m as f64;
    (1..=n_modes)
        .map(|k| {
            let mut acc = 0.0;
            for i in 0..=m {
                let x = c + h * i as f64;
                let w = if i == 0 || i == m {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * f(x) * (k as f64 * PI * (x - c) / length).sin();
            }
            acc * h / 3.0 * 2.0 / length
        })
        .collect()
}

/// Observed order of convergence of a family of runs against the finest one.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// (n, L2 error against the finest run), coarse to fine.
    pub errors: Vec<(usize, f64)>,
    /// Least-squares slope of log error against log h.
    pub observed_order: f64,
    /// Errors decreased monotonically.
    pub monotone: bool,
}

/// Run `run_fn` at each resolution and measure the terminal L2 error against
/// the finest grid (piecewise-linear comparison on 2048 uniform points).
/// `run_fn` returns (nodes, terminal values).
pub fn self_convergence(
    run_fn: impl Fn(usize) -> Result<(Vec<f64>, Vec<f64>)>,
    n_list: &[usize],
) -> Result<ConvergenceReport> {
    if n_list.len() < 3 {
        return Err(Error::Precondition(format!(
            "need at least 3 mesh sizes, got {}",
            n_list.len()
        )));
    }
    let mut sorted = n_list.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Precondition("mesh sizes must be distinct".into()));
    }
    let runs: Vec<(usize, Vec<f64>, Vec<f64>)> = sorted
        .iter()
        .map(|&n| run_fn(n).map(|(nodes, vals)| (n, nodes, vals)))
        .collect::<Result<_>>()?;
    let (_, fine_nodes, fine_vals) = runs.last().unwrap();
    let lo = fine_nodes[0];
    let hi = *fine_nodes.last().unwrap();
    let samples = 2048;
    let sample_xs: Vec<f64> = (0..=samples)
        .map(|i| lo + (hi - lo) * i as f64 / samples as f64)
        .collect();
    let fine_at: Vec<f64> = sample_xs
        .iter()
        .map(|&x| linear_interp(fine_nodes, fine_vals, x))
        .collect();
    let mut errors = Vec::new();
    for (n, nodes, vals) in &runs[..runs.len() - 1] {
        let mut err2 = 0.0;
        for (i, &x) in sample_xs.iter().enumerate() {
            let d = linear_interp(nodes, vals, x) - fine_at[i];
            let w = if i == 0 || i == samples { 0.5 } else { 1.0 };
            err2 += w * d * d * (hi - lo) / samples as f64;
        }
        errors.push((*n, err2.sqrt()));
    }
    let monotone = errors.windows(2).all(|w| w[1].1 <= w[0].1);
    // Least-squares slope of ln(err) against ln(1/n).
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(n, e)| ((1.0 / *n as f64).ln(), e.ln()))
        .collect();
    let observed_order = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    } else {
        f64::NAN
    };
    Ok(ConvergenceReport { errors, observed_order, monotone })
}

fn linear_interp(nodes: &[f64], vals: &[f64], x: f64) -> f64 {
    if x <= nodes[0] {
        return vals[0];
    }
    if x >= *nodes.last().unwrap() {
        return *vals.last().unwrap();
    }
    let k = match nodes.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
        Ok(k) => return vals[k],
        Err(k) => k - 1,
    };
    let t = (x - nodes[k]) / (nodes[k + 1] - nodes[k]);
    vals[k] * (1.0 - t) + vals[k + 1] * t
}

/// Which side of the degeneracy carries the initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSide {
    Left,
    Right,
}

/// Forward solve with data supported strictly on one side of x = 1 under a
/// strongly degenerate weight; returns the maximum over time of the energy
/// fraction that leaks to the other side.
pub fn decoupling_check(
    w: &WeightSpec,
    dom: &DomainSpec,
    n: usize,
    grading: f64,
    t_final: f64,
    steps: usize,
    side: DataSide,
) -> Result<f64> {
    if classify(w, dom)? != DegeneracyClass::Strong {
        return Err(Error::Precondition(
            "decoupling check requires a strongly degenerate weight".into(),
        ));
    }
    let mesh = build_mesh(dom, w, n, grading)?;
    let ops = DiscreteOperators::new(&mesh);
    let (lo, hi) = match side {
        DataSide::Left => (dom.c + 0.2 * (1.0 - dom.c), dom.c + 0.8 * (1.0 - dom.c)),
        DataSide::Right => (1.0 + 0.2 * (dom.d - 1.0), 1.0 + 0.8 * (dom.d - 1.0)),
    };
    let y0: Vec<f64> = ops
        .nodes
        .iter()
        .map(|&x| {
            if x > lo && x < hi {
                (PI * (x - lo) / (hi - lo)).sin().powi(2)
            } else {
                0.0
            }
        })
        .collect();
    let y1 = vec![0.0; n + 1];
    let total0 = ops.discrete_energy(&y0, &y1)?;
    if total0 == 0.0 {
        return Ok(0.0);
    }
    let opts = SolveOptions {
        steps: Some(steps),
        record_side_energy: true,
        ..Default::default()
    };
    let traj = solve_forward(
        &ops,
        &y0,
        &y1,
        &BoundaryData::zero(t_final),
        t_final,
        Scheme::ImplicitMidpoint,
        &opts,
    )?;
    let (left, right) = traj.side_energy.as_ref().unwrap();
    let other = match side {
        DataSide::Left => right,
        DataSide::Right => left,
    };
    Ok(other.iter().fold(0.0f64, |m, &e| m.max(e)) / total0)
}
