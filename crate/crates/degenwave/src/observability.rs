//! Boundary observability of the homogeneous system: observation energies of
//! trajectories, verification of the weighted observability inequality, and
//! empirical observability constants over low-frequency ensembles.

use crate::error::{Error, Result};
use crate::mesh::DiscreteOperators;
use crate::modal::{filtered_mode_count, ModalBasis};
use crate::solver::{solve_forward, trapz, BoundaryData, Scheme, SolveOptions, Trajectory};
use crate::weights::{
    analyze, observability_bound_coefficient, observability_constant, DegeneracyReport,
    DomainSpec, WeightSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Observation energies of one homogeneous trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservabilityResult {
    /// int y_x(t,c)^2 dt + int y_x(t,d)^2 dt.
    pub obs_energy: f64,
    /// (1-c) a(c) int y_x(t,c)^2 dt + (d-1) a(d) int y_x(t,d)^2 dt.
    pub weighted_obs: f64,
    pub e0: f64,
    /// weighted_obs / E(0).
    pub ratio: f64,
    /// Theoretical coefficient of E(0) on the right-hand side of the
    /// inequality at this horizon (can be <= 0 below the observability time).
    pub bound: f64,
}

/// Quadrature of the boundary observation integrals of a homogeneous run.
pub fn observe(traj: &Trajectory, w: &WeightSpec, dom: &DomainSpec) -> Result<ObservabilityResult> {
    let report = analyze(w, dom)?;
    observe_with_report(traj, &report, dom)
}

/// Same as `observe` with a precomputed degeneracy report.
pub fn observe_with_report(
    traj: &Trajectory,
    report: &DegeneracyReport,
    dom: &DomainSpec,
) -> Result<ObservabilityResult> {
    let e0 = traj.energy.first().copied().unwrap_or(0.0);
    if e0 <= 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let sq_c: Vec<f64> = traj.flux_c.iter().map(|f| f * f).collect();
    let sq_d: Vec<f64> = traj.flux_d.iter().map(|f| f * f).collect();
    let int_c = trapz(&sq_c, traj.dt);
    let int_d = trapz(&sq_d, traj.dt);
    let weighted_obs = (1.0 - dom.c) * report.a_c * int_c + (dom.d - 1.0) * report.a_d * int_d;
    let t_horizon = *traj.times.last().unwrap();
    Ok(ObservabilityResult {
        obs_energy: int_c + int_d,
        weighted_obs,
        e0,
        ratio: weighted_obs / e0,
        bound: observability_bound_coefficient(report, t_horizon),
    })
}

/// Ensemble of random low-frequency initial data: coefficients uniform in
/// [-1, 1] on the lowest modes, position coefficients scaled by 1/sqrt(lambda)
/// so every mode carries comparable energy. Deterministic given the seed.
pub fn low_frequency_ensemble(
    ops: &DiscreteOperators,
    ensemble_size: usize,
    seed: u64,
    filter_frac: f64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    if ensemble_size == 0 {
        return Err(Error::Precondition("ensemble size must be >= 1".into()));
    }
    if !(filter_frac > 0.0 && filter_frac <= 1.0) {
        return Err(Error::Precondition(format!(
            "filter fraction {filter_frac} outside (0, 1]"
        )));
    }
    let k = filtered_mode_count(ops.n_cells(), filter_frac);
    let basis = ModalBasis::lowest(ops, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members = Vec::with_capacity(ensemble_size);
    for _ in 0..ensemble_size {
        let pos: Vec<f64> = (0..k)
            .map(|j| rng.gen_range(-1.0..1.0) / basis.eigenvalues[j].sqrt())
            .collect();
        let vel: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        members.push((basis.synthesize(&pos), basis.synthesize(&vel)));
    }
    Ok(members)
}

/// Empirical observability constant: the minimum over a random low-frequency
/// ensemble of weighted_obs / E(0) (observability is a worst-case notion, so
/// the ensemble minimum is reported, not the mean).
#[allow(clippy::too_many_arguments)]
pub fn empirical_constant(
    w: &WeightSpec,
    dom: &DomainSpec,
    ops: &DiscreteOperators,
    t_horizon: f64,
    ensemble_size: usize,
    seed: u64,
    filter_frac: f64,
    opts: &SolveOptions,
) -> Result<f64> {
    let report = analyze(w, dom)?;
    let members = low_frequency_ensemble(ops, ensemble_size, seed, filter_frac)?;
    let ratios: Vec<f64> = members
        .par_iter()
        .map(|(y0, y1)| -> Result<f64> {
            let traj = solve_forward(
                ops,
                y0,
                y1,
                &BoundaryData::zero(t_horizon),
                t_horizon,
                Scheme::ImplicitMidpoint,
                opts,
            )?;
            Ok(observe_with_report(&traj, &report, dom)?.ratio)
        })
        .collect::<Result<_>>()?;
    Ok(ratios.into_iter().fold(f64::INFINITY, f64::min))
}

/// One row of an observability sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    /// Power exponent when the weight is a symmetric power.
    pub p: Option<f64>,
    pub t_horizon: f64,
    pub ta: f64,
    /// Theoretical observability constant C_T (normalized form).
    pub c_t_theory: f64,
    /// Empirical minimum of weighted_obs / E0 over the ensemble.
    pub c_emp: f64,
    /// Relative margin of the empirical constant over the theoretical
    /// right-hand-side coefficient: 1 - bound / c_emp (NaN when the bound is
    /// not positive).
    pub slack: f64,
}

pub struct SweepParams {
    pub ensemble_size: usize,
    pub seed: u64,
    pub filter_frac: f64,
    pub solve: SolveOptions,
}

/// Run the observability experiment over a family of weights and horizons.
/// `horizons_for` maps each weight's degeneracy report to the horizons to
/// measure (absolute times or multiples of its observability time).
pub fn sweep(
    family: &[(String, WeightSpec)],
    dom: &DomainSpec,
    horizons_for: impl Fn(&DegeneracyReport) -> Vec<f64>,
    ops_for: impl Fn(&WeightSpec) -> Result<DiscreteOperators>,
    params: &SweepParams,
) -> Result<Vec<SweepRow>> {
    if family.is_empty() {
        return Err(Error::Precondition("sweep needs a nonempty weight list".into()));
    }
    let mut rows = Vec::new();
    for (idx, (label, w)) in family.iter().enumerate() {
        let report = analyze(w, dom)?;
        let ops = ops_for(w)?;
        let t_list = horizons_for(&report);
        if t_list.is_empty() {
            return Err(Error::Precondition("sweep needs a nonempty horizon list".into()));
        }
        for (jdx, &t_horizon) in t_list.iter().enumerate() {
            let member_seed = params
                .seed
                .wrapping_add((idx * t_list.len() + jdx) as u64 * 0x9e3779b97f4a7c15);
            let c_emp = empirical_constant(
                w,
                dom,
                &ops,
                t_horizon,
                params.ensemble_size,
                member_seed,
                params.filter_frac,
                &params.solve,
            )?;
            let bound = observability_bound_coefficient(&report, t_horizon);
            let slack = if bound > 0.0 && c_emp > 0.0 {
                1.0 - bound / c_emp
            } else {
                f64::NAN
            };
            rows.push(SweepRow {
                label: label.clone(),
                p: match w {
                    WeightSpec::SymmetricPower { p } => Some(*p),
                    _ => None,
                },
                t_horizon,
                ta: report.ta,
                c_t_theory: observability_constant(&report, dom, t_horizon),
                c_emp,
                slack,
            });
        }
    }
    Ok(rows)
}
