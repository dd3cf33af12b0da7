//! Experiment configuration: structured key-value text (TOML sections with
//! scalar keys), strict about unknown keys, with all semantic violations
//! reported at once.

use crate::error::{Error, Result};
use crate::hum::ActiveSide;
use crate::solver::{LinearSolver, Scheme};
use crate::weights::{DomainSpec, TabulatedWeight, WeightSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    AnalyzeWeight,
    Simulate,
    ObservabilitySweep,
    Hum,
    Convergence,
    Decoupling,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub c: f64,
    pub d: f64,
    pub x1star: Option<f64>,
    pub x2star: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct WeightSection {
    pub kind: String,
    pub p: Option<f64>,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub value: Option<f64>,
    /// Two- or three-column text file (x, a [, a']) for tabulated weights,
    /// resolved relative to the configuration file.
    pub file: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub n: usize,
    pub grading: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SolverSection {
    pub scheme: Option<String>,
    pub cfl_safety: Option<f64>,
    pub steps: Option<usize>,
    pub linear_solver: Option<String>,
    pub implicit_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub t_final: f64,
    pub snapshot_stride: Option<usize>,
    /// Initial data: "fundamental" (default), "bump-left", "bump-right",
    /// or "random" (seeded low-frequency combination).
    pub data: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ObservabilitySection {
    /// Symmetric-power exponents to sweep; empty/absent sweeps the
    /// configured weight only.
    pub p_list: Option<Vec<f64>>,
    pub t_list: Option<Vec<f64>>,
    /// Horizons as multiples of the observability time (exclusive with t_list).
    pub t_factors: Option<Vec<f64>>,
    pub ensemble_size: usize,
    pub filter_frac: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HumSection {
    pub t_final: Option<f64>,
    /// Horizon as a multiple of the observability time (exclusive with t_final).
    pub t_factor: Option<f64>,
    pub tol: Option<f64>,
    pub maxiter: Option<usize>,
    pub filter_frac: Option<f64>,
    pub gram_filter_frac: Option<f64>,
    pub active: Option<String>,
    /// Initial data selector, as in [simulate].
    pub data: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub n_list: Vec<usize>,
    pub t_final: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DecouplingSection {
    pub n_list: Vec<usize>,
    pub t_final: f64,
    pub side: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    pub snapshot_stride: Option<usize>,
}

/// Raw deserialized configuration (one file per run).
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: ExperimentKind,
    pub seed: Option<u64>,
    /// Worker pool size for ensemble members; 0 or absent = all cores.
    pub workers: Option<usize>,
    pub domain: DomainSection,
    pub weight: WeightSection,
    pub mesh: MeshSection,
    pub solver: Option<SolverSection>,
    pub simulate: Option<SimulateSection>,
    pub observability: Option<ObservabilitySection>,
    pub hum: Option<HumSection>,
    pub convergence: Option<ConvergenceSection>,
    pub decoupling: Option<DecouplingSection>,
    pub output: OutputSection,
}

/// Fully validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub workers: usize,
    pub dom: DomainSpec,
    pub weight: WeightSpec,
    pub mesh_n: usize,
    pub grading: f64,
    pub scheme: Scheme,
    pub cfl_safety: f64,
    pub steps: Option<usize>,
    pub linear_solver: LinearSolver,
    pub simulate: Option<SimulateSection>,
    pub observability: Option<ObservabilitySection>,
    pub hum: Option<HumSection>,
    pub convergence: Option<ConvergenceSection>,
    pub decoupling: Option<DecouplingSection>,
    pub output_dir: PathBuf,
    pub snapshot_stride: usize,
    pub raw_text: String,
}

/// Parse and validate a configuration file's text. `base_dir` resolves
/// relative paths (tabulated weight files). Reports every violation found,
/// not just the first.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| Error::Config(vec![format!("syntax/schema error: {e}")]))?;
    let mut violations: Vec<String> = Vec::new();

    let x1star = raw.domain.x1star.unwrap_or(raw.domain.c);
    let x2star = raw.domain.x2star.unwrap_or(raw.domain.d);
    let dom = match DomainSpec::new(raw.domain.c, raw.domain.d, x1star, x2star) {
        Ok(dom) => Some(dom),
        Err(e) => {
            violations.push(format!("[domain] {e}"));
            None
        }
    };

    let weight = build_weight(&raw.weight, base_dir, &mut violations);
    if let (Some(dom), Some(w)) = (&dom, &weight) {
        if let Err(e) = w.validate(dom) {
            violations.push(format!(
                "[weight] {e} (the degeneracy exponent must lie in (0, 2))"
            ));
        }
    }

    if raw.mesh.n < 8 || !raw.mesh.n.is_multiple_of(2) {
        violations.push(format!(
            "[mesh] n = {} must be even and >= 8 so that x = 1 is a grid node",
            raw.mesh.n
        ));
    }
    let grading = raw.mesh.grading.unwrap_or(1.05);
    if grading.is_nan() || grading < 1.0 {
        violations.push(format!("[mesh] grading = {grading} must be >= 1"));
    }

    let solver = raw.solver.clone().unwrap_or(SolverSection {
        scheme: None,
        cfl_safety: None,
        steps: None,
        linear_solver: None,
        implicit_tol: None,
    });
    let scheme = match solver.scheme.as_deref() {
        None | Some("implicit-midpoint") => Scheme::ImplicitMidpoint,
        Some("leapfrog") => Scheme::Leapfrog,
        Some(other) => {
            violations.push(format!(
                "[solver] unknown scheme {other:?} (expected \"leapfrog\" or \"implicit-midpoint\")"
            ));
            Scheme::ImplicitMidpoint
        }
    };
    let cfl_safety = solver.cfl_safety.unwrap_or(0.9);
    if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
        violations.push(format!("[solver] cfl_safety = {cfl_safety} outside (0, 1]"));
    }
    let implicit_tol = solver.implicit_tol.unwrap_or(1e-12);
    let linear_solver = match solver.linear_solver.as_deref() {
        None | Some("direct") => LinearSolver::Direct,
        Some("pcg") => LinearSolver::Pcg { tol: implicit_tol },
        Some(other) => {
            violations.push(format!(
                "[solver] unknown linear_solver {other:?} (expected \"direct\" or \"pcg\")"
            ));
            LinearSolver::Direct
        }
    };

    match raw.experiment {
        ExperimentKind::Simulate if raw.simulate.is_none() => {
            violations.push("[simulate] section required for the simulate experiment".into())
        }
        ExperimentKind::ObservabilitySweep if raw.observability.is_none() => violations
            .push("[observability] section required for the observability-sweep experiment".into()),
        ExperimentKind::Hum if raw.hum.is_none() => {
            violations.push("[hum] section required for the hum experiment".into())
        }
        ExperimentKind::Convergence if raw.convergence.is_none() => {
            violations.push("[convergence] section required for the convergence experiment".into())
        }
        ExperimentKind::Decoupling if raw.decoupling.is_none() => {
            violations.push("[decoupling] section required for the decoupling experiment".into())
        }
        _ => {}
    }

    if let Some(sim) = &raw.simulate {
        if sim.t_final <= 0.0 {
            violations.push(format!("[simulate] t_final = {} must be > 0", sim.t_final));
        }
        check_data_selector("simulate", sim.data.as_deref(), &mut violations);
    }
    if let Some(hum) = &raw.hum {
        check_data_selector("hum", hum.data.as_deref(), &mut violations);
    }
    if let Some(obs) = &raw.observability {
        if obs.ensemble_size == 0 {
            violations.push("[observability] ensemble_size must be >= 1".into());
        }
        let frac = obs.filter_frac.unwrap_or(0.25);
        if !(frac > 0.0 && frac <= 1.0) {
            violations.push(format!("[observability] filter_frac = {frac} outside (0, 1]"));
        }
        let has_t = obs.t_list.as_ref().map(|l| !l.is_empty()).unwrap_or(false);
        let has_f = obs.t_factors.as_ref().map(|l| !l.is_empty()).unwrap_or(false);
        if has_t == has_f {
            violations.push(
                "[observability] exactly one of t_list / t_factors must be given (nonempty)".into(),
            );
        }
        if let Some(ps) = &obs.p_list {
            for &p in ps {
                if !(p > 0.0 && p < 2.0) {
                    violations.push(format!(
                        "[observability] p = {p} rejected: the exponent must lie in (0, 2)"
                    ));
                }
            }
        }
    }
    if let Some(hum) = &raw.hum {
        match (hum.t_final, hum.t_factor) {
            (Some(t), None) if t <= 0.0 => {
                violations.push(format!("[hum] t_final = {t} must be > 0"))
            }
            (None, Some(f)) if f <= 0.0 => {
                violations.push(format!("[hum] t_factor = {f} must be > 0"))
            }
            (Some(_), Some(_)) | (None, None) => violations
                .push("[hum] exactly one of t_final / t_factor must be given".into()),
            _ => {}
        }
        if let Some(frac) = hum.filter_frac {
            if !(frac > 0.0 && frac <= 1.0) {
                violations.push(format!("[hum] filter_frac = {frac} outside (0, 1]"));
            }
        }
        match hum.active.as_deref() {
            None | Some("both") | Some("right-only") => {}
            Some(other) => violations.push(format!(
                "[hum] unknown active side {other:?} (expected \"both\" or \"right-only\")"
            )),
        }
    }
    for (name, list) in [
        ("convergence", raw.convergence.as_ref().map(|c| &c.n_list)),
        ("decoupling", raw.decoupling.as_ref().map(|c| &c.n_list)),
    ] {
        if let Some(list) = list {
            if list.len() < if name == "convergence" { 3 } else { 1 } {
                violations.push(format!("[{name}] n_list too short"));
            }
            for &n in list {
                if n < 8 || !n.is_multiple_of(2) {
                    violations.push(format!("[{name}] n = {n} must be even and >= 8"));
                }
            }
        }
    }
    if let Some(dec) = &raw.decoupling {
        match dec.side.as_deref() {
            None | Some("left") | Some("right") => {}
            Some(other) => violations.push(format!(
                "[decoupling] unknown side {other:?} (expected \"left\" or \"right\")"
            )),
        }
    }

    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    Ok(ExperimentConfig {
        experiment: raw.experiment,
        seed: raw.seed.unwrap_or(0),
        workers: raw.workers.unwrap_or(0),
        dom: dom.unwrap(),
        weight: weight.unwrap(),
        mesh_n: raw.mesh.n,
        grading,
        scheme,
        cfl_safety,
        steps: solver.steps,
        linear_solver,
        simulate: raw.simulate,
        observability: raw.observability,
        hum: raw.hum,
        convergence: raw.convergence,
        decoupling: raw.decoupling,
        output_dir: PathBuf::from(&raw.output.dir),
        snapshot_stride: raw.output.snapshot_stride.unwrap_or(0),
        raw_text: text.to_string(),
    })
}

fn build_weight(
    section: &WeightSection,
    base_dir: &Path,
    violations: &mut Vec<String>,
) -> Option<WeightSpec> {
    match section.kind.as_str() {
        "symmetric-power" => match section.p {
            Some(p) => Some(WeightSpec::SymmetricPower { p }),
            None => {
                violations.push("[weight] symmetric-power needs `p`".into());
                None
            }
        },
        "two-sided-power" => match (section.p1, section.p2) {
            (Some(p1), Some(p2)) => Some(WeightSpec::TwoSidedPower { p1, p2 }),
            _ => {
                violations.push("[weight] two-sided-power needs `p1` and `p2`".into());
                None
            }
        },
        "uniform" => match section.value {
            Some(value) => Some(WeightSpec::Uniform { value }),
            None => {
                violations.push("[weight] uniform needs `value`".into());
                None
            }
        },
        "tabulated" => match &section.file {
            Some(file) => {
                let path = base_dir.join(file);
                match std::fs::read_to_string(&path) {
                    Ok(text) => match TabulatedWeight::parse_text(&text) {
                        Ok(t) => Some(WeightSpec::Tabulated(t)),
                        Err(e) => {
                            violations.push(format!("[weight] {}: {e}", path.display()));
                            None
                        }
                    },
                    Err(e) => {
                        violations.push(format!("[weight] cannot read {}: {e}", path.display()));
                        None
                    }
                }
            }
            None => {
                violations.push("[weight] tabulated needs `file`".into());
                None
            }
        },
        other => {
            violations.push(format!(
                "[weight] unknown kind {other:?} (expected symmetric-power, two-sided-power, \
                 tabulated, or uniform)"
            ));
            None
        }
    }
}

fn check_data_selector(section: &str, data: Option<&str>, violations: &mut Vec<String>) {
    match data {
        None | Some("fundamental") | Some("bump-left") | Some("bump-right") | Some("random") => {}
        Some(other) => violations.push(format!(
            "[{section}] unknown data selector {other:?} (expected fundamental, bump-left, \
             bump-right, or random)"
        )),
    }
}

/// Load and validate a configuration from disk.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}

pub fn active_side_from(hum: &HumSection) -> ActiveSide {
    match hum.active.as_deref() {
        Some("right-only") => ActiveSide::RightOnly,
        _ => ActiveSide::Both,
    }
}
