//! Configuration-driven experiment runner: dispatches the configured
//! experiment, writes CSV/JSON artifacts plus a manifest listing every
//! produced file, deterministically for a given (config, seed).

use crate::config::{active_side_from, ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::hum::{solve_hum, HumParams, HumReport};
use crate::mesh::{build_mesh, DiscreteOperators, Mesh};
use crate::observability::{sweep, SweepParams};
use crate::oracle::{decoupling_check, self_convergence, DataSide};
use crate::solver::{solve_forward, BoundaryData, SolveOptions, Trajectory};
use crate::weights::{analyze, classify, envelope_lower_bounds, DegeneracyClass, WeightSpec};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// Files produced by a run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    experiment: ExperimentKind,
    seed: u64,
    config_sha256: String,
    files: &'a [String],
}

struct OutputWriter {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutputWriter {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(OutputWriter { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name))
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        w.write_record(header)
            .and_then(|_| rows.iter().try_for_each(|r| w.write_record(r)))
            .and_then(|_| w.flush().map_err(csv::Error::from))
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn binary(&mut self, name: &str, body: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Run a validated configuration; returns the produced files. Outputs are
/// byte-identical across runs with the same configuration and seed.
pub fn run(config: &ExperimentConfig, out_override: Option<&Path>) -> Result<RunSummary> {
    let out_dir = out_override.unwrap_or(&config.output_dir).to_path_buf();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Precondition(format!("worker pool: {e}")))?;
    let mut out = OutputWriter::new(&out_dir)?;
    pool.install(|| match config.experiment {
        ExperimentKind::AnalyzeWeight => run_analyze(config, &mut out),
        ExperimentKind::Simulate => run_simulate(config, &mut out),
        ExperimentKind::ObservabilitySweep => run_sweep(config, &mut out),
        ExperimentKind::Hum => run_hum(config, &mut out),
        ExperimentKind::Convergence => run_convergence(config, &mut out),
        ExperimentKind::Decoupling => run_decoupling(config, &mut out),
    })?;

    let mut files = out.files.clone();
    files.push("manifest.json".to_string());
    files.sort();
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        experiment: config.experiment,
        seed: config.seed,
        config_sha256: hex_digest(&config.raw_text),
        files: &files,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(out_dir.join("manifest.json"), text)?;
    Ok(RunSummary { out_dir, files })
}

fn hex_digest(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn build_operators(config: &ExperimentConfig) -> Result<(Mesh, DiscreteOperators)> {
    let mesh = build_mesh(&config.dom, &config.weight, config.mesh_n, config.grading)?;
    let ops = DiscreteOperators::new(&mesh);
    Ok((mesh, ops))
}

fn solve_options(config: &ExperimentConfig) -> SolveOptions {
    SolveOptions {
        steps: config.steps,
        cfl_safety: config.cfl_safety,
        linear_solver: config.linear_solver,
        ..Default::default()
    }
}

/// Initial data selectors shared by the simulate and hum experiments.
fn initial_data(
    selector: Option<&str>,
    ops: &DiscreteOperators,
    dom_c: f64,
    dom_d: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = ops.n_nodes();
    let length = dom_d - dom_c;
    let zero = vec![0.0; n];
    match selector.unwrap_or("fundamental") {
        "fundamental" => {
            let y0 = ops
                .nodes
                .iter()
                .map(|&x| (PI * (x - dom_c) / length).sin())
                .collect();
            Ok((y0, zero))
        }
        "bump-left" => Ok((bump(ops, dom_c + 0.2 * (1.0 - dom_c), dom_c + 0.8 * (1.0 - dom_c)), zero)),
        "bump-right" => Ok((
            bump(ops, 1.0 + 0.2 * (dom_d - 1.0), 1.0 + 0.8 * (dom_d - 1.0)),
            zero,
        )),
        "random" => {
            let members = crate::observability::low_frequency_ensemble(ops, 1, seed, 0.25)?;
            Ok(members.into_iter().next().unwrap())
        }
        other => Err(Error::Precondition(format!("unknown data selector {other:?}"))),
    }
}

fn bump(ops: &DiscreteOperators, lo: f64, hi: f64) -> Vec<f64> {
    ops.nodes
        .iter()
        .map(|&x| {
            if x > lo && x < hi {
                (PI * (x - lo) / (hi - lo)).sin().powi(2)
            } else {
                0.0
            }
        })
        .collect()
}

fn run_analyze(config: &ExperimentConfig, out: &mut OutputWriter) -> Result<()> {
    let report = analyze(&config.weight, &config.dom)?;
    out.json("report.json", &report)?;

    let samples = 512;
    let rows: Vec<Vec<String>> = (0..=samples)
        .map(|k| -> Result<Vec<String>> {
            let x = config.dom.c + (config.dom.d - config.dom.c) * k as f64 / samples as f64;
            let (a, _) = config.weight.eval(&config.dom, x)?;
            let b = envelope_lower_bounds(&config.weight, &config.dom, x)?;
            Ok(vec![
                fmt(x),
                fmt(a),
                fmt(b.global),
                b.inner.map(fmt).unwrap_or_default(),
            ])
        })
        .collect::<Result<_>>()?;
    out.csv("envelope.csv", &["x", "a", "bound_global", "bound_inner"], &rows)?;

    let (mesh, _) = build_operators(config)?;
    let mut dump = Vec::new();
    mesh.dump(&mut dump)?;
    out.text("mesh.txt", std::str::from_utf8(&dump).unwrap_or_default())?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary {
    scheme: String,
    steps: usize,
    dt: f64,
    e0: f64,
    e_final: f64,
    max_drift_rel: f64,
}

fn trajectory_csv(traj: &Trajectory) -> Vec<Vec<String>> {
    (0..traj.times.len())
        .map(|k| {
            vec![
                fmt(traj.times[k]),
                fmt(traj.energy[k]),
                fmt(traj.flux_c[k]),
                fmt(traj.flux_d[k]),
            ]
        })
        .collect()
}

fn run_simulate(config: &ExperimentConfig, out: &mut OutputWriter) -> Result<()> {
    let sim = config.simulate.as_ref().unwrap();
    let (mesh, ops) = build_operators(config)?;
    let (y0, y1) = initial_data(sim.data.as_deref(), &ops, config.dom.c, config.dom.d, config.seed)?;
    let stride = sim.snapshot_stride.unwrap_or(config.snapshot_stride);
    let opts = SolveOptions { snapshot_stride: stride, ..solve_options(config) };
    let traj = solve_forward(
        &ops,
        &y0,
        &y1,
        &BoundaryData::zero(sim.t_final),
        sim.t_final,
        config.scheme,
        &opts,
    )?;
    out.csv(
        "trajectory.csv",
        &["t", "E", "flux_c", "flux_d"],
        &trajectory_csv(&traj),
    )?;
    let e0 = traj.energy[0];
    let max_drift = traj
        .energy
        .iter()
        .fold(0.0f64, |m, &e| m.max((e - e0).abs()))
        / e0.max(f64::MIN_POSITIVE);
    out.json(
        "summary.json",
        &SimulateSummary {
            scheme: format!("{:?}", config.scheme),
            steps: traj.steps(),
            dt: traj.dt,
            e0,
            e_final: *traj.energy.last().unwrap(),
            max_drift_rel: max_drift,
        },
    )?;
    if stride > 0 {
        out.binary("snapshots.bin", &encode_snapshots(&traj))?;
    }
    let mut dump = Vec::new();
    mesh.dump(&mut dump)?;
    out.text("mesh.txt", std::str::from_utf8(&dump).unwrap_or_default())?;
    Ok(())
}

/// Snapshot dump: magic, node count, snapshot count, then per snapshot the
/// time followed by the y and v vectors, all little-endian f64/u64.
fn encode_snapshots(traj: &Trajectory) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(b"DGWSNAP1");
    let n_nodes = traj.first.y.len() as u64;
    buf.extend_from_slice(&n_nodes.to_le_bytes());
    buf.extend_from_slice(&(traj.snapshots.len() as u64).to_le_bytes());
    for snap in &traj.snapshots {
        buf.extend_from_slice(&snap.t.to_le_bytes());
        for v in snap.y.iter().chain(&snap.v) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

fn run_sweep(config: &ExperimentConfig, out: &mut OutputWriter) -> Result<()> {
    let obs = config.observability.as_ref().unwrap();
    let family: Vec<(String, WeightSpec)> = match &obs.p_list {
        Some(ps) if !ps.is_empty() => ps
            .iter()
            .map(|&p| (format!("p={p}"), WeightSpec::SymmetricPower { p }))
            .collect(),
        _ => vec![("configured".to_string(), config.weight.clone())],
    };
    let params = SweepParams {
        ensemble_size: obs.ensemble_size,
        seed: config.seed,
        filter_frac: obs.filter_frac.unwrap_or(0.25),
        solve: solve_options(config),
    };
    let rows = sweep(
        &family,
        &config.dom,
        |report| match (&obs.t_list, &obs.t_factors) {
            (Some(ts), _) if !ts.is_empty() => ts.clone(),
            (_, Some(fs)) => fs.iter().map(|f| f * report.ta).collect(),
            _ => unreachable!("validated"),
        },
        |w| Ok(DiscreteOperators::new(&build_mesh(&config.dom, w, config.mesh_n, config.grading)?)),
        &params,
    )?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.p.map(fmt).unwrap_or_else(|| r.label.clone()),
                fmt(r.t_horizon),
                fmt(r.ta),
                fmt(r.c_t_theory),
                fmt(r.c_emp),
                fmt(r.slack),
            ]
        })
        .collect();
    out.csv(
        "sweep.csv",
        &["p", "T", "Ta", "C_T_theory", "C_emp", "slack"],
        &csv_rows,
    )?;

    // Plot-ready observability-time curve over the exponent range.
    let curve: Vec<Vec<String>> = (1..200)
        .map(|k| -> Result<Vec<String>> {
            let p = k as f64 * 0.01;
            let report = analyze(&WeightSpec::SymmetricPower { p }, &config.dom)?;
            Ok(vec![fmt(p), fmt(report.ta)])
        })
        .collect::<Result<_>>()?;
    out.csv("ta_curve.csv", &["p", "Ta"], &curve)?;
    Ok(())
}

fn run_hum(config: &ExperimentConfig, out: &mut OutputWriter) -> Result<()> {
    let hum = config.hum.as_ref().unwrap();
    let (_, ops) = build_operators(config)?;
    let class = classify(&config.weight, &config.dom)?;
    let ta = if config.weight.is_degenerate() {
        Some(analyze(&config.weight, &config.dom)?.ta)
    } else {
        None
    };
    let t_final = match (hum.t_final, hum.t_factor) {
        (Some(t), _) => t,
        (None, Some(f)) => {
            let ta = ta.ok_or_else(|| {
                Error::Precondition(
                    "t_factor needs a degenerate weight with an observability time".into(),
                )
            })?;
            f * ta
        }
        _ => unreachable!("validated"),
    };
    let (y0, y1) = initial_data(hum.data.as_deref(), &ops, config.dom.c, config.dom.d, config.seed)?;
    let params = HumParams {
        tol: hum.tol.unwrap_or(1e-8),
        max_iterations: hum.maxiter.unwrap_or(500),
        filter_frac: hum.filter_frac.unwrap_or(0.25),
        gram_filter_frac: hum.gram_filter_frac,
        active: active_side_from(hum),
        steps: config.steps,
    };
    let solution = solve_hum(&ops, class, ta, &y0, &y1, t_final, &params)?;
    write_hum_outputs(
        out,
        &solution.controls.f_c,
        &solution.controls.f_d,
        solution.controls.dt,
        &solution.report,
    )?;
    Ok(())
}

fn write_hum_outputs(
    out: &mut OutputWriter,
    f_c: &[f64],
    f_d: &[f64],
    dt: f64,
    report: &HumReport,
) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..f_c.len())
        .map(|k| vec![fmt(k as f64 * dt), fmt(f_c[k]), fmt(f_d[k])])
        .collect();
    out.csv("controls.csv", &["t", "f_c", "f_d"], &rows)?;
    out.json("hum_report.json", report)?;
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceSummary {
    observed_order: f64,
    monotone: bool,
}

fn run_convergence(config: &ExperimentConfig, out: &mut OutputWriter) -> Result<()> {
    let conv = config.convergence.as_ref().unwrap();
    let t_final = conv.t_final;
    let run_at = |n: usize| -> Result<(Vec<f64>, Vec<f64>)> {
        let mesh = build_mesh(&config.dom, &config.weight, n, config.grading)?;
        let ops = DiscreteOperators::new(&mesh);
        let (y0, y1) = initial_data(None, &ops, config.dom.c, config.dom.d, config.seed)?;
        let opts = SolveOptions { steps: Some(4 * n), ..solve_options(config) };
        let traj = solve_forward(
            &ops,
            &y0,
            &y1,
            &BoundaryData::zero(t_final),
            t_final,
            config.scheme,
            &opts,
        )?;
        Ok((ops.nodes.clone(), traj.last.y))
    };
    let report = self_convergence(run_at, &conv.n_list)?;
    let rows: Vec<Vec<String>> = report
        .errors
        .iter()
        .map(|(n, e)| vec![n.to_string(), fmt(*e)])
        .collect();
    out.csv("convergence.csv", &["n", "error"], &rows)?;
    out.json(
        "convergence.json",
        &ConvergenceSummary {
            observed_order: report.observed_order,
            monotone: report.monotone,
        },
    )?;
    Ok(())
}

fn run_decoupling(config: &ExperimentConfig, out: &mut OutputWriter) -> Result<()> {
    let dec = config.decoupling.as_ref().unwrap();
    if classify(&config.weight, &config.dom)? != DegeneracyClass::Strong {
        return Err(Error::Precondition(
            "decoupling experiment requires a strongly degenerate weight".into(),
        ));
    }
    let side = match dec.side.as_deref() {
        Some("left") => DataSide::Left,
        _ => DataSide::Right,
    };
    let rows: Vec<Vec<String>> = dec
        .n_list
        .iter()
        .map(|&n| -> Result<Vec<String>> {
            let steps = config.steps.unwrap_or(4 * n);
            let leak = decoupling_check(
                &config.weight,
                &config.dom,
                n,
                config.grading,
                dec.t_final,
                steps,
                side,
            )?;
            Ok(vec![n.to_string(), fmt(leak)])
        })
        .collect::<Result<_>>()?;
    out.csv("decoupling.csv", &["n", "leak_fraction"], &rows)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn run_in_temp(config_text: &str) -> (tempfile::TempDir, RunSummary) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(config_text, dir.path()).unwrap();
        let out = dir.path().join("out");
        let summary = run(&cfg, Some(&out)).unwrap();
        (dir, summary)
    }

    const ANALYZE: &str = r#"
experiment = "analyze-weight"

[domain]
c = 0.0
d = 2.0

[weight]
kind = "symmetric-power"
p = 1.0

[mesh]
n = 64
grading = 1.0

[output]
dir = "unused"
"#;

    #[test]
    fn analyze_writes_expected_constants() {
        let (_tmp, summary) = run_in_temp(ANALYZE);
        let report: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(summary.out_dir.join("report.json")).unwrap(),
        )
        .unwrap();
        let mu1 = report["mu1"].as_f64().unwrap();
        let ca = report["ca"].as_f64().unwrap();
        let da = report["da"].as_f64().unwrap();
        let ta = report["ta"].as_f64().unwrap();
        assert_eq!(mu1, 1.0);
        assert!((ca * ca - 4.0).abs() < 1e-12);
        assert!((da * da - 1.0).abs() < 1e-12);
        assert!((ta - 5.0).abs() < 1e-12);
    }

    #[test]
    fn manifest_lists_every_file() {
        let (_tmp, summary) = run_in_temp(ANALYZE);
        let manifest: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(summary.out_dir.join("manifest.json")).unwrap(),
        )
        .unwrap();
        let listed: Vec<String> = manifest["files"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap().to_string())
            .collect();
        for entry in std::fs::read_dir(&summary.out_dir).unwrap() {
            let name = entry.unwrap().file_name().into_string().unwrap();
            assert!(listed.contains(&name), "{name} missing from manifest");
        }
        assert!(manifest["config_sha256"].as_str().unwrap().len() == 64);
    }

    #[test]
    fn identical_runs_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let text = ANALYZE.replace("analyze-weight", "simulate")
            + "\n[simulate]\nt_final = 1.0\ndata = \"random\"\n";
        let cfg = parse_config(&text, dir.path()).unwrap();
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        run(&cfg, Some(&out_a)).unwrap();
        run(&cfg, Some(&out_b)).unwrap();
        for name in ["trajectory.csv", "summary.json", "manifest.json"] {
            let a = std::fs::read(out_a.join(name)).unwrap();
            let b = std::fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }
}
