use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use relaxvi::checks::{self, ScalingReport, ScalingRow, SuiteReport};
use relaxvi::constraints::{ConstraintFunction, SetDescriptor};
use relaxvi::operators::MaxAffine;
use relaxvi::problems;
use relaxvi::solver::{run_with_observer, StopReason, TraceRecord};
use relaxvi::{Error, Point};
use serde::Serialize;

use crate::config::{BenchConfig, BenchFamily, RunConfig};
use crate::error::{CliError, CliResult};

pub const OUTPUT_ENV: &str = "RELAXVI_OUTPUT_DIR";
pub const TRACE_SCHEMA: u32 = 1;
pub const TRACE_COLUMNS: [&str; 10] = [
    "k",
    "alpha_k",
    "eta_k",
    "sigma_k",
    "inner_iterations",
    "dist_x",
    "dist_z0",
    "err_x",
    "fejer_slack",
    "wall_time",
];

/// Command-line settings that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub cadence: Option<usize>,
    pub snapshots: bool,
    pub seed: Option<u64>,
    pub parallel: Option<usize>,
}

/// `--output`, then `$RELAXVI_OUTPUT_DIR`, then the config, then `relaxvi-out`.
pub fn resolve_output(flag: Option<&Path>, from_config: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    from_config
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("relaxvi-out"))
}

fn config_error(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub artifact_version: String,
    pub trace_schema: u32,
    pub seed: u64,
    pub problem: String,
    pub stop_reason: String,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_err_x: Option<f64>,
    pub final_dist_x: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub sigma: f64,
    pub eta_flagged_steps: usize,
    pub wall_time: f64,
    pub config: RunConfig,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trace_row(r: &TraceRecord) -> [String; 10] {
    [
        r.k.to_string(),
        r.alpha_k.to_string(),
        r.eta_k.to_string(),
        r.sigma_k.to_string(),
        r.inner_iterations.to_string(),
        r.dist_x.to_string(),
        r.dist_z0.to_string(),
        opt(r.err_x),
        opt(r.fejer_slack),
        r.wall_time.to_string(),
    ]
}

fn write_trace(path: &Path, trace: &[TraceRecord]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    let wrap = |e: csv::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    w.write_record(TRACE_COLUMNS).map_err(wrap)?;
    for r in trace {
        w.write_record(trace_row(r)).map_err(wrap)?;
    }
    w.flush().map_err(CliError::io(path))
}

fn write_snapshots(path: &Path, trace: &[TraceRecord], dim: usize, m: usize) -> CliResult<()> {
    let wrap = |e: csv::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    let mut header = vec!["k".to_string()];
    header.extend((0..dim).map(|i| format!("z_prev_{i}")));
    header.extend((0..dim).map(|i| format!("z_next_{i}")));
    header.extend((1..=m).map(|i| format!("u_norm_{i}")));
    w.write_record(&header).map_err(wrap)?;
    for r in trace {
        let Some(s) = &r.snapshot else { continue };
        let mut row = vec![r.k.to_string()];
        row.extend(s.z_prev.coords().iter().map(f64::to_string));
        row.extend(s.z_next.coords().iter().map(f64::to_string));
        row.extend(s.u_norms.iter().map(f64::to_string));
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(CliError::io(path))
}

/// Runs the solver on a config file and writes `trace.csv`, `summary.toml`
/// and, with snapshots on, `snapshots.csv` into the output directory.
pub fn cmd_run(config_path: &Path, ov: &Overrides) -> CliResult<(PathBuf, RunSummary)> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(c) = ov.cadence {
        cfg.output.cadence = c;
    }
    if ov.snapshots {
        cfg.output.snapshots = true;
    }
    if let Some(s) = ov.seed {
        cfg.set_seed(s);
    }
    cfg.validate()?;
    run_config(
        &cfg,
        &resolve_output(ov.output.as_deref(), cfg.output.dir.as_deref()),
    )
}

/// [`cmd_run`] on an already-loaded config.
pub fn run_config(cfg: &RunConfig, out_dir: &Path) -> CliResult<(PathBuf, RunSummary)> {
    let problem = problems::build(&cfg.problem).map_err(config_error)?;
    let x0 = match &cfg.solver.x0 {
        Some(v) => Point::new(v.clone()).map_err(config_error)?,
        None => Point::zeros(problem.dim()),
    };
    if x0.dim() != problem.dim() {
        return Err(CliError::Config(format!(
            "solver.x0 has dimension {}, the problem has {}",
            x0.dim(),
            problem.dim()
        )));
    }
    if cfg.stop.target_err.is_some() && problem.known_solution().is_none() {
        return Err(CliError::Config(
            "stop.target_err needs a problem with a known solution".into(),
        ));
    }
    let schedule = cfg.schedule.to_schedule();
    let opts = cfg.solver_options();

    let started = Instant::now();
    let mut flagged = 0usize;
    let outcome = run_with_observer(&problem, &schedule, &opts, x0, |r| {
        flagged += usize::from(r.record.eta_flagged);
    })
    .map_err(|e| match e {
        Error::Config(_) => config_error(e),
        other => CliError::Solver(other),
    })?;
    let wall_time = started.elapsed().as_secs_f64();

    fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let trace = &outcome.state.trace;
    write_trace(&out_dir.join("trace.csv"), trace)?;
    if cfg.output.snapshots {
        write_snapshots(
            &out_dir.join("snapshots.csv"),
            trace,
            problem.dim(),
            problem.m(),
        )?;
    }
    let last = trace.last().expect("a run records its final step");
    let summary = RunSummary {
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        trace_schema: TRACE_SCHEMA,
        seed: cfg.seed(),
        problem: problem.label().into(),
        stop_reason: stop_name(outcome.stop_reason).into(),
        iterations: outcome.state.k,
        final_err_x: last.err_x,
        final_dist_x: last.dist_x,
        x: outcome.state.x.coords().to_vec(),
        z: outcome.state.z.coords().to_vec(),
        sigma: outcome.state.sigma,
        eta_flagged_steps: flagged,
        wall_time,
        config: cfg.clone(),
    };
    let text = toml::to_string(&summary).map_err(|e| CliError::Config(e.to_string()))?;
    let path = out_dir.join("summary.toml");
    fs::write(&path, text).map_err(CliError::io(&path))?;
    Ok((out_dir.to_path_buf(), summary))
}

fn stop_name(r: StopReason) -> &'static str {
    r.as_str()
}

/// Runs one suite or `all`; fails with [`CliError::ChecksFailed`] when any
/// suite reports a failure.
pub fn cmd_check(
    suite: &str,
    seed: u64,
    parallel: usize,
    out: &mut dyn Write,
) -> CliResult<Vec<SuiteReport>> {
    let names: Vec<String> = if suite == "all" {
        checks::SUITES.iter().map(|s| s.to_string()).collect()
    } else if checks::SUITES.contains(&suite) {
        vec![suite.to_string()]
    } else {
        return Err(CliError::Config(format!(
            "unknown suite {suite:?}; expected one of {} or all",
            checks::SUITES.join(", ")
        )));
    };
    let mut reports = Vec::new();
    let mut failed = 0;
    for r in checks::run_suites(&names, seed, parallel) {
        let r = r.map_err(CliError::Solver)?;
        let _ = writeln!(
            out,
            "[{}] {}",
            if r.passed { "pass" } else { "FAIL" },
            r.name
        );
        for line in &r.lines {
            let _ = writeln!(out, "    {line}");
        }
        failed += usize::from(!r.passed);
        reports.push(r);
    }
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(reports)
}

fn bench_constraint(family: BenchFamily) -> ConstraintFunction {
    match family {
        BenchFamily::Ball => checks::inner_loop_families().swap_remove(0).1,
        BenchFamily::Affine => {
            let a = Point::new(vec![1.0, 2.0]).expect("finite");
            let scale = 1.0 / a.norm();
            ConstraintFunction::new(Arc::new(
                MaxAffine::affine(a.clone(), 0.5).expect("valid row"),
            ))
            .with_exact_set(SetDescriptor::Halfspace(
                relaxvi::constraints::Halfspace::new(a, 0.5).expect("valid halfspace"),
            ))
            .and_then(|cf| cf.with_surrogate(scale))
            .expect("valid constraint")
        }
    }
}

/// Inner-loop iterations against `θα`, one grid point per worker.
pub fn cmd_bench(
    config_path: &Path,
    ov: &Overrides,
    out: &mut dyn Write,
) -> CliResult<ScalingReport> {
    let mut cfg = BenchConfig::load(config_path)?;
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    let cf = bench_constraint(cfg.family);
    let parallel = ov.parallel.unwrap_or(1).max(1);
    let mut rows: Vec<Option<relaxvi::Result<ScalingRow>>> =
        (0..cfg.grid.len()).map(|_| None).collect();
    for (grid, slots) in cfg.grid.chunks(parallel).zip(rows.chunks_mut(parallel)) {
        std::thread::scope(|s| {
            let handles: Vec<_> = grid
                .iter()
                .map(|&g| {
                    let cf = &cf;
                    let (reps, seed) = (cfg.repetitions, cfg.seed);
                    s.spawn(move || {
                        checks::inner_iteration_scaling(cf, &[g], reps, seed)
                            .map(|r| r.rows.into_iter().next().expect("one row"))
                    })
                })
                .collect();
            for (slot, h) in slots.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("bench worker panicked"));
            }
        });
    }
    let rows = rows
        .into_iter()
        .map(|r| r.expect("filled").map_err(config_error))
        .collect::<CliResult<Vec<_>>>()?;
    let report = ScalingReport {
        exponent: checks::fit_exponent(&rows),
        rows,
    };

    let _ = writeln!(
        out,
        "{:>12} {:>16} {:>12}",
        "theta_alpha", "mean_iterations", "wall_time"
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:>12} {:>16.4} {:>12.3e}",
            r.theta_alpha, r.mean_iterations, r.wall_time
        );
    }
    match report.exponent {
        Some(e) => {
            let _ = writeln!(out, "fitted exponent: {e:.4}");
        }
        None => {
            let _ = writeln!(out, "fitted exponent: n/a (single grid point)");
        }
    }

    let dir = resolve_output(ov.output.as_deref(), cfg.dir.as_deref());
    fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    let path = dir.join("bench.csv");
    let mut f = File::create(&path).map_err(CliError::io(&path))?;
    let mut text = String::from("theta_alpha,mean_iterations,wall_time\n");
    for r in &report.rows {
        text.push_str(&format!(
            "{},{},{}\n",
            r.theta_alpha, r.mean_iterations, r.wall_time
        ));
    }
    f.write_all(text.as_bytes()).map_err(CliError::io(&path))?;
    Ok(report)
}
