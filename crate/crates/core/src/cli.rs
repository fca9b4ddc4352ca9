//! Command-line front end: `simulate`, `optimize` and `export`.
//!
//! Every run writes into one output directory:
//!
//! | file | content |
//! |------|---------|
//! | `config.copy` | the configuration as run (TOML, absolute paths) |
//! | `summary.json` | per-stage steps, residual, convergence, RMS |
//! | `centerline_stage_k.csv` | `s_ref_mm,x_mm,y_mm,z_mm` per stage |
//! | `snapshot.xyz` | particles of the last stage, mm |
//! | `trace.jsonl` | one record per optimizer iteration |
//! | `best.json` | best design and its scores |
//! | `convergence.csv` | `iter,best_mm` |

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::catheter::{AppliedField, MagnetizationProfile};
use crate::config::{FieldChoice, Mode, RunConfig, Schedule};
use crate::design::{optimize_insertion, optimize_static, Optimization, StaticField, Termination};
use crate::error::{Error, Result};
use crate::linalg::Vector3;
use crate::mpm::{write_snapshot, Parallelism};
use crate::polyline::Polyline3;
use crate::shape::{Centerline, InsertionSchedule, ShapeEvaluator, StageResult};

/// Environment variable naming the default root for output directories.
pub const OUTPUT_ROOT_ENV: &str = "MAGCATH_OUTPUT_ROOT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "magcath", version, about = "Simulate and design magnetic soft catheters")]
pub struct Cli {
    /// Override the optimizer seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 runs everything serially.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory (default: config `output.dir`, else
    /// `$MAGCATH_OUTPUT_ROOT/<config name>`, else `runs/<config name>`).
    #[arg(long, global = true)]
    pub outdir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Settle a given design and write its shape.
    Simulate { config: PathBuf },
    /// Search for a design that matches the configured target.
    Optimize { config: PathBuf },
    /// Print a stored artifact of a previous run to stdout.
    Export {
        dir: PathBuf,
        #[arg(long, value_enum)]
        what: Artifact,
        /// Stage of the centerline to print (default: the last).
        #[arg(long)]
        stage: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Artifact {
    Centerlines,
    Snapshot,
    Trace,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Io(_) => EXIT_CONFIG,
        Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        Error::Degenerate(_)
        | Error::Inversion { .. }
        | Error::OutOfDomain { .. }
        | Error::BlowUp { .. }
        | Error::Resolution { .. }
        | Error::Optimizer(_) => EXIT_BLOWUP,
    }
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let parallel = cli.threads != Some(1);
    let result = match &cli.command {
        Command::Simulate { config } => {
            load(config, &cli, parallel).and_then(|(cfg, out)| simulate(&cfg, &out))
        }
        Command::Optimize { config } => {
            load(config, &cli, parallel).and_then(|(cfg, out)| optimize(&cfg, &out))
        }
        Command::Export { dir, what, stage } => {
            export(dir, *what, *stage, &mut std::io::stdout().lock()).map(|_| EXIT_OK)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load(path: &Path, cli: &Cli, parallel: bool) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    // Candidates run concurrently while optimizing, particles while
    // simulating; the command picks which.
    cfg.optimizer.parallel = parallel;
    cfg.eval.sim.parallelism = if parallel {
        Parallelism::Parallel
    } else {
        Parallelism::Serial
    };
    let out = output_dir(path, cli.outdir.as_deref(), cfg.output_dir.as_deref());
    Ok((cfg, out))
}

fn output_dir(config: &Path, flag: Option<&Path>, from_config: Option<&Path>) -> PathBuf {
    if let Some(d) = flag.or(from_config) {
        return d.to_path_buf();
    }
    let stem = config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(stem),
        _ => PathBuf::from("runs").join(stem),
    }
}

fn prepare(cfg: &RunConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("config.copy"), cfg.to_toml()?)?;
    Ok(())
}

/// Reads a target polyline from CSV with `x_mm`, `y_mm`, `z_mm` columns.
pub fn read_polyline_csv(path: &Path) -> Result<Polyline3<f64>> {
    let parse_err = |message: String| Error::Parse {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(format!("missing column `{name}`")))
    };
    let cols = [column("x_mm")?, column("y_mm")?, column("z_mm")?];
    let mut points = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let mut v = [0.0; 3];
        for (c, &col) in v.iter_mut().zip(&cols) {
            let field = rec.get(col).unwrap_or("");
            *c = field.parse::<f64>().map_err(|_| {
                parse_err(format!("row {}: bad number {field:?}", i + 2))
            })? * 1e-3;
        }
        points.push(Vector3::new(v[0], v[1], v[2]));
    }
    Polyline3::new(points).map_err(|e| parse_err(e.to_string()))
}

/// Writes a centerline, extended to both catheter ends, as
/// `s_ref_mm,x_mm,y_mm,z_mm`.
pub fn write_centerline_csv(path: &Path, c: &Centerline<f64>) -> Result<()> {
    let mut s = c.s_ref.clone();
    if s[0] > 0.0 {
        s.insert(0, 0.0);
    }
    if *s.last().unwrap() < c.length_m {
        s.push(c.length_m);
    }
    let line = c.extended()?;
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["s_ref_mm", "x_mm", "y_mm", "z_mm"]).map_err(csv_err)?;
    for (s, p) in s.iter().zip(line.points()) {
        w.write_record(
            [*s, p.x, p.y, p.z].map(|v| format!("{}", v * 1e3)),
        )
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Builds the evaluator for the configured problem. Without a target, a
/// straight line along the base axis stands in so shapes can still be
/// simulated; its RMS is not reported.
fn evaluator(cfg: &RunConfig) -> Result<ShapeEvaluator<f64>> {
    let spec = &cfg.catheter;
    let target = match &cfg.problem.target {
        Some(p) => read_polyline_csv(p)?,
        None => {
            let pose = spec.base_pose;
            Polyline3::segment(
                pose.apply_point(Vector3::zeros()),
                pose.apply_point(Vector3::new(0.0, 0.0, spec.length_m)),
            )?
        }
    };
    match cfg.problem.mode {
        Mode::Static => ShapeEvaluator::new_static(spec, target, cfg.eval.clone()),
        Mode::Insertion => {
            let schedule = match &cfg.problem.schedule {
                Schedule::Stages(k) => {
                    InsertionSchedule::equally_spaced(spec.base_pose, spec.length_m, *k, target)?
                }
                Schedule::Depths(d) => InsertionSchedule::new(spec.base_pose, d.clone(), target)?,
            };
            ShapeEvaluator::new_insertion(spec, &schedule, cfg.eval.clone())
        }
    }
}

#[derive(Serialize)]
struct StageSummary {
    stage: usize,
    exposed_length_mm: f64,
    steps: usize,
    dt_s: f64,
    residual_mm_per_s: f64,
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    rms_mm: Option<f64>,
}

/// Settles every stage, writing centerlines and the last snapshot.
fn run_stages(
    ev: &ShapeEvaluator<f64>,
    profile: &MagnetizationProfile<f64>,
    fields: &[AppliedField<f64>],
    has_target: bool,
    out: &Path,
) -> Result<Vec<StageSummary>> {
    let mut summaries = Vec::new();
    let mut last: Option<StageResult<f64>> = None;
    for (k, field) in fields.iter().enumerate().take(ev.stage_count()) {
        let r = ev.run_stage(k, profile, field)?;
        write_centerline_csv(&out.join(format!("centerline_stage_{k}.csv")), &r.centerline)?;
        summaries.push(StageSummary {
            stage: k,
            exposed_length_mm: ev.stage_spec(k).length_m * 1e3,
            steps: r.state.steps,
            dt_s: r.state.dt,
            residual_mm_per_s: r.state.residual_speed * 1e3,
            converged: r.state.converged,
            rms_mm: has_target.then_some(r.error_mm),
        });
        last = Some(r);
    }
    if let Some(r) = last {
        let mut w = BufWriter::new(File::create(out.join("snapshot.xyz"))?);
        let time = r.state.steps as f64 * r.state.dt;
        write_snapshot(&mut w, &r.state.cloud.particles, time)?;
        w.flush()?;
    }
    Ok(summaries)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.into()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Static => "static",
        Mode::Insertion => "insertion",
    }
}

/// `simulate`: settles the configured design. Exit 2 if any stage did not
/// reach equilibrium.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let p = &cfg.problem;
    let directions = p
        .magnetization
        .clone()
        .ok_or_else(|| Error::config("missing required key `problem.magnetization`"))?;
    let profile = MagnetizationProfile::normalized(directions)?;
    let ev = evaluator(cfg)?;
    let fields: Vec<Vector3<f64>> = match (&p.fields_tesla, p.mode) {
        (Some(f), Mode::Insertion) => {
            if f.len() != ev.stage_count() {
                return Err(Error::config(format!(
                    "`problem.fields_mT` has {} entries for {} stages",
                    f.len(),
                    ev.stage_count()
                )));
            }
            f.clone()
        }
        (Some(_), Mode::Static) => {
            return Err(Error::config("`problem.fields_mT` is for insertion; use `field_mT`"))
        }
        (None, _) => vec![p.field_tesla; ev.stage_count()],
    };
    let fields: Vec<AppliedField<f64>> = fields.into_iter().map(AppliedField::new).collect();
    prepare(cfg, out)?;
    let stages = run_stages(&ev, &profile, &fields, p.target.is_some(), out)?;
    let converged = stages.iter().all(|s| s.converged);
    let code = if converged { EXIT_OK } else { EXIT_NONCONVERGENCE };
    write_json(
        &out.join("summary.json"),
        &json!({
            "command": "simulate",
            "mode": mode_name(p.mode),
            "particles": ev.particle_count(),
            "converged": converged,
            "stages": stages,
            "exit_code": code,
        }),
    )?;
    if !converged {
        let worst = stages
            .iter()
            .map(|s| s.residual_mm_per_s)
            .fold(0.0, f64::max);
        eprintln!("no equilibrium within max_settle_steps (residual speed {worst:.3e} mm/s)");
    }
    Ok(code)
}

/// `optimize`: designs against the configured target. Exit 0 when the
/// target error is reached, 4 when the iteration budget runs out.
pub fn optimize(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let p = &cfg.problem;
    if p.target.is_none() {
        return Err(Error::config("missing required key `problem.target`"));
    }
    let ev = evaluator(cfg)?;
    prepare(cfg, out)?;
    let opt_cfg = &cfg.optimizer;
    let result = match p.mode {
        Mode::Static => {
            let field = match p.field {
                FieldChoice::Fixed => StaticField::Fixed(p.field_tesla),
                FieldChoice::Free => StaticField::Free,
            };
            // Whole settles run one per candidate; particle-level threads
            // would only oversubscribe.
            let ev = serial(ev, opt_cfg.parallel);
            optimize_static(&ev, p.angles, field, opt_cfg).map(|r| (r, ev))
        }
        Mode::Insertion => {
            let ev = serial(ev, opt_cfg.parallel);
            optimize_insertion(&ev, p.angles, p.shared_field, opt_cfg).map(|r| (r, ev))
        }
    };
    let (result, ev) = result?;
    write_optimization(&result, out)?;

    let (profile, fields) = result.best.decode(None)?;
    let stages = run_stages(&ev, &profile, &fields, true, out)?;
    let code = match result.termination {
        Termination::TargetReached => EXIT_OK,
        Termination::IterationBudget => EXIT_BUDGET,
    };
    let e = &result.best_evaluation;
    write_json(
        &out.join("best.json"),
        &json!({
            "design": result.best.to_record(),
            "score_mm": e.score_mm,
            "stage_errors_mm": e.stage_errors_mm,
            "mean_mm": e.mean_mm,
            "max_mm": e.max_mm,
            "unconverged": e.unconverged,
            "iterations": result.iterations(),
            "evaluations": result.trace.records.last().map_or(0, |r| r.evals),
            "target_error_mm": opt_cfg.target_error_mm,
            "target_reached": result.termination == Termination::TargetReached,
        }),
    )?;
    write_json(
        &out.join("summary.json"),
        &json!({
            "command": "optimize",
            "mode": mode_name(p.mode),
            "particles": ev.particle_count(),
            "iterations": result.iterations(),
            "best_mm": e.score_mm,
            "stages": stages,
            "exit_code": code,
        }),
    )?;
    Ok(code)
}

fn serial(mut ev: ShapeEvaluator<f64>, candidates_parallel: bool) -> ShapeEvaluator<f64> {
    if candidates_parallel {
        ev.set_parallelism(Parallelism::Serial);
    }
    ev
}

fn write_optimization(r: &Optimization, out: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(out.join("trace.jsonl"))?);
    r.trace.write_jsonl(&mut w)?;
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("convergence.csv")).map_err(csv_err)?;
    w.write_record(["iter", "best_mm"]).map_err(csv_err)?;
    for rec in &r.trace.records {
        w.write_record([rec.iter.to_string(), format!("{}", rec.best_mm)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `export`: copies a stored artifact to `sink`.
pub fn export(dir: &Path, what: Artifact, stage: Option<usize>, sink: &mut impl Write) -> Result<()> {
    let file = match what {
        Artifact::Trace => dir.join("trace.jsonl"),
        Artifact::Snapshot => dir.join("snapshot.xyz"),
        Artifact::Centerlines => match stage {
            Some(k) => dir.join(format!("centerline_stage_{k}.csv")),
            None => last_centerline(dir)?,
        },
    };
    if !file.is_file() {
        return Err(Error::config(format!("{} not found", file.display())));
    }
    sink.write_all(&fs::read(&file)?)?;
    sink.flush()?;
    Ok(())
}

fn last_centerline(dir: &Path) -> Result<PathBuf> {
    let mut k = 0;
    while dir.join(format!("centerline_stage_{k}.csv")).is_file() {
        k += 1;
    }
    if k == 0 {
        return Err(Error::config(format!(
            "no centerline_stage_k.csv files in {}",
            dir.display()
        )));
    }
    Ok(dir.join(format!("centerline_stage_{}.csv", k - 1)))
}
