//! Command-line front end: parse a machine, build the system, run one of
//! the three integration modes, predict blow-up times symbolically, export
//! trajectories, and self-check.
//!
//! Exit codes: 0 completed run, 2 input/parse error, 3 validation failure,
//! 4 numerical failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::integrate::IntegratorConfig;
use crate::runtime::{
    build_system, integrate_ambient, integrate_compactified, integrate_intrinsic,
    predict_blowup_time, Format, Mode, Prediction, RunError, RunReport, TrajectoryWriter,
};
use crate::tm::{Configuration, TMSpec, Tape};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "tmflow",
    about = "Turing machines as smooth vector fields on R^11 whose finite-time \
             blow-up certifies halting",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Integrate a machine/tape in one of the three coordinate systems.
    Run(RunArgs),
    /// Run the invariant suites for a machine.
    Check(CheckArgs),
    /// Predict the blow-up time by exact simulation.
    Predict(PredictArgs),
    /// Integrate and write the trajectory to a file.
    Export(ExportArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct RunArgs {
    /// Machine file path.
    #[arg(long)]
    pub machine: Option<PathBuf>,
    /// Input tape literal like "[0]" or "...01[1]10..."; repeatable.
    #[arg(long)]
    pub tape: Vec<String>,
    /// intrinsic | compactified | ambient.
    #[arg(long)]
    pub mode: Option<String>,
    /// Integration horizon in clock periods.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Ambient blow-up norm threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long = "tol-abs")]
    pub tol_abs: Option<f64>,
    #[arg(long = "tol-rel")]
    pub tol_rel: Option<f64>,
    #[arg(long = "max-step")]
    pub max_step: Option<f64>,
    /// Write the trajectory here (single tape only).
    #[arg(long)]
    pub export: Option<PathBuf>,
    /// csv | jsonl.
    #[arg(long)]
    pub format: Option<String>,
    /// Independent runs to execute in parallel.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// RNG seed for sampling checks.
    #[arg(long)]
    pub seed: Option<u64>,
    /// key = value config file; flags win over file entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub machine: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub machine: PathBuf,
    #[arg(long, default_value = "[0]")]
    pub tape: String,
    /// Exact-simulation step budget.
    #[arg(long, default_value_t = 10_000)]
    pub budget: u64,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Output path for the trajectory.
    #[arg(long)]
    pub out: PathBuf,
}

/// A fully resolved run request (flags merged over config-file entries
/// merged over defaults).
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub machine: PathBuf,
    pub tapes: Vec<String>,
    pub mode: Mode,
    pub horizon: f64,
    pub threshold: f64,
    pub integ: IntegratorConfig,
    pub export: Option<PathBuf>,
    pub format: Format,
    pub jobs: usize,
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

fn classify_run_error(e: RunError) -> CliError {
    match e {
        RunError::Layout(_) | RunError::Validation { .. } => CliError::Validation(e.to_string()),
        RunError::Config(_) | RunError::Threshold { .. } => CliError::Input(e.to_string()),
        RunError::Io(_) => CliError::Input(e.to_string()),
    }
}

fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Input(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                i + 1
            )));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Input(format!("bad value `{v}` for {key}")))
}

/// Merge CLI flags over the optional config file and defaults.
pub fn resolve_run(args: &RunArgs) -> Result<ResolvedRun, CliError> {
    let file = match &args.config {
        Some(p) => parse_config_file(p)?,
        None => BTreeMap::new(),
    };
    let get = |key: &str| file.get(key).cloned();

    let machine = args
        .machine
        .clone()
        .or_else(|| get("machine").map(PathBuf::from))
        .ok_or_else(|| CliError::Input("--machine is required".into()))?;
    let mut tapes = args.tape.clone();
    if tapes.is_empty() {
        if let Some(t) = get("tape") {
            tapes.push(t);
        }
    }
    if tapes.is_empty() {
        tapes.push("[0]".to_string());
    }
    let mode: Mode = match args.mode.clone().or_else(|| get("mode")) {
        Some(m) => m.parse().map_err(CliError::Input)?,
        None => Mode::Ambient,
    };
    let horizon = match args.horizon {
        Some(h) => h,
        None => match get("horizon") {
            Some(v) => parse_num("horizon", &v)?,
            None => 100.0,
        },
    };
    let threshold = match args.threshold {
        Some(t) => t,
        None => match get("threshold") {
            Some(v) => parse_num("threshold", &v)?,
            None => 1e6,
        },
    };
    let mut integ = IntegratorConfig::default();
    if let Some(v) = args.tol_abs.or(get("tol-abs")
        .map(|v| parse_num("tol-abs", &v))
        .transpose()?)
    {
        integ.abs_tol = v;
    }
    if let Some(v) = args.tol_rel.or(get("tol-rel")
        .map(|v| parse_num("tol-rel", &v))
        .transpose()?)
    {
        integ.rel_tol = v;
    }
    if let Some(v) = args.max_step.or(get("max-step")
        .map(|v| parse_num("max-step", &v))
        .transpose()?)
    {
        integ.max_step = v;
    }
    let export = args
        .export
        .clone()
        .or_else(|| get("export").map(PathBuf::from));
    let format: Format = match args.format.clone().or_else(|| get("format")) {
        Some(f) => f.parse().map_err(CliError::Input)?,
        None => Format::Csv,
    };
    let jobs = match args.jobs {
        Some(j) => j,
        None => match get("jobs") {
            Some(v) => parse_num("jobs", &v)?,
            None => 1,
        },
    }
    .max(1);
    let seed = match args.seed {
        Some(s) => s,
        None => match get("seed") {
            Some(v) => parse_num("seed", &v)?,
            None => 0,
        },
    };
    if horizon <= 0.0 {
        return Err(CliError::Input("horizon must be positive".into()));
    }
    Ok(ResolvedRun {
        machine,
        tapes,
        mode,
        horizon,
        threshold,
        integ,
        export,
        format,
        jobs,
        seed,
    })
}

pub fn load_machine(path: &Path) -> Result<TMSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Input(format!(
            "file not found or unreadable: {}: {e}",
            path.display()
        ))
    })?;
    TMSpec::parse(&text).map_err(|e| CliError::Input(format!("{}:{e}", path.display())))
}

fn parse_tape(spec: &TMSpec, literal: &str) -> Result<Tape, CliError> {
    Tape::parse_literal(literal, spec.alphabet())
        .map_err(|e| CliError::Input(format!("bad tape literal `{literal}`: {e}")))
}

fn run_one(
    sys: &crate::geometry::AmbientField,
    rr: &ResolvedRun,
    tape: Tape,
    sink: Option<&mut TrajectoryWriter<'_>>,
) -> Result<RunReport, CliError> {
    let spec = &sys.suspension.spec;
    let c0 = Configuration::start(spec, tape.clone());
    let mut report = match rr.mode {
        Mode::Intrinsic => integrate_intrinsic(sys, &c0, rr.horizon, &rr.integ, sink),
        Mode::Compactified => integrate_compactified(sys, &c0, rr.horizon, &rr.integ, sink),
        Mode::Ambient => integrate_ambient(sys, &c0, rr.horizon, rr.threshold, &rr.integ, sink),
    }
    .map_err(classify_run_error)?;
    if let Prediction::BlowUpAt { tau_star, .. } = predict_blowup_time(spec, tape, 100_000) {
        report.predicted_blowup = Some(tau_star);
    }
    if report.sup_norm.is_nan() {
        return Err(CliError::Numerical("trajectory norm became NaN".into()));
    }
    Ok(report)
}

/// `run`: integrate every requested tape (in parallel with --jobs) and
/// print one JSON report per line, in input order.
pub fn cmd_run(args: &RunArgs, out: &mut impl std::io::Write) -> Result<(), CliError> {
    let rr = resolve_run(args)?;
    let spec = load_machine(&rr.machine)?;
    if rr.export.is_some() && rr.tapes.len() > 1 {
        return Err(CliError::Input(
            "--export expects a single --tape; run tapes separately to export each".into(),
        ));
    }
    let tapes: Vec<Tape> = rr
        .tapes
        .iter()
        .map(|t| parse_tape(&spec, t))
        .collect::<Result<_, _>>()?;
    let sys = build_system(spec).map_err(classify_run_error)?;

    let reports: Vec<Result<RunReport, CliError>> = if rr.jobs <= 1 || tapes.len() <= 1 {
        // export is only reachable here with a single tape
        let mut out_reports = Vec::new();
        for tape in tapes {
            let mut sink = match &rr.export {
                Some(path) => Some(
                    TrajectoryWriter::to_file(rr.format, path)
                        .map_err(|e| CliError::Input(e.to_string()))?,
                ),
                None => None,
            };
            let r = run_one(&sys, &rr, tape, sink.as_mut());
            if let Some(s) = sink {
                s.finish().map_err(|e| CliError::Input(e.to_string()))?;
            }
            out_reports.push(r);
        }
        out_reports
    } else {
        let n = tapes.len();
        let workers = rr.jobs.min(n);
        let mut slots: Vec<Option<Result<RunReport, CliError>>> = (0..n).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for w in 0..workers {
                let tapes = &tapes;
                let sys = &sys;
                let rr = &rr;
                handles.push(scope.spawn(move || {
                    let mut partial = Vec::new();
                    let mut i = w;
                    while i < n {
                        partial.push((i, run_one(sys, rr, tapes[i].clone(), None)));
                        i += workers;
                    }
                    partial
                }));
            }
            for h in handles {
                for (i, r) in h.join().expect("worker") {
                    slots[i] = Some(r);
                }
            }
        });
        slots
            .into_iter()
            .map(|s| s.expect("every tape ran"))
            .collect()
    };

    let mut failure: Option<CliError> = None;
    for r in reports {
        match r {
            Ok(report) => {
                writeln!(out, "{}", report.to_json())
                    .map_err(|e| CliError::Input(e.to_string()))?;
            }
            Err(e) => failure = Some(failure.unwrap_or(e)),
        }
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// `check`: run the invariant suites, print one line per suite.
pub fn cmd_check(args: &CheckArgs, out: &mut impl std::io::Write) -> Result<(), CliError> {
    let spec = load_machine(&args.machine)?;
    let reports = crate::check::run_all(spec, args.seed).map_err(classify_run_error)?;
    let mut all_ok = true;
    for r in &reports {
        writeln!(
            out,
            "{:>20}  {}  {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        )
        .map_err(|e| CliError::Input(e.to_string()))?;
        all_ok &= r.passed;
    }
    if all_ok {
        Ok(())
    } else {
        Err(CliError::Validation("one or more suites failed".into()))
    }
}

/// `predict`: symbolic blow-up time from exact simulation.
pub fn cmd_predict(args: &PredictArgs, out: &mut impl std::io::Write) -> Result<(), CliError> {
    let spec = load_machine(&args.machine)?;
    let tape = parse_tape(&spec, &args.tape)?;
    let p = predict_blowup_time(&spec, tape, args.budget);
    let json = match &p {
        Prediction::BlowUpAt { tau_star, steps } => {
            serde_json::json!({ "tau_star": tau_star, "halting_steps": steps })
        }
        Prediction::NoHaltWithinBudget { budget } => {
            serde_json::json!({ "no_halt_within_budget": budget })
        }
    };
    writeln!(out, "{json}").map_err(|e| CliError::Input(e.to_string()))?;
    Ok(())
}

/// `export`: run one tape and write the trajectory to --out.
pub fn cmd_export(args: &ExportArgs, out: &mut impl std::io::Write) -> Result<(), CliError> {
    let mut run_args = args.run.clone();
    run_args.export = Some(args.out.clone());
    cmd_run(&run_args, out)
}

pub fn dispatch(cli: &Cli, out: &mut impl std::io::Write) -> Result<(), CliError> {
    match &cli.cmd {
        Cmd::Run(a) => cmd_run(a, out),
        Cmd::Check(a) => cmd_check(a, out),
        Cmd::Predict(a) => cmd_predict(a, out),
        Cmd::Export(a) => cmd_export(a, out),
    }
}
