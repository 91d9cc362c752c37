//! Run the dynamics in three coordinate systems and report what happened.
//!
//! * intrinsic: integrate the 4 torus angles against the machine field
//!   with unit clock speed; the halting event is the height reaching 1.
//! * compactified: integrate in the unit-ball chart; halting shows up as
//!   |w| reaching 1 (the sphere that the radial blow-up sends to
//!   infinity).
//! * ambient: integrate the full field on R^11; halting is norm escape
//!   past a finite threshold.
//!
//! A run that halts at machine step n meets the clock plateau at
//! tau* = n - 0.05, so detection times land in [tau* - 0.02, tau*] (the
//! clock ramp). Non-halting runs keep height exactly 0 and stay pinned to
//! the sphere of radius sqrt(5).

use std::fmt;
use std::io::{self, BufWriter, Write};

use serde::Serialize;
use thiserror::Error;

use crate::encoding::{encode_config, to_f64};
use crate::geometry::{AmbientField, ManifoldPoint};
use crate::integrate::{integrate, IntegrationOutput, IntegratorConfig, StepStats, StopReason};
use crate::layout::{validate_layout, LayoutError, Violation};
use crate::tm::{run, Configuration, RunOutcome, TMSpec, Tape};

/// Height threshold treated as "entered the halting plateau".
pub const PLATEAU_EVENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Intrinsic,
    Compactified,
    Ambient,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Intrinsic => "intrinsic",
            Mode::Compactified => "compactified",
            Mode::Ambient => "ambient",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "intrinsic" => Ok(Mode::Intrinsic),
            "compactified" => Ok(Mode::Compactified),
            "ambient" => Ok(Mode::Ambient),
            other => Err(format!(
                "unknown mode `{other}` (expected intrinsic, compactified or ambient)"
            )),
        }
    }
}

/// What the trajectory did.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Outcome {
    BlewUp { t_detect: f64, threshold: f64 },
    PlateauHit { t_detect: f64 },
    Bounded { horizon: f64, sup_norm: f64 },
}

/// Full run record; serializes as a single JSON object.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub mode: Mode,
    pub outcome: Outcome,
    /// Symbolic blow-up time n - 0.05, when the step budget sufficed.
    pub predicted_blowup: Option<f64>,
    /// Detection time for halting runs; None for bounded ones.
    pub t_max_estimate: Option<f64>,
    /// Solutions extend to all negative times; None encodes -infinity.
    pub t_min: Option<f64>,
    /// Largest norm seen along the trajectory (mode-native: |G|, |w|, |x|).
    pub sup_norm: f64,
    pub steps: StepStats,
    pub step_size_underflow: bool,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("layout validation failed with {} violation(s); first: {first}", .violations.len())]
    Validation {
        violations: Vec<Violation>,
        first: String,
    },
    #[error("invalid integrator configuration: {0}")]
    Config(String),
    #[error("blow-up threshold {threshold} must exceed the initial norm {x0_norm}")]
    Threshold { threshold: f64, x0_norm: f64 },
    #[error("trajectory export failed: {0}")]
    Io(#[from] io::Error),
}

/// Build and validate the full system for a machine.
pub fn build_system(spec: TMSpec) -> Result<AmbientField, RunError> {
    let sys = AmbientField::build(spec)?;
    let violations = validate_layout(&sys.suspension.layout);
    if !violations.is_empty() {
        let first = violations[0].to_string();
        return Err(RunError::Validation { violations, first });
    }
    let structural = sys.suspension.schedule.structural_violations();
    if !structural.is_empty() {
        return Err(RunError::Validation {
            violations: Vec::new(),
            first: structural[0].clone(),
        });
    }
    Ok(sys)
}

/// Initial manifold point of a configuration at clock 0.
pub fn initial_point(sys: &AmbientField, c0: &Configuration) -> ManifoldPoint {
    let spec = &sys.suspension.spec;
    let q = encode_config(spec, c0, &sys.suspension.layout);
    ManifoldPoint {
        theta: [
            to_f64(&q.state_pt.0),
            to_f64(&q.state_pt.1),
            to_f64(&q.tape_pt.x),
            to_f64(&q.tape_pt.y),
        ],
        s: 0.0,
    }
}

/// Cap steps so no schedule window can be jumped over.
pub fn effective_config(sys: &AmbientField, cfg: &IntegratorConfig) -> IntegratorConfig {
    let mut out = cfg.clone();
    out.max_step = out.max_step.min(sys.suspension.min_window_width() / 4.0);
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Ambient-equivalent norm of a manifold point: sqrt((5 + h^2)/(1 - h^2)).
pub fn ambient_norm_of_height(h: f64) -> f64 {
    ((5.0 + h * h) / (1.0 - h * h)).sqrt()
}

fn finish(
    mode: Mode,
    out: IntegrationOutput,
    horizon: f64,
    sup_norm: f64,
    threshold: Option<f64>,
) -> RunReport {
    let underflow = out.reason == StopReason::StepSizeUnderflow;
    let outcome = match out.reason {
        StopReason::Event => match (mode, threshold) {
            (Mode::Ambient, Some(thr)) => Outcome::BlewUp {
                t_detect: out.t,
                threshold: thr,
            },
            _ => Outcome::PlateauHit { t_detect: out.t },
        },
        _ => Outcome::Bounded {
            horizon: horizon.min(out.t),
            sup_norm,
        },
    };
    let t_max = match &outcome {
        Outcome::BlewUp { t_detect, .. } | Outcome::PlateauHit { t_detect } => Some(*t_detect),
        Outcome::Bounded { .. } => None,
    };
    RunReport {
        mode,
        outcome,
        predicted_blowup: None,
        t_max_estimate: t_max,
        t_min: None,
        sup_norm,
        steps: out.stats,
        step_size_underflow: underflow,
    }
}

/// Integrate the intrinsic dynamics: d theta / d tau = V(theta, tau mod 1).
/// Event: height reaches 1 (within [`PLATEAU_EVENT_TOL`]).
pub fn integrate_intrinsic(
    sys: &AmbientField,
    c0: &Configuration,
    horizon: f64,
    cfg: &IntegratorConfig,
    mut sink: Option<&mut TrajectoryWriter<'_>>,
) -> Result<RunReport, RunError> {
    cfg.validate().map_err(RunError::Config)?;
    let cfg = effective_config(sys, cfg);
    let p0 = initial_point(sys, c0);
    let height_at = |t: f64, y: &[f64]| {
        sys.height(&ManifoldPoint {
            theta: [y[0], y[1], y[2], y[3]],
            s: t.rem_euclid(1.0),
        })
    };
    let mut sup = 0.0f64;
    if let Some(s) = sink.as_deref_mut() {
        s.header_intrinsic()?;
    }
    let mut sink_err: Option<io::Error> = None;
    let out = integrate(
        |t, y, dy| {
            let v = sys
                .suspension
                .eval_v(&[y[0], y[1], y[2], y[3]], t.rem_euclid(1.0));
            dy.copy_from_slice(&v);
        },
        Some(&mut |t, y| height_at(t, y) - (1.0 - PLATEAU_EVENT_TOL)),
        |t, y| {
            let h = height_at(t, y);
            sup = sup.max(ambient_norm_of_height(h.min(1.0 - 1e-12)));
            if let Some(s) = sink.as_deref_mut() {
                if let Err(e) = s.row_intrinsic(t, y, t.rem_euclid(1.0), h) {
                    sink_err.get_or_insert(e);
                }
            }
        },
        0.0,
        &p0.theta,
        horizon,
        &cfg,
    );
    if let Some(e) = sink_err {
        return Err(RunError::Io(e));
    }
    Ok(finish(Mode::Intrinsic, out, horizon, sup, None))
}

/// Integrate in the unit-ball chart. Event: |w| reaches 1 (within tol).
pub fn integrate_compactified(
    sys: &AmbientField,
    c0: &Configuration,
    horizon: f64,
    cfg: &IntegratorConfig,
    mut sink: Option<&mut TrajectoryWriter<'_>>,
) -> Result<RunReport, RunError> {
    cfg.validate().map_err(RunError::Config)?;
    let cfg = effective_config(sys, cfg);
    let w0 = sys.ball_point(&initial_point(sys, c0));
    let mut sup = 0.0f64;
    if let Some(s) = sink.as_deref_mut() {
        s.header_extrinsic()?;
    }
    let mut sink_err: Option<io::Error> = None;
    let out = integrate(
        |_t, y, dy| {
            let w: &[f64; 11] = y.try_into().expect("state dim 11");
            dy.copy_from_slice(&sys.eval_f_ball(w));
        },
        Some(&mut |_t, y| norm(y) - (1.0 - PLATEAU_EVENT_TOL)),
        |t, y| {
            let n = norm(y);
            sup = sup.max(n);
            if let Some(s) = sink.as_deref_mut() {
                let w: &[f64; 11] = y.try_into().expect("state dim 11");
                let h = sys
                    .retract_ball(w)
                    .map(|r| sys.height(&r.pt))
                    .unwrap_or(0.0);
                if let Err(e) = s.row_extrinsic(t, y, h, n) {
                    sink_err.get_or_insert(e);
                }
            }
        },
        0.0,
        &w0,
        horizon,
        &cfg,
    );
    if let Some(e) = sink_err {
        return Err(RunError::Io(e));
    }
    Ok(finish(Mode::Compactified, out, horizon, sup, None))
}

/// Integrate the ambient field from the encoded initial point. Event:
/// |x| reaches `threshold`.
pub fn integrate_ambient(
    sys: &AmbientField,
    c0: &Configuration,
    horizon: f64,
    threshold: f64,
    cfg: &IntegratorConfig,
    sink: Option<&mut TrajectoryWriter<'_>>,
) -> Result<RunReport, RunError> {
    let x0 = sys
        .forward(&initial_point(sys, c0))
        .expect("initial height is below 1");
    integrate_ambient_from(sys, x0, horizon, threshold, cfg, sink)
}

/// Ambient integration from a raw point of R^11.
pub fn integrate_ambient_from(
    sys: &AmbientField,
    x0: [f64; 11],
    horizon: f64,
    threshold: f64,
    cfg: &IntegratorConfig,
    mut sink: Option<&mut TrajectoryWriter<'_>>,
) -> Result<RunReport, RunError> {
    cfg.validate().map_err(RunError::Config)?;
    let cfg = effective_config(sys, cfg);
    if threshold <= norm(&x0) {
        return Err(RunError::Threshold {
            threshold,
            x0_norm: norm(&x0),
        });
    }
    let mut sup = 0.0f64;
    if let Some(s) = sink.as_deref_mut() {
        s.header_extrinsic()?;
    }
    let mut sink_err: Option<io::Error> = None;
    let out = integrate(
        |_t, y, dy| {
            let x: &[f64; 11] = y.try_into().expect("state dim 11");
            dy.copy_from_slice(&sys.eval_f(x));
        },
        Some(&mut |_t, y| norm(y) - threshold),
        |t, y| {
            let n = norm(y);
            sup = sup.max(n);
            if let Some(s) = sink.as_deref_mut() {
                let x: &[f64; 11] = y.try_into().expect("state dim 11");
                let h = sys
                    .retract_ambient(x)
                    .map(|r| sys.height(&r.pt))
                    .unwrap_or(0.0);
                if let Err(e) = s.row_extrinsic(t, y, h, n) {
                    sink_err.get_or_insert(e);
                }
            }
        },
        0.0,
        &x0,
        horizon,
        &cfg,
    );
    if let Some(e) = sink_err {
        return Err(RunError::Io(e));
    }
    Ok(finish(Mode::Ambient, out, horizon, sup, Some(threshold)))
}

/// Symbolic blow-up prediction from exact simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Prediction {
    /// The machine halts at step n; the trajectory meets the halting
    /// plateau at tau* = n - 0.05.
    BlowUpAt { tau_star: f64, steps: u64 },
    /// No halt within the step budget; halting is undecidable in general,
    /// so this is all a finite run can say.
    NoHaltWithinBudget { budget: u64 },
}

pub fn predict_blowup_time(spec: &TMSpec, tape: Tape, budget: u64) -> Prediction {
    match run(spec, Configuration::start(spec, tape), budget) {
        RunOutcome::Halted { steps, .. } => Prediction::BlowUpAt {
            tau_star: steps as f64 - crate::geometry::CLOCK_CORE,
            steps,
        },
        RunOutcome::StillRunning { .. } => Prediction::NoHaltWithinBudget { budget },
    }
}

/// Trajectory export format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(format!("unknown format `{other}` (expected csv or jsonl)")),
        }
    }
}

/// Streaming trajectory writer. Extrinsic rows are
/// `tau,x1..x11,h,norm`; intrinsic rows are `tau,theta1..theta4,s,h`.
pub struct TrajectoryWriter<'a> {
    format: Format,
    out: BufWriter<Box<dyn Write + Send + 'a>>,
}

impl<'a> TrajectoryWriter<'a> {
    pub fn new(format: Format, out: Box<dyn Write + Send + 'a>) -> Self {
        TrajectoryWriter {
            format,
            out: BufWriter::new(out),
        }
    }

    pub fn to_file(
        format: Format,
        path: &std::path::Path,
    ) -> io::Result<TrajectoryWriter<'static>> {
        let f = std::fs::File::create(path)?;
        Ok(TrajectoryWriter::new(format, Box::new(f)))
    }

    fn header_intrinsic(&mut self) -> io::Result<()> {
        if self.format == Format::Csv {
            writeln!(self.out, "tau,theta1,theta2,theta3,theta4,s,h")?;
        }
        Ok(())
    }

    fn header_extrinsic(&mut self) -> io::Result<()> {
        if self.format == Format::Csv {
            let xs: Vec<String> = (1..=11).map(|i| format!("x{i}")).collect();
            writeln!(self.out, "tau,{},h,norm", xs.join(","))?;
        }
        Ok(())
    }

    fn row_intrinsic(&mut self, tau: f64, theta: &[f64], s: f64, h: f64) -> io::Result<()> {
        match self.format {
            Format::Csv => {
                write!(self.out, "{tau}")?;
                for v in theta {
                    write!(self.out, ",{v}")?;
                }
                writeln!(self.out, ",{s},{h}")
            }
            Format::Jsonl => {
                let mut obj = serde_json::Map::new();
                obj.insert("tau".into(), tau.into());
                for (i, v) in theta.iter().enumerate() {
                    obj.insert(format!("theta{}", i + 1), (*v).into());
                }
                obj.insert("s".into(), s.into());
                obj.insert("h".into(), h.into());
                writeln!(self.out, "{}", serde_json::Value::Object(obj))
            }
        }
    }

    fn row_extrinsic(&mut self, tau: f64, x: &[f64], h: f64, norm: f64) -> io::Result<()> {
        match self.format {
            Format::Csv => {
                write!(self.out, "{tau}")?;
                for v in x {
                    write!(self.out, ",{v}")?;
                }
                writeln!(self.out, ",{h},{norm}")
            }
            Format::Jsonl => {
                let mut obj = serde_json::Map::new();
                obj.insert("tau".into(), tau.into());
                for (i, v) in x.iter().enumerate() {
                    obj.insert(format!("x{}", i + 1), (*v).into());
                }
                obj.insert("h".into(), h.into());
                obj.insert("norm".into(), norm.into());
                writeln!(self.out, "{}", serde_json::Value::Object(obj))
            }
        }
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Parse a CSV trajectory back into (header, rows); round-trip partner of
/// the CSV writer.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or("empty trajectory file")?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|v| v.parse::<f64>()).collect();
        rows.push(row.map_err(|e| format!("row {}: {e}", i + 2))?);
    }
    Ok((header, rows))
}
