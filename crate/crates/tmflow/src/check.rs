//! Machine self-check: the invariant suites behind `tmflow check` and the
//! acceptance tests. Each suite returns pass/fail plus a short account of
//! what it measured.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoding::{encode_config, encode_tape, to_f64, Config4};
use crate::field::SuspensionField;
use crate::geometry::{ball_unscale, poincare, poincare_inv, AmbientField, ManifoldPoint};
use crate::integrate::{integrate, IntegratorConfig};
use crate::layout::validate_layout;
use crate::runtime::{build_system, RunError};
use crate::schedule::Window;
use crate::smooth::circle_dist;
use crate::tm::{step, Configuration, StepResult, TMSpec, Tape};

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl SuiteReport {
    fn pass(name: &'static str, detail: String) -> Self {
        SuiteReport {
            name,
            passed: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        SuiteReport {
            name,
            passed: false,
            detail,
        }
    }
}

/// Random finitely supported tape over the machine's alphabet.
pub fn sample_tape(rng: &mut impl Rng, b: u8, max_half: usize) -> Tape {
    let len_l = rng.gen_range(0..=max_half);
    let len_r = rng.gen_range(0..=max_half);
    let left: Vec<u8> = (0..len_l).map(|_| rng.gen_range(0..b)).collect();
    let right: Vec<u8> = (0..len_r).map(|_| rng.gen_range(0..b)).collect();
    Tape::from_cells(left, rng.gen_range(0..b), right)
}

/// A non-halt configuration reachable from a random tape within
/// `max_depth` steps.
pub fn sample_reachable(spec: &TMSpec, rng: &mut impl Rng, max_depth: u64) -> Configuration {
    let tape = sample_tape(rng, spec.alphabet(), 5);
    let depth = rng.gen_range(0..=max_depth);
    let mut cur = Configuration::start(spec, tape);
    for _ in 0..depth {
        if cur.state == spec.halt() {
            break;
        }
        match step(spec, &cur) {
            StepResult::Stepped(next) => {
                if next.state == spec.halt() {
                    break;
                }
                cur = next;
            }
            StepResult::Halted => break,
        }
    }
    debug_assert_ne!(cur.state, spec.halt());
    cur
}

fn config_to_f64(q: &Config4) -> [f64; 4] {
    [
        to_f64(&q.state_pt.0),
        to_f64(&q.state_pt.1),
        to_f64(&q.tape_pt.x),
        to_f64(&q.tape_pt.y),
    ]
}

/// Numerically flow one clock period of the machine field.
pub fn one_period_numeric(field: &SuspensionField, start: [f64; 4], tol: f64) -> [f64; 4] {
    let cfg = IntegratorConfig {
        abs_tol: tol,
        rel_tol: tol,
        max_step: (field.min_window_width() / 4.0).min(1e-3),
        ..Default::default()
    };
    let out = integrate(
        |s, y, dy| {
            let v = field.eval_v(&[y[0], y[1], y[2], y[3]], s);
            dy.copy_from_slice(&v);
        },
        None,
        |_, _| {},
        0.0,
        &start,
        1.0,
        &cfg,
    );
    [out.y[0], out.y[1], out.y[2], out.y[3]]
}

/// Suite 1: layout and schedule validation.
pub fn suite_layout(sys: &AmbientField) -> SuiteReport {
    let violations = validate_layout(&sys.suspension.layout);
    let structural = sys.suspension.schedule.structural_violations();
    if violations.is_empty() && structural.is_empty() {
        SuiteReport::pass(
            "layout",
            format!(
                "{} squares, {} windows, no violations",
                sys.suspension.layout.squares().len(),
                sys.suspension.schedule.windows.len()
            ),
        )
    } else {
        let first = violations
            .first()
            .map(|v| v.to_string())
            .or_else(|| structural.first().cloned())
            .unwrap_or_default();
        SuiteReport::fail(
            "layout",
            format!(
                "{} violation(s); first: {first}",
                violations.len() + structural.len()
            ),
        )
    }
}

/// Suite 2: the exact period map agrees with the machine step on encoded
/// configurations, with zero tolerance.
pub fn suite_conjugacy(sys: &AmbientField, seed: u64, samples: usize) -> SuiteReport {
    let spec = &sys.suspension.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0usize;
    for i in 0..samples {
        let c = if i == 0 {
            Configuration::start(spec, Tape::blank())
        } else {
            sample_reachable(spec, &mut rng, 20)
        };
        let q0 = encode_config(spec, &c, &sys.suspension.layout);
        let q1 = match sys.suspension.flow_period_exact(&q0) {
            Ok(q) => q,
            Err(e) => {
                return SuiteReport::fail("conjugacy", format!("sample {i}: {e}"));
            }
        };
        let StepResult::Stepped(c1) = step(spec, &c) else {
            continue;
        };
        let expect = encode_tape(&c1.tape, spec.alphabet());
        if q1.tape_pt != expect {
            return SuiteReport::fail(
                "conjugacy",
                format!("sample {i}: tape image differs from the machine step"),
            );
        }
        if !sys.suspension.layout.state_squares[c1.state].contains(&q1.state_pt) {
            return SuiteReport::fail(
                "conjugacy",
                format!("sample {i}: state point missed its target square"),
            );
        }
        checked += 1;
    }
    SuiteReport::pass(
        "conjugacy",
        format!("{checked} configurations, exact equality"),
    )
}

fn tape_coords_passing_gates(w: &Window, sys: &AmbientField) -> (f64, f64) {
    let blank = encode_tape(&Tape::blank(), sys.suspension.spec.alphabet());
    let x = w
        .gate_x
        .as_ref()
        .map(|g| (to_f64(&g.lo) + to_f64(&g.hi)) / 2.0)
        .unwrap_or_else(|| to_f64(&blank.x));
    let y = w
        .gate_y
        .as_ref()
        .map(|g| (to_f64(&g.lo) + to_f64(&g.hi)) / 2.0)
        .unwrap_or_else(|| to_f64(&blank.y));
    (x, y)
}

/// Suite 3: the field is bit-exactly zero on every foreign square during
/// every window, sampled on a grid per square.
pub fn suite_support_soundness(sys: &AmbientField, grid: usize) -> SuiteReport {
    let squares = sys.suspension.layout.squares();
    let mut checked = 0u64;
    for w in &sys.suspension.schedule.windows {
        let s_mid = (to_f64(&w.s0) + to_f64(&w.s1)) / 2.0;
        let (tx, ty) = tape_coords_passing_gates(w, sys);
        // deposit traffic must leave its own target's center (the
        // canonical placement of fresh configurations) untouched
        if w.phase == crate::schedule::Phase::B {
            for id in &w.own {
                let crate::layout::SquareId::State(q) = id else {
                    continue;
                };
                let c = sys.suspension.layout.state_squares[*q].center();
                let p = [to_f64(&c.0), to_f64(&c.1), tx, ty];
                if sys.suspension.eval_v(&p, s_mid) != [0.0; 4] {
                    return SuiteReport::fail(
                        "support-soundness",
                        format!("window {} ({}) moves the center of B[{q}]", w.idx, w.label),
                    );
                }
                checked += 1;
            }
        }
        for (id, rect) in &squares {
            if w.own.contains(id) {
                continue;
            }
            let (x0, x1) = (to_f64(&rect.x0), to_f64(&rect.x1));
            let (y0, y1) = (to_f64(&rect.y0), to_f64(&rect.y1));
            for i in 0..grid {
                for j in 0..grid {
                    let px = x0 + (i as f64 + 0.5) / grid as f64 * (x1 - x0);
                    let py = y0 + (j as f64 + 0.5) / grid as f64 * (y1 - y0);
                    let v = sys.suspension.eval_v(&[px, py, tx, ty], s_mid);
                    if v != [0.0; 4] {
                        return SuiteReport::fail(
                            "support-soundness",
                            format!(
                                "window {} ({}) moves a point parked in {id}",
                                w.idx, w.label
                            ),
                        );
                    }
                    checked += 1;
                }
            }
        }
    }
    SuiteReport::pass(
        "support-soundness",
        format!("{checked} foreign samples, all bit-exact zero"),
    )
}

/// Suite 4: embedding and compactification identities on random points.
pub fn suite_geometry(sys: &AmbientField, seed: u64, samples: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let mut worst_shell = 0.0f64;
    let mut worst_ball = 0.0f64;
    let mut worst_round = 0.0f64;
    let mut worst_retract = 0.0f64;
    for _ in 0..samples {
        let pt = ManifoldPoint {
            theta: [rng.gen(), rng.gen(), rng.gen(), rng.gen()],
            s: rng.gen(),
        };
        let e = crate::geometry::embed(&pt);
        let shell: f64 = e.iter().map(|v| v * v).sum::<f64>() - 5.0;
        worst_shell = worst_shell.max(shell.abs());

        let w = sys.ball_point(&pt);
        let h = sys.height(&pt);
        let ball: f64 = w.iter().map(|v| v * v).sum::<f64>() - (5.0 + h * h) / 6.0;
        worst_ball = worst_ball.max(ball.abs());

        if h < 0.9 {
            let x = poincare(&w).expect("inside the ball");
            let back = poincare_inv(&x);
            for i in 0..11 {
                worst_round = worst_round.max((back[i] - w[i]).abs());
            }
            let r = sys
                .retract_u(&ball_unscale(&poincare_inv(&x)))
                .expect("in tube");
            worst_retract = worst_retract.max(r.dist());
            for i in 0..4 {
                worst_retract = worst_retract.max(circle_dist(r.pt.theta[i], pt.theta[i]));
            }
        }
    }
    let detail = format!(
        "shell {worst_shell:.2e}, ball {worst_ball:.2e}, roundtrip {worst_round:.2e}, retract {worst_retract:.2e}"
    );
    if worst_shell <= 1e-12 && worst_ball <= 1e-12 && worst_round <= 1e-12 && worst_retract <= 1e-9
    {
        SuiteReport::pass("geometry", detail)
    } else {
        SuiteReport::fail("geometry", detail)
    }
}

/// Suite 5: one numeric period agrees with the exact period map.
pub fn suite_numeric_agreement(sys: &AmbientField, seed: u64, samples: usize) -> SuiteReport {
    let spec = &sys.suspension.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bf03635);
    let mut worst = 0.0f64;
    for i in 0..samples {
        let c = if i == 0 {
            Configuration::start(spec, Tape::blank())
        } else {
            sample_reachable(spec, &mut rng, 10)
        };
        let q0 = encode_config(spec, &c, &sys.suspension.layout);
        let exact = match sys.suspension.flow_period_exact(&q0) {
            Ok(q) => q,
            Err(e) => return SuiteReport::fail("numeric-agreement", e.to_string()),
        };
        let numeric = one_period_numeric(&sys.suspension, config_to_f64(&q0), 1e-10);
        let target = config_to_f64(&exact);
        for k in 0..4 {
            worst = worst.max(circle_dist(numeric[k], target[k]));
        }
    }
    let detail = format!("{samples} configurations, worst coordinate error {worst:.2e}");
    if worst <= 1e-6 {
        SuiteReport::pass("numeric-agreement", detail)
    } else {
        SuiteReport::fail("numeric-agreement", detail)
    }
}

/// Run every suite for a machine.
pub fn run_all(spec: TMSpec, seed: u64) -> Result<Vec<SuiteReport>, RunError> {
    let sys = build_system(spec)?;
    Ok(vec![
        suite_layout(&sys),
        suite_conjugacy(&sys, seed, 40),
        suite_support_soundness(&sys, 10),
        suite_geometry(&sys, seed, 20_000),
        suite_numeric_agreement(&sys, seed, 5),
    ])
}
