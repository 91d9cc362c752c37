//! The time-periodic field V(p, s) on the 4-torus whose period map moves
//! encoded configurations exactly one machine step, together with that
//! exact period map itself.
//!
//! The numeric side (`eval_v`) evaluates the unique active window's move
//! field times its plateau gates; everything is exactly 0 outside window
//! supports, so foreign configurations are untouched to the last bit.
//! The exact side (`flow_period_exact`) applies each window's rational
//! affine time-1 map whenever the point and its image sit in the plateau
//! cores (the flown path then stays in the cores, because every move is
//! coordinatewise monotone), skips windows whose support excludes the
//! point, and reports ambiguity otherwise.

use thiserror::Error;

use crate::encoding::{to_f64, Config4, Rat};
use crate::layout::{Layout, LayoutError, Rect};
use crate::schedule::{build_schedule, Gate1, MoveKind, Schedule, Window};
use crate::smooth::{smoothstep_d, Plateau1};
use crate::tm::TMSpec;

/// Exact-flow failure: the point is neither cleanly inside a window's
/// plateau cores nor cleanly outside its supports. Valid configuration
/// points never trigger this.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("ambiguous plateau membership at window {idx} ({label})")]
pub struct AmbiguousMembership {
    pub idx: usize,
    pub label: String,
}

#[derive(Debug, Clone)]
enum NumKind {
    Translate([f64; 4]),
    Saddle { pop_x: bool, g: f64, rate: f64 },
    Contract { cx: f64, cy: f64, rate: f64 },
}

#[derive(Debug, Clone)]
struct NumWindow {
    s0: f64,
    s1: f64,
    px: Plateau1,
    py: Plateau1,
    gx: Option<Plateau1>,
    gy: Option<Plateau1>,
    kind: NumKind,
}

/// Immutable machine-as-field bundle; evaluators are reentrant.
#[derive(Debug, Clone)]
pub struct SuspensionField {
    pub spec: TMSpec,
    pub layout: Layout,
    pub schedule: Schedule,
    num: Vec<NumWindow>,
}

fn plateau_of_gate(g: &Gate1) -> Plateau1 {
    Plateau1::new(to_f64(&g.lo), to_f64(&g.hi), to_f64(&g.margin))
}

fn plateaus_of_rect(r: &Rect, margin: &Rat) -> (Plateau1, Plateau1) {
    let m = to_f64(margin);
    (
        Plateau1::new(to_f64(&r.x0), to_f64(&r.x1), m),
        Plateau1::new(to_f64(&r.y0), to_f64(&r.y1), m),
    )
}

impl SuspensionField {
    pub fn build(spec: TMSpec) -> Result<Self, LayoutError> {
        let layout = Layout::build(&spec)?;
        let schedule = build_schedule(&layout);
        Ok(Self::from_parts(spec, layout, schedule))
    }

    pub fn from_parts(spec: TMSpec, layout: Layout, schedule: Schedule) -> Self {
        let num = schedule
            .windows
            .iter()
            .map(|w| {
                let (px, py) = plateaus_of_rect(&w.state_core, &w.state_margin);
                let kind = match &w.kind {
                    MoveKind::Translate { disp } => NumKind::Translate([
                        to_f64(&disp[0]),
                        to_f64(&disp[1]),
                        to_f64(&disp[2]),
                        to_f64(&disp[3]),
                    ]),
                    MoveKind::Saddle { pop_x, center } => NumKind::Saddle {
                        pop_x: *pop_x,
                        g: to_f64(center),
                        rate: (crate::encoding::radix(schedule.alphabet) as f64).ln(),
                    },
                    MoveKind::Contract { center, ratio } => NumKind::Contract {
                        cx: to_f64(&center.0),
                        cy: to_f64(&center.1),
                        rate: to_f64(ratio).ln(),
                    },
                };
                NumWindow {
                    s0: to_f64(&w.s0),
                    s1: to_f64(&w.s1),
                    px,
                    py,
                    gx: w.gate_x.as_ref().map(plateau_of_gate),
                    gy: w.gate_y.as_ref().map(plateau_of_gate),
                    kind,
                }
            })
            .collect();
        SuspensionField {
            spec,
            layout,
            schedule,
            num,
        }
    }

    /// Width (in clock time) of the narrowest window; integrator step
    /// caps are derived from this.
    pub fn min_window_width(&self) -> f64 {
        self.num
            .iter()
            .map(|w| w.s1 - w.s0)
            .fold(f64::INFINITY, f64::min)
    }

    /// The field V at torus point `p` and clock `s` (taken mod 1).
    /// Exactly zero outside window supports and for s in the idle band
    /// [0.9, 1.0] u [0.0, 0.1].
    pub fn eval_v(&self, p: &[f64; 4], s: f64) -> [f64; 4] {
        let sm = s.rem_euclid(1.0);
        let idx = self.num.partition_point(|w| w.s1 < sm);
        let Some(w) = self.num.get(idx) else {
            return [0.0; 4];
        };
        if sm < w.s0 || sm > w.s1 {
            return [0.0; 4];
        }
        let width = w.s1 - w.s0;
        let omega = smoothstep_d((sm - w.s0) / width) / width;
        if omega == 0.0 {
            return [0.0; 4];
        }
        let mut gate = omega * w.px.eval(p[0]);
        if gate == 0.0 {
            return [0.0; 4];
        }
        gate *= w.py.eval(p[1]);
        if gate == 0.0 {
            return [0.0; 4];
        }
        if let Some(gx) = &w.gx {
            gate *= gx.eval(p[2]);
            if gate == 0.0 {
                return [0.0; 4];
            }
        }
        if let Some(gy) = &w.gy {
            gate *= gy.eval(p[3]);
            if gate == 0.0 {
                return [0.0; 4];
            }
        }
        match &w.kind {
            NumKind::Translate(d) => [gate * d[0], gate * d[1], gate * d[2], gate * d[3]],
            NumKind::Saddle { pop_x, g, rate } => {
                if *pop_x {
                    [
                        0.0,
                        0.0,
                        gate * rate * (p[2] - g),
                        -gate * rate * (p[3] - g),
                    ]
                } else {
                    [
                        0.0,
                        0.0,
                        -gate * rate * (p[2] - g),
                        gate * rate * (p[3] - g),
                    ]
                }
            }
            NumKind::Contract { cx, cy, rate } => [
                gate * rate * (p[0] - cx),
                gate * rate * (p[1] - cy),
                0.0,
                0.0,
            ],
        }
    }

    /// V extended by the unit clock speed; never vanishes.
    pub fn eval_v_full(&self, p: &[f64; 4], s: f64) -> [f64; 5] {
        let v = self.eval_v(p, s);
        [v[0], v[1], v[2], v[3], 1.0]
    }

    /// Exact period map on configuration points: composes the affine
    /// time-1 maps of every window whose plateau cores contain the running
    /// point, with membership decided in rational arithmetic.
    pub fn flow_period_exact(&self, start: &Config4) -> Result<Config4, AmbiguousMembership> {
        let mut p = start.coords();
        for w in &self.schedule.windows {
            if let Some(img) = window_action(w, &p)? {
                p = img;
            }
        }
        Ok(Config4::from_coords(p))
    }
}

/// Decide one window: `Some(image)` if the point passes the cores,
/// `None` if it is cleanly outside the supports.
fn window_action(w: &Window, p: &[Rat; 4]) -> Result<Option<[Rat; 4]>, AmbiguousMembership> {
    let img = w.map.apply(p);
    let state_p = (p[0].clone(), p[1].clone());
    let state_i = (img[0].clone(), img[1].clone());
    let state_pass = w.state_core.contains(&state_p) && w.state_core.contains(&state_i);
    let gate_pass = |g: &Option<Gate1>, a: &Rat, b: &Rat| match g {
        Some(g) => g.contains(a) && g.contains(b),
        None => true,
    };
    let tape_pass = gate_pass(&w.gate_x, &p[2], &img[2]) && gate_pass(&w.gate_y, &p[3], &img[3]);
    if state_pass && tape_pass {
        return Ok(Some(img));
    }
    let state_zero = !w
        .state_core
        .inflate(&w.state_margin)
        .contains_open(&state_p);
    let gate_zero = |g: &Option<Gate1>, a: &Rat| match g {
        Some(g) => !g.strictly_inside_support(a),
        None => false,
    };
    let tape_zero = gate_zero(&w.gate_x, &p[2]) || gate_zero(&w.gate_y, &p[3]);
    if state_zero || tape_zero {
        return Ok(None);
    }
    Err(AmbiguousMembership {
        idx: w.idx,
        label: w.label.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode_config, encode_tape, to_f64};
    use crate::tm::{run, step, Configuration, RunOutcome, StepResult, TMSpec, Tape};

    fn halt3() -> TMSpec {
        TMSpec::parse(
            "alphabet: 2\nstates: START,MID,HALT\nstart: START\nhalt: HALT\n\
             START 0 -> MID 1 N\nSTART 1 -> HALT 1 N\nMID 1 -> MID 0 R\nMID 0 -> HALT 1 N\n",
        )
        .unwrap()
    }

    fn field(spec: TMSpec) -> SuspensionField {
        SuspensionField::build(spec).unwrap()
    }

    #[test]
    fn halt3_brute_simulation_gives_three_steps() {
        let spec = halt3();
        match run(&spec, Configuration::start(&spec, Tape::blank()), 100) {
            RunOutcome::Halted { steps, .. } => assert_eq!(steps, 3),
            other => panic!("expected halt, got {other:?}"),
        }
    }

    #[test]
    fn one_period_equals_one_machine_step_exactly() {
        let spec = halt3();
        let f = field(spec.clone());
        let c = Configuration::start(&spec, Tape::blank());
        let q0 = encode_config(&spec, &c, &f.layout);
        let q1 = f.flow_period_exact(&q0).unwrap();
        let StepResult::Stepped(c1) = step(&spec, &c) else {
            panic!()
        };
        let expect = encode_tape(&c1.tape, spec.alphabet());
        assert_eq!(q1.tape_pt, expect);
        assert!(f.layout.state_squares[c1.state].contains(&q1.state_pt));
    }

    #[test]
    fn three_periods_reach_the_halt_square() {
        let spec = halt3();
        let f = field(spec.clone());
        let mut q = encode_config(
            &spec,
            &Configuration::start(&spec, Tape::blank()),
            &f.layout,
        );
        let mut c = Configuration::start(&spec, Tape::blank());
        for _ in 0..3 {
            q = f.flow_period_exact(&q).unwrap();
            if let StepResult::Stepped(next) = step(&spec, &c) {
                c = next;
            }
            assert_eq!(q.tape_pt, encode_tape(&c.tape, spec.alphabet()));
        }
        assert_eq!(c.state, spec.halt());
        assert!(f.layout.state_squares[spec.halt()].contains(&q.state_pt));
    }

    #[test]
    fn halt_centered_point_is_fixed() {
        let spec = halt3();
        let f = field(spec.clone());
        let c = Configuration {
            state: spec.halt(),
            tape: Tape::blank(),
        };
        let q0 = encode_config(&spec, &c, &f.layout);
        let q1 = f.flow_period_exact(&q0).unwrap();
        assert_eq!(q0, q1);
    }

    #[test]
    fn field_is_idle_outside_the_active_band() {
        let f = field(halt3());
        for s in [0.0, 0.05, 0.09, 0.91, 0.95, 0.99] {
            let v = f.eval_v(&[0.3, 0.2, 0.2, 0.2], s);
            assert_eq!(v, [0.0; 4], "s = {s}");
        }
    }

    #[test]
    fn foreign_parked_square_sees_exact_zero() {
        let spec = halt3();
        let f = field(spec.clone());
        // park a point at the (START,1) parking square center while the
        // first ingest window of (START,0) is active
        let park = f.layout.branches[1].park.center();
        let tape = encode_tape(&Tape::blank(), 2);
        let p = [
            to_f64(&park.0),
            to_f64(&park.1),
            to_f64(&tape.x),
            to_f64(&tape.y),
        ];
        let w = &f.schedule.windows[0];
        let mid = (to_f64(&w.s0) + to_f64(&w.s1)) / 2.0;
        assert_eq!(f.eval_v(&p, mid), [0.0; 4]);
    }

    #[test]
    fn first_window_midpoint_velocity_is_profile_times_leg() {
        let spec = halt3();
        let f = field(spec.clone());
        let q0 = encode_config(
            &spec,
            &Configuration::start(&spec, Tape::blank()),
            &f.layout,
        );
        let p = [
            to_f64(&q0.state_pt.0),
            to_f64(&q0.state_pt.1),
            to_f64(&q0.tape_pt.x),
            to_f64(&q0.tape_pt.y),
        ];
        let w = &f.schedule.windows[0];
        assert!(w.label.starts_with("ingest leg 1 (0,0)"), "{}", w.label);
        let (s0, s1) = (to_f64(&w.s0), to_f64(&w.s1));
        let mid = (s0 + s1) / 2.0;
        let v = f.eval_v(&p, mid);
        // leg 1 climbs from the state row 1/8 to the lane 1/4; profile
        // peak is 2/width
        let expect = 2.0 / (s1 - s0) * 0.125;
        assert_eq!(v[0], 0.0);
        assert!(
            (v[1] - expect).abs() <= 1e-9 * expect,
            "{} vs {expect}",
            v[1]
        );
        assert_eq!(v[2], 0.0);
        assert_eq!(v[3], 0.0);
    }

    #[test]
    fn full_field_never_vanishes() {
        use rand::{Rng, SeedableRng};
        let f = field(halt3());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let mut min_norm = f64::INFINITY;
        for _ in 0..100_000 {
            let p = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
            let v = f.eval_v_full(&p, rng.gen());
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            min_norm = min_norm.min(n);
        }
        assert!(min_norm >= 1.0);
    }

    #[test]
    fn second_differences_converge_at_second_order() {
        // Probe smoothness across a plateau transition ring: the central
        // second difference D2(h) of a smooth function satisfies
        // (D2(h) - D2(h/2)) / (D2(h/2) - D2(h/4)) -> 4.
        use rand::{Rng, SeedableRng};
        let f = field(halt3());
        let w = &f.schedule.windows[0];
        let edge = to_f64(&w.state_core.x0);
        let m = to_f64(&w.state_margin);
        let cy = (to_f64(&w.state_core.y0) + to_f64(&w.state_core.y1)) / 2.0;
        let (gx_lo, gx_hi) = {
            let g = w.gate_x.as_ref().unwrap();
            (to_f64(&g.lo), to_f64(&g.hi))
        };
        let s_mid = (to_f64(&w.s0) + to_f64(&w.s1)) / 2.0;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut valid = 0;
        for _ in 0..40 {
            // base point inside the rising edge of the state plateau
            let base = [
                edge - m * rng.gen_range(0.3..0.7),
                cy + rng.gen_range(-0.001..0.001),
                (gx_lo + gx_hi) / 2.0,
                0.2,
            ];
            let mut dir = [0.0f64; 5];
            for c in dir.iter_mut() {
                *c = rng.gen_range(-1.0..1.0);
            }
            let eval = |t: f64| {
                let p = [
                    base[0] + t * dir[0],
                    base[1] + t * dir[1],
                    base[2] + t * dir[2],
                    base[3] + t * dir[3],
                ];
                let v = f.eval_v(&p, s_mid + t * dir[4]);
                v[1]
            };
            let d2 = |h: f64| (eval(h) - 2.0 * eval(0.0) + eval(-h)) / (h * h);
            // small enough to sit in the asymptotic regime of the
            // exp(-1/t) plateaus, large enough to dominate roundoff
            let h = 2e-4;
            let (a, b, c) = (d2(h), d2(h / 2.0), d2(h / 4.0));
            let (d_ab, d_bc) = (a - b, b - c);
            // skip noise-dominated samples
            if d_bc.abs() < 5e-2 {
                continue;
            }
            let ratio = d_ab / d_bc;
            assert!(
                (ratio - 4.0).abs() <= 0.5,
                "halving ratio {ratio} at base {base:?} dir {dir:?}"
            );
            valid += 1;
        }
        assert!(valid >= 10, "only {valid} informative samples");
    }

    #[test]
    fn conjugacy_holds_for_twenty_steps_of_reachable_configs() {
        let spec = halt3();
        let f = field(spec.clone());
        let mut c = Configuration::start(&spec, Tape::from_cells(vec![1], 1, vec![0, 1]));
        let mut q = encode_config(&spec, &c, &f.layout);
        for _ in 0..20 {
            if c.state == spec.halt() {
                break;
            }
            q = f.flow_period_exact(&q).unwrap();
            let StepResult::Stepped(next) = step(&spec, &c) else {
                break;
            };
            c = next;
            assert_eq!(q.tape_pt, encode_tape(&c.tape, spec.alphabet()));
            assert!(f.layout.state_squares[c.state].contains(&q.state_pt));
        }
    }
}
