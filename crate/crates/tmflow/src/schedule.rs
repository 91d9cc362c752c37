//! Compile a layout into an ordered list of time windows over one clock
//! period. Each window carries one elementary move (translate, saddle,
//! contract), the plateau gates that decide who moves, and the exact
//! rational affine map its time-1 flow realizes on gated points.
//!
//! Per branch (q, sym) the pipeline is: three ingest legs from the state
//! square to the branch's parking square, gated by the head-digit
//! cylinder (the only tape-reading moves); a tape-x translation writing
//! the new head digit; the shift realized by saddles (split per popped
//! digit through staging squares for right shifts); a contraction; and
//! three deposit legs into a private sub-cell of the target square.
//! Every ingest/surgery/contract window of every pipeline precedes every
//! deposit window, so a deposited configuration is never re-processed
//! within its arrival period.

use num::{BigInt, One, Zero};

use crate::encoding::{cylinder_interval, digit_value, enc_hi, enc_lo, radix, rat, Rat};
use crate::layout::{Layout, Leg, PipeId, Rect, ShiftPlan, SquareId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    A,
    B,
}

/// One-dimensional tape gate: plateau equal to 1 on [lo, hi], 0 outside
/// the margin ring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate1 {
    pub lo: Rat,
    pub hi: Rat,
    pub margin: Rat,
}

impl Gate1 {
    pub fn contains(&self, v: &Rat) -> bool {
        self.lo <= *v && *v <= self.hi
    }

    pub fn strictly_inside_support(&self, v: &Rat) -> bool {
        &self.lo - &self.margin < *v && *v < &self.hi + &self.margin
    }
}

/// The move a window performs while its gates hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MoveKind {
    /// Rigid translation by `disp` (state coords, or tape-x for writes).
    Translate { disp: [Rat; 4] },
    /// Hyperbolic saddle on the tape torus with fixed point (g, g):
    /// expands the popped coordinate by the radix B over the window,
    /// contracts the other by 1/B.
    Saddle { pop_x: bool, center: Rat },
    /// Contraction of the state coords toward `center` by `ratio`.
    Contract { center: (Rat, Rat), ratio: Rat },
}

/// Exact affine time-1 action on the 4 torus coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Affine4 {
    pub scale: [Rat; 4],
    pub offset: [Rat; 4],
}

impl Affine4 {
    pub fn apply(&self, p: &[Rat; 4]) -> [Rat; 4] {
        [
            &self.scale[0] * &p[0] + &self.offset[0],
            &self.scale[1] * &p[1] + &self.offset[1],
            &self.scale[2] * &p[2] + &self.offset[2],
            &self.scale[3] * &p[3] + &self.offset[3],
        ]
    }
}

/// One scheduled window.
#[derive(Debug, Clone)]
pub struct Window {
    pub idx: usize,
    pub s0: Rat,
    pub s1: Rat,
    pub phase: Phase,
    pub pipe: PipeId,
    pub label: String,
    /// Plateau core for the state coordinates (the swept tube for legs,
    /// the parked square for surgery windows).
    pub state_core: Rect,
    pub state_margin: Rat,
    pub gate_x: Option<Gate1>,
    pub gate_y: Option<Gate1>,
    pub kind: MoveKind,
    /// Exact time-1 map of the move at unit profile mass.
    pub map: Affine4,
    /// Squares this window legitimately touches; everything else must sit
    /// outside its supports.
    pub own: Vec<SquareId>,
}

#[derive(Debug, Clone)]
pub struct Schedule {
    pub alphabet: u8,
    /// Width of one window slot (windows occupy the middle 90% of it).
    pub slot_width: Rat,
    pub windows: Vec<Window>,
}

struct Proto {
    phase: Phase,
    pipe: PipeId,
    label: String,
    state_core: Rect,
    state_margin: Rat,
    gate_x: Option<Gate1>,
    gate_y: Option<Gate1>,
    kind: MoveKind,
    own: Vec<SquareId>,
}

fn identity_map() -> Affine4 {
    Affine4 {
        scale: [Rat::one(), Rat::one(), Rat::one(), Rat::one()],
        offset: [Rat::zero(), Rat::zero(), Rat::zero(), Rat::zero()],
    }
}

fn map_of(kind: &MoveKind, b: u8) -> Affine4 {
    let big_b = Rat::from_integer(BigInt::from(radix(b)));
    let mut m = identity_map();
    match kind {
        MoveKind::Translate { disp } => {
            m.offset = disp.clone();
        }
        MoveKind::Saddle { pop_x, center } => {
            // c = (B-1) g is the digit value moved between the halves
            let c = (&big_b - Rat::one()) * center;
            let (ex, cx) = if *pop_x { (2, 3) } else { (3, 2) };
            m.scale[ex] = big_b.clone();
            m.offset[ex] = -&c;
            m.scale[cx] = Rat::one() / &big_b;
            m.offset[cx] = c / big_b;
        }
        MoveKind::Contract { center, ratio } => {
            let one_minus = Rat::one() - ratio;
            m.scale[0] = ratio.clone();
            m.scale[1] = ratio.clone();
            m.offset[0] = &center.0 * &one_minus;
            m.offset[1] = &center.1 * one_minus;
        }
    }
    m
}

fn leg_disp(leg: &Leg) -> [Rat; 4] {
    let (dx, dy) = leg.displacement();
    [dx, dy, Rat::zero(), Rat::zero()]
}

/// Build the full window list for a machine. Window times partition
/// [0.1, 0.9] into equal slots, shrunk to their middle 90% so the closed
/// windows are pairwise disjoint; [0.9, 1.1] (mod 1) is everywhere idle
/// and hosts the halting clock plateau.
pub fn build_schedule(layout: &Layout) -> Schedule {
    let b = layout.alphabet;
    let gate_margin = enc_lo(b) / rat(2, 1);
    let hull = Gate1 {
        lo: enc_lo(b),
        hi: enc_hi(b),
        margin: gate_margin.clone(),
    };
    let cyl = |sym: u8| -> Gate1 {
        let (lo, hi) = cylinder_interval(sym, b).expect("symbol within alphabet");
        Gate1 {
            lo,
            hi,
            margin: gate_margin.clone(),
        }
    };
    let big_b = Rat::from_integer(BigInt::from(radix(b)));
    let g_of = |sym: u8| digit_value(sym) / (&big_b - Rat::one());

    let mut a: Vec<Proto> = Vec::new();
    let mut deps: Vec<Proto> = Vec::new();

    for br in &layout.branches {
        let q = br.state;
        let sym = br.sym;
        let write = br.rule.write;
        let shared_pipe = PipeId {
            state: q,
            sym,
            pop: None,
        };
        let ingest_own: Vec<SquareId> = {
            let mut own = vec![SquareId::State(q), SquareId::Parking(q, sym)];
            own.extend(
                layout
                    .deposits
                    .iter()
                    .filter(|d| d.target == q)
                    .map(|d| SquareId::SubCell(d.id)),
            );
            own
        };
        for (i, leg) in br.ingest.iter().enumerate() {
            a.push(Proto {
                phase: Phase::A,
                pipe: shared_pipe,
                label: format!("ingest leg {} ({q},{sym})", i + 1),
                state_core: leg.tube(),
                state_margin: leg.margin.clone(),
                gate_x: Some(cyl(sym)),
                gate_y: None,
                kind: MoveKind::Translate {
                    disp: leg_disp(leg),
                },
                own: ingest_own.clone(),
            });
        }

        if write != sym {
            let (lo_a, hi_a) = cylinder_interval(sym, b).unwrap();
            let (lo_b, hi_b) = cylinder_interval(write, b).unwrap();
            let swept = Gate1 {
                lo: if lo_a <= lo_b { lo_a } else { lo_b },
                hi: if hi_a >= hi_b { hi_a } else { hi_b },
                margin: gate_margin.clone(),
            };
            let disp_x = (digit_value(write) - digit_value(sym)) / &big_b;
            a.push(Proto {
                phase: Phase::A,
                pipe: shared_pipe,
                label: format!("write {write} ({q},{sym})"),
                state_core: br.park.clone(),
                state_margin: layout.margin.clone(),
                gate_x: Some(swept),
                gate_y: None,
                kind: MoveKind::Translate {
                    disp: [Rat::zero(), Rat::zero(), disp_x, Rat::zero()],
                },
                own: vec![SquareId::Parking(q, sym)],
            });
        }

        let contract_at = |rect: &Rect, pipe: PipeId, own_sq: SquareId| Proto {
            phase: Phase::A,
            pipe,
            label: format!("contract ({pipe})"),
            state_core: rect.clone(),
            state_margin: layout.margin.clone(),
            gate_x: None,
            gate_y: None,
            kind: MoveKind::Contract {
                center: rect.center(),
                ratio: layout.contraction.clone(),
            },
            own: vec![own_sq],
        };

        match &br.shift {
            ShiftPlan::None => {
                a.push(contract_at(
                    &br.park,
                    shared_pipe,
                    SquareId::Parking(q, sym),
                ));
            }
            ShiftPlan::PopX => {
                a.push(Proto {
                    phase: Phase::A,
                    pipe: shared_pipe,
                    label: format!("pop-x saddle ({q},{sym})"),
                    state_core: br.park.clone(),
                    state_margin: layout.margin.clone(),
                    gate_x: Some(hull.clone()),
                    gate_y: Some(hull.clone()),
                    kind: MoveKind::Saddle {
                        pop_x: true,
                        center: g_of(write),
                    },
                    own: vec![SquareId::Parking(q, sym)],
                });
                a.push(contract_at(
                    &br.park,
                    shared_pipe,
                    SquareId::Parking(q, sym),
                ));
            }
            ShiftPlan::PopY(pops) => {
                for p in pops {
                    let pipe = PipeId {
                        state: q,
                        sym,
                        pop: Some(p.tau),
                    };
                    let own = vec![SquareId::Parking(q, sym), SquareId::Staging(q, sym, p.tau)];
                    for (i, leg) in p.legs.iter().enumerate() {
                        a.push(Proto {
                            phase: Phase::A,
                            pipe,
                            label: format!("staging leg {} ({q},{sym},{})", i + 1, p.tau),
                            state_core: leg.tube(),
                            state_margin: leg.margin.clone(),
                            gate_x: None,
                            gate_y: Some(cyl(p.tau)),
                            kind: MoveKind::Translate {
                                disp: leg_disp(leg),
                            },
                            own: own.clone(),
                        });
                    }
                    a.push(Proto {
                        phase: Phase::A,
                        pipe,
                        label: format!("pop-y saddle ({q},{sym},{})", p.tau),
                        state_core: p.stage.clone(),
                        state_margin: layout.margin.clone(),
                        gate_x: Some(hull.clone()),
                        gate_y: Some(hull.clone()),
                        kind: MoveKind::Saddle {
                            pop_x: false,
                            center: g_of(p.tau),
                        },
                        own: vec![SquareId::Staging(q, sym, p.tau)],
                    });
                    a.push(contract_at(
                        &p.stage,
                        pipe,
                        SquareId::Staging(q, sym, p.tau),
                    ));
                }
            }
        }
    }

    for d in &layout.deposits {
        let own = vec![
            d.from_square,
            SquareId::State(d.target),
            SquareId::SubCell(d.id),
        ];
        for (i, leg) in d.legs.iter().enumerate() {
            deps.push(Proto {
                phase: Phase::B,
                pipe: d.id,
                label: format!("deposit leg {} ({})", i + 1, d.id),
                state_core: leg.tube(),
                state_margin: leg.margin.clone(),
                gate_x: None,
                gate_y: None,
                kind: MoveKind::Translate {
                    disp: leg_disp(leg),
                },
                own: own.clone(),
            });
        }
    }

    let protos: Vec<Proto> = a.into_iter().chain(deps).collect();
    let n = protos.len().max(1);
    let slot_width = rat(4, 5) / Rat::from_integer(BigInt::from(n as i64));
    let shrink = &slot_width / rat(20, 1);
    let windows = protos
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let slot_lo = rat(1, 10) + Rat::from_integer(BigInt::from(i as i64)) * &slot_width;
            let map = map_of(&p.kind, b);
            Window {
                idx: i,
                s0: &slot_lo + &shrink,
                s1: slot_lo + &slot_width - &shrink,
                phase: p.phase,
                pipe: p.pipe,
                label: p.label,
                state_core: p.state_core,
                state_margin: p.state_margin,
                gate_x: p.gate_x,
                gate_y: p.gate_y,
                kind: p.kind,
                map,
                own: p.own,
            }
        })
        .collect();

    Schedule {
        alphabet: b,
        slot_width,
        windows,
    }
}

impl Schedule {
    /// Check the structural window invariants; used by tests and the
    /// machine self-check.
    pub fn structural_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let lo = rat(1, 10);
        let hi = rat(9, 10);
        let mut seen_b = false;
        for w in &self.windows {
            if w.s0 >= w.s1 || w.s0 < lo || w.s1 > hi {
                out.push(format!(
                    "window {} ({}) outside the active band",
                    w.idx, w.label
                ));
            }
            match w.phase {
                Phase::B => seen_b = true,
                Phase::A => {
                    if seen_b {
                        out.push(format!(
                            "ingest/surgery window {} ({}) after a deposit window",
                            w.idx, w.label
                        ));
                    }
                }
            }
        }
        for pair in self.windows.windows(2) {
            if pair[0].s1 >= pair[1].s0 {
                out.push(format!(
                    "windows {} and {} overlap",
                    pair[0].idx, pair[1].idx
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::Layout;
    use crate::tm::TMSpec;

    fn halt3() -> TMSpec {
        TMSpec::parse(
            "alphabet: 2\nstates: START,MID,HALT\nstart: START\nhalt: HALT\n\
             START 0 -> MID 1 N\nSTART 1 -> HALT 1 N\nMID 1 -> MID 0 R\nMID 0 -> HALT 1 N\n",
        )
        .unwrap()
    }

    fn loop_machine() -> TMSpec {
        TMSpec::parse(
            "alphabet: 2\nstates: START,HALT\nstart: START\nhalt: HALT\n\
             START 0 -> START 0 R\nSTART 1 -> START 1 R\n",
        )
        .unwrap()
    }

    #[test]
    fn halt3_window_count_and_invariants() {
        let layout = Layout::build(&halt3()).unwrap();
        let sched = build_schedule(&layout);
        // 4 branches: 8 + 7 + 9 + 8 elementary windows
        assert_eq!(sched.windows.len(), 32);
        assert!(sched.windows.len() <= 50);
        assert!(sched.structural_violations().is_empty());
    }

    #[test]
    fn same_symbol_stationary_branch_has_no_write_or_shift() {
        let layout = Layout::build(&halt3()).unwrap();
        let sched = build_schedule(&layout);
        // branch (START,1) writes 1 over 1 and stays: ingest x3, contract, deposit x3
        let wins: Vec<&Window> = sched
            .windows
            .iter()
            .filter(|w| {
                w.pipe
                    == PipeId {
                        state: 0,
                        sym: 1,
                        pop: None,
                    }
            })
            .collect();
        assert_eq!(wins.len(), 7);
        assert!(wins
            .iter()
            .all(|w| !matches!(w.kind, MoveKind::Saddle { .. })));
        assert!(!wins.iter().any(|w| w.label.starts_with("write")));
    }

    #[test]
    fn loop_schedule_targets_only_start() {
        let spec = loop_machine();
        let layout = Layout::build(&spec).unwrap();
        for d in &layout.deposits {
            assert_eq!(d.target, spec.start());
        }
        let sched = build_schedule(&layout);
        assert!(sched.structural_violations().is_empty());
    }

    #[test]
    fn saddle_map_is_the_shift_conjugacy() {
        use crate::encoding::{encode_tape, push_left_map};
        use crate::tm::Tape;
        let layout = Layout::build(&halt3()).unwrap();
        let sched = build_schedule(&layout);
        let saddle = sched
            .windows
            .iter()
            .find(|w| matches!(w.kind, MoveKind::Saddle { pop_x: true, .. }))
            .expect("halt3 has a pop-x saddle");
        // branch (MID,1) writes 0 then shifts left
        let mut t = Tape::from_cells(vec![], 1, vec![1, 0, 1]);
        t.write(0);
        let p = encode_tape(&t, 2);
        let before = [rat(0, 1), rat(0, 1), p.x.clone(), p.y.clone()];
        let after = saddle.map.apply(&before);
        let (ex, ey) = push_left_map(&p.x, &p.y, 0, 2);
        assert_eq!(after[2], ex);
        assert_eq!(after[3], ey);
    }

    #[test]
    fn windows_fill_the_active_band_in_order() {
        let layout = Layout::build(&loop_machine()).unwrap();
        let sched = build_schedule(&layout);
        assert_eq!(sched.windows.len(), 16);
        assert!(sched.windows.first().unwrap().s0 > rat(1, 10));
        assert!(sched.windows.last().unwrap().s1 < rat(9, 10));
    }
}
