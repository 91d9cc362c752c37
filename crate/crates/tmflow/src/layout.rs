//! Spatial layout of the machine on the state torus: one square per
//! state, a private parking square per branch (q, sym), a staging square
//! per right-shift piece (q, sym, tau), per-pipeline deposit sub-cells
//! inside the target state square, and the travel-leg tubes connecting
//! them.
//!
//! All coordinates are exact rationals. The default recipe places state
//! squares on the row y = 1/8, parking on 3/8, staging on 5/8, with
//! horizontal travel lanes at 1/4, 1/2 and 3/4, and one private column
//! per square. Everything the exact period map relies on (squares
//! pairwise clear, tubes clear of foreign rest positions, the halting
//! plateau clear of all non-halting traffic) is checked by
//! [`validate_layout`] with rational interval arithmetic.

use std::fmt;

use num::{BigInt, One, Zero};
use thiserror::Error;

use crate::encoding::{digit_value, enc_hi, enc_lo, radix, rat, Rat};
use crate::tm::{HeadMove, Rule, TMSpec};

/// Axis-aligned closed rectangle with rational corners.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rect {
    pub x0: Rat,
    pub x1: Rat,
    pub y0: Rat,
    pub y1: Rat,
}

impl Rect {
    pub fn from_center(cx: &Rat, cy: &Rat, half: &Rat) -> Rect {
        Rect {
            x0: cx - half,
            x1: cx + half,
            y0: cy - half,
            y1: cy + half,
        }
    }

    /// Swept region of a square of half-side `half` translated from
    /// center `a` to center `b` along an axis.
    pub fn tube(a: &(Rat, Rat), b: &(Rat, Rat), half: &Rat) -> Rect {
        let (x_lo, x_hi) = minmax(&a.0, &b.0);
        let (y_lo, y_hi) = minmax(&a.1, &b.1);
        Rect {
            x0: x_lo - half,
            x1: x_hi + half,
            y0: y_lo - half,
            y1: y_hi + half,
        }
    }

    pub fn center(&self) -> (Rat, Rat) {
        let two = rat(2, 1);
        ((&self.x0 + &self.x1) / &two, (&self.y0 + &self.y1) / two)
    }

    pub fn inflate(&self, m: &Rat) -> Rect {
        Rect {
            x0: &self.x0 - m,
            x1: &self.x1 + m,
            y0: &self.y0 - m,
            y1: &self.y1 + m,
        }
    }

    pub fn contains(&self, p: &(Rat, Rat)) -> bool {
        self.x0 <= p.0 && p.0 <= self.x1 && self.y0 <= p.1 && p.1 <= self.y1
    }

    pub fn contains_open(&self, p: &(Rat, Rat)) -> bool {
        self.x0 < p.0 && p.0 < self.x1 && self.y0 < p.1 && p.1 < self.y1
    }

    pub fn contains_rect_strict(&self, r: &Rect) -> bool {
        self.x0 < r.x0 && r.x1 < self.x1 && self.y0 < r.y0 && r.y1 < self.y1
    }

    /// Chebyshev separation: the largest per-axis gap between the two
    /// rectangles. Positive means every point of one is at least that far
    /// (in some axis) from the other, which is exactly the condition for a
    /// boxed plateau with that margin to vanish on the other rectangle.
    pub fn gap(&self, o: &Rect) -> Rat {
        let sep_x = max_rat(&(&o.x0 - &self.x1), &(&self.x0 - &o.x1));
        let sep_y = max_rat(&(&o.y0 - &self.y1), &(&self.y0 - &o.y1));
        max_rat(&sep_x, &sep_y)
    }

    pub fn inside_unit_square(&self) -> bool {
        self.x0 > Rat::zero()
            && self.y0 > Rat::zero()
            && self.x1 < Rat::one()
            && self.y1 < Rat::one()
    }
}

fn minmax<'a>(a: &'a Rat, b: &'a Rat) -> (Rat, Rat) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

fn max_rat(a: &Rat, b: &Rat) -> Rat {
    if a >= b {
        a.clone()
    } else {
        b.clone()
    }
}

/// Identity of a rest-position square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SquareId {
    State(usize),
    Parking(usize, u8),
    Staging(usize, u8, u8),
    SubCell(PipeId),
}

impl fmt::Display for SquareId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SquareId::State(q) => write!(f, "B[{q}]"),
            SquareId::Parking(q, s) => write!(f, "P[{q},{s}]"),
            SquareId::Staging(q, s, t) => write!(f, "P2[{q},{s},{t}]"),
            SquareId::SubCell(p) => write!(f, "sub[{p}]"),
        }
    }
}

/// One deposit pipeline: a branch (state, sym), split per popped digit
/// for right shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PipeId {
    pub state: usize,
    pub sym: u8,
    pub pop: Option<u8>,
}

impl fmt::Display for PipeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pop {
            Some(t) => write!(f, "{},{},{}", self.state, self.sym, t),
            None => write!(f, "{},{}", self.state, self.sym),
        }
    }
}

/// One straight translation of a square between two centers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leg {
    pub from: (Rat, Rat),
    pub to: (Rat, Rat),
    pub half: Rat,
    pub margin: Rat,
}

impl Leg {
    pub fn tube(&self) -> Rect {
        Rect::tube(&self.from, &self.to, &self.half)
    }

    pub fn displacement(&self) -> (Rat, Rat) {
        (&self.to.0 - &self.from.0, &self.to.1 - &self.from.1)
    }
}

/// Right-shift staging piece for one popped digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopPlan {
    pub tau: u8,
    pub stage: Rect,
    pub legs: [Leg; 3],
}

/// How a branch realizes its tape shift.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShiftPlan {
    None,
    /// Left tape shift: one saddle at the parking square, pushing the
    /// freshly written head digit onto the left half-tape.
    PopX,
    /// Right tape shift: digit-gated staging pipelines, one per possible
    /// popped digit.
    PopY(Vec<PopPlan>),
}

/// Everything one branch (q, sym) does before depositing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchPlan {
    pub state: usize,
    pub sym: u8,
    pub rule: Rule,
    pub park: Rect,
    pub ingest: [Leg; 3],
    pub shift: ShiftPlan,
}

/// Terminal move of a pipeline: from its last parking/staging square into
/// a private sub-cell of the target state square.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepositPlan {
    pub id: PipeId,
    pub target: usize,
    pub from_square: SquareId,
    pub legs: [Leg; 3],
    pub subcell: Rect,
}

/// The full spatial plan for a machine.
#[derive(Debug, Clone)]
pub struct Layout {
    pub alphabet: u8,
    pub halt: usize,
    /// Half-side of state/parking/staging squares.
    pub half_side: Rat,
    /// Support margin of state-square and tube plateaus.
    pub margin: Rat,
    /// Deposit contraction ratio rho; sub-cells have half-side rho * half_side.
    pub contraction: Rat,
    pub sub_half: Rat,
    pub sub_margin: Rat,
    pub rows: [Rat; 3],
    pub lanes: [Rat; 3],
    pub state_squares: Vec<Rect>,
    pub branches: Vec<BranchPlan>,
    pub deposits: Vec<DepositPlan>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LayoutError {
    #[error(
        "machine does not fit the default layout recipe \
         ({states} states, alphabet {alphabet}; limits are 16 and 4)"
    )]
    RecipeOverflow { states: usize, alphabet: u8 },
}

/// A single failed layout invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

impl Layout {
    /// Default placement recipe. Fails only on machines beyond the recipe
    /// bounds; the result always passes [`validate_layout`] by
    /// construction (and the acceptance suite re-checks that).
    pub fn build(spec: &TMSpec) -> Result<Layout, LayoutError> {
        let n_states = spec.num_states();
        let b = spec.alphabet();
        if n_states > 16 || b > 4 {
            return Err(LayoutError::RecipeOverflow {
                states: n_states,
                alphabet: b,
            });
        }

        let branches: Vec<(usize, u8, Rule)> =
            spec.branches().map(|(q, s, r)| (q, s, *r)).collect();
        let pop_branches: Vec<(usize, u8)> = branches
            .iter()
            .filter(|(_, _, r)| r.movement == HeadMove::Left)
            .map(|(q, s, _)| (*q, *s))
            .collect();

        let n_cols = n_states + branches.len() + pop_branches.len() * b as usize;
        let pitch = rat(1, (n_cols as i64 + 1).max(10));
        let half = &pitch / rat(4, 1);
        let margin = &pitch / rat(8, 1);
        let rows = [rat(1, 8), rat(3, 8), rat(5, 8)];
        let lanes = [rat(1, 4), rat(1, 2), rat(3, 4)];

        let mut next_col = 0usize;
        let mut take_col = || {
            next_col += 1;
            Rat::from_integer(BigInt::from(next_col as i64)) * &pitch
        };

        let state_cols: Vec<Rat> = (0..n_states).map(|_| take_col()).collect();
        let state_squares: Vec<Rect> = state_cols
            .iter()
            .map(|cx| Rect::from_center(cx, &rows[0], &half))
            .collect();

        let park_cols: Vec<Rat> = branches.iter().map(|_| take_col()).collect();
        let mut stage_cols: Vec<Vec<Rat>> = Vec::new();
        for _ in &pop_branches {
            stage_cols.push((0..b).map(|_| take_col()).collect());
        }

        // pipelines per target state, in (state, sym, pop) order
        let mut pipes: Vec<(PipeId, usize)> = Vec::new();
        for (q, s, rule) in &branches {
            if rule.movement == HeadMove::Left {
                for tau in 0..b {
                    pipes.push((
                        PipeId {
                            state: *q,
                            sym: *s,
                            pop: Some(tau),
                        },
                        rule.next,
                    ));
                }
            } else {
                pipes.push((
                    PipeId {
                        state: *q,
                        sym: *s,
                        pop: None,
                    },
                    rule.next,
                ));
            }
        }
        let incoming = |q: usize| pipes.iter().filter(|(_, t)| *t == q).count();
        let even_ceil = |n: usize| if n % 2 == 0 { n } else { n + 1 };
        let max_slots = (0..n_states)
            .map(|q| even_ceil(incoming(q)))
            .max()
            .unwrap_or(2)
            .max(2);
        let contraction = rat(1, 2 * max_slots as i64);
        let sub_half = &contraction * &half;
        let sub_margin = &sub_half / rat(2, 1);

        // sub-cell slot per pipeline, filled left to right inside the target
        let mut subcells: Vec<(PipeId, Rect)> = Vec::new();
        for q in 0..n_states {
            let targeting: Vec<&(PipeId, usize)> = pipes.iter().filter(|(_, t)| *t == q).collect();
            if targeting.is_empty() {
                continue;
            }
            let n_slots = even_ceil(targeting.len());
            let slot_pitch = rat(2, 1) * &half / Rat::from_integer(BigInt::from(n_slots as i64));
            for (j, (id, _)) in targeting.iter().enumerate() {
                let cx = &state_cols[q] - &half
                    + (Rat::from_integer(BigInt::from(j as i64)) + rat(1, 2)) * &slot_pitch;
                subcells.push((*id, Rect::from_center(&cx, &rows[0], &sub_half)));
            }
        }
        let subcell_of = |id: PipeId| -> Rect {
            subcells
                .iter()
                .find(|(i, _)| *i == id)
                .map(|(_, r)| r.clone())
                .expect("every pipeline has a sub-cell")
        };

        // branch plans
        let mut plans: Vec<BranchPlan> = Vec::new();
        let mut deposits: Vec<DepositPlan> = Vec::new();
        let mut pop_idx = 0usize;
        for (bi, (q, s, rule)) in branches.iter().enumerate() {
            let b_col = &state_cols[*q];
            let p_col = &park_cols[bi];
            let park = Rect::from_center(p_col, &rows[1], &half);
            let leg = |from: (Rat, Rat), to: (Rat, Rat)| Leg {
                from,
                to,
                half: half.clone(),
                margin: margin.clone(),
            };
            let ingest = [
                leg(
                    (b_col.clone(), rows[0].clone()),
                    (b_col.clone(), lanes[0].clone()),
                ),
                leg(
                    (b_col.clone(), lanes[0].clone()),
                    (p_col.clone(), lanes[0].clone()),
                ),
                leg(
                    (p_col.clone(), lanes[0].clone()),
                    (p_col.clone(), rows[1].clone()),
                ),
            ];

            let mut deposit_from =
                |id: PipeId, from_sq: SquareId, from_col: &Rat, from_row: &Rat| {
                    let sub = subcell_of(id);
                    let (sub_cx, sub_cy) = sub.center();
                    let dleg = |from: (Rat, Rat), to: (Rat, Rat)| Leg {
                        from,
                        to,
                        half: sub_half.clone(),
                        margin: sub_margin.clone(),
                    };
                    deposits.push(DepositPlan {
                        id,
                        target: rule.next,
                        from_square: from_sq,
                        legs: [
                            dleg(
                                (from_col.clone(), from_row.clone()),
                                (from_col.clone(), lanes[0].clone()),
                            ),
                            dleg(
                                (from_col.clone(), lanes[0].clone()),
                                (sub_cx.clone(), lanes[0].clone()),
                            ),
                            dleg((sub_cx.clone(), lanes[0].clone()), (sub_cx, sub_cy)),
                        ],
                        subcell: sub,
                    });
                };

            let shift = match rule.movement {
                HeadMove::Stay => {
                    deposit_from(
                        PipeId {
                            state: *q,
                            sym: *s,
                            pop: None,
                        },
                        SquareId::Parking(*q, *s),
                        p_col,
                        &rows[1],
                    );
                    ShiftPlan::None
                }
                HeadMove::Right => {
                    deposit_from(
                        PipeId {
                            state: *q,
                            sym: *s,
                            pop: None,
                        },
                        SquareId::Parking(*q, *s),
                        p_col,
                        &rows[1],
                    );
                    ShiftPlan::PopX
                }
                HeadMove::Left => {
                    let cols = &stage_cols[pop_idx];
                    pop_idx += 1;
                    let mut pops = Vec::new();
                    for tau in 0..b {
                        let s_col = &cols[tau as usize];
                        let stage = Rect::from_center(s_col, &rows[2], &half);
                        let legs = [
                            leg(
                                (p_col.clone(), rows[1].clone()),
                                (p_col.clone(), lanes[1].clone()),
                            ),
                            leg(
                                (p_col.clone(), lanes[1].clone()),
                                (s_col.clone(), lanes[1].clone()),
                            ),
                            leg(
                                (s_col.clone(), lanes[1].clone()),
                                (s_col.clone(), rows[2].clone()),
                            ),
                        ];
                        deposit_from(
                            PipeId {
                                state: *q,
                                sym: *s,
                                pop: Some(tau),
                            },
                            SquareId::Staging(*q, *s, tau),
                            s_col,
                            &rows[2],
                        );
                        pops.push(PopPlan { tau, stage, legs });
                    }
                    ShiftPlan::PopY(pops)
                }
            };

            plans.push(BranchPlan {
                state: *q,
                sym: *s,
                rule: *rule,
                park,
                ingest,
                shift,
            });
        }

        Ok(Layout {
            alphabet: b,
            halt: spec.halt(),
            half_side: half,
            margin,
            contraction,
            sub_half,
            sub_margin,
            rows,
            lanes,
            state_squares,
            branches: plans,
            deposits,
        })
    }

    /// All named squares with their rectangles (sub-cells included).
    pub fn squares(&self) -> Vec<(SquareId, Rect)> {
        let mut out: Vec<(SquareId, Rect)> = Vec::new();
        for (q, sq) in self.state_squares.iter().enumerate() {
            out.push((SquareId::State(q), sq.clone()));
        }
        for br in &self.branches {
            out.push((SquareId::Parking(br.state, br.sym), br.park.clone()));
            if let ShiftPlan::PopY(pops) = &br.shift {
                for p in pops {
                    out.push((SquareId::Staging(br.state, br.sym, p.tau), p.stage.clone()));
                }
            }
        }
        for d in &self.deposits {
            out.push((SquareId::SubCell(d.id), d.subcell.clone()));
        }
        out
    }

    pub fn square(&self, id: SquareId) -> Option<Rect> {
        self.squares()
            .into_iter()
            .find(|(i, _)| *i == id)
            .map(|(_, r)| r)
    }

    /// Closed halting region core: the halt square inflated by half of
    /// `half_side`. The height function is exactly 1 here (times the clock
    /// plateau).
    pub fn halt_core(&self) -> Rect {
        self.state_squares[self.halt].inflate(&(&self.half_side / rat(2, 1)))
    }

    /// Halting plateau support: halt square inflated by `half_side`.
    pub fn halt_support(&self) -> Rect {
        self.state_squares[self.halt].inflate(&self.half_side)
    }

    /// Deposit plans grouped in pipeline order.
    pub fn pipelines(&self) -> impl Iterator<Item = &DepositPlan> {
        self.deposits.iter()
    }
}

/// Legs annotated with ownership, for tube checks.
struct OwnedLeg<'a> {
    leg: &'a Leg,
    own: Vec<SquareId>,
    what: String,
    deposits_to_halt: bool,
}

fn all_legs(layout: &Layout) -> Vec<OwnedLeg<'_>> {
    let mut out = Vec::new();
    let sub_ids_of = |q: usize| -> Vec<SquareId> {
        layout
            .deposits
            .iter()
            .filter(|d| d.target == q)
            .map(|d| SquareId::SubCell(d.id))
            .collect()
    };
    for br in &layout.branches {
        let mut own = vec![
            SquareId::State(br.state),
            SquareId::Parking(br.state, br.sym),
        ];
        own.extend(sub_ids_of(br.state));
        for (i, leg) in br.ingest.iter().enumerate() {
            out.push(OwnedLeg {
                leg,
                own: own.clone(),
                what: format!("ingest leg {} of branch ({},{})", i + 1, br.state, br.sym),
                deposits_to_halt: false,
            });
        }
        if let ShiftPlan::PopY(pops) = &br.shift {
            for p in pops {
                let own = vec![
                    SquareId::Parking(br.state, br.sym),
                    SquareId::Staging(br.state, br.sym, p.tau),
                ];
                for (i, leg) in p.legs.iter().enumerate() {
                    out.push(OwnedLeg {
                        leg,
                        own: own.clone(),
                        what: format!(
                            "staging leg {} of piece ({},{},{})",
                            i + 1,
                            br.state,
                            br.sym,
                            p.tau
                        ),
                        deposits_to_halt: false,
                    });
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
            out.push(OwnedLeg {
                leg,
                own: own.clone(),
                what: format!("deposit leg {} of pipeline ({})", i + 1, d.id),
                deposits_to_halt: d.target == layout.halt,
            });
        }
    }
    out
}

/// Check every spatial invariant the exact period map relies on. Returns
/// violations as data; an empty list means the layout is sound.
pub fn validate_layout(layout: &Layout) -> Vec<Violation> {
    let mut v: Vec<Violation> = Vec::new();
    let squares = layout.squares();
    let two_margin = rat(2, 1) * &layout.margin;

    // named full-size squares pairwise clear of each other
    let full: Vec<&(SquareId, Rect)> = squares
        .iter()
        .filter(|(id, _)| !matches!(id, SquareId::SubCell(_)))
        .collect();
    for i in 0..full.len() {
        for j in i + 1..full.len() {
            let (ida, ra) = full[i];
            let (idb, rb) = full[j];
            if ra.gap(rb) < two_margin {
                v.push(Violation {
                    code: "square-overlap",
                    detail: format!("{ida} and {idb} closer than twice the margin"),
                });
            }
        }
    }

    // sub-cells strictly inside their target, pairwise disjoint per target
    for d in &layout.deposits {
        if !layout.state_squares[d.target].contains_rect_strict(&d.subcell) {
            v.push(Violation {
                code: "subcell-outside-target",
                detail: format!("sub[{}] not strictly inside B[{}]", d.id, d.target),
            });
        }
        // deposit traffic must stay clear of the target's center, which
        // is the canonical placement of fresh configurations
        let c = layout.state_squares[d.target].center();
        for (i, leg) in d.legs.iter().enumerate() {
            if leg.tube().inflate(&leg.margin).contains(&c) {
                v.push(Violation {
                    code: "deposit-covers-center",
                    detail: format!(
                        "deposit leg {} of pipeline ({}) reaches the center of B[{}]",
                        i + 1,
                        d.id,
                        d.target
                    ),
                });
            }
        }
    }
    for i in 0..layout.deposits.len() {
        for j in i + 1..layout.deposits.len() {
            let (a, b) = (&layout.deposits[i], &layout.deposits[j]);
            if a.target == b.target && a.subcell.gap(&b.subcell) <= Rat::zero() {
                v.push(Violation {
                    code: "subcell-overlap",
                    detail: format!("sub[{}] and sub[{}] intersect", a.id, b.id),
                });
            }
        }
    }

    // leg tubes clear of every foreign rest position
    let legs = all_legs(layout);
    for ol in &legs {
        let tube = ol.leg.tube();
        if !tube.inflate(&ol.leg.margin).inside_unit_square() {
            v.push(Violation {
                code: "tube-wraps-seam",
                detail: format!("{} leaves the fundamental square", ol.what),
            });
        }
        for (id, rect) in &squares {
            if ol.own.contains(id) {
                continue;
            }
            if tube.gap(rect) < ol.leg.margin {
                v.push(Violation {
                    code: "tube-through-square",
                    detail: format!("{} comes within its margin of {id}", ol.what),
                });
            }
        }
    }

    // halting plateau support: clear of foreign squares, lanes and all
    // traffic except its own arrivals
    let hs = layout.halt_support();
    let halt_own: Vec<SquareId> = std::iter::once(SquareId::State(layout.halt))
        .chain(
            layout
                .deposits
                .iter()
                .filter(|d| d.target == layout.halt)
                .map(|d| SquareId::SubCell(d.id)),
        )
        .collect();
    for (id, rect) in &squares {
        if halt_own.contains(id) {
            continue;
        }
        if hs.gap(rect) <= Rat::zero() {
            v.push(Violation {
                code: "halt-support-square",
                detail: format!("halting plateau support touches {id}"),
            });
        }
    }
    for ol in &legs {
        if ol.deposits_to_halt {
            continue;
        }
        if hs.gap(&ol.leg.tube()) <= Rat::zero() {
            v.push(Violation {
                code: "halt-support-tube",
                detail: format!("halting plateau support touches {}", ol.what),
            });
        }
    }
    let lane_halfwidth = &layout.half_side + &layout.margin;
    for lane in &layout.lanes {
        let band = Rect {
            x0: Rat::zero(),
            x1: Rat::one(),
            y0: lane - &lane_halfwidth,
            y1: lane + &lane_halfwidth,
        };
        if hs.gap(&band) <= Rat::zero() {
            v.push(Violation {
                code: "halt-support-lane",
                detail: format!("halting plateau support touches the lane at y = {lane}"),
            });
        }
    }
    if !hs.inside_unit_square() {
        v.push(Violation {
            code: "halt-support-seam",
            detail: "halting plateau support leaves the fundamental square".into(),
        });
    }

    // squares plus margins stay inside the fundamental square
    for (id, rect) in &squares {
        if !rect.inflate(&layout.margin).inside_unit_square() {
            v.push(Violation {
                code: "square-wraps-seam",
                detail: format!("{id} support leaves the fundamental square"),
            });
        }
    }

    // tape-side arithmetic: cylinder supports must stay disjoint and off
    // the seam with the margin used by the gates
    let b = layout.alphabet;
    let gate_margin = &enc_lo(b) / rat(2, 1);
    let big_b = radix(b) as i64;
    let gap = rat(1, big_b - 1);
    if rat(2, 1) * &gate_margin >= gap {
        v.push(Violation {
            code: "cylinder-gate-margin",
            detail: "cylinder gate supports are not separated".into(),
        });
    }
    if &enc_lo(b) - &gate_margin <= Rat::zero()
        || &enc_hi(b) + &gate_margin >= Rat::one()
        || digit_value(b - 1) >= Rat::from_integer(BigInt::from(big_b))
    {
        v.push(Violation {
            code: "cylinder-gate-seam",
            detail: "tape gate supports reach the torus seam".into(),
        });
    }

    v
}
