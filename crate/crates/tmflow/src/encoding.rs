//! Exact rational encoding of tapes into the tape torus and of machine
//! states into squares of the state torus.
//!
//! A half-tape with digits d0, d1, ... in alphabet {0..b-1} encodes as
//!
//!   sum_n c(d_n) * B^-(n+1),    c(d) = 2d + 1/2,    B = 2b.
//!
//! The doubled radix opens a gap of width exactly 1/(B-1) between the
//! value hulls of adjacent leading digits, and the +1/2 offset keeps every
//! encoding at least 1/(2(B-1)) away from the torus seam at 0, so smooth
//! cutoffs later live inside one fundamental domain. Blank tails sum in
//! closed form, making every encoding an exact rational.

use num::{BigInt, BigRational};
use thiserror::Error;

use crate::layout::Layout;
use crate::tm::{Configuration, TMSpec, Tape};

/// Arbitrary-precision rational, always in reduced canonical form.
pub type Rat = BigRational;

/// Shorthand rational constructor.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Point of the tape torus carrying a valid tape encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TapePoint {
    pub x: Rat,
    pub y: Rat,
}

/// A configuration realized on the 4-torus: state point inside the state
/// square of its machine state, tape point a valid encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config4 {
    pub state_pt: (Rat, Rat),
    pub tape_pt: TapePoint,
}

impl Config4 {
    pub fn coords(&self) -> [Rat; 4] {
        [
            self.state_pt.0.clone(),
            self.state_pt.1.clone(),
            self.tape_pt.x.clone(),
            self.tape_pt.y.clone(),
        ]
    }

    pub fn from_coords(c: [Rat; 4]) -> Self {
        let [a, b, x, y] = c;
        Config4 {
            state_pt: (a, b),
            tape_pt: TapePoint { x, y },
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("symbol {sym} >= alphabet size {b}")]
    SymbolOutOfRange { sym: u8, b: u8 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("coordinate {0} does not lie in the encoding Cantor set")]
    PointNotInCantorSet(String),
    #[error("tape support exceeds {max_cells} cells; point does not encode a finite tape")]
    NonterminatingTape { max_cells: usize },
}

/// Radix B = 2b of the encoding.
pub fn radix(b: u8) -> u32 {
    2 * b as u32
}

/// Digit value c(d) = 2d + 1/2.
pub fn digit_value(d: u8) -> Rat {
    rat(4 * d as i64 + 1, 2)
}

/// Least encodable half-tape value: 1/(2(B-1)), attained by the blank tape.
pub fn enc_lo(b: u8) -> Rat {
    rat(1, 2 * (radix(b) as i64 - 1))
}

/// Greatest encodable half-tape value: (2b - 3/2)/(B-1).
pub fn enc_hi(b: u8) -> Rat {
    rat(4 * b as i64 - 3, 2 * (radix(b) as i64 - 1))
}

/// Encode one half-tape (nearest cell first). Blank tail folded in closed
/// form by starting the Horner recursion at the blank fixpoint.
pub fn encode_half(digits: impl DoubleEndedIterator<Item = u8>, b: u8) -> Rat {
    let big_b = Rat::from_integer(BigInt::from(radix(b)));
    let mut v = enc_lo(b);
    for d in digits.rev() {
        debug_assert!(d < b, "tape symbol {d} outside alphabet 0..{b}");
        v = (digit_value(d) + v) / &big_b;
    }
    v
}

/// Encode a canonical tape: x carries the head and everything to its
/// right, y everything to its left.
pub fn encode_tape(t: &Tape, b: u8) -> TapePoint {
    TapePoint {
        x: encode_half(t.right_half().collect::<Vec<_>>().into_iter(), b),
        y: encode_half(t.left_half().collect::<Vec<_>>().into_iter(), b),
    }
}

/// Value hull of {half-tapes with leading digit sym}:
/// [(c(sym) + enc_lo)/B, (c(sym) + enc_hi)/B]. Consecutive hulls are
/// separated by gaps of width exactly 1/(B-1).
pub fn cylinder_interval(sym: u8, b: u8) -> Result<(Rat, Rat), EncodingError> {
    if sym >= b {
        return Err(EncodingError::SymbolOutOfRange { sym, b });
    }
    let big_b = Rat::from_integer(BigInt::from(radix(b)));
    let c = digit_value(sym);
    Ok(((&c + enc_lo(b)) / &big_b, (c + enc_hi(b)) / big_b))
}

fn decode_half(start: &Rat, b: u8, max_cells: usize) -> Result<Vec<u8>, DecodeError> {
    let blank = enc_lo(b);
    let big_b = Rat::from_integer(BigInt::from(radix(b)));
    let mut x = start.clone();
    let mut digits = Vec::new();
    while x != blank {
        if digits.len() >= max_cells {
            return Err(DecodeError::NonterminatingTape { max_cells });
        }
        let mut found = None;
        for sym in 0..b {
            let (lo, hi) = cylinder_interval(sym, b).expect("sym < b");
            if lo <= x && x <= hi {
                found = Some(sym);
                break;
            }
        }
        let sym = found.ok_or_else(|| DecodeError::PointNotInCantorSet(x.to_string()))?;
        digits.push(sym);
        x = x * &big_b - digit_value(sym);
    }
    Ok(digits)
}

/// Invert [`encode_tape`]. Trailing blanks cannot appear in the output:
/// a blank tail encodes exactly as the blank fixpoint, so extraction
/// stops at the canonical boundary.
pub fn decode_tape(p: &TapePoint, b: u8, max_cells: usize) -> Result<Tape, DecodeError> {
    let xs = decode_half(&p.x, b, max_cells)?;
    let ys = decode_half(&p.y, b, max_cells)?;
    let head = xs.first().copied().unwrap_or(0);
    let right = xs.get(1..).unwrap_or(&[]).to_vec();
    Ok(Tape::from_cells(ys, head, right))
}

/// Place a configuration on the torus: state point at the center of its
/// state square, tape point its exact encoding.
pub fn encode_config(spec: &TMSpec, c: &Configuration, layout: &Layout) -> Config4 {
    let sq = &layout.state_squares[c.state];
    Config4 {
        state_pt: sq.center(),
        tape_pt: encode_tape(&c.tape, spec.alphabet()),
    }
}

/// Which closed state square contains the point, if any.
pub fn classify_state(layout: &Layout, pt: &(Rat, Rat)) -> Option<usize> {
    layout.state_squares.iter().position(|sq| sq.contains(pt))
}

/// True if the value is a valid half-tape encoding bound.
pub fn in_enc_hull(v: &Rat, b: u8) -> bool {
    enc_lo(b) <= *v && *v <= enc_hi(b)
}

/// Exact affine push map on (x, y) realized by writing `sym` and shifting
/// the tape left (head right): x expands by B losing its top digit, y
/// receives it.
pub fn push_left_map(x: &Rat, y: &Rat, sym: u8, b: u8) -> (Rat, Rat) {
    let big_b = Rat::from_integer(BigInt::from(radix(b)));
    let c = digit_value(sym);
    (x * &big_b - &c, (y + c) / big_b)
}

/// Mirror of [`push_left_map`] for a right shift popping digit `sym` from y.
pub fn push_right_map(x: &Rat, y: &Rat, sym: u8, b: u8) -> (Rat, Rat) {
    let big_b = Rat::from_integer(BigInt::from(radix(b)));
    let c = digit_value(sym);
    ((x + &c) / &big_b, y * big_b - c)
}

/// Convert to f64 (exact layer feeds the numeric layer only here).
pub fn to_f64(r: &Rat) -> f64 {
    use num::ToPrimitive;
    r.to_f64().expect("rational out of f64 range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tm::Tape;
    use num::{One, Zero};
    use proptest::prelude::*;

    /// Independent oracle: explicit 50-term partial sum of the digit
    /// series plus the closed-form blank tail for the truncated part.
    fn encode_half_oracle(digits: &[u8], b: u8) -> Rat {
        let big_b = Rat::from_integer(BigInt::from(radix(b)));
        let mut acc = Rat::zero();
        let mut pow = Rat::one();
        for n in 0..50usize {
            pow /= &big_b;
            let d = digits.get(n).copied().unwrap_or(0);
            acc += digit_value(d) * &pow;
        }
        // exact blank tail beyond the 50 summed terms
        acc + rat(1, 2) * &pow / (big_b - Rat::one())
    }

    #[test]
    fn blank_tape_encodes_to_one_sixth() {
        let p = encode_tape(&Tape::blank(), 2);
        assert_eq!(p.x, rat(1, 6));
        assert_eq!(p.y, rat(1, 6));
        assert_eq!(encode_half_oracle(&[], 2), rat(1, 6));
    }

    #[test]
    fn head_one_encodes_to_two_thirds() {
        let t = Tape::from_cells(vec![], 1, vec![]);
        let p = encode_tape(&t, 2);
        assert_eq!(p.x, rat(2, 3));
        assert_eq!(p.y, rat(1, 6));
        assert_eq!(encode_half_oracle(&[1], 2), rat(2, 3));
    }

    #[test]
    fn head_zero_then_one_encodes_to_seven_twentyfourths() {
        let t = Tape::from_cells(vec![], 0, vec![1]);
        let p = encode_tape(&t, 2);
        assert_eq!(p.x, rat(7, 24));
        assert_eq!(encode_half_oracle(&[0, 1], 2), rat(7, 24));
    }

    #[test]
    fn cylinder_hulls_match_extremal_tapes() {
        assert_eq!(cylinder_interval(0, 2).unwrap(), (rat(1, 6), rat(1, 3)));
        assert_eq!(cylinder_interval(1, 2).unwrap(), (rat(2, 3), rat(5, 6)));
        // lower end of hull(0) is the all-blank tape, exactly
        assert_eq!(encode_tape(&Tape::blank(), 2).x, rat(1, 6));
        // upper end of hull(1) is the limit of all-ones tapes; check a long one
        let ones = Tape::from_cells(vec![], 1, vec![1; 40]);
        let (lo1, hi1) = cylinder_interval(1, 2).unwrap();
        let x = encode_tape(&ones, 2).x;
        assert!(lo1 <= x && x < hi1);
        assert!(&hi1 - &x < rat(1, 1_000_000_000));
        assert!(cylinder_interval(2, 2).is_err());
    }

    #[test]
    fn gap_between_hulls_is_one_over_b_minus_one() {
        for b in 2..=4u8 {
            let big_b = radix(b) as i64;
            for sym in 0..b - 1 {
                let (_, hi) = cylinder_interval(sym, b).unwrap();
                let (lo_next, _) = cylinder_interval(sym + 1, b).unwrap();
                assert_eq!(lo_next - hi, rat(1, big_b - 1), "b={b} sym={sym}");
            }
            // seam margins on both sides
            let (lo0, _) = cylinder_interval(0, b).unwrap();
            let (_, hi_top) = cylinder_interval(b - 1, b).unwrap();
            assert_eq!(lo0, enc_lo(b));
            assert_eq!(hi_top, enc_hi(b));
            assert_eq!(enc_lo(b), rat(1, 2 * (big_b - 1)));
            assert_eq!(Rat::one() - enc_hi(b), rat(1, 2 * (big_b - 1)));
        }
    }

    #[test]
    fn decode_inverts_encode_on_examples() {
        let p = TapePoint {
            x: rat(1, 6),
            y: rat(1, 6),
        };
        assert_eq!(decode_tape(&p, 2, 64).unwrap(), Tape::blank());
        let p = TapePoint {
            x: rat(2, 3),
            y: rat(1, 6),
        };
        assert_eq!(
            decode_tape(&p, 2, 64).unwrap(),
            Tape::from_cells(vec![], 1, vec![])
        );
    }

    #[test]
    fn central_gap_point_is_rejected() {
        let p = TapePoint {
            x: rat(1, 2),
            y: rat(1, 6),
        };
        match decode_tape(&p, 2, 64) {
            Err(DecodeError::PointNotInCantorSet(_)) => {}
            other => panic!("expected gap rejection, got {other:?}"),
        }
    }

    #[test]
    fn nonterminating_point_is_rejected() {
        // 3/10 has the periodic digit expansion 0,1,0,1,... for b=2:
        // 4*(3/10) - c(0) = 7/10 and 4*(7/10) - c(1) = 3/10 again.
        let p = TapePoint {
            x: rat(3, 10),
            y: rat(1, 6),
        };
        match decode_tape(&p, 2, 32) {
            Err(DecodeError::NonterminatingTape { .. }) => {}
            other => panic!("expected nonterminating tape, got {other:?}"),
        }
    }

    #[test]
    fn encode_config_centers_and_classifies() {
        use crate::layout::Layout;
        use crate::tm::{step, Configuration, StepResult, TMSpec};
        let spec = TMSpec::parse(
            "alphabet: 2\nstates: START,MID,HALT\nstart: START\nhalt: HALT\n\
             START 0 -> MID 1 N\nSTART 1 -> HALT 1 N\nMID 1 -> MID 0 R\nMID 0 -> HALT 1 N\n",
        )
        .unwrap();
        let layout = Layout::build(&spec).unwrap();
        let blank = Configuration::start(&spec, Tape::blank());
        let q = encode_config(&spec, &blank, &layout);
        assert_eq!(q.state_pt, layout.state_squares[spec.start()].center());
        assert_eq!(
            q.tape_pt,
            TapePoint {
                x: rat(1, 6),
                y: rat(1, 6)
            }
        );

        let halted = Configuration {
            state: spec.halt(),
            tape: Tape::blank(),
        };
        let qh = encode_config(&spec, &halted, &layout);
        assert_eq!(qh.state_pt, layout.state_squares[spec.halt()].center());

        // classify inverts placement along a whole run
        let mut c = blank;
        loop {
            let q = encode_config(&spec, &c, &layout);
            assert_eq!(classify_state(&layout, &q.state_pt), Some(c.state));
            match step(&spec, &c) {
                StepResult::Stepped(next) => c = next,
                StepResult::Halted => break,
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn decode_encode_roundtrip(
            b in 2..=4u8,
            left in proptest::collection::vec(0..4u8, 0..8),
            head in 0..4u8,
            right in proptest::collection::vec(0..4u8, 0..8),
        ) {
            let clamp = |v: Vec<u8>| v.into_iter().map(|d| d % b).collect::<Vec<_>>();
            let t = Tape::from_cells(clamp(left), head % b, clamp(right));
            let p = encode_tape(&t, b);
            prop_assert!(in_enc_hull(&p.x, b) && in_enc_hull(&p.y, b));
            prop_assert!(p.x > Rat::zero() && p.x < Rat::one());
            let back = decode_tape(&p, b, 64).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn shift_conjugacy_is_exact(
            b in 2..=4u8,
            left in proptest::collection::vec(0..4u8, 0..6),
            head in 0..4u8,
            right in proptest::collection::vec(0..4u8, 0..6),
            write in 0..4u8,
        ) {
            let clamp = |v: Vec<u8>| v.into_iter().map(|d| d % b).collect::<Vec<_>>();
            let t = Tape::from_cells(clamp(left), head % b, clamp(right));
            let w = write % b;

            // left shift after writing w
            let mut written = t.clone();
            written.write(w);
            let pw = encode_tape(&written, b);
            let mut shifted = written.clone();
            shifted.shift(1);
            let ps = encode_tape(&shifted, b);
            let (ax, ay) = push_left_map(&pw.x, &pw.y, w, b);
            prop_assert_eq!(&ps.x, &ax);
            prop_assert_eq!(&ps.y, &ay);

            // right shift pops the cell at -1
            let popped = written.cell(-1);
            let mut shifted_r = written.clone();
            shifted_r.shift(-1);
            let pr = encode_tape(&shifted_r, b);
            let (bx, by) = push_right_map(&pw.x, &pw.y, popped, b);
            prop_assert_eq!(&pr.x, &bx);
            prop_assert_eq!(&pr.y, &by);
        }
    }
}
