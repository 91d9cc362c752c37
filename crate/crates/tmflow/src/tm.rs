//! Deterministic Turing machines with a bi-infinite, finitely supported
//! tape, plus the text format used for machine files.
//!
//! Tapes are kept in canonical form (no blank cells stored beyond the
//! outermost nonblank ones), which is what makes the torus encoding of a
//! configuration an exact rational.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

/// The blank symbol. Fixed to 0 so that blank tails sum to a closed-form
/// rational under the torus encoding.
pub const BLANK: u8 = 0;

/// Head motion written in machine files. `Right` shifts the tape left
/// (eps = +1), `Left` shifts it right (eps = -1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadMove {
    Left,
    Stay,
    Right,
}

impl HeadMove {
    /// Tape shift eps in {-1, 0, +1} realized by this head motion.
    pub fn tape_shift(self) -> i8 {
        match self {
            HeadMove::Right => 1,
            HeadMove::Stay => 0,
            HeadMove::Left => -1,
        }
    }

    pub fn letter(self) -> char {
        match self {
            HeadMove::Right => 'R',
            HeadMove::Left => 'L',
            HeadMove::Stay => 'N',
        }
    }

    fn from_letter(s: &str) -> Option<Self> {
        match s {
            "R" => Some(HeadMove::Right),
            "L" => Some(HeadMove::Left),
            "N" => Some(HeadMove::Stay),
            _ => None,
        }
    }
}

/// One entry of the transition table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rule {
    pub next: usize,
    pub write: u8,
    pub movement: HeadMove,
}

/// A validated machine: alphabet {0..b-1}, named states, start/halt
/// indices, and a transition table that is total on (Q \ {halt}) x Sigma
/// and empty on the halt row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TMSpec {
    alphabet: u8,
    states: Vec<String>,
    start: usize,
    halt: usize,
    rules: Vec<Option<Rule>>,
}

/// Machine-file parse or validation failure. Positions are 1-based.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{line}: duplicate directive `{name}`")]
    DuplicateDirective { line: usize, name: &'static str },
    #[error("missing directive `{name}`")]
    MissingDirective { name: &'static str },
    #[error("{line}: alphabet size {b} out of range (need 2..=16)")]
    AlphabetOutOfRange { line: usize, b: i64 },
    #[error("{line}: duplicate state `{name}`")]
    DuplicateState { line: usize, name: String },
    #[error("{line}:{col}: unknown state `{name}`")]
    UnknownState {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: symbol {sym} >= alphabet size {b}")]
    SymbolOutOfRange {
        line: usize,
        col: usize,
        sym: i64,
        b: u8,
    },
    #[error("{line}: transition declared for the halt state")]
    HaltTransition { line: usize },
    #[error("{line}: duplicate transition for ({state}, {sym})")]
    DuplicateTransition { line: usize, state: String, sym: u8 },
    #[error("missing transition for ({state}, {sym})")]
    MissingTransition { state: String, sym: u8 },
    #[error("start and halt state must differ")]
    StartEqualsHalt,
}

impl TMSpec {
    /// Build a spec from parts, enforcing every table invariant.
    pub fn new(
        alphabet: u8,
        states: Vec<String>,
        start: usize,
        halt: usize,
        table: BTreeMap<(usize, u8), Rule>,
    ) -> Result<Self, ParseError> {
        if !(2..=16).contains(&alphabet) {
            return Err(ParseError::AlphabetOutOfRange {
                line: 0,
                b: alphabet as i64,
            });
        }
        if start == halt {
            return Err(ParseError::StartEqualsHalt);
        }
        let n = states.len();
        assert!(start < n && halt < n, "state indices out of range");
        let mut rules = vec![None; n * alphabet as usize];
        for ((q, sym), rule) in table {
            assert!(q < n && sym < alphabet && rule.next < n);
            if q == halt {
                return Err(ParseError::HaltTransition { line: 0 });
            }
            if rule.write >= alphabet {
                return Err(ParseError::SymbolOutOfRange {
                    line: 0,
                    col: 0,
                    sym: rule.write as i64,
                    b: alphabet,
                });
            }
            rules[q * alphabet as usize + sym as usize] = Some(rule);
        }
        for q in 0..n {
            if q == halt {
                continue;
            }
            for sym in 0..alphabet {
                if rules[q * alphabet as usize + sym as usize].is_none() {
                    return Err(ParseError::MissingTransition {
                        state: states[q].clone(),
                        sym,
                    });
                }
            }
        }
        Ok(TMSpec {
            alphabet,
            states,
            start,
            halt,
            rules,
        })
    }

    pub fn alphabet(&self) -> u8 {
        self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_name(&self, q: usize) -> &str {
        &self.states[q]
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn halt(&self) -> usize {
        self.halt
    }

    /// The table entry for a non-halt state; `None` exactly on the halt row.
    pub fn rule(&self, q: usize, sym: u8) -> Option<&Rule> {
        self.rules[q * self.alphabet as usize + sym as usize].as_ref()
    }

    /// All (state, symbol, rule) branches in (state index, symbol) order.
    pub fn branches(&self) -> impl Iterator<Item = (usize, u8, &Rule)> + '_ {
        (0..self.states.len()).flat_map(move |q| {
            (0..self.alphabet).filter_map(move |sym| self.rule(q, sym).map(|r| (q, sym, r)))
        })
    }

    /// Parse the machine file format. Directives (`alphabet:`, `states:`,
    /// `start:`, `halt:`) and transitions may appear in any order; `#`
    /// starts a comment.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut alphabet: Option<(usize, u8)> = None;
        let mut states: Option<(usize, Vec<String>)> = None;
        let mut start_name: Option<(usize, String)> = None;
        let mut halt_name: Option<(usize, String)> = None;
        let mut transitions: Vec<(usize, Vec<(usize, String)>)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            if line.trim().is_empty() {
                continue;
            }
            let trimmed = line.trim_start();
            if let Some(rest) = trimmed.strip_prefix("alphabet:") {
                if alphabet.is_some() {
                    return Err(ParseError::DuplicateDirective {
                        line: line_no,
                        name: "alphabet",
                    });
                }
                let b: i64 = rest.trim().parse().map_err(|_| ParseError::Syntax {
                    line: line_no,
                    col: col_of(line, rest),
                    msg: format!("bad alphabet size `{}`", rest.trim()),
                })?;
                if !(2..=16).contains(&b) {
                    return Err(ParseError::AlphabetOutOfRange { line: line_no, b });
                }
                alphabet = Some((line_no, b as u8));
            } else if let Some(rest) = trimmed.strip_prefix("states:") {
                if states.is_some() {
                    return Err(ParseError::DuplicateDirective {
                        line: line_no,
                        name: "states",
                    });
                }
                let names: Vec<String> = rest
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                if names.is_empty() {
                    return Err(ParseError::Syntax {
                        line: line_no,
                        col: col_of(line, rest),
                        msg: "empty state list".into(),
                    });
                }
                states = Some((line_no, names));
            } else if let Some(rest) = trimmed.strip_prefix("start:") {
                if start_name.is_some() {
                    return Err(ParseError::DuplicateDirective {
                        line: line_no,
                        name: "start",
                    });
                }
                start_name = Some((line_no, rest.trim().to_string()));
            } else if let Some(rest) = trimmed.strip_prefix("halt:") {
                if halt_name.is_some() {
                    return Err(ParseError::DuplicateDirective {
                        line: line_no,
                        name: "halt",
                    });
                }
                halt_name = Some((line_no, rest.trim().to_string()));
            } else {
                transitions.push((line_no, tokenize(line)));
            }
        }

        let (_, b) = alphabet.ok_or(ParseError::MissingDirective { name: "alphabet" })?;
        let (sline, names) = states.ok_or(ParseError::MissingDirective { name: "states" })?;
        let (_, sname) = start_name.ok_or(ParseError::MissingDirective { name: "start" })?;
        let (_, hname) = halt_name.ok_or(ParseError::MissingDirective { name: "halt" })?;

        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, name) in names.iter().enumerate() {
            if index.insert(name, i).is_some() {
                return Err(ParseError::DuplicateState {
                    line: sline,
                    name: name.clone(),
                });
            }
        }
        let lookup = |line: usize, col: usize, name: &str| -> Result<usize, ParseError> {
            index
                .get(name)
                .copied()
                .ok_or_else(|| ParseError::UnknownState {
                    line,
                    col,
                    name: name.to_string(),
                })
        };
        let start = lookup(sline, 1, &sname)?;
        let halt = lookup(sline, 1, &hname)?;
        if start == halt {
            return Err(ParseError::StartEqualsHalt);
        }

        let parse_sym = |line: usize, col: usize, tok: &str| -> Result<u8, ParseError> {
            let v: i64 = tok.parse().map_err(|_| ParseError::Syntax {
                line,
                col,
                msg: format!("expected a symbol, got `{tok}`"),
            })?;
            if v < 0 || v >= b as i64 {
                return Err(ParseError::SymbolOutOfRange {
                    line,
                    col,
                    sym: v,
                    b,
                });
            }
            Ok(v as u8)
        };

        let mut table: BTreeMap<(usize, u8), Rule> = BTreeMap::new();
        for (line_no, toks) in transitions {
            if toks.len() != 6 || toks[2].1 != "->" {
                let (col, tok) = toks
                    .get(2)
                    .map(|(c, t)| (*c, t.clone()))
                    .unwrap_or((1, String::new()));
                return Err(ParseError::Syntax {
                    line: line_no,
                    col,
                    msg: format!(
                        "expected `<state> <symbol> -> <state> <symbol> <R|L|N>`, got `{tok}`"
                    ),
                });
            }
            let q = lookup(line_no, toks[0].0, &toks[0].1)?;
            let sym = parse_sym(line_no, toks[1].0, &toks[1].1)?;
            let next = lookup(line_no, toks[3].0, &toks[3].1)?;
            let write = parse_sym(line_no, toks[4].0, &toks[4].1)?;
            let movement = HeadMove::from_letter(&toks[5].1).ok_or(ParseError::Syntax {
                line: line_no,
                col: toks[5].0,
                msg: format!("expected direction R, L or N, got `{}`", toks[5].1),
            })?;
            if q == halt {
                return Err(ParseError::HaltTransition { line: line_no });
            }
            if table
                .insert(
                    (q, sym),
                    Rule {
                        next,
                        write,
                        movement,
                    },
                )
                .is_some()
            {
                return Err(ParseError::DuplicateTransition {
                    line: line_no,
                    state: names[q].clone(),
                    sym,
                });
            }
        }

        TMSpec::new(b, names, start, halt, table)
    }

    /// Canonical text form: directives first, then transitions sorted by
    /// (state index, symbol). `parse(canonical_text(x)) == x` and the text
    /// is a fixpoint of parse-then-serialize.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("alphabet: {}\n", self.alphabet));
        out.push_str(&format!("states: {}\n", self.states.join(",")));
        out.push_str(&format!("start: {}\n", self.states[self.start]));
        out.push_str(&format!("halt: {}\n", self.states[self.halt]));
        for (q, sym, rule) in self.branches() {
            out.push_str(&format!(
                "{} {} -> {} {} {}\n",
                self.states[q],
                sym,
                self.states[rule.next],
                rule.write,
                rule.movement.letter()
            ));
        }
        out
    }
}

fn col_of(line: &str, rest: &str) -> usize {
    line.len() - rest.len() + 1
}

fn tokenize(line: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, line[s..i].to_string()));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, line[s..].to_string()));
    }
    out
}

/// Bi-infinite tape with finite support. `left[0]` is cell -1, `right[0]`
/// is cell +1; cells beyond the stored lists read as blank.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Tape {
    left: VecDeque<u8>,
    head: u8,
    right: VecDeque<u8>,
}

/// Tape-literal parse failure (the `...010[1]2...` input syntax).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TapeLiteralError {
    #[error("tape literal must contain exactly one bracketed head cell, e.g. `[0]`")]
    BadBrackets,
    #[error("invalid tape symbol `{0}`")]
    BadSymbol(char),
    #[error("tape symbol {sym} >= alphabet size {b}")]
    SymbolOutOfRange { sym: u8, b: u8 },
}

impl Tape {
    pub fn blank() -> Self {
        Tape::default()
    }

    /// Build from explicit cells; `left[0]` is cell -1. Canonicalizes.
    pub fn from_cells(left: Vec<u8>, head: u8, right: Vec<u8>) -> Self {
        let mut t = Tape {
            left: left.into(),
            head,
            right: right.into(),
        };
        t.canonicalize();
        t
    }

    /// Parse a literal like `...000[1]10...`. The bracketed digit is the
    /// head cell; surrounding digits read left to right; `...` (or a
    /// Unicode ellipsis) on either end is decorative.
    pub fn parse_literal(text: &str, alphabet: u8) -> Result<Self, TapeLiteralError> {
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let s = s.trim_start_matches("...").trim_start_matches('\u{2026}');
        let s = s.trim_end_matches("...").trim_end_matches('\u{2026}');
        let open = s.find('[').ok_or(TapeLiteralError::BadBrackets)?;
        let close = s.find(']').ok_or(TapeLiteralError::BadBrackets)?;
        if close != open + 2 || s[close + 1..].contains('[') || s[..open].contains(']') {
            return Err(TapeLiteralError::BadBrackets);
        }
        let digit = |c: char| -> Result<u8, TapeLiteralError> {
            let d = c.to_digit(16).ok_or(TapeLiteralError::BadSymbol(c))? as u8;
            if d >= alphabet {
                return Err(TapeLiteralError::SymbolOutOfRange {
                    sym: d,
                    b: alphabet,
                });
            }
            Ok(d)
        };
        let head = digit(
            s[open + 1..close]
                .chars()
                .next()
                .ok_or(TapeLiteralError::BadBrackets)?,
        )?;
        // cells left of the head appear leftmost-first in the literal
        let mut left = Vec::new();
        for c in s[..open].chars().rev() {
            left.push(digit(c)?);
        }
        let mut right = Vec::new();
        for c in s[close + 1..].chars() {
            right.push(digit(c)?);
        }
        Ok(Tape::from_cells(left, head, right))
    }

    /// Inverse of [`Tape::parse_literal`] on canonical tapes.
    pub fn to_literal(&self) -> String {
        let mut s = String::new();
        for &c in self.left.iter().rev() {
            s.push(char::from_digit(c as u32, 16).unwrap());
        }
        s.push('[');
        s.push(char::from_digit(self.head as u32, 16).unwrap());
        s.push(']');
        for &c in self.right.iter() {
            s.push(char::from_digit(c as u32, 16).unwrap());
        }
        s
    }

    pub fn head(&self) -> u8 {
        self.head
    }

    /// Read any cell; index 0 is the head.
    pub fn cell(&self, i: i64) -> u8 {
        if i == 0 {
            self.head
        } else if i < 0 {
            self.left.get((-i - 1) as usize).copied().unwrap_or(BLANK)
        } else {
            self.right.get((i - 1) as usize).copied().unwrap_or(BLANK)
        }
    }

    /// Cells from the head rightwards: head, +1, +2, ...
    pub fn right_half(&self) -> impl Iterator<Item = u8> + '_ {
        std::iter::once(self.head).chain(self.right.iter().copied())
    }

    /// Cells left of the head, nearest first: -1, -2, ...
    pub fn left_half(&self) -> impl Iterator<Item = u8> + '_ {
        self.left.iter().copied()
    }

    pub fn write(&mut self, sym: u8) {
        self.head = sym;
        self.canonicalize();
    }

    /// Shift the tape by eps: +1 moves every cell index down by one
    /// (head moves right), -1 the opposite.
    pub fn shift(&mut self, eps: i8) {
        match eps {
            1 => {
                self.left.push_front(self.head);
                self.head = self.right.pop_front().unwrap_or(BLANK);
            }
            -1 => {
                self.right.push_front(self.head);
                self.head = self.left.pop_front().unwrap_or(BLANK);
            }
            0 => {}
            _ => panic!("tape shift must be -1, 0 or +1"),
        }
        self.canonicalize();
    }

    fn canonicalize(&mut self) {
        while self.left.back() == Some(&BLANK) {
            self.left.pop_back();
        }
        while self.right.back() == Some(&BLANK) {
            self.right.pop_back();
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.left.back() != Some(&BLANK) && self.right.back() != Some(&BLANK)
    }

    /// Number of stored (possibly blank-interior) cells.
    pub fn support_len(&self) -> usize {
        self.left.len() + 1 + self.right.len()
    }
}

impl fmt::Display for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_literal())
    }
}

/// Machine state plus tape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub state: usize,
    pub tape: Tape,
}

impl Configuration {
    pub fn start(spec: &TMSpec, tape: Tape) -> Self {
        Configuration {
            state: spec.start(),
            tape,
        }
    }
}

/// Result of one successor-map application.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Stepped(Configuration),
    Halted,
}

/// Apply the successor map once: look up delta(q, t0), write, then shift.
pub fn step(spec: &TMSpec, c: &Configuration) -> StepResult {
    if c.state == spec.halt() {
        return StepResult::Halted;
    }
    let rule = spec
        .rule(c.state, c.tape.head())
        .expect("transition table is total off the halt state");
    let mut tape = c.tape.clone();
    tape.write(rule.write);
    tape.shift(rule.movement.tape_shift());
    StepResult::Stepped(Configuration {
        state: rule.next,
        tape,
    })
}

/// Outcome of running up to `max_steps` successor-map applications.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunOutcome {
    Halted { steps: u64, tape: Tape },
    StillRunning { config: Configuration },
}

/// Run the machine; `steps` counts successor applications until the halt
/// state is first entered.
pub fn run(spec: &TMSpec, c0: Configuration, max_steps: u64) -> RunOutcome {
    let mut cur = c0;
    let mut steps = 0u64;
    loop {
        if cur.state == spec.halt() {
            return RunOutcome::Halted {
                steps,
                tape: cur.tape,
            };
        }
        if steps == max_steps {
            return RunOutcome::StillRunning { config: cur };
        }
        match step(spec, &cur) {
            StepResult::Stepped(next) => cur = next,
            StepResult::Halted => unreachable!("halt checked above"),
        }
        steps += 1;
    }
}
