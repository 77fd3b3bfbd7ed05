//! One-tape deterministic Turing machines with boundary-marked tapes.
//!
//! A machine works on `LB · x · RB RB RB …`: a left boundary square, the
//! input, and an infinite run of right boundary symbols of which only the
//! first is stored. The head starts *on* the left boundary. A run halts
//! when no transition is defined for the current (state, symbol) pair and
//! accepts exactly when the halting state is final.
//!
//! The boundary discipline is enforced: the left boundary is never moved
//! off to the left, never overwritten, and never written elsewhere; the
//! right boundary may only be overwritten at the frontier (extending the
//! tape) or re-written at the last tape square (retracting it), and the
//! head may not move past the first right boundary without overwriting it.
//! Violations surface as a distinct run verdict rather than silent
//! misbehaviour.
//!
//! Two analysis hooks live here as well: optional per-square weights that
//! decrement on every head arrival and block exhausted squares (forcing
//! linear-time behaviour), and crossing-sequence recording — for every
//! boundary between adjacent squares, the sequence of states the head
//! carries across it, with alternating directions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::num::NonZeroU64;
use std::sync::Arc;

use thiserror::Error;

/// Errors raised by machine construction, parsing, and simulation setup.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum TmError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("invalid machine: {reason}")]
    InvalidMachine { reason: String },
    #[error("input symbol `{name}` is not in the tape alphabet")]
    UnknownSymbol { name: String },
}

/// A machine state, interned by name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State(Arc<str>);

impl State {
    pub fn new(name: &str) -> State {
        State(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A tape square's content: left boundary, right boundary, or a symbol of
/// the working alphabet.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TmSymbol {
    Lb,
    Rb,
    Sym(Arc<str>),
}

impl TmSymbol {
    /// Parses a symbol token as written in machine files: the reserved
    /// names `LB` and `RB` denote the boundaries.
    pub fn parse_token(token: &str) -> TmSymbol {
        match token {
            "LB" => TmSymbol::Lb,
            "RB" => TmSymbol::Rb,
            name => TmSymbol::Sym(Arc::from(name)),
        }
    }

    pub fn sym(name: &str) -> TmSymbol {
        TmSymbol::Sym(Arc::from(name))
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self, TmSymbol::Lb | TmSymbol::Rb)
    }
}

impl fmt::Display for TmSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TmSymbol::Lb => f.write_str("LB"),
            TmSymbol::Rb => f.write_str("RB"),
            TmSymbol::Sym(name) => f.write_str(name),
        }
    }
}

/// Head movement of a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Move {
    Left,
    Stay,
    Right,
}

impl Move {
    pub fn delta(self) -> i64 {
        match self {
            Move::Left => -1,
            Move::Stay => 0,
            Move::Right => 1,
        }
    }

    pub fn from_delta(d: i64) -> Option<Move> {
        match d {
            -1 => Some(Move::Left),
            0 => Some(Move::Stay),
            1 => Some(Move::Right),
            _ => None,
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.delta())
    }
}

/// One transition: in state `src` reading `input`, write `output`, move,
/// and switch to `dst`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TmTransition {
    pub src: State,
    pub input: TmSymbol,
    pub output: TmSymbol,
    pub movement: Move,
    pub dst: State,
}

impl fmt::Display for TmTransition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} -> {} {} {}",
            self.src, self.input, self.dst, self.output, self.movement
        )
    }
}

/// A deterministic one-tape machine. Statically impossible transitions —
/// writing a boundary where it can never legally go, walking off the left
/// end — are rejected at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TuringMachine {
    states: BTreeSet<State>,
    alphabet: BTreeSet<Arc<str>>,
    start: State,
    finals: BTreeSet<State>,
    transitions: BTreeMap<State, BTreeMap<TmSymbol, TmTransition>>,
}

impl TuringMachine {
    /// Builds and validates a machine. States and working-alphabet symbols
    /// are collected from the transitions; `extra_symbols` adds alphabet
    /// symbols no transition mentions.
    pub fn new<I, S>(
        start: &str,
        finals: I,
        transitions: Vec<TmTransition>,
        extra_symbols: &[&str],
    ) -> Result<TuringMachine, TmError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let start = State::new(start);
        let finals: BTreeSet<State> = finals.into_iter().map(|s| State::new(s.as_ref())).collect();
        let mut states: BTreeSet<State> = finals.iter().cloned().collect();
        states.insert(start.clone());
        let mut alphabet: BTreeSet<Arc<str>> = BTreeSet::new();

        for name in extra_symbols {
            if *name == "LB" || *name == "RB" {
                return Err(TmError::InvalidMachine {
                    reason: "the working alphabet cannot contain a boundary name".to_string(),
                });
            }
            alphabet.insert(Arc::from(*name));
        }

        let mut table: BTreeMap<State, BTreeMap<TmSymbol, TmTransition>> = BTreeMap::new();
        for t in transitions {
            states.insert(t.src.clone());
            states.insert(t.dst.clone());
            for symbol in [&t.input, &t.output] {
                if let TmSymbol::Sym(name) = symbol {
                    if &**name == "LB" || &**name == "RB" {
                        return Err(TmError::InvalidMachine {
                            reason: "the working alphabet cannot contain a boundary name"
                                .to_string(),
                        });
                    }
                    alphabet.insert(name.clone());
                }
            }
            validate_transition(&t)?;
            let row = table.entry(t.src.clone()).or_default();
            if row.insert(t.input.clone(), t.clone()).is_some() {
                return Err(TmError::InvalidMachine {
                    reason: format!("two transitions for ({}, {})", t.src, t.input),
                });
            }
        }

        Ok(TuringMachine { states, alphabet, start, finals, transitions: table })
    }

    pub fn builder(start: &str) -> TmBuilder {
        TmBuilder {
            start: start.to_string(),
            finals: Vec::new(),
            symbols: Vec::new(),
            transitions: Vec::new(),
        }
    }

    pub fn start(&self) -> &State {
        &self.start
    }

    pub fn finals(&self) -> &BTreeSet<State> {
        &self.finals
    }

    pub fn is_final(&self, state: &State) -> bool {
        self.finals.contains(state)
    }

    pub fn states(&self) -> &BTreeSet<State> {
        &self.states
    }

    /// Working-alphabet symbol names, boundaries excluded.
    pub fn alphabet(&self) -> impl Iterator<Item = &str> {
        self.alphabet.iter().map(|s| &**s)
    }

    pub fn alphabet_len(&self) -> usize {
        self.alphabet.len()
    }

    pub fn has_symbol(&self, name: &str) -> bool {
        self.alphabet.contains(name)
    }

    pub fn transition(&self, state: &State, symbol: &TmSymbol) -> Option<&TmTransition> {
        self.transitions.get(state)?.get(symbol)
    }

    /// All transitions in deterministic order (by source state, then input
    /// symbol).
    pub fn transitions(&self) -> impl Iterator<Item = &TmTransition> {
        self.transitions.values().flat_map(|row| row.values())
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.values().map(BTreeMap::len).sum()
    }

    /// Splits an input string into alphabet symbols: whitespace-separated
    /// tokens, or one symbol per character when the string has no
    /// whitespace (the common single-letter-alphabet case). The empty
    /// string is the empty input.
    pub fn parse_input(&self, text: &str) -> Result<Vec<Arc<str>>, TmError> {
        let tokens: Vec<&str> = if text.chars().any(char::is_whitespace) {
            text.split_whitespace().collect()
        } else if text.is_empty() {
            Vec::new()
        } else if self.alphabet.iter().all(|s| s.chars().count() == 1) {
            return text
                .chars()
                .map(|c| {
                    let name = c.to_string();
                    self.alphabet
                        .get(name.as_str())
                        .cloned()
                        .ok_or(TmError::UnknownSymbol { name })
                })
                .collect();
        } else {
            vec![text]
        };
        tokens
            .into_iter()
            .map(|tok| {
                self.alphabet
                    .get(tok)
                    .cloned()
                    .ok_or_else(|| TmError::UnknownSymbol { name: tok.to_string() })
            })
            .collect()
    }

    /// Parses the machine file format: `states:`, `alphabet:`, `start:`,
    /// `final:` headers in any order, then one transition `q A -> r B d`
    /// per line with `d` in `{-1, 0, 1}`. Blank lines and `#` comments are
    /// ignored.
    pub fn parse(text: &str) -> Result<TuringMachine, TmError> {
        let mut states: Option<Vec<String>> = None;
        let mut alphabet: Option<Vec<String>> = None;
        let mut start: Option<String> = None;
        let mut finals: Option<Vec<String>> = None;
        let mut transitions = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("states:") {
                if states.replace(rest.split_whitespace().map(String::from).collect()).is_some() {
                    return Err(TmError::Syntax {
                        line: line_no,
                        reason: "duplicate `states:` header".to_string(),
                    });
                }
            } else if let Some(rest) = line.strip_prefix("alphabet:") {
                if alphabet.replace(rest.split_whitespace().map(String::from).collect()).is_some()
                {
                    return Err(TmError::Syntax {
                        line: line_no,
                        reason: "duplicate `alphabet:` header".to_string(),
                    });
                }
            } else if let Some(rest) = line.strip_prefix("start:") {
                let mut tokens = rest.split_whitespace();
                match (tokens.next(), tokens.next()) {
                    (Some(name), None) => {
                        if start.replace(name.to_string()).is_some() {
                            return Err(TmError::Syntax {
                                line: line_no,
                                reason: "duplicate `start:` header".to_string(),
                            });
                        }
                    }
                    _ => {
                        return Err(TmError::Syntax {
                            line: line_no,
                            reason: "`start:` needs exactly one state".to_string(),
                        })
                    }
                }
            } else if let Some(rest) = line.strip_prefix("final:") {
                if finals.replace(rest.split_whitespace().map(String::from).collect()).is_some() {
                    return Err(TmError::Syntax {
                        line: line_no,
                        reason: "duplicate `final:` header".to_string(),
                    });
                }
            } else {
                let tokens: Vec<&str> = line.split_whitespace().collect();
                if tokens.len() != 6 || tokens[2] != "->" {
                    return Err(TmError::Syntax {
                        line: line_no,
                        reason: "expected `q A -> r B d`".to_string(),
                    });
                }
                let movement = tokens[5]
                    .parse::<i64>()
                    .ok()
                    .and_then(Move::from_delta)
                    .ok_or_else(|| TmError::Syntax {
                        line: line_no,
                        reason: format!("movement must be -1, 0, or 1, found `{}`", tokens[5]),
                    })?;
                transitions.push((
                    line_no,
                    TmTransition {
                        src: State::new(tokens[0]),
                        input: TmSymbol::parse_token(tokens[1]),
                        dst: State::new(tokens[3]),
                        output: TmSymbol::parse_token(tokens[4]),
                        movement,
                    },
                ));
            }
        }

        let states = states.ok_or(TmError::Syntax {
            line: 1,
            reason: "missing `states:` header".to_string(),
        })?;
        let alphabet = alphabet.ok_or(TmError::Syntax {
            line: 1,
            reason: "missing `alphabet:` header".to_string(),
        })?;
        let start = start.ok_or(TmError::Syntax {
            line: 1,
            reason: "missing `start:` header".to_string(),
        })?;
        let finals = finals.ok_or(TmError::Syntax {
            line: 1,
            reason: "missing `final:` header".to_string(),
        })?;

        let declared_states: BTreeSet<&str> = states.iter().map(String::as_str).collect();
        let declared_symbols: BTreeSet<&str> = alphabet.iter().map(String::as_str).collect();
        let check_state = |line: usize, name: &str| -> Result<(), TmError> {
            if declared_states.contains(name) {
                Ok(())
            } else {
                Err(TmError::Syntax {
                    line,
                    reason: format!("state `{name}` is not listed in `states:`"),
                })
            }
        };
        check_state(1, &start)?;
        for name in &finals {
            check_state(1, name)?;
        }
        for (line_no, t) in &transitions {
            check_state(*line_no, t.src.name())?;
            check_state(*line_no, t.dst.name())?;
            for symbol in [&t.input, &t.output] {
                if let TmSymbol::Sym(name) = symbol {
                    if !declared_symbols.contains(&**name) {
                        return Err(TmError::Syntax {
                            line: *line_no,
                            reason: format!("symbol `{name}` is not listed in `alphabet:`"),
                        });
                    }
                }
            }
        }

        let extra: Vec<&str> = alphabet.iter().map(String::as_str).collect();
        let mut tm = TuringMachine::new(
            &start,
            finals.iter().map(String::as_str),
            transitions.into_iter().map(|(_, t)| t).collect(),
            &extra,
        )?;
        for name in states {
            tm.states.insert(State::new(&name));
        }
        Ok(tm)
    }

    /// Canonical machine file text.
    pub fn serialize(&self) -> String {
        use fmt::Write;
        let mut out = String::new();
        out.push_str("states:");
        for s in &self.states {
            let _ = write!(out, " {s}");
        }
        out.push_str("\nalphabet:");
        for a in &self.alphabet {
            let _ = write!(out, " {a}");
        }
        let _ = write!(out, "\nstart: {}", self.start);
        out.push_str("\nfinal:");
        for s in &self.finals {
            let _ = write!(out, " {s}");
        }
        out.push('\n');
        for t in self.transitions() {
            let _ = writeln!(out, "{t}");
        }
        out
    }
}

impl fmt::Display for TuringMachine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

/// Rejects transitions that can never fire legally.
fn validate_transition(t: &TmTransition) -> Result<(), TmError> {
    let fail = |reason: String| Err(TmError::InvalidMachine { reason });
    match (&t.input, &t.output) {
        (TmSymbol::Lb, out) if *out != TmSymbol::Lb => {
            return fail(format!("transition `{t}` must re-write LB on the LB square"));
        }
        (input, TmSymbol::Lb) if *input != TmSymbol::Lb => {
            return fail(format!("transition `{t}` writes LB off the LB square"));
        }
        _ => {}
    }
    if t.input == TmSymbol::Lb && t.movement == Move::Left {
        return fail(format!("transition `{t}` moves off the left end"));
    }
    if t.input == TmSymbol::Rb && t.output == TmSymbol::Rb && t.movement == Move::Right {
        return fail(format!("transition `{t}` moves past the right boundary without writing"));
    }
    Ok(())
}

/// Incremental machine construction for tests and samples.
pub struct TmBuilder {
    start: String,
    finals: Vec<String>,
    symbols: Vec<String>,
    transitions: Vec<TmTransition>,
}

impl TmBuilder {
    /// Marks accepting states.
    pub fn accept<I, S>(mut self, states: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.finals.extend(states.into_iter().map(|s| s.as_ref().to_string()));
        self
    }

    /// Declares working-alphabet symbols beyond those the transitions
    /// mention.
    pub fn symbols<I, S>(mut self, symbols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.symbols.extend(symbols.into_iter().map(|s| s.as_ref().to_string()));
        self
    }

    /// Adds a transition; `LB`/`RB` tokens denote the boundaries and `d`
    /// is the movement in `{-1, 0, 1}`.
    pub fn transition(mut self, src: &str, input: &str, output: &str, d: i64, dst: &str) -> Self {
        self.transitions.push(TmTransition {
            src: State::new(src),
            input: TmSymbol::parse_token(input),
            output: TmSymbol::parse_token(output),
            movement: Move::from_delta(d).expect("movement must be -1, 0, or 1"),
            dst: State::new(dst),
        });
        self
    }

    pub fn build(self) -> Result<TuringMachine, TmError> {
        let extra: Vec<&str> = self.symbols.iter().map(String::as_str).collect();
        TuringMachine::new(
            &self.start,
            self.finals.iter().map(String::as_str),
            self.transitions,
            &extra,
        )
    }
}

/// Direction of one boundary crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CrossDir {
    Forward,
    Backward,
}

impl fmt::Display for CrossDir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CrossDir::Forward => ">",
            CrossDir::Backward => "<",
        })
    }
}

/// Per-boundary crossing sequences: `boundary(b)` lists, in order, the
/// state the head carried across the boundary between squares `b` and
/// `b+1`, with the crossing direction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrossingRecord {
    boundaries: Vec<Vec<(State, CrossDir)>>,
}

impl CrossingRecord {
    fn record(&mut self, boundary: usize, state: State, direction: CrossDir) {
        if self.boundaries.len() <= boundary {
            self.boundaries.resize_with(boundary + 1, Vec::new);
        }
        self.boundaries[boundary].push((state, direction));
    }

    /// Observes one head move; `to` must be adjacent to `from`.
    fn on_move(&mut self, from: usize, to: usize, state_after: &State) {
        if to == from + 1 {
            self.record(from, state_after.clone(), CrossDir::Forward);
        } else if from == to + 1 {
            self.record(to, state_after.clone(), CrossDir::Backward);
        }
    }

    /// The crossing sequence at the boundary between squares `b` and
    /// `b+1`; boundaries never crossed report the empty sequence.
    pub fn boundary(&self, b: usize) -> &[(State, CrossDir)] {
        self.boundaries.get(b).map_or(&[], Vec::as_slice)
    }

    /// Number of boundaries with at least one recorded crossing at or
    /// before them.
    pub fn tracked_boundaries(&self) -> usize {
        self.boundaries.len()
    }

    /// Length of the longest crossing sequence.
    pub fn max_sequence_len(&self) -> usize {
        self.boundaries.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Checks the alternation discipline: at every boundary, the first
    /// crossing is forward and directions strictly alternate.
    pub fn alternation_ok(&self) -> bool {
        self.boundaries.iter().all(|seq| {
            seq.iter().enumerate().all(|(i, (_, dir))| {
                let expected = if i % 2 == 0 { CrossDir::Forward } else { CrossDir::Backward };
                *dir == expected
            })
        })
    }
}

/// One snapshot of a run: state, head square, and stored tape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TmConfiguration {
    pub state: State,
    pub head: usize,
    pub tape: Vec<TmSymbol>,
}

/// Reconstructs crossing sequences from a configuration trace.
pub fn record_crossings(trace: &[TmConfiguration]) -> CrossingRecord {
    let mut record = CrossingRecord::default();
    for pair in trace.windows(2) {
        record.on_move(pair[0].head, pair[1].head, &pair[1].state);
    }
    record
}

/// Why a run violated the boundary or weight discipline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// Wrote RB while tape symbols sat to the right of the head.
    WroteRbMidTape { square: usize },
    /// Moved right off a square still holding RB.
    MovedBeyondRb { square: usize },
    /// Moved left off the LB square.
    MovedLeftOfLb,
    /// Arrived at a square whose weight was already zero.
    WeightExhausted { square: usize },
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::WroteRbMidTape { square } => {
                write!(f, "wrote RB between tape symbols at square {square}")
            }
            ViolationKind::MovedBeyondRb { square } => {
                write!(f, "moved past the right boundary at square {square}")
            }
            ViolationKind::MovedLeftOfLb => f.write_str("moved off the left end"),
            ViolationKind::WeightExhausted { square } => {
                write!(f, "arrived at exhausted square {square}")
            }
        }
    }
}

/// Outcome of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TmVerdict {
    Accepted,
    Rejected,
    StepLimit,
    ContractViolation(ViolationKind),
}

impl TmVerdict {
    pub fn is_halting(&self) -> bool {
        matches!(self, TmVerdict::Accepted | TmVerdict::Rejected)
    }

    pub fn label(&self) -> &'static str {
        match self {
            TmVerdict::Accepted => "accepted",
            TmVerdict::Rejected => "rejected",
            TmVerdict::StepLimit => "step-limit",
            TmVerdict::ContractViolation(_) => "contract-violation",
        }
    }
}

/// Switches for [`simulate`].
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Transition budget; exceeding it yields [`TmVerdict::StepLimit`].
    pub max_steps: u64,
    /// Per-square weight; `None` disables weight accounting.
    pub weight: Option<NonZeroU64>,
    /// Record the full configuration trace.
    pub record_trace: bool,
}

impl Default for SimOptions {
    fn default() -> SimOptions {
        SimOptions { max_steps: 100_000, weight: None, record_trace: false }
    }
}

impl SimOptions {
    pub fn with_max_steps(max_steps: u64) -> SimOptions {
        SimOptions { max_steps, ..SimOptions::default() }
    }
}

/// Result of a run. `final_tape` is the working part of the tape —
/// boundaries stripped — at halt or interruption.
#[derive(Debug, Clone)]
pub struct TmRunResult {
    pub verdict: TmVerdict,
    pub final_tape: Vec<Arc<str>>,
    pub steps: u64,
    /// The state the machine halted in, when it halted.
    pub halting_state: Option<State>,
    pub trace: Option<Vec<TmConfiguration>>,
    pub crossings: CrossingRecord,
}

impl TmRunResult {
    /// The working tape as one string: symbols joined without separator.
    pub fn tape_string(&self) -> String {
        self.final_tape.iter().map(|s| &**s).collect()
    }
}

fn working_tape(tape: &[TmSymbol]) -> Vec<Arc<str>> {
    tape.iter()
        .filter_map(|s| match s {
            TmSymbol::Sym(name) => Some(name.clone()),
            _ => None,
        })
        .collect()
}

/// Runs `tm` on `input`, which must consist of working-alphabet symbols.
pub fn simulate(
    tm: &TuringMachine,
    input: &[Arc<str>],
    options: &SimOptions,
) -> Result<TmRunResult, TmError> {
    let mut tape: Vec<TmSymbol> = Vec::with_capacity(input.len() + 2);
    tape.push(TmSymbol::Lb);
    for name in input {
        if !tm.alphabet.contains(name) {
            return Err(TmError::UnknownSymbol { name: name.to_string() });
        }
        tape.push(TmSymbol::Sym(name.clone()));
    }
    tape.push(TmSymbol::Rb);

    let mut state = tm.start.clone();
    let mut head = 0usize;
    let mut steps = 0u64;
    let mut crossings = CrossingRecord::default();
    let mut trace = options
        .record_trace
        .then(|| vec![TmConfiguration { state: state.clone(), head, tape: tape.clone() }]);
    // Per-square weights, materialized lazily as the tape grows. The
    // initial placement on square 0 counts as an arrival.
    let mut weights = options.weight.map(|w| (w.get(), vec![w.get(); tape.len()]));
    if let Some((_, ws)) = weights.as_mut() {
        ws[0] -= 1;
    }

    let finish = |verdict: TmVerdict,
                  steps: u64,
                  tape: &[TmSymbol],
                  halting_state: Option<State>,
                  trace: Option<Vec<TmConfiguration>>,
                  crossings: CrossingRecord| {
        Ok(TmRunResult {
            verdict,
            final_tape: working_tape(tape),
            steps,
            halting_state,
            trace,
            crossings,
        })
    };

    loop {
        let Some(t) = tm.transition(&state, &tape[head]) else {
            let verdict =
                if tm.is_final(&state) { TmVerdict::Accepted } else { TmVerdict::Rejected };
            return finish(verdict, steps, &tape, Some(state), trace, crossings);
        };
        if steps >= options.max_steps {
            return finish(TmVerdict::StepLimit, steps, &tape, None, trace, crossings);
        }
        let (output, movement, dst) = (t.output.clone(), t.movement, t.dst.clone());

        // Write phase. Overwriting the stored right boundary extends the
        // tape; writing RB is only legal at the last working square, where
        // it retracts the tape by one.
        match (&tape[head], &output) {
            (TmSymbol::Rb, TmSymbol::Rb) => {}
            (TmSymbol::Rb, _) => {
                tape[head] = output;
                tape.push(TmSymbol::Rb);
                if let Some((w, ws)) = weights.as_mut() {
                    ws.push(*w);
                }
            }
            (_, TmSymbol::Rb) => {
                if head + 2 != tape.len() {
                    return finish(
                        TmVerdict::ContractViolation(ViolationKind::WroteRbMidTape {
                            square: head,
                        }),
                        steps,
                        &tape,
                        None,
                        trace,
                        crossings,
                    );
                }
                tape[head] = TmSymbol::Rb;
                tape.pop();
                if let Some((_, ws)) = weights.as_mut() {
                    ws.pop();
                }
            }
            _ => tape[head] = output,
        }

        // Move phase. Moving right off a square that still holds RB means
        // walking past the first right boundary.
        let next_head = match movement {
            Move::Left => {
                let Some(h) = head.checked_sub(1) else {
                    return finish(
                        TmVerdict::ContractViolation(ViolationKind::MovedLeftOfLb),
                        steps,
                        &tape,
                        None,
                        trace,
                        crossings,
                    );
                };
                h
            }
            Move::Stay => head,
            Move::Right => {
                if tape[head] == TmSymbol::Rb {
                    return finish(
                        TmVerdict::ContractViolation(ViolationKind::MovedBeyondRb {
                            square: head,
                        }),
                        steps,
                        &tape,
                        None,
                        trace,
                        crossings,
                    );
                }
                head + 1
            }
        };

        // Every completed step is an arrival at its destination square.
        if let Some((_, ws)) = weights.as_mut() {
            if ws[next_head] == 0 {
                return finish(
                    TmVerdict::ContractViolation(ViolationKind::WeightExhausted {
                        square: next_head,
                    }),
                    steps,
                    &tape,
                    None,
                    trace,
                    crossings,
                );
            }
            ws[next_head] -= 1;
        }

        crossings.on_move(head, next_head, &dst);
        head = next_head;
        state = dst;
        steps += 1;
        if let Some(trace) = trace.as_mut() {
            trace.push(TmConfiguration { state: state.clone(), head, tape: tape.clone() });
        }
    }
}

/// One row of an empirical crossing-sequence survey.
#[derive(Debug, Clone)]
pub struct CrossingBoundRow {
    pub input: String,
    pub max_k: usize,
    pub verdict: TmVerdict,
}

/// Empirical survey of crossing-sequence lengths over a set of inputs.
/// The maximum is a lower bound witness, not a proof of boundedness.
#[derive(Debug, Clone)]
pub struct CrossingBoundReport {
    pub rows: Vec<CrossingBoundRow>,
    pub global_max: usize,
    pub all_halted: bool,
}

impl CrossingBoundReport {
    pub fn render_text(&self) -> String {
        use fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "{:<20} {:>6}  verdict", "input", "max-k");
        for row in &self.rows {
            let shown = if row.input.is_empty() { "(empty)" } else { &row.input };
            let _ = writeln!(out, "{:<20} {:>6}  {}", shown, row.max_k, row.verdict.label());
        }
        let _ = writeln!(
            out,
            "global max crossing-sequence length: {} (EMPIRICAL{})",
            self.global_max,
            if self.all_halted { "" } else { "; some runs did not halt" }
        );
        out
    }
}

/// Measures the longest crossing sequence over the given inputs.
pub fn max_crossing_bound(
    tm: &TuringMachine,
    inputs: &[Vec<Arc<str>>],
    max_steps: u64,
) -> Result<CrossingBoundReport, TmError> {
    let mut rows = Vec::with_capacity(inputs.len());
    let mut global_max = 0;
    let mut all_halted = true;
    for input in inputs {
        let result = simulate(tm, input, &SimOptions::with_max_steps(max_steps))?;
        let max_k = result.crossings.max_sequence_len();
        global_max = global_max.max(max_k);
        all_halted &= result.verdict.is_halting();
        rows.push(CrossingBoundRow {
            input: input.iter().map(|s| &**s).collect::<Vec<_>>().join(""),
            max_k,
            verdict: result.verdict,
        });
    }
    Ok(CrossingBoundReport { rows, global_max, all_halted })
}

/// Enumerates every input over the machine's alphabet up to `max_len`, in
/// length order then lexicographic symbol order.
pub fn enumerate_inputs(tm: &TuringMachine, max_len: usize) -> Vec<Vec<Arc<str>>> {
    let symbols: Vec<Arc<str>> = tm.alphabet.iter().cloned().collect();
    let mut out: Vec<Vec<Arc<str>>> = vec![Vec::new()];
    let mut layer: Vec<Vec<Arc<str>>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * symbols.len());
        for prefix in &layer {
            for s in &symbols {
                let mut word = prefix.clone();
                word.push(s.clone());
                next.push(word);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
        if layer.is_empty() {
            break; // empty alphabet: only the empty input exists
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn right_sweeper(finals: &[&str]) -> TuringMachine {
        TuringMachine::builder("q0")
            .accept(finals.iter().copied())
            .symbols(["A", "B"])
            .transition("q0", "LB", "LB", 1, "q1")
            .transition("q1", "A", "B", 1, "q1")
            .build()
            .unwrap()
    }

    fn input(tm: &TuringMachine, text: &str) -> Vec<Arc<str>> {
        tm.parse_input(text).unwrap()
    }

    #[test]
    fn sweeper_accepts_and_rewrites() {
        let tm = right_sweeper(&["q1"]);
        let run = simulate(&tm, &input(&tm, "AA"), &SimOptions::default()).unwrap();
        assert_eq!(run.verdict, TmVerdict::Accepted);
        assert_eq!(run.tape_string(), "BB");
        assert_eq!(run.steps, 3);
        assert_eq!(run.halting_state, Some(State::new("q1")));
    }

    #[test]
    fn verdict_depends_on_final_states() {
        let tm = right_sweeper(&[]);
        let run = simulate(&tm, &input(&tm, "AA"), &SimOptions::default()).unwrap();
        assert_eq!(run.verdict, TmVerdict::Rejected);
        assert_eq!(run.tape_string(), "BB");
    }

    #[test]
    fn self_loop_hits_step_limit() {
        let tm = TuringMachine::builder("q0")
            .transition("q0", "LB", "LB", 0, "q0")
            .build()
            .unwrap();
        let run = simulate(&tm, &[], &SimOptions::with_max_steps(10)).unwrap();
        assert_eq!(run.verdict, TmVerdict::StepLimit);
        assert_eq!(run.steps, 10);
        assert_eq!(run.halting_state, None);
    }

    #[test]
    fn empty_input_runs_on_boundaries_only() {
        let tm = right_sweeper(&["q1"]);
        let run = simulate(&tm, &[], &SimOptions::default()).unwrap();
        // LB step, then q1 reads RB with no transition.
        assert_eq!(run.verdict, TmVerdict::Accepted);
        assert_eq!(run.steps, 1);
        assert_eq!(run.tape_string(), "");
    }

    #[test]
    fn unknown_input_symbol_is_rejected_up_front() {
        let tm = right_sweeper(&["q1"]);
        assert_eq!(
            tm.parse_input("AC"),
            Err(TmError::UnknownSymbol { name: "C".to_string() })
        );
        assert!(matches!(
            simulate(&tm, &[Arc::from("C")], &SimOptions::default()),
            Err(TmError::UnknownSymbol { name }) if name == "C"
        ));
    }

    #[test]
    fn static_contract_rejects_impossible_transitions() {
        // Writing something else on LB.
        assert!(TuringMachine::builder("q0")
            .transition("q0", "LB", "A", 1, "q0")
            .build()
            .is_err());
        // Writing LB elsewhere.
        assert!(TuringMachine::builder("q0")
            .transition("q0", "A", "LB", 1, "q0")
            .build()
            .is_err());
        // Moving left from LB.
        assert!(TuringMachine::builder("q0")
            .transition("q0", "LB", "LB", -1, "q0")
            .build()
            .is_err());
        // Moving right off RB without writing.
        assert!(TuringMachine::builder("q0")
            .transition("q0", "RB", "RB", 1, "q0")
            .build()
            .is_err());
        // Nondeterminism.
        assert!(TuringMachine::builder("q0")
            .transition("q0", "A", "A", 1, "q0")
            .transition("q0", "A", "A", -1, "q0")
            .build()
            .is_err());
    }

    #[test]
    fn extension_grows_the_tape() {
        // Overwrite the first RB with A, then halt on the fresh RB.
        let tm = TuringMachine::builder("q0")
            .accept(["q2"])
            .transition("q0", "LB", "LB", 1, "q1")
            .transition("q1", "RB", "A", 0, "q2")
            .build()
            .unwrap();
        let run = simulate(&tm, &[], &SimOptions::default()).unwrap();
        // q2 reads A: no transition, halts with the tape extended.
        assert_eq!(run.verdict, TmVerdict::Accepted);
        assert_eq!(run.tape_string(), "A");
        assert_eq!(run.steps, 2);
    }

    #[test]
    fn retraction_shrinks_the_tape() {
        let tm = TuringMachine::builder("q0")
            .accept(["q2"])
            .transition("q0", "LB", "LB", 1, "q1")
            .transition("q1", "A", "A", 1, "q1")
            .transition("q1", "RB", "RB", -1, "q2")
            .transition("q2", "A", "RB", -1, "q3")
            .build()
            .unwrap();
        let run = simulate(&tm, &input(&tm, "AA"), &SimOptions::default()).unwrap();
        assert_eq!(run.tape_string(), "A", "the last A was retracted");
        assert_eq!(run.verdict, TmVerdict::Rejected, "halts in q3 which is not final");
    }

    #[test]
    fn writing_rb_mid_tape_is_a_violation() {
        let tm = TuringMachine::builder("q0")
            .transition("q0", "LB", "LB", 1, "q1")
            .transition("q1", "A", "RB", -1, "q2")
            .build()
            .unwrap();
        let run = simulate(&tm, &input(&tm, "AA"), &SimOptions::default()).unwrap();
        assert_eq!(
            run.verdict,
            TmVerdict::ContractViolation(ViolationKind::WroteRbMidTape { square: 1 })
        );
    }

    #[test]
    fn moving_right_after_retracting_is_a_violation() {
        let tm = TuringMachine::builder("q0")
            .transition("q0", "LB", "LB", 1, "q1")
            .transition("q1", "A", "RB", 1, "q1")
            .build()
            .unwrap();
        let run = simulate(&tm, &input(&tm, "A"), &SimOptions::default()).unwrap();
        assert_eq!(
            run.verdict,
            TmVerdict::ContractViolation(ViolationKind::MovedBeyondRb { square: 1 })
        );
    }

    #[test]
    fn crossing_sequences_of_the_sweeper_have_length_one() {
        let tm = right_sweeper(&["q1"]);
        let run = simulate(&tm, &input(&tm, "AA"), &SimOptions::default()).unwrap();
        for b in 0..run.crossings.tracked_boundaries() {
            assert_eq!(run.crossings.boundary(b).len(), 1, "boundary {b}");
            assert_eq!(run.crossings.boundary(b)[0].1, CrossDir::Forward);
        }
        assert_eq!(run.crossings.max_sequence_len(), 1);
        assert!(run.crossings.alternation_ok());
    }

    #[test]
    fn stay_moves_record_no_crossings() {
        let tm = TuringMachine::builder("q0")
            .transition("q0", "LB", "LB", 0, "q1")
            .transition("q1", "LB", "LB", 0, "q2")
            .build()
            .unwrap();
        let run = simulate(&tm, &[], &SimOptions::default()).unwrap();
        assert_eq!(run.crossings.max_sequence_len(), 0);
        assert_eq!(run.steps, 2);
    }

    #[test]
    fn crossings_match_a_hand_traced_zigzag() {
        // Head path over squares: 0 1 2 3 4, back to 1, forward again to 5;
        // states q1..q11 name the arrival order. The boundary between
        // squares 2 and 3 is crossed three times: forward in q3, backward
        // in q6, forward in q9.
        let tape: Vec<TmSymbol> = vec![
            TmSymbol::Lb,
            TmSymbol::sym("W"),
            TmSymbol::sym("O"),
            TmSymbol::sym("R"),
            TmSymbol::sym("D"),
            TmSymbol::sym("I"),
            TmSymbol::Rb,
        ];
        let heads = [0usize, 1, 2, 3, 4, 3, 2, 1, 2, 3, 4, 5];
        let trace: Vec<TmConfiguration> = heads
            .iter()
            .enumerate()
            .map(|(i, &head)| TmConfiguration {
                state: State::new(&format!("q{i}")),
                head,
                tape: tape.clone(),
            })
            .collect();
        let crossings = record_crossings(&trace);
        let boundary: Vec<(String, CrossDir)> = crossings
            .boundary(2)
            .iter()
            .map(|(s, d)| (s.name().to_string(), *d))
            .collect();
        assert_eq!(
            boundary,
            vec![
                ("q3".to_string(), CrossDir::Forward),
                ("q6".to_string(), CrossDir::Backward),
                ("q9".to_string(), CrossDir::Forward),
            ]
        );
        assert!(crossings.alternation_ok());
    }

    #[test]
    fn recorded_crossings_match_trace_reconstruction() {
        let tm = right_sweeper(&["q1"]);
        let run = simulate(
            &tm,
            &input(&tm, "AAB"),
            &SimOptions { record_trace: true, ..SimOptions::default() },
        )
        .unwrap();
        let reconstructed = record_crossings(run.trace.as_ref().unwrap());
        assert_eq!(run.crossings, reconstructed);
    }

    #[test]
    fn weight_one_allows_single_sweep() {
        let tm = right_sweeper(&["q1"]);
        let weight = 1u64;
        let options = SimOptions { weight: NonZeroU64::new(weight), ..SimOptions::default() };
        let run = simulate(&tm, &input(&tm, "AAA"), &options).unwrap();
        assert_eq!(run.verdict, TmVerdict::Accepted);
        let bound = weight * (run.final_tape.len() as u64 + 2);
        assert!(run.steps <= bound, "steps {} exceed weight bound {bound}", run.steps);
    }

    #[test]
    fn weight_exhaustion_blocks_revisits() {
        // Bounce off RB and revisit the last square: the second arrival
        // violates weight 1.
        let tm = TuringMachine::builder("q0")
            .transition("q0", "LB", "LB", 1, "q1")
            .transition("q1", "A", "A", 1, "q1")
            .transition("q1", "RB", "RB", -1, "q2")
            .build()
            .unwrap();
        let options = SimOptions { weight: NonZeroU64::new(1), ..SimOptions::default() };
        let run = simulate(&tm, &input(&tm, "AA"), &options).unwrap();
        assert_eq!(
            run.verdict,
            TmVerdict::ContractViolation(ViolationKind::WeightExhausted { square: 2 })
        );
    }

    #[test]
    fn max_crossing_bound_surveys_inputs() {
        let tm = right_sweeper(&["q1"]);
        let inputs = enumerate_inputs(&tm, 3);
        assert_eq!(inputs.len(), 1 + 2 + 4 + 8);
        let report = max_crossing_bound(&tm, &inputs, 10_000).unwrap();
        assert_eq!(report.global_max, 1);
        assert!(report.all_halted);
        let empty = max_crossing_bound(&tm, &[], 10_000).unwrap();
        assert_eq!(empty.global_max, 0);
        assert!(empty.rows.is_empty());
    }

    #[test]
    fn file_format_round_trips() {
        let text = "\
# sweep right, rewriting A to B
states: q0 q1
alphabet: A B
start: q0
final: q1
q0 LB -> q1 LB 1
q1 A -> q1 B 1
";
        let tm = TuringMachine::parse(text).unwrap();
        assert_eq!(tm.transition_count(), 2);
        assert_eq!(tm.alphabet_len(), 2);
        let again = TuringMachine::parse(&tm.serialize()).unwrap();
        assert_eq!(tm, again);
    }

    #[test]
    fn file_format_reports_errors_with_lines() {
        assert!(matches!(
            TuringMachine::parse("states: q0\nalphabet: A\nstart: q0\nfinal:\nq0 A -> q1 A 1\n"),
            Err(TmError::Syntax { line: 5, .. })
        ));
        assert!(matches!(
            TuringMachine::parse("states: q0\nalphabet: A\nstart: q0\nfinal:\nq0 A q0 A 1\n"),
            Err(TmError::Syntax { line: 5, .. })
        ));
        assert!(matches!(
            TuringMachine::parse("states: q0\nalphabet: A\nstart: q0\nfinal:\nq0 A -> q0 A 2\n"),
            Err(TmError::Syntax { line: 5, .. })
        ));
        assert!(matches!(
            TuringMachine::parse("alphabet: A\nstart: q0\nfinal:\n"),
            Err(TmError::Syntax { .. })
        ));
    }
}
