//! Finite-stateness analysis of machines.
//!
//! A machine whose head crosses each tape boundary only a bounded number
//! of times recognizes a regular language, and a finite automaton for it
//! can be read off the machine's *crossing sequences* — the states in
//! which the head crosses each boundary, which strictly alternate in
//! direction. This module extracts that automaton, checks it against the
//! machine empirically, and provides two complementary empirical probes:
//! runtime growth curves and per-square visit budgets (weights).
//!
//! # Extraction model
//!
//! The automaton's states are pairs of a candidate crossing sequence (of
//! length at most `k`) and a *halt mark* recording whether the halt of
//! the run has already been seen to the left, and whether it accepted.
//! Reading the input left to right, the automaton guesses the crossing
//! sequence at each boundary and verifies the guesses by *replaying* each
//! square locally: given the sequences on its two sides, the visits to a
//! square are completely forced, so the replay either works out
//! (optionally observing the machine halt or diverge on this square) or
//! proves the guess impossible. The square left of the input holds the
//! left boundary symbol and starts the run; everything right of the input
//! is replayed as one concrete region, since the machine may grow the
//! tape there.
//!
//! Local replays cannot see where the frontier is globally, so a machine
//! that breaks the tape discipline at runtime (writing the right boundary
//! mid-tape) is outside the model. Machines built by this crate's
//! generator and samples respect the discipline on every input.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::num::NonZeroU64;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::compile::{compile, run_compiled, CompileError};
use crate::engine::{Bounds, DeriveOptions};
use crate::tm::{
    enumerate_inputs, simulate, Move, SimOptions, State, TmError, TmSymbol, TmVerdict,
    TuringMachine,
};

/// Budget for one whole right-region replay (all visits together). The
/// region is simulated concretely, so a machine that dawdles past this
/// budget makes extraction fail honestly instead of guessing.
const REGION_REPLAY_BUDGET: u64 = 4_096;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("extraction needs {needed} candidate sequences, over the capacity of {capacity}")]
    CapacityExceeded { needed: u64, capacity: u64 },
    #[error("right-region replay of sequence [{sequence}] exceeded its budget")]
    ReplayBudget { sequence: String },
    #[error("a run was interrupted before halting: {detail}")]
    Interrupted { detail: String },
    #[error("{reason}")]
    Unsupported { reason: String },
    #[error(transparent)]
    Tm(#[from] TmError),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

// ---------------------------------------------------------------------
// Local square replays
// ---------------------------------------------------------------------

/// Outcome of replaying one square against guessed crossing sequences.
/// `halted: Some(accepting)` means the machine's run ends on this square
/// (by halting or by an illegal move, which ends the run non-accepting);
/// `None` covers both "the head moves on" and "the head loops here
/// forever" — neither contributes an accepting halt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReplayEnd {
    Consistent { halted: Option<bool> },
    Inconsistent,
}

enum Phase {
    Start,
    Active(State),
    DormantLeft,
    DormantRight,
}

/// Replays one square. `left` is the crossing sequence on its left
/// boundary (even positions arrive, odd positions depart), `right` the
/// one on its right boundary (even positions depart, odd positions
/// arrive); both list the state *after* each crossing. When
/// `starts_active` is set the head materializes on this square in that
/// state before any crossing — the start square — and `left` must be
/// empty.
fn replay_square(
    tm: &TuringMachine,
    start_symbol: TmSymbol,
    starts_active: Option<&State>,
    left: &[State],
    right: &[State],
) -> ReplayEnd {
    let mut symbol = start_symbol;
    let mut i = 0usize; // cursor into `left`
    let mut j = 0usize; // cursor into `right`
    // (state, symbol) pairs seen while staying put since the last arrival;
    // a repeat means the head loops on this square forever.
    let mut stay_guard: BTreeSet<(State, TmSymbol)> = BTreeSet::new();
    let mut phase = match starts_active {
        Some(q) => Phase::Active(q.clone()),
        None => Phase::Start,
    };

    loop {
        phase = match phase {
            Phase::Start => {
                if left.is_empty() {
                    // Never visited: nothing may cross the right boundary
                    // either.
                    return if right.is_empty() {
                        ReplayEnd::Consistent { halted: None }
                    } else {
                        ReplayEnd::Inconsistent
                    };
                }
                let q = left[0].clone();
                i = 1;
                Phase::Active(q)
            }
            Phase::Active(q) => {
                if !stay_guard.insert((q.clone(), symbol.clone())) {
                    // The head stays here forever: consistent only if the
                    // guessed sequences claim no further crossings.
                    return if i == left.len() && j == right.len() {
                        ReplayEnd::Consistent { halted: None }
                    } else {
                        ReplayEnd::Inconsistent
                    };
                }
                let Some(t) = tm.transition(&q, &symbol) else {
                    // The machine halts on this square.
                    return if i == left.len() && j == right.len() {
                        ReplayEnd::Consistent { halted: Some(tm.is_final(&q)) }
                    } else {
                        ReplayEnd::Inconsistent
                    };
                };
                if t.output == TmSymbol::Rb && t.movement == Move::Right {
                    // Moving right off a square just rewritten to RB walks
                    // past the boundary: the run ends, not accepting.
                    return if i == left.len() && j == right.len() {
                        ReplayEnd::Consistent { halted: Some(false) }
                    } else {
                        ReplayEnd::Inconsistent
                    };
                }
                symbol = t.output.clone();
                match t.movement {
                    Move::Stay => Phase::Active(t.dst.clone()),
                    Move::Right => {
                        if j >= right.len() || right[j] != t.dst {
                            return ReplayEnd::Inconsistent;
                        }
                        j += 1;
                        Phase::DormantRight
                    }
                    Move::Left => {
                        if i >= left.len() || left[i] != t.dst {
                            return ReplayEnd::Inconsistent;
                        }
                        i += 1;
                        Phase::DormantLeft
                    }
                }
            }
            // While the head is on one side of this square it cannot
            // cross the opposite boundary, so the next event is forced.
            Phase::DormantRight => {
                if j < right.len() {
                    let q = right[j].clone();
                    j += 1;
                    stay_guard.clear();
                    Phase::Active(q)
                } else if i < left.len() {
                    return ReplayEnd::Inconsistent;
                } else {
                    return ReplayEnd::Consistent { halted: None };
                }
            }
            Phase::DormantLeft => {
                if i < left.len() {
                    let q = left[i].clone();
                    i += 1;
                    stay_guard.clear();
                    Phase::Active(q)
                } else if j < right.len() {
                    return ReplayEnd::Inconsistent;
                } else {
                    return ReplayEnd::Consistent { halted: None };
                }
            }
        };
    }
}

fn replay_lb_start(tm: &TuringMachine, right: &[State]) -> ReplayEnd {
    replay_square(tm, TmSymbol::Lb, Some(tm.start()), &[], right)
}

fn replay_interior(
    tm: &TuringMachine,
    symbol: &TmSymbol,
    left: &[State],
    right: &[State],
) -> ReplayEnd {
    replay_square(tm, symbol.clone(), None, left, right)
}

/// Outcome of replaying the right region — the concrete tape suffix from
/// the stored right boundary outward, which may grow and shrink.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RegionEnd {
    Consistent { halted: Option<bool> },
    Inconsistent,
    Overrun,
}

/// Replays the right region against the crossing sequence on its left
/// boundary (even positions arrive, odd positions depart). The region's
/// content persists across visits: it is exactly `[RB]` whenever the head
/// is away with the frontier retracted, which is also what a re-extension
/// recreates.
fn replay_region(tm: &TuringMachine, left: &[State], budget: u64) -> RegionEnd {
    let mut segment: Vec<TmSymbol> = vec![TmSymbol::Rb];
    let mut i = 0usize;
    let mut steps = 0u64;
    let mut seen: BTreeSet<String> = BTreeSet::new();

    while i < left.len() {
        let mut state = left[i].clone();
        i += 1;
        let mut head = 0usize;
        seen.clear();
        // One visit: simulate until departure, halt, or divergence.
        loop {
            if steps >= budget {
                return RegionEnd::Overrun;
            }
            let key = {
                let tape: Vec<String> = segment.iter().map(ToString::to_string).collect();
                format!("{state}@{head}:{}", tape.join(","))
            };
            if !seen.insert(key) {
                // Exact configuration repeat: the head loops in here.
                return if i == left.len() {
                    RegionEnd::Consistent { halted: None }
                } else {
                    RegionEnd::Inconsistent
                };
            }
            let Some(t) = tm.transition(&state, &segment[head]).cloned() else {
                let halted = Some(tm.is_final(&state));
                return if i == left.len() {
                    RegionEnd::Consistent { halted }
                } else {
                    RegionEnd::Inconsistent
                };
            };
            steps += 1;
            // Write phase, mirroring the simulator's tape discipline.
            match (&segment[head], &t.output) {
                (TmSymbol::Rb, TmSymbol::Rb) => {}
                (TmSymbol::Rb, out) => {
                    segment[head] = out.clone();
                    segment.push(TmSymbol::Rb);
                }
                (_, TmSymbol::Rb) => {
                    if head + 2 == segment.len() {
                        segment.truncate(head + 1);
                        segment[head] = TmSymbol::Rb;
                    } else {
                        // Wrote RB mid-tape: the run ends, not accepting.
                        let halted = Some(false);
                        return if i == left.len() {
                            RegionEnd::Consistent { halted }
                        } else {
                            RegionEnd::Inconsistent
                        };
                    }
                }
                (_, out) => segment[head] = out.clone(),
            }
            match t.movement {
                Move::Stay => state = t.dst.clone(),
                Move::Right => {
                    if segment[head] == TmSymbol::Rb {
                        // Moving past the stored RB ends the run.
                        let halted = Some(false);
                        return if i == left.len() {
                            RegionEnd::Consistent { halted }
                        } else {
                            RegionEnd::Inconsistent
                        };
                    }
                    head += 1;
                    state = t.dst.clone();
                }
                Move::Left => {
                    if head == 0 {
                        // Departure out of the region.
                        if i >= left.len() || left[i] != t.dst {
                            return RegionEnd::Inconsistent;
                        }
                        i += 1;
                        break;
                    }
                    head -= 1;
                    state = t.dst.clone();
                }
            }
        }
    }
    RegionEnd::Consistent { halted: None }
}

// ---------------------------------------------------------------------
// The extracted automaton
// ---------------------------------------------------------------------

/// Has the run's halt been observed yet, and did it accept? At most one
/// square of a run can halt, so marks never combine twice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HaltMark {
    NoHalt,
    HaltedNonFinal,
    HaltedFinal,
}

fn combine(mark: HaltMark, halted: Option<bool>) -> Option<HaltMark> {
    match (mark, halted) {
        (m, None) => Some(m),
        (HaltMark::NoHalt, Some(true)) => Some(HaltMark::HaltedFinal),
        (HaltMark::NoHalt, Some(false)) => Some(HaltMark::HaltedNonFinal),
        _ => None,
    }
}

/// One automaton state: the crossing sequence guessed for the current
/// boundary plus the halt mark accumulated to its left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NfaState {
    pub sequence: Vec<State>,
    pub mark: HaltMark,
}

impl NfaState {
    /// Compact display name: crossing states joined by `~` (empty is
    /// `e`), suffixed `+F` for an accepting halt, `+H` for a rejecting
    /// one.
    pub fn name(&self) -> String {
        let seq = if self.sequence.is_empty() {
            "e".to_string()
        } else {
            self.sequence.iter().map(State::name).collect::<Vec<_>>().join("~")
        };
        match self.mark {
            HaltMark::NoHalt => seq,
            HaltMark::HaltedNonFinal => format!("{seq}+H"),
            HaltMark::HaltedFinal => format!("{seq}+F"),
        }
    }
}

/// The nondeterministic finite automaton extracted from a machine with
/// crossing sequences bounded by `k`.
#[derive(Debug, Clone)]
pub struct ExtractedNfa {
    pub k: usize,
    pub symbols: Vec<Arc<str>>,
    pub states: Vec<NfaState>,
    pub initial: BTreeSet<usize>,
    pub finals: BTreeSet<usize>,
    pub edges: BTreeMap<(usize, Arc<str>), BTreeSet<usize>>,
}

impl ExtractedNfa {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(BTreeSet::len).sum()
    }

    /// Runs the automaton by subset simulation.
    pub fn accepts(&self, input: &[Arc<str>]) -> bool {
        let mut current: BTreeSet<usize> = self.initial.clone();
        for symbol in input {
            let mut next = BTreeSet::new();
            for &s in &current {
                if let Some(targets) = self.edges.get(&(s, symbol.clone())) {
                    next.extend(targets.iter().copied());
                }
            }
            current = next;
            if current.is_empty() {
                return false;
            }
        }
        current.iter().any(|s| self.finals.contains(s))
    }

    /// A copy with one accepting state demoted — for checking that the
    /// equivalence harness actually notices damage.
    pub fn without_final(&self, idx: usize) -> ExtractedNfa {
        let mut out = self.clone();
        out.finals.remove(&idx);
        out
    }

    /// Plain-text export: symbol list, initial and final state names, then
    /// one `FROM -symbol-> TO` line per edge.
    pub fn export(&self) -> String {
        let mut out = String::new();
        let names: Vec<String> = self.states.iter().map(NfaState::name).collect();
        let _ = writeln!(
            out,
            "symbols: {}",
            self.symbols.iter().map(|s| &**s).collect::<Vec<_>>().join(" ")
        );
        let joined = |set: &BTreeSet<usize>| {
            set.iter().map(|&s| names[s].clone()).collect::<Vec<_>>().join(" ")
        };
        let _ = writeln!(out, "initial: {}", joined(&self.initial));
        let _ = writeln!(out, "final: {}", joined(&self.finals));
        for ((from, symbol), targets) in &self.edges {
            for to in targets {
                let _ = writeln!(out, "{} -{}-> {}", names[*from], symbol, names[*to]);
            }
        }
        out
    }
}

/// Enumerates all state sequences of length at most `k`, in length order.
fn candidate_sequences(
    states: &[State],
    k: usize,
    capacity: u64,
) -> Result<Vec<Vec<State>>, AnalysisError> {
    let mut needed: u64 = 0;
    let mut pow: u64 = 1;
    for _ in 0..=k {
        needed = needed.saturating_add(pow);
        pow = pow.saturating_mul(states.len() as u64);
    }
    if needed > capacity {
        return Err(AnalysisError::CapacityExceeded { needed, capacity });
    }
    let mut out: Vec<Vec<State>> = vec![Vec::new()];
    let mut layer: Vec<Vec<State>> = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::with_capacity(layer.len() * states.len());
        for prefix in &layer {
            for q in states {
                let mut seq = prefix.clone();
                seq.push(q.clone());
                next.push(seq);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    Ok(out)
}

/// Extracts the crossing-sequence automaton of `tm`, assuming its
/// crossing sequences never exceed `k`. When the assumption is wrong the
/// automaton simply disagrees with the machine on some input — pick `k`
/// from an empirical survey and verify with [`equivalence_check`].
/// `capacity` caps the number of candidate sequences considered.
pub fn extract_nfa(
    tm: &TuringMachine,
    k: usize,
    capacity: u64,
) -> Result<ExtractedNfa, AnalysisError> {
    let machine_states: Vec<State> = tm.states().iter().cloned().collect();
    let candidates = candidate_sequences(&machine_states, k, capacity)?;
    let symbols: Vec<Arc<str>> = tm.alphabet().map(Arc::from).collect();

    let mut states: Vec<NfaState> = Vec::new();
    let mut index: BTreeMap<(Vec<State>, HaltMark), usize> = BTreeMap::new();
    fn intern(
        index: &mut BTreeMap<(Vec<State>, HaltMark), usize>,
        states: &mut Vec<NfaState>,
        sequence: &[State],
        mark: HaltMark,
    ) -> usize {
        *index.entry((sequence.to_vec(), mark)).or_insert_with(|| {
            states.push(NfaState { sequence: sequence.to_vec(), mark });
            states.len() - 1
        })
    }

    // Initial states: every sequence the start square can produce on its
    // right boundary.
    let mut initial = BTreeSet::new();
    let mut frontier: Vec<usize> = Vec::new();
    for candidate in &candidates {
        if let ReplayEnd::Consistent { halted } = replay_lb_start(tm, candidate) {
            if let Some(mark) = combine(HaltMark::NoHalt, halted) {
                let id = intern(&mut index, &mut states, candidate, mark);
                if initial.insert(id) {
                    frontier.push(id);
                }
            }
        }
    }

    // Breadth-first closure over input squares.
    let mut edges: BTreeMap<(usize, Arc<str>), BTreeSet<usize>> = BTreeMap::new();
    while let Some(from) = frontier.pop() {
        let (sequence, mark) = (states[from].sequence.clone(), states[from].mark);
        for symbol in &symbols {
            let tm_symbol = TmSymbol::sym(symbol);
            for candidate in &candidates {
                let ReplayEnd::Consistent { halted } =
                    replay_interior(tm, &tm_symbol, &sequence, candidate)
                else {
                    continue;
                };
                let Some(next_mark) = combine(mark, halted) else { continue };
                let known = index.contains_key(&(candidate.clone(), next_mark));
                let to = intern(&mut index, &mut states, candidate, next_mark);
                if !known {
                    frontier.push(to);
                }
                edges.entry((from, symbol.clone())).or_default().insert(to);
            }
        }
    }

    // Final states: the right region must absorb the remaining sequence
    // and the whole run must have halted accepting exactly once.
    let mut finals = BTreeSet::new();
    for (id, state) in states.iter().enumerate() {
        match replay_region(tm, &state.sequence, REGION_REPLAY_BUDGET) {
            RegionEnd::Consistent { halted } => {
                if combine(state.mark, halted) == Some(HaltMark::HaltedFinal) {
                    finals.insert(id);
                }
            }
            RegionEnd::Inconsistent => {}
            RegionEnd::Overrun => {
                let sequence = state
                    .sequence
                    .iter()
                    .map(State::name)
                    .collect::<Vec<_>>()
                    .join(" ");
                return Err(AnalysisError::ReplayBudget { sequence });
            }
        }
    }

    Ok(ExtractedNfa { k, symbols, states, initial, finals, edges })
}

// ---------------------------------------------------------------------
// Machine/automaton equivalence harness
// ---------------------------------------------------------------------

/// One compared input.
#[derive(Debug, Clone)]
pub struct EquivRow {
    pub input: String,
    pub machine_accepts: bool,
    pub nfa_accepts: bool,
}

impl EquivRow {
    pub fn agree(&self) -> bool {
        self.machine_accepts == self.nfa_accepts
    }
}

/// Result of comparing machine and automaton over all short inputs.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub max_len: usize,
    pub rows: Vec<EquivRow>,
}

impl EquivalenceReport {
    pub fn inputs_checked(&self) -> usize {
        self.rows.len()
    }

    pub fn disagreements(&self) -> Vec<&EquivRow> {
        self.rows.iter().filter(|r| !r.agree()).collect()
    }

    pub fn agreed(&self) -> bool {
        self.rows.iter().all(EquivRow::agree)
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("input,machine_accepts,nfa_accepts,agree\n");
        for row in &self.rows {
            let shown = if row.input.is_empty() { "(empty)" } else { &row.input };
            let _ = writeln!(
                out,
                "{},{},{},{}",
                shown,
                row.machine_accepts,
                row.nfa_accepts,
                row.agree()
            );
        }
        out
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for row in self.disagreements() {
            let shown = if row.input.is_empty() { "(empty)" } else { &row.input };
            let _ = writeln!(
                out,
                "DISAGREE {shown}: machine={} automaton={}",
                row.machine_accepts, row.nfa_accepts
            );
        }
        let _ = writeln!(
            out,
            "inputs: {} (length <= {})  disagreements: {}",
            self.inputs_checked(),
            self.max_len,
            self.disagreements().len()
        );
        out
    }
}

/// Compares machine acceptance against the automaton on every input up to
/// `max_len`. A machine run that fails to halt within `max_steps` makes
/// the comparison meaningless, so it is an error rather than a row.
pub fn equivalence_check(
    tm: &TuringMachine,
    nfa: &ExtractedNfa,
    max_len: usize,
    max_steps: u64,
) -> Result<EquivalenceReport, AnalysisError> {
    let mut rows = Vec::new();
    for input in enumerate_inputs(tm, max_len) {
        let run = simulate(tm, &input, &SimOptions::with_max_steps(max_steps))?;
        let machine_accepts = match run.verdict {
            TmVerdict::Accepted => true,
            TmVerdict::Rejected | TmVerdict::ContractViolation(_) => false,
            TmVerdict::StepLimit => {
                let shown: String = input.iter().map(|s| &**s).collect();
                return Err(AnalysisError::Interrupted {
                    detail: format!("machine exceeded {max_steps} steps on `{shown}`"),
                });
            }
        };
        let nfa_accepts = nfa.accepts(&input);
        rows.push(EquivRow {
            input: input.iter().map(|s| &**s).collect(),
            machine_accepts,
            nfa_accepts,
        });
    }
    Ok(EquivalenceReport { max_len, rows })
}

// ---------------------------------------------------------------------
// Runtime growth curves
// ---------------------------------------------------------------------

/// Knobs for [`curve_for_tm`] and [`curve_for_compiled`].
#[derive(Debug, Clone)]
pub struct CurveConfig {
    /// Input lengths to sample, ascending.
    pub sizes: Vec<usize>,
    /// Random inputs per length.
    pub reps: u64,
    pub seed: u64,
    /// Budget per run; exceeding it is an error, not a data point.
    pub max_steps: u64,
    /// Tolerated relative growth of the normalized cost between
    /// consecutive sampled lengths.
    pub epsilon: f64,
}

impl Default for CurveConfig {
    fn default() -> CurveConfig {
        CurveConfig {
            sizes: vec![8, 16, 32, 64, 128, 256],
            reps: 3,
            seed: 0xC0FFEE,
            max_steps: 10_000_000,
            epsilon: 0.05,
        }
    }
}

/// What the growth data is consistent with. Costs are exact step or
/// application counts, not wall-clock times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveVerdict {
    /// cost/n stops growing: linear (or better) within tolerance.
    BoundedByLinear,
    /// cost/n grows, but cost/(n·log2 n) stops growing.
    ConsistentWithNLogN,
    Superlinear,
}

impl CurveVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            CurveVerdict::BoundedByLinear => "bounded-by-linear",
            CurveVerdict::ConsistentWithNLogN => "consistent-with-n-log-n",
            CurveVerdict::Superlinear => "superlinear",
        }
    }
}

/// Mean cost at one input length.
#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub n: usize,
    pub mean_cost: f64,
    pub per_n: f64,
    pub per_n_log_n: f64,
}

/// A sampled growth curve plus its verdict.
#[derive(Debug, Clone)]
pub struct CurveReport {
    pub subject: String,
    /// What the cost counts: machine steps or rule applications.
    pub unit: &'static str,
    pub points: Vec<CurvePoint>,
    pub verdict: CurveVerdict,
}

impl CurveReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "subject: {} ({})", self.subject, self.unit);
        let _ = writeln!(out, "{:>8} {:>14} {:>10} {:>12}", "n", "mean", "per-n", "per-nlogn");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{:>8} {:>14.1} {:>10.3} {:>12.3}",
                p.n, p.mean_cost, p.per_n, p.per_n_log_n
            );
        }
        let _ = writeln!(out, "verdict: {}", self.verdict.label());
        out
    }
}

fn curve_point(n: usize, mean_cost: f64) -> CurvePoint {
    let nf = n.max(1) as f64;
    let log = nf.log2().max(1.0);
    CurvePoint { n, mean_cost, per_n: mean_cost / nf, per_n_log_n: mean_cost / (nf * log) }
}

/// The verdict looks only at the larger half of the sampled lengths, past
/// constant-factor warmup.
fn curve_verdict(points: &[CurvePoint], epsilon: f64) -> CurveVerdict {
    let top = &points[points.len() / 2..];
    let settles = |f: fn(&CurvePoint) -> f64| {
        top.windows(2).all(|w| f(&w[1]) <= f(&w[0]) * (1.0 + epsilon))
    };
    if settles(|p| p.per_n) {
        CurveVerdict::BoundedByLinear
    } else if settles(|p| p.per_n_log_n) {
        CurveVerdict::ConsistentWithNLogN
    } else {
        CurveVerdict::Superlinear
    }
}

fn random_input(tm: &TuringMachine, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Arc<str>>, AnalysisError> {
    let symbols: Vec<Arc<str>> = tm.alphabet().map(Arc::from).collect();
    if symbols.is_empty() && n > 0 {
        return Err(AnalysisError::Unsupported {
            reason: "cannot sample inputs: the machine has an empty working alphabet".into(),
        });
    }
    Ok((0..n).map(|_| symbols[rng.gen_range(0..symbols.len())].clone()).collect())
}

fn curve<E>(
    subject: &str,
    unit: &'static str,
    tm: &TuringMachine,
    config: &CurveConfig,
    mut cost: E,
) -> Result<CurveReport, AnalysisError>
where
    E: FnMut(&[Arc<str>]) -> Result<u64, AnalysisError>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut points = Vec::with_capacity(config.sizes.len());
    for &n in &config.sizes {
        let mut total = 0u64;
        for _ in 0..config.reps.max(1) {
            let input = random_input(tm, n, &mut rng)?;
            total += cost(&input)?;
        }
        let mean = total as f64 / config.reps.max(1) as f64;
        points.push(curve_point(n, mean));
    }
    let verdict = curve_verdict(&points, config.epsilon);
    Ok(CurveReport { subject: subject.to_string(), unit, points, verdict })
}

/// Samples machine step counts over random inputs of growing length.
pub fn curve_for_tm(
    tm: &TuringMachine,
    subject: &str,
    config: &CurveConfig,
) -> Result<CurveReport, AnalysisError> {
    curve(subject, "machine steps", tm, config, |input| {
        let run = simulate(tm, input, &SimOptions::with_max_steps(config.max_steps))?;
        if !run.verdict.is_halting() {
            let shown: String = input.iter().map(|s| &**s).collect();
            return Err(AnalysisError::Interrupted {
                detail: format!("machine run on `{shown}` ended as {}", run.verdict.label()),
            });
        }
        Ok(run.steps)
    })
}

/// Samples rule-application counts of the compiled grammar over random
/// inputs of growing length.
pub fn curve_for_compiled(
    tm: &TuringMachine,
    subject: &str,
    config: &CurveConfig,
) -> Result<CurveReport, AnalysisError> {
    let compiled = compile(tm)?;
    curve(subject, "rule applications", tm, config, |input| {
        let run = run_compiled(
            &compiled,
            input,
            &Bounds::with_max_steps(config.max_steps),
            &DeriveOptions::default(),
        )?;
        if !run.outcome.result.is_fixpoint() {
            let shown: String = input.iter().map(|s| &**s).collect();
            return Err(AnalysisError::Interrupted {
                detail: format!(
                    "derivation on `{shown}` ended as {}",
                    run.outcome.result.label()
                ),
            });
        }
        Ok(run.outcome.stats.applications)
    })
}

// ---------------------------------------------------------------------
// Weight survey
// ---------------------------------------------------------------------

/// One weighted run.
#[derive(Debug, Clone)]
pub struct WeightRow {
    pub input: String,
    pub verdict: TmVerdict,
    pub steps: u64,
    /// Working squares left on the tape at the end of the run.
    pub final_len: usize,
    /// `weight · (final_len + 2)`: what a complete weighted run may cost
    /// at most, since every step spends one unit of some square's budget.
    pub bound: u64,
    pub within: bool,
}

/// Weighted runs over all short inputs: does the machine live within a
/// per-square visit budget, and do its step counts respect the implied
/// total bound?
#[derive(Debug, Clone)]
pub struct WeightReport {
    pub weight: u64,
    pub max_len: usize,
    pub rows: Vec<WeightRow>,
    /// Every run halted normally — no budget exhaustion, no step cap.
    pub all_completed: bool,
    /// Every halting run took at most `weight · (final_len + 2)` steps.
    pub all_within_bound: bool,
}

impl WeightReport {
    pub fn render_text(&self, verbose: bool) -> String {
        let mut out = String::new();
        for row in &self.rows {
            if verbose || !row.verdict.is_halting() || !row.within {
                let shown = if row.input.is_empty() { "(empty)" } else { &row.input };
                let _ = writeln!(
                    out,
                    "{:<12} {:<20} steps={:<8} bound={:<8} {}",
                    row.verdict.label(),
                    shown,
                    row.steps,
                    row.bound,
                    if row.within { "within" } else { "outside" }
                );
            }
        }
        let _ = writeln!(
            out,
            "weight: {}  inputs: {} (length <= {})  all-completed: {}  all-within-bound: {}",
            self.weight,
            self.rows.len(),
            self.max_len,
            self.all_completed,
            self.all_within_bound
        );
        out
    }
}

/// Runs `tm` with a per-square visit budget of `weight` over every input
/// up to `max_len`.
pub fn weight_survey(
    tm: &TuringMachine,
    weight: NonZeroU64,
    max_len: usize,
    max_steps: u64,
) -> Result<WeightReport, TmError> {
    let mut rows = Vec::new();
    let mut all_completed = true;
    let mut all_within = true;
    for input in enumerate_inputs(tm, max_len) {
        let options = SimOptions { max_steps, weight: Some(weight), record_trace: false };
        let run = simulate(tm, &input, &options)?;
        let final_len = run.final_tape.len();
        let bound = weight.get() * (final_len as u64 + 2);
        let halting = run.verdict.is_halting();
        let within = halting && run.steps <= bound;
        all_completed &= halting;
        if halting {
            all_within &= within;
        }
        rows.push(WeightRow {
            input: input.iter().map(|s| &**s).collect(),
            verdict: run.verdict,
            steps: run.steps,
            final_len,
            bound,
            within,
        });
    }
    Ok(WeightReport {
        weight: weight.get(),
        max_len,
        rows,
        all_completed,
        all_within_bound: all_within,
    })
}
