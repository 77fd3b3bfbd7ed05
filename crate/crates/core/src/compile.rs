//! Compiling machines to rewrite grammars.
//!
//! The tape becomes a cohort string: every square is a singleton cohort
//! carrying its symbol, and the head is a *state marker* feature riding on
//! the current square's cohort. Every machine transition becomes a short
//! rule scheme that plays the step out in exactly three rule applications:
//! mark the destination square with a *transit marker*, rewrite the head
//! square, then swap the transit marker for the next state's marker. The
//! scheme's conditions gate each phase on the previous one, so the
//! first-rule/leftmost-site engine has exactly one applicable rule at any
//! point of a run — the grammar is deterministic by construction, and
//! reaches a fixpoint exactly when the machine halts.
//!
//! Only four transition shapes are compiled directly — interior moves,
//! frontier extension, frontier retraction, and the bounce off the right
//! boundary — so machines are first *normalized*: every other legal shape
//! splits into two transitions through a fresh intermediate state. One
//! normalized step costs exactly three applications, which is what makes
//! application counting on the grammar side an exact mirror of the
//! machine's step count.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::cohort::{self, CohortError, CohortString, Feature, FeatureAlphabet, Reading};
use crate::engine::{derive, Bounds, DerivationOutcome, DeriveOptions, DeriveResult};
use crate::grammar::{ContextCondition, Grammar, GrammarError, Pattern, Rule};
use crate::tm::{
    enumerate_inputs, simulate, Move, SimOptions, State, TmError, TmSymbol, TmTransition,
    TmVerdict, TuringMachine,
};

/// Errors raised by normalization, compilation, and decoding.
#[derive(Debug, Error)]
pub enum CompileError {
    #[error("feature name `{name}` is claimed by both {first} and {second}")]
    MarkerCollision { name: String, first: String, second: String },
    #[error("transition `{transition}` can never run without violating the tape discipline")]
    UnsupportedTransition { transition: String },
    #[error("cannot decode the cohort string as a tape: {reason}")]
    Decode { reason: String },
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Tm(#[from] TmError),
}

/// The four transition shapes the rule schemes cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionShape {
    /// Read and write working symbols (or re-write LB) and move one square.
    Interior,
    /// Overwrite the right boundary with a working symbol, staying put.
    Extension,
    /// Overwrite the last working square with RB, moving left.
    Retraction,
    /// Stay on the right boundary and move left off it.
    Bounce,
}

/// Classifies a transition; `None` means it must be normalized first.
pub fn shape_of(t: &TmTransition) -> Option<TransitionShape> {
    match (&t.input, &t.output, t.movement) {
        (TmSymbol::Rb, TmSymbol::Rb, Move::Left) => Some(TransitionShape::Bounce),
        (TmSymbol::Rb, TmSymbol::Sym(_), Move::Stay) => Some(TransitionShape::Extension),
        (TmSymbol::Sym(_), TmSymbol::Rb, Move::Left) => Some(TransitionShape::Retraction),
        (TmSymbol::Rb, _, _) | (_, TmSymbol::Rb, _) => None,
        (_, _, Move::Stay) => None,
        _ => Some(TransitionShape::Interior),
    }
}

/// A machine whose transitions all have one of the four compiled shapes,
/// plus the intermediate states normalization introduced. Intermediate
/// states are never accepting, so the normalized machine halts in the same
/// states, with the same verdict and tape, as the original — in at most
/// twice the steps.
#[derive(Debug, Clone)]
pub struct NormalizedTm {
    pub tm: TuringMachine,
    pub fresh_states: BTreeSet<State>,
}

struct FreshNames {
    existing: BTreeSet<String>,
    counter: usize,
}

impl FreshNames {
    fn next(&mut self) -> String {
        loop {
            let name = format!("n{}", self.counter);
            self.counter += 1;
            if self.existing.insert(name.clone()) {
                return name;
            }
        }
    }
}

/// Rewrites every transition into the four compiled shapes. Transitions
/// that can never fire legally — writing RB and then moving right past
/// it — are rejected.
pub fn normalize(tm: &TuringMachine) -> Result<NormalizedTm, CompileError> {
    let mut names = FreshNames {
        existing: tm.states().iter().map(|s| s.name().to_string()).collect(),
        counter: 0,
    };
    let omega: Vec<TmSymbol> = tm.alphabet().map(TmSymbol::sym).collect();
    let mut fresh_states = BTreeSet::new();
    let mut out: Vec<TmTransition> = Vec::new();

    for t in tm.transitions() {
        if shape_of(t).is_some() {
            out.push(t.clone());
            continue;
        }
        match (&t.input, &t.output, t.movement) {
            // Staying put on a working (or LB) square: act and slide
            // right, then slide back. The slide-back covers everything a
            // rightward move can land on, the stored RB included.
            (a, b, Move::Stay) if *a != TmSymbol::Rb && *b != TmSymbol::Rb => {
                let s = State::new(&names.next());
                fresh_states.insert(s.clone());
                out.push(TmTransition {
                    src: t.src.clone(),
                    input: a.clone(),
                    output: b.clone(),
                    movement: Move::Right,
                    dst: s.clone(),
                });
                for c in omega.iter().chain([&TmSymbol::Rb]) {
                    out.push(TmTransition {
                        src: s.clone(),
                        input: c.clone(),
                        output: c.clone(),
                        movement: Move::Left,
                        dst: t.dst.clone(),
                    });
                }
            }
            // Overwriting the frontier and moving: extend in place first,
            // then move off the written square.
            (TmSymbol::Rb, TmSymbol::Sym(_), Move::Left | Move::Right) => {
                let s = State::new(&names.next());
                fresh_states.insert(s.clone());
                out.push(TmTransition {
                    src: t.src.clone(),
                    input: TmSymbol::Rb,
                    output: t.output.clone(),
                    movement: Move::Stay,
                    dst: s.clone(),
                });
                out.push(TmTransition {
                    src: s.clone(),
                    input: t.output.clone(),
                    output: t.output.clone(),
                    movement: t.movement,
                    dst: t.dst.clone(),
                });
            }
            // Retracting or bouncing while staying on the boundary: do the
            // leftward form, then slide right back onto the stored RB. The
            // square left of the frontier holds a working symbol or LB.
            (TmSymbol::Sym(_) | TmSymbol::Rb, TmSymbol::Rb, Move::Stay) => {
                let s = State::new(&names.next());
                fresh_states.insert(s.clone());
                out.push(TmTransition {
                    src: t.src.clone(),
                    input: t.input.clone(),
                    output: TmSymbol::Rb,
                    movement: Move::Left,
                    dst: s.clone(),
                });
                for c in [&TmSymbol::Lb].into_iter().chain(omega.iter()) {
                    out.push(TmTransition {
                        src: s.clone(),
                        input: c.clone(),
                        output: c.clone(),
                        movement: Move::Right,
                        dst: t.dst.clone(),
                    });
                }
            }
            // Writing RB over a working square and moving right always
            // walks past the first right boundary.
            (TmSymbol::Sym(_), TmSymbol::Rb, Move::Right) => {
                return Err(CompileError::UnsupportedTransition { transition: t.to_string() });
            }
            _ => unreachable!("statically excluded transition shape: {t}"),
        }
    }

    let finals: Vec<String> = tm.finals().iter().map(|s| s.name().to_string()).collect();
    let extra: Vec<&str> = tm.alphabet().collect();
    let machine = TuringMachine::new(
        tm.start().name(),
        finals.iter().map(String::as_str),
        out,
        &extra,
    )?;
    Ok(NormalizedTm { tm: machine, fresh_states })
}

/// A compiled machine: the grammar, the normalized machine it mirrors, and
/// the marker bookkeeping needed to encode inputs and decode results.
#[derive(Debug, Clone)]
pub struct CompiledTm {
    pub grammar: Grammar,
    pub normalized: TuringMachine,
    pub fresh_states: BTreeSet<State>,
    /// `Q.<state>`: the head-position marker for each state.
    pub state_markers: BTreeMap<State, Feature>,
    /// `T.<state>.<symbol>`: the transit marker of the transition leaving
    /// `state` on `symbol`, carried by the destination square mid-step.
    pub transit_markers: BTreeMap<(State, TmSymbol), Feature>,
    /// State markers of the accepting states; a fixpoint string accepts
    /// exactly when one of these occurs in it.
    pub final_markers: BTreeSet<Feature>,
}

fn claim(
    claims: &mut BTreeMap<String, String>,
    name: String,
    owner: String,
) -> Result<(), CompileError> {
    if let Some(first) = claims.get(&name) {
        return Err(CompileError::MarkerCollision { name, first: first.clone(), second: owner });
    }
    claims.insert(name, owner);
    Ok(())
}

fn tape_feature(alphabet: &FeatureAlphabet, symbol: &TmSymbol) -> Feature {
    let name = match symbol {
        TmSymbol::Lb => cohort::LB,
        TmSymbol::Rb => cohort::RB,
        TmSymbol::Sym(n) => n,
    };
    alphabet.get(name).expect("tape symbols are declared").clone()
}

fn pattern(features: &[&Feature]) -> Pattern {
    Pattern::new(features.iter().map(|f| (*f).clone()).collect()).expect("non-empty pattern")
}

fn reading(features: &[&Feature]) -> Reading {
    Reading::new(features.iter().map(|f| (*f).clone()).collect()).expect("non-empty reading")
}

/// Compiles a machine into a rewrite grammar via [`normalize`].
pub fn compile(tm: &TuringMachine) -> Result<CompiledTm, CompileError> {
    let NormalizedTm { tm: normalized, fresh_states } = normalize(tm)?;

    // Claim every feature name, catching collisions between tape symbols
    // and generated marker names (possible when state or symbol names
    // contain the marker separator).
    let mut claims: BTreeMap<String, String> = BTreeMap::new();
    claim(&mut claims, cohort::LB.to_string(), "the left boundary".to_string())?;
    claim(&mut claims, cohort::RB.to_string(), "the right boundary".to_string())?;
    let mut names: Vec<String> = Vec::new();
    for sym in normalized.alphabet() {
        claim(&mut claims, sym.to_string(), format!("tape symbol `{sym}`"))?;
        names.push(sym.to_string());
    }
    for q in normalized.states() {
        let name = format!("Q.{q}");
        claim(&mut claims, name.clone(), format!("the state marker of `{q}`"))?;
        names.push(name);
    }
    for t in normalized.transitions() {
        let name = format!("T.{}.{}", t.src, t.input);
        claim(
            &mut claims,
            name.clone(),
            format!("the transit marker of `{} {}`", t.src, t.input),
        )?;
        names.push(name);
    }

    let alphabet = FeatureAlphabet::new(&names)?;
    let state_markers: BTreeMap<State, Feature> = normalized
        .states()
        .iter()
        .map(|q| {
            let f = alphabet.get(&format!("Q.{q}")).expect("declared above").clone();
            (q.clone(), f)
        })
        .collect();
    let transit_markers: BTreeMap<(State, TmSymbol), Feature> = normalized
        .transitions()
        .map(|t| {
            let f = alphabet
                .get(&format!("T.{}.{}", t.src, t.input))
                .expect("declared above")
                .clone();
            ((t.src.clone(), t.input.clone()), f)
        })
        .collect();

    // Destination-symbol ranges for the marking and unmarking schemes.
    let interior_range: Vec<TmSymbol> = [TmSymbol::Lb, TmSymbol::Rb]
        .into_iter()
        .chain(normalized.alphabet().map(TmSymbol::sym))
        .collect();
    let retraction_range: Vec<TmSymbol> = [TmSymbol::Lb]
        .into_iter()
        .chain(normalized.alphabet().map(TmSymbol::sym))
        .collect();

    // Three rule groups. Act rules come first in the grammar so that once
    // a destination square is marked, finishing the step always outranks
    // starting (or repeating) another one; unmark rules come last.
    let mut act_rules = Vec::new();
    let mut mark_rules = Vec::new();
    let mut unmark_rules = Vec::new();

    for t in normalized.transitions() {
        let q_mark = &state_markers[&t.src];
        let r_mark = &state_markers[&t.dst];
        let t_mark = &transit_markers[&(t.src.clone(), t.input.clone())];
        let a_feat = tape_feature(&alphabet, &t.input);
        let b_feat = tape_feature(&alphabet, &t.output);
        let head = pattern(&[q_mark, &a_feat]);

        match shape_of(t).expect("normalized transitions have a shape") {
            TransitionShape::Interior | TransitionShape::Bounce => {
                let d = t.movement.delta();
                act_rules.push(Rule::replace(
                    head.clone(),
                    reading(&[&b_feat]),
                    vec![ContextCondition::new(d, pattern(&[t_mark]))],
                ));
                for c in &interior_range {
                    let c_feat = tape_feature(&alphabet, c);
                    mark_rules.push(Rule::replace(
                        pattern(&[&c_feat]),
                        reading(&[t_mark, &c_feat]),
                        vec![ContextCondition::new(-d, pattern(&[q_mark, &a_feat]))],
                    ));
                    unmark_rules.push(Rule::replace(
                        pattern(&[t_mark, &c_feat]),
                        reading(&[r_mark, &c_feat]),
                        vec![ContextCondition::not(-d, pattern(&[q_mark]))],
                    ));
                }
            }
            TransitionShape::Extension => {
                // The new square appears directly left of the boundary
                // cohort the head sits on, already carrying the written
                // symbol and the transit marker; the boundary square
                // itself just sheds the state marker.
                act_rules.push(Rule::replace(
                    head.clone(),
                    reading(&[&a_feat]),
                    vec![ContextCondition::new(-1, pattern(&[t_mark, &b_feat]))],
                ));
                mark_rules.push(Rule::add_cohort(
                    reading(&[t_mark, &b_feat]),
                    vec![ContextCondition::new(1, pattern(&[q_mark, &a_feat]))],
                ));
                unmark_rules.push(Rule::replace(
                    pattern(&[t_mark, &b_feat]),
                    reading(&[r_mark, &b_feat]),
                    vec![ContextCondition::not(1, pattern(&[q_mark, &a_feat]))],
                ));
            }
            TransitionShape::Retraction => {
                act_rules.push(Rule::rem_cohort(
                    head.clone(),
                    vec![ContextCondition::new(-1, pattern(&[t_mark]))],
                ));
                for c in &retraction_range {
                    let c_feat = tape_feature(&alphabet, c);
                    mark_rules.push(Rule::replace(
                        pattern(&[&c_feat]),
                        reading(&[t_mark, &c_feat]),
                        vec![
                            ContextCondition::new(1, pattern(&[q_mark, &a_feat])),
                            ContextCondition::new(2, pattern(&[alphabet
                                .get(cohort::RB)
                                .expect("RB is always declared")])),
                        ],
                    ));
                    unmark_rules.push(Rule::replace(
                        pattern(&[t_mark, &c_feat]),
                        reading(&[r_mark, &c_feat]),
                        vec![ContextCondition::not(1, pattern(&[q_mark, &a_feat]))],
                    ));
                }
            }
        }
    }

    let mut rules = act_rules;
    rules.append(&mut mark_rules);
    rules.append(&mut unmark_rules);
    let grammar = Grammar::new(alphabet, rules);

    let final_markers = normalized
        .finals()
        .iter()
        .map(|q| state_markers[q].clone())
        .collect();

    Ok(CompiledTm {
        grammar,
        normalized,
        fresh_states,
        state_markers,
        transit_markers,
        final_markers,
    })
}

impl CompiledTm {
    /// Human-readable summary of the compilation bookkeeping.
    pub fn manifest_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "rules: {}", self.grammar.rules.len());
        let _ = writeln!(
            out,
            "normalized-transitions: {}",
            self.normalized.transition_count()
        );
        let _ = writeln!(
            out,
            "intermediate-states: {}",
            self.fresh_states
                .iter()
                .map(State::name)
                .collect::<Vec<_>>()
                .join(" ")
        );
        for (state, marker) in &self.state_markers {
            let kind = if self.final_markers.contains(marker) { " (accepting)" } else { "" };
            let _ = writeln!(out, "state-marker: {state} -> {marker}{kind}");
        }
        for ((state, symbol), marker) in &self.transit_markers {
            let _ = writeln!(out, "transit-marker: ({state}, {symbol}) -> {marker}");
        }
        out
    }
}

/// Encodes a machine input as the starting cohort string: one singleton
/// cohort per square, with the start-state marker riding on the left
/// boundary square.
pub fn encode_input(
    compiled: &CompiledTm,
    input: &[Arc<str>],
) -> Result<CohortString, CompileError> {
    let alphabet = &compiled.grammar.alphabet;
    let start_marker = compiled
        .state_markers
        .get(compiled.normalized.start())
        .expect("the start state has a marker");
    let lb = alphabet.get(cohort::LB).expect("LB is declared");
    let rb = alphabet.get(cohort::RB).expect("RB is declared");

    let mut cohorts: Vec<Vec<Reading>> = Vec::with_capacity(input.len() + 2);
    cohorts.push(vec![reading(&[lb, start_marker])]);
    for name in input {
        if !compiled.normalized.has_symbol(name) {
            return Err(CompileError::Tm(TmError::UnknownSymbol { name: name.to_string() }));
        }
        let f = alphabet.get(name).expect("tape symbols are declared");
        cohorts.push(vec![reading(&[f])]);
    }
    cohorts.push(vec![reading(&[rb])]);
    Ok(CohortString::from_readings(cohorts)?)
}

/// True when the string carries any accepting state's marker: the machine
/// halt it encodes was accepting.
pub fn halted_accepting(compiled: &CompiledTm, s: &CohortString) -> bool {
    s.iter().any(|cohort| {
        cohort
            .readings()
            .any(|r| compiled.final_markers.iter().any(|m| r.contains(m)))
    })
}

/// Decodes a cohort string back into tape contents: the working symbols of
/// its square cohorts, boundaries stripped. Works mid-step as well —
/// markers ride alongside the symbol and are ignored.
pub fn extract_tape(
    compiled: &CompiledTm,
    s: &CohortString,
) -> Result<Vec<Arc<str>>, CompileError> {
    let mut tape = Vec::new();
    for (i, cohort) in s.iter().enumerate() {
        if cohort.reading_count() != 1 {
            return Err(CompileError::Decode {
                reason: format!("cohort {i} has {} readings, expected 1", cohort.reading_count()),
            });
        }
        let reading = cohort.readings().next().expect("non-empty cohort");
        let mut square: Option<&str> = None;
        let mut square_count = 0usize;
        for feature in reading.features() {
            let name = feature.name();
            let is_square = name == cohort::LB
                || name == cohort::RB
                || compiled.normalized.has_symbol(name);
            if is_square {
                square_count += 1;
                square = Some(name);
            }
        }
        match (square_count, square) {
            (1, Some(name)) if name == cohort::LB || name == cohort::RB => {}
            (1, Some(name)) => tape.push(Arc::from(name)),
            _ => {
                return Err(CompileError::Decode {
                    reason: format!("cohort {i} carries {square_count} tape symbols, expected 1"),
                })
            }
        }
    }
    Ok(tape)
}

/// Result of running a compiled grammar on an encoded input.
#[derive(Debug, Clone)]
pub struct CompiledRun {
    pub outcome: DerivationOutcome,
    /// Fixpoint verdict: did the simulated machine halt accepting? `None`
    /// when the derivation did not settle.
    pub accepted: Option<bool>,
    /// Decoded tape at the fixpoint.
    pub tape: Option<Vec<Arc<str>>>,
}

/// Encodes `input`, runs the grammar, and decodes the outcome.
pub fn run_compiled(
    compiled: &CompiledTm,
    input: &[Arc<str>],
    bounds: &Bounds,
    options: &DeriveOptions,
) -> Result<CompiledRun, CompileError> {
    let s0 = encode_input(compiled, input)?;
    let outcome = derive(&compiled.grammar, s0, bounds, options);
    let (accepted, tape) = match &outcome.result {
        DeriveResult::Fixpoint(s) => {
            (Some(halted_accepting(compiled, s)), Some(extract_tape(compiled, s)?))
        }
        _ => (None, None),
    };
    Ok(CompiledRun { outcome, accepted, tape })
}

/// Knobs for [`differential_check`].
#[derive(Debug, Clone)]
pub struct DiffConfig {
    /// Step cap for the machine run that classifies each row.
    pub tm_max_steps: u64,
    /// Application budget granted to the grammar on rows where the machine
    /// hit its cap; a fixpoint within it contradicts the cap and counts as
    /// a mismatch.
    pub capped_applications: u64,
    /// Extra applications granted beyond the expected `3·steps` on halting
    /// rows, so an overshooting grammar is observed rather than masked by
    /// an exact budget.
    pub slack: u64,
}

impl Default for DiffConfig {
    fn default() -> DiffConfig {
        DiffConfig { tm_max_steps: 10_000, capped_applications: 1_500, slack: 9 }
    }
}

/// How one (machine, input) row came out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowStatus {
    /// Machine and grammar agree on verdict, tape, and application count.
    Match,
    /// The machine run was interrupted, so nothing can be concluded.
    Inconclusive { reason: String },
    Mismatch { reason: String },
}

/// One compared run.
#[derive(Debug, Clone)]
pub struct DiffRow {
    pub machine: String,
    pub input: String,
    pub tm_verdict: TmVerdict,
    pub tm_steps: u64,
    pub normalized_steps: Option<u64>,
    pub applications: u64,
    pub grammar_result: &'static str,
    pub status: RowStatus,
}

/// Aggregate of a differential run.
#[derive(Debug, Clone, Default)]
pub struct DiffReport {
    pub rows: Vec<DiffRow>,
    pub matches: usize,
    pub inconclusive: usize,
    pub mismatches: usize,
}

impl DiffReport {
    pub fn total(&self) -> usize {
        self.rows.len()
    }

    pub fn render_text(&self, verbose: bool) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for row in &self.rows {
            let (flag, detail) = match &row.status {
                RowStatus::Match => ("ok", String::new()),
                RowStatus::Inconclusive { reason } => ("inconclusive", format!(" ({reason})")),
                RowStatus::Mismatch { reason } => ("MISMATCH", format!(" ({reason})")),
            };
            if verbose || matches!(row.status, RowStatus::Mismatch { .. }) {
                let shown = if row.input.is_empty() { "(empty)" } else { &row.input };
                let _ = writeln!(
                    out,
                    "{:<12} {:<20} {:<10} machine={} grammar={}{}",
                    flag,
                    row.machine,
                    shown,
                    row.tm_verdict.label(),
                    row.grammar_result,
                    detail
                );
            }
        }
        let _ = writeln!(
            out,
            "rows: {}  matches: {}  inconclusive: {}  mismatches: {}",
            self.total(),
            self.matches,
            self.inconclusive,
            self.mismatches
        );
        out
    }
}

/// Runs machine and compiled grammar side by side over every input up to
/// `max_input_len` and compares verdicts, tapes, and step counts.
pub fn differential_check(
    machines: &[(String, TuringMachine)],
    max_input_len: usize,
    config: &DiffConfig,
) -> Result<DiffReport, CompileError> {
    let mut report = DiffReport::default();
    for (name, tm) in machines {
        let compiled = compile(tm)?;
        check_machine(name, tm, &compiled, max_input_len, config, &mut report)?;
    }
    Ok(report)
}

/// Differentially checks one machine against `compiled` — normally its own
/// compilation, but callers may pair the machine's marker tables with an
/// externally loaded grammar to probe a deliberately altered one — over
/// every input up to `max_input_len`, appending the rows to `report`.
pub fn check_machine(
    name: &str,
    tm: &TuringMachine,
    compiled: &CompiledTm,
    max_input_len: usize,
    config: &DiffConfig,
    report: &mut DiffReport,
) -> Result<(), CompileError> {
    for input in enumerate_inputs(tm, max_input_len) {
        let row = check_row(name, tm, compiled, &input, config)?;
        match &row.status {
            RowStatus::Match => report.matches += 1,
            RowStatus::Inconclusive { .. } => report.inconclusive += 1,
            RowStatus::Mismatch { .. } => report.mismatches += 1,
        }
        report.rows.push(row);
    }
    Ok(())
}

fn check_row(
    name: &str,
    tm: &TuringMachine,
    compiled: &CompiledTm,
    input: &[Arc<str>],
    config: &DiffConfig,
) -> Result<DiffRow, CompileError> {
    let orig = simulate(tm, input, &SimOptions::with_max_steps(config.tm_max_steps))?;
    let input_str: String = input.iter().map(|s| &**s).collect();
    let mut row = DiffRow {
        machine: name.to_string(),
        input: input_str,
        tm_verdict: orig.verdict.clone(),
        tm_steps: orig.steps,
        normalized_steps: None,
        applications: 0,
        grammar_result: "not-run",
        status: RowStatus::Match,
    };

    match orig.verdict {
        TmVerdict::Accepted | TmVerdict::Rejected => {
            // The normalized machine takes at most two steps per original
            // step, so this cap can never interrupt a halting row.
            let norm = simulate(
                &compiled.normalized,
                input,
                &SimOptions::with_max_steps(2 * config.tm_max_steps + 2),
            )?;
            row.normalized_steps = Some(norm.steps);
            if norm.verdict != orig.verdict || norm.final_tape != orig.final_tape {
                row.status =
                    RowStatus::Mismatch { reason: "normalization changed the outcome".into() };
                return Ok(row);
            }
            let expected = 3 * norm.steps;
            let run = run_compiled(
                compiled,
                input,
                &Bounds::with_max_steps(expected + config.slack),
                &DeriveOptions::default(),
            )?;
            row.applications = run.outcome.stats.applications;
            row.grammar_result = run.outcome.result.label();
            row.status = if !run.outcome.result.is_fixpoint() {
                RowStatus::Mismatch {
                    reason: format!("grammar did not settle within {expected} applications"),
                }
            } else if row.applications != expected {
                RowStatus::Mismatch {
                    reason: format!(
                        "expected exactly {expected} applications, saw {}",
                        row.applications
                    ),
                }
            } else if run.accepted != Some(orig.verdict == TmVerdict::Accepted) {
                RowStatus::Mismatch { reason: "verdicts disagree".into() }
            } else if run.tape.as_deref() != Some(&orig.final_tape[..]) {
                RowStatus::Mismatch { reason: "tapes disagree".into() }
            } else {
                RowStatus::Match
            };
        }
        TmVerdict::StepLimit => {
            // The machine run is inconclusive; the grammar must not reach
            // a fixpoint within a budget that corresponds to far fewer
            // machine steps than the cap.
            let run = run_compiled(
                compiled,
                input,
                &Bounds::with_max_steps(config.capped_applications),
                &DeriveOptions { detect_loops: true, ..DeriveOptions::default() },
            )?;
            row.applications = run.outcome.stats.applications;
            row.grammar_result = run.outcome.result.label();
            row.status = if run.outcome.result.is_fixpoint() {
                RowStatus::Mismatch {
                    reason: "grammar settled although the machine exceeded its step cap".into(),
                }
            } else {
                RowStatus::Inconclusive { reason: "machine exceeded its step cap".into() }
            };
        }
        TmVerdict::ContractViolation(_) => {
            row.status = RowStatus::Inconclusive {
                reason: "machine violated the tape discipline; compiled behaviour is undefined"
                    .into(),
            };
        }
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    fn arcs(tm: &TuringMachine, text: &str) -> Vec<Arc<str>> {
        tm.parse_input(text).unwrap()
    }

    #[test]
    fn shapes_classify_transitions() {
        let t = |input: &str, output: &str, d: i64| TmTransition {
            src: State::new("q"),
            input: TmSymbol::parse_token(input),
            output: TmSymbol::parse_token(output),
            movement: Move::from_delta(d).unwrap(),
            dst: State::new("r"),
        };
        assert_eq!(shape_of(&t("A", "B", 1)), Some(TransitionShape::Interior));
        assert_eq!(shape_of(&t("A", "B", -1)), Some(TransitionShape::Interior));
        assert_eq!(shape_of(&t("LB", "LB", 1)), Some(TransitionShape::Interior));
        assert_eq!(shape_of(&t("RB", "A", 0)), Some(TransitionShape::Extension));
        assert_eq!(shape_of(&t("A", "RB", -1)), Some(TransitionShape::Retraction));
        assert_eq!(shape_of(&t("RB", "RB", -1)), Some(TransitionShape::Bounce));
        for (input, output, d) in
            [("A", "B", 0), ("LB", "LB", 0), ("RB", "A", 1), ("RB", "A", -1), ("A", "RB", 0), ("RB", "RB", 0)]
        {
            assert_eq!(shape_of(&t(input, output, d)), None, "{input} {output} {d}");
        }
    }

    #[test]
    fn normalize_keeps_already_normal_machines() {
        let tm = samples::right_sweeper();
        let normalized = normalize(&tm).unwrap();
        assert!(normalized.fresh_states.is_empty());
        assert_eq!(normalized.tm, tm);
    }

    #[test]
    fn normalize_splits_stay_transitions() {
        let tm = TuringMachine::builder("q0")
            .symbols(["A"])
            .transition("q0", "LB", "LB", 0, "q1")
            .build()
            .unwrap();
        let normalized = normalize(&tm).unwrap();
        assert_eq!(normalized.fresh_states.len(), 1);
        // One rightward main transition plus slide-backs over {A, RB}.
        assert_eq!(normalized.tm.transition_count(), 3);
        for t in normalized.tm.transitions() {
            assert!(shape_of(t).is_some(), "unnormalized transition {t}");
        }
    }

    #[test]
    fn normalize_rejects_the_impossible_frontier_write() {
        let tm = TuringMachine::builder("q0")
            .transition("q0", "A", "RB", 1, "q0")
            .build()
            .unwrap();
        assert!(matches!(
            normalize(&tm),
            Err(CompileError::UnsupportedTransition { .. })
        ));
    }

    #[test]
    fn normalization_preserves_runs() {
        // A machine exercising every split: stay moves, frontier overwrite
        // with movement, and a bouncing stay.
        let tm = TuringMachine::builder("q0")
            .accept(["q3"])
            .symbols(["A", "B"])
            .transition("q0", "LB", "LB", 0, "q1")
            .transition("q1", "LB", "LB", 1, "q1")
            .transition("q1", "A", "B", 0, "q2")
            .transition("q2", "B", "B", 1, "q1")
            .transition("q1", "B", "B", 1, "q1")
            .transition("q1", "RB", "A", 1, "q2")
            .transition("q2", "RB", "RB", 0, "q3")
            .build()
            .unwrap();
        let normalized = normalize(&tm).unwrap();
        for t in normalized.tm.transitions() {
            assert!(shape_of(t).is_some(), "unnormalized transition {t}");
        }
        for q in &normalized.fresh_states {
            assert!(!normalized.tm.is_final(q), "fresh state {q} must not accept");
        }
        for input in enumerate_inputs(&tm, 3) {
            let orig = simulate(&tm, &input, &SimOptions::with_max_steps(500)).unwrap();
            let norm =
                simulate(&normalized.tm, &input, &SimOptions::with_max_steps(1_500)).unwrap();
            if orig.verdict.is_halting() {
                assert_eq!(norm.verdict, orig.verdict);
                assert_eq!(norm.final_tape, orig.final_tape);
                assert!(norm.steps <= 2 * orig.steps);
            }
        }
    }

    #[test]
    fn compiled_sweeper_has_the_expected_rule_layout() {
        let compiled = compile(&samples::right_sweeper()).unwrap();
        // Two interior transitions over Ω = {A, B}: each contributes one
        // act rule plus mark/unmark pairs over {LB, RB, A, B}.
        assert_eq!(compiled.grammar.rules.len(), 2 * (1 + 2 * 4));
        assert_eq!(compiled.grammar.rules[0].keyword(), "REPLACE");
        assert_eq!(compiled.grammar.rules[1].keyword(), "REPLACE");
        // The grammar round-trips through its own file format.
        let text = compiled.grammar.serialize();
        let again = Grammar::parse(&text).unwrap();
        assert_eq!(again.rules, compiled.grammar.rules);
    }

    #[test]
    fn compiled_run_mirrors_the_machine_exactly() {
        let tm = samples::right_sweeper();
        let compiled = compile(&tm).unwrap();
        let input = arcs(&tm, "AA");
        let machine_run = simulate(&tm, &input, &SimOptions::default()).unwrap();
        assert_eq!(machine_run.steps, 3);
        let run = run_compiled(
            &compiled,
            &input,
            &Bounds::unbounded(),
            &DeriveOptions::default(),
        )
        .unwrap();
        assert!(run.outcome.result.is_fixpoint());
        assert_eq!(run.outcome.stats.applications, 9, "three applications per step");
        assert_eq!(run.accepted, Some(true));
        assert_eq!(run.tape.unwrap(), input.iter().map(|_| Arc::from("B")).collect::<Vec<Arc<str>>>());
    }

    #[test]
    fn compiled_retraction_and_bounce_work() {
        let tm = samples::trailing_eraser();
        let compiled = compile(&tm).unwrap();
        let input = arcs(&tm, "ABAA");
        let machine_run = simulate(&tm, &input, &SimOptions::default()).unwrap();
        let run = run_compiled(
            &compiled,
            &input,
            &Bounds::unbounded(),
            &DeriveOptions::default(),
        )
        .unwrap();
        assert!(run.outcome.result.is_fixpoint());
        assert_eq!(run.accepted, Some(true));
        assert_eq!(run.tape.as_deref(), Some(&machine_run.final_tape[..]));
        assert_eq!(run.outcome.stats.applications, 3 * machine_run.steps);
    }

    #[test]
    fn compiled_extension_grows_the_string() {
        let tm = TuringMachine::builder("q0")
            .accept(["q2"])
            .transition("q0", "LB", "LB", 1, "q1")
            .transition("q1", "RB", "A", 0, "q2")
            .build()
            .unwrap();
        let compiled = compile(&tm).unwrap();
        let run = run_compiled(
            &compiled,
            &[],
            &Bounds::unbounded(),
            &DeriveOptions::default(),
        )
        .unwrap();
        assert!(run.outcome.result.is_fixpoint());
        assert_eq!(run.outcome.stats.applications, 6);
        assert_eq!(run.accepted, Some(true));
        assert_eq!(run.tape.unwrap(), vec![Arc::<str>::from("A")]);
    }

    #[test]
    fn encode_and_decode_are_inverse() {
        let tm = samples::two_pass_sweeper();
        let compiled = compile(&tm).unwrap();
        let input = arcs(&tm, "AAB");
        let encoded = encode_input(&compiled, &input).unwrap();
        assert_eq!(encoded.len(), input.len() + 2);
        assert_eq!(extract_tape(&compiled, &encoded).unwrap(), input);
        assert!(!halted_accepting(&compiled, &encoded));
        assert!(matches!(
            encode_input(&compiled, &[Arc::from("Z")]),
            Err(CompileError::Tm(TmError::UnknownSymbol { .. }))
        ));
    }

    #[test]
    fn marker_name_collisions_are_detected() {
        let tm = TuringMachine::builder("q0")
            .symbols(["Q.q0"])
            .transition("q0", "LB", "LB", 1, "q0")
            .build()
            .unwrap();
        assert!(matches!(compile(&tm), Err(CompileError::MarkerCollision { .. })));
    }

    #[test]
    fn differential_check_passes_on_a_sample() {
        let machines = vec![("right-sweeper".to_string(), samples::right_sweeper())];
        let report = differential_check(&machines, 2, &DiffConfig::default()).unwrap();
        assert_eq!(report.total(), 7, "inputs over {{A,B}} up to length 2");
        assert_eq!(report.mismatches, 0);
        assert_eq!(report.inconclusive, 0);
        assert_eq!(report.matches, 7);
    }

    #[test]
    fn a_damaged_grammar_is_caught_by_the_row_check() {
        let tm = samples::right_sweeper();
        let mut compiled = compile(&tm).unwrap();
        // Drop one act rule: the step it implemented can no longer finish.
        compiled.grammar.rules.remove(0);
        let input = arcs(&tm, "A");
        let row = check_row("damaged", &tm, &compiled, &input, &DiffConfig::default()).unwrap();
        assert!(
            matches!(row.status, RowStatus::Mismatch { .. }),
            "damage must surface as a mismatch, got {:?}",
            row.status
        );
    }
}
