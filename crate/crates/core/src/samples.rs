//! Ready-made machines used across tests, benchmarks, and the CLI, plus a
//! seeded random-machine generator whose output always respects the tape
//! boundary discipline.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tm::{TuringMachine, TmTransition, Move, State, TmSymbol};

/// Names accepted by [`by_name`].
pub const SAMPLE_NAMES: &[&str] =
    &["right-sweeper", "two-pass-sweeper", "shuttle", "trailing-eraser"];

/// Looks a sample machine up by its CLI name.
pub fn by_name(name: &str) -> Option<TuringMachine> {
    match name {
        "right-sweeper" => Some(right_sweeper()),
        "two-pass-sweeper" => Some(two_pass_sweeper()),
        "shuttle" => Some(shuttle()),
        "trailing-eraser" => Some(trailing_eraser()),
        _ => None,
    }
}

/// Sweeps right once, rewriting every `A` to `B`, and halts accepting on
/// the right boundary (or on any `B`). Runs in `n + 1` steps on `A^n`; every
/// boundary is crossed exactly once.
pub fn right_sweeper() -> TuringMachine {
    TuringMachine::builder("q0")
        .accept(["q1"])
        .symbols(["A", "B"])
        .transition("q0", "LB", "LB", 1, "q1")
        .transition("q1", "A", "B", 1, "q1")
        .build()
        .expect("sample machine is valid")
}

/// Sweeps right rewriting `A` to `B`, bounces off the right boundary, and
/// sweeps back left, halting accepting on the left boundary. Runs in
/// `2n + 2` steps on `A^n`; every interior boundary is crossed exactly
/// twice, so it needs per-square weight 2 but violates weight 1.
pub fn two_pass_sweeper() -> TuringMachine {
    TuringMachine::builder("q0")
        .accept(["q2"])
        .symbols(["A", "B"])
        .transition("q0", "LB", "LB", 1, "q1")
        .transition("q1", "A", "B", 1, "q1")
        .transition("q1", "RB", "RB", -1, "q2")
        .transition("q2", "B", "B", -1, "q2")
        .build()
        .expect("sample machine is valid")
}

/// Marks one `A` per pass and shuttles back to the left boundary between
/// passes: quadratic time, and crossing sequences that grow with the input
/// length. Accepts everything.
pub fn shuttle() -> TuringMachine {
    TuringMachine::builder("q0")
        .accept(["qr"])
        .symbols(["A", "X"])
        .transition("q0", "LB", "LB", 1, "qr")
        .transition("qr", "X", "X", 1, "qr")
        .transition("qr", "A", "X", -1, "ql")
        .transition("ql", "X", "X", -1, "ql")
        .transition("ql", "LB", "LB", 1, "qr")
        .build()
        .expect("sample machine is valid")
}

/// Sweeps right to the boundary, then erases the trailing run of `A`s by
/// retracting the tape one square at a time; halts accepting on the first
/// `B` (or the left boundary). Exercises the bounce and tape-retraction
/// transition shapes.
pub fn trailing_eraser() -> TuringMachine {
    TuringMachine::builder("q0")
        .accept(["q2"])
        .symbols(["A", "B"])
        .transition("q0", "LB", "LB", 1, "q1")
        .transition("q1", "A", "A", 1, "q1")
        .transition("q1", "B", "B", 1, "q1")
        .transition("q1", "RB", "RB", -1, "q2")
        .transition("q2", "A", "RB", -1, "q2")
        .build()
        .expect("sample machine is valid")
}

/// The corpus for differential checking: every hand-written sample plus
/// `random_count` seeded random machines starting at `first_seed`, each
/// under a stable name.
pub fn differential_suite(random_count: u64, first_seed: u64) -> Vec<(String, TuringMachine)> {
    let mut suite: Vec<(String, TuringMachine)> = SAMPLE_NAMES
        .iter()
        .map(|name| ((*name).to_string(), by_name(name).expect("listed sample")))
        .collect();
    let config = RandomTmConfig::default();
    for offset in 0..random_count {
        let seed = first_seed + offset;
        suite.push((format!("random-{seed}"), random_tm(seed, &config)));
    }
    suite
}

/// Tuning knobs for [`random_tm`].
#[derive(Debug, Clone)]
pub struct RandomTmConfig {
    /// States are drawn from `2..=max_states`.
    pub max_states: usize,
    /// Working-alphabet size is drawn from `1..=max_symbols` (at most 5).
    pub max_symbols: usize,
    /// Probability that each (state, symbol) pair has a transition. The
    /// gaps are what make random machines halt.
    pub definedness: f64,
    /// Probability that each state is accepting.
    pub final_prob: f64,
    /// Probability mass on moving right for working-symbol transitions;
    /// the rest splits 5:4 between left and stay.
    pub right_bias: f64,
    /// Probability that a transition's destination is a strictly
    /// later-numbered state when one exists. Forward drift through the
    /// state order makes runs fall off the defined transitions and halt.
    pub forward_bias: f64,
    /// Candidate machines are probed on a handful of short inputs and
    /// regenerated (from the same seeded stream) until every probe halts,
    /// up to this many attempts; the best candidate wins otherwise.
    pub max_attempts: u32,
    /// Step budget for each probe run.
    pub probe_steps: u64,
}

impl Default for RandomTmConfig {
    fn default() -> RandomTmConfig {
        RandomTmConfig {
            max_states: 4,
            max_symbols: 3,
            definedness: 0.78,
            final_prob: 0.35,
            right_bias: 0.5,
            forward_bias: 0.7,
            max_attempts: 64,
            probe_steps: 2_000,
        }
    }
}

const SYMBOL_POOL: [&str; 5] = ["A", "B", "C", "D", "E"];

/// Generates a deterministic random machine for `seed`. By construction
/// the result is statically valid and can never violate the boundary
/// discipline at runtime: it never writes RB over a working symbol, never
/// walks off either end, and only rewrites the boundaries in place.
///
/// Machines whose runs rarely halt make poor checking corpora — their
/// rows are all inconclusive — so candidates are screened against a few
/// short probe inputs and regenerated until the probes all halt (bounded
/// by `max_attempts`). The whole procedure is driven by one seeded stream
/// and stays deterministic per seed.
pub fn random_tm(seed: u64, config: &RandomTmConfig) -> TuringMachine {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(u32, TuringMachine)> = None;
    for _ in 0..config.max_attempts.max(1) {
        let tm = random_tm_raw(&mut rng, config);
        let (halted, probes) = probe_halting(&tm, config.probe_steps);
        if halted == probes {
            return tm;
        }
        if best.as_ref().is_none_or(|(score, _)| halted > *score) {
            best = Some((halted, tm));
        }
    }
    best.expect("at least one candidate was generated").1
}

/// Runs a candidate on short probe inputs; returns (halted, total).
fn probe_halting(tm: &TuringMachine, max_steps: u64) -> (u32, u32) {
    use crate::tm::{simulate, SimOptions};
    let symbols: Vec<std::sync::Arc<str>> = tm.alphabet().map(std::sync::Arc::from).collect();
    let mut probes: Vec<Vec<std::sync::Arc<str>>> = vec![Vec::new()];
    if let Some(first) = symbols.first() {
        for len in 1..=4usize {
            probes.push(vec![first.clone(); len]);
        }
        let mixed: Vec<std::sync::Arc<str>> =
            (0..4).map(|i| symbols[i % symbols.len()].clone()).collect();
        let reversed: Vec<std::sync::Arc<str>> = mixed.iter().rev().cloned().collect();
        probes.push(mixed);
        probes.push(reversed);
    }
    let total = probes.len() as u32;
    let mut halted = 0u32;
    for input in &probes {
        let run = simulate(tm, input, &SimOptions::with_max_steps(max_steps))
            .expect("probe inputs use the machine's own alphabet");
        halted += u32::from(run.verdict.is_halting());
    }
    (halted, total)
}

fn random_tm_raw(rng: &mut ChaCha8Rng, config: &RandomTmConfig) -> TuringMachine {
    let n_states = rng.gen_range(2..=config.max_states.max(2));
    let n_symbols = rng.gen_range(1..=config.max_symbols.clamp(1, SYMBOL_POOL.len()));
    let states: Vec<String> = (0..n_states).map(|i| format!("q{i}")).collect();
    let symbols = &SYMBOL_POOL[..n_symbols];

    let finals: Vec<&str> = states
        .iter()
        .filter(|_| rng.gen_bool(config.final_prob))
        .map(String::as_str)
        .collect();

    let mut transitions = Vec::new();
    for (src_idx, src) in states.iter().enumerate() {
        let mut inputs: Vec<TmSymbol> = vec![TmSymbol::Lb];
        inputs.extend(symbols.iter().map(|s| TmSymbol::sym(s)));
        inputs.push(TmSymbol::Rb);
        for input in inputs {
            if !rng.gen_bool(config.definedness) {
                continue;
            }
            // Prefer forward jumps through the state order so runs drift
            // toward the sparser end of the transition table and halt.
            let dst = if src_idx + 1 < n_states && rng.gen_bool(config.forward_bias) {
                &states[rng.gen_range(src_idx + 1..n_states)]
            } else {
                &states[rng.gen_range(0..n_states)]
            };
            let (output, movement) = match &input {
                TmSymbol::Lb => {
                    // LB must be re-written in place; move right or stay.
                    let mv = if rng.gen_bool(0.8) { Move::Right } else { Move::Stay };
                    (TmSymbol::Lb, mv)
                }
                TmSymbol::Rb => {
                    if rng.gen_bool(0.5) {
                        // Extend the tape: overwrite RB with a symbol. Any
                        // movement is safe after the overwrite.
                        let out = TmSymbol::sym(symbols[rng.gen_range(0..n_symbols)]);
                        let mv = match rng.gen_range(0..3) {
                            0 => Move::Left,
                            1 => Move::Stay,
                            _ => Move::Right,
                        };
                        (out, mv)
                    } else {
                        // Keep RB: bounce left or stay (never move past it).
                        let mv = if rng.gen_bool(0.8) { Move::Left } else { Move::Stay };
                        (TmSymbol::Rb, mv)
                    }
                }
                TmSymbol::Sym(_) => {
                    // Working squares only ever get working symbols, so the
                    // run can never write RB mid-tape.
                    let out = TmSymbol::sym(symbols[rng.gen_range(0..n_symbols)]);
                    let roll: f64 = rng.gen();
                    let mv = if roll < config.right_bias {
                        Move::Right
                    } else if roll < config.right_bias + (1.0 - config.right_bias) * (5.0 / 9.0) {
                        Move::Left
                    } else {
                        Move::Stay
                    };
                    (out, mv)
                }
            };
            transitions.push(TmTransition {
                src: State::new(src),
                input,
                output,
                movement,
                dst: State::new(dst),
            });
        }
    }

    let extra: Vec<&str> = symbols.to_vec();
    TuringMachine::new(&states[0], finals, transitions, &extra)
        .expect("generated machines are valid by construction")
}
