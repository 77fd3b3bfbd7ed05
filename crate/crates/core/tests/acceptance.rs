//! The acceptance gate: one test per headline guarantee, each printing a
//! single `criterion-N: PASS/FAIL — detail` line (visible under
//! `cargo test -- --nocapture`) before asserting.

mod support;

use std::num::NonZeroU64;
use std::sync::Arc;
use std::time::{Duration, Instant};

use cglab_core::analysis::{
    curve_for_tm, equivalence_check, extract_nfa, weight_survey, CurveConfig, CurveVerdict,
};
use cglab_core::compile::{compile, differential_check, run_compiled, DiffConfig};
use cglab_core::engine::{
    check_application_bound, derive, Bounds, DeriveOptions, DeriveResult,
};
use cglab_core::samples;
use cglab_core::tm::{simulate, SimOptions, TuringMachine};
use cglab_core::{CohortString, Grammar};

use support::{random_grammar, random_narrowing_grammar, random_string, rng_from, words_up_to};

fn conclude(n: u32, ok: bool, detail: &str) {
    let status = if ok { "PASS" } else { "FAIL" };
    println!("criterion-{n}: {status} — {detail}");
    assert!(ok, "criterion-{n}: {detail}");
}

fn inputs_for(tm: &TuringMachine, max_len: usize) -> Vec<Vec<Arc<str>>> {
    let names: Vec<&str> = tm.alphabet().collect();
    words_up_to(&names, max_len)
        .into_iter()
        .map(|w| w.into_iter().map(Arc::from).collect())
        .collect()
}

/// Hand-written and seeded random machines, run side by side with their
/// compiled grammars over every input up to length 4: no disagreements,
/// and almost every row decided conclusively.
#[test]
fn criterion_1_differential_agreement() {
    let started = Instant::now();
    let suite = samples::differential_suite(24, 1_000);
    let report = differential_check(&suite, 4, &DiffConfig::default()).expect("suite compiles");
    let elapsed = started.elapsed();
    let inconclusive_pct = 100.0 * report.inconclusive as f64 / report.total() as f64;
    let ok = report.mismatches == 0
        && inconclusive_pct <= 5.0
        && elapsed < Duration::from_secs(60);
    conclude(
        1,
        ok,
        &format!(
            "{} machines, {} rows: {} matched, {} inconclusive ({:.2}%), {} mismatched, {:.1}s",
            suite.len(),
            report.total(),
            report.matches,
            report.inconclusive,
            inconclusive_pct,
            report.mismatches,
            elapsed.as_secs_f64()
        ),
    );
}

/// On every halting row, the compiled grammar settles after exactly three
/// rule applications per normalized machine step.
#[test]
fn criterion_2_three_applications_per_step() {
    let mut rows = 0u64;
    let mut exact = 0u64;
    let mut first_off = None;
    for (name, tm) in samples::differential_suite(8, 1_000) {
        let compiled = compile(&tm).expect("suite compiles");
        for input in inputs_for(&tm, 3) {
            let norm = simulate(&compiled.normalized, &input, &SimOptions::with_max_steps(20_000))
                .expect("declared symbols");
            if !norm.verdict.is_halting() {
                continue;
            }
            rows += 1;
            let run = run_compiled(
                &compiled,
                &input,
                &Bounds::with_max_steps(3 * norm.steps + 9),
                &DeriveOptions::default(),
            )
            .expect("encoding succeeds");
            if run.outcome.result.is_fixpoint()
                && run.outcome.stats.applications == 3 * norm.steps
            {
                exact += 1;
            } else if first_off.is_none() {
                first_off = Some(format!(
                    "{name} took {} applications for {} steps",
                    run.outcome.stats.applications, norm.steps
                ));
            }
        }
    }
    let ok = rows > 0 && exact == rows;
    conclude(
        2,
        ok,
        &format!(
            "{exact}/{rows} halting rows used exactly 3·steps applications{}",
            first_off.map(|s| format!("; first deviation: {s}")).unwrap_or_default()
        ),
    );
}

/// Five hundred random grammars under fertility 2 and volume 3 all finish
/// and never exceed the (1+f)·n·v application bound.
#[test]
fn criterion_3_application_bound_holds() {
    let fertility = 2u64;
    let volume = 3u64;
    let bounds = Bounds {
        fertility: Some(fertility),
        volume: NonZeroU64::new(volume),
        distance: None,
        max_steps: Some(5_000),
    };
    let mut runs = 0u64;
    let mut violations = 0u64;
    for seed in 0..500u64 {
        let mut rng = rng_from(seed);
        let g = random_grammar(&mut rng);
        let s = random_string(&mut rng, &g.alphabet);
        let n = s.len() as u64;
        let outcome = derive(&g, s, &bounds, &DeriveOptions::default());
        runs += 1;
        let finished = matches!(
            outcome.result,
            DeriveResult::Fixpoint(_) | DeriveResult::BoundExceeded { .. }
        );
        let counters_ok = outcome.stats.max_gap_insertions() <= fertility
            && outcome.stats.max_cohort_ops() <= volume;
        if !finished
            || !counters_ok
            || !check_application_bound(&outcome.stats, fertility, volume, n)
        {
            violations += 1;
        }
    }
    conclude(
        3,
        runs >= 500 && violations == 0,
        &format!("{runs} bounded runs, {violations} bound violations"),
    );
}

/// The loop detector reports a period-2 cycle as a loop — not as a spent
/// step budget — while terminating grammars still reach fixpoints with
/// detection switched on.
#[test]
fn criterion_4_loop_detection() {
    let g = Grammar::parse("FEATURES A B\nREPLACE (A) (B) (0 A)\nREPLACE (B) (A) (0 B)\n")
        .expect("two-rule toggle parses");
    let s = CohortString::parse("A", &g.alphabet).expect("single cohort parses");
    let options = DeriveOptions { detect_loops: true, ..Default::default() };
    let outcome = derive(&g, s, &Bounds::with_max_steps(10_000), &options);
    // Two strings are reachable, so the recurrence must surface within two
    // applications.
    let looped = matches!(
        &outcome.result,
        DeriveResult::Loop { info, .. } if info.period() == 2 && info.detected_at <= 2
    );
    let not_step_limit = !matches!(&outcome.result, DeriveResult::StepLimit { .. });

    let mut fixpoints = 0;
    for seed in 9_000..9_010u64 {
        let mut rng = rng_from(seed);
        let g = random_narrowing_grammar(&mut rng);
        let s = random_string(&mut rng, &g.alphabet);
        let outcome = derive(&g, s, &Bounds::with_max_steps(1_000), &options);
        if outcome.result.is_fixpoint() {
            fixpoints += 1;
        }
    }
    conclude(
        4,
        looped && not_step_limit && fixpoints == 10,
        &format!(
            "toggle grammar ended as {} (period {}), {fixpoints}/10 terminating grammars settled",
            outcome.result.label(),
            match &outcome.result {
                DeriveResult::Loop { info, .. } => info.period(),
                _ => 0,
            }
        ),
    );
}

/// Boundary crossing sequences alternate directions on every run, and the
/// deepest sequences are exactly 1 for the one-pass machine and 2 for the
/// two-pass machine.
#[test]
fn criterion_5_crossing_sequences() {
    let mut runs = 0u64;
    let mut alternation_failures = 0u64;
    let mut machines: Vec<TuringMachine> = samples::differential_suite(0, 0)
        .into_iter()
        .map(|(_, tm)| tm)
        .collect();
    let config = samples::RandomTmConfig::default();
    for seed in 300..310 {
        machines.push(samples::random_tm(seed, &config));
    }
    for tm in &machines {
        for input in inputs_for(tm, 3) {
            let run = simulate(tm, &input, &SimOptions::with_max_steps(5_000))
                .expect("declared symbols");
            runs += 1;
            if !run.crossings.alternation_ok() {
                alternation_failures += 1;
            }
        }
    }

    let deepest = |tm: &TuringMachine, max_len: usize| -> usize {
        inputs_for(tm, max_len)
            .iter()
            .map(|input| {
                simulate(tm, input, &SimOptions::with_max_steps(5_000))
                    .expect("declared symbols")
                    .crossings
                    .max_sequence_len()
            })
            .max()
            .unwrap_or(0)
    };
    let sweeper_k = deepest(&samples::right_sweeper(), 5);
    let two_pass_k = deepest(&samples::two_pass_sweeper(), 5);

    conclude(
        5,
        alternation_failures == 0 && sweeper_k == 1 && two_pass_k == 2,
        &format!(
            "{runs} runs, {alternation_failures} alternation failures; \
             deepest sequences: one-pass {sweeper_k}, two-pass {two_pass_k}"
        ),
    );
}

/// The automata read off the crossing sequences agree with their machines
/// on every input up to length 6, and deleting an accepting state is
/// always caught as a disagreement.
#[test]
fn criterion_6_automaton_equivalence() {
    let started = Instant::now();
    let cases = [
        ("right-sweeper", samples::right_sweeper(), 1),
        ("two-pass-sweeper", samples::two_pass_sweeper(), 2),
    ];
    let mut details = Vec::new();
    let mut ok = true;
    for (name, tm, k) in &cases {
        let nfa = extract_nfa(tm, *k, 100_000).expect("small machines extract");
        let equivalence =
            equivalence_check(tm, &nfa, 6, 100_000).expect("runs stay within budget");
        let agreed = equivalence.agreed();

        let finals: Vec<usize> = nfa.finals.iter().copied().collect();
        let mut mutation_caught = false;
        for &idx in &finals {
            let mutated = nfa.without_final(idx);
            let check =
                equivalence_check(tm, &mutated, 6, 100_000).expect("runs stay within budget");
            if !check.agreed() {
                mutation_caught = true;
                break;
            }
        }
        if !mutation_caught && !finals.is_empty() {
            let gutted = finals.iter().fold(nfa.clone(), |acc, &idx| acc.without_final(idx));
            let check =
                equivalence_check(tm, &gutted, 6, 100_000).expect("runs stay within budget");
            mutation_caught = !check.agreed();
        }

        ok &= agreed && mutation_caught;
        details.push(format!(
            "{name}: {} states, {} inputs agreed={agreed}, mutation caught={mutation_caught}",
            nfa.state_count(),
            equivalence.inputs_checked(),
        ));
    }
    let elapsed = started.elapsed();
    ok &= elapsed < Duration::from_secs(120);
    conclude(6, ok, &format!("{}; {:.1}s", details.join("; "), elapsed.as_secs_f64()));
}

/// Per-square visit budgets separate the one-pass machine (fits in weight
/// 1, within w·(len+2) steps) from the two-pass machine (needs weight 2).
#[test]
fn criterion_7_visit_budgets() {
    let one = NonZeroU64::new(1).unwrap();
    let two = NonZeroU64::new(2).unwrap();
    let sweeper = weight_survey(&samples::right_sweeper(), one, 5, 10_000)
        .expect("declared symbols");
    let two_pass_tight = weight_survey(&samples::two_pass_sweeper(), one, 5, 10_000)
        .expect("declared symbols");
    let two_pass_loose = weight_survey(&samples::two_pass_sweeper(), two, 5, 10_000)
        .expect("declared symbols");
    let ok = sweeper.all_completed
        && sweeper.all_within_bound
        && !two_pass_tight.all_completed
        && two_pass_loose.all_completed
        && two_pass_loose.all_within_bound;
    conclude(
        7,
        ok,
        &format!(
            "one-pass@w=1 completed={} within-bound={}; two-pass@w=1 completed={}; \
             two-pass@w=2 completed={} within-bound={}",
            sweeper.all_completed,
            sweeper.all_within_bound,
            two_pass_tight.all_completed,
            two_pass_loose.all_completed,
            two_pass_loose.all_within_bound
        ),
    );
}

/// Runtime growth curves call both sweepers linear and the shuttle
/// superlinear at the default 5% tolerance.
#[test]
fn criterion_8_runtime_curves() {
    let started = Instant::now();
    let config = CurveConfig::default();
    let sweeper = curve_for_tm(&samples::right_sweeper(), "right-sweeper", &config)
        .expect("all runs halt");
    let two_pass = curve_for_tm(&samples::two_pass_sweeper(), "two-pass-sweeper", &config)
        .expect("all runs halt");
    let shuttle =
        curve_for_tm(&samples::shuttle(), "shuttle", &config).expect("all runs halt");
    let replay = curve_for_tm(&samples::shuttle(), "shuttle", &config).expect("all runs halt");
    let deterministic = replay
        .points
        .iter()
        .zip(&shuttle.points)
        .all(|(a, b)| a.n == b.n && a.mean_cost == b.mean_cost);
    let elapsed = started.elapsed();
    let ok = sweeper.verdict == CurveVerdict::BoundedByLinear
        && two_pass.verdict == CurveVerdict::BoundedByLinear
        && shuttle.verdict == CurveVerdict::Superlinear
        && deterministic
        && elapsed < Duration::from_secs(60);
    conclude(
        8,
        ok,
        &format!(
            "one-pass {}, two-pass {}, shuttle {}; deterministic replay: {deterministic}; {:.1}s",
            sweeper.verdict.label(),
            two_pass.verdict.label(),
            shuttle.verdict.label(),
            elapsed.as_secs_f64()
        ),
    );
}
