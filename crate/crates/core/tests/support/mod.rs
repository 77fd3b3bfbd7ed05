//! Shared test support: a deliberately naive second interpreter for the
//! rewrite semantics (used as an oracle against the optimized engine) and
//! seeded random generators for grammars, cohort strings, and inputs.
//!
//! The reference interpreter works on plain `String`/`BTreeSet` data and
//! re-derives every decision from the documented semantics instead of
//! reusing the engine's code paths, so a bug in the engine's indexing or
//! site search cannot hide here.

#![allow(dead_code)]

use std::collections::BTreeSet;

use cglab_core::cohort::FeatureAlphabet;
use cglab_core::grammar::{ContextCondition, Pattern, Rule, RuleKind};
use cglab_core::{CohortString, Grammar, Reading};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Reference interpreter
// ---------------------------------------------------------------------------

pub type RefReading = BTreeSet<String>;
pub type RefCohort = BTreeSet<RefReading>;

/// A cohort string as plain data: each cohort is a non-empty set of
/// readings, each reading a non-empty set of tag names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefString(pub Vec<RefCohort>);

impl RefString {
    pub fn of(s: &CohortString) -> RefString {
        RefString(
            s.iter()
                .map(|c| {
                    c.readings()
                        .map(|r| r.features().map(|f| f.name().to_string()).collect())
                        .collect()
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone)]
pub struct RefCondition {
    pub offset: i64,
    pub negated: bool,
    pub tags: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub enum RefKind {
    Replace { old: BTreeSet<String>, new: RefReading },
    AddCohort { reading: RefReading },
    RemCohort { target: BTreeSet<String> },
    Select { target: BTreeSet<String> },
    Delete { target: BTreeSet<String> },
}

#[derive(Debug, Clone)]
pub struct RefRule {
    pub kind: RefKind,
    pub conditions: Vec<RefCondition>,
}

fn names(tags: &BTreeSet<cglab_core::Feature>) -> BTreeSet<String> {
    tags.iter().map(|f| f.name().to_string()).collect()
}

fn reading_names(reading: &Reading) -> RefReading {
    reading.features().map(|f| f.name().to_string()).collect()
}

pub fn ref_rules(g: &Grammar) -> Vec<RefRule> {
    g.rules
        .iter()
        .map(|rule| {
            let kind = match &rule.kind {
                RuleKind::Replace { old, new } => RefKind::Replace {
                    old: names(old.tags()),
                    new: reading_names(new),
                },
                RuleKind::AddCohort { reading } => RefKind::AddCohort {
                    reading: reading_names(reading),
                },
                RuleKind::RemCohort { target } => RefKind::RemCohort { target: names(target.tags()) },
                RuleKind::Select { target } => RefKind::Select { target: names(target.tags()) },
                RuleKind::Delete { target } => RefKind::Delete { target: names(target.tags()) },
            };
            let conditions = rule
                .conditions
                .iter()
                .map(|c| RefCondition {
                    offset: c.offset,
                    negated: c.negated,
                    tags: names(c.pattern.tags()),
                })
                .collect();
            RefRule { kind, conditions }
        })
        .collect()
}

/// Where a rule acts: on a cohort or in a gap between cohorts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefSite {
    Cohort(usize),
    Gap(usize),
}

fn reading_has(reading: &RefReading, tags: &BTreeSet<String>) -> bool {
    tags.iter().all(|t| reading.contains(t))
}

fn cohort_has(cohort: &RefCohort, tags: &BTreeSet<String>) -> bool {
    cohort.iter().any(|r| reading_has(r, tags))
}

/// A condition relative to an existing cohort. Offsets landing outside the
/// string fail positive conditions and satisfy negated ones.
fn condition_at(s: &RefString, target: usize, c: &RefCondition) -> bool {
    let q = target as i64 + c.offset;
    if q < 0 || q >= s.0.len() as i64 {
        return c.negated;
    }
    cohort_has(&s.0[q as usize], &c.tags) != c.negated
}

/// A condition relative to a gap, judged against the string as it would
/// look after inserting `inserted` there: offset 0 names the inserted
/// cohort itself, and positions past the gap shift right by one.
fn condition_at_gap(s: &RefString, gap: usize, inserted: &RefReading, c: &RefCondition) -> bool {
    let q = gap as i64 + c.offset;
    if q < 0 || q > s.0.len() as i64 {
        return c.negated;
    }
    let holds = if q == gap as i64 {
        reading_has(inserted, &c.tags)
    } else {
        let actual = if q < gap as i64 { q } else { q - 1 } as usize;
        cohort_has(&s.0[actual], &c.tags)
    };
    holds != c.negated
}

fn site_of(rule: &RefRule, s: &RefString) -> Option<RefSite> {
    let conditions_hold =
        |i: usize| rule.conditions.iter().all(|c| condition_at(s, i, c));
    match &rule.kind {
        RefKind::Replace { old, new } => (0..s.0.len()).find(|&i| {
            let cohort = &s.0[i];
            let already = cohort.len() == 1 && cohort.iter().next().unwrap() == new;
            cohort_has(cohort, old) && !already && conditions_hold(i)
        }).map(RefSite::Cohort),
        RefKind::AddCohort { reading } => (0..=s.0.len())
            .find(|&p| rule.conditions.iter().all(|c| condition_at_gap(s, p, reading, c)))
            .map(RefSite::Gap),
        RefKind::RemCohort { target } => (0..s.0.len())
            .find(|&i| cohort_has(&s.0[i], target) && conditions_hold(i))
            .map(RefSite::Cohort),
        RefKind::Select { target } | RefKind::Delete { target } => (0..s.0.len())
            .find(|&i| {
                let matching = s.0[i].iter().filter(|r| reading_has(r, target)).count();
                let rest = s.0[i].len() - matching;
                matching > 0 && rest > 0 && conditions_hold(i)
            })
            .map(RefSite::Cohort),
    }
}

/// First rule in grammar order with a site, at its leftmost site.
pub fn ref_find(rules: &[RefRule], s: &RefString) -> Option<(usize, RefSite)> {
    rules
        .iter()
        .enumerate()
        .find_map(|(idx, rule)| site_of(rule, s).map(|site| (idx, site)))
}

pub fn ref_apply(rule: &RefRule, site: RefSite, s: &mut RefString) {
    match (&rule.kind, site) {
        (RefKind::Replace { new, .. }, RefSite::Cohort(i)) => {
            s.0[i] = std::iter::once(new.clone()).collect();
        }
        (RefKind::AddCohort { reading }, RefSite::Gap(p)) => {
            s.0.insert(p, std::iter::once(reading.clone()).collect());
        }
        (RefKind::RemCohort { .. }, RefSite::Cohort(i)) => {
            s.0.remove(i);
        }
        (RefKind::Select { target }, RefSite::Cohort(i)) => {
            let kept: RefCohort =
                s.0[i].iter().filter(|r| reading_has(r, target)).cloned().collect();
            s.0[i] = kept;
        }
        (RefKind::Delete { target }, RefSite::Cohort(i)) => {
            let kept: RefCohort =
                s.0[i].iter().filter(|r| !reading_has(r, target)).cloned().collect();
            s.0[i] = kept;
        }
        (kind, site) => panic!("site {site:?} does not fit rule kind {kind:?}"),
    }
}

/// Outcome of a capped reference derivation.
pub struct RefOutcome {
    pub last: RefString,
    pub applications: u64,
    pub fixpoint: bool,
}

pub fn ref_derive(rules: &[RefRule], start: RefString, max_applications: u64) -> RefOutcome {
    let mut s = start;
    let mut applications = 0;
    loop {
        match ref_find(rules, &s) {
            None => return RefOutcome { last: s, applications, fixpoint: true },
            Some((idx, site)) => {
                if applications == max_applications {
                    return RefOutcome { last: s, applications, fixpoint: false };
                }
                let rule = rules[idx].clone();
                ref_apply(&rule, site, &mut s);
                applications += 1;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Random generators
// ---------------------------------------------------------------------------

pub const GEN_FEATURES: [&str; 4] = ["A", "B", "C", "D"];

pub fn test_alphabet() -> FeatureAlphabet {
    FeatureAlphabet::new(GEN_FEATURES).expect("valid names")
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tags(rng: &mut ChaCha8Rng, alphabet: &FeatureAlphabet, max: usize) -> BTreeSet<cglab_core::Feature> {
    let count = rng.gen_range(1..=max);
    let mut tags = BTreeSet::new();
    while tags.len() < count {
        let name = GEN_FEATURES[rng.gen_range(0..GEN_FEATURES.len())];
        tags.insert(alphabet.get(name).expect("declared").clone());
    }
    tags
}

pub fn random_reading(rng: &mut ChaCha8Rng, alphabet: &FeatureAlphabet) -> Reading {
    Reading::new(random_tags(rng, alphabet, 3)).expect("non-empty")
}

pub fn random_pattern(rng: &mut ChaCha8Rng, alphabet: &FeatureAlphabet) -> Pattern {
    Pattern::new(random_tags(rng, alphabet, 2)).expect("non-empty")
}

pub fn random_condition(rng: &mut ChaCha8Rng, alphabet: &FeatureAlphabet) -> ContextCondition {
    let offset = rng.gen_range(-2..=2);
    let pattern = random_pattern(rng, alphabet);
    if rng.gen_bool(0.4) {
        ContextCondition::not(offset, pattern)
    } else {
        ContextCondition::new(offset, pattern)
    }
}

fn random_conditions(rng: &mut ChaCha8Rng, alphabet: &FeatureAlphabet) -> Vec<ContextCondition> {
    (0..rng.gen_range(1..=2)).map(|_| random_condition(rng, alphabet)).collect()
}

/// A random rule. Insertions are kept rare so random grammars do not all
/// diverge by unbounded growth.
pub fn random_rule(rng: &mut ChaCha8Rng, alphabet: &FeatureAlphabet) -> Rule {
    let conditions = random_conditions(rng, alphabet);
    match rng.gen_range(0..9) {
        0..=2 => Rule::replace(
            random_pattern(rng, alphabet),
            random_reading(rng, alphabet),
            conditions,
        ),
        3 => Rule::add_cohort(random_reading(rng, alphabet), conditions),
        4 => Rule::rem_cohort(random_pattern(rng, alphabet), conditions),
        5..=6 => Rule::select(random_pattern(rng, alphabet), conditions),
        _ => Rule::delete(random_pattern(rng, alphabet), conditions),
    }
}

/// A random rule that only narrows reading sets; grammars built from these
/// always terminate because every application removes a reading.
pub fn random_narrowing_rule(rng: &mut ChaCha8Rng, alphabet: &FeatureAlphabet) -> Rule {
    let conditions = random_conditions(rng, alphabet);
    if rng.gen_bool(0.5) {
        Rule::select(random_pattern(rng, alphabet), conditions)
    } else {
        Rule::delete(random_pattern(rng, alphabet), conditions)
    }
}

pub fn random_grammar(rng: &mut ChaCha8Rng) -> Grammar {
    let alphabet = test_alphabet();
    let rules = (0..rng.gen_range(1..=5)).map(|_| random_rule(rng, &alphabet)).collect();
    Grammar::new(alphabet, rules)
}

pub fn random_narrowing_grammar(rng: &mut ChaCha8Rng) -> Grammar {
    let alphabet = test_alphabet();
    let rules =
        (0..rng.gen_range(1..=5)).map(|_| random_narrowing_rule(rng, &alphabet)).collect();
    Grammar::new(alphabet, rules)
}

pub fn random_string(rng: &mut ChaCha8Rng, alphabet: &FeatureAlphabet) -> CohortString {
    let cohorts = (0..rng.gen_range(1..=5))
        .map(|_| {
            let mut readings = BTreeSet::new();
            let wanted = rng.gen_range(1..=3);
            while readings.len() < wanted {
                readings.insert(random_reading(rng, alphabet));
            }
            readings.into_iter().collect::<Vec<_>>()
        })
        .collect();
    CohortString::from_readings(cohorts).expect("non-empty cohorts")
}

/// All tape words over `symbols` with length at most `max_len`, shortest
/// first, as vectors of symbol names.
pub fn words_up_to(symbols: &[&str], max_len: usize) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = vec![Vec::new()];
    let mut layer: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for word in &layer {
            for sym in symbols {
                let mut w = word.clone();
                w.push((*sym).to_string());
                next.push(w);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}
