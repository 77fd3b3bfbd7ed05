//! The derivation engine: deterministic first-rule/leftmost-site rewriting
//! with resource bounds, accounting, and loop detection.
//!
//! One derivation step scans the rules in grammar order and applies the
//! first rule that has an applicable site, at its leftmost site. Rewrites
//! that would not change the string (replacing a cohort by what it already
//! is, selecting everything, deleting nothing) are *inapplicable*, so a
//! fixpoint is always detectable. Derivations end in one of four ways:
//! fixpoint, a detected loop (the same string seen twice), an exhausted
//! resource bound, or the application budget running out.
//!
//! Three bounds shape nonmonotonic derivations: *fertility* caps how many
//! cohorts may be inserted into each original gap, *volume* caps how many
//! operations any single cohort absorbs, and *distance* caps how far
//! consecutive action sites may lie apart. With fertility and volume finite
//! the total application count is bounded by `(1+f)·n·v` for an original
//! string of length `n`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::num::NonZeroU64;

use crate::cohort::{CohortId, CohortString, Feature, Reading};
use crate::grammar::{ContextCondition, Grammar, Rule, RuleKind};

/// Resource bounds for a derivation. `None` means unbounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Bounds {
    /// Max insertions per original gap.
    pub fertility: Option<u64>,
    /// Max operations absorbed by one cohort (at least 1).
    pub volume: Option<NonZeroU64>,
    /// Max distance between consecutive action sites.
    pub distance: Option<u64>,
    /// Max rule applications.
    pub max_steps: Option<u64>,
}

impl Bounds {
    pub fn unbounded() -> Bounds {
        Bounds::default()
    }

    pub fn with_max_steps(max_steps: u64) -> Bounds {
        Bounds { max_steps: Some(max_steps), ..Bounds::default() }
    }
}

/// Which bound a derivation ran into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Fertility,
    Volume,
    Distance,
}

impl std::fmt::Display for BoundKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundKind::Fertility => "fertility",
            BoundKind::Volume => "volume",
            BoundKind::Distance => "distance",
        })
    }
}

/// An action site: a cohort position for rewrites and removals, a gap
/// position for insertions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    Cohort(usize),
    Gap(usize),
}

impl Site {
    /// The position used for distance accounting.
    pub fn position(&self) -> usize {
        match *self {
            Site::Cohort(p) | Site::Gap(p) => p,
        }
    }
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Site::Cohort(p) => write!(f, "cohort {p}"),
            Site::Gap(p) => write!(f, "gap {p}"),
        }
    }
}

/// Counters accumulated over one derivation.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    /// Rule applications performed.
    pub applications: u64,
    /// Insertions charged to each original gap.
    pub per_gap_insertions: BTreeMap<usize, u64>,
    /// Operations absorbed by each cohort (insertion counts as the new
    /// cohort's first operation; removal as its last).
    pub per_cohort_ops: BTreeMap<CohortId, u64>,
    /// Site position of the most recent application.
    pub last_target_position: Option<usize>,
    /// Candidate sites examined across all scans.
    pub scan_work: u64,
    /// Distinct strings recorded by loop detection (0 when detection is
    /// off).
    pub distinct_strings_seen: u64,
    /// Per-cohort condition evaluations, collected only on request.
    pub per_cohort_condition_checks: Option<BTreeMap<CohortId, u64>>,
}

impl RunStats {
    fn charge_cohort(&mut self, id: CohortId) -> u64 {
        let ops = self.per_cohort_ops.entry(id).or_insert(0);
        *ops += 1;
        *ops
    }

    /// Largest operation count absorbed by any single cohort.
    pub fn max_cohort_ops(&self) -> u64 {
        self.per_cohort_ops.values().copied().max().unwrap_or(0)
    }

    /// Largest insertion count charged to any single gap.
    pub fn max_gap_insertions(&self) -> u64 {
        self.per_gap_insertions.values().copied().max().unwrap_or(0)
    }
}

/// Evidence for a detected loop: the recurring string was first recorded
/// after `first_seen` applications and seen again at `detected_at`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoopInfo {
    pub first_seen: u64,
    pub detected_at: u64,
}

impl LoopInfo {
    pub fn period(&self) -> u64 {
        self.detected_at - self.first_seen
    }
}

/// How a derivation ended. Every variant carries the last string reached.
#[derive(Debug, Clone)]
pub enum DeriveResult {
    /// No rule applies anywhere.
    Fixpoint(CohortString),
    /// The same string recurred: the derivation diverges periodically.
    Loop { info: LoopInfo, last: CohortString },
    /// Applying the next rule would exceed a resource bound.
    BoundExceeded { kind: BoundKind, site: usize, last: CohortString },
    /// The application budget ran out with rules still applicable.
    StepLimit { last: CohortString },
}

impl DeriveResult {
    pub fn final_string(&self) -> &CohortString {
        match self {
            DeriveResult::Fixpoint(s)
            | DeriveResult::Loop { last: s, .. }
            | DeriveResult::BoundExceeded { last: s, .. }
            | DeriveResult::StepLimit { last: s } => s,
        }
    }

    pub fn is_fixpoint(&self) -> bool {
        matches!(self, DeriveResult::Fixpoint(_))
    }

    /// Short label for reports and process exit mapping.
    pub fn label(&self) -> &'static str {
        match self {
            DeriveResult::Fixpoint(_) => "fixpoint",
            DeriveResult::Loop { .. } => "loop",
            DeriveResult::BoundExceeded { .. } => "bound-exceeded",
            DeriveResult::StepLimit { .. } => "step-limit",
        }
    }
}

/// One applied rewrite, for traces: which rule, where, and the string it
/// produced (compact single-line form).
#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub rule_index: usize,
    pub site: Site,
    pub after: String,
}

/// Switches for [`derive`].
#[derive(Debug, Clone, Copy, Default)]
pub struct DeriveOptions {
    /// Record every intermediate string and stop on recurrence.
    pub detect_loops: bool,
    /// Keep a per-application trace.
    pub want_trace: bool,
    /// Collect per-cohort condition-evaluation counters.
    pub track_condition_checks: bool,
}

/// Result bundle of a full derivation.
#[derive(Debug, Clone)]
pub struct DerivationOutcome {
    pub result: DeriveResult,
    pub stats: RunStats,
    pub trace: Option<Vec<TraceEntry>>,
}

/// Tests one context condition relative to `target`. Offsets reaching
/// outside the string fail positive conditions and satisfy negated ones.
pub fn condition_holds(s: &CohortString, target: usize, condition: &ContextCondition) -> bool {
    let Some(q) = (target as i64).checked_add(condition.offset) else {
        return condition.negated;
    };
    if q < 0 || q as usize >= s.len() {
        return condition.negated;
    }
    let contained = s.cohort(q as usize).contains_pattern(condition.pattern.tags());
    contained != condition.negated
}

/// Condition evaluation for a hypothetical insertion: the new cohort sits
/// at gap position `p`, and offsets are relative to it.
fn condition_holds_inserted(
    s: &CohortString,
    p: usize,
    reading: &Reading,
    condition: &ContextCondition,
    counters: &mut Counters<'_>,
) -> bool {
    let Some(q) = (p as i64).checked_add(condition.offset) else {
        return condition.negated;
    };
    // Hypothetical indices run over the string with the insertion in
    // place: 0..=len. The new cohort itself answers offset 0.
    if q < 0 || q as usize > s.len() {
        return condition.negated;
    }
    let q = q as usize;
    let contained = if q == p {
        reading.is_superset(condition.pattern.tags())
    } else {
        let actual = if q < p { q } else { q - 1 };
        counters.count_condition(s, actual);
        s.cohort(actual).contains_pattern(condition.pattern.tags())
    };
    contained != condition.negated
}

/// Scan-time bookkeeping threaded through applicability tests.
struct Counters<'a> {
    stats: &'a mut RunStats,
    track_conditions: bool,
}

impl Counters<'_> {
    fn count_site(&mut self) {
        self.stats.scan_work += 1;
    }

    fn count_condition(&mut self, s: &CohortString, index: usize) {
        if self.track_conditions {
            let map = self.stats.per_cohort_condition_checks.get_or_insert_with(BTreeMap::new);
            *map.entry(s.cohort(index).id()).or_insert(0) += 1;
        }
    }

    fn condition_holds(&mut self, s: &CohortString, target: usize, c: &ContextCondition) -> bool {
        if self.track_conditions {
            let q = (target as i64).checked_add(c.offset);
            if let Some(q) = q {
                if q >= 0 && (q as usize) < s.len() {
                    self.count_condition(s, q as usize);
                }
            }
        }
        condition_holds(s, target, c)
    }
}

fn all_conditions_hold(
    s: &CohortString,
    target: usize,
    conditions: &[ContextCondition],
    counters: &mut Counters<'_>,
) -> bool {
    conditions.iter().all(|c| counters.condition_holds(s, target, c))
}

/// The partitioning every reading-level action shares: readings that carry
/// the target pattern and readings that do not.
fn split_counts(s: &CohortString, index: usize, pattern: &crate::grammar::Pattern) -> (usize, usize) {
    let mut matching = 0;
    let mut rest = 0;
    for reading in s.cohort(index).readings() {
        if reading.is_superset(pattern.tags()) {
            matching += 1;
        } else {
            rest += 1;
        }
    }
    (matching, rest)
}

/// Finds the leftmost applicable site of `rule`, if any.
fn find_site(rule: &Rule, s: &CohortString, counters: &mut Counters<'_>) -> Option<Site> {
    match &rule.kind {
        RuleKind::Replace { old, new } => (0..s.len()).find_map(|t| {
            counters.count_site();
            let cohort = s.cohort(t);
            (cohort.contains_pattern(old.tags())
                && !cohort.is_singleton(new)
                && all_conditions_hold(s, t, &rule.conditions, counters))
            .then_some(Site::Cohort(t))
        }),
        RuleKind::AddCohort { reading } => (0..=s.len()).find_map(|p| {
            counters.count_site();
            rule.conditions
                .iter()
                .all(|c| condition_holds_inserted(s, p, reading, c, counters))
                .then_some(Site::Gap(p))
        }),
        RuleKind::RemCohort { target } => (0..s.len()).find_map(|t| {
            counters.count_site();
            (s.cohort(t).contains_pattern(target.tags())
                && all_conditions_hold(s, t, &rule.conditions, counters))
            .then_some(Site::Cohort(t))
        }),
        RuleKind::Select { target } | RuleKind::Delete { target } => (0..s.len()).find_map(|t| {
            counters.count_site();
            // Applicable only when the action changes the cohort and leaves
            // it non-empty: some reading matches, some does not.
            let (matching, rest) = split_counts(s, t, target);
            (matching > 0 && rest > 0 && all_conditions_hold(s, t, &rule.conditions, counters))
                .then_some(Site::Cohort(t))
        }),
    }
}

/// Features that must occur somewhere in the string for the rule to have a
/// site: the target pattern plus every positive condition pattern. For
/// insertions the freshly added reading answers offset 0 itself, so only
/// conditions pointing elsewhere count.
fn required_features(rule: &Rule) -> Vec<&Feature> {
    let mut out: Vec<&Feature> = Vec::new();
    match &rule.kind {
        RuleKind::Replace { old, .. } => out.extend(old.tags()),
        RuleKind::RemCohort { target }
        | RuleKind::Select { target }
        | RuleKind::Delete { target } => out.extend(target.tags()),
        RuleKind::AddCohort { .. } => {}
    }
    for condition in &rule.conditions {
        let self_answered =
            matches!(rule.kind, RuleKind::AddCohort { .. }) && condition.offset == 0;
        if !condition.negated && !self_answered {
            out.extend(condition.pattern.tags());
        }
    }
    out
}

/// Precomputed rule filter: each rule is anchored on one feature that must
/// be present in the string for the rule to have a site, so scans can skip
/// rules whose anchor occurs nowhere. Large generated grammars where most
/// rules wait on a rare feature scan in near-constant time; the filter is
/// purely an optimization and never changes which rule fires.
struct RuleIndex {
    by_anchor: BTreeMap<Feature, Vec<usize>>,
    unanchored: Vec<usize>,
}

impl RuleIndex {
    fn build(g: &Grammar) -> RuleIndex {
        let required: Vec<Vec<&Feature>> = g.rules.iter().map(required_features).collect();
        let mut counts: BTreeMap<&Feature, usize> = BTreeMap::new();
        for features in &required {
            for f in features {
                *counts.entry(f).or_insert(0) += 1;
            }
        }
        let mut by_anchor: BTreeMap<Feature, Vec<usize>> = BTreeMap::new();
        let mut unanchored = Vec::new();
        for (i, features) in required.iter().enumerate() {
            // Anchor on the feature shared with the fewest other rules:
            // the most selective presence test. Ties break on name.
            let anchor = features
                .iter()
                .min_by_key(|f| (*counts.get(*f).expect("counted above"), f.name()));
            match anchor {
                Some(anchor) => by_anchor.entry((*anchor).clone()).or_default().push(i),
                None => unanchored.push(i),
            }
        }
        RuleIndex { by_anchor, unanchored }
    }

    /// Rule indices that could have a site in `s`, ascending. Rules left
    /// out provably have none: their anchor feature occurs in no reading,
    /// so either their target pattern matches nowhere or some positive
    /// condition fails at every site.
    fn candidates(&self, s: &CohortString) -> Vec<usize> {
        let mut present: BTreeSet<&Feature> = BTreeSet::new();
        for cohort in s.iter() {
            for reading in cohort.readings() {
                present.extend(reading.features());
            }
        }
        let mut out = self.unanchored.clone();
        for feature in present {
            if let Some(rules) = self.by_anchor.get(feature) {
                out.extend_from_slice(rules);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Scans rules in grammar order and returns the first rule with an
/// applicable site, together with its leftmost site.
pub fn find_application(g: &Grammar, s: &CohortString) -> Option<(usize, Site)> {
    let mut scratch = RunStats::default();
    find_application_counting(
        g,
        s,
        None,
        &mut Counters { stats: &mut scratch, track_conditions: false },
    )
}

fn find_application_counting(
    g: &Grammar,
    s: &CohortString,
    index: Option<&RuleIndex>,
    counters: &mut Counters<'_>,
) -> Option<(usize, Site)> {
    match index {
        Some(index) => index
            .candidates(s)
            .into_iter()
            .find_map(|i| find_site(&g.rules[i], s, counters).map(|site| (i, site))),
        None => g
            .rules
            .iter()
            .enumerate()
            .find_map(|(i, rule)| find_site(rule, s, counters).map(|site| (i, site))),
    }
}

/// Why a single step could not be applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepBlock {
    /// No rule applies: the string is a fixpoint.
    Fixpoint,
    /// The found application would exceed a bound.
    Bound { kind: BoundKind, site: usize },
}

/// Applies one derivation step in place. On success returns the applied
/// (rule index, site); otherwise reports a fixpoint or the bound that the
/// pending application would have exceeded. `stats` is updated only on
/// success.
pub fn step(
    g: &Grammar,
    s: &mut CohortString,
    bounds: &Bounds,
    stats: &mut RunStats,
) -> Result<(usize, Site), StepBlock> {
    step_with(g, s, bounds, stats, false, None)
}

fn step_with(
    g: &Grammar,
    s: &mut CohortString,
    bounds: &Bounds,
    stats: &mut RunStats,
    track_conditions: bool,
    index: Option<&RuleIndex>,
) -> Result<(usize, Site), StepBlock> {
    let (rule_index, site) = {
        let mut counters = Counters { stats, track_conditions };
        find_application_counting(g, s, index, &mut counters).ok_or(StepBlock::Fixpoint)?
    };
    let position = site.position();

    // Bound checks happen before the string is touched, in a fixed order:
    // fertility, volume, distance.
    if let (Site::Gap(p), Some(f)) = (site, bounds.fertility) {
        let gap = s.gap_of_position(p);
        let used = stats.per_gap_insertions.get(&gap).copied().unwrap_or(0);
        if used + 1 > f {
            return Err(StepBlock::Bound { kind: BoundKind::Fertility, site: position });
        }
    }
    if let (Site::Cohort(t), Some(v)) = (site, bounds.volume) {
        let id = s.cohort(t).id();
        let used = stats.per_cohort_ops.get(&id).copied().unwrap_or(0);
        if used + 1 > v.get() {
            return Err(StepBlock::Bound { kind: BoundKind::Volume, site: position });
        }
    }
    if let (Some(m), Some(last)) = (bounds.distance, stats.last_target_position) {
        let gap_distance = position.abs_diff(last) as u64;
        if gap_distance > m {
            return Err(StepBlock::Bound { kind: BoundKind::Distance, site: position });
        }
    }

    let rule = &g.rules[rule_index];
    match (&rule.kind, site) {
        (RuleKind::Replace { new, .. }, Site::Cohort(t)) => {
            let mut readings = std::collections::BTreeSet::new();
            readings.insert(new.clone());
            stats.charge_cohort(s.cohort(t).id());
            s.set_readings(t, readings);
        }
        (RuleKind::Select { target }, Site::Cohort(t)) => {
            let kept = s
                .cohort(t)
                .readings()
                .filter(|r| r.is_superset(target.tags()))
                .cloned()
                .collect();
            stats.charge_cohort(s.cohort(t).id());
            s.set_readings(t, kept);
        }
        (RuleKind::Delete { target }, Site::Cohort(t)) => {
            let kept = s
                .cohort(t)
                .readings()
                .filter(|r| !r.is_superset(target.tags()))
                .cloned()
                .collect();
            stats.charge_cohort(s.cohort(t).id());
            s.set_readings(t, kept);
        }
        (RuleKind::RemCohort { .. }, Site::Cohort(t)) => {
            let removed = s.remove_cohort(t);
            stats.charge_cohort(removed.id());
        }
        (RuleKind::AddCohort { reading }, Site::Gap(p)) => {
            let (id, gap) = s.insert_cohort(p, reading.clone());
            stats.charge_cohort(id);
            *stats.per_gap_insertions.entry(gap).or_insert(0) += 1;
        }
        (kind, site) => unreachable!("rule kind {kind:?} paired with site {site:?}"),
    }
    stats.applications += 1;
    stats.last_target_position = Some(position);
    Ok((rule_index, site))
}

/// Runs a derivation to fixpoint, loop, bound, or step limit.
pub fn derive(
    g: &Grammar,
    s0: CohortString,
    bounds: &Bounds,
    options: &DeriveOptions,
) -> DerivationOutcome {
    let mut s = s0;
    let mut stats = RunStats::default();
    let mut trace = options.want_trace.then(Vec::new);
    let mut seen: Option<HashMap<String, u64>> = options.detect_loops.then(HashMap::new);
    let index = RuleIndex::build(g);

    if let Some(seen) = seen.as_mut() {
        seen.insert(s.serialize(), 0);
        stats.distinct_strings_seen = 1;
    }

    loop {
        if let Some(max) = bounds.max_steps {
            if stats.applications >= max {
                // Budget spent: distinguish a fixpoint reached exactly at
                // the limit from rules still pending.
                let pending = {
                    let mut counters =
                        Counters { stats: &mut stats, track_conditions: false };
                    find_application_counting(g, &s, Some(&index), &mut counters)
                };
                if pending.is_none() {
                    return DerivationOutcome { result: DeriveResult::Fixpoint(s), stats, trace };
                }
                return DerivationOutcome {
                    result: DeriveResult::StepLimit { last: s },
                    stats,
                    trace,
                };
            }
        }
        match step_with(
            g,
            &mut s,
            bounds,
            &mut stats,
            options.track_condition_checks,
            Some(&index),
        ) {
            Ok((rule_index, site)) => {
                if let Some(trace) = trace.as_mut() {
                    trace.push(TraceEntry { rule_index, site, after: s.compact() });
                }
                if let Some(seen) = seen.as_mut() {
                    let key = s.serialize();
                    match seen.get(&key) {
                        Some(&first_seen) => {
                            let info =
                                LoopInfo { first_seen, detected_at: stats.applications };
                            stats.distinct_strings_seen = seen.len() as u64;
                            return DerivationOutcome {
                                result: DeriveResult::Loop { info, last: s },
                                stats,
                                trace,
                            };
                        }
                        None => {
                            seen.insert(key, stats.applications);
                            stats.distinct_strings_seen = seen.len() as u64;
                        }
                    }
                }
            }
            Err(StepBlock::Fixpoint) => {
                return DerivationOutcome { result: DeriveResult::Fixpoint(s), stats, trace }
            }
            Err(StepBlock::Bound { kind, site }) => {
                return DerivationOutcome {
                    result: DeriveResult::BoundExceeded { kind, site, last: s },
                    stats,
                    trace,
                }
            }
        }
    }
}

/// Checks the application-count bound `applications ≤ (1+f)·n·v` for a run
/// completed under enforced fertility `f` and volume `v` on an original
/// string of length `n`.
pub fn check_application_bound(stats: &RunStats, fertility: u64, volume: u64, n: u64) -> bool {
    stats.applications <= (1 + fertility) * n * volume
}
