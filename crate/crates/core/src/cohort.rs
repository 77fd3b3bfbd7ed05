//! Cohort strings: the data model the rewrite engine operates on.
//!
//! A *feature* is an interned token. A *reading* is a non-empty set of
//! features, a *cohort* a non-empty set of readings, and a *cohort string* a
//! sequence of cohorts. Cohorts carry a stable identity (used for
//! per-cohort operation accounting) and an origin tag that remembers whether
//! they were part of the original string or inserted later, and into which
//! original gap — the basis for fertility accounting.
//!
//! The module also owns the three line-oriented text formats: cohort
//! streams, feature alphabets, and lexicons.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Name of the left boundary feature, always present in an alphabet.
pub const LB: &str = "LB";
/// Name of the right boundary feature, always present in an alphabet.
pub const RB: &str = "RB";

/// Characters that may not appear in feature names. Parens, pipe and quote
/// are format syntax; `#` starts a comment line.
const RESERVED: &[char] = &['(', ')', '|', '"', '#'];

/// Errors raised by cohort-string, alphabet, and lexicon construction.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CohortError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: feature `{name}` is not declared in the alphabet")]
    UndeclaredFeature { line: usize, name: String },
    #[error("line {line}: empty cohort or reading")]
    EmptyCohort { line: usize },
    #[error("token {position}: `{token}` has no lexicon entry")]
    UnknownToken { position: usize, token: String },
    #[error("`{name}` is not a valid feature name")]
    BadFeatureName { name: String },
}

/// An interned feature token. Compared, hashed, and ordered by name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Feature(Arc<str>);

impl Feature {
    /// Interns `name` as a feature. Names are non-empty tokens without
    /// whitespace or reserved punctuation.
    pub fn new(name: &str) -> Result<Feature, CohortError> {
        if name.is_empty()
            || name.chars().any(|c| c.is_whitespace() || RESERVED.contains(&c))
        {
            return Err(CohortError::BadFeatureName { name: name.to_string() });
        }
        Ok(Feature(Arc::from(name)))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An ordered set of declared features. `LB` and `RB` are always members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureAlphabet {
    order: Vec<Feature>,
    members: BTreeSet<Feature>,
}

impl FeatureAlphabet {
    /// Builds an alphabet from feature names. The boundary features are
    /// added implicitly (listing them again is harmless); duplicates
    /// collapse.
    pub fn new<I, S>(names: I) -> Result<FeatureAlphabet, CohortError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut alphabet = FeatureAlphabet { order: Vec::new(), members: BTreeSet::new() };
        alphabet.push(Feature::new(LB).expect("LB is a valid name"));
        alphabet.push(Feature::new(RB).expect("RB is a valid name"));
        for name in names {
            alphabet.push(Feature::new(name.as_ref())?);
        }
        Ok(alphabet)
    }

    fn push(&mut self, feature: Feature) {
        if self.members.insert(feature.clone()) {
            self.order.push(feature);
        }
    }

    /// Parses an alphabet file: the keyword `FEATURES` followed by
    /// whitespace-separated names. `#` lines are comments.
    pub fn parse(text: &str) -> Result<FeatureAlphabet, CohortError> {
        let mut tokens = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .flat_map(str::split_whitespace);
        match tokens.next() {
            Some("FEATURES") => FeatureAlphabet::new(tokens),
            other => Err(CohortError::Syntax {
                line: 1,
                reason: format!(
                    "expected `FEATURES` header, found {}",
                    other.map_or_else(|| "end of input".to_string(), |t| format!("`{t}`"))
                ),
            }),
        }
    }

    /// Looks a declared feature up by name.
    pub fn get(&self, name: &str) -> Option<&Feature> {
        // BTreeSet cannot be queried by &str through an Arc<str> key, and
        // alphabets are small; scan in declaration order.
        self.order.iter().find(|f| f.name() == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// Declared features in declaration order (boundaries first).
    pub fn features(&self) -> impl Iterator<Item = &Feature> {
        self.order.iter()
    }

    /// Number of declared features, boundaries included.
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        false // LB and RB are always present
    }

    /// Extends the alphabet with a feature, returning the interned handle.
    pub fn insert(&mut self, name: &str) -> Result<Feature, CohortError> {
        let feature = Feature::new(name)?;
        self.push(feature.clone());
        Ok(feature)
    }
}

impl fmt::Display for FeatureAlphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FEATURES")?;
        for feature in &self.order {
            write!(f, " {feature}")?;
        }
        Ok(())
    }
}

/// A non-empty set of features.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Reading(BTreeSet<Feature>);

impl Reading {
    pub fn new(features: BTreeSet<Feature>) -> Option<Reading> {
        if features.is_empty() {
            None
        } else {
            Some(Reading(features))
        }
    }

    /// Convenience constructor from names resolved against an alphabet.
    pub fn from_names(
        names: &[&str],
        alphabet: &FeatureAlphabet,
    ) -> Result<Reading, CohortError> {
        let mut set = BTreeSet::new();
        for name in names {
            match alphabet.get(name) {
                Some(f) => {
                    set.insert(f.clone());
                }
                None => {
                    return Err(CohortError::UndeclaredFeature {
                        line: 0,
                        name: name.to_string(),
                    })
                }
            }
        }
        Reading::new(set).ok_or(CohortError::EmptyCohort { line: 0 })
    }

    pub fn features(&self) -> impl Iterator<Item = &Feature> {
        self.0.iter()
    }

    pub fn contains(&self, feature: &Feature) -> bool {
        self.0.contains(feature)
    }

    /// True when this reading carries every feature in `tags`: the
    /// containment test pattern matching is built on.
    pub fn is_superset(&self, tags: &BTreeSet<Feature>) -> bool {
        tags.iter().all(|t| self.0.contains(t))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }
}

impl fmt::Display for Reading {
    /// Tags in sorted order, space-separated.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for feature in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{feature}")?;
            first = false;
        }
        Ok(())
    }
}

/// Stable identity of a cohort within one derivation. Fresh ids are
/// assigned monotonically; rewrites that keep a cohort in place keep its id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CohortId(pub u64);

impl fmt::Display for CohortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Where a cohort came from: position `i` of the original string, or an
/// insertion into original gap `g`.
///
/// Gaps are numbered by the original cohort they precede: an insertion
/// anywhere before original cohort `g` (and after original cohort `g-1`)
/// charges gap `g`. Insertions after the last original cohort are folded
/// into the last gap so that an original string of length `n` has exactly
/// `n` gap budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Original(usize),
    Inserted { gap: usize },
}

/// A non-empty set of readings with identity and origin.
#[derive(Debug, Clone)]
pub struct Cohort {
    id: CohortId,
    origin: Origin,
    readings: BTreeSet<Reading>,
}

impl Cohort {
    pub fn id(&self) -> CohortId {
        self.id
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn readings(&self) -> impl Iterator<Item = &Reading> {
        self.readings.iter()
    }

    pub fn reading_count(&self) -> usize {
        self.readings.len()
    }

    /// True when some reading carries every feature in `tags`.
    pub fn contains_pattern(&self, tags: &BTreeSet<Feature>) -> bool {
        self.readings.iter().any(|r| r.is_superset(tags))
    }

    /// True when the cohort is exactly the singleton `{reading}`.
    pub fn is_singleton(&self, reading: &Reading) -> bool {
        self.readings.len() == 1 && self.readings.contains(reading)
    }
}

impl fmt::Display for Cohort {
    /// Readings in sorted order, ` | `-separated.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for reading in &self.readings {
            if !first {
                f.write_str(" | ")?;
            }
            write!(f, "{reading}")?;
            first = false;
        }
        Ok(())
    }
}

/// A sequence of cohorts plus the bookkeeping the engine needs: the
/// original length (fixed at construction) and a fresh-id counter.
#[derive(Debug, Clone)]
pub struct CohortString {
    cohorts: Vec<Cohort>,
    original_len: usize,
    next_id: u64,
}

impl CohortString {
    /// Builds a string from per-cohort reading sets, all marked original.
    pub fn from_readings(cohorts: Vec<Vec<Reading>>) -> Result<CohortString, CohortError> {
        let mut out = CohortString { cohorts: Vec::new(), original_len: 0, next_id: 0 };
        for readings in cohorts {
            let set: BTreeSet<Reading> = readings.into_iter().collect();
            if set.is_empty() {
                return Err(CohortError::EmptyCohort { line: 0 });
            }
            let id = CohortId(out.next_id);
            out.next_id += 1;
            out.cohorts.push(Cohort { id, origin: Origin::Original(out.original_len), readings: set });
            out.original_len += 1;
        }
        Ok(out)
    }

    /// Parses the cohort-stream format: one cohort per line, readings
    /// ` | `-separated, tags space-separated. Blank lines and `#` comment
    /// lines are ignored. Every tag must be declared in `alphabet`.
    pub fn parse(text: &str, alphabet: &FeatureAlphabet) -> Result<CohortString, CohortError> {
        let mut cohorts = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut readings = Vec::new();
            for part in line.split('|') {
                let mut tags = BTreeSet::new();
                for token in part.split_whitespace() {
                    match alphabet.get(token) {
                        Some(f) => {
                            tags.insert(f.clone());
                        }
                        None => {
                            // Distinguish undeclared-but-plausible names
                            // from outright bad tokens.
                            Feature::new(token).map_err(|_| CohortError::Syntax {
                                line: line_no,
                                reason: format!("`{token}` is not a valid feature token"),
                            })?;
                            return Err(CohortError::UndeclaredFeature {
                                line: line_no,
                                name: token.to_string(),
                            });
                        }
                    }
                }
                match Reading::new(tags) {
                    Some(r) => readings.push(r),
                    None => return Err(CohortError::EmptyCohort { line: line_no }),
                }
            }
            cohorts.push(readings);
        }
        CohortString::from_readings(cohorts)
    }

    pub fn len(&self) -> usize {
        self.cohorts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cohorts.is_empty()
    }

    /// Length of the original string this derivation started from.
    pub fn original_len(&self) -> usize {
        self.original_len
    }

    pub fn cohort(&self, index: usize) -> &Cohort {
        &self.cohorts[index]
    }

    pub fn get(&self, index: usize) -> Option<&Cohort> {
        self.cohorts.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Cohort> {
        self.cohorts.iter()
    }

    /// The original gap an insertion at position `position` falls into: the
    /// original index of the first original cohort at or after it, with
    /// insertions past the last original cohort folded into the last gap.
    pub fn gap_of_position(&self, position: usize) -> usize {
        for cohort in &self.cohorts[position.min(self.cohorts.len())..] {
            if let Origin::Original(i) = cohort.origin {
                return i;
            }
        }
        self.original_len.saturating_sub(1)
    }

    /// Replaces the readings of cohort `index`, keeping its identity.
    /// Building block for the engine; `readings` must be non-empty.
    pub fn set_readings(&mut self, index: usize, readings: BTreeSet<Reading>) {
        assert!(!readings.is_empty(), "a cohort must keep at least one reading");
        self.cohorts[index].readings = readings;
    }

    /// Inserts a fresh singleton cohort at `position`, returning its id and
    /// the original gap it was charged to.
    pub fn insert_cohort(&mut self, position: usize, reading: Reading) -> (CohortId, usize) {
        let gap = self.gap_of_position(position);
        let id = CohortId(self.next_id);
        self.next_id += 1;
        let mut readings = BTreeSet::new();
        readings.insert(reading);
        self.cohorts.insert(position, Cohort { id, origin: Origin::Inserted { gap }, readings });
        (id, gap)
    }

    /// Removes and returns the cohort at `position`.
    pub fn remove_cohort(&mut self, position: usize) -> Cohort {
        self.cohorts.remove(position)
    }

    /// Canonical multi-line serialization: one cohort per line, readings
    /// and tags in sorted order. Parsing the result reproduces the same
    /// reading structure; an empty sequence serializes to the empty string.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for cohort in &self.cohorts {
            out.push_str(&cohort.to_string());
            out.push('\n');
        }
        out
    }

    /// Single-line form for traces and diagnostics: `[A B|C] [RB]`.
    pub fn compact(&self) -> String {
        let mut out = String::new();
        for (i, cohort) in self.cohorts.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push('[');
            let mut first = true;
            for reading in &cohort.readings {
                if !first {
                    out.push('|');
                }
                out.push_str(&reading.to_string());
                first = false;
            }
            out.push(']');
        }
        out
    }

    /// True when both strings carry the same reading structure, ignoring
    /// cohort ids and origins.
    pub fn same_readings(&self, other: &CohortString) -> bool {
        self.cohorts.len() == other.cohorts.len()
            && self
                .cohorts
                .iter()
                .zip(&other.cohorts)
                .all(|(a, b)| a.readings == b.readings)
    }
}

impl fmt::Display for CohortString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

/// A token-to-readings table mapping surface tokens to cohorts.
#[derive(Debug, Clone)]
pub struct LexiconTable {
    entries: BTreeMap<String, Vec<Reading>>,
}

impl LexiconTable {
    /// Parses the lexicon format: `token := tag ... | tag ...` per line,
    /// with blank lines and `#` comments ignored.
    pub fn parse(text: &str, alphabet: &FeatureAlphabet) -> Result<LexiconTable, CohortError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (token, rhs) = line.split_once(":=").ok_or_else(|| CohortError::Syntax {
                line: line_no,
                reason: "expected `token := readings`".to_string(),
            })?;
            let token = token.trim();
            if token.is_empty() || token.split_whitespace().count() != 1 {
                return Err(CohortError::Syntax {
                    line: line_no,
                    reason: "entry token must be a single word".to_string(),
                });
            }
            let mut readings = Vec::new();
            for part in rhs.split('|') {
                let mut tags = BTreeSet::new();
                for name in part.split_whitespace() {
                    match alphabet.get(name) {
                        Some(f) => {
                            tags.insert(f.clone());
                        }
                        None => {
                            return Err(CohortError::UndeclaredFeature {
                                line: line_no,
                                name: name.to_string(),
                            })
                        }
                    }
                }
                match Reading::new(tags) {
                    Some(r) => readings.push(r),
                    None => return Err(CohortError::EmptyCohort { line: line_no }),
                }
            }
            if entries.insert(token.to_string(), readings).is_some() {
                return Err(CohortError::Syntax {
                    line: line_no,
                    reason: format!("duplicate lexicon entry for `{token}`"),
                });
            }
        }
        Ok(LexiconTable { entries })
    }

    pub fn get(&self, token: &str) -> Option<&[Reading]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Maps a token sequence to a cohort string; every token must have an
    /// entry.
    pub fn apply(&self, tokens: &[&str]) -> Result<CohortString, CohortError> {
        let mut cohorts = Vec::new();
        for (position, token) in tokens.iter().enumerate() {
            match self.entries.get(*token) {
                Some(readings) => cohorts.push(readings.clone()),
                None => {
                    return Err(CohortError::UnknownToken {
                        position,
                        token: token.to_string(),
                    })
                }
            }
        }
        CohortString::from_readings(cohorts)
    }
}
