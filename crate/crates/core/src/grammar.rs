//! Rewrite rules and the grammar file format.
//!
//! A grammar is an ordered list of rules over a feature alphabet. Rules
//! come in five kinds — `REPLACE`, `ADDCOHORT`, `REMCOHORT`, `SELECT`,
//! `DELETE` — and every rule carries at least one context condition
//! `(d tags)` or `(d NOT tags)`: the cohort `d` positions away from the
//! action site must (must not) contain the given tags.
//!
//! Rule order is meaningful: the derivation engine always applies the first
//! applicable rule in grammar order.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::cohort::{CohortError, Feature, FeatureAlphabet, Reading};

/// Errors raised while building or parsing grammars.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: feature `{name}` is not declared in the FEATURES header")]
    UndeclaredFeature { line: usize, name: String },
    #[error("line {line}: a rule needs at least one context condition")]
    MissingConditions { line: usize },
    #[error(transparent)]
    Cohort(#[from] CohortError),
}

/// A non-empty tag set matched by containment: a cohort matches when some
/// reading carries every tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern(BTreeSet<Feature>);

impl Pattern {
    pub fn new(tags: BTreeSet<Feature>) -> Option<Pattern> {
        if tags.is_empty() {
            None
        } else {
            Some(Pattern(tags))
        }
    }

    pub fn from_names(names: &[&str], alphabet: &FeatureAlphabet) -> Result<Pattern, CohortError> {
        Reading::from_names(names, alphabet).map(|r| Pattern(r.features().cloned().collect()))
    }

    pub fn tags(&self) -> &BTreeSet<Feature> {
        &self.0
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for tag in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{tag}")?;
            first = false;
        }
        Ok(())
    }
}

/// A relative context test: the cohort `offset` positions from the action
/// site must contain `pattern` (or must not, when `negated`). Positions
/// outside the string fail positive conditions and satisfy negated ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextCondition {
    pub offset: i64,
    pub negated: bool,
    pub pattern: Pattern,
}

impl ContextCondition {
    pub fn new(offset: i64, pattern: Pattern) -> ContextCondition {
        ContextCondition { offset, negated: false, pattern }
    }

    pub fn not(offset: i64, pattern: Pattern) -> ContextCondition {
        ContextCondition { offset, negated: true, pattern }
    }
}

impl fmt::Display for ContextCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "({} NOT {})", self.offset, self.pattern)
        } else {
            write!(f, "({} {})", self.offset, self.pattern)
        }
    }
}

/// What a rule does at its action site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleKind {
    /// Rewrite the leftmost cohort containing `old` to the singleton
    /// `{new}`, keeping the cohort's identity.
    Replace { old: Pattern, new: Reading },
    /// Insert a fresh singleton cohort `{reading}` at the leftmost gap
    /// where all conditions hold relative to the inserted position.
    AddCohort { reading: Reading },
    /// Remove the leftmost cohort containing `target`.
    RemCohort { target: Pattern },
    /// Keep only the readings containing `target` in the leftmost matching
    /// cohort.
    Select { target: Pattern },
    /// Drop the readings containing `target` in the leftmost matching
    /// cohort, never emptying it.
    Delete { target: Pattern },
}

/// One rewrite rule: an action plus its non-empty condition list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub kind: RuleKind,
    pub conditions: Vec<ContextCondition>,
}

impl Rule {
    /// Builds a rule, rejecting an empty condition list.
    pub fn new(kind: RuleKind, conditions: Vec<ContextCondition>) -> Result<Rule, GrammarError> {
        if conditions.is_empty() {
            return Err(GrammarError::MissingConditions { line: 0 });
        }
        Ok(Rule { kind, conditions })
    }

    pub fn replace(old: Pattern, new: Reading, conditions: Vec<ContextCondition>) -> Rule {
        Rule::new(RuleKind::Replace { old, new }, conditions).expect("non-empty conditions")
    }

    pub fn add_cohort(reading: Reading, conditions: Vec<ContextCondition>) -> Rule {
        Rule::new(RuleKind::AddCohort { reading }, conditions).expect("non-empty conditions")
    }

    pub fn rem_cohort(target: Pattern, conditions: Vec<ContextCondition>) -> Rule {
        Rule::new(RuleKind::RemCohort { target }, conditions).expect("non-empty conditions")
    }

    pub fn select(target: Pattern, conditions: Vec<ContextCondition>) -> Rule {
        Rule::new(RuleKind::Select { target }, conditions).expect("non-empty conditions")
    }

    pub fn delete(target: Pattern, conditions: Vec<ContextCondition>) -> Rule {
        Rule::new(RuleKind::Delete { target }, conditions).expect("non-empty conditions")
    }

    pub fn keyword(&self) -> &'static str {
        match self.kind {
            RuleKind::Replace { .. } => "REPLACE",
            RuleKind::AddCohort { .. } => "ADDCOHORT",
            RuleKind::RemCohort { .. } => "REMCOHORT",
            RuleKind::Select { .. } => "SELECT",
            RuleKind::Delete { .. } => "DELETE",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.keyword())?;
        match &self.kind {
            RuleKind::Replace { old, new } => write!(f, " ({old}) ({new})")?,
            RuleKind::AddCohort { reading } => write!(f, " ({reading})")?,
            RuleKind::RemCohort { target }
            | RuleKind::Select { target }
            | RuleKind::Delete { target } => write!(f, " ({target})")?,
        }
        for condition in &self.conditions {
            write!(f, " {condition}")?;
        }
        Ok(())
    }
}

/// An ordered rule list over a feature alphabet.
#[derive(Debug, Clone)]
pub struct Grammar {
    pub alphabet: FeatureAlphabet,
    pub rules: Vec<Rule>,
}

impl Grammar {
    pub fn new(alphabet: FeatureAlphabet, rules: Vec<Rule>) -> Grammar {
        Grammar { alphabet, rules }
    }

    /// Parses the grammar file format: an optional `FEATURES` header line
    /// followed by one rule per line. With a header, every tag must be
    /// declared; without one, the alphabet is inferred from the rules.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Grammar, GrammarError> {
        let mut lines = Vec::new(); // (line_no, content)
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            lines.push((idx + 1, line));
        }

        let mut declared = None;
        if let Some(&(line_no, first)) = lines.first() {
            if first.starts_with("FEATURES") {
                let names: Vec<&str> = first.split_whitespace().skip(1).collect();
                let alphabet = FeatureAlphabet::new(names).map_err(|e| match e {
                    CohortError::BadFeatureName { name } => GrammarError::Syntax {
                        line: line_no,
                        reason: format!("`{name}` is not a valid feature name"),
                    },
                    other => GrammarError::Cohort(other),
                })?;
                declared = Some(alphabet);
                lines.remove(0);
            }
        }

        // Without a header the alphabet is grown on demand; with one,
        // unknown names are errors.
        let mut alphabet = declared.clone().unwrap_or_else(|| {
            FeatureAlphabet::new(std::iter::empty::<&str>()).expect("empty alphabet")
        });
        let strict = declared.is_some();

        let mut rules = Vec::new();
        for (line_no, line) in lines {
            rules.push(parse_rule(line, line_no, &mut alphabet, strict)?);
        }
        Ok(Grammar { alphabet, rules })
    }

    /// Canonical text form: `FEATURES` header plus one rule per line.
    pub fn serialize(&self) -> String {
        let mut out = self.alphabet.to_string();
        out.push('\n');
        for rule in &self.rules {
            out.push_str(&rule.to_string());
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

/// Splits a rule line into its parenthesized groups, checking that nothing
/// but whitespace sits between them.
fn split_groups(rest: &str, line: usize) -> Result<Vec<Vec<&str>>, GrammarError> {
    let mut groups = Vec::new();
    let mut chars = rest.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c.is_whitespace() {
            continue;
        }
        if c != '(' {
            return Err(GrammarError::Syntax {
                line,
                reason: format!("expected `(` at byte {i}, found `{c}`"),
            });
        }
        let start = i + 1;
        let mut end = None;
        for (j, d) in chars.by_ref() {
            if d == ')' {
                end = Some(j);
                break;
            }
            if d == '(' {
                return Err(GrammarError::Syntax {
                    line,
                    reason: "nested `(` inside a group".to_string(),
                });
            }
        }
        let end = end.ok_or_else(|| GrammarError::Syntax {
            line,
            reason: "unclosed `(`".to_string(),
        })?;
        groups.push(rest[start..end].split_whitespace().collect());
    }
    Ok(groups)
}

/// Resolves tag names against the alphabet, growing it in inferred mode.
fn resolve_tags(
    names: &[&str],
    alphabet: &mut FeatureAlphabet,
    strict: bool,
    line: usize,
) -> Result<BTreeSet<Feature>, GrammarError> {
    let mut tags = BTreeSet::new();
    for name in names {
        let feature = match alphabet.get(name) {
            Some(f) => f.clone(),
            None if strict => {
                return Err(GrammarError::UndeclaredFeature { line, name: name.to_string() })
            }
            None => alphabet.insert(name).map_err(|_| GrammarError::Syntax {
                line,
                reason: format!("`{name}` is not a valid feature name"),
            })?,
        };
        tags.insert(feature);
    }
    Ok(tags)
}

fn group_pattern(
    names: &[&str],
    alphabet: &mut FeatureAlphabet,
    strict: bool,
    line: usize,
) -> Result<Pattern, GrammarError> {
    Pattern::new(resolve_tags(names, alphabet, strict, line)?)
        .ok_or(GrammarError::Syntax { line, reason: "empty tag group".to_string() })
}

fn group_reading(
    names: &[&str],
    alphabet: &mut FeatureAlphabet,
    strict: bool,
    line: usize,
) -> Result<Reading, GrammarError> {
    Reading::new(resolve_tags(names, alphabet, strict, line)?)
        .ok_or(GrammarError::Syntax { line, reason: "empty tag group".to_string() })
}

fn group_condition(
    names: &[&str],
    alphabet: &mut FeatureAlphabet,
    strict: bool,
    line: usize,
) -> Result<ContextCondition, GrammarError> {
    let offset_token = names.first().ok_or_else(|| GrammarError::Syntax {
        line,
        reason: "empty condition group".to_string(),
    })?;
    let offset: i64 = offset_token.parse().map_err(|_| GrammarError::Syntax {
        line,
        reason: format!("condition must start with an integer offset, found `{offset_token}`"),
    })?;
    let (negated, tag_names) = match names.get(1) {
        Some(&"NOT") => (true, &names[2..]),
        _ => (false, &names[1..]),
    };
    if tag_names.is_empty() {
        return Err(GrammarError::Syntax {
            line,
            reason: "condition needs at least one tag".to_string(),
        });
    }
    let pattern = group_pattern(tag_names, alphabet, strict, line)?;
    Ok(ContextCondition { offset, negated, pattern })
}

fn parse_rule(
    line: &str,
    line_no: usize,
    alphabet: &mut FeatureAlphabet,
    strict: bool,
) -> Result<Rule, GrammarError> {
    let (keyword, rest) = line.split_once(|c: char| c.is_whitespace()).ok_or_else(|| {
        GrammarError::Syntax { line: line_no, reason: "rule has no argument groups".to_string() }
    })?;
    let groups = split_groups(rest, line_no)?;
    // `INSCOHORT` is an accepted alias for `ADDCOHORT`; it canonicalizes on
    // output.
    let head_arity = match keyword {
        "REPLACE" => 2,
        "ADDCOHORT" | "INSCOHORT" | "REMCOHORT" | "SELECT" | "DELETE" => 1,
        other => {
            return Err(GrammarError::Syntax {
                line: line_no,
                reason: format!("unknown rule keyword `{other}`"),
            })
        }
    };
    if groups.len() < head_arity {
        return Err(GrammarError::Syntax {
            line: line_no,
            reason: format!("{keyword} needs {head_arity} tag group(s) before its conditions"),
        });
    }
    let kind = match keyword {
        "REPLACE" => RuleKind::Replace {
            old: group_pattern(&groups[0], alphabet, strict, line_no)?,
            new: group_reading(&groups[1], alphabet, strict, line_no)?,
        },
        "ADDCOHORT" | "INSCOHORT" => RuleKind::AddCohort {
            reading: group_reading(&groups[0], alphabet, strict, line_no)?,
        },
        "REMCOHORT" => RuleKind::RemCohort {
            target: group_pattern(&groups[0], alphabet, strict, line_no)?,
        },
        "SELECT" => RuleKind::Select {
            target: group_pattern(&groups[0], alphabet, strict, line_no)?,
        },
        "DELETE" => RuleKind::Delete {
            target: group_pattern(&groups[0], alphabet, strict, line_no)?,
        },
        _ => unreachable!("keyword checked above"),
    };
    let mut conditions = Vec::new();
    for group in &groups[head_arity..] {
        conditions.push(group_condition(group, alphabet, strict, line_no)?);
    }
    if conditions.is_empty() {
        return Err(GrammarError::MissingConditions { line: line_no });
    }
    Ok(Rule { kind, conditions })
}
