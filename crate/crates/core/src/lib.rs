//! Core library of the cglab constraint-grammar laboratory.
//!
//! The crate has three layers:
//!
//! * a nonmonotonic sequential constraint-grammar engine: cohort strings
//!   ([`cohort`]), rewrite rules ([`grammar`]), and a deterministic
//!   leftmost/first-rule derivation loop with resource bounds and loop
//!   detection ([`engine`]);
//! * a one-tape deterministic Turing machine simulator with an explicit
//!   boundary-symbol discipline, per-square weights, and crossing-sequence
//!   recording ([`tm`]);
//! * bridges between the two: a machine-to-grammar compiler ([`compile`])
//!   whose output simulates a machine three rule applications per step, and
//!   finite-state analyses — crossing-sequence replay, NFA extraction,
//!   runtime-curve measurement ([`analysis`]).
//!
//! [`samples`] holds small hand-written machines used throughout the test
//! suite and the command-line tool.

pub mod analysis;
pub mod cohort;
pub mod compile;
pub mod engine;
pub mod grammar;
pub mod samples;
pub mod tm;

pub use cohort::{CohortString, Feature, FeatureAlphabet, Reading};
pub use engine::{derive, Bounds, DerivationOutcome, DeriveResult};
pub use grammar::Grammar;
pub use tm::TuringMachine;
