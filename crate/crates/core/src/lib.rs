//! SQL injection screening built on a single-pattern Aho-Corasick automaton.
//!
//! A query is normalized, scanned against every pattern of the static pattern
//! list, and classified as rejected (exact match), alarm (partial match at or
//! above the threshold) or accepted. Alarms are queued for an administrator,
//! whose confirmations append new patterns to the list.

pub mod alarm_queue;
pub mod automaton;
pub mod detector;
pub mod pattern_store;
pub mod score;
pub mod timestamp;

pub use alarm_queue::{AlarmError, AlarmQueue, AlarmRecord, AlarmStatus, Decision};
pub use automaton::{normalize, NormalizedText, PatternAutomaton, ScanResult, StateId};
pub use detector::{check_query, CompiledPatterns, DetectorConfig, Verdict};
pub use pattern_store::{AddOutcome, AnomalyPattern, PatternSource, PatternStore, StoreError};
pub use score::Score;
pub use timestamp::Timestamp;

use thiserror::Error;

/// Errors shared by the text-level operations.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("input is not valid UTF-8 (first bad byte at offset {0})")]
    InvalidEncoding(usize),
    #[error("pattern is empty after normalization")]
    EmptyPattern,
    #[error("pattern length is zero")]
    ZeroLengthPattern,
}
