//! Wire types for the JSON API. Scores are fixed six-digit decimal strings.

use serde::{Deserialize, Serialize};
use sqlia_core::alarm_queue::{AlarmRecord, AlarmStatus};
use sqlia_core::{AnomalyPattern, CompiledPatterns, Verdict};

use crate::AlarmPolicy;

#[derive(Debug, Deserialize)]
pub struct CheckRequest {
    pub query: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResponse {
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_end: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alarm_id: Option<u64>,
}

impl CheckResponse {
    /// For alarms, `pattern_id` is the best-scoring pattern and `match_end`
    /// the end of its deepest matched prefix.
    pub fn new(verdict: &Verdict, alarm_id: Option<u64>, policy: AlarmPolicy) -> Self {
        let score = Some(verdict.score().to_string());
        match *verdict {
            Verdict::Rejected {
                pattern_id,
                match_end,
            } => CheckResponse {
                verdict: "rejected".into(),
                score,
                pattern_id: Some(pattern_id),
                match_end: Some(match_end),
                alarm_id: None,
            },
            Verdict::Alarm {
                best_pattern_id,
                span,
                ..
            } => CheckResponse {
                verdict: match policy {
                    AlarmPolicy::AllowAndLog => "alarm".into(),
                    AlarmPolicy::Block => "rejected".into(),
                },
                score,
                pattern_id: Some(best_pattern_id),
                match_end: Some(span.1),
                alarm_id,
            },
            Verdict::Accepted { .. } => CheckResponse {
                verdict: "accepted".into(),
                score,
                pattern_id: None,
                match_end: None,
                alarm_id: None,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternView {
    pub id: u64,
    pub text: String,
    pub source: String,
    pub created_at: String,
}

impl From<&AnomalyPattern> for PatternView {
    fn from(p: &AnomalyPattern) -> Self {
        PatternView {
            id: p.id,
            text: p.text.to_string(),
            source: p.source.as_str().to_string(),
            created_at: p.created_at.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternList {
    pub patterns: Vec<PatternView>,
}

#[derive(Debug, Deserialize)]
pub struct AddPatternRequest {
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddPatternResponse {
    #[serde(flatten)]
    pub pattern: PatternView,
    pub created: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmView {
    pub id: u64,
    pub raw_query: String,
    pub normalized_query: String,
    pub score: String,
    pub best_pattern_id: u64,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_pattern_id: Option<u64>,
    pub raised_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decided_at: Option<String>,
    pub suggested_pattern: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_pattern_text: Option<String>,
    /// Byte range in `normalized_query` of the best pattern's deepest prefix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highlight_start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highlight_end: Option<usize>,
}

impl AlarmView {
    pub fn new(record: &AlarmRecord, compiled: &CompiledPatterns) -> Self {
        let automaton = compiled.automaton(record.best_pattern_id);
        let span =
            automaton.and_then(|a| a.scan(record.normalized_query.as_bytes()).deepest_span());
        AlarmView {
            id: record.id,
            raw_query: record.raw_query.clone(),
            normalized_query: record.normalized_query.to_string(),
            score: record.score.to_string(),
            best_pattern_id: record.best_pattern_id,
            status: record.status.as_str().to_string(),
            new_pattern_id: match record.status {
                AlarmStatus::Confirmed { new_pattern_id } => Some(new_pattern_id),
                _ => None,
            },
            raised_at: record.raised_at.to_string(),
            decided_at: record.decided_at.map(|t| t.to_string()),
            suggested_pattern: record.suggest_pattern().to_string(),
            best_pattern_text: automaton.map(|a| String::from_utf8_lossy(a.pattern()).into_owned()),
            highlight_start: span.map(|s| s.0),
            highlight_end: span.map(|s| s.1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmList {
    pub alarms: Vec<AlarmView>,
}

#[derive(Debug, Deserialize)]
pub struct DecisionRequest {
    pub action: String,
    #[serde(default)]
    pub pattern_text: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub patterns: usize,
    pub pending_alarms: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
