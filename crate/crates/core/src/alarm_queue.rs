//! Administrator review queue for above-threshold queries.
//!
//! Alarms live in an append-only JSON-lines journal. A status change appends
//! a superseding record with the same id; replay keeps the latest record per
//! id. Confirming an alarm writes the new pattern to the [`PatternStore`]
//! before the journal records the decision.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{normalize, NormalizedText};
use crate::detector::Verdict;
use crate::pattern_store::{PatternSource, PatternStore, StoreError};
use crate::score::Score;
use crate::timestamp::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlarmStatus {
    Pending,
    Confirmed { new_pattern_id: u64 },
    Dismissed,
}

impl AlarmStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlarmStatus::Pending => "pending",
            AlarmStatus::Confirmed { .. } => "confirmed",
            AlarmStatus::Dismissed => "dismissed",
        }
    }

    pub fn is_pending(&self) -> bool {
        matches!(self, AlarmStatus::Pending)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlarmRecord {
    pub id: u64,
    pub raw_query: String,
    pub normalized_query: NormalizedText,
    pub score: Score,
    pub best_pattern_id: u64,
    pub status: AlarmStatus,
    pub raised_at: Timestamp,
    pub decided_at: Option<Timestamp>,
}

impl AlarmRecord {
    /// Default pattern text offered to the administrator: the whole
    /// normalized query, to be trimmed down to the injected fragment.
    pub fn suggest_pattern(&self) -> NormalizedText {
        self.normalized_query.clone()
    }
}

pub fn suggest_pattern(record: &AlarmRecord) -> NormalizedText {
    record.suggest_pattern()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decision {
    Confirm { pattern_text: String },
    Dismiss,
}

#[derive(Debug, Error)]
pub enum AlarmError {
    #[error("unknown alarm {0}")]
    UnknownAlarm(u64),
    #[error("alarm {0} is already decided")]
    AlreadyDecided(u64),
    #[error("verdict is {0}, only alarm verdicts can be raised")]
    NotAnAlarm(&'static str),
    #[error("query is not valid UTF-8")]
    InvalidEncoding,
    #[error("pattern is empty after normalization")]
    EmptyPattern,
    #[error("journal line {line}: malformed ({reason})")]
    MalformedLine { line: usize, reason: String },
    #[error("journal line {line}: invalid status transition")]
    InvalidTransition { line: usize },
    #[error(transparent)]
    Store(StoreError),
    #[error("alarm journal I/O failed: {0}")]
    Io(#[from] io::Error),
}

impl From<StoreError> for AlarmError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::EmptyPattern => AlarmError::EmptyPattern,
            e => AlarmError::Store(e),
        }
    }
}

/// One journal line. Field order is the on-disk order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JournalEntry {
    id: u64,
    raw_query: String,
    normalized_query: String,
    score: Score,
    best_pattern_id: u64,
    status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    new_pattern_id: Option<u64>,
    raised_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decided_at: Option<Timestamp>,
}

impl JournalEntry {
    fn from_record(r: &AlarmRecord) -> Self {
        JournalEntry {
            id: r.id,
            raw_query: r.raw_query.clone(),
            normalized_query: r.normalized_query.as_str().to_string(),
            score: r.score,
            best_pattern_id: r.best_pattern_id,
            status: r.status.as_str().to_string(),
            new_pattern_id: match r.status {
                AlarmStatus::Confirmed { new_pattern_id } => Some(new_pattern_id),
                _ => None,
            },
            raised_at: r.raised_at,
            decided_at: r.decided_at,
        }
    }

    fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("journal entry serializes");
        line.push('\n');
        line
    }

    fn into_record(self, line: usize) -> Result<AlarmRecord, AlarmError> {
        let malformed = |reason: &str| AlarmError::MalformedLine {
            line,
            reason: reason.to_string(),
        };
        let status = match (self.status.as_str(), self.new_pattern_id, self.decided_at) {
            ("pending", None, None) => AlarmStatus::Pending,
            ("confirmed", Some(new_pattern_id), Some(_)) => {
                AlarmStatus::Confirmed { new_pattern_id }
            }
            ("dismissed", None, Some(_)) => AlarmStatus::Dismissed,
            _ => return Err(malformed("inconsistent status fields")),
        };
        let normalized =
            normalize(self.normalized_query.as_bytes()).map_err(|_| malformed("bad query"))?;
        if normalized.as_str() != self.normalized_query {
            return Err(malformed("normalized_query is not normalized"));
        }
        Ok(AlarmRecord {
            id: self.id,
            raw_query: self.raw_query,
            normalized_query: normalized,
            score: self.score,
            best_pattern_id: self.best_pattern_id,
            status,
            raised_at: self.raised_at,
            decided_at: self.decided_at,
        })
    }
}

#[derive(Debug, Default)]
struct QueueState {
    records: BTreeMap<u64, AlarmRecord>,
    journal: Vec<JournalEntry>,
    next_id: u64,
}

/// Replays journal text into the current record per id.
fn replay(contents: &str) -> Result<QueueState, AlarmError> {
    let mut state = QueueState {
        next_id: 1,
        ..Default::default()
    };
    if contents.is_empty() {
        return Ok(state);
    }
    let Some(body) = contents.strip_suffix('\n') else {
        return Err(AlarmError::MalformedLine {
            line: contents.split('\n').count(),
            reason: "missing trailing newline".into(),
        });
    };
    for (idx, text) in body.split('\n').enumerate() {
        let line = idx + 1;
        let entry: JournalEntry =
            serde_json::from_str(text).map_err(|e| AlarmError::MalformedLine {
                line,
                reason: e.to_string(),
            })?;
        let record = entry.clone().into_record(line)?;
        match state.records.get(&record.id) {
            None => {
                if !record.status.is_pending() || record.id < state.next_id {
                    return Err(AlarmError::InvalidTransition { line });
                }
                state.next_id = record.id + 1;
            }
            Some(prev) => {
                let same_alarm = prev.raw_query == record.raw_query
                    && prev.normalized_query == record.normalized_query
                    && prev.score == record.score
                    && prev.best_pattern_id == record.best_pattern_id
                    && prev.raised_at == record.raised_at;
                if !prev.status.is_pending() || record.status.is_pending() || !same_alarm {
                    return Err(AlarmError::InvalidTransition { line });
                }
            }
        }
        state.records.insert(record.id, record);
        state.journal.push(entry);
    }
    Ok(state)
}

/// File-backed alarm queue. All operations take `&self`; mutations are
/// serialized internally.
#[derive(Debug)]
pub struct AlarmQueue {
    path: PathBuf,
    state: Mutex<QueueState>,
}

impl AlarmQueue {
    /// Loads and replays the journal at `path`. A missing file is an empty queue.
    pub fn load(path: impl Into<PathBuf>) -> Result<Self, AlarmError> {
        let path = path.into();
        let state = match fs::read(&path) {
            Ok(bytes) => {
                let contents = String::from_utf8(bytes).map_err(|e| {
                    let valid = &e.as_bytes()[..e.utf8_error().valid_up_to()];
                    AlarmError::MalformedLine {
                        line: valid.iter().filter(|&&b| b == b'\n').count() + 1,
                        reason: "invalid UTF-8".into(),
                    }
                })?;
                replay(&contents)?
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => QueueState {
                next_id: 1,
                ..Default::default()
            },
            Err(e) => return Err(e.into()),
        };
        Ok(AlarmQueue {
            path,
            state: Mutex::new(state),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn append(&self, entry: &JournalEntry) -> io::Result<()> {
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        f.write_all(entry.to_line().as_bytes())?;
        f.sync_data()
    }

    pub fn raise_alarm(
        &self,
        raw_query: &str,
        verdict: &Verdict,
    ) -> Result<AlarmRecord, AlarmError> {
        self.raise_alarm_at(raw_query, verdict, Timestamp::now())
    }

    /// Records a pending alarm for an `Alarm` verdict. The journal line is
    /// written before the record becomes visible.
    pub fn raise_alarm_at(
        &self,
        raw_query: &str,
        verdict: &Verdict,
        raised_at: Timestamp,
    ) -> Result<AlarmRecord, AlarmError> {
        let Verdict::Alarm {
            score,
            best_pattern_id,
            ..
        } = *verdict
        else {
            return Err(AlarmError::NotAnAlarm(verdict.kind()));
        };
        let normalized_query =
            normalize(raw_query.as_bytes()).map_err(|_| AlarmError::InvalidEncoding)?;

        let mut state = self.state.lock().expect("alarm queue lock");
        let record = AlarmRecord {
            id: state.next_id,
            raw_query: raw_query.to_string(),
            normalized_query,
            score,
            best_pattern_id,
            status: AlarmStatus::Pending,
            raised_at,
            decided_at: None,
        };
        let entry = JournalEntry::from_record(&record);
        self.append(&entry)?;
        state.next_id += 1;
        state.records.insert(record.id, record.clone());
        state.journal.push(entry);
        Ok(record)
    }

    pub fn decide_alarm(
        &self,
        alarm_id: u64,
        decision: Decision,
        store: &PatternStore,
    ) -> Result<AlarmRecord, AlarmError> {
        self.decide_alarm_at(alarm_id, decision, store, Timestamp::now())
    }

    /// Applies an administrator decision to a pending alarm.
    ///
    /// On confirm the pattern is persisted first; if that fails the alarm
    /// stays pending. A pattern that is already stored confirms with its
    /// existing id.
    pub fn decide_alarm_at(
        &self,
        alarm_id: u64,
        decision: Decision,
        store: &PatternStore,
        decided_at: Timestamp,
    ) -> Result<AlarmRecord, AlarmError> {
        let mut state = self.state.lock().expect("alarm queue lock");
        let current = state
            .records
            .get(&alarm_id)
            .ok_or(AlarmError::UnknownAlarm(alarm_id))?;
        if !current.status.is_pending() {
            return Err(AlarmError::AlreadyDecided(alarm_id));
        }

        let status = match decision {
            Decision::Dismiss => AlarmStatus::Dismissed,
            Decision::Confirm { pattern_text } => {
                let outcome = store.add_pattern_at(
                    &pattern_text,
                    PatternSource::AdminConfirmed,
                    decided_at,
                )?;
                AlarmStatus::Confirmed {
                    new_pattern_id: outcome.id(),
                }
            }
        };

        let mut updated = current.clone();
        updated.status = status;
        updated.decided_at = Some(decided_at);
        let entry = JournalEntry::from_record(&updated);
        self.append(&entry)?;
        state.records.insert(alarm_id, updated.clone());
        state.journal.push(entry);
        Ok(updated)
    }

    pub fn get(&self, alarm_id: u64) -> Option<AlarmRecord> {
        self.state
            .lock()
            .expect("alarm queue lock")
            .records
            .get(&alarm_id)
            .cloned()
    }

    /// Current records in id order, optionally filtered by status name.
    pub fn list(&self, status: Option<&str>) -> Vec<AlarmRecord> {
        let state = self.state.lock().expect("alarm queue lock");
        state
            .records
            .values()
            .filter(|r| status.is_none_or(|s| r.status.as_str() == s))
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("alarm queue lock").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pending_count(&self) -> usize {
        let state = self.state.lock().expect("alarm queue lock");
        state
            .records
            .values()
            .filter(|r| r.status.is_pending())
            .count()
    }

    /// The journal text the in-memory event log serializes to.
    pub fn to_journal_string(&self) -> String {
        let state = self.state.lock().expect("alarm queue lock");
        state.journal.iter().map(JournalEntry::to_line).collect()
    }
}
