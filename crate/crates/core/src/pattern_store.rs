//! The static pattern list, persisted as a small line-oriented text file.
//!
//! File layout (UTF-8, LF):
//!
//! ```text
//! #sqlia-spl v1
//! <id>\t<seed|admin>\t<created_at>\t<escaped text>
//! ```
//!
//! Text escapes backslash as `\\`, tab as `\t` and newline as `\n`. Every
//! mutation rewrites the whole file through a temporary sibling and a rename,
//! so readers of the path only ever see a complete list.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use thiserror::Error;

use crate::automaton::{normalize, NormalizedText};
use crate::timestamp::Timestamp;

pub const HEADER: &str = "#sqlia-spl v1";

/// Default seed list of classic injection signatures.
pub const SEED_FILE: &str = include_str!("../data/seed.spl");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternSource {
    Seed,
    #[serde(rename = "admin")]
    AdminConfirmed,
}

impl PatternSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            PatternSource::Seed => "seed",
            PatternSource::AdminConfirmed => "admin",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "seed" => Some(PatternSource::Seed),
            "admin" => Some(PatternSource::AdminConfirmed),
            _ => None,
        }
    }
}

/// One entry of the static pattern list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnomalyPattern {
    pub id: u64,
    pub text: NormalizedText,
    pub source: PatternSource,
    pub created_at: Timestamp,
}

/// Immutable view of the list at one point in time, in id order.
pub type Snapshot = Arc<[AnomalyPattern]>;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("line {line}: malformed ({reason})")]
    MalformedLine { line: usize, reason: &'static str },
    #[error("line {line}: duplicate pattern text")]
    DuplicateText { line: usize },
    #[error("line {line}: id does not increase")]
    NonMonotonicId { line: usize },
    #[error("pattern is empty after normalization")]
    EmptyPattern,
    #[error("pattern text is not valid UTF-8")]
    InvalidEncoding,
    #[error("pattern file I/O failed: {0}")]
    Io(#[from] io::Error),
}

impl StoreError {
    /// 1-based line number for parse errors.
    pub fn line(&self) -> Option<usize> {
        match self {
            StoreError::MalformedLine { line, .. }
            | StoreError::DuplicateText { line }
            | StoreError::NonMonotonicId { line } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AddOutcome {
    Added(AnomalyPattern),
    AlreadyPresent(u64),
}

impl AddOutcome {
    pub fn id(&self) -> u64 {
        match self {
            AddOutcome::Added(p) => p.id,
            AddOutcome::AlreadyPresent(id) => *id,
        }
    }
}

#[derive(Debug)]
struct WriterState {
    next_id: u64,
    by_text: HashMap<NormalizedText, u64>,
}

/// File-backed pattern list. Writes are serialized; reads go through
/// [`PatternStore::snapshot`] and never wait on file I/O.
#[derive(Debug)]
pub struct PatternStore {
    path: PathBuf,
    writer: Mutex<WriterState>,
    current: RwLock<Snapshot>,
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape(text: &str) -> Option<String> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '\\' => out.push('\\'),
            't' => out.push('\t'),
            'n' => out.push('\n'),
            _ => return None,
        }
    }
    Some(out)
}

/// Renders patterns in the on-disk format.
pub fn serialize(patterns: &[AnomalyPattern]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for p in patterns {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            p.id,
            p.source.as_str(),
            p.created_at,
            escape(p.text.as_str())
        );
    }
    out
}

/// Parses and validates a whole pattern file.
pub fn parse(contents: &str) -> Result<Vec<AnomalyPattern>, StoreError> {
    let malformed = |line, reason| StoreError::MalformedLine { line, reason };
    let Some(body) = contents.strip_suffix('\n') else {
        let line = contents.split('\n').count().max(1);
        return Err(malformed(line, "missing trailing newline"));
    };

    let mut lines = body.split('\n');
    if lines.next() != Some(HEADER) {
        return Err(malformed(1, "bad header"));
    }

    let mut patterns: Vec<AnomalyPattern> = Vec::new();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, source, created_at, escaped] = fields[..] else {
            return Err(malformed(line_no, "expected 4 tab-separated fields"));
        };
        if id.is_empty() || !id.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed(line_no, "bad id"));
        }
        let id: u64 = id.parse().map_err(|_| malformed(line_no, "bad id"))?;
        let source = PatternSource::parse(source).ok_or(malformed(line_no, "bad source"))?;
        let created_at: Timestamp = created_at
            .parse()
            .map_err(|_| malformed(line_no, "bad timestamp"))?;
        let text = unescape(escaped).ok_or(malformed(line_no, "bad escape"))?;
        let normalized = normalize(text.as_bytes()).map_err(|_| malformed(line_no, "bad text"))?;
        if normalized.is_empty() {
            return Err(malformed(line_no, "empty text"));
        }
        if normalized.as_str() != text {
            return Err(malformed(line_no, "text is not normalized"));
        }
        if id == 0 || patterns.last().is_some_and(|p| id <= p.id) {
            return Err(StoreError::NonMonotonicId { line: line_no });
        }
        if seen.insert(escaped, line_no).is_some() {
            return Err(StoreError::DuplicateText { line: line_no });
        }
        patterns.push(AnomalyPattern {
            id,
            text: normalized,
            source,
            created_at,
        });
    }
    Ok(patterns)
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Atomically replaces `path` with `contents`.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let tmp = temp_path(path);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() && tmp.is_file() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

impl PatternStore {
    /// Loads the list at `path`. A missing file is an empty list.
    pub fn load(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let patterns = match fs::read(&path) {
            Ok(bytes) => {
                let contents = String::from_utf8(bytes).map_err(|e| {
                    let line = e.as_bytes()[..e.utf8_error().valid_up_to()]
                        .iter()
                        .filter(|&&b| b == b'\n')
                        .count()
                        + 1;
                    StoreError::MalformedLine {
                        line,
                        reason: "invalid UTF-8",
                    }
                })?;
                parse(&contents)?
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        Ok(Self::from_parts(path, patterns))
    }

    fn from_parts(path: PathBuf, patterns: Vec<AnomalyPattern>) -> Self {
        let next_id = patterns.last().map_or(1, |p| p.id + 1);
        let by_text = patterns.iter().map(|p| (p.text.clone(), p.id)).collect();
        PatternStore {
            path,
            writer: Mutex::new(WriterState { next_id, by_text }),
            current: RwLock::new(patterns.into()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn snapshot(&self) -> Snapshot {
        self.current.read().expect("pattern snapshot lock").clone()
    }

    pub fn len(&self) -> usize {
        self.snapshot().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn next_id(&self) -> u64 {
        self.writer.lock().expect("pattern writer lock").next_id
    }

    pub fn get(&self, id: u64) -> Option<AnomalyPattern> {
        self.snapshot().iter().find(|p| p.id == id).cloned()
    }

    pub fn add_pattern(
        &self,
        raw_text: &str,
        source: PatternSource,
    ) -> Result<AddOutcome, StoreError> {
        self.add_pattern_at(raw_text, source, Timestamp::now())
    }

    /// Appends a pattern unless its normalized text is already stored.
    /// The file is rewritten before the in-memory list changes.
    pub fn add_pattern_at(
        &self,
        raw_text: &str,
        source: PatternSource,
        created_at: Timestamp,
    ) -> Result<AddOutcome, StoreError> {
        let text = normalize(raw_text.as_bytes()).map_err(|_| StoreError::InvalidEncoding)?;
        if text.is_empty() {
            return Err(StoreError::EmptyPattern);
        }

        let mut writer = self.writer.lock().expect("pattern writer lock");
        if let Some(&id) = writer.by_text.get(&text) {
            return Ok(AddOutcome::AlreadyPresent(id));
        }

        let pattern = AnomalyPattern {
            id: writer.next_id,
            text,
            source,
            created_at,
        };
        let mut next: Vec<AnomalyPattern> = self.snapshot().to_vec();
        next.push(pattern.clone());
        write_atomic(&self.path, serialize(&next).as_bytes())?;

        writer.next_id += 1;
        writer.by_text.insert(pattern.text.clone(), pattern.id);
        *self.current.write().expect("pattern snapshot lock") = next.into();
        Ok(AddOutcome::Added(pattern))
    }

    /// The file contents the current list serializes to.
    pub fn to_file_string(&self) -> String {
        serialize(&self.snapshot())
    }
}
