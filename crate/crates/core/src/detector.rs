//! Static-phase screening of one query against the whole pattern list.

use crate::automaton::{normalize, NormalizedText, PatternAutomaton, ScanResult};
use crate::pattern_store::AnomalyPattern;
use crate::score::Score;
use crate::Error;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("threshold must lie in (0, 100], got {0}")]
pub struct InvalidThreshold(pub Score);

/// Detector tuning. The threshold is a percentage in `(0, 100]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DetectorConfig {
    threshold: Score,
}

impl DetectorConfig {
    pub fn new(threshold: Score) -> Result<Self, InvalidThreshold> {
        if threshold == Score::ZERO || threshold > Score::HUNDRED {
            return Err(InvalidThreshold(threshold));
        }
        Ok(DetectorConfig { threshold })
    }

    pub fn threshold(&self) -> Score {
        self.threshold
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            threshold: Score::from_ratio(50, 1),
        }
    }
}

/// Outcome of screening one query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// A pattern occurs verbatim in the normalized query.
    Rejected {
        pattern_id: u64,
        match_end: usize,
    },
    /// No exact match, but the best partial match reached the threshold.
    Alarm {
        score: Score,
        best_pattern_id: u64,
        /// Byte range of the best pattern's deepest matched prefix.
        span: (usize, usize),
    },
    Accepted {
        max_score: Score,
    },
}

impl Verdict {
    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::Rejected { .. } => "rejected",
            Verdict::Alarm { .. } => "alarm",
            Verdict::Accepted { .. } => "accepted",
        }
    }

    pub fn score(&self) -> Score {
        match *self {
            Verdict::Rejected { .. } => Score::HUNDRED,
            Verdict::Alarm { score, .. } => score,
            Verdict::Accepted { max_score } => max_score,
        }
    }
}

/// Scan evidence for one pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatternScan {
    pub pattern_id: u64,
    pub scan: ScanResult,
    pub score: Score,
}

/// Automata for an immutable snapshot of the pattern list, one per pattern.
#[derive(Clone, Debug, Default)]
pub struct CompiledPatterns {
    entries: Vec<(u64, PatternAutomaton)>,
}

impl CompiledPatterns {
    pub fn compile(patterns: &[AnomalyPattern]) -> Result<Self, Error> {
        Self::from_texts(patterns.iter().map(|p| (p.id, p.text.as_bytes())))
    }

    /// Compiles `(id, normalized text)` pairs as given.
    pub fn from_texts<'a, I>(patterns: I) -> Result<Self, Error>
    where
        I: IntoIterator<Item = (u64, &'a [u8])>,
    {
        let entries = patterns
            .into_iter()
            .map(|(id, text)| Ok((id, PatternAutomaton::from_bytes(text)?)))
            .collect::<Result<_, Error>>()?;
        Ok(CompiledPatterns { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn automaton(&self, pattern_id: u64) -> Option<&PatternAutomaton> {
        self.entries
            .iter()
            .find(|(id, _)| *id == pattern_id)
            .map(|(_, a)| a)
    }

    /// Scans the query against every pattern.
    pub fn scan_all<'a>(
        &'a self,
        query: &'a NormalizedText,
    ) -> impl Iterator<Item = PatternScan> + 'a {
        self.entries.iter().map(move |(id, automaton)| {
            let scan = automaton.scan(query.as_bytes());
            let score = Score::from_depth(scan.max_depth, automaton.pattern_len())
                .expect("automaton patterns are non-empty");
            PatternScan {
                pattern_id: *id,
                scan,
                score,
            }
        })
    }

    /// Normalizes `raw_query` and classifies it.
    pub fn check(&self, raw_query: &[u8], config: &DetectorConfig) -> Result<Verdict, Error> {
        let query = normalize(raw_query)?;
        Ok(self.check_normalized(&query, config))
    }

    pub fn check_normalized(&self, query: &NormalizedText, config: &DetectorConfig) -> Verdict {
        let mut exact: Option<(u64, usize)> = None;
        let mut best: Option<PatternScan> = None;

        // Every pattern is examined before a verdict is formed.
        for ps in self.scan_all(query) {
            if let Some(end) = ps.scan.exact_match_end {
                if exact.is_none_or(|(id, _)| ps.pattern_id < id) {
                    exact = Some((ps.pattern_id, end));
                }
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => {
                    ps.score > b.score || (ps.score == b.score && ps.pattern_id < b.pattern_id)
                }
            };
            if better {
                best = Some(ps);
            }
        }

        if let Some((pattern_id, match_end)) = exact {
            return Verdict::Rejected {
                pattern_id,
                match_end,
            };
        }
        match best {
            Some(b) if b.score >= config.threshold() => Verdict::Alarm {
                score: b.score,
                best_pattern_id: b.pattern_id,
                span: b.scan.deepest_span().unwrap_or((0, 0)),
            },
            Some(b) => Verdict::Accepted { max_score: b.score },
            None => Verdict::Accepted {
                max_score: Score::ZERO,
            },
        }
    }
}

/// Screens `raw_query` against `patterns`, compiling them first.
///
/// Callers that screen many queries against the same snapshot should compile
/// once with [`CompiledPatterns::compile`] instead.
pub fn check_query(
    raw_query: &[u8],
    patterns: &[AnomalyPattern],
    config: &DetectorConfig,
) -> Result<Verdict, Error> {
    CompiledPatterns::compile(patterns)?.check(raw_query, config)
}
