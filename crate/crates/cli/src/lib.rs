//! Batch screening of query logs.

use std::cell::Cell;

use serde::Serialize;
use sqlia_core::{CompiledPatterns, DetectorConfig, Verdict};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LineRecord {
    pub line_no: usize,
    pub verdict: &'static str,
    pub score: Option<String>,
    pub pattern_id: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ScanReport {
    pub total: usize,
    pub accepted: usize,
    pub alarmed: usize,
    pub rejected: usize,
    pub check_calls: usize,
    pub lines: Vec<LineRecord>,
}

/// Screens each non-blank line of `log`. Lines that are not valid UTF-8 are
/// counted as rejected and carry an error message.
pub fn scan_log(log: &[u8], patterns: &CompiledPatterns, config: &DetectorConfig) -> ScanReport {
    let calls = Cell::new(0usize);
    let check = |line: &[u8]| {
        calls.set(calls.get() + 1);
        patterns.check(line, config)
    };

    let mut report = ScanReport::default();
    for (idx, line) in log.split(|&b| b == b'\n').enumerate() {
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        if line.iter().all(|b| b.is_ascii_whitespace()) {
            continue;
        }
        let line_no = idx + 1;
        let record = match check(line) {
            Ok(verdict) => {
                let pattern_id = match verdict {
                    Verdict::Rejected { pattern_id, .. } => Some(pattern_id),
                    Verdict::Alarm {
                        best_pattern_id, ..
                    } => Some(best_pattern_id),
                    Verdict::Accepted { .. } => None,
                };
                LineRecord {
                    line_no,
                    verdict: verdict.kind(),
                    score: Some(verdict.score().to_string()),
                    pattern_id,
                    error: None,
                }
            }
            Err(e) => LineRecord {
                line_no,
                verdict: "rejected",
                score: None,
                pattern_id: None,
                error: Some(e.to_string()),
            },
        };
        match record.verdict {
            "accepted" => report.accepted += 1,
            "alarm" => report.alarmed += 1,
            _ => report.rejected += 1,
        }
        report.total += 1;
        report.lines.push(record);
    }
    report.check_calls = calls.get();
    report
}
