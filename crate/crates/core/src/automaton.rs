//! Byte-level Aho-Corasick automaton for a single anomaly pattern.
//!
//! The automaton is a goto chain spelling the pattern, plus failure links and
//! an explicit depth per state. Scanning reads each byte of the text once and
//! reports both the first exact occurrence of the pattern and the deepest
//! pattern prefix reached, which the detector turns into an anomaly score.

use std::fmt;

use crate::Error;

/// Query or pattern text after normalization.
///
/// ASCII letters are lowercased, every run of whitespace (space, tab, LF, CR)
/// becomes one space, and leading/trailing whitespace is dropped. All other
/// bytes are kept verbatim, so the result is still valid UTF-8.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NormalizedText(String);

impl NormalizedText {
    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for NormalizedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<[u8]> for NormalizedText {
    fn as_ref(&self) -> &[u8] {
        self.as_bytes()
    }
}

fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r')
}

/// Normalizes raw query bytes. Fails if `raw` is not valid UTF-8.
pub fn normalize(raw: &[u8]) -> Result<NormalizedText, Error> {
    std::str::from_utf8(raw).map_err(|e| Error::InvalidEncoding(e.valid_up_to()))?;

    let mut out = Vec::with_capacity(raw.len());
    let mut pending_space = false;
    for &b in raw {
        if is_space(b) {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(b' ');
            pending_space = false;
        }
        out.push(b.to_ascii_lowercase());
    }
    // Only ASCII bytes were rewritten, so the output is still UTF-8.
    Ok(NormalizedText(
        String::from_utf8(out).expect("ascii-only rewrite"),
    ))
}

/// Index of an automaton state. The root is state 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

impl StateId {
    pub const ROOT: StateId = StateId(0);
}

/// Goto/fail/output tables for one pattern.
#[derive(Clone, Debug)]
pub struct PatternAutomaton {
    pattern: Box<[u8]>,
    // goto(s, b) succeeds iff b == next_byte[s]; the terminal state has no
    // outgoing edge. The root additionally loops on every other byte.
    next_byte: Box<[Option<u8>]>,
    fail: Box<[StateId]>,
    depth: Box<[usize]>,
}

/// Evidence gathered by one scan of a text.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScanResult {
    /// Exclusive end offset of the first exact occurrence of the pattern.
    pub exact_match_end: Option<usize>,
    /// Length of the longest pattern prefix seen in the text.
    pub max_depth: usize,
    /// Exclusive end offset where `max_depth` was first reached, if it is non-zero.
    pub deepest_end: Option<usize>,
    pub bytes_read: usize,
    pub fail_follows: usize,
}

impl ScanResult {
    /// Byte range of the deepest matched prefix, suitable for highlighting.
    pub fn deepest_span(&self) -> Option<(usize, usize)> {
        self.deepest_end.map(|end| (end - self.max_depth, end))
    }
}

impl PatternAutomaton {
    /// Builds the automaton for a non-empty normalized pattern.
    pub fn build(pattern: &NormalizedText) -> Result<Self, Error> {
        Self::from_bytes(pattern.as_bytes())
    }

    /// Builds from arbitrary bytes. The alphabet is all 256 byte values.
    pub fn from_bytes(pattern: &[u8]) -> Result<Self, Error> {
        if pattern.is_empty() {
            return Err(Error::EmptyPattern);
        }
        let n = pattern.len();
        let next_byte: Box<[Option<u8>]> = (0..=n).map(|s| pattern.get(s).copied()).collect();
        let depth: Box<[usize]> = (0..=n).collect();

        let mut automaton = PatternAutomaton {
            pattern: pattern.into(),
            next_byte,
            fail: vec![StateId::ROOT; n + 1].into_boxed_slice(),
            depth,
        };

        // Breadth-first over the goto chain: a child's fail link extends its
        // parent's fail link by the edge byte.
        let mut queue = std::collections::VecDeque::new();
        if let Some(child) = automaton.goto_edge(StateId::ROOT, pattern[0]) {
            queue.push_back(child);
        }
        while let Some(state) = queue.pop_front() {
            let Some(b) = automaton.next_byte[state.0] else {
                continue;
            };
            let child = automaton.goto_edge(state, b).expect("chain edge");
            let mut f = automaton.fail[state.0];
            let target = loop {
                if let Some(t) = automaton.goto(f, b) {
                    break t;
                }
                f = automaton.fail[f.0];
            };
            automaton.fail[child.0] = target;
            queue.push_back(child);
        }
        Ok(automaton)
    }

    /// The explicit goto edge, without the root self-loop.
    fn goto_edge(&self, state: StateId, b: u8) -> Option<StateId> {
        (self.next_byte[state.0] == Some(b)).then_some(StateId(state.0 + 1))
    }

    /// The goto function `g`. `None` stands for FAIL; the root never fails.
    pub fn goto(&self, state: StateId, b: u8) -> Option<StateId> {
        match self.goto_edge(state, b) {
            Some(t) => Some(t),
            None if state == StateId::ROOT => Some(StateId::ROOT),
            None => None,
        }
    }

    pub fn fail_link(&self, state: StateId) -> StateId {
        self.fail[state.0]
    }

    pub fn depth(&self, state: StateId) -> usize {
        self.depth[state.0]
    }

    pub fn is_terminal(&self, state: StateId) -> bool {
        self.depth[state.0] == self.pattern.len()
    }

    pub fn state_count(&self) -> usize {
        self.depth.len()
    }

    pub fn pattern_len(&self) -> usize {
        self.pattern.len()
    }

    pub fn pattern(&self) -> &[u8] {
        &self.pattern
    }

    /// Follows fail links until a goto succeeds on `b`, then takes it.
    pub fn step(&self, state: StateId, b: u8) -> StateId {
        let mut follows = 0;
        self.step_counted(state, b, &mut follows)
    }

    #[inline]
    fn step_counted(&self, mut state: StateId, b: u8, follows: &mut usize) -> StateId {
        loop {
            if let Some(next) = self.goto(state, b) {
                return next;
            }
            state = self.fail[state.0];
            *follows += 1;
        }
    }

    /// One left-to-right pass over `text`.
    pub fn scan(&self, text: &[u8]) -> ScanResult {
        let mut result = ScanResult::default();
        let mut state = StateId::ROOT;
        for (i, &b) in text.iter().enumerate() {
            state = self.step_counted(state, b, &mut result.fail_follows);
            result.bytes_read += 1;
            let d = self.depth[state.0];
            if d > result.max_depth {
                result.max_depth = d;
                result.deepest_end = Some(i + 1);
            }
            if result.exact_match_end.is_none() && self.is_terminal(state) {
                result.exact_match_end = Some(i + 1);
            }
        }
        result
    }
}
