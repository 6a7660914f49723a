//! On-disk formats: lexicon documents, NDJSON ledgers and config files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wac_core::{Example, Lexicon, LedgerEvent, EpisodeLedger, WordClassifier, FEATURE_DIM, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}: unsupported schema_version {found} (expected {expected})")]
    Version { path: PathBuf, expected: u32, found: u32 },
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: wac_core::Error,
    },
}

impl FormatError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io { path: path.to_path_buf(), source }
    }

    fn parse(path: &Path, err: &serde_json::Error) -> Self {
        FormatError::Parse { path: path.to_path_buf(), line: err.line(), column: err.column(), message: strip_position(err) }
    }
}

// serde_json appends " at line L column C"; the position is reported separately.
fn strip_position(err: &serde_json::Error) -> String {
    let text = err.to_string();
    match text.rfind(" at line ") {
        Some(i) => text[..i].to_string(),
        None => text,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordRecord {
    pub weights: [f64; FEATURE_DIM],
    pub bias: f64,
    pub pos_count: u64,
    pub neg_count: u64,
    #[serde(default)]
    pub buffer: Vec<Example>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconDocument {
    pub schema_version: u32,
    pub rng_seed: u64,
    pub words: BTreeMap<String, WordRecord>,
}

impl LexiconDocument {
    pub fn from_lexicon(lexicon: &Lexicon) -> Self {
        let words = lexicon
            .words()
            .map(|c| {
                let record = WordRecord {
                    weights: *c.weights(),
                    bias: c.bias(),
                    pos_count: c.pos_count(),
                    neg_count: c.neg_count(),
                    buffer: c.buffer().iter().copied().collect(),
                };
                (c.token().to_string(), record)
            })
            .collect();
        LexiconDocument { schema_version: lexicon.schema_version(), rng_seed: lexicon.rng_seed(), words }
    }

    pub fn into_lexicon(self) -> Result<Lexicon, wac_core::Error> {
        let words = self
            .words
            .into_iter()
            .map(|(token, r)| WordClassifier::from_parts(token, r.weights, r.bias, r.pos_count, r.neg_count, r.buffer))
            .collect::<Result<Vec<_>, _>>()?;
        Lexicon::from_parts(self.schema_version, self.rng_seed, words)
    }
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: Option<u32>,
}

/// Parses a lexicon document. The schema version is checked before the
/// rest of the document so that newer files fail with a version error.
pub fn parse_lexicon(text: &str, path: &Path) -> Result<Lexicon, FormatError> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| FormatError::parse(path, &e))?;
    if let Some(found) = probe.schema_version {
        if found != SCHEMA_VERSION {
            return Err(FormatError::Version { path: path.to_path_buf(), expected: SCHEMA_VERSION, found });
        }
    }
    let doc: LexiconDocument = serde_json::from_str(text).map_err(|e| FormatError::parse(path, &e))?;
    doc.into_lexicon().map_err(|source| FormatError::Invalid { path: path.to_path_buf(), source })
}

pub fn lexicon_to_string(lexicon: &Lexicon) -> String {
    let mut text = serde_json::to_string_pretty(&LexiconDocument::from_lexicon(lexicon)).expect("lexicon serializes");
    text.push('\n');
    text
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_lexicon(&text, path)
}

pub fn save_lexicon(lexicon: &Lexicon, path: &Path) -> Result<(), FormatError> {
    write_atomic(path, lexicon_to_string(lexicon).as_bytes())
}

/// Writes through a sibling temporary file so readers never see a partial
/// document.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| FormatError::io(path, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        FormatError::io(path, e)
    })
}

pub fn ledger_to_string(ledger: &EpisodeLedger) -> String {
    let mut out = String::new();
    for event in ledger.events() {
        out.push_str(&serde_json::to_string(event).expect("events serialize"));
        out.push('\n');
    }
    out
}

pub fn save_ledger(ledger: &EpisodeLedger, path: &Path) -> Result<(), FormatError> {
    write_atomic(path, ledger_to_string(ledger).as_bytes())
}

/// Reads one event per line; blank lines are skipped. Errors report the
/// file line.
pub fn read_ledger(reader: impl BufRead, path: &Path) -> Result<EpisodeLedger, FormatError> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| FormatError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let event: LedgerEvent = serde_json::from_str(&line).map_err(|e| FormatError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            column: e.column(),
            message: strip_position(&e),
        })?;
        events.push(event);
    }
    EpisodeLedger::from_events(events).map_err(|source| FormatError::Invalid { path: path.to_path_buf(), source })
}

pub fn load_ledger(path: &Path) -> Result<EpisodeLedger, FormatError> {
    let file = fs::File::open(path).map_err(|e| FormatError::io(path, e))?;
    read_ledger(BufReader::new(file), path)
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| FormatError::parse(path, &e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.write_all(b"\n").expect("vec write");
    write_atomic(path, &bytes)
}
