//! Versioned snapshot persistence.
//!
//! The store is one JSON document replaced atomically on every write, plus an
//! append-only `<store>.attempts.jsonl` audit log. The snapshot is the source of
//! truth; the log is written after it and never read back.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use pecs_core::learner::{ActivityAttempt, LearnerProfile};
use pecs_core::{reference_deck, AdvancementRule, Deck, LearnerRegistry, UsageModel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::messaging::Message;

pub const STORE_FORMAT_VERSION: u64 = 1;
pub const REFERENCE_DECK_ID: &str = "reference";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("malformed snapshot: {0}")]
    MalformedSnapshot(String),
    #[error("snapshot format version {0} is not supported")]
    VersionUnsupported(u64),
    #[error("store i/o error: {0}")]
    Io(#[from] io::Error),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::MalformedSnapshot(_) => "MalformedSnapshot",
            StoreError::VersionUnsupported(_) => "VersionUnsupported",
            StoreError::Io(_) => "StoreUnavailable",
        }
    }
}

/// Everything the service keeps between restarts.
#[derive(Debug, Clone)]
pub struct State {
    pub decks: BTreeMap<String, Deck>,
    pub learners: LearnerRegistry,
    /// One prediction model per learner.
    pub usage_models: BTreeMap<String, UsageModel>,
    pub messages: Vec<Message>,
}

impl State {
    pub fn new(rule: AdvancementRule, kdf_rounds: u32) -> State {
        State {
            decks: BTreeMap::from([(REFERENCE_DECK_ID.to_string(), reference_deck())]),
            learners: LearnerRegistry::new(rule, kdf_rounds),
            usage_models: BTreeMap::new(),
            messages: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreSnapshot {
    pub format_version: u64,
    pub decks: BTreeMap<String, Deck>,
    pub profiles: BTreeMap<String, LearnerProfile>,
    pub ledgers: BTreeMap<String, Vec<ActivityAttempt>>,
    pub usage_models: BTreeMap<String, UsageModel>,
    pub messages: Vec<Message>,
}

impl StoreSnapshot {
    pub fn capture(state: &State) -> StoreSnapshot {
        StoreSnapshot {
            format_version: STORE_FORMAT_VERSION,
            decks: state.decks.clone(),
            profiles: state.learners.profiles().clone(),
            ledgers: state.learners.ledgers().clone(),
            usage_models: state.usage_models.clone(),
            messages: state.messages.clone(),
        }
    }

    /// Canonical form: pretty JSON with sorted maps and a trailing newline.
    pub fn to_document(&self) -> String {
        let mut doc = serde_json::to_string_pretty(self).expect("snapshot serializes");
        doc.push('\n');
        doc
    }

    pub fn parse(document: &str) -> Result<StoreSnapshot, StoreError> {
        let value: serde_json::Value =
            serde_json::from_str(document).map_err(|e| StoreError::MalformedSnapshot(e.to_string()))?;
        // Check the version before the strict parse so a newer layout is reported as such.
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(STORE_FORMAT_VERSION) => {}
            Some(other) => return Err(StoreError::VersionUnsupported(other)),
            None => return Err(StoreError::MalformedSnapshot("missing format_version".into())),
        }
        let snapshot: StoreSnapshot =
            serde_json::from_value(value).map_err(|e| StoreError::MalformedSnapshot(e.to_string()))?;
        snapshot.check()?;
        Ok(snapshot)
    }

    fn check(&self) -> Result<(), StoreError> {
        let bad = |msg: String| Err(StoreError::MalformedSnapshot(msg));
        for (id, profile) in &self.profiles {
            if *id != profile.learner_id {
                return bad(format!("profile key {id:?} does not match its learner_id"));
            }
        }
        for (id, ledger) in &self.ledgers {
            if !self.profiles.contains_key(id) {
                return bad(format!("ledger for unknown learner {id:?}"));
            }
            if ledger.iter().any(|a| a.learner_id != *id) {
                return bad(format!("ledger {id:?} holds another learner's attempt"));
            }
            if ledger.windows(2).any(|w| w[0].timestamp >= w[1].timestamp) {
                return bad(format!("ledger {id:?} timestamps are not strictly increasing"));
            }
        }
        if self.messages.windows(2).any(|w| w[0].sent_at >= w[1].sent_at) {
            return bad("message timestamps are not strictly increasing".into());
        }
        Ok(())
    }

    pub fn into_state(self, rule: AdvancementRule, kdf_rounds: u32) -> State {
        State {
            decks: self.decks,
            learners: LearnerRegistry::from_parts(self.profiles, self.ledgers, rule, kdf_rounds),
            usage_models: self.usage_models,
            messages: self.messages,
        }
    }
}

pub fn save_store(state: &State) -> String {
    StoreSnapshot::capture(state).to_document()
}

pub fn load_store(document: &str, rule: AdvancementRule, kdf_rounds: u32) -> Result<State, StoreError> {
    Ok(StoreSnapshot::parse(document)?.into_state(rule, kdf_rounds))
}

/// The on-disk home of a store.
#[derive(Debug, Clone)]
pub struct FileStore {
    path: PathBuf,
}

impl FileStore {
    pub fn new(path: impl Into<PathBuf>) -> FileStore {
        FileStore { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn attempt_log_path(&self) -> PathBuf {
        let mut name = self.path.file_name().unwrap_or_default().to_os_string();
        name.push(".attempts.jsonl");
        self.path.with_file_name(name)
    }

    /// Reads the store, or starts a fresh one when no file exists yet.
    pub fn load_or_init(&self, rule: AdvancementRule, kdf_rounds: u32) -> Result<State, StoreError> {
        match fs::read_to_string(&self.path) {
            Ok(doc) => load_store(&doc, rule, kdf_rounds),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(State::new(rule, kdf_rounds)),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, state: &State) -> Result<(), StoreError> {
        write_atomic(&self.path, save_store(state).as_bytes())?;
        Ok(())
    }

    pub fn append_attempts(&self, attempts: &[ActivityAttempt]) -> Result<(), StoreError> {
        if attempts.is_empty() {
            return Ok(());
        }
        let mut file = OpenOptions::new().create(true).append(true).open(self.attempt_log_path())?;
        let mut buf = String::new();
        for attempt in attempts {
            buf.push_str(&serde_json::to_string(attempt).expect("attempt serializes"));
            buf.push('\n');
        }
        file.write_all(buf.as_bytes())?;
        file.sync_data()?;
        Ok(())
    }
}

/// Write to a sibling temp file, fsync, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(format!(".tmp-{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    {
        let mut file = File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    // Persist the rename itself. Not every platform can open a directory.
    if let Ok(d) = File::open(&dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_store_round_trips() {
        let state = State::new(AdvancementRule::default(), 1000);
        let doc = save_store(&state);
        let again = save_store(&load_store(&doc, AdvancementRule::default(), 1000).unwrap());
        assert_eq!(doc, again);
    }

    #[test]
    fn version_is_checked_before_layout() {
        let err = StoreSnapshot::parse(r#"{"format_version": 9, "whatever": true}"#).unwrap_err();
        assert!(matches!(err, StoreError::VersionUnsupported(9)));
        let err = StoreSnapshot::parse(r#"{"format_version": 1}"#).unwrap_err();
        assert_eq!(err.code(), "MalformedSnapshot");
        assert_eq!(StoreSnapshot::parse("{").unwrap_err().code(), "MalformedSnapshot");
    }

    #[test]
    fn attempt_log_sits_next_to_the_store() {
        let fs = FileStore::new("/tmp/x/pecs.json");
        assert_eq!(fs.attempt_log_path(), PathBuf::from("/tmp/x/pecs.json.attempts.jsonl"));
    }
}
