//! Append-only event log for profiles, meals and feedback.
//!
//! Each record is one JSON object per line:
//!
//! ```text
//! {"kind":"feedback","payload":{...},"sequence":3,"timestamp":"2026-03-01T12:00:00Z"}
//! ```
//!
//! * `sequence` - strictly increasing, starting at 1
//! * `kind` - `profile_upsert`, `meal_logged` or `feedback`
//! * `payload` - a [`ProfileUpsert`], a [`MealLogged`] or a [`FeedbackEvent`]
//! * `timestamp` - RFC 3339 time the record was written
//!
//! A torn final line (no trailing newline) is ignored on replay and cut off
//! when the log is reopened for writing. An optional snapshot file holds the
//! materialized [`State`] up to some sequence so that replay only folds the
//! records after it.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recommender::{FeedbackEvent, MealEntry, ProfileUpsert, Rating, SkipRecord, UserProfile};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage is full")]
    StorageFull,
    #[error("corrupt log at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for StoreError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::StorageFull {
            Self::StorageFull
        } else {
            Self::Io(e)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealLogged {
    pub user_id: String,
    pub entry: MealEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    ProfileUpsert(ProfileUpsert),
    MealLogged(MealLogged),
    Feedback(FeedbackEvent),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub sequence: u64,
    #[serde(flatten)]
    pub event: Event,
    pub timestamp: DateTime<Utc>,
}

/// Materialized view of the log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub last_sequence: u64,
    pub profiles: BTreeMap<String, UserProfile>,
    /// user -> recipe -> latest rating
    pub ratings: BTreeMap<String, BTreeMap<String, Rating>>,
    pub skips: BTreeMap<String, Vec<SkipRecord>>,
}

impl State {
    pub fn apply(&mut self, record: &EventRecord) {
        self.last_sequence = record.sequence;
        match &record.event {
            Event::ProfileUpsert(p) => {
                let log = self.profiles.remove(&p.user_id).map(|old| old.meal_log).unwrap_or_default();
                self.profiles
                    .insert(p.user_id.clone(), UserProfile::from_upsert(p.clone(), log));
            }
            Event::MealLogged(m) => {
                if let Some(profile) = self.profiles.get_mut(&m.user_id) {
                    profile.meal_log.push(m.entry.clone());
                }
            }
            Event::Feedback(f) => match (f.tried, f.rating) {
                (true, Some(r)) => {
                    self.ratings
                        .entry(f.user_id.clone())
                        .or_default()
                        .insert(f.recipe_id.clone(), r);
                }
                _ => self.skips.entry(f.user_id.clone()).or_default().push(SkipRecord {
                    recipe_id: f.recipe_id.clone(),
                    timestamp: f.timestamp,
                }),
            },
        }
    }

    pub fn rating_count(&self, user_id: &str) -> usize {
        self.ratings.get(user_id).map_or(0, BTreeMap::len)
    }

    pub fn skips_for(&self, user_id: &str) -> &[SkipRecord] {
        self.skips.get(user_id).map_or(&[], Vec::as_slice)
    }
}

/// Outcome of reading a log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayReport {
    /// Records folded (after any snapshot).
    pub records: usize,
    /// Bytes of an incomplete final line that were ignored.
    pub ignored_tail_bytes: usize,
    /// Byte length of the well-formed prefix.
    pub valid_len: u64,
}

fn snapshot_path(log: &Path) -> PathBuf {
    let mut name = log.file_name().unwrap_or_default().to_os_string();
    name.push(".snapshot");
    log.with_file_name(name)
}

fn read_snapshot(path: &Path) -> Result<State, StoreError> {
    match fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| StoreError::CorruptSnapshot(e.to_string())),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(State::default()),
        Err(e) => Err(e.into()),
    }
}

/// Folds a log image on top of `state`.
pub fn replay_bytes(bytes: &[u8], mut state: State) -> Result<(State, ReplayReport), StoreError> {
    let mut report = ReplayReport::default();
    let mut offset = 0usize;
    let mut prev = 0u64;
    for (n, chunk) in bytes.split_inclusive(|b| *b == b'\n').enumerate() {
        let line = n + 1;
        if !chunk.ends_with(b"\n") {
            report.ignored_tail_bytes = chunk.len();
            break;
        }
        offset += chunk.len();
        let text = &chunk[..chunk.len() - 1];
        if text.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let record: EventRecord = serde_json::from_slice(text).map_err(|e| StoreError::CorruptLog {
            line,
            reason: e.to_string(),
        })?;
        if record.sequence <= prev {
            return Err(StoreError::CorruptLog {
                line,
                reason: format!("sequence {} does not follow {prev}", record.sequence),
            });
        }
        prev = record.sequence;
        if record.sequence > state.last_sequence {
            state.apply(&record);
            report.records += 1;
        }
    }
    report.valid_len = offset as u64;
    Ok((state, report))
}

/// Reads the snapshot (if any) and folds the log after it. A missing log is
/// an empty log.
pub fn replay(path: &Path) -> Result<(State, ReplayReport), StoreError> {
    let base = read_snapshot(&snapshot_path(path))?;
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    replay_bytes(&bytes, base)
}

/// Single-writer handle on the log file.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    last_sequence: u64,
}

impl EventLog {
    /// Opens (or creates) the log, replays it and truncates a torn tail so
    /// the next append starts on a clean line.
    pub fn open(path: impl Into<PathBuf>) -> Result<(Self, State, ReplayReport), StoreError> {
        let path = path.into();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let (state, report) = replay(&path)?;
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        if report.ignored_tail_bytes > 0 {
            file.set_len(report.valid_len)?;
            file.sync_data()?;
        }
        let last_sequence = state.last_sequence;
        Ok((
            Self {
                path,
                file,
                last_sequence,
            },
            state,
            report,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn last_sequence(&self) -> u64 {
        self.last_sequence
    }

    /// Writes and syncs one record; returns its sequence number.
    pub fn append(&mut self, event: Event, timestamp: DateTime<Utc>) -> Result<EventRecord, StoreError> {
        let record = EventRecord {
            sequence: self.last_sequence + 1,
            event,
            timestamp,
        };
        let mut line = serde_json::to_vec(&record).map_err(|e| StoreError::Io(e.into()))?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        self.last_sequence = record.sequence;
        Ok(record)
    }

    /// Persists `state` as the snapshot, replacing any previous one.
    pub fn write_snapshot(&self, state: &State) -> Result<(), StoreError> {
        let target = snapshot_path(&self.path);
        let tmp = target.with_extension("snapshot.tmp");
        let bytes = serde_json::to_vec(state).map_err(|e| StoreError::Io(e.into()))?;
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &target)?;
        Ok(())
    }
}
