//! Concurrent session registry backed by append-only JSON-lines logs.
//!
//! Each session sits behind its own mutex so commands on one session are
//! serialized while other sessions proceed independently. A command is
//! applied to a copy, logged, and only then committed, so the in-memory
//! state never runs ahead of the log.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use prefscope_core::formats::{write_judgments, write_weights};
use prefscope_core::{JudgmentRow, SaatyGrade, StudyFile, SubjectRecord};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{
    seed_from_id, Command, Event, PairView, Progress, ProtocolError, ReplayError, ReviewDecision, Session,
    SessionSpec, SessionState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("no session {0:?}")]
    NotFound(String),
    #[error("session {0:?} already exists")]
    AlreadyExists(String),
    #[error("request names no study and the service has no default study")]
    NoStudy,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    BadLog { path: String, line: usize, message: String },
    #[error("{path}: {error}")]
    Replay { path: String, error: ReplayError },
    #[error("sessions not complete: {}", .0.join(", "))]
    Incomplete(Vec<String>),
    #[error("sessions use different studies; export them separately")]
    MixedStudies,
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::Protocol(e) => e.code(),
            StoreError::NotFound(_) => "not_found",
            StoreError::AlreadyExists(_) => "already_exists",
            StoreError::NoStudy => "no_study",
            StoreError::Io { .. } | StoreError::BadLog { .. } | StoreError::Replay { .. } => "storage_error",
            StoreError::Incomplete(_) => "incomplete_sessions",
            StoreError::MixedStudies => "mixed_studies",
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> StoreError {
    StoreError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[derive(Clone, Debug, Default)]
pub struct StoreConfig {
    /// Directory holding one `<session_id>.jsonl` log per session. Sessions
    /// live in memory only when unset.
    pub log_dir: Option<PathBuf>,
    /// Used by create requests that do not carry a study.
    pub default_study: Option<StudyFile>,
    /// Off disables the mid-session transitivity count for new sessions.
    pub disable_transitivity_indicator: bool,
    /// Study-wide seed; each session without its own seed derives one from
    /// this and its id.
    pub base_seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub session_id: Option<String>,
    pub study: Option<StudyFile>,
    #[serde(default)]
    pub respondent: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub transitivity_indicator: Option<bool>,
}

/// Judgments and weights files in the CLI formats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Export {
    /// `None` when no sessions were exported.
    pub study: Option<StudyFile>,
    pub sessions: Vec<String>,
    pub judgments: String,
    pub weights: String,
}

pub struct SessionStore {
    config: StoreConfig,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
}

impl SessionStore {
    pub fn new(config: StoreConfig) -> Self {
        Self {
            config,
            sessions: RwLock::new(BTreeMap::new()),
        }
    }

    /// Opens the store and replays every log found in the log directory.
    pub fn open(config: StoreConfig) -> Result<Self, StoreError> {
        let store = Self::new(config);
        let Some(dir) = store.config.log_dir.clone() else {
            return Ok(store);
        };
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| io_error(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut map = store.sessions.write().expect("lock");
        for path in paths {
            let session = replay_file(&path)?;
            map.insert(session.id().to_string(), Arc::new(Mutex::new(session)));
        }
        drop(map);
        Ok(store)
    }

    fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.config.log_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    fn append(&self, id: &str, event: &Event, create: bool) -> Result<(), StoreError> {
        let Some(path) = self.log_path(id) else {
            return Ok(());
        };
        let mut line = serde_json::to_string(event).expect("events serialize");
        line.push('\n');
        let mut f = OpenOptions::new()
            .append(true)
            .create_new(create)
            .open(&path)
            .map_err(|e| io_error(&path, e))?;
        f.write_all(line.as_bytes()).map_err(|e| io_error(&path, e))?;
        f.sync_data().map_err(|e| io_error(&path, e))
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, StoreError> {
        self.sessions
            .read()
            .expect("lock")
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    pub fn create(&self, req: CreateRequest) -> Result<Progress, StoreError> {
        let session_id = req.session_id.unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
        let study = req.study.or_else(|| self.config.default_study.clone()).ok_or(StoreError::NoStudy)?;
        let spec = SessionSpec {
            seed: req.seed.unwrap_or_else(|| match self.config.base_seed {
                Some(base) => seed_from_id(&format!("{base}:{session_id}")),
                None => seed_from_id(&session_id),
            }),
            session_id,
            study,
            respondent: req.respondent,
            transitivity_indicator: req
                .transitivity_indicator
                .unwrap_or(!self.config.disable_transitivity_indicator),
        };
        let session = Session::create(spec.clone())?;
        let mut map = self.sessions.write().expect("lock");
        let id = session.id().to_string();
        if map.contains_key(&id) {
            return Err(StoreError::AlreadyExists(id));
        }
        if self.log_path(&id).is_some_and(|p| p.exists()) {
            return Err(StoreError::AlreadyExists(id));
        }
        self.append(&id, &Event::Created(spec), true)?;
        let progress = session.progress();
        map.insert(id, Arc::new(Mutex::new(session)));
        Ok(progress)
    }

    fn command(&self, id: &str, cmd: Command) -> Result<Progress, StoreError> {
        let cell = self.get(id)?;
        let mut guard = cell.lock().expect("lock");
        let mut next = guard.clone();
        let event = next.apply(&cmd)?;
        self.append(id, &event, false)?;
        *guard = next;
        Ok(guard.progress())
    }

    pub fn submit(&self, id: &str, pair: usize, grade: SaatyGrade) -> Result<Progress, StoreError> {
        self.command(id, Command::Submit { pair, grade })
    }

    pub fn review(&self, id: &str, decision: ReviewDecision) -> Result<Progress, StoreError> {
        self.command(id, Command::Review(decision))
    }

    /// Point-in-time copy of one session.
    pub fn snapshot(&self, id: &str) -> Result<Session, StoreError> {
        Ok(self.get(id)?.lock().expect("lock").clone())
    }

    pub fn status(&self, id: &str) -> Result<Progress, StoreError> {
        Ok(self.snapshot(id)?.progress())
    }

    pub fn next(&self, id: &str) -> Result<Option<PairView>, StoreError> {
        Ok(self.snapshot(id)?.next_view())
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions.read().expect("lock").keys().cloned().collect()
    }

    /// Snapshots of every session, sorted by id.
    pub fn snapshots(&self) -> Vec<Session> {
        let cells: Vec<_> = self.sessions.read().expect("lock").values().cloned().collect();
        cells.iter().map(|c| c.lock().expect("lock").clone()).collect()
    }

    pub fn export(&self, partial: bool) -> Result<Export, StoreError> {
        export(&self.snapshots(), partial)
    }
}

fn replay_file(path: &Path) -> Result<Session, StoreError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let events = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<Event>(l).map_err(|e| StoreError::BadLog {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Session::replay(&events).map_err(|error| StoreError::Replay {
        path: path.display().to_string(),
        error,
    })
}

/// Judgments and weights of the given sessions. Incomplete sessions are an
/// error unless `partial`, in which case their answered pairs are exported
/// and their weights only once computed.
pub fn export(sessions: &[Session], partial: bool) -> Result<Export, StoreError> {
    let mut sessions: Vec<&Session> = sessions.iter().collect();
    sessions.sort_by(|a, b| a.id().cmp(b.id()));
    let incomplete: Vec<String> = sessions
        .iter()
        .filter(|s| s.state != SessionState::Complete)
        .map(|s| s.id().to_string())
        .collect();
    if !partial && !incomplete.is_empty() {
        return Err(StoreError::Incomplete(incomplete));
    }
    let study = sessions.first().map(|s| s.spec.study.clone());
    if sessions.iter().any(|s| Some(&s.spec.study) != study.as_ref()) {
        return Err(StoreError::MixedStudies);
    }
    let design = sessions.first().map(|s| s.design().clone());
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for s in &sessions {
        let labels = s.design().labels();
        for (&k, &g) in &s.judgments {
            let (l, r) = s.pairs[k];
            rows.push(JudgmentRow::new(s.id(), labels[l], labels[r], g));
        }
        if let Some((w, c)) = &s.result {
            let mut rec = SubjectRecord::new(s.id(), w.clone());
            rec.consistency = Some(c.clone());
            rec.demographics = s.spec.respondent.clone();
            records.push(rec);
        }
    }
    let weights = match &design {
        Some(d) => write_weights(&records, d),
        None => prefscope_core::formats::WEIGHTS_HEADER.join(",") + "\n",
    };
    Ok(Export {
        study,
        sessions: sessions.iter().map(|s| s.id().to_string()).collect(),
        judgments: write_judgments(&rows),
        weights,
    })
}
