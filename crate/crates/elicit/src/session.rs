//! One respondent's pass through the questionnaire.
//!
//! A [`Session`] is a pure value: every mutation goes through
//! [`Session::apply`], which either returns the [`Event`] to record or a
//! [`ProtocolError`] and leaves the session untouched. Replaying the recorded
//! events onto [`Session::create`] rebuilds the same session.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use prefscope_core::ahp::{all_pairs, matrix_from_judgments, most_inconsistent_pairs, transitivity_violations};
use prefscope_core::formats::StudyProfile;
use prefscope_core::{
    ev_priorities, ConsistencyReport, Judgment, PairwiseMatrix, PriorityVector, SaatyGrade, StudyDesign, StudyFile,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Largest item count with a tabulated random index.
pub const MAX_ITEMS: usize = 10;

/// CR at or below which a questionnaire is considered consistent. Shown as
/// guidance only; acceptance never depends on it.
pub const CR_GUIDANCE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    InProgress,
    AwaitingReview,
    Revising,
    Complete,
}

impl SessionState {
    /// Every edge of the state machine. Self-loops are not listed; they
    /// happen on intermediate submissions and on an empty revision.
    pub const EDGES: [(SessionState, SessionState); 4] = [
        (SessionState::InProgress, SessionState::AwaitingReview),
        (SessionState::AwaitingReview, SessionState::Revising),
        (SessionState::Revising, SessionState::AwaitingReview),
        (SessionState::AwaitingReview, SessionState::Complete),
    ];

    pub fn allows(self, to: SessionState) -> bool {
        self == to || Self::EDGES.contains(&(self, to))
    }
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionState::InProgress => "in_progress",
            SessionState::AwaitingReview => "awaiting_review",
            SessionState::Revising => "revising",
            SessionState::Complete => "complete",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("invalid study: {0}")]
    InvalidStudy(String),
    #[error("invalid session id {0:?}: use 1-64 characters from [A-Za-z0-9_-]")]
    InvalidSessionId(String),
    #[error("pair {0} does not exist")]
    UnknownPair(usize),
    #[error("pair {pair} is not open for judgment (expected {expected})")]
    OutOfOrder { pair: usize, expected: String },
    #[error("pair {0} was already judged")]
    Duplicate(usize),
    #[error("{action} is not allowed while the session is {state}")]
    WrongState { action: &'static str, state: SessionState },
}

impl ProtocolError {
    /// Stable machine-readable code for the wire protocol.
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::InvalidStudy(_) => "invalid_study",
            ProtocolError::InvalidSessionId(_) => "invalid_session_id",
            ProtocolError::UnknownPair(_) => "unknown_pair",
            ProtocolError::OutOfOrder { .. } => "out_of_order",
            ProtocolError::Duplicate(_) => "duplicate_judgment",
            ProtocolError::WrongState { .. } => "wrong_state",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum ReviewDecision {
    Accept,
    /// Reopen the listed pair indices.
    Revise { pairs: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    Submit { pair: usize, grade: SaatyGrade },
    Review(ReviewDecision),
}

/// Everything needed to start a session; the first line of its log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub session_id: String,
    pub study: StudyFile,
    #[serde(default)]
    pub respondent: BTreeMap<String, String>,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub transitivity_indicator: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created(SessionSpec),
    Judged { pair: usize, grade: SaatyGrade },
    Reviewed(ReviewDecision),
}

/// Pair indices follow the scheduled order; `pairs[k] = (left, right)` is
/// the k-th pair shown, with `left` displayed on the left.
#[derive(Clone, Debug, PartialEq)]
pub struct Session {
    pub spec: SessionSpec,
    design: StudyDesign,
    pub pairs: Vec<(usize, usize)>,
    pub judgments: BTreeMap<usize, SaatyGrade>,
    pub state: SessionState,
    /// Pairs reopened by the last revision that still need an answer.
    pub reopened: BTreeSet<usize>,
    pub result: Option<(PriorityVector, ConsistencyReport)>,
    /// Number of completed review rounds that asked for revisions.
    pub revision_rounds: usize,
}

/// Derives a per-respondent seed from the session id.
pub fn seed_from_id(session_id: &str) -> u64 {
    let digest = Sha256::digest(session_id.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// All unordered pairs of `n` items in a seeded random order.
pub fn pair_schedule(n: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut pairs = all_pairs(n);
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    pairs
}

pub fn valid_session_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

fn check_study(study: &StudyFile) -> Result<StudyDesign, ProtocolError> {
    let design = study.design().map_err(|e| ProtocolError::InvalidStudy(e.to_string()))?;
    let n = design.n_items();
    if !(2..=MAX_ITEMS).contains(&n) {
        return Err(ProtocolError::InvalidStudy(format!(
            "{n} profiles; sessions support 2 to {MAX_ITEMS}"
        )));
    }
    Ok(design)
}

/// One pair as presented.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairView {
    pub pair: usize,
    pub left: ProfileView,
    pub right: ProfileView,
    pub answered: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileView {
    pub index: usize,
    pub label: String,
    pub asset: Option<String>,
}

/// Pair flagged for possible revision, worst first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevisionHint {
    pub pair: usize,
    pub left: String,
    pub right: String,
    /// `|ln(a_ij w_j / w_i)|`
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultView {
    /// In profile order, aligned with `weights`.
    pub labels: Vec<String>,
    pub weights: Vec<f64>,
    pub consistency: ConsistencyReport,
    pub above_guidance: bool,
}

/// Snapshot returned by every protocol call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub session_id: String,
    pub state: SessionState,
    pub answered: usize,
    pub total: usize,
    pub next: Option<PairView>,
    pub reopened: Vec<usize>,
    pub result: Option<ResultView>,
    /// Violated 3-cycles among answered pairs; `None` when disabled.
    pub transitivity_violations: Option<usize>,
    pub revision_hints: Vec<RevisionHint>,
}

const HINT_COUNT: usize = 3;

impl Session {
    pub fn create(spec: SessionSpec) -> Result<Self, ProtocolError> {
        if !valid_session_id(&spec.session_id) {
            return Err(ProtocolError::InvalidSessionId(spec.session_id));
        }
        let design = check_study(&spec.study)?;
        let pairs = pair_schedule(design.n_items(), spec.seed);
        Ok(Self {
            spec,
            design,
            pairs,
            judgments: BTreeMap::new(),
            state: SessionState::InProgress,
            reopened: BTreeSet::new(),
            result: None,
            revision_rounds: 0,
        })
    }

    /// Rebuilds a session from its log.
    pub fn replay(events: &[Event]) -> Result<Self, ReplayError> {
        let (first, rest) = events.split_first().ok_or(ReplayError::Empty)?;
        let Event::Created(spec) = first else {
            return Err(ReplayError::MissingCreate);
        };
        let mut s = Session::create(spec.clone()).map_err(|e| ReplayError::Rejected { index: 0, error: e })?;
        for (i, e) in rest.iter().enumerate() {
            let cmd = match e {
                Event::Created(_) => return Err(ReplayError::DuplicateCreate(i + 1)),
                Event::Judged { pair, grade } => Command::Submit {
                    pair: *pair,
                    grade: *grade,
                },
                Event::Reviewed(d) => Command::Review(d.clone()),
            };
            s.apply(&cmd).map_err(|error| ReplayError::Rejected { index: i + 1, error })?;
        }
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.spec.session_id
    }

    pub fn design(&self) -> &StudyDesign {
        &self.design
    }

    pub fn total(&self) -> usize {
        self.pairs.len()
    }

    /// Answered pairs, excluding ones reopened for revision.
    pub fn answered(&self) -> usize {
        self.judgments.len()
    }

    /// Next pair the respondent should judge.
    pub fn current_pair(&self) -> Option<usize> {
        match self.state {
            SessionState::InProgress => Some(self.judgments.len()),
            SessionState::Revising => self.reopened.iter().next().copied(),
            _ => None,
        }
    }

    fn judgment_list(&self) -> Vec<Judgment> {
        self.judgments
            .iter()
            .map(|(&k, &g)| {
                let (l, r) = self.pairs[k];
                Judgment::new(l, r, g)
            })
            .collect()
    }

    /// Full comparison matrix; `None` until every pair is answered.
    pub fn matrix(&self) -> Option<PairwiseMatrix> {
        if self.judgments.len() != self.pairs.len() {
            return None;
        }
        matrix_from_judgments(self.design().n_items(), &self.judgment_list()).ok()
    }

    /// Judged ratio `a_ij` for each answered pair, oriented `i < j`.
    fn answered_ratio(&self, i: usize, j: usize) -> Option<f64> {
        self.judgments.iter().find_map(|(&k, g)| match self.pairs[k] {
            (l, r) if (l, r) == (i, j) => Some(g.ratio()),
            (l, r) if (r, l) == (i, j) => Some(1.0 / g.ratio()),
            _ => None,
        })
    }

    pub fn transitivity_violations(&self) -> Vec<[usize; 3]> {
        transitivity_violations(self.design().n_items(), |i, j| self.answered_ratio(i, j))
    }

    fn pair_index(&self, a: usize, b: usize) -> usize {
        self.pairs
            .iter()
            .position(|&p| p == (a, b) || p == (b, a))
            .expect("schedule covers every pair")
    }

    pub fn revision_hints(&self) -> Vec<RevisionHint> {
        let (Some(m), Some((w, _))) = (self.matrix(), self.result.as_ref()) else {
            return Vec::new();
        };
        let labels = self.design().labels();
        most_inconsistent_pairs(&m, w)
            .into_iter()
            .take(HINT_COUNT)
            .map(|((i, j), deviation)| {
                let pair = self.pair_index(i, j);
                let (l, r) = self.pairs[pair];
                RevisionHint {
                    pair,
                    left: labels[l].to_string(),
                    right: labels[r].to_string(),
                    deviation,
                }
            })
            .collect()
    }

    fn profile_view(&self, index: usize) -> ProfileView {
        let p: Option<&StudyProfile> = self.spec.study.profiles.get(index);
        ProfileView {
            index,
            label: self.design().labels()[index].to_string(),
            asset: p.and_then(|p| p.asset.clone()),
        }
    }

    pub fn next_view(&self) -> Option<PairView> {
        let k = self.current_pair()?;
        let (l, r) = self.pairs[k];
        Some(PairView {
            pair: k,
            left: self.profile_view(l),
            right: self.profile_view(r),
            answered: self.answered(),
            total: self.total(),
        })
    }

    pub fn progress(&self) -> Progress {
        let result = self.result.as_ref().map(|(w, c)| ResultView {
            labels: self.design().labels().into_iter().map(str::to_string).collect(),
            weights: w.weights().to_vec(),
            consistency: c.clone(),
            above_guidance: c.cr > CR_GUIDANCE,
        });
        Progress {
            session_id: self.id().to_string(),
            state: self.state,
            answered: self.answered(),
            total: self.total(),
            next: self.next_view(),
            reopened: self.reopened.iter().copied().collect(),
            result,
            transitivity_violations: self
                .spec
                .transitivity_indicator
                .then(|| self.transitivity_violations().len()),
            revision_hints: if self.state == SessionState::AwaitingReview {
                self.revision_hints()
            } else {
                Vec::new()
            },
        }
    }

    fn finish_round(&mut self) {
        let m = self.matrix().expect("every pair answered");
        self.result = Some(ev_priorities(&m).expect("judged matrices are positive"));
        self.state = SessionState::AwaitingReview;
    }

    /// Applies one command, returning the event to append to the log.
    pub fn apply(&mut self, cmd: &Command) -> Result<Event, ProtocolError> {
        match cmd {
            Command::Submit { pair, grade } => self.submit(*pair, *grade),
            Command::Review(d) => self.review(d),
        }
    }

    fn submit(&mut self, pair: usize, grade: SaatyGrade) -> Result<Event, ProtocolError> {
        if pair >= self.pairs.len() {
            return Err(ProtocolError::UnknownPair(pair));
        }
        match self.state {
            SessionState::InProgress => {
                let expected = self.judgments.len();
                if pair < expected {
                    return Err(ProtocolError::Duplicate(pair));
                }
                if pair != expected {
                    return Err(ProtocolError::OutOfOrder {
                        pair,
                        expected: expected.to_string(),
                    });
                }
                self.judgments.insert(pair, grade);
                if self.judgments.len() == self.pairs.len() {
                    self.finish_round();
                }
            }
            SessionState::Revising => {
                if !self.reopened.contains(&pair) {
                    return Err(if self.judgments.contains_key(&pair) {
                        ProtocolError::Duplicate(pair)
                    } else {
                        ProtocolError::OutOfOrder {
                            pair,
                            expected: format!("{:?}", self.reopened),
                        }
                    });
                }
                self.reopened.remove(&pair);
                self.judgments.insert(pair, grade);
                if self.reopened.is_empty() {
                    self.finish_round();
                }
            }
            state => return Err(ProtocolError::WrongState { action: "submit", state }),
        }
        Ok(Event::Judged { pair, grade })
    }

    fn review(&mut self, decision: &ReviewDecision) -> Result<Event, ProtocolError> {
        if self.state != SessionState::AwaitingReview {
            return Err(ProtocolError::WrongState {
                action: "review",
                state: self.state,
            });
        }
        match decision {
            ReviewDecision::Accept => self.state = SessionState::Complete,
            ReviewDecision::Revise { pairs } => {
                if let Some(&bad) = pairs.iter().find(|&&p| p >= self.pairs.len()) {
                    return Err(ProtocolError::UnknownPair(bad));
                }
                if !pairs.is_empty() {
                    for p in pairs {
                        self.judgments.remove(p);
                        self.reopened.insert(*p);
                    }
                    self.result = None;
                    self.revision_rounds += 1;
                    self.state = SessionState::Revising;
                }
            }
        }
        Ok(Event::Reviewed(decision.clone()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("event log is empty")]
    Empty,
    #[error("event log does not start with a created event")]
    MissingCreate,
    #[error("second created event at line {0}")]
    DuplicateCreate(usize),
    #[error("event {index} was rejected on replay: {error}")]
    Rejected { index: usize, error: ProtocolError },
}
