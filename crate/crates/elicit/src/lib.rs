//! Live pairwise-comparison questionnaire: seeded pair schedules, judgment
//! capture, consistency feedback and the review/revision loop, served over
//! HTTP+JSON.

pub mod http;
pub mod session;
pub mod store;

pub use http::{router, ErrorBody, NextResponse, SubmitRequest};
pub use session::{
    pair_schedule, seed_from_id, Command, Event, PairView, Progress, ProtocolError, ReviewDecision, Session,
    SessionSpec, SessionState,
};
pub use store::{export, CreateRequest, Export, SessionStore, StoreConfig, StoreError};
