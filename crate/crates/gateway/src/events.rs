//! Per-session event sequencing and fan-out.
//!
//! Every event published for a session gets the next sequence number. A
//! subscriber either resumes after a sequence number it already has (served
//! from the retained history) or starts from a state snapshot whose `seq`
//! marks where the live tail begins.

use std::collections::{HashMap, VecDeque};

use rfid_attendance::{ScanEvent, SessionId, Student, StudentId};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

pub const SCHEMA_VERSION: u32 = 1;
const HISTORY_LIMIT: usize = 10_000;
const CHANNEL_CAPACITY: usize = 1024;

/// Fields shown to the operator when a tag resolves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentSummary {
    pub id: StudentId,
    pub name: String,
    pub course: String,
    pub stream: String,
    pub trimester: String,
}

impl From<&Student> for StudentSummary {
    fn from(s: &Student) -> Self {
        StudentSummary {
            id: s.id,
            name: s.name.clone(),
            course: s.course.clone(),
            stream: s.stream.clone(),
            trimester: s.trimester.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReaderStatus {
    Connected,
    Disconnected,
    Ended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventBody {
    Scan {
        scan: ScanEvent,
        #[serde(skip_serializing_if = "Option::is_none")]
        student: Option<StudentSummary>,
    },
    Registration {
        tag_id: rfid_attendance::TagId,
        student: StudentSummary,
    },
    Status {
        reader: ReaderStatus,
        detail: String,
    },
    SessionClosed {
        closed_s: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiEvent {
    pub schema: u32,
    pub seq: u64,
    pub session: SessionId,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug)]
struct Channel {
    last_seq: u64,
    history: VecDeque<ApiEvent>,
    tx: broadcast::Sender<ApiEvent>,
}

impl Channel {
    fn new() -> Self {
        Channel { last_seq: 0, history: VecDeque::new(), tx: broadcast::channel(CHANNEL_CAPACITY).0 }
    }
}

pub struct Subscription {
    /// Events after the requested sequence number, or `None` when the
    /// caller must start from a snapshot.
    pub replay: Option<Vec<ApiEvent>>,
    /// Sequence number the snapshot (or replay) is current to.
    pub last_seq: u64,
    pub rx: broadcast::Receiver<ApiEvent>,
}

#[derive(Debug, Default)]
pub struct EventHub {
    channels: HashMap<SessionId, Channel>,
}

impl EventHub {
    pub fn publish(&mut self, session: SessionId, body: EventBody) -> ApiEvent {
        let ch = self.channels.entry(session).or_insert_with(Channel::new);
        ch.last_seq += 1;
        let event = ApiEvent { schema: SCHEMA_VERSION, seq: ch.last_seq, session, body };
        if ch.history.len() == HISTORY_LIMIT {
            ch.history.pop_front();
        }
        ch.history.push_back(event.clone());
        // no receivers is fine
        let _ = ch.tx.send(event.clone());
        event
    }

    /// Ends every live subscription. Sequence numbers are kept.
    pub fn close_all(&mut self) {
        for ch in self.channels.values_mut() {
            ch.tx = broadcast::channel(CHANNEL_CAPACITY).0;
        }
    }

    pub fn last_seq(&self, session: SessionId) -> u64 {
        self.channels.get(&session).map_or(0, |c| c.last_seq)
    }

    /// Must be called under the same lock that serializes `publish`.
    pub fn subscribe(&mut self, session: SessionId, since: Option<u64>) -> Subscription {
        let ch = self.channels.entry(session).or_insert_with(Channel::new);
        let replay = since.and_then(|after| {
            let oldest = ch.history.front().map_or(ch.last_seq + 1, |e| e.seq);
            (after <= ch.last_seq && after + 1 >= oldest)
                .then(|| ch.history.iter().filter(|e| e.seq > after).cloned().collect())
        });
        Subscription { replay, last_seq: ch.last_seq, rx: ch.tx.subscribe() }
    }
}
