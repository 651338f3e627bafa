//! Shared service state: the middleware, its event hub and the clock.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use rfid_attendance::reporting::build_report;
use rfid_attendance::{
    Attendance, AttendanceRecord, AttendanceSession, BridgeOutput, ReaderBridge, SessionId,
};
use serde::Serialize;

use crate::events::{EventBody, EventHub, ReaderStatus, StudentSummary};

pub trait Clock: Send + Sync {
    /// Seconds on the service time base.
    fn now(&self) -> f64;
}

#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
    }
}

/// Clock that only moves when told to. Used by tests and replays.
#[derive(Debug, Default)]
pub struct ManualClock {
    micros: AtomicU64,
}

impl ManualClock {
    pub fn set(&self, seconds: f64) {
        self.micros.store((seconds * 1e6).round() as u64, Ordering::SeqCst);
    }

    pub fn advance(&self, seconds: f64) {
        self.micros.fetch_add((seconds * 1e6).round() as u64, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> f64 {
        self.micros.load(Ordering::SeqCst) as f64 / 1e6
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RecordView {
    #[serde(flatten)]
    pub record: AttendanceRecord,
    pub student: Option<StudentSummary>,
}

/// Session state as served by `GET /sessions/{id}` and the stream snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    pub session: AttendanceSession,
    pub records: Vec<RecordView>,
    pub corrupt_frames: u64,
    /// Latest reader status, if the reader has reported one.
    pub reader: Option<ReaderStatus>,
    /// Last event sequence number reflected in this view.
    pub seq: u64,
}

/// Everything behind the single writer lock.
#[derive(Debug)]
pub struct Core {
    pub attendance: Attendance,
    pub hub: EventHub,
    pub unrouted_frames: u64,
    pub reader: Option<ReaderStatus>,
}

impl Core {
    pub fn new(attendance: Attendance) -> Self {
        Core { attendance, hub: EventHub::default(), unrouted_frames: 0, reader: None }
    }

    /// The session reader scans are routed to: the most recently opened
    /// one still open.
    pub fn active_session(&self) -> Option<SessionId> {
        self.attendance
            .store()
            .state()
            .sessions()
            .filter(|s| s.is_open())
            .map(|s| s.id)
            .max()
    }

    pub fn session_view(&self, id: SessionId) -> rfid_attendance::Result<SessionView> {
        let state = self.attendance.store().state();
        let session = self.attendance.session(id)?.clone();
        let records = state
            .records(id)
            .map(|r| RecordView {
                record: r.clone(),
                student: r.student_ref.and_then(|s| state.student(s)).map(StudentSummary::from),
            })
            .collect();
        Ok(SessionView {
            session,
            records,
            corrupt_frames: self.attendance.corrupt_frames(id),
            reader: self.reader,
            seq: self.hub.last_seq(id),
        })
    }

    pub fn report_csv(&self, id: SessionId) -> rfid_attendance::Result<Vec<u8>> {
        rfid_attendance::reporting::report_to_csv(&build_report(self.attendance.store().state(), id, 0.0)?)
    }

    /// Feeds reader bytes to the active session and publishes the results.
    pub fn ingest(&mut self, bridge: &mut ReaderBridge, bytes: &[u8], now: f64) -> rfid_attendance::Result<usize> {
        let Some(session) = self.active_session() else {
            self.unrouted_frames += bridge.skip(bytes) as u64;
            return Ok(0);
        };
        let outputs = bridge.feed(&mut self.attendance, session, bytes, now)?;
        let mut published = 0;
        for out in outputs {
            let student = match &out {
                BridgeOutput::Scan(o) => o.student.as_ref().map(StudentSummary::from),
                _ => None,
            };
            if let Some(ev) = out.event() {
                self.hub.publish(session, EventBody::Scan { scan: ev.clone(), student });
                published += 1;
            }
        }
        Ok(published)
    }

    /// Announces a reader status change on every open session.
    pub fn publish_status(&mut self, reader: ReaderStatus, detail: &str) {
        self.reader = Some(reader);
        let open: Vec<SessionId> = self
            .attendance
            .store()
            .state()
            .sessions()
            .filter(|s| s.is_open())
            .map(|s| s.id)
            .collect();
        for id in open {
            self.hub.publish(id, EventBody::Status { reader, detail: detail.to_string() });
        }
    }
}

pub type SharedCore = Arc<Mutex<Core>>;

pub fn lock(core: &SharedCore) -> MutexGuard<'_, Core> {
    // every mutation is a single append, so a poisoned lock still guards a
    // consistent ledger
    core.lock().unwrap_or_else(|p| p.into_inner())
}
