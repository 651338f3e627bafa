//! Scan middleware: turns decoded tag reads into attendance records.
//!
//! A read of a registered tag resolves to its student and marks them
//! present. A read of an unknown tag opens a pending record stamped with the
//! time of the read; registering the tag later fills in the identity and
//! keeps that first timestamp. Repeat reads inside the debounce window only
//! refresh `last_seen_s`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{Actor, AuditAction, Payload, Store, Student, StudentFields, StudentId};
use crate::tag_protocol::TagId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub u64);

impl std::fmt::Display for SessionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttendanceSession {
    pub id: SessionId,
    pub course: String,
    pub stream: String,
    pub trimester: String,
    pub opened_s: f64,
    pub closed_s: Option<f64>,
    pub state: SessionState,
}

impl AttendanceSession {
    pub fn is_open(&self) -> bool {
        self.state == SessionState::Open
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Present,
    PendingRegistration,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Present => "present",
            RecordStatus::PendingRegistration => "pending_registration",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttendanceRecord {
    pub session_ref: SessionId,
    pub tag_id: TagId,
    pub student_ref: Option<StudentId>,
    pub first_seen_s: f64,
    pub last_seen_s: f64,
    pub status: RecordStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Resolved,
    Unknown,
    Corrupt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEvent {
    pub kind: ScanKind,
    pub tag_id: Option<TagId>,
    pub student_ref: Option<StudentId>,
    pub timestamp_s: f64,
    pub session_ref: SessionId,
}

/// Result of ingesting one read.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutcome {
    /// `None` when the read fell inside the debounce window.
    pub event: Option<ScanEvent>,
    pub record: AttendanceRecord,
    pub student: Option<Student>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttendanceConfig {
    pub debounce_s: f64,
}

impl Default for AttendanceConfig {
    fn default() -> Self {
        AttendanceConfig { debounce_s: 2.0 }
    }
}

/// The middleware. Owns the store and is the only writer to it.
#[derive(Debug, Default)]
pub struct Attendance {
    store: Store,
    cfg: AttendanceConfig,
    corrupt_frames: BTreeMap<SessionId, u64>,
    high_water: BTreeMap<SessionId, f64>,
}

impl Attendance {
    pub fn new(store: Store, cfg: AttendanceConfig) -> Self {
        Attendance { store, cfg, corrupt_frames: BTreeMap::new(), high_water: BTreeMap::new() }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut Store {
        &mut self.store
    }

    pub fn into_store(self) -> Store {
        self.store
    }

    pub fn config(&self) -> &AttendanceConfig {
        &self.cfg
    }

    pub fn session(&self, id: SessionId) -> Result<&AttendanceSession> {
        self.store
            .state()
            .session(id)
            .ok_or_else(|| Error::NotFound(format!("session {id}")))
    }

    /// The open session for `course`, if any.
    pub fn open_session_for(&self, course: &str) -> Option<&AttendanceSession> {
        self.store.state().sessions().find(|s| s.is_open() && s.course == course)
    }

    pub fn corrupt_frames(&self, session: SessionId) -> u64 {
        self.corrupt_frames.get(&session).copied().unwrap_or(0)
    }

    pub fn open_session(
        &mut self,
        actor: &Actor,
        course: &str,
        stream: &str,
        trimester: &str,
        now: f64,
    ) -> Result<AttendanceSession> {
        if course.trim().is_empty() {
            return Err(Error::Validation("course must not be empty".into()));
        }
        if self.open_session_for(course).is_some() {
            return Err(Error::SessionAlreadyOpen(course.to_string()));
        }
        let session = AttendanceSession {
            id: self.store.state().next_session_id(),
            course: course.into(),
            stream: stream.into(),
            trimester: trimester.into(),
            opened_s: now,
            closed_s: None,
            state: SessionState::Open,
        };
        self.store.append(actor, AuditAction::OpenSession, Payload::Session(session.clone()), now)?;
        self.high_water.insert(session.id, now);
        Ok(session)
    }

    pub fn close_session(&mut self, actor: &Actor, id: SessionId, now: f64) -> Result<AttendanceSession> {
        let mut session = self.open(id)?.clone();
        let now = self.stamp(id, now);
        session.closed_s = Some(now);
        session.state = SessionState::Closed;
        self.store.append(actor, AuditAction::CloseSession, Payload::Session(session.clone()), now)?;
        Ok(session)
    }

    /// Ingests one successfully decoded read.
    pub fn ingest_scan(&mut self, session: SessionId, tag: TagId, now: f64) -> Result<ScanOutcome> {
        self.open(session)?;
        let now = self.stamp(session, now);
        let student = self.store.lookup_by_tag(tag).cloned();
        let existing = self.store.state().record(session, tag).cloned();

        let debounced = existing
            .as_ref()
            .is_some_and(|r| now - r.last_seen_s < self.cfg.debounce_s);

        let mut record = existing.unwrap_or(AttendanceRecord {
            session_ref: session,
            tag_id: tag,
            student_ref: None,
            first_seen_s: now,
            last_seen_s: now,
            status: RecordStatus::PendingRegistration,
        });
        record.last_seen_s = now;
        if let Some(s) = &student {
            record.student_ref = Some(s.id);
            record.status = RecordStatus::Present;
        }
        self.store.append(
            &Actor::middleware(),
            AuditAction::RecordScan,
            Payload::Record(record.clone()),
            now,
        )?;

        let event = (!debounced).then(|| ScanEvent {
            kind: if student.is_some() { ScanKind::Resolved } else { ScanKind::Unknown },
            tag_id: Some(tag),
            student_ref: student.as_ref().map(|s| s.id),
            timestamp_s: now,
            session_ref: session,
        });
        Ok(ScanOutcome { event, record, student })
    }

    /// Counts a garbled frame against `session`. Never touches the ledger.
    pub fn ingest_corrupt(&mut self, session: SessionId, now: f64) -> Result<ScanEvent> {
        self.open(session)?;
        let now = self.stamp(session, now);
        *self.corrupt_frames.entry(session).or_default() += 1;
        Ok(ScanEvent {
            kind: ScanKind::Corrupt,
            tag_id: None,
            student_ref: None,
            timestamp_s: now,
            session_ref: session,
        })
    }

    /// Registers the owner of a pending tag in `session`.
    pub fn complete_registration(
        &mut self,
        actor: &Actor,
        session: SessionId,
        tag: TagId,
        fields: StudentFields,
        now: f64,
    ) -> Result<AttendanceRecord> {
        self.session(session)?;
        let pending = self
            .store
            .state()
            .record(session, tag)
            .filter(|r| r.status == RecordStatus::PendingRegistration)
            .cloned()
            .ok_or(Error::NoPendingRecord(tag))?;
        let student = self.store.put_student(actor, fields, tag, now)?;
        self.promote(actor, pending, student, now)
    }

    /// Registers a student and promotes every pending record of their tag,
    /// across all sessions. Returns the new id and the promoted records.
    pub fn register_student(
        &mut self,
        actor: &Actor,
        fields: StudentFields,
        tag: TagId,
        now: f64,
    ) -> Result<(StudentId, Vec<AttendanceRecord>)> {
        let student = self.store.put_student(actor, fields, tag, now)?;
        let pending: Vec<AttendanceRecord> = self
            .store
            .state()
            .all_records()
            .filter(|r| r.tag_id == tag && r.status == RecordStatus::PendingRegistration)
            .cloned()
            .collect();
        let promoted = pending
            .into_iter()
            .map(|r| self.promote(actor, r, student, now))
            .collect::<Result<_>>()?;
        Ok((student, promoted))
    }

    fn promote(
        &mut self,
        actor: &Actor,
        mut record: AttendanceRecord,
        student: StudentId,
        now: f64,
    ) -> Result<AttendanceRecord> {
        record.student_ref = Some(student);
        record.status = RecordStatus::Present;
        self.store.append(
            actor,
            AuditAction::CompleteRegistration,
            Payload::Record(record.clone()),
            now,
        )?;
        Ok(record)
    }

    fn open(&self, id: SessionId) -> Result<&AttendanceSession> {
        let session = self.session(id)?;
        if !session.is_open() {
            return Err(Error::SessionClosed);
        }
        Ok(session)
    }

    /// Clamps `now` so timestamps within a session never go backwards.
    fn stamp(&mut self, id: SessionId, now: f64) -> f64 {
        let state = self.store.state();
        let floor = *self.high_water.entry(id).or_insert_with(|| {
            let opened = state.session(id).map_or(f64::MIN, |s| s.opened_s);
            state.records(id).map(|r| r.last_seen_s).fold(opened, f64::max)
        });
        let now = now.max(floor);
        self.high_water.insert(id, now);
        now
    }
}
