//! Durable registry of students, sessions and attendance records.
//!
//! All state lives in an append-only audit log. Each line carries a CRC-32
//! of its JSON body and a full snapshot of the object it touched, so the
//! store is rebuilt by folding the log from the top. See `docs/store-format.md`
//! for the on-disk layout.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::attendance::{AttendanceRecord, AttendanceSession, SessionId};
use crate::error::{Error, Result};
use crate::tag_protocol::TagId;

pub const LOG_FILE: &str = "audit.log";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const LOG_HEADER: &str = "rfid-attendance-audit v1";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StudentId(pub u64);

impl std::fmt::Display for StudentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Student {
    pub id: StudentId,
    pub name: String,
    pub course: String,
    pub stream: String,
    pub trimester: String,
    pub tag_id: TagId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photo_ref: Option<String>,
    pub registered_s: f64,
    /// Deactivated students keep their history but release their tag.
    pub active: bool,
}

/// Registration form contents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudentFields {
    pub name: String,
    #[serde(default)]
    pub course: String,
    #[serde(default)]
    pub stream: String,
    #[serde(default)]
    pub trimester: String,
    #[serde(default)]
    pub photo_ref: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudentChanges {
    pub name: Option<String>,
    pub course: Option<String>,
    pub stream: Option<String>,
    pub trimester: Option<String>,
    pub tag_id: Option<TagId>,
    pub photo_ref: Option<String>,
    pub active: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Admin,
    Operator,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Actor {
    pub id: String,
    pub role: Role,
}

impl Actor {
    pub fn admin(id: impl Into<String>) -> Self {
        Actor { id: id.into(), role: Role::Admin }
    }

    pub fn operator(id: impl Into<String>) -> Self {
        Actor { id: id.into(), role: Role::Operator }
    }

    /// Identity used for writes made by the scan pipeline itself.
    pub fn middleware() -> Self {
        Actor::operator("middleware")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditAction {
    PutStudent,
    UpdateStudent,
    OpenSession,
    CloseSession,
    RecordScan,
    CompleteRegistration,
}

/// Snapshot of the object an audit entry wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Student(Student),
    Session(AttendanceSession),
    Record(AttendanceRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub actor: String,
    pub action: AuditAction,
    pub payload: Payload,
    pub at_s: f64,
}

/// Materialized view of the audit log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StoreState {
    students: BTreeMap<StudentId, Student>,
    by_tag: HashMap<TagId, StudentId>,
    sessions: BTreeMap<SessionId, AttendanceSession>,
    records: BTreeMap<(SessionId, TagId), AttendanceRecord>,
    last_seq: u64,
}

impl StoreState {
    pub fn apply(&mut self, entry: &AuditEntry) {
        match &entry.payload {
            Payload::Student(s) => {
                if let Some(old) = self.students.get(&s.id) {
                    if self.by_tag.get(&old.tag_id) == Some(&s.id) {
                        self.by_tag.remove(&old.tag_id);
                    }
                }
                if s.active {
                    self.by_tag.insert(s.tag_id, s.id);
                }
                self.students.insert(s.id, s.clone());
            }
            Payload::Session(s) => {
                self.sessions.insert(s.id, s.clone());
            }
            Payload::Record(r) => {
                self.records.insert((r.session_ref, r.tag_id), r.clone());
            }
        }
        self.last_seq = entry.seq;
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn lookup_by_tag(&self, tag: TagId) -> Option<&Student> {
        self.by_tag.get(&tag).and_then(|id| self.students.get(id))
    }

    pub fn student(&self, id: StudentId) -> Option<&Student> {
        self.students.get(&id)
    }

    pub fn students(&self) -> impl Iterator<Item = &Student> {
        self.students.values()
    }

    pub fn session(&self, id: SessionId) -> Option<&AttendanceSession> {
        self.sessions.get(&id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &AttendanceSession> {
        self.sessions.values()
    }

    pub fn record(&self, session: SessionId, tag: TagId) -> Option<&AttendanceRecord> {
        self.records.get(&(session, tag))
    }

    /// Records of one session in tag-id order.
    pub fn records(&self, session: SessionId) -> impl Iterator<Item = &AttendanceRecord> {
        self.records
            .range((session, TagId::from_low_bits(0))..=(session, TagId::from_low_bits(TagId::MAX)))
            .map(|(_, r)| r)
    }

    pub fn all_records(&self) -> impl Iterator<Item = &AttendanceRecord> {
        self.records.values()
    }

    fn next_student_id(&self) -> StudentId {
        StudentId(self.students.keys().next_back().map_or(1, |id| id.0 + 1))
    }

    pub(crate) fn next_session_id(&self) -> SessionId {
        SessionId(self.sessions.keys().next_back().map_or(1, |id| id.0 + 1))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    seq: u64,
    students: Vec<Student>,
    sessions: Vec<AttendanceSession>,
    records: Vec<AttendanceRecord>,
}

impl Snapshot {
    fn of(state: &StoreState) -> Self {
        Snapshot {
            version: SNAPSHOT_VERSION,
            seq: state.last_seq,
            students: state.students.values().cloned().collect(),
            sessions: state.sessions.values().cloned().collect(),
            records: state.records.values().cloned().collect(),
        }
    }

    fn into_state(self) -> StoreState {
        let mut state = StoreState::default();
        for s in self.students {
            if s.active {
                state.by_tag.insert(s.tag_id, s.id);
            }
            state.students.insert(s.id, s);
        }
        for s in self.sessions {
            state.sessions.insert(s.id, s);
        }
        for r in self.records {
            state.records.insert((r.session_ref, r.tag_id), r);
        }
        state.last_seq = self.seq;
        state
    }
}

/// What [`recover`] found on disk.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Recovery {
    pub entries: Vec<AuditEntry>,
    /// Byte length of the valid prefix of the log.
    pub valid_len: u64,
    /// Bytes of an incomplete final line that were dropped.
    pub torn_bytes: u64,
    pub used_snapshot: bool,
    pub warnings: Vec<String>,
}

pub fn encode_line(entry: &AuditEntry) -> Result<String> {
    let body = serde_json::to_string(entry)?;
    Ok(format!("{:08x} {body}\n", crc32fast::hash(body.as_bytes())))
}

fn check_line(line: &[u8]) -> std::result::Result<&[u8], String> {
    if line.len() < 10 || line[8] != b' ' {
        return Err("missing checksum prefix".into());
    }
    let (crc_text, body) = (&line[..8], &line[9..]);
    let carried = std::str::from_utf8(crc_text)
        .ok()
        .and_then(|s| u32::from_str_radix(s, 16).ok())
        .ok_or_else(|| "unreadable checksum".to_string())?;
    let computed = crc32fast::hash(body);
    if carried != computed {
        return Err(format!("checksum {carried:08x} does not match body {computed:08x}"));
    }
    Ok(body)
}

/// Reads the store in `dir` without modifying it.
///
/// A final line that is unterminated or fails its checksum is treated as a
/// torn write and dropped. Any earlier damage is [`Error::CorruptStore`].
pub fn recover(dir: &Path) -> Result<(StoreState, Recovery)> {
    recover_from(dir, true)
}

fn recover_from(dir: &Path, allow_snapshot: bool) -> Result<(StoreState, Recovery)> {
    let path = dir.join(LOG_FILE);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let corrupt = |line: usize, reason: String| Error::CorruptStore { path: path.clone(), line, reason };
    let mut report = Recovery::default();

    let header = format!("{LOG_HEADER}\n");
    if bytes.len() < header.len() {
        if !header.as_bytes().starts_with(&bytes) {
            return Err(corrupt(1, "unrecognized header".into()));
        }
        if !bytes.is_empty() {
            report.torn_bytes = bytes.len() as u64;
            report.warnings.push(format!("discarded torn header ({} bytes)", bytes.len()));
        }
        return Ok((StoreState::default(), report));
    }
    if !bytes.starts_with(header.as_bytes()) {
        return Err(corrupt(1, "unrecognized header".into()));
    }

    let snapshot = if allow_snapshot { load_snapshot(dir, &mut report.warnings) } else { None };
    let skip_through = snapshot.as_ref().map_or(0, |s| s.seq);

    let mut lines: Vec<(usize, &[u8])> = Vec::new();
    let mut offset = header.len();
    while offset < bytes.len() {
        let rest = &bytes[offset..];
        match rest.iter().position(|&b| b == b'\n') {
            Some(end) => {
                lines.push((offset, &rest[..end]));
                offset += end + 1;
            }
            None => {
                report.torn_bytes = rest.len() as u64;
                break;
            }
        }
    }
    report.valid_len = header.len() as u64;

    let mut state = StoreState::default();
    let mut bodies = Vec::with_capacity(lines.len());
    let count = lines.len();
    for (i, (start, line)) in lines.iter().enumerate() {
        let line_no = i + 2;
        match check_line(line) {
            Ok(body) => bodies.push((line_no, *start, line.len(), body)),
            Err(reason) if i + 1 == count && report.torn_bytes == 0 => {
                report.torn_bytes = line.len() as u64 + 1;
                report.warnings.push(format!("line {line_no}: {reason}"));
            }
            Err(reason) => return Err(corrupt(line_no, reason)),
        }
    }
    if report.torn_bytes > 0 {
        let msg = format!("discarded torn final entry ({} bytes)", report.torn_bytes);
        warn!("{}: {msg}", path.display());
        report.warnings.push(msg);
    }

    let use_snapshot = skip_through > 0 && skip_through as usize <= bodies.len();
    if skip_through > 0 && !use_snapshot {
        report.warnings.push("snapshot is ahead of the audit log; replaying from scratch".into());
    }
    if use_snapshot {
        state = snapshot.expect("checked").into_state();
        report.used_snapshot = true;
    }
    for (idx, (line_no, start, len, body)) in bodies.into_iter().enumerate() {
        let seq = idx as u64 + 1;
        if !(use_snapshot && seq <= skip_through) {
            let entry: AuditEntry =
                serde_json::from_slice(body).map_err(|e| corrupt(line_no, e.to_string()))?;
            if entry.seq != seq {
                return Err(corrupt(line_no, format!("expected seq {seq}, found {}", entry.seq)));
            }
            state.apply(&entry);
            report.entries.push(entry);
        }
        report.valid_len = (start + len + 1) as u64;
    }
    Ok((state, report))
}

fn load_snapshot(dir: &Path, warnings: &mut Vec<String>) -> Option<Snapshot> {
    let bytes = fs::read(dir.join(SNAPSHOT_FILE)).ok()?;
    match serde_json::from_slice::<Snapshot>(&bytes) {
        Ok(s) if s.version == SNAPSHOT_VERSION => Some(s),
        Ok(s) => {
            warnings.push(format!("ignoring snapshot version {}", s.version));
            None
        }
        Err(e) => {
            warnings.push(format!("ignoring unreadable snapshot: {e}"));
            None
        }
    }
}

#[derive(Debug)]
struct LogWriter {
    file: File,
    sync: bool,
}

impl LogWriter {
    fn append(&mut self, line: &str) -> io::Result<()> {
        self.file.write_all(line.as_bytes())?;
        if self.sync {
            self.file.sync_data()?;
        }
        Ok(())
    }
}

/// Single-writer store. Every mutation appends to the audit log before it
/// becomes visible in memory.
#[derive(Debug)]
pub struct Store {
    state: StoreState,
    dir: Option<PathBuf>,
    log: Option<LogWriter>,
}

impl Default for Store {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl Store {
    /// A store with no backing files.
    pub fn in_memory() -> Self {
        Store { state: StoreState::default(), dir: None, log: None }
    }

    /// Opens (or creates) the store in `dir`, truncating a torn tail.
    pub fn open(dir: impl AsRef<Path>) -> Result<(Self, Recovery)> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let (state, report) = recover(dir)?;
        let path = dir.join(LOG_FILE);
        let mut file = OpenOptions::new().create(true).read(true).write(true).truncate(false).open(&path)?;
        let len = file.metadata()?.len();
        if report.valid_len == 0 {
            file.set_len(0)?;
            file.write_all(format!("{LOG_HEADER}\n").as_bytes())?;
            file.sync_data()?;
        } else if len != report.valid_len {
            file.set_len(report.valid_len)?;
            file.sync_data()?;
        }
        drop(file);
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok((
            Store { state, dir: Some(dir.to_path_buf()), log: Some(LogWriter { file, sync: true }) },
            report,
        ))
    }

    /// Turns per-append `fsync` on or off.
    pub fn set_sync(&mut self, sync: bool) {
        if let Some(log) = &mut self.log {
            log.sync = sync;
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn state(&self) -> &StoreState {
        &self.state
    }

    pub fn lookup_by_tag(&self, tag: TagId) -> Option<&Student> {
        self.state.lookup_by_tag(tag)
    }

    pub fn student(&self, id: StudentId) -> Option<&Student> {
        self.state.student(id)
    }

    /// Registers a new student bound to `tag_id`. Operators and admins may
    /// both create.
    pub fn put_student(
        &mut self,
        actor: &Actor,
        fields: StudentFields,
        tag_id: TagId,
        now: f64,
    ) -> Result<StudentId> {
        validate_name(&fields.name)?;
        if self.state.lookup_by_tag(tag_id).is_some() {
            return Err(Error::TagAlreadyBound(tag_id));
        }
        let id = self.state.next_student_id();
        let student = Student {
            id,
            name: fields.name,
            course: fields.course,
            stream: fields.stream,
            trimester: fields.trimester,
            tag_id,
            photo_ref: fields.photo_ref,
            registered_s: now,
            active: true,
        };
        self.append(actor, AuditAction::PutStudent, Payload::Student(student), now)?;
        Ok(id)
    }

    /// Admin-only modification of a stored student.
    pub fn update_student(
        &mut self,
        actor: &Actor,
        id: StudentId,
        changes: StudentChanges,
        now: f64,
    ) -> Result<Student> {
        if actor.role != Role::Admin {
            return Err(Error::Forbidden);
        }
        let mut student = self
            .state
            .student(id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("student {id}")))?;
        if let Some(name) = changes.name {
            validate_name(&name)?;
            student.name = name;
        }
        if let Some(v) = changes.course {
            student.course = v;
        }
        if let Some(v) = changes.stream {
            student.stream = v;
        }
        if let Some(v) = changes.trimester {
            student.trimester = v;
        }
        if let Some(v) = changes.photo_ref {
            student.photo_ref = Some(v);
        }
        if let Some(tag) = changes.tag_id {
            student.tag_id = tag;
        }
        if let Some(active) = changes.active {
            student.active = active;
        }
        if student.active {
            if let Some(holder) = self.state.lookup_by_tag(student.tag_id) {
                if holder.id != id {
                    return Err(Error::TagAlreadyBound(student.tag_id));
                }
            }
        }
        self.append(actor, AuditAction::UpdateStudent, Payload::Student(student.clone()), now)?;
        Ok(student)
    }

    pub(crate) fn append(
        &mut self,
        actor: &Actor,
        action: AuditAction,
        payload: Payload,
        now: f64,
    ) -> Result<()> {
        let entry = AuditEntry {
            seq: self.state.last_seq + 1,
            actor: actor.id.clone(),
            action,
            payload,
            at_s: now,
        };
        if let Some(log) = &mut self.log {
            log.append(&encode_line(&entry)?)?;
        }
        self.state.apply(&entry);
        Ok(())
    }

    /// Writes `snapshot.json` for faster start-up. The audit log is kept
    /// intact.
    pub fn write_snapshot(&self) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        let mut file = File::create(&tmp)?;
        serde_json::to_writer(&mut file, &Snapshot::of(&self.state))?;
        file.sync_all()?;
        fs::rename(tmp, dir.join(SNAPSHOT_FILE))?;
        Ok(())
    }

    /// Flushes the log to stable storage.
    pub fn flush(&mut self) -> Result<()> {
        if let Some(log) = &mut self.log {
            log.file.sync_all()?;
        }
        Ok(())
    }
}

fn validate_name(name: &str) -> Result<()> {
    if name.trim().is_empty() {
        return Err(Error::Validation("name must not be empty".into()));
    }
    Ok(())
}

/// Reads every entry of the log in `dir`, ignoring any snapshot.
pub fn read_audit_log(dir: &Path) -> Result<Vec<AuditEntry>> {
    recover_from(dir, false).map(|(_, rec)| rec.entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fields(name: &str) -> StudentFields {
        StudentFields {
            name: name.into(),
            course: "MPSTME-EXTC".into(),
            stream: "B.Tech".into(),
            trimester: "T5".into(),
            photo_ref: None,
        }
    }

    fn tag(n: u64) -> TagId {
        TagId::new(n).unwrap()
    }

    #[test]
    fn put_and_lookup() {
        let mut store = Store::in_memory();
        let op = Actor::operator("desk");
        let id = store.put_student(&op, fields("Asha"), tag(1), 0.0).unwrap();
        assert_eq!(store.state().last_seq(), 1);
        assert_eq!(store.lookup_by_tag(tag(1)).unwrap().id, id);
        assert_eq!(store.lookup_by_tag(tag(1)).unwrap().name, "Asha");
        assert!(store.lookup_by_tag(tag(2)).is_none());
        assert!(matches!(
            store.put_student(&op, fields("Ravi"), tag(1), 1.0),
            Err(Error::TagAlreadyBound(_))
        ));
        assert!(matches!(store.put_student(&op, fields("  "), tag(3), 1.0), Err(Error::Validation(_))));
        assert_eq!(store.state().last_seq(), 1);
    }

    #[test]
    fn only_admin_updates() {
        let mut store = Store::in_memory();
        let id = store.put_student(&Actor::operator("desk"), fields("Asha"), tag(1), 0.0).unwrap();
        let rename = StudentChanges { name: Some("Asha K".into()), ..Default::default() };
        assert!(matches!(
            store.update_student(&Actor::operator("desk"), id, rename.clone(), 1.0),
            Err(Error::Forbidden)
        ));
        let s = store.update_student(&Actor::admin("root"), id, rename.clone(), 1.0).unwrap();
        assert_eq!(s.name, "Asha K");
        assert_eq!(store.state().last_seq(), 2);
        assert!(matches!(
            store.update_student(&Actor::admin("root"), StudentId(99), rename, 1.0),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn rebinding_a_tag() {
        let mut store = Store::in_memory();
        let admin = Actor::admin("root");
        let a = store.put_student(&admin, fields("A"), tag(1), 0.0).unwrap();
        let b = store.put_student(&admin, fields("B"), tag(2), 0.0).unwrap();
        let take = StudentChanges { tag_id: Some(tag(1)), ..Default::default() };
        assert!(matches!(
            store.update_student(&admin, b, take.clone(), 1.0),
            Err(Error::TagAlreadyBound(_))
        ));
        store
            .update_student(&admin, a, StudentChanges { active: Some(false), ..Default::default() }, 2.0)
            .unwrap();
        assert!(store.lookup_by_tag(tag(1)).is_none());
        store.update_student(&admin, b, take, 3.0).unwrap();
        assert_eq!(store.lookup_by_tag(tag(1)).unwrap().id, b);
        assert!(store.lookup_by_tag(tag(2)).is_none());
    }

    #[test]
    fn persist_and_recover() {
        let dir = tempfile::tempdir().unwrap();
        {
            let (mut store, rec) = Store::open(dir.path()).unwrap();
            assert!(rec.entries.is_empty());
            for i in 0..3 {
                store.put_student(&Actor::operator("desk"), fields(&format!("S{i}")), tag(i), i as f64).unwrap();
            }
        }
        let (state, rec) = recover(dir.path()).unwrap();
        assert_eq!(state.students().count(), 3);
        assert_eq!(rec.entries.len(), 3);
        assert!(rec.warnings.is_empty());
        let (again, _) = recover(dir.path()).unwrap();
        assert_eq!(state, again);
    }

    #[test]
    fn torn_tail_is_dropped_then_truncated() {
        let dir = tempfile::tempdir().unwrap();
        {
            let (mut store, _) = Store::open(dir.path()).unwrap();
            for i in 0..3 {
                store.put_student(&Actor::operator("desk"), fields("S"), tag(i), 0.0).unwrap();
            }
        }
        let path = dir.path().join(LOG_FILE);
        let len = fs::metadata(&path).unwrap().len();
        OpenOptions::new().write(true).open(&path).unwrap().set_len(len - 1).unwrap();
        let (state, rec) = recover(dir.path()).unwrap();
        assert_eq!(state.students().count(), 2);
        assert_eq!(rec.warnings.len(), 1);

        let (mut store, _) = Store::open(dir.path()).unwrap();
        store.put_student(&Actor::operator("desk"), fields("S"), tag(7), 0.0).unwrap();
        drop(store);
        let (state, rec) = recover(dir.path()).unwrap();
        assert_eq!(state.students().count(), 3);
        assert!(rec.warnings.is_empty());
    }

    #[test]
    fn early_corruption_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        {
            let (mut store, _) = Store::open(dir.path()).unwrap();
            for i in 0..3 {
                store.put_student(&Actor::operator("desk"), fields("Sam"), tag(i), 0.0).unwrap();
            }
        }
        let path = dir.path().join(LOG_FILE);
        let mut bytes = fs::read(&path).unwrap();
        let first_entry = LOG_HEADER.len() + 1;
        let pos = first_entry + 40;
        bytes[pos] ^= 0x01;
        fs::write(&path, bytes).unwrap();
        match recover(dir.path()) {
            Err(Error::CorruptStore { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected CorruptStore, got {other:?}"),
        }
    }

    #[test]
    fn snapshot_start_matches_full_replay() {
        let dir = tempfile::tempdir().unwrap();
        let (mut store, _) = Store::open(dir.path()).unwrap();
        let admin = Actor::admin("root");
        let id = store.put_student(&admin, fields("A"), tag(1), 0.0).unwrap();
        store.write_snapshot().unwrap();
        store
            .update_student(&admin, id, StudentChanges { name: Some("B".into()), ..Default::default() }, 1.0)
            .unwrap();
        let expected = store.state().clone();
        drop(store);
        let (state, rec) = recover(dir.path()).unwrap();
        assert!(rec.used_snapshot);
        assert_eq!(state, expected);
        let entries = read_audit_log(dir.path()).unwrap();
        assert_eq!(entries.len(), 2);
    }

    #[test]
    fn foreign_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(LOG_FILE), b"hello world, not a log\n").unwrap();
        assert!(matches!(recover(dir.path()), Err(Error::CorruptStore { line: 1, .. })));
    }
}
