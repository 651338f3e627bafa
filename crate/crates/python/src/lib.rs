//! Python bindings: frame codec, stream decoder, reader simulator,
//! benchmark and an attendance ledger.
//!
//! Tag ids cross the boundary as canonical 10-character uppercase hex
//! strings; frames and streams as `bytes`.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyKeyError, PyOSError, PyPermissionError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use rfid_attendance::reporting::{export_report, model_total_time as model_total};
use rfid_attendance::virtual_reader::{run_scenario as run, EmissionKind};
use rfid_attendance::{
    self as core, Actor, AttendanceConfig, AttendanceRecord, BridgeOutput, EntryRates, ReaderBridge,
    ReaderConfig, ScanEvent, ScenarioScript, SessionId, Store, StudentChanges, StudentFields, StudentId,
    TagId,
};

create_exception!(rfid_attendance_py, RfidError, PyException);
create_exception!(rfid_attendance_py, FrameError, PyValueError);
create_exception!(rfid_attendance_py, ConflictError, RfidError);
create_exception!(rfid_attendance_py, CorruptStoreError, RfidError);

fn to_py(e: core::Error) -> PyErr {
    use core::Error as E;
    let msg = e.to_string();
    match e {
        E::Validation(_) => PyValueError::new_err(msg),
        E::Forbidden => PyPermissionError::new_err(msg),
        E::NotFound(_) => PyKeyError::new_err(msg),
        E::TagAlreadyBound(_) | E::SessionAlreadyOpen(_) | E::SessionClosed | E::NoPendingRecord(_) => {
            ConflictError::new_err(msg)
        }
        E::CorruptStore { .. } => CorruptStoreError::new_err(msg),
        E::Io(_) => PyOSError::new_err(msg),
        E::Json(_) | E::Csv(_) => RfidError::new_err(msg),
    }
}

fn tag(s: &str) -> PyResult<TagId> {
    s.parse().map_err(|e: core::tag_protocol::TagIdError| PyValueError::new_err(e.to_string()))
}

fn actor(role: &str) -> PyResult<Actor> {
    match role {
        "admin" => Ok(Actor::admin("python")),
        "operator" => Ok(Actor::operator("python")),
        other => Err(PyValueError::new_err(format!("unknown role {other:?}"))),
    }
}

/// XOR checksum of the five id bytes.
#[pyfunction]
fn checksum(tag_id: &str) -> PyResult<u8> {
    Ok(core::checksum(tag(tag_id)?))
}

/// The 14-byte reader frame for `tag_id`.
#[pyfunction]
fn encode_frame<'py>(py: Python<'py>, tag_id: &str) -> PyResult<Bound<'py, PyBytes>> {
    Ok(PyBytes::new(py, &core::encode_frame(tag(tag_id)?)))
}

/// Decodes exactly one frame; raises FrameError on any defect.
#[pyfunction]
fn decode_frame(frame: &[u8]) -> PyResult<String> {
    core::decode_frame(frame)
        .map(|t| t.to_string())
        .map_err(|e| FrameError::new_err(e.to_string()))
}

/// Linear entry-time model: `n` students at `per_entry_s` each.
#[pyfunction]
fn model_total_time(per_entry_s: f64, n: u64) -> f64 {
    model_total(per_entry_s, n)
}

fn reader_config(per_read_s: f64, anti_collision: bool) -> PyResult<ReaderConfig> {
    let cfg = ReaderConfig { per_read_seconds: per_read_s, anti_collision, ..ReaderConfig::default() };
    cfg.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(cfg)
}

/// Entry-method comparison as `(method, n, seconds)` rows. RFID figures are
/// measured by running roll calls through the simulator.
#[pyfunction]
#[pyo3(signature = (n, per_read_s = 0.2, manual_s = 10.0, barcode_s = 2.0))]
fn run_benchmark(n: u64, per_read_s: f64, manual_s: f64, barcode_s: f64) -> PyResult<Vec<(String, u64, f64)>> {
    let cfg = reader_config(per_read_s, true)?;
    let rates = EntryRates { manual_s, barcode_s, rfid_s: per_read_s };
    let table = core::run_benchmark(n, &cfg, &rates).map_err(to_py)?;
    Ok(table.rows.iter().map(|r| (r.method.name().to_string(), r.n, r.seconds)).collect())
}

/// Output of one simulator run.
#[pyclass(frozen, module = "rfid_attendance_py")]
struct ScenarioRun {
    /// `(at_s, kind, frame)` per emission.
    #[pyo3(get)]
    emissions: Vec<(f64, &'static str, Vec<u8>)>,
    /// Simulated time at the end of the run.
    #[pyo3(get)]
    end_s: f64,
    stream: Vec<u8>,
}

#[pymethods]
impl ScenarioRun {
    /// Every frame concatenated, as the reader would write it.
    #[getter]
    fn stream<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.stream)
    }

    fn __len__(&self) -> usize {
        self.emissions.len()
    }
}

/// Parses and runs a scenario script.
#[pyfunction]
#[pyo3(signature = (script, per_read_s = 0.2, anti_collision = true))]
fn run_scenario(script: &str, per_read_s: f64, anti_collision: bool) -> PyResult<ScenarioRun> {
    let script = ScenarioScript::parse(script).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let out = run(&script, &reader_config(per_read_s, anti_collision)?)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(ScenarioRun {
        emissions: out
            .emissions
            .iter()
            .map(|e| {
                let kind = match e.kind {
                    EmissionKind::Polled => "polled",
                    EmissionKind::Collision => "collision",
                    EmissionKind::Beacon => "beacon",
                };
                (e.at_s(), kind, e.frame.to_vec())
            })
            .collect(),
        end_s: out.clock.now_s(),
        stream: out.stream(),
    })
}

/// Incremental decoder for a reader byte stream.
#[pyclass(module = "rfid_attendance_py")]
#[derive(Default)]
struct FrameDecoder {
    inner: core::FrameDecoder,
}

#[pymethods]
impl FrameDecoder {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    /// Pushes bytes and returns one `(tag_id, error)` pair per frame
    /// boundary found; exactly one side of each pair is `None`.
    fn feed(&mut self, data: &[u8]) -> Vec<(Option<String>, Option<String>)> {
        self.inner
            .feed(data)
            .into_iter()
            .map(|r| match r {
                Ok(t) => (Some(t.to_string()), None),
                Err(e) => (None, Some(e.to_string())),
            })
            .collect()
    }

    /// Bytes held towards an incomplete frame.
    #[getter]
    fn pending(&self) -> usize {
        self.inner.pending()
    }

    #[getter]
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.stats();
        let d = PyDict::new(py);
        d.set_item("frames_ok", s.frames_ok)?;
        d.set_item("checksum_mismatches", s.checksum_mismatches)?;
        d.set_item("non_hex_payloads", s.non_hex_payloads)?;
        d.set_item("bad_delimiters", s.bad_delimiters)?;
        d.set_item("discarded_bytes", s.discarded_bytes)?;
        Ok(d)
    }
}

fn record_dict<'py>(py: Python<'py>, r: &AttendanceRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("session", r.session_ref.0)?;
    d.set_item("tag_id", r.tag_id.to_string())?;
    d.set_item("student_id", r.student_ref.map(|s| s.0))?;
    d.set_item("first_seen_s", r.first_seen_s)?;
    d.set_item("last_seen_s", r.last_seen_s)?;
    d.set_item("status", r.status.as_str())?;
    Ok(d)
}

fn event_dict<'py>(py: Python<'py>, e: &ScanEvent) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let kind = match e.kind {
        core::ScanKind::Resolved => "resolved",
        core::ScanKind::Unknown => "unknown",
        core::ScanKind::Corrupt => "corrupt",
    };
    d.set_item("kind", kind)?;
    d.set_item("tag_id", e.tag_id.map(|t| t.to_string()))?;
    d.set_item("student_id", e.student_ref.map(|s| s.0))?;
    d.set_item("timestamp_s", e.timestamp_s)?;
    d.set_item("session", e.session_ref.0)?;
    Ok(d)
}

/// The attendance ledger. In memory unless `store_dir` is given, in which
/// case every change is appended to `store_dir/audit.log`.
///
/// `role` arguments are "admin" or "operator".
#[pyclass(module = "rfid_attendance_py")]
struct Attendance {
    inner: core::Attendance,
    bridge: ReaderBridge,
}

#[pymethods]
impl Attendance {
    #[new]
    #[pyo3(signature = (store_dir = None, debounce_s = 2.0))]
    fn new(store_dir: Option<std::path::PathBuf>, debounce_s: f64) -> PyResult<Self> {
        if debounce_s.is_nan() || debounce_s <= 0.0 {
            return Err(PyValueError::new_err("debounce_s must be positive"));
        }
        let store = match store_dir {
            Some(dir) => Store::open(dir).map_err(to_py)?.0,
            None => Store::in_memory(),
        };
        Ok(Attendance {
            inner: core::Attendance::new(store, AttendanceConfig { debounce_s }),
            bridge: ReaderBridge::new(),
        })
    }

    #[pyo3(signature = (course, stream = "", trimester = "", now = 0.0, role = "operator"))]
    fn open_session(&mut self, course: &str, stream: &str, trimester: &str, now: f64, role: &str) -> PyResult<u64> {
        let s = self.inner.open_session(&actor(role)?, course, stream, trimester, now).map_err(to_py)?;
        Ok(s.id.0)
    }

    #[pyo3(signature = (session, now = 0.0, role = "operator"))]
    fn close_session(&mut self, session: u64, now: f64, role: &str) -> PyResult<()> {
        self.inner.close_session(&actor(role)?, SessionId(session), now).map_err(to_py)?;
        Ok(())
    }

    /// Feeds raw reader bytes into `session`; returns the events produced.
    /// Repeat reads inside the debounce window produce none.
    fn ingest<'py>(&mut self, py: Python<'py>, session: u64, data: &[u8], now: f64) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let out = self.bridge.feed(&mut self.inner, SessionId(session), data, now).map_err(to_py)?;
        out.iter().filter_map(BridgeOutput::event).map(|e| event_dict(py, e)).collect()
    }

    /// Binds `tag_id` to a new student and completes any pending records
    /// for it. Returns the student id.
    #[pyo3(signature = (name, tag_id, course = "", stream = "", trimester = "", now = 0.0, role = "operator"))]
    #[allow(clippy::too_many_arguments)]
    fn register_student(
        &mut self,
        name: &str,
        tag_id: &str,
        course: &str,
        stream: &str,
        trimester: &str,
        now: f64,
        role: &str,
    ) -> PyResult<u64> {
        let fields = StudentFields {
            name: name.into(),
            course: course.into(),
            stream: stream.into(),
            trimester: trimester.into(),
            photo_ref: None,
        };
        let (id, _) = self.inner.register_student(&actor(role)?, fields, tag(tag_id)?, now).map_err(to_py)?;
        Ok(id.0)
    }

    /// Changes registry fields. Only the admin role may do this.
    #[pyo3(signature = (student_id, role, now = 0.0, name = None, course = None, active = None))]
    fn update_student(
        &mut self,
        student_id: u64,
        role: &str,
        now: f64,
        name: Option<String>,
        course: Option<String>,
        active: Option<bool>,
    ) -> PyResult<()> {
        let changes = StudentChanges { name, course, active, ..Default::default() };
        self.inner
            .store_mut()
            .update_student(&actor(role)?, StudentId(student_id), changes, now)
            .map_err(to_py)?;
        Ok(())
    }

    fn records<'py>(&self, py: Python<'py>, session: u64) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner.store().state().records(SessionId(session)).map(|r| record_dict(py, r)).collect()
    }

    fn corrupt_frames(&self, session: u64) -> u64 {
        self.inner.corrupt_frames(SessionId(session))
    }

    /// The session report as CSV bytes.
    fn report_csv<'py>(&self, py: Python<'py>, session: u64) -> PyResult<Bound<'py, PyBytes>> {
        let csv = export_report(self.inner.store().state(), SessionId(session)).map_err(to_py)?;
        Ok(PyBytes::new(py, &csv))
    }

    /// Forces the audit log to disk and writes a snapshot.
    fn flush(&mut self) -> PyResult<()> {
        let store = self.inner.store_mut();
        store.flush().map_err(to_py)?;
        store.write_snapshot().map_err(to_py)
    }
}

#[pymodule]
fn rfid_attendance_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("RfidError", py.get_type::<RfidError>())?;
    m.add("FrameError", py.get_type::<FrameError>())?;
    m.add("ConflictError", py.get_type::<ConflictError>())?;
    m.add("CorruptStoreError", py.get_type::<CorruptStoreError>())?;
    m.add("CSV_HEADER", core::reporting::CSV_HEADER.join(","))?;
    m.add_function(wrap_pyfunction!(checksum, m)?)?;
    m.add_function(wrap_pyfunction!(encode_frame, m)?)?;
    m.add_function(wrap_pyfunction!(decode_frame, m)?)?;
    m.add_function(wrap_pyfunction!(model_total_time, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_class::<ScenarioRun>()?;
    m.add_class::<FrameDecoder>()?;
    m.add_class::<Attendance>()?;
    Ok(())
}
