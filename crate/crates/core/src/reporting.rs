//! Attendance reports and the data-entry throughput comparison.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::attendance::{Attendance, AttendanceConfig, AttendanceSession, RecordStatus, SessionId};
use crate::error::{Error, Result};
use crate::pipeline::ReaderBridge;
use crate::store::{Actor, Store, StoreState};
use crate::tag_protocol::TagId;
use crate::virtual_reader::{
    micros_to_seconds, run_scenario, seconds_to_micros, ConfigError, EmissionKind, ReaderConfig,
    ScenarioCommand, ScenarioScript, TagClass,
};

pub const CSV_HEADER: [&str; 8] =
    ["name", "tag_id", "course", "stream", "trimester", "first_seen", "last_seen", "status"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryMethod {
    Manual,
    Barcode,
    Rfid,
}

impl EntryMethod {
    pub const ALL: [EntryMethod; 3] = [EntryMethod::Manual, EntryMethod::Barcode, EntryMethod::Rfid];

    pub fn name(self) -> &'static str {
        match self {
            EntryMethod::Manual => "manual",
            EntryMethod::Barcode => "barcode",
            EntryMethod::Rfid => "rfid",
        }
    }
}

/// Seconds spent recording one student, per method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRates {
    pub manual_s: f64,
    pub barcode_s: f64,
    pub rfid_s: f64,
}

impl Default for EntryRates {
    fn default() -> Self {
        EntryRates { manual_s: 10.0, barcode_s: 2.0, rfid_s: 0.2 }
    }
}

impl EntryRates {
    pub fn per_entry_seconds(&self, method: EntryMethod) -> f64 {
        match method {
            EntryMethod::Manual => self.manual_s,
            EntryMethod::Barcode => self.barcode_s,
            EntryMethod::Rfid => self.rfid_s,
        }
    }

    /// Linear model: `n` students at a fixed per-student cost.
    pub fn model_total_time(&self, method: EntryMethod, n_students: u64) -> f64 {
        model_total_time(self.per_entry_seconds(method), n_students)
    }
}

/// `n_students × per_entry_seconds`, computed in whole microseconds.
pub fn model_total_time(per_entry_seconds: f64, n_students: u64) -> f64 {
    micros_to_seconds(model_total_micros(per_entry_seconds, n_students))
}

/// The exact (additive) form of [`model_total_time`].
pub fn model_total_micros(per_entry_seconds: f64, n_students: u64) -> u64 {
    seconds_to_micros(per_entry_seconds) * n_students
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub tag_id: TagId,
    pub course: String,
    pub stream: String,
    pub trimester: String,
    pub first_seen: f64,
    pub last_seen: f64,
    pub status: RecordStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttendanceReport {
    pub session: AttendanceSession,
    pub rows: Vec<ReportRow>,
    pub generated_s: f64,
}

/// One row per record, ordered by first sighting then tag id. Pending rows
/// have an empty name and take course details from the session.
pub fn build_report(state: &StoreState, session: SessionId, now: f64) -> Result<AttendanceReport> {
    let meta = state
        .session(session)
        .cloned()
        .ok_or_else(|| Error::NotFound(format!("session {session}")))?;
    let mut rows: Vec<ReportRow> = state
        .records(session)
        .map(|r| {
            let student = r.student_ref.and_then(|id| state.student(id));
            ReportRow {
                name: student.map(|s| s.name.clone()).unwrap_or_default(),
                tag_id: r.tag_id,
                course: student.map_or(&meta.course, |s| &s.course).clone(),
                stream: student.map_or(&meta.stream, |s| &s.stream).clone(),
                trimester: student.map_or(&meta.trimester, |s| &s.trimester).clone(),
                first_seen: r.first_seen_s,
                last_seen: r.last_seen_s,
                status: r.status,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.first_seen.total_cmp(&b.first_seen).then(a.tag_id.cmp(&b.tag_id)));
    Ok(AttendanceReport { session: meta, rows, generated_s: now })
}

/// RFC 4180 CSV (CRLF line endings, minimal quoting, UTF-8).
pub fn report_to_csv(report: &AttendanceReport) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for row in &report.rows {
        w.write_record([
            row.name.as_str(),
            &row.tag_id.canonical(),
            &row.course,
            &row.stream,
            &row.trimester,
            &row.first_seen.to_string(),
            &row.last_seen.to_string(),
            row.status.as_str(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn export_report(state: &StoreState, session: SessionId) -> Result<Vec<u8>> {
    report_to_csv(&build_report(state, session, 0.0)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: EntryMethod,
    pub n: u64,
    pub seconds: f64,
    /// True when obtained by running the simulator, false for the model.
    pub measured: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfidRun {
    pub n: u64,
    pub frames: usize,
    pub records: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub sizes: Vec<u64>,
    pub rows: Vec<BenchRow>,
    pub runs: Vec<RfidRun>,
}

impl BenchmarkTable {
    pub fn seconds(&self, method: EntryMethod, n: u64) -> Option<f64> {
        self.rows.iter().find(|r| r.method == method && r.n == n).map(|r| r.seconds)
    }

    /// Aligned text table, one column per class size.
    pub fn to_text(&self) -> String {
        let mut header = vec!["method".to_string()];
        header.extend(self.sizes.iter().map(|n| format!("n={n}")));
        let mut lines = vec![header];
        for m in EntryMethod::ALL {
            let mut line = vec![m.name().to_string()];
            for &n in &self.sizes {
                line.push(self.seconds(m, n).map_or("-".into(), |s| format!("{s:.1}")));
            }
            lines.push(line);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in &lines {
            let cells: Vec<String> = line
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    if c == 0 {
                        format!("{cell:<w$}", w = widths[c])
                    } else {
                        format!("{cell:>w$}", w = widths[c])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }

    /// One `method,n,seconds` line per data point.
    pub fn to_series(&self) -> String {
        let mut out = String::from("method,n,seconds\n");
        for m in EntryMethod::ALL {
            for &n in &self.sizes {
                if let Some(s) = self.seconds(m, n) {
                    let _ = writeln!(out, "{},{n},{s}", m.name());
                }
            }
        }
        out
    }
}

/// Roll call of `n` distinct passive tags, each presented alone.
pub fn roll_call_script(n: u64) -> ScenarioScript {
    let mut commands = Vec::with_capacity(3 * n as usize);
    for i in 0..n {
        let id = TagId::from_low_bits(0xE0_0000_0000 + i + 1);
        commands.push(ScenarioCommand::Place { id, class: TagClass::Passive, distance_m: 0.05 });
        commands.push(ScenarioCommand::Poll);
        commands.push(ScenarioCommand::Remove { id });
    }
    ScenarioScript { commands }
}

/// Runs a roll call of `n` students through the simulator and middleware
/// and returns the simulated time it took.
pub fn measure_rfid(n: u64, cfg: &ReaderConfig) -> Result<RfidRun> {
    let run = run_scenario(&roll_call_script(n), cfg).map_err(config_error)?;
    let mut attendance = Attendance::new(Store::in_memory(), AttendanceConfig::default());
    let session = attendance.open_session(&Actor::middleware(), "benchmark", "", "", 0.0)?;
    ReaderBridge::new().replay(&mut attendance, session.id, &run, 0.0)?;
    Ok(RfidRun {
        n,
        frames: run.count(EmissionKind::Polled) + run.count(EmissionKind::Collision),
        records: attendance.store().state().records(session.id).count(),
        seconds: run.clock.now_s(),
    })
}

fn config_error(e: ConfigError) -> Error {
    Error::Validation(e.to_string())
}

/// Compares the three entry methods for class sizes 1, 10, 60, 100 and
/// `n_students`.
pub fn run_benchmark(n_students: u64, cfg: &ReaderConfig, rates: &EntryRates) -> Result<BenchmarkTable> {
    if n_students == 0 {
        return Err(Error::Validation("benchmark needs at least one student".into()));
    }
    let mut sizes = vec![1, 10, 60, 100, n_students];
    sizes.sort_unstable();
    sizes.dedup();

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &n in &sizes {
        for m in [EntryMethod::Manual, EntryMethod::Barcode] {
            rows.push(BenchRow { method: m, n, seconds: rates.model_total_time(m, n), measured: false });
        }
        let run = measure_rfid(n, cfg)?;
        rows.push(BenchRow { method: EntryMethod::Rfid, n, seconds: run.seconds, measured: true });
        runs.push(run);
    }
    Ok(BenchmarkTable { sizes, rows, runs })
}
