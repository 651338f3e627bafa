//! RFID roll-call system without hardware: the reader wire protocol, a
//! simulated 125 kHz reader with its tag field, the scan middleware, an
//! audit-logged registry, CSV reports and the entry-method benchmark.

pub mod attendance;
pub mod error;
pub mod pipeline;
pub mod reporting;
pub mod store;
pub mod tag_protocol;
pub mod virtual_reader;

pub use attendance::{
    Attendance, AttendanceConfig, AttendanceRecord, AttendanceSession, RecordStatus, ScanEvent,
    ScanKind, ScanOutcome, SessionId, SessionState,
};
pub use error::{Error, Result};
pub use pipeline::{BridgeOutput, ReaderBridge};
pub use reporting::{
    build_report, export_report, model_total_time, run_benchmark, AttendanceReport, BenchmarkTable,
    EntryMethod, EntryRates,
};
pub use store::{Actor, Role, Store, Student, StudentChanges, StudentFields, StudentId};
pub use tag_protocol::{checksum, decode_frame, encode_frame, FrameDecoder, FrameError, TagId};
pub use virtual_reader::{ReaderConfig, ScenarioScript, SimClock, Simulator, TagClass, VirtualTag};
