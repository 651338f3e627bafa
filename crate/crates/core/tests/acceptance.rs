//! Exit criteria for the primary component. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfid_attendance::reporting::{export_report, measure_rfid};
use rfid_attendance::store::{recover, Actor, Store, StudentChanges, StudentFields, LOG_FILE};
use rfid_attendance::tag_protocol::{decode_frame, encode_frame, FrameDecoder, TagId, STX};
use rfid_attendance::virtual_reader::{
    in_field, run_scenario, write_tag_memory, Availability, EmissionKind, ReaderConfig,
    ScenarioCommand, ScenarioScript, TagClass, TagTypeProfile, VirtualTag, WriteError,
};
use rfid_attendance::{
    run_benchmark, Attendance, EntryMethod, EntryRates, Error, ReaderBridge, RecordStatus, ScanKind,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn tag(n: u64) -> TagId {
    TagId::new(n).unwrap()
}

fn fields(name: &str) -> StudentFields {
    StudentFields {
        name: name.into(),
        course: "MPSTME-EXTC".into(),
        stream: "B.Tech".into(),
        trimester: "T5".into(),
        photo_ref: None,
    }
}

/// 1. Entry-method comparison for 60 and 100 students, exact.
fn table_two_reproduction() -> Outcome {
    let start = Instant::now();
    let cfg = ReaderConfig::default();
    let rates = EntryRates::default();
    let t60 = run_benchmark(60, &cfg, &rates).map_err(|e| e.to_string())?;
    let t100 = run_benchmark(100, &cfg, &rates).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    for (table, n, expected) in [
        (&t60, 60, [600.0, 120.0, 12.0]),
        (&t100, 100, [1000.0, 200.0, 20.0]),
    ] {
        for (m, want) in EntryMethod::ALL.into_iter().zip(expected) {
            let got = table.seconds(m, n).ok_or(format!("missing {} n={n}", m.name()))?;
            ensure!(got == want, "{} n={n}: {got} != {want}", m.name());
        }
        let row = table.rows.iter().find(|r| r.method == EntryMethod::Rfid && r.n == n).unwrap();
        ensure!(row.measured, "rfid n={n} was not measured");
        let run = table.runs.iter().find(|r| r.n == n).unwrap();
        ensure!(run.records as u64 == n, "rfid n={n} produced {} records", run.records);
    }
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("60: 600/120/12.0 s, 100: 1000/200/20.0 s, wall {elapsed:?}"))
}

/// 2. Measured seconds per student is exactly 0.2.
fn per_student_rate() -> Outcome {
    let cfg = ReaderConfig::default();
    for (n, total) in [(1u64, 0.2), (10, 2.0), (60, 12.0), (100, 20.0)] {
        let run = measure_rfid(n, &cfg).map_err(|e| e.to_string())?;
        ensure!(run.seconds == total, "n={n}: total {} s", run.seconds);
        ensure!(run.seconds / n as f64 == 0.2, "n={n}: {} s per student", run.seconds / n as f64);
    }
    Ok("0.2 s/student for n in {1, 10, 60, 100}".into())
}

/// 3. Protocol properties at 10,000 cases each.
fn protocol_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    for _ in 0..10_000 {
        let id = tag(rng.random_range(0..=TagId::MAX));
        ensure!(decode_frame(&encode_frame(id)) == Ok(id), "round trip failed for {id}");
    }
    for _ in 0..10_000 {
        let id = tag(rng.random_range(0..=TagId::MAX));
        let mut frame = encode_frame(id);
        let pos = rng.random_range(0..frame.len());
        let replacement = loop {
            let b: u8 = rng.random();
            if b != frame[pos] {
                break b;
            }
        };
        frame[pos] = replacement;
        ensure!(decode_frame(&frame).is_err(), "corruption at {pos} accepted for {id}");
        let streamed: Vec<_> = FrameDecoder::new().feed(&frame).into_iter().filter_map(Result::ok).collect();
        ensure!(streamed.is_empty(), "stream decoder accepted corruption at {pos}");
    }
    let mut recovered = 0usize;
    for _ in 0..1_000 {
        let k = rng.random_range(0..10);
        let mut stream = Vec::new();
        let mut ids = Vec::new();
        for _ in 0..=k {
            for _ in 0..rng.random_range(0..30) {
                let b: u8 = rng.random();
                stream.push(if b == STX { 0x00 } else { b });
            }
            if ids.len() < k {
                let id = tag(rng.random_range(0..=TagId::MAX));
                stream.extend(encode_frame(id));
                ids.push(id);
            }
        }
        let mut dec = FrameDecoder::new();
        let mut got = Vec::new();
        for chunk in stream.chunks(rng.random_range(1..20)) {
            got.extend(dec.feed(chunk).into_iter().filter_map(Result::ok));
        }
        ensure!(got == ids, "resync lost frames: {got:?} vs {ids:?}");
        recovered += ids.len();
    }
    Ok(format!("10000 round trips, 10000 corruptions rejected, {recovered} frames resynced"))
}

/// 4. A 60-student session with rescans and one collision.
fn end_to_end_session() -> Outcome {
    let ids: Vec<TagId> = (0..60).map(|i| tag(0x4D_0000_0000 + i * 7919)).collect();
    let mut cmds = Vec::new();
    for &id in &ids {
        cmds.push(ScenarioCommand::Place { id, class: TagClass::Passive, distance_m: 0.05 });
        cmds.push(ScenarioCommand::Poll);
        cmds.push(ScenarioCommand::Remove { id });
    }
    // five rescans: four late ones and one still inside the debounce window
    for &id in &ids[..4] {
        cmds.push(ScenarioCommand::Place { id, class: TagClass::Passive, distance_m: 0.04 });
        cmds.push(ScenarioCommand::Poll);
        cmds.push(ScenarioCommand::Remove { id });
    }
    cmds.push(ScenarioCommand::Place { id: ids[59], class: TagClass::Passive, distance_m: 0.03 });
    cmds.push(ScenarioCommand::Poll);
    cmds.push(ScenarioCommand::Remove { id: ids[59] });
    // one collision with anti-collision switched off
    cmds.push(ScenarioCommand::AntiCollision(false));
    cmds.push(ScenarioCommand::Place { id: ids[10], class: TagClass::Passive, distance_m: 0.05 });
    cmds.push(ScenarioCommand::Place { id: ids[11], class: TagClass::Passive, distance_m: 0.06 });
    cmds.push(ScenarioCommand::Poll);
    cmds.push(ScenarioCommand::Remove { id: ids[10] });
    cmds.push(ScenarioCommand::Remove { id: ids[11] });
    cmds.push(ScenarioCommand::AntiCollision(true));
    let script_text = ScenarioScript { commands: cmds }.to_string();

    // brute-force replay oracle over the script text
    let mut field: BTreeSet<TagId> = BTreeSet::new();
    let mut anti = true;
    let (mut reads, mut collisions) = (Vec::new(), 0);
    for line in script_text.lines() {
        let w: Vec<&str> = line.split(' ').collect();
        match w[0] {
            "PLACE" => {
                field.insert(w[1].parse().unwrap());
            }
            "REMOVE" => {
                field.remove(&w[1].parse().unwrap());
            }
            "ANTICOLLISION" => anti = w[1] == "ON",
            "POLL" if anti || field.len() == 1 => reads.extend(field.iter().copied()),
            "POLL" if field.len() > 1 => collisions += 1,
            _ => {}
        }
    }
    let distinct: HashSet<TagId> = reads.iter().copied().collect();

    let script = ScenarioScript::parse(&script_text).map_err(|e| e.to_string())?;
    let run = run_scenario(&script, &ReaderConfig::default()).map_err(|e| e.to_string())?;
    let mut att = Attendance::default();
    let op = Actor::operator("desk");
    for (i, &id) in ids.iter().enumerate() {
        att.store_mut().put_student(&op, fields(&format!("Student {i}")), id, 0.0).map_err(|e| e.to_string())?;
    }
    let sid = att.open_session(&op, "MPSTME-EXTC", "B.Tech", "T5", 0.0).map_err(|e| e.to_string())?.id;
    let outputs = ReaderBridge::new().replay(&mut att, sid, &run, 0.0).map_err(|e| e.to_string())?;

    let records: Vec<_> = att.store().state().records(sid).cloned().collect();
    let record_tags: HashSet<TagId> = records.iter().map(|r| r.tag_id).collect();
    let csv = export_report(att.store().state(), sid).map_err(|e| e.to_string())?;
    let mut rdr = csv::Reader::from_reader(csv.as_slice());
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let row_tags: HashSet<String> = rows.iter().map(|r| r[1].to_string()).collect();
    let scans = outputs.iter().filter(|o| matches!(o, rfid_attendance::BridgeOutput::Scan(_))).count();

    ensure!(distinct.len() == 60 && reads.len() == 65 && collisions == 1, "oracle disagrees with the scenario design");
    ensure!(scans == reads.len(), "{scans} scans vs oracle {}", reads.len());
    ensure!(records.len() == 60, "{} records", records.len());
    ensure!(record_tags == distinct, "record set differs from oracle");
    ensure!(records.iter().all(|r| r.status == RecordStatus::Present), "non-present record");
    ensure!(rows.len() == 60, "{} csv rows", rows.len());
    ensure!(row_tags.len() == rows.len(), "duplicate csv rows");
    ensure!(att.corrupt_frames(sid) == 1, "{} corrupt frames", att.corrupt_frames(sid));
    Ok(format!("60 records, 60 rows, 1 corrupt frame, 0 duplicates ({} reads)", reads.len()))
}

/// 5. Known/unknown tag workflow and admin-only modification.
fn workflow_conformance() -> Outcome {
    let mut att = Attendance::default();
    let op = Actor::operator("desk");
    let admin = Actor::admin("root");
    let known = att.store_mut().put_student(&op, fields("Asha Rao"), tag(1), 0.0).map_err(|e| e.to_string())?;
    let sid = att.open_session(&op, "MPSTME-EXTC", "B.Tech", "T5", 0.0).map_err(|e| e.to_string())?.id;

    let first = att.ingest_scan(sid, tag(2), 7.4).map_err(|e| e.to_string())?;
    ensure!(first.event.as_ref().map(|e| e.kind) == Some(ScanKind::Unknown), "unknown tag not flagged");
    ensure!(first.record.status == RecordStatus::PendingRegistration, "no pending record");
    let rec = att.complete_registration(&op, sid, tag(2), fields("Ravi Shah"), 30.0).map_err(|e| e.to_string())?;
    ensure!(rec.first_seen_s == 7.4, "first_seen changed to {}", rec.first_seen_s);
    ensure!(rec.status == RecordStatus::Present, "registration did not mark present");

    let hit = att.ingest_scan(sid, tag(1), 31.0).map_err(|e| e.to_string())?;
    let student = hit.student.ok_or("known tag did not resolve")?;
    ensure!(student.id == known && student.name == "Asha Rao" && student.course == "MPSTME-EXTC", "wrong details");

    let rename = StudentChanges { name: Some("Asha R.".into()), ..Default::default() };
    let denied = att.store_mut().update_student(&op, known, rename.clone(), 40.0);
    ensure!(matches!(denied, Err(Error::Forbidden)), "operator update was {denied:?}");
    let ok = att.store_mut().update_student(&admin, known, rename, 41.0).map_err(|e| e.to_string())?;
    ensure!(ok.name == "Asha R.", "admin update lost");
    Ok("pending first_seen preserved, known tag resolved, operator Forbidden, admin allowed".into())
}

/// 6. Tag class profiles, memory capacity and beaconing.
fn tag_class_conformance() -> Outcome {
    let expect = [
        (TagClass::Passive, 10.0, false, Availability::FieldOnly, 128),
        (TagClass::Active, 100.0, true, Availability::Continuous, 131_072),
        (TagClass::SemiPassive, 100.0, true, Availability::FieldOnly, 131_072),
    ];
    let cfg = ReaderConfig::default();
    for (class, range, battery, avail, cap) in expect {
        let p = TagTypeProfile::for_class(class);
        ensure!(
            p.max_range_m == range && p.has_battery == battery && p.availability == avail && p.memory_capacity_bytes == cap,
            "{class:?} profile {p:?}"
        );
        let mut t = VirtualTag::new(tag(1), class, 0.05);
        ensure!(write_tag_memory(&mut t, &cfg, &vec![0xA5; cap]).is_ok(), "{class:?} full write failed");
        let over = write_tag_memory(&mut t, &cfg, &vec![0xA5; cap + 1]);
        ensure!(over == Err(WriteError::CapacityExceeded { len: cap + 1, capacity: cap }), "{class:?}: {over:?}");
        ensure!(in_field(&t, &cfg), "tag at 5 cm not in field");
    }

    let script = ScenarioScript::parse(
        "PLACE 00000000A1 A 0.05\nPLACE 00000000B1 P 0.05\nPLACE 00000000C1 S 0.05\nWAIT 5\n",
    )
    .map_err(|e| e.to_string())?;
    let run = run_scenario(&script, &cfg).map_err(|e| e.to_string())?;
    let beacons: Vec<TagId> = run
        .emissions
        .iter()
        .filter(|e| e.kind == EmissionKind::Beacon)
        .map(|e| decode_frame(&e.frame).unwrap())
        .collect();
    ensure!(run.count(EmissionKind::Polled) == 0, "polled frames without POLL");
    ensure!(beacons.len() == 5 && beacons.iter().all(|&b| b == tag(0xA1)), "beacons {beacons:?}");
    Ok("profiles exact, capacity+1 rejected, 5 active beacons in 5 s, none from passive/semi-passive".into())
}

const CHILD_ENV: &str = "RFID_ACCEPTANCE_WRITER_DIR";

fn crash_writer(dir: &str) -> ! {
    let (mut store, _) = Store::open(dir).unwrap();
    store.set_sync(false);
    let mut i = store.state().students().count() as u64;
    loop {
        store.put_student(&Actor::operator("desk"), fields(&format!("writer {i}")), tag(i), i as f64).unwrap();
        i += 1;
    }
}

/// 7. Kill a writer mid-append and recover.
fn crash_safety() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join(LOG_FILE);
    let mut torn_seen = 0;
    for _ in 0..5 {
        let mut child = Command::new(std::env::current_exe().unwrap())
            .env(CHILD_ENV, dir.path())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let base = fs::metadata(&log).map(|m| m.len()).unwrap_or(0);
        let start = Instant::now();
        while fs::metadata(&log).map(|m| m.len()).unwrap_or(0) < base + 50_000 {
            ensure!(start.elapsed() < Duration::from_secs(30), "writer stalled");
            std::thread::sleep(Duration::from_millis(2));
        }
        child.kill().map_err(|e| e.to_string())?;
        child.wait().map_err(|e| e.to_string())?;

        let bytes = fs::read(&log).map_err(|e| e.to_string())?;
        let complete = bytes.iter().filter(|&&b| b == b'\n').count() - 1;
        let torn = !bytes.ends_with(b"\n");
        let (state, rec) = recover(dir.path()).map_err(|e| e.to_string())?;
        ensure!(state.students().count() == complete, "{} students vs {complete} complete lines", state.students().count());
        ensure!(torn == !rec.warnings.is_empty(), "torn={torn} warnings={:?}", rec.warnings);
        torn_seen += torn as usize;
    }
    // a torn tail is forced once so the discard path is always exercised
    let bytes = fs::read(&log).map_err(|e| e.to_string())?;
    let complete = bytes.iter().filter(|&&b| b == b'\n').count() - 1;
    fs::write(&log, &bytes[..bytes.len() - 7]).map_err(|e| e.to_string())?;
    let (state, rec) = recover(dir.path()).map_err(|e| e.to_string())?;
    ensure!(state.students().count() == complete - 1, "forced torn tail not discarded");
    ensure!(!rec.warnings.is_empty(), "no warning for torn tail");
    let (_store, _) = Store::open(dir.path()).map_err(|e| e.to_string())?;
    let (after, rec) = recover(dir.path()).map_err(|e| e.to_string())?;
    ensure!(after == state && rec.warnings.is_empty(), "reopen did not settle the log");
    Ok(format!("5 kills recovered exactly ({torn_seen} with torn tail), forced torn tail discarded with warning"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    if let Ok(dir) = std::env::var(CHILD_ENV) {
        crash_writer(&dir);
    }
    // libtest passes flags such as --nocapture or a filter; nothing to parse.
    let criteria: [Criterion; 7] = [
        ("1 entry-method table (60/100 students)", table_two_reproduction),
        ("2 per-student RFID rate", per_student_rate),
        ("3 protocol property suite", protocol_properties),
        ("4 end-to-end session", end_to_end_session),
        ("5 known/unknown workflow + admin gating", workflow_conformance),
        ("6 tag class conformance", tag_class_conformance),
        ("7 crash safety", crash_safety),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let result = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match result {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({why})");
            }
        }
    }
    let _ = panic::take_hook();
    if failed > 0 {
        std::process::exit(1);
    }
}
