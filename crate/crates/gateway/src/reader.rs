//! Reader sources feeding the shared core.
//!
//! The reader runs on its own thread and takes the core lock once per chunk
//! of bytes, so API handlers never wait on reader I/O.

use std::fs::File;
use std::io::{self, Read};
use std::net::TcpStream;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use log::{error, info, warn};
use rfid_attendance::virtual_reader::run_scenario;
use rfid_attendance::{ReaderBridge, ReaderConfig, ScenarioScript};

use crate::config::ReaderSource;
use crate::events::ReaderStatus;
use crate::state::{lock, Clock, SharedCore};

const READ_TIMEOUT: Duration = Duration::from_millis(100);
const RETRY_START: Duration = Duration::from_millis(50);

#[derive(Clone)]
pub struct ReaderContext {
    pub core: SharedCore,
    pub clock: Arc<dyn Clock>,
    pub stop: Arc<AtomicBool>,
    pub reader: ReaderConfig,
    pub speed: f64,
    pub retry_max: Duration,
}

impl ReaderContext {
    fn stopped(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }

    fn ingest(&self, bridge: &mut ReaderBridge, bytes: &[u8], now: f64) {
        let mut core = lock(&self.core);
        if let Err(e) = core.ingest(bridge, bytes, now) {
            error!("ingest failed: {e}");
        }
    }

    fn status(&self, status: ReaderStatus, detail: &str) {
        info!("reader {status:?}: {detail}");
        lock(&self.core).publish_status(status, detail);
    }

    /// Sleeps up to `d`, waking early on stop.
    fn pause(&self, d: Duration) {
        let step = Duration::from_millis(20);
        let mut left = d;
        while !left.is_zero() && !self.stopped() {
            let s = left.min(step);
            thread::sleep(s);
            left -= s;
        }
    }
}

/// Parses the scenario up front so a bad file is a startup error.
pub fn load_scenario(path: &std::path::Path) -> anyhow::Result<ScenarioScript> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read scenario {}: {e}", path.display()))?;
    ScenarioScript::parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

pub fn spawn(source: ReaderSource, ctx: ReaderContext) -> anyhow::Result<thread::JoinHandle<()>> {
    let job: Box<dyn FnOnce() + Send> = match source {
        ReaderSource::Scenario(path) => {
            let script = load_scenario(&path)?;
            Box::new(move || play_scenario(&script, &ctx))
        }
        ReaderSource::Socket(addr) => Box::new(move || {
            stream_with_retry(&ctx, &addr, || {
                let s = TcpStream::connect(&addr)?;
                s.set_read_timeout(Some(READ_TIMEOUT))?;
                Ok(Box::new(s) as Box<dyn Read>)
            })
        }),
        ReaderSource::Device(path) => Box::new(move || {
            let label = path.display().to_string();
            stream_with_retry(&ctx, &label, || Ok(Box::new(File::open(&path)?) as Box<dyn Read>))
        }),
    };
    Ok(thread::Builder::new().name("reader".into()).spawn(job)?)
}

/// Runs the scenario through the simulator and feeds each emission at its
/// simulated offset from the start of playback. Playback begins once a
/// session is open.
pub fn play_scenario(script: &ScenarioScript, ctx: &ReaderContext) {
    let run = match run_scenario(script, &ctx.reader) {
        Ok(run) => run,
        Err(e) => {
            error!("scenario rejected: {e}");
            return;
        }
    };
    while lock(&ctx.core).active_session().is_none() {
        if ctx.stopped() {
            return;
        }
        thread::sleep(Duration::from_millis(10));
    }
    ctx.status(ReaderStatus::Connected, "scenario");
    let start = ctx.clock.now();
    let mut played_s = 0.0;
    let mut bridge = ReaderBridge::new();
    for emission in &run.emissions {
        if ctx.stopped() {
            return;
        }
        let at = emission.at_s();
        if ctx.speed > 0.0 && at > played_s {
            ctx.pause(Duration::from_secs_f64((at - played_s) / ctx.speed));
        }
        played_s = at;
        ctx.ingest(&mut bridge, &emission.frame, start + at);
    }
    ctx.status(ReaderStatus::Ended, "scenario finished");
}

/// Reads from a byte source until stopped, reconnecting with exponential
/// backoff. Each connection starts with a fresh decoder.
fn stream_with_retry<F>(ctx: &ReaderContext, label: &str, mut connect: F)
where
    F: FnMut() -> io::Result<Box<dyn Read>>,
{
    let mut delay = RETRY_START;
    while !ctx.stopped() {
        match connect() {
            Ok(mut src) => {
                delay = RETRY_START;
                ctx.status(ReaderStatus::Connected, label);
                let reason = pump(ctx, &mut *src);
                ctx.status(ReaderStatus::Disconnected, &reason);
            }
            Err(e) => warn!("connect to {label} failed: {e}"),
        }
        ctx.pause(delay);
        delay = (delay * 2).min(ctx.retry_max);
    }
}

fn pump(ctx: &ReaderContext, src: &mut dyn Read) -> String {
    let mut bridge = ReaderBridge::new();
    let mut buf = [0u8; 4096];
    loop {
        if ctx.stopped() {
            return "shutdown".into();
        }
        match src.read(&mut buf) {
            Ok(0) => return "end of stream".into(),
            Ok(n) => ctx.ingest(&mut bridge, &buf[..n], ctx.clock.now()),
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return e.to_string(),
        }
    }
}
