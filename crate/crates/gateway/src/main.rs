use std::io::Write;
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rfid_attendance::reporting::export_report;
use rfid_attendance::store::{recover, LOG_FILE};
use rfid_attendance::virtual_reader::{run_scenario, EmissionKind};
use rfid_attendance::{
    decode_frame, run_benchmark, Actor, Attendance, EntryRates, ReaderConfig, SessionId, Store,
    StudentFields, TagId,
};
use rfid_attendance_gateway::config::{parse_switch, Layer, DEFAULT_STORE};
use rfid_attendance_gateway::reader::load_scenario;
use rfid_attendance_gateway::{start, GatewayConfig, SystemClock};

/// RFID attendance service and tools.
///
/// Settings are read from flags, then RFID_* environment variables, then
/// the TOML file given by --config or RFID_CONFIG.
#[derive(Debug, Parser)]
#[command(name = "rfid-attendance", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP service with one reader source.
    Serve(ServeArgs),
    /// Run a scenario file through the simulator and emit the reader stream.
    Simulate(SimulateArgs),
    /// Register a student directly in a store (service must not be running).
    Enroll(EnrollArgs),
    /// Print the CSV report of a session.
    Report(ReportArgs),
    /// Compare manual, barcode and RFID entry for a class of n students.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Default)]
struct Common {
    /// Store directory holding audit.log and snapshot.json.
    #[arg(long)]
    store: Option<PathBuf>,
    /// Seconds per polled read.
    #[arg(long)]
    per_read_s: Option<f64>,
    /// Anti-collision on or off.
    #[arg(long, value_parser = switch)]
    anti_collision: Option<bool>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[command(flatten)]
    common: Common,
    /// Listen address, e.g. 127.0.0.1:8080.
    #[arg(long)]
    listen: Option<String>,
    /// Reader source: scenario file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Reader source: TCP address streaming frames.
    #[arg(long)]
    socket: Option<String>,
    /// Reader source: serial device or pipe.
    #[arg(long)]
    device: Option<PathBuf>,
    /// Duplicate-scan window in seconds.
    #[arg(long)]
    debounce_s: Option<f64>,
    /// Scenario playback rate (0 = no pauses).
    #[arg(long)]
    speed: Option<f64>,
    /// Longest pause between reconnect attempts.
    #[arg(long)]
    retry_max_s: Option<f64>,
    #[arg(long)]
    admin_token: Option<String>,
    #[arg(long)]
    operator_token: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    scenario: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Print one decoded line per frame instead of raw bytes.
    #[arg(long)]
    decode: bool,
    /// Serve the stream to the first client on this address instead of stdout.
    #[arg(long)]
    tcp: Option<String>,
    /// Playback rate when serving over TCP (0 = no pauses).
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
}

#[derive(Debug, Args)]
struct EnrollArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    name: String,
    #[arg(long)]
    tag: TagId,
    #[arg(long, default_value = "")]
    course: String,
    #[arg(long, default_value = "")]
    stream: String,
    #[arg(long, default_value = "")]
    trimester: String,
    #[arg(long)]
    photo_ref: Option<String>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    session: u64,
    #[command(flatten)]
    common: Common,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    n: u64,
    #[command(flatten)]
    common: Common,
    /// Seconds per manual entry.
    #[arg(long)]
    manual_s: Option<f64>,
    /// Seconds per barcode entry.
    #[arg(long)]
    barcode_s: Option<f64>,
    /// Also write `method,n,seconds` lines to this file.
    #[arg(long)]
    series: Option<PathBuf>,
}

fn switch(v: &str) -> Result<bool, String> {
    parse_switch(v).ok_or_else(|| format!("expected on or off, got {v:?}"))
}

impl Common {
    fn layer(&self) -> Layer {
        Layer {
            store: self.store.clone(),
            per_read_s: self.per_read_s,
            anti_collision: self.anti_collision,
            ..Layer::default()
        }
    }
}

/// Settings shared by the verbs that run without the service.
struct Offline {
    store: PathBuf,
    reader: ReaderConfig,
}

fn offline(common: &Common, config: Option<&std::path::Path>) -> anyhow::Result<Offline> {
    let layer = Layer::layered(common.layer(), config)?;
    let reader = ReaderConfig {
        per_read_seconds: layer.per_read_s.unwrap_or(0.2),
        anti_collision: layer.anti_collision.unwrap_or(true),
        ..ReaderConfig::default()
    };
    reader.validate()?;
    Ok(Offline { store: layer.store.unwrap_or_else(|| DEFAULT_STORE.into()), reader })
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        // reader of our stdout went away (`| head`)
        let closed = e
            .downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe);
        if closed {
            return;
        }
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = cli.config.or_else(|| std::env::var_os("RFID_CONFIG").map(PathBuf::from));
    let config = config.as_deref();
    match cli.command {
        Command::Serve(args) => serve(args, config),
        Command::Simulate(args) => simulate(args, config),
        Command::Enroll(args) => {
            let o = offline(&args.common, config)?;
            let (store, _) = Store::open(&o.store)?;
            let mut att = Attendance::new(store, Default::default());
            let fields = StudentFields {
                name: args.name,
                course: args.course,
                stream: args.stream,
                trimester: args.trimester,
                photo_ref: args.photo_ref,
            };
            let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH)?.as_secs_f64();
            let (id, promoted) = att.register_student(&Actor::admin("cli"), fields, args.tag, now)?;
            println!("student {} bound to {} ({} pending records completed)", id.0, args.tag, promoted.len());
            Ok(())
        }
        Command::Report(args) => {
            let o = offline(&args.common, config)?;
            if !o.store.join(LOG_FILE).exists() {
                bail!("no store at {}", o.store.display());
            }
            let (state, _) = recover(&o.store)?;
            let csv = export_report(&state, SessionId(args.session))?;
            match args.out {
                Some(path) => std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?,
                None => std::io::stdout().write_all(&csv)?,
            }
            Ok(())
        }
        Command::Bench(args) => {
            let o = offline(&args.common, config)?;
            let defaults = EntryRates::default();
            let rates = EntryRates {
                manual_s: args.manual_s.unwrap_or(defaults.manual_s),
                barcode_s: args.barcode_s.unwrap_or(defaults.barcode_s),
                rfid_s: o.reader.per_read_seconds,
            };
            let table = run_benchmark(args.n, &o.reader, &rates)?;
            print!("{}", table.to_text());
            if let Some(path) = args.series {
                std::fs::write(&path, table.to_series()).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
    }
}

fn serve(args: ServeArgs, config: Option<&std::path::Path>) -> anyhow::Result<()> {
    let flags = Layer {
        listen: args.listen,
        scenario: args.scenario,
        socket: args.socket,
        device: args.device,
        debounce_s: args.debounce_s,
        speed: args.speed,
        retry_max_s: args.retry_max_s,
        admin_token: args.admin_token,
        operator_token: args.operator_token,
        ..args.common.layer()
    };
    let cfg = GatewayConfig::resolve(Layer::layered(flags, config)?)?;
    if cfg.tokens.admin.is_none() && cfg.tokens.operator.is_none() {
        log::warn!("no tokens configured; every mutating request will be rejected");
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let running = start(&cfg, Arc::new(SystemClock)).await?;
        shutdown_signal().await;
        log::info!("shutting down");
        running.shutdown().await
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    {
        let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate())
            .expect("signal handler");
        tokio::select! {
            _ = ctrl_c => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    ctrl_c.await;
}

fn simulate(args: SimulateArgs, config: Option<&std::path::Path>) -> anyhow::Result<()> {
    let o = offline(&args.common, config)?;
    let script = load_scenario(&args.scenario)?;
    let run = run_scenario(&script, &o.reader)?;
    if args.decode {
        let mut out = std::io::stdout().lock();
        for e in &run.emissions {
            let kind = match e.kind {
                EmissionKind::Polled => "polled",
                EmissionKind::Collision => "collision",
                EmissionKind::Beacon => "beacon",
            };
            let frame = match decode_frame(&e.frame) {
                Ok(tag) => tag.to_string(),
                Err(err) => format!("error: {err}"),
            };
            writeln!(out, "{:.6} {kind} {frame}", e.at_s())?;
        }
        writeln!(out, "# end {:.6}", run.clock.now_s())?;
        return Ok(());
    }
    let Some(addr) = args.tcp else {
        std::io::stdout().write_all(&run.stream())?;
        return Ok(());
    };
    if args.speed.is_nan() || args.speed < 0.0 {
        bail!("speed must not be negative");
    }
    let listener = TcpListener::bind(&addr).with_context(|| format!("cannot listen on {addr}"))?;
    eprintln!("waiting for a reader client on {}", listener.local_addr()?);
    let (mut conn, peer) = listener.accept()?;
    eprintln!("streaming to {peer}");
    let mut played = 0.0;
    for e in &run.emissions {
        if args.speed > 0.0 && e.at_s() > played {
            std::thread::sleep(Duration::from_secs_f64((e.at_s() - played) / args.speed));
        }
        played = e.at_s();
        conn.write_all(&e.frame)?;
    }
    Ok(())
}
