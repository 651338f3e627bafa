//! Process lifecycle: open the store, start the reader and the HTTP server,
//! shut everything down cleanly.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use anyhow::Context;
use log::{info, warn};
use rfid_attendance::{Attendance, Store};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use crate::api::{router, AppState};
use crate::config::GatewayConfig;
use crate::reader::{self, ReaderContext};
use crate::state::{lock, Clock, Core, SharedCore};

pub struct Running {
    pub addr: SocketAddr,
    pub core: SharedCore,
    stop: Arc<AtomicBool>,
    reader: Option<JoinHandle<()>>,
    server: tokio::task::JoinHandle<std::io::Result<()>>,
    shutdown: oneshot::Sender<()>,
}

/// Opens the store and binds the listener. Any failure here is fatal.
pub async fn start(cfg: &GatewayConfig, clock: Arc<dyn Clock>) -> anyhow::Result<Running> {
    let (store, recovery) = Store::open(&cfg.store_dir)
        .with_context(|| format!("cannot open store at {}", cfg.store_dir.display()))?;
    for w in &recovery.warnings {
        warn!("{w}");
    }
    info!("store {} recovered {} entries", cfg.store_dir.display(), recovery.entries.len());
    let core: SharedCore = Arc::new(Mutex::new(Core::new(Attendance::new(store, cfg.attendance.clone()))));

    let listener = TcpListener::bind(cfg.listen)
        .await
        .with_context(|| format!("cannot listen on {}", cfg.listen))?;
    let addr = listener.local_addr()?;

    let stop = Arc::new(AtomicBool::new(false));
    let reader = reader::spawn(
        cfg.source.clone(),
        ReaderContext {
            core: core.clone(),
            clock: clock.clone(),
            stop: stop.clone(),
            reader: cfg.reader.clone(),
            speed: cfg.speed,
            retry_max: cfg.retry_max,
        },
    )?;

    let app = router(AppState { core: core.clone(), clock, tokens: Arc::new(cfg.tokens.clone()) });
    let (shutdown, rx) = oneshot::channel();
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    info!("listening on {addr}");
    Ok(Running { addr, core, stop, reader: Some(reader), server, shutdown })
}

impl Running {
    /// Stops the reader, drains the server, then flushes the audit log and
    /// writes a snapshot.
    pub async fn shutdown(mut self) -> anyhow::Result<()> {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(handle) = self.reader.take() {
            tokio::task::spawn_blocking(move || handle.join()).await?.ok();
        }
        lock(&self.core).hub.close_all();
        let _ = self.shutdown.send(());
        self.server.await??;
        let mut core = lock(&self.core);
        let store = core.attendance.store_mut();
        store.flush()?;
        store.write_snapshot()?;
        Ok(())
    }

    /// True once the reader thread has returned (scenario finished).
    pub fn reader_finished(&self) -> bool {
        self.reader.as_ref().is_none_or(|h| h.is_finished())
    }
}
