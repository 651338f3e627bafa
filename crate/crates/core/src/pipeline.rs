//! Reader byte stream to attendance ledger.

use crate::attendance::{Attendance, ScanEvent, ScanOutcome, SessionId};
use crate::error::Result;
use crate::tag_protocol::{DecoderStats, FrameDecoder, FrameError};
use crate::virtual_reader::ScenarioOutput;

#[derive(Debug, Clone, PartialEq)]
pub enum BridgeOutput {
    Scan(Box<ScanOutcome>),
    Corrupt(ScanEvent),
    /// Framing noise that was skipped while resynchronizing.
    Dropped(FrameError),
}

impl BridgeOutput {
    /// The event a subscriber should see, if any.
    pub fn event(&self) -> Option<&ScanEvent> {
        match self {
            BridgeOutput::Scan(o) => o.event.as_ref(),
            BridgeOutput::Corrupt(e) => Some(e),
            BridgeOutput::Dropped(_) => None,
        }
    }
}

/// Owns the stream decoder and forwards every frame to the middleware.
#[derive(Debug, Default)]
pub struct ReaderBridge {
    decoder: FrameDecoder,
}

impl ReaderBridge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> DecoderStats {
        self.decoder.stats()
    }

    /// Decodes `bytes` and ingests each frame into `session` at time `now`.
    pub fn feed(
        &mut self,
        attendance: &mut Attendance,
        session: SessionId,
        bytes: &[u8],
        now: f64,
    ) -> Result<Vec<BridgeOutput>> {
        self.decoder.push(bytes);
        let mut out = Vec::new();
        while let Some(frame) = self.decoder.next_frame() {
            out.push(match frame {
                Ok(tag) => BridgeOutput::Scan(Box::new(attendance.ingest_scan(session, tag, now)?)),
                Err(e) if e.is_corrupt_read() => {
                    BridgeOutput::Corrupt(attendance.ingest_corrupt(session, now)?)
                }
                Err(e) => BridgeOutput::Dropped(e),
            });
        }
        Ok(out)
    }

    /// Decodes `bytes` without recording anything, keeping the decoder in
    /// sync while no session is listening. Returns the number of good frames.
    pub fn skip(&mut self, bytes: &[u8]) -> usize {
        self.decoder.feed(bytes).iter().filter(|r| r.is_ok()).count()
    }

    /// Feeds every emission of a simulator run at its simulated time plus
    /// `offset_s`.
    pub fn replay(
        &mut self,
        attendance: &mut Attendance,
        session: SessionId,
        run: &ScenarioOutput,
        offset_s: f64,
    ) -> Result<Vec<BridgeOutput>> {
        let mut out = Vec::new();
        for emission in &run.emissions {
            out.extend(self.feed(attendance, session, &emission.frame, offset_s + emission.at_s())?);
        }
        Ok(out)
    }
}
