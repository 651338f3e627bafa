//! Serial frame format of a 125 kHz reader.
//!
//! Every read is reported as a fixed 14-byte ASCII frame:
//!
//! ```text
//! STX  ID(10 hex chars)  CHECKSUM(2 hex chars)  ETX
//! 0x02 "0A0B0C0D0E"      "0E"                   0x03
//! ```
//!
//! The checksum is the XOR of the five identifier bytes. Hex digits are
//! uppercase only; lowercase input is a corrupt frame.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const STX: u8 = 0x02;
pub const ETX: u8 = 0x03;
pub const FRAME_LEN: usize = 14;

const ID_CHARS: usize = 10;
const HEX_UPPER: &[u8; 16] = b"0123456789ABCDEF";

/// 40-bit tag identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TagId(u64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TagIdError {
    #[error("tag id {0:#x} does not fit in 40 bits")]
    OutOfRange(u64),
    #[error("tag id must be exactly 10 uppercase hex characters, got {0:?}")]
    Malformed(String),
}

impl TagId {
    pub const MAX: u64 = (1 << 40) - 1;

    pub fn new(value: u64) -> Result<Self, TagIdError> {
        if value > Self::MAX {
            return Err(TagIdError::OutOfRange(value));
        }
        Ok(TagId(value))
    }

    /// Builds an id from the low 40 bits of `value`.
    pub fn from_low_bits(value: u64) -> Self {
        TagId(value & Self::MAX)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// The five identifier bytes, most significant first.
    pub fn to_bytes(self) -> [u8; 5] {
        let b = self.0.to_be_bytes();
        [b[3], b[4], b[5], b[6], b[7]]
    }

    pub fn from_bytes(bytes: [u8; 5]) -> Self {
        TagId(bytes.iter().fold(0u64, |acc, &b| (acc << 8) | u64::from(b)))
    }

    /// The canonical 10-character uppercase hex form.
    pub fn canonical(self) -> String {
        format!("{:010X}", self.0)
    }
}

impl fmt::Display for TagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:010X}", self.0)
    }
}

impl FromStr for TagId {
    type Err = TagIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = s.as_bytes();
        if bytes.len() != ID_CHARS {
            return Err(TagIdError::Malformed(s.to_string()));
        }
        let mut value = 0u64;
        for &c in bytes {
            let nibble = hex_value(c).ok_or_else(|| TagIdError::Malformed(s.to_string()))?;
            value = (value << 4) | u64::from(nibble);
        }
        Ok(TagId(value))
    }
}

impl Serialize for TagId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical())
    }
}

impl<'de> Deserialize<'de> for TagId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Uppercase-only hex digit value.
fn hex_value(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'A'..=b'F' => Some(c - b'A' + 10),
        _ => None,
    }
}

fn push_hex(out: &mut [u8], byte: u8) {
    out[0] = HEX_UPPER[usize::from(byte >> 4)];
    out[1] = HEX_UPPER[usize::from(byte & 0x0F)];
}

/// XOR of the five identifier bytes.
pub fn checksum(id: TagId) -> u8 {
    id.to_bytes().iter().fold(0, |acc, b| acc ^ b)
}

pub fn encode_frame(id: TagId) -> [u8; FRAME_LEN] {
    let mut frame = [0u8; FRAME_LEN];
    frame[0] = STX;
    for (i, byte) in id.to_bytes().into_iter().enumerate() {
        push_hex(&mut frame[1 + 2 * i..3 + 2 * i], byte);
    }
    push_hex(&mut frame[11..13], checksum(id));
    frame[13] = ETX;
    frame
}

/// Encodes `id` with its checksum byte inverted, which is what a garbled
/// multi-tag response looks like on the wire.
pub fn encode_collided_frame(id: TagId) -> [u8; FRAME_LEN] {
    let mut frame = encode_frame(id);
    push_hex(&mut frame[11..13], !checksum(id));
    frame
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("incomplete frame: {have} of {FRAME_LEN} bytes")]
    FrameTooShort { have: usize },
    #[error("missing start or end delimiter")]
    BadDelimiter,
    #[error("payload byte {position} is not an uppercase hex digit")]
    NonHexPayload { position: usize },
    #[error("checksum mismatch: frame carries {carried:#04x}, payload gives {computed:#04x}")]
    ChecksumMismatch { carried: u8, computed: u8 },
}

impl FrameError {
    /// Errors raised by a well-delimited frame whose content is garbled.
    pub fn is_corrupt_read(&self) -> bool {
        matches!(self, FrameError::NonHexPayload { .. } | FrameError::ChecksumMismatch { .. })
    }
}

/// Decodes exactly one complete frame.
pub fn decode_frame(bytes: &[u8]) -> Result<TagId, FrameError> {
    if bytes.len() < FRAME_LEN {
        return Err(FrameError::FrameTooShort { have: bytes.len() });
    }
    if bytes.len() != FRAME_LEN || bytes[0] != STX || bytes[FRAME_LEN - 1] != ETX {
        return Err(FrameError::BadDelimiter);
    }
    let mut decoded = [0u8; 6];
    for (i, pair) in bytes[1..13].chunks_exact(2).enumerate() {
        let hi = hex_value(pair[0]).ok_or(FrameError::NonHexPayload { position: 1 + 2 * i })?;
        let lo = hex_value(pair[1]).ok_or(FrameError::NonHexPayload { position: 2 + 2 * i })?;
        decoded[i] = (hi << 4) | lo;
    }
    let id = TagId::from_bytes([decoded[0], decoded[1], decoded[2], decoded[3], decoded[4]]);
    let computed = checksum(id);
    if decoded[5] != computed {
        return Err(FrameError::ChecksumMismatch { carried: decoded[5], computed });
    }
    Ok(id)
}

/// Counters kept by a [`FrameDecoder`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderStats {
    pub frames_ok: u64,
    pub checksum_mismatches: u64,
    pub non_hex_payloads: u64,
    pub bad_delimiters: u64,
    pub discarded_bytes: u64,
}

/// Incremental decoder for a byte stream of frames.
///
/// Bytes may arrive in arbitrary chunks. Anything before a start byte is
/// discarded. A frame that turns out to be malformed is dropped and the
/// decoder resynchronizes on the next start byte.
#[derive(Debug, Default, Clone)]
pub struct FrameDecoder {
    buf: VecDeque<u8>,
    stats: DecoderStats,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend(bytes);
    }

    pub fn stats(&self) -> DecoderStats {
        self.stats
    }

    /// Bytes buffered towards an incomplete frame.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }

    /// Returns the next decoded frame or error, or `None` when more bytes
    /// are needed.
    pub fn next_frame(&mut self) -> Option<Result<TagId, FrameError>> {
        let start = match self.buf.iter().position(|&b| b == STX) {
            Some(p) => p,
            None => {
                self.discard(self.buf.len());
                return None;
            }
        };
        self.discard(start);

        // A second start byte inside the window means the current frame
        // was cut short.
        let window = self.buf.len().min(FRAME_LEN);
        if let Some(restart) = self.buf.range(1..window).position(|&b| b == STX) {
            self.discard(restart + 1);
            self.stats.bad_delimiters += 1;
            return Some(Err(FrameError::BadDelimiter));
        }
        if self.buf.len() < FRAME_LEN {
            return None;
        }

        let frame: Vec<u8> = self.buf.drain(..FRAME_LEN).collect();
        let result = decode_frame(&frame);
        match result {
            Ok(_) => self.stats.frames_ok += 1,
            Err(FrameError::BadDelimiter) => {
                // Keep everything after the start byte for resync.
                for &b in frame[1..].iter().rev() {
                    self.buf.push_front(b);
                }
                self.stats.discarded_bytes += 1;
                self.stats.bad_delimiters += 1;
            }
            Err(FrameError::ChecksumMismatch { .. }) => self.stats.checksum_mismatches += 1,
            Err(FrameError::NonHexPayload { .. }) => self.stats.non_hex_payloads += 1,
            Err(FrameError::FrameTooShort { .. }) => unreachable!("window is full"),
        }
        Some(result)
    }

    /// Pushes `bytes` and drains everything decodable.
    pub fn feed(&mut self, bytes: &[u8]) -> Vec<Result<TagId, FrameError>> {
        self.push(bytes);
        std::iter::from_fn(|| self.next_frame()).collect()
    }

    fn discard(&mut self, n: usize) {
        self.buf.drain(..n);
        self.stats.discarded_bytes += n as u64;
    }
}
