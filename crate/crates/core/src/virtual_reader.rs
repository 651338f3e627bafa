//! Discrete-event model of a 125 kHz reader and the tags around it.
//!
//! The simulator owns a [`SimClock`] that only moves when the reader does
//! work (one `per_read` charge per polled frame) or a script waits. Active
//! tags beacon on their own schedule and cost no reader time.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tag_protocol::{encode_collided_frame, encode_frame, TagId, FRAME_LEN};

pub type Frame = [u8; FRAME_LEN];

const MICROS_PER_SECOND: f64 = 1_000_000.0;

/// Converts seconds to whole simulated microseconds.
pub fn seconds_to_micros(seconds: f64) -> u64 {
    (seconds * MICROS_PER_SECOND).round() as u64
}

pub fn micros_to_seconds(micros: u64) -> f64 {
    micros as f64 / MICROS_PER_SECOND
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TagClass {
    Passive,
    SemiPassive,
    Active,
}

impl TagClass {
    /// Script letter: `P`, `S` or `A`.
    pub fn letter(self) -> char {
        match self {
            TagClass::Passive => 'P',
            TagClass::SemiPassive => 'S',
            TagClass::Active => 'A',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostTier {
    Cheap,
    Expensive,
    VeryExpensive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Availability {
    /// Answers only while energized by a polling reader.
    FieldOnly,
    /// Transmits on its own schedule.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemoryMode {
    Permanent,
    Rewritable,
}

/// Physical characteristics of a tag class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagTypeProfile {
    pub class: TagClass,
    pub max_range_m: f64,
    pub has_battery: bool,
    /// Upper bound of the expected service life. Informational only.
    pub lifespan_years: f64,
    pub cost_tier: CostTier,
    pub availability: Availability,
    pub memory_capacity_bytes: usize,
    pub memory_mode: MemoryMode,
}

impl TagTypeProfile {
    /// Profile for `class` with rewritable memory.
    pub fn for_class(class: TagClass) -> Self {
        match class {
            TagClass::Passive => TagTypeProfile {
                class,
                max_range_m: 10.0,
                has_battery: false,
                lifespan_years: 20.0,
                cost_tier: CostTier::Cheap,
                availability: Availability::FieldOnly,
                memory_capacity_bytes: 128,
                memory_mode: MemoryMode::Rewritable,
            },
            TagClass::Active => TagTypeProfile {
                class,
                max_range_m: 100.0,
                has_battery: true,
                lifespan_years: 10.0,
                cost_tier: CostTier::VeryExpensive,
                availability: Availability::Continuous,
                memory_capacity_bytes: 128 * 1024,
                memory_mode: MemoryMode::Rewritable,
            },
            TagClass::SemiPassive => TagTypeProfile {
                class,
                max_range_m: 100.0,
                has_battery: true,
                lifespan_years: 10.0,
                cost_tier: CostTier::Expensive,
                availability: Availability::FieldOnly,
                memory_capacity_bytes: 128 * 1024,
                memory_mode: MemoryMode::Rewritable,
            },
        }
    }

    pub fn with_memory_mode(mut self, mode: MemoryMode) -> Self {
        self.memory_mode = mode;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualTag {
    pub id: TagId,
    pub profile: TagTypeProfile,
    pub distance_m: f64,
    user_memory: Vec<u8>,
}

impl VirtualTag {
    pub fn new(id: TagId, class: TagClass, distance_m: f64) -> Self {
        Self::with_profile(id, TagTypeProfile::for_class(class), distance_m)
    }

    pub fn with_profile(id: TagId, profile: TagTypeProfile, distance_m: f64) -> Self {
        VirtualTag { id, profile, distance_m, user_memory: Vec::new() }
    }

    pub fn user_memory(&self) -> &[u8] {
        &self.user_memory
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderConfig {
    pub frequency_hz: f64,
    pub effective_range_m: f64,
    pub per_read_seconds: f64,
    pub anti_collision: bool,
    pub beacon_interval_s: f64,
}

impl Default for ReaderConfig {
    fn default() -> Self {
        ReaderConfig {
            frequency_hz: 125_000.0,
            effective_range_m: 0.10,
            per_read_seconds: 0.2,
            anti_collision: true,
            beacon_interval_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("frequency {0} Hz outside 125 kHz - 2.4 GHz")]
    Frequency(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

impl ReaderConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(125_000.0..=2.4e9).contains(&self.frequency_hz) {
            return Err(ConfigError::Frequency(self.frequency_hz));
        }
        for (name, value) in [
            ("effective_range_m", self.effective_range_m),
            ("per_read_seconds", self.per_read_seconds),
            ("beacon_interval_s", self.beacon_interval_s),
        ] {
            if value.is_nan() || value <= 0.0 {
                return Err(ConfigError::NonPositive { name, value });
            }
        }
        Ok(())
    }

    fn per_read_micros(&self) -> u64 {
        seconds_to_micros(self.per_read_seconds)
    }
}

/// Simulated time, kept in whole microseconds so sums are exact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SimClock {
    now_us: u64,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now_us(&self) -> u64 {
        self.now_us
    }

    pub fn now_s(&self) -> f64 {
        micros_to_seconds(self.now_us)
    }

    fn advance_to(&mut self, t_us: u64) {
        debug_assert!(t_us >= self.now_us);
        self.now_us = self.now_us.max(t_us);
    }
}

pub fn in_field(tag: &VirtualTag, cfg: &ReaderConfig) -> bool {
    tag.distance_m <= cfg.effective_range_m.min(tag.profile.max_range_m)
}

/// Runs one interrogation round over `tags`.
///
/// Only field-only tags answer a poll. With anti-collision every responder
/// gets its own slot in ascending id order; without it, two or more
/// responders garble a single frame.
pub fn poll_cycle<'a, I>(tags: I, cfg: &ReaderConfig, clock: &mut SimClock) -> Vec<Frame>
where
    I: IntoIterator<Item = &'a VirtualTag>,
{
    let mut responders: Vec<TagId> = tags
        .into_iter()
        .filter(|t| t.profile.availability == Availability::FieldOnly && in_field(t, cfg))
        .map(|t| t.id)
        .collect();
    responders.sort_unstable();
    responders.dedup();

    let frames: Vec<Frame> = match responders.as_slice() {
        [] => Vec::new(),
        [only] => vec![encode_frame(*only)],
        many if cfg.anti_collision => many.iter().map(|&id| encode_frame(id)).collect(),
        many => vec![encode_collided_frame(many[0])],
    };
    clock.advance_to(clock.now_us + cfg.per_read_micros() * frames.len() as u64);
    frames
}

/// Unsolicited frame from an active tag whose beacon period has elapsed
/// since `last_beacon_us`.
pub fn beacon_due(
    tag: &VirtualTag,
    cfg: &ReaderConfig,
    last_beacon_us: u64,
    clock: &SimClock,
) -> Option<Frame> {
    let interval = seconds_to_micros(cfg.beacon_interval_s);
    let due = tag.profile.availability == Availability::Continuous
        && clock.now_us.saturating_sub(last_beacon_us) >= interval
        && in_field(tag, cfg);
    due.then(|| encode_frame(tag.id))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WriteError {
    #[error("tag memory is permanent")]
    ReadOnlyTag,
    #[error("payload of {len} bytes exceeds capacity of {capacity}")]
    CapacityExceeded { len: usize, capacity: usize },
    #[error("tag is out of the reader field")]
    OutOfField,
}

pub fn write_tag_memory(
    tag: &mut VirtualTag,
    cfg: &ReaderConfig,
    data: &[u8],
) -> Result<(), WriteError> {
    if !in_field(tag, cfg) {
        return Err(WriteError::OutOfField);
    }
    if tag.profile.memory_mode == MemoryMode::Permanent {
        return Err(WriteError::ReadOnlyTag);
    }
    let capacity = tag.profile.memory_capacity_bytes;
    if data.len() > capacity {
        return Err(WriteError::CapacityExceeded { len: data.len(), capacity });
    }
    tag.user_memory = data.to_vec();
    Ok(())
}

/// One line of a scenario script.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioCommand {
    Place { id: TagId, class: TagClass, distance_m: f64 },
    Move { id: TagId, distance_m: f64 },
    Remove { id: TagId },
    Poll,
    Wait { seconds: f64 },
    AntiCollision(bool),
}

impl fmt::Display for ScenarioCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioCommand::Place { id, class, distance_m } => {
                write!(f, "PLACE {id} {} {distance_m}", class.letter())
            }
            ScenarioCommand::Move { id, distance_m } => write!(f, "MOVE {id} {distance_m}"),
            ScenarioCommand::Remove { id } => write!(f, "REMOVE {id}"),
            ScenarioCommand::Poll => f.write_str("POLL"),
            ScenarioCommand::Wait { seconds } => write!(f, "WAIT {seconds}"),
            ScenarioCommand::AntiCollision(on) => {
                write!(f, "ANTICOLLISION {}", if *on { "ON" } else { "OFF" })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("scenario line {line}: {message}")]
pub struct ScenarioParseError {
    pub line: usize,
    pub message: String,
}

/// A parsed, statically checked scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioScript {
    pub commands: Vec<ScenarioCommand>,
}

impl ScenarioScript {
    pub fn parse(text: &str) -> Result<Self, ScenarioParseError> {
        let mut commands = Vec::new();
        let mut placed = std::collections::BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |message: String| ScenarioParseError { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let words: Vec<&str> = content.split_whitespace().collect();
            let arity = |n: usize| {
                if words.len() == n + 1 {
                    Ok(())
                } else {
                    Err(err(format!("{} takes {n} argument(s)", words[0])))
                }
            };
            let tag = |s: &str| TagId::from_str(s).map_err(|e| err(e.to_string()));
            let number = |s: &str, what: &str| -> Result<f64, ScenarioParseError> {
                match s.parse::<f64>() {
                    Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
                    _ => Err(err(format!("invalid {what} {s:?}"))),
                }
            };
            let cmd = match words[0] {
                "PLACE" => {
                    arity(3)?;
                    let id = tag(words[1])?;
                    let class = match words[2] {
                        "P" => TagClass::Passive,
                        "A" => TagClass::Active,
                        "S" => TagClass::SemiPassive,
                        other => return Err(err(format!("unknown tag class {other:?}"))),
                    };
                    let distance_m = number(words[3], "distance")?;
                    if !placed.insert(id) {
                        return Err(err(format!("tag {id} is already placed")));
                    }
                    ScenarioCommand::Place { id, class, distance_m }
                }
                "MOVE" => {
                    arity(2)?;
                    let id = tag(words[1])?;
                    if !placed.contains(&id) {
                        return Err(err(format!("tag {id} is not placed")));
                    }
                    ScenarioCommand::Move { id, distance_m: number(words[2], "distance")? }
                }
                "REMOVE" => {
                    arity(1)?;
                    let id = tag(words[1])?;
                    if !placed.remove(&id) {
                        return Err(err(format!("tag {id} is not placed")));
                    }
                    ScenarioCommand::Remove { id }
                }
                "POLL" => {
                    arity(0)?;
                    ScenarioCommand::Poll
                }
                "WAIT" => {
                    arity(1)?;
                    ScenarioCommand::Wait { seconds: number(words[1], "duration")? }
                }
                "ANTICOLLISION" => {
                    arity(1)?;
                    match words[1] {
                        "ON" => ScenarioCommand::AntiCollision(true),
                        "OFF" => ScenarioCommand::AntiCollision(false),
                        other => return Err(err(format!("expected ON or OFF, got {other:?}"))),
                    }
                }
                other => return Err(err(format!("unknown command {other:?}"))),
            };
            commands.push(cmd);
        }
        Ok(ScenarioScript { commands })
    }
}

impl FromStr for ScenarioScript {
    type Err = ScenarioParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioScript::parse(s)
    }
}

impl fmt::Display for ScenarioScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for cmd in &self.commands {
            writeln!(f, "{cmd}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmissionKind {
    Polled,
    Collision,
    Beacon,
}

/// A frame put on the wire at a simulated instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub at_us: u64,
    pub kind: EmissionKind,
    pub frame: Frame,
}

impl Emission {
    pub fn at_s(&self) -> f64 {
        micros_to_seconds(self.at_us)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioOutput {
    pub emissions: Vec<Emission>,
    pub clock: SimClock,
}

impl ScenarioOutput {
    /// The raw bytes the reader would have written, in order.
    pub fn stream(&self) -> Vec<u8> {
        self.emissions.iter().flat_map(|e| e.frame).collect()
    }

    pub fn count(&self, kind: EmissionKind) -> usize {
        self.emissions.iter().filter(|e| e.kind == kind).count()
    }
}

/// Reader plus tag field, advanced one command at a time.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: ReaderConfig,
    clock: SimClock,
    tags: BTreeMap<TagId, VirtualTag>,
    last_beacon_us: BTreeMap<TagId, u64>,
    emissions: Vec<Emission>,
}

impl Simulator {
    pub fn new(cfg: ReaderConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(Simulator {
            cfg,
            clock: SimClock::new(),
            tags: BTreeMap::new(),
            last_beacon_us: BTreeMap::new(),
            emissions: Vec::new(),
        })
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    pub fn config(&self) -> &ReaderConfig {
        &self.cfg
    }

    pub fn tags(&self) -> impl Iterator<Item = &VirtualTag> {
        self.tags.values()
    }

    pub fn tag_mut(&mut self, id: TagId) -> Option<&mut VirtualTag> {
        self.tags.get_mut(&id)
    }

    /// Takes the emissions produced since the last call.
    pub fn drain_emissions(&mut self) -> Vec<Emission> {
        std::mem::take(&mut self.emissions)
    }

    pub fn place(&mut self, tag: VirtualTag) {
        if tag.profile.availability == Availability::Continuous {
            self.last_beacon_us.insert(tag.id, self.clock.now_us);
        }
        self.tags.insert(tag.id, tag);
    }

    pub fn move_tag(&mut self, id: TagId, distance_m: f64) -> bool {
        self.tags.get_mut(&id).map(|t| t.distance_m = distance_m).is_some()
    }

    pub fn remove(&mut self, id: TagId) -> Option<VirtualTag> {
        self.last_beacon_us.remove(&id);
        self.tags.remove(&id)
    }

    pub fn poll(&mut self) {
        let start = self.clock.now_us;
        let per_read = self.cfg.per_read_micros();
        let mut scratch = SimClock { now_us: start };
        let frames = poll_cycle(self.tags.values(), &self.cfg, &mut scratch);
        let kind = if !self.cfg.anti_collision && frames.len() == 1 && self.responders() > 1 {
            EmissionKind::Collision
        } else {
            EmissionKind::Polled
        };
        for (i, frame) in frames.into_iter().enumerate() {
            let at = start + per_read * (i as u64 + 1);
            self.advance_to(at);
            self.emissions.push(Emission { at_us: at, kind, frame });
        }
    }

    pub fn wait(&mut self, seconds: f64) {
        self.advance_to(self.clock.now_us + seconds_to_micros(seconds));
    }

    pub fn set_anti_collision(&mut self, on: bool) {
        self.cfg.anti_collision = on;
    }

    pub fn apply(&mut self, cmd: &ScenarioCommand) {
        match *cmd {
            ScenarioCommand::Place { id, class, distance_m } => {
                self.place(VirtualTag::new(id, class, distance_m))
            }
            ScenarioCommand::Move { id, distance_m } => {
                self.move_tag(id, distance_m);
            }
            ScenarioCommand::Remove { id } => {
                self.remove(id);
            }
            ScenarioCommand::Poll => self.poll(),
            ScenarioCommand::Wait { seconds } => self.wait(seconds),
            ScenarioCommand::AntiCollision(on) => self.set_anti_collision(on),
        }
    }

    fn responders(&self) -> usize {
        self.tags
            .values()
            .filter(|t| t.profile.availability == Availability::FieldOnly && in_field(t, &self.cfg))
            .count()
    }

    /// Moves the clock to `target_us`, firing every beacon scheduled on the
    /// way in time order (ties broken by tag id).
    fn advance_to(&mut self, target_us: u64) {
        let interval = seconds_to_micros(self.cfg.beacon_interval_s);
        loop {
            let next = self
                .last_beacon_us
                .iter()
                .map(|(&id, &last)| (last + interval, id))
                .min();
            match next {
                Some((due, id)) if due <= target_us => {
                    let last = self.last_beacon_us[&id];
                    self.clock.advance_to(due);
                    if let Some(frame) = beacon_due(&self.tags[&id], &self.cfg, last, &self.clock) {
                        self.emissions.push(Emission { at_us: due, kind: EmissionKind::Beacon, frame });
                    }
                    self.last_beacon_us.insert(id, due);
                }
                _ => break,
            }
        }
        self.clock.advance_to(target_us);
    }
}

/// Executes `script` from a fresh simulator.
pub fn run_scenario(script: &ScenarioScript, cfg: &ReaderConfig) -> Result<ScenarioOutput, ConfigError> {
    let mut sim = Simulator::new(cfg.clone())?;
    for cmd in &script.commands {
        sim.apply(cmd);
    }
    Ok(ScenarioOutput { emissions: sim.drain_emissions(), clock: sim.clock() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tag_protocol::{decode_frame, FrameError};

    fn tag(n: u64, class: TagClass, d: f64) -> VirtualTag {
        VirtualTag::new(TagId::new(n).unwrap(), class, d)
    }

    #[test]
    fn field_gating() {
        let cfg = ReaderConfig::default();
        assert!(in_field(&tag(1, TagClass::Passive, 0.05), &cfg));
        assert!(!in_field(&tag(1, TagClass::Passive, 0.15), &cfg));
        assert!(in_field(&tag(1, TagClass::Active, 0.05), &cfg));
        let wide = ReaderConfig { effective_range_m: 500.0, ..cfg };
        assert!(in_field(&tag(1, TagClass::Passive, 10.0), &wide));
        assert!(!in_field(&tag(1, TagClass::Passive, 10.5), &wide));
        assert!(!in_field(&tag(1, TagClass::SemiPassive, 100.5), &wide));
    }

    #[test]
    fn empty_poll() {
        let mut clock = SimClock::new();
        let frames = poll_cycle(&[], &ReaderConfig::default(), &mut clock);
        assert!(frames.is_empty());
        assert_eq!(clock.now_us(), 0);
    }

    #[test]
    fn three_tags_slotted_in_id_order() {
        let tags = [
            tag(30, TagClass::Passive, 0.01),
            tag(10, TagClass::Passive, 0.02),
            tag(20, TagClass::Passive, 0.03),
        ];
        let mut clock = SimClock::new();
        let frames = poll_cycle(&tags, &ReaderConfig::default(), &mut clock);
        let mut expected: Vec<u64> = vec![30, 10, 20];
        expected.sort();
        let got: Vec<u64> = frames.iter().map(|f| decode_frame(f).unwrap().value()).collect();
        assert_eq!(got, expected);
        assert_eq!(clock.now_s(), 0.6);
    }

    #[test]
    fn collision_without_anti_collision() {
        let cfg = ReaderConfig { anti_collision: false, ..Default::default() };
        let tags = [tag(1, TagClass::Passive, 0.01), tag(2, TagClass::Passive, 0.02)];
        let mut clock = SimClock::new();
        let frames = poll_cycle(&tags, &cfg, &mut clock);
        assert_eq!(frames.len(), 1);
        assert!(matches!(decode_frame(&frames[0]), Err(FrameError::ChecksumMismatch { .. })));
        assert_eq!(clock.now_s(), 0.2);
    }

    #[test]
    fn active_tags_do_not_answer_polls() {
        let tags = [tag(1, TagClass::Active, 0.01)];
        let mut clock = SimClock::new();
        assert!(poll_cycle(&tags, &ReaderConfig::default(), &mut clock).is_empty());
    }

    #[test]
    fn beacons() {
        let cfg = ReaderConfig::default();
        let mut clock = SimClock::new();
        clock.advance_to(1_000_000);
        assert!(beacon_due(&tag(1, TagClass::Passive, 0.01), &cfg, 0, &clock).is_none());
        assert!(beacon_due(&tag(1, TagClass::SemiPassive, 0.01), &cfg, 0, &clock).is_none());
        let active = tag(1, TagClass::Active, 0.05);
        assert_eq!(beacon_due(&active, &cfg, 0, &clock), Some(encode_frame(active.id)));
        assert!(beacon_due(&active, &cfg, 1, &clock).is_none());
        assert!(beacon_due(&tag(1, TagClass::Active, 0.2), &cfg, 0, &clock).is_none());
    }

    #[test]
    fn memory_writes() {
        let cfg = ReaderConfig::default();
        let mut t = tag(1, TagClass::Passive, 0.01);
        assert_eq!(write_tag_memory(&mut t, &cfg, &[7; 128]), Ok(()));
        assert_eq!(t.user_memory().len(), 128);
        assert_eq!(
            write_tag_memory(&mut t, &cfg, &[7; 129]),
            Err(WriteError::CapacityExceeded { len: 129, capacity: 128 })
        );
        let mut ro = VirtualTag::with_profile(
            t.id,
            TagTypeProfile::for_class(TagClass::Passive).with_memory_mode(MemoryMode::Permanent),
            0.01,
        );
        assert_eq!(write_tag_memory(&mut ro, &cfg, b"x"), Err(WriteError::ReadOnlyTag));
        let mut far = tag(1, TagClass::Active, 3.0);
        assert_eq!(write_tag_memory(&mut far, &cfg, b"x"), Err(WriteError::OutOfField));
    }

    #[test]
    fn scenario_single_tag() {
        let script: ScenarioScript = "# one tag\nPLACE 0A0B0C0D0E P 0.05\nPOLL\n".parse().unwrap();
        let out = run_scenario(&script, &ReaderConfig::default()).unwrap();
        assert_eq!(out.stream(), encode_frame("0A0B0C0D0E".parse().unwrap()).to_vec());
        assert_eq!(out.clock.now_s(), 0.2);
    }

    #[test]
    fn empty_scenario() {
        let out = run_scenario(&ScenarioScript::parse("").unwrap(), &ReaderConfig::default()).unwrap();
        assert!(out.stream().is_empty());
        assert_eq!(out.clock.now_us(), 0);
    }

    #[test]
    fn sixty_single_polls_take_twelve_seconds() {
        let mut text = String::new();
        for i in 0..60 {
            text += &format!("PLACE {:010X} P 0.05\nPOLL\nREMOVE {:010X}\n", i + 1, i + 1);
        }
        let out = run_scenario(&text.parse().unwrap(), &ReaderConfig::default()).unwrap();
        assert_eq!(out.count(EmissionKind::Polled), 60);
        assert_eq!(out.clock.now_s(), 12.0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = ScenarioScript::parse("POLL\nPLACE 0A0B0C0D0E X 0.1").unwrap_err();
        assert_eq!(e.line, 2);
        let e = ScenarioScript::parse("\n\nREMOVE 0A0B0C0D0E").unwrap_err();
        assert_eq!(e.line, 3);
        let e = ScenarioScript::parse("WAIT -1").unwrap_err();
        assert_eq!(e.line, 1);
        let e = ScenarioScript::parse("JUMP").unwrap_err();
        assert_eq!(e.line, 1);
        let e = ScenarioScript::parse("PLACE 0a0b0c0d0e P 0.1").unwrap_err();
        assert_eq!(e.line, 1);
    }

    #[test]
    fn active_tag_beacons_during_wait() {
        let script = ScenarioScript::parse("PLACE 00000000AA A 0.05\nWAIT 3.5\nMOVE 00000000AA 0.5\nWAIT 2\n").unwrap();
        let out = run_scenario(&script, &ReaderConfig::default()).unwrap();
        let times: Vec<f64> = out.emissions.iter().map(|e| e.at_s()).collect();
        assert_eq!(times, vec![1.0, 2.0, 3.0]);
        assert!(out.emissions.iter().all(|e| e.kind == EmissionKind::Beacon));
        assert_eq!(out.clock.now_s(), 5.5);
    }

    #[test]
    fn config_validation() {
        assert!(ReaderConfig::default().validate().is_ok());
        assert!(ReaderConfig { frequency_hz: 100.0, ..Default::default() }.validate().is_err());
        assert!(ReaderConfig { per_read_seconds: 0.0, ..Default::default() }.validate().is_err());
        assert!(ReaderConfig { effective_range_m: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn script_display_round_trips() {
        let text = "PLACE 0A0B0C0D0E S 0.05\nANTICOLLISION OFF\nPOLL\nWAIT 1.5\nMOVE 0A0B0C0D0E 2\nREMOVE 0A0B0C0D0E\n";
        let script = ScenarioScript::parse(text).unwrap();
        assert_eq!(script.to_string(), text);
    }
}
