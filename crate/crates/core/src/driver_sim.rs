//! Virtual driver board: compile multi-channel tactile patterns into a
//! deterministic, safety-gated gate-event timeline, replay it through the
//! thermal model, and budget the supply.
//!
//! Schedule arithmetic runs in integer microseconds so long patterns carry
//! no float drift; seconds appear only at the I/O boundary (always via
//! `t_us as f64 / 1e6`). Channels default to off (the hardware gates are
//! pulled down), so a channel's event stream always starts with an on event.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_physics::ActuatorGeometry;
use crate::envelope::{is_safe, EnvelopeError, EnvelopeFit};
use crate::thermal_sim::{simulate, PulseSchedule, PulseSegment, SimError, SimTrace, ThermalModel};

/// Gate pulses outside this width range are rejected up front.
pub const MIN_PULSE_S: f64 = 0.0005;
pub const MAX_PULSE_S: f64 = 0.100;

pub const MAX_MODULES: usize = 10;

pub type ChannelId = u16;

/// Per-channel pulse list: (start_us, width_us, power_w).
pub type ChannelPulses = BTreeMap<ChannelId, Vec<(u64, u64, f64)>>;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("invalid module configuration: {0}")]
    InvalidModule(String),
    #[error("command references unknown channel {0}")]
    UnknownChannel(ChannelId),
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("pulse width {t_p_s} s is outside the supported range [{MIN_PULSE_S}, {MAX_PULSE_S}] s")]
    PulseWidthOutOfRange { t_p_s: f64 },
    #[error(
        "channel {channel}: rho = {rho_w_per_mm:.4} W/mm at t_p = {t_p_s} s exceeds the envelope \
         (utilization {utilization:.3}); longest safe pulse at this drive is {max_safe}"
    )]
    UnsafeCommand {
        channel: ChannelId,
        rho_w_per_mm: f64,
        t_p_s: f64,
        utilization: f64,
        max_safe_t_p_s: Option<f64>,
        max_safe: String,
    },
    #[error("channel {channel}: commands overlap at {overlap_us} us")]
    OverlappingCommands { channel: ChannelId, overlap_us: u64 },
    #[error("no thermal model supplied for channel {0}")]
    MissingModel(ChannelId),
    #[error("malformed gate log: {0}")]
    MalformedLog(String),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Module flavor: one large pixel or a quartet behind the shared pinout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    Single,
    Quartet,
}

impl ModuleKind {
    pub fn channel_count(&self) -> usize {
        match self {
            ModuleKind::Single => 1,
            ModuleKind::Quartet => 4,
        }
    }
}

/// One driven pixel: board-wide channel id, module pin, and the physical
/// parameters the safety gate needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub channel: ChannelId,
    pub pin: u8,
    pub geometry: ActuatorGeometry,
    pub wire_resistance_ohm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleConfig {
    pub module_id: u8,
    pub kind: ModuleKind,
    pub channels: Vec<ChannelConfig>,
}

/// Validated board: at most ten modules, channel count matching each
/// module's kind, unique ids throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct Board {
    modules: Vec<ModuleConfig>,
    channels: BTreeMap<ChannelId, (u8, ChannelConfig)>,
}

impl Board {
    pub fn new(modules: Vec<ModuleConfig>) -> Result<Self, PatternError> {
        if modules.len() > MAX_MODULES {
            return Err(PatternError::InvalidModule(format!(
                "{} modules exceed the board capacity of {MAX_MODULES}",
                modules.len()
            )));
        }
        let mut module_ids = std::collections::BTreeSet::new();
        let mut channels = BTreeMap::new();
        for module in &modules {
            if module.module_id as usize >= MAX_MODULES {
                return Err(PatternError::InvalidModule(format!(
                    "module id {} is outside 0..{MAX_MODULES}",
                    module.module_id
                )));
            }
            if !module_ids.insert(module.module_id) {
                return Err(PatternError::InvalidModule(format!(
                    "duplicate module id {}",
                    module.module_id
                )));
            }
            if module.channels.len() != module.kind.channel_count() {
                return Err(PatternError::InvalidModule(format!(
                    "module {} is {:?} and must expose exactly {} channel(s), found {}",
                    module.module_id,
                    module.kind,
                    module.kind.channel_count(),
                    module.channels.len()
                )));
            }
            for ch in &module.channels {
                if !(ch.wire_resistance_ohm.is_finite() && ch.wire_resistance_ohm > 0.0) {
                    return Err(PatternError::InvalidModule(format!(
                        "channel {} wire resistance {} ohm must be strictly positive",
                        ch.channel, ch.wire_resistance_ohm
                    )));
                }
                if channels.insert(ch.channel, (module.module_id, ch.clone())).is_some() {
                    return Err(PatternError::InvalidModule(format!(
                        "duplicate channel id {}",
                        ch.channel
                    )));
                }
            }
        }
        Ok(Self { modules, channels })
    }

    pub fn modules(&self) -> &[ModuleConfig] {
        &self.modules
    }

    pub fn channel(&self, id: ChannelId) -> Result<&(u8, ChannelConfig), PatternError> {
        self.channels.get(&id).ok_or(PatternError::UnknownChannel(id))
    }

    pub fn channel_ids(&self) -> impl Iterator<Item = ChannelId> + '_ {
        self.channels.keys().copied()
    }
}

/// Drive level of a command: a power applied to every addressed channel, or
/// a supply voltage converted per channel through its wire resistance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveLevel {
    PowerW(f64),
    VoltageV(f64),
}

/// One pattern entry: a pulse train on a set of channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCommand {
    pub channels: Vec<ChannelId>,
    pub rate_hz: f64,
    /// Duty cycle `t_p / period`, in (0, 1).
    pub duty: f64,
    pub duration_s: f64,
    pub drive: DriveLevel,
    #[serde(default)]
    pub start_s: f64,
}

/// A pattern file: board layout plus the command list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternFile {
    pub modules: Vec<ModuleConfig>,
    pub commands: Vec<PatternCommand>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateState {
    On,
    Off,
}

/// One switching instant. `power_w` is the channel power while on (0 for
/// off events); the CSV export carries only time, channel, and state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateEvent {
    pub t_us: u64,
    pub channel: ChannelId,
    pub state: GateState,
    pub power_w: f64,
}

/// Deterministic, time-ordered gate timeline with per-channel ledgers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateEventLog {
    pub events: Vec<GateEvent>,
    pub energy_by_channel_j: BTreeMap<ChannelId, f64>,
    pub on_time_by_channel_us: BTreeMap<ChannelId, u64>,
    /// Owning module of every channel that appears in the log.
    pub channel_module: BTreeMap<ChannelId, u8>,
}

impl GateEventLog {
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Time of the last event, or 0 for an empty log.
    pub fn end_us(&self) -> u64 {
        self.events.last().map_or(0, |e| e.t_us)
    }

    /// Reconstruct per-channel pulse lists (start_us, width_us, power_w).
    /// Fails if any channel's events do not strictly alternate on/off
    /// starting with on.
    pub fn pulses_by_channel(&self) -> Result<ChannelPulses, PatternError> {
        let mut open: BTreeMap<ChannelId, (u64, f64)> = BTreeMap::new();
        let mut pulses: ChannelPulses = BTreeMap::new();
        for event in &self.events {
            match event.state {
                GateState::On => {
                    if open.insert(event.channel, (event.t_us, event.power_w)).is_some() {
                        return Err(PatternError::MalformedLog(format!(
                            "channel {} turned on twice without an off",
                            event.channel
                        )));
                    }
                }
                GateState::Off => match open.remove(&event.channel) {
                    Some((start, power)) => {
                        if event.t_us <= start {
                            return Err(PatternError::MalformedLog(format!(
                                "channel {} off event does not follow its on event",
                                event.channel
                            )));
                        }
                        pulses.entry(event.channel).or_default().push((
                            start,
                            event.t_us - start,
                            power,
                        ));
                    }
                    None => {
                        return Err(PatternError::MalformedLog(format!(
                            "channel {} turned off while already off (gates are pulled down)",
                            event.channel
                        )));
                    }
                },
            }
        }
        if let Some((&channel, _)) = open.iter().next() {
            return Err(PatternError::MalformedLog(format!(
                "channel {channel} is left on at the end of the log"
            )));
        }
        Ok(pulses)
    }

    /// Export as `time_us,channel,state` CSV.
    pub fn write_csv<W: std::io::Write>(&self, writer: &mut W) -> std::io::Result<()> {
        writeln!(writer, "time_us,channel,state")?;
        for event in &self.events {
            let state = match event.state {
                GateState::On => "on",
                GateState::Off => "off",
            };
            writeln!(writer, "{},{},{}", event.t_us, event.channel, state)?;
        }
        Ok(())
    }
}

fn seconds_to_us(seconds: f64) -> u64 {
    (seconds * 1e6).round() as u64
}

/// Boundary conversion used everywhere a microsecond timestamp becomes
/// seconds, so replayed schedules are bit-identical to directly built ones.
pub fn us_to_seconds(t_us: u64) -> f64 {
    t_us as f64 / 1e6
}

/// Compile commands into a gate-event log, rejecting anything the envelope
/// does not clear with the given margin.
///
/// Per command and channel the pulse count is `floor(duration * rate)`; a
/// partial trailing period emits no pulse. The per-channel energy ledger is
/// `P_el * t_p * count` exactly.
pub fn compile_pattern(
    board: &Board,
    commands: &[PatternCommand],
    fit: &EnvelopeFit,
    margin: f64,
) -> Result<GateEventLog, PatternError> {
    let mut events: Vec<GateEvent> = Vec::new();
    let mut energy: BTreeMap<ChannelId, f64> = BTreeMap::new();
    let mut on_time: BTreeMap<ChannelId, u64> = BTreeMap::new();
    let mut channel_module: BTreeMap<ChannelId, u8> = BTreeMap::new();
    let mut windows: BTreeMap<ChannelId, Vec<(u64, u64)>> = BTreeMap::new();

    for command in commands {
        if command.channels.is_empty() {
            return Err(PatternError::InvalidCommand("command addresses no channels".into()));
        }
        if !(command.rate_hz.is_finite() && command.rate_hz > 0.0) {
            return Err(PatternError::InvalidCommand(format!(
                "pulse rate {} Hz must be strictly positive",
                command.rate_hz
            )));
        }
        if !(command.duty > 0.0 && command.duty < 1.0) {
            return Err(PatternError::InvalidCommand(format!(
                "duty {} must lie strictly inside (0, 1)",
                command.duty
            )));
        }
        if !(command.duration_s.is_finite() && command.duration_s > 0.0) {
            return Err(PatternError::InvalidCommand(format!(
                "duration {} s must be strictly positive",
                command.duration_s
            )));
        }
        if !(command.start_s.is_finite() && command.start_s >= 0.0) {
            return Err(PatternError::InvalidCommand(format!(
                "start {} s must be non-negative",
                command.start_s
            )));
        }
        let t_p_s = command.duty / command.rate_hz;
        if !(MIN_PULSE_S..=MAX_PULSE_S).contains(&t_p_s) {
            return Err(PatternError::PulseWidthOutOfRange { t_p_s });
        }

        let period_us = (1e6 / command.rate_hz).round() as u64;
        let t_p_us = (command.duty * 1e6 / command.rate_hz).round() as u64;
        if t_p_us == 0 || t_p_us >= period_us {
            return Err(PatternError::InvalidCommand(format!(
                "duty {} quantizes to an empty or full period",
                command.duty
            )));
        }
        let start_us = seconds_to_us(command.start_s);
        let duration_us = seconds_to_us(command.duration_s);
        let count = duration_us / period_us;

        for &channel_id in &command.channels {
            let (module_id, config) = board.channel(channel_id)?;
            let p_el_w = match command.drive {
                DriveLevel::PowerW(p) => p,
                DriveLevel::VoltageV(v) => v * v / config.wire_resistance_ohm,
            };
            if !(p_el_w.is_finite() && p_el_w > 0.0) {
                return Err(PatternError::InvalidCommand(format!(
                    "channel {channel_id}: drive power {p_el_w} W must be strictly positive"
                )));
            }
            let rho = p_el_w / config.geometry.total_wire_length_mm();
            let report = is_safe(fit, rho, t_p_s, margin)?;
            if !report.safe {
                return Err(PatternError::UnsafeCommand {
                    channel: channel_id,
                    rho_w_per_mm: rho,
                    t_p_s,
                    utilization: report.utilization,
                    max_safe_t_p_s: report.max_safe_t_p_s,
                    max_safe: report
                        .max_safe_t_p_s
                        .map_or("none at this drive level".to_string(), |t| format!("{t} s")),
                });
            }

            let window = (start_us, start_us + duration_us);
            let channel_windows = windows.entry(channel_id).or_default();
            for &(other_start, other_end) in channel_windows.iter() {
                if window.0 < other_end && other_start < window.1 {
                    return Err(PatternError::OverlappingCommands {
                        channel: channel_id,
                        overlap_us: window.0.max(other_start),
                    });
                }
            }
            channel_windows.push(window);

            for k in 0..count {
                let on_us = start_us + k * period_us;
                events.push(GateEvent {
                    t_us: on_us,
                    channel: channel_id,
                    state: GateState::On,
                    power_w: p_el_w,
                });
                events.push(GateEvent {
                    t_us: on_us + t_p_us,
                    channel: channel_id,
                    state: GateState::Off,
                    power_w: 0.0,
                });
            }
            *energy.entry(channel_id).or_insert(0.0) +=
                p_el_w * (t_p_us as f64 / 1e6) * count as f64;
            *on_time.entry(channel_id).or_insert(0) += t_p_us * count;
            channel_module.insert(channel_id, *module_id);
        }
    }

    events.sort_by_key(|e| (e.t_us, e.channel, matches!(e.state, GateState::On)));
    let log = GateEventLog {
        events,
        energy_by_channel_j: energy,
        on_time_by_channel_us: on_time,
        channel_module,
    };
    verify_log(&log, board, fit, margin)?;
    Ok(log)
}

/// Independent post-hoc pass over a log: structure (strict ordering,
/// on/off alternation from the pulled-down state) and the envelope check
/// for every emitted pulse.
pub fn verify_log(
    log: &GateEventLog,
    board: &Board,
    fit: &EnvelopeFit,
    margin: f64,
) -> Result<(), PatternError> {
    for pair in log.events.windows(2) {
        let a = (pair[0].t_us, pair[0].channel);
        let b = (pair[1].t_us, pair[1].channel);
        if b < a {
            return Err(PatternError::MalformedLog(format!(
                "events out of order at {} us",
                pair[1].t_us
            )));
        }
    }
    let pulses = log.pulses_by_channel()?;
    for (channel, channel_pulses) in &pulses {
        let (_, config) = board.channel(*channel)?;
        for &(_, width_us, power_w) in channel_pulses {
            let t_p_s = us_to_seconds(width_us);
            let rho = power_w / config.geometry.total_wire_length_mm();
            let report = is_safe(fit, rho, t_p_s, margin)?;
            if !report.safe {
                return Err(PatternError::UnsafeCommand {
                    channel: *channel,
                    rho_w_per_mm: rho,
                    t_p_s,
                    utilization: report.utilization,
                    max_safe_t_p_s: report.max_safe_t_p_s,
                    max_safe: report
                        .max_safe_t_p_s
                        .map_or("none at this drive level".to_string(), |t| format!("{t} s")),
                });
            }
        }
    }
    Ok(())
}

/// Replay a log through per-channel thermal models. Channels are
/// independent; each result is identical to simulating that channel's
/// schedule directly.
pub fn simulate_pattern(
    log: &GateEventLog,
    models: &BTreeMap<ChannelId, ThermalModel>,
    sample_period_s: f64,
    t_end_s: Option<f64>,
) -> Result<BTreeMap<ChannelId, SimTrace>, PatternError> {
    let pulses = log.pulses_by_channel()?;
    let mut traces = BTreeMap::new();
    for (channel, channel_pulses) in pulses {
        let model = models.get(&channel).ok_or(PatternError::MissingModel(channel))?;
        let segments: Vec<PulseSegment> = channel_pulses
            .iter()
            .map(|&(start_us, width_us, power_w)| PulseSegment {
                start_s: us_to_seconds(start_us),
                duration_s: us_to_seconds(width_us),
                power_w,
            })
            .collect();
        let schedule = PulseSchedule::new(segments)?;
        let t_end = t_end_s.unwrap_or_else(|| schedule.end_s() + 5.0 * model.tau_cool_s);
        traces.insert(channel, simulate(model, &schedule, t_end, sample_period_s)?);
    }
    Ok(traces)
}

/// Supply-budget summary of a log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardReport {
    /// Largest number of channels on at once.
    pub peak_concurrent_channels: usize,
    /// Largest instantaneous supply power, W (event-driven, no sampling).
    pub peak_power_w: f64,
    pub total_energy_j: f64,
    pub per_module_energy_j: BTreeMap<u8, f64>,
    pub per_channel_energy_j: BTreeMap<ChannelId, f64>,
    pub per_channel_on_time_us: BTreeMap<ChannelId, u64>,
}

/// Walk the event timeline and report peak simultaneous channel count and
/// power draw plus the energy ledgers. Events sharing a timestamp settle
/// their offs before their ons, so an instantaneous handover does not count
/// as overlap.
pub fn board_report(log: &GateEventLog) -> BoardReport {
    let mut active: BTreeMap<ChannelId, f64> = BTreeMap::new();
    let mut peak_channels = 0usize;
    let mut peak_power = 0.0_f64;
    let mut i = 0;
    let events = &log.events;
    while i < events.len() {
        let t = events[i].t_us;
        let mut j = i;
        while j < events.len() && events[j].t_us == t {
            if matches!(events[j].state, GateState::Off) {
                active.remove(&events[j].channel);
            }
            j += 1;
        }
        let mut k = i;
        while k < events.len() && events[k].t_us == t {
            if matches!(events[k].state, GateState::On) {
                active.insert(events[k].channel, events[k].power_w);
            }
            k += 1;
        }
        peak_channels = peak_channels.max(active.len());
        peak_power = peak_power.max(active.values().sum());
        i = j;
    }

    let mut per_module: BTreeMap<u8, f64> = BTreeMap::new();
    for (channel, energy) in &log.energy_by_channel_j {
        if let Some(module) = log.channel_module.get(channel) {
            *per_module.entry(*module).or_insert(0.0) += energy;
        }
    }
    BoardReport {
        peak_concurrent_channels: peak_channels,
        peak_power_w: peak_power,
        total_energy_j: log.energy_by_channel_j.values().sum(),
        per_module_energy_j: per_module,
        per_channel_energy_j: log.energy_by_channel_j.clone(),
        per_channel_on_time_us: log.on_time_by_channel_us.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_physics::{AmbientState, ChainGains};
    use crate::thermal_sim::DEFAULT_TAU_COOL_S;
    use approx::assert_relative_eq;

    fn geom_l4() -> ActuatorGeometry {
        ActuatorGeometry::new(4.0, 2.0, 4.0).unwrap()
    }

    fn single_module(module_id: u8, channel: ChannelId) -> ModuleConfig {
        ModuleConfig {
            module_id,
            kind: ModuleKind::Single,
            channels: vec![ChannelConfig {
                channel,
                pin: 2,
                geometry: ActuatorGeometry::new(8.0, 2.0, 6.0).unwrap(),
                wire_resistance_ohm: 7.5,
            }],
        }
    }

    fn quartet_module(module_id: u8) -> ModuleConfig {
        ModuleConfig {
            module_id,
            kind: ModuleKind::Quartet,
            channels: (0..4)
                .map(|slot| ChannelConfig {
                    channel: module_id as ChannelId * 4 + slot,
                    pin: 2 + slot as u8,
                    geometry: geom_l4(),
                    wire_resistance_ohm: 4.3,
                })
                .collect(),
        }
    }

    fn study_command(channels: Vec<ChannelId>) -> PatternCommand {
        PatternCommand {
            channels,
            rate_hz: 20.0,
            duty: 0.2,
            duration_s: 0.5,
            drive: DriveLevel::PowerW(2.8),
            start_s: 0.0,
        }
    }

    #[test]
    fn board_validation() {
        assert!(Board::new(vec![single_module(0, 0), single_module(1, 1)]).is_ok());
        // duplicate channel id
        assert!(Board::new(vec![single_module(0, 0), single_module(1, 0)]).is_err());
        // duplicate module id
        assert!(Board::new(vec![single_module(3, 0), single_module(3, 1)]).is_err());
        // quartet must have 4 channels
        let mut broken = quartet_module(0);
        broken.channels.pop();
        assert!(Board::new(vec![broken]).is_err());
        // too many modules
        let eleven: Vec<ModuleConfig> = (0..11).map(|i| single_module(i, i as ChannelId)).collect();
        assert!(Board::new(eleven).is_err());
        // module id out of range
        assert!(Board::new(vec![single_module(10, 0)]).is_err());
    }

    #[test]
    fn study_stimulus_compiles_to_ten_exact_pulses() {
        let board = Board::new(vec![quartet_module(0)]).unwrap();
        let fit = EnvelopeFit::reference();
        let log = compile_pattern(&board, &[study_command(vec![0])], &fit, 0.10).unwrap();

        assert_eq!(log.events.len(), 20);
        let pulses = log.pulses_by_channel().unwrap();
        let channel_pulses = &pulses[&0];
        assert_eq!(channel_pulses.len(), 10);
        for (k, &(start_us, width_us, power_w)) in channel_pulses.iter().enumerate() {
            assert_eq!(start_us, k as u64 * 50_000);
            assert_eq!(width_us, 10_000);
            assert_eq!(power_w, 2.8);
        }
        assert_eq!(log.on_time_by_channel_us[&0], 100_000);
        let expected_energy = 2.8 * (10_000_f64 / 1e6) * 10.0;
        assert_eq!(log.energy_by_channel_j[&0].to_bits(), expected_energy.to_bits());
    }

    #[test]
    fn partial_trailing_period_emits_no_pulse() {
        let board = Board::new(vec![quartet_module(0)]).unwrap();
        let fit = EnvelopeFit::reference();
        let mut command = study_command(vec![0]);
        command.duration_s = 0.549; // 10 complete periods + 49 ms
        let log = compile_pattern(&board, &[command], &fit, 0.10).unwrap();
        assert_eq!(log.pulses_by_channel().unwrap()[&0].len(), 10);
        // measured duty deviates from the request by at most one period's
        // worth of quantization over the command window
        let measured = log.on_time_by_channel_us[&0] as f64 / 549_000.0;
        assert!((measured - 0.2).abs() <= 50_000.0 / 549_000.0);
    }

    #[test]
    fn empty_command_list_gives_empty_log() {
        let board = Board::new(vec![quartet_module(0)]).unwrap();
        let log = compile_pattern(&board, &[], &EnvelopeFit::reference(), 0.10).unwrap();
        assert!(log.is_empty());
        assert!(log.energy_by_channel_j.is_empty());
    }

    #[test]
    fn unsafe_command_reports_max_safe_pulse() {
        // rho = 0.5 W/mm at t_p = 30 ms sits past the boundary; the error
        // must quote the 23.7 ms safe limit
        let board = Board::new(vec![quartet_module(0)]).unwrap();
        let fit = EnvelopeFit::reference();
        let command = PatternCommand {
            channels: vec![0],
            rate_hz: 10.0,
            duty: 0.3,
            duration_s: 1.0,
            drive: DriveLevel::PowerW(0.5 * 9.0),
            start_s: 0.0,
        };
        match compile_pattern(&board, &[command], &fit, 0.0) {
            Err(PatternError::UnsafeCommand { channel, rho_w_per_mm, max_safe_t_p_s, .. }) => {
                assert_eq!(channel, 0);
                assert_relative_eq!(rho_w_per_mm, 0.5, max_relative = 1e-12);
                assert_relative_eq!(max_safe_t_p_s.unwrap(), 0.0237, max_relative = 2e-3);
            }
            other => panic!("expected UnsafeCommand, got {other:?}"),
        }
    }

    #[test]
    fn voltage_drive_converts_per_channel() {
        let mut module = quartet_module(0);
        module.channels[1].wire_resistance_ohm = 8.6; // one deviant channel
        let board = Board::new(vec![module]).unwrap();
        let fit = EnvelopeFit::reference();
        let command = PatternCommand {
            channels: vec![0, 1],
            rate_hz: 20.0,
            duty: 0.2,
            duration_s: 0.5,
            drive: DriveLevel::VoltageV(3.0),
            start_s: 0.0,
        };
        let log = compile_pattern(&board, &[command], &fit, 0.10).unwrap();
        let pulses = log.pulses_by_channel().unwrap();
        assert_relative_eq!(pulses[&0][0].2, 9.0 / 4.3, max_relative = 1e-12);
        assert_relative_eq!(pulses[&1][0].2, 9.0 / 8.6, max_relative = 1e-12);
    }

    #[test]
    fn overlapping_commands_on_one_channel_are_rejected() {
        let board = Board::new(vec![quartet_module(0)]).unwrap();
        let fit = EnvelopeFit::reference();
        let mut second = study_command(vec![0]);
        second.start_s = 0.25;
        match compile_pattern(&board, &[study_command(vec![0]), second.clone()], &fit, 0.10) {
            Err(PatternError::OverlappingCommands { channel, .. }) => assert_eq!(channel, 0),
            other => panic!("expected overlap rejection, got {other:?}"),
        }
        // same window on different channels is fine
        let log = compile_pattern(
            &board,
            &[study_command(vec![0]), study_command(vec![1])],
            &fit,
            0.10,
        )
        .unwrap();
        assert_eq!(log.pulses_by_channel().unwrap().len(), 2);
        // back-to-back on one channel is fine too
        let mut later = study_command(vec![0]);
        later.start_s = 0.5;
        assert!(compile_pattern(&board, &[study_command(vec![0]), later], &fit, 0.10).is_ok());
    }

    #[test]
    fn unknown_channel_and_bad_parameters_are_rejected() {
        let board = Board::new(vec![quartet_module(0)]).unwrap();
        let fit = EnvelopeFit::reference();
        assert!(matches!(
            compile_pattern(&board, &[study_command(vec![99])], &fit, 0.10),
            Err(PatternError::UnknownChannel(99))
        ));
        let mut bad_duty = study_command(vec![0]);
        bad_duty.duty = 1.0;
        assert!(compile_pattern(&board, &[bad_duty], &fit, 0.10).is_err());
        let mut too_long = study_command(vec![0]);
        too_long.rate_hz = 2.0;
        too_long.duty = 0.5; // 250 ms pulse
        assert!(matches!(
            compile_pattern(&board, &[too_long], &fit, 0.10),
            Err(PatternError::PulseWidthOutOfRange { .. })
        ));
    }

    #[test]
    fn compilation_is_deterministic() {
        let board = Board::new((0..10).map(quartet_module).collect()).unwrap();
        let fit = EnvelopeFit::reference();
        let commands: Vec<PatternCommand> = (0..10)
            .map(|m| {
                let mut c = study_command((0..4).map(|s| (m * 4 + s) as ChannelId).collect());
                c.start_s = m as f64 * 0.05;
                c
            })
            .collect();
        let log1 = compile_pattern(&board, &commands, &fit, 0.10).unwrap();
        let log2 = compile_pattern(&board, &commands, &fit, 0.10).unwrap();
        assert_eq!(log1, log2);
        let mut csv1 = Vec::new();
        let mut csv2 = Vec::new();
        log1.write_csv(&mut csv1).unwrap();
        log2.write_csv(&mut csv2).unwrap();
        assert_eq!(csv1, csv2);
    }

    #[test]
    fn log_invariants_hold() {
        let board = Board::new((0..10).map(quartet_module).collect()).unwrap();
        let fit = EnvelopeFit::reference();
        let all_channels: Vec<ChannelId> = board.channel_ids().collect();
        let log = compile_pattern(&board, &[study_command(all_channels)], &fit, 0.10).unwrap();
        // ordering and alternation are checked by the verifier
        verify_log(&log, &board, &fit, 0.10).unwrap();
        // first event of every channel is an on event
        let mut seen = std::collections::BTreeSet::new();
        for event in &log.events {
            if seen.insert(event.channel) {
                assert_eq!(event.state, GateState::On);
            }
        }
        // on-time equals sum of pulse widths exactly
        for (channel, pulses) in log.pulses_by_channel().unwrap() {
            let total: u64 = pulses.iter().map(|p| p.1).sum();
            assert_eq!(total, log.on_time_by_channel_us[&channel]);
        }
    }

    fn reference_model(geometry: ActuatorGeometry) -> ThermalModel {
        ThermalModel::from_envelope(
            &EnvelopeFit::reference(),
            geometry,
            AmbientState::default(),
            ChainGains::default(),
            DEFAULT_TAU_COOL_S,
        )
        .unwrap()
    }

    #[test]
    fn replay_matches_direct_simulation_bitwise() {
        let board = Board::new(vec![quartet_module(0)]).unwrap();
        let fit = EnvelopeFit::reference();
        let log = compile_pattern(&board, &[study_command(vec![0])], &fit, 0.10).unwrap();

        let model = reference_model(geom_l4());
        let mut models = BTreeMap::new();
        models.insert(0 as ChannelId, model.clone());
        let dt = 0.0005;
        let traces = simulate_pattern(&log, &models, dt, Some(1.0)).unwrap();

        let segments: Vec<PulseSegment> = (0..10)
            .map(|k| PulseSegment {
                start_s: us_to_seconds(k * 50_000),
                duration_s: us_to_seconds(10_000),
                power_w: 2.8,
            })
            .collect();
        let direct = simulate(&model, &PulseSchedule::new(segments).unwrap(), 1.0, dt).unwrap();
        assert_eq!(traces[&0], direct);
    }

    #[test]
    fn identical_commands_give_identical_traces() {
        let board = Board::new(vec![quartet_module(0)]).unwrap();
        let fit = EnvelopeFit::reference();
        let log = compile_pattern(&board, &[study_command(vec![0, 1])], &fit, 0.10).unwrap();
        let mut models = BTreeMap::new();
        models.insert(0 as ChannelId, reference_model(geom_l4()));
        models.insert(1 as ChannelId, reference_model(geom_l4()));
        let traces = simulate_pattern(&log, &models, 0.0005, Some(1.0)).unwrap();
        assert_eq!(traces[&0], traces[&1]);
    }

    #[test]
    fn missing_model_is_rejected() {
        let board = Board::new(vec![quartet_module(0)]).unwrap();
        let fit = EnvelopeFit::reference();
        let log = compile_pattern(&board, &[study_command(vec![0, 1])], &fit, 0.10).unwrap();
        let mut models = BTreeMap::new();
        models.insert(0 as ChannelId, reference_model(geom_l4()));
        assert!(matches!(
            simulate_pattern(&log, &models, 0.0005, None),
            Err(PatternError::MissingModel(1))
        ));
    }

    #[test]
    fn board_report_examples() {
        let board = Board::new((0..10).map(quartet_module).collect()).unwrap();
        let fit = EnvelopeFit::reference();

        // one channel at 4.8 W
        let single = PatternCommand {
            channels: vec![0],
            rate_hz: 20.0,
            duty: 0.2,
            duration_s: 0.5,
            drive: DriveLevel::PowerW(4.8),
            start_s: 0.0,
        };
        let report = board_report(&compile_pattern(&board, std::slice::from_ref(&single), &fit, 0.10).unwrap());
        assert_eq!(report.peak_concurrent_channels, 1);
        assert_relative_eq!(report.peak_power_w, 4.8, max_relative = 1e-12);

        // two channels that never overlap still peak at one channel's power
        let mut second = single.clone();
        second.channels = vec![1];
        second.start_s = 0.6;
        let report =
            board_report(&compile_pattern(&board, &[single.clone(), second], &fit, 0.10).unwrap());
        assert_eq!(report.peak_concurrent_channels, 1);
        assert_relative_eq!(report.peak_power_w, 4.8, max_relative = 1e-12);

        // forty synchronized channels at 2.8 W draw 112 W
        let all: Vec<ChannelId> = board.channel_ids().collect();
        assert_eq!(all.len(), 40);
        let report =
            board_report(&compile_pattern(&board, &[study_command(all)], &fit, 0.10).unwrap());
        assert_eq!(report.peak_concurrent_channels, 40);
        assert_relative_eq!(report.peak_power_w, 112.0, max_relative = 1e-12);
        assert_eq!(report.per_module_energy_j.len(), 10);
        for energy in report.per_module_energy_j.values() {
            assert_relative_eq!(*energy, 4.0 * 2.8 * 0.01 * 10.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn pattern_file_json_round_trip() {
        let file = PatternFile {
            modules: vec![quartet_module(0), single_module(1, 100)],
            commands: vec![study_command(vec![0, 1, 2, 3])],
        };
        let json = serde_json::to_string_pretty(&file).unwrap();
        let back: PatternFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, file);
    }
}
