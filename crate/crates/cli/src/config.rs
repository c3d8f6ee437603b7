//! Flat `section.key = value` scenario configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! setup = anechoic
//! seed = 7
//! link.p_tx_dbm = 20
//! sweep.param = link.p_tx_dbm
//! sweep.values = -15:24:3
//! ```
//!
//! `setup = wired | anechoic` starts from the bench presets and lets any key
//! override them. `setup = custom` requires every applicable key. Unknown
//! keys are rejected.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use ewave_core::channel::{
    AntennaSpec, LeakageModel, LinkGeometry, LinkPath, LinkScenario, NoiseSpec, RectifierModel,
};
use ewave_core::protocol::{AttackerKind, KeySelection, NodeParams, SessionConfig};
use ewave_core::waveform::MAX_BIT_RATE_HZ;
use ewave_core::LinkScenarioF64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration:\n  - {}", .violations.join("\n  - "))]
    Validation { violations: Vec<String> },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setup {
    Wired,
    Anechoic,
    Custom,
}

impl Setup {
    pub const PRESETS: [Setup; 2] = [Setup::Wired, Setup::Anechoic];

    pub fn as_str(&self) -> &'static str {
        match self {
            Setup::Wired => "wired",
            Setup::Anechoic => "anechoic",
            Setup::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "wired" => Some(Setup::Wired),
            "anechoic" => Some(Setup::Anechoic),
            "custom" => Some(Setup::Custom),
            _ => None,
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    Wired,
    FarField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeakageKind {
    Circulator,
    Coupling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveformMode {
    /// PVK frame at `waveform.bit_rate_hz`.
    Frame,
    /// Square command at `waveform.modulation_hz`.
    Square,
}

/// Every tunable, typed. Preset values fill whatever the text leaves out.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub link_kind: LinkKind,
    pub p_tx_dbm: f64,
    pub frequency_hz: f64,
    pub distance_dl_m: f64,
    pub distance_ul_m: f64,
    pub source_gain_dbi: f64,
    pub node_gain_dbi: f64,
    pub monitor_gain_dbi: f64,
    pub leakage_kind: LeakageKind,
    pub circulator_isolation_db: f64,
    pub coupling_floor_dbm: f64,
    pub ref_tx_power_dbm: f64,
    pub gamma_low_db: f64,
    pub gamma_high_db: f64,
    pub load_ohms: f64,
    pub efficiency_curve: Vec<(f64, f64)>,
    pub noise_power_dbm: Option<f64>,
    pub waveform_mode: WaveformMode,
    pub bit_rate_hz: f64,
    pub modulation_hz: f64,
    pub oversampling: u32,
    pub periods: u32,
    pub protocol_enabled: bool,
    pub n_keys: usize,
    pub key_len: usize,
    pub storage_capacity_j: f64,
    pub wake_threshold_j: f64,
    pub tx_cost_j_per_bit: f64,
    pub dt_s: f64,
    pub max_time_s: f64,
    pub selection: KeySelection,
    pub attacker: AttackerKind,
}

impl Params {
    pub fn anechoic() -> Self {
        let rect = RectifierModel::<f64>::default();
        let node = NodeParams::default();
        let session = SessionConfig::default();
        Self {
            link_kind: LinkKind::FarField,
            p_tx_dbm: 15.0,
            frequency_hz: 868e6,
            distance_dl_m: 3.4,
            distance_ul_m: 3.4,
            source_gain_dbi: 2.5,
            node_gain_dbi: 9.2,
            monitor_gain_dbi: 9.2,
            leakage_kind: LeakageKind::Coupling,
            circulator_isolation_db: 20.0,
            coupling_floor_dbm: -57.0,
            ref_tx_power_dbm: 15.0,
            gamma_low_db: rect.gamma_low_db,
            gamma_high_db: rect.gamma_high_db,
            load_ohms: rect.load_ohms,
            efficiency_curve: rect.efficiency_curve,
            noise_power_dbm: Some(LinkScenarioF64::DEFAULT_NOISE_DBM),
            waveform_mode: WaveformMode::Frame,
            bit_rate_hz: 20e3,
            modulation_hz: 10e3,
            oversampling: session.oversampling,
            periods: 20,
            protocol_enabled: true,
            n_keys: 16,
            key_len: 2,
            storage_capacity_j: node.storage_capacity_j,
            wake_threshold_j: node.wake_threshold_j,
            tx_cost_j_per_bit: node.tx_cost_j_per_bit,
            dt_s: session.dt_s,
            max_time_s: session.max_time_s,
            selection: KeySelection::Sequential,
            attacker: AttackerKind::None,
        }
    }

    pub fn wired() -> Self {
        Self {
            link_kind: LinkKind::Wired,
            p_tx_dbm: -15.0,
            frequency_hz: 876e6,
            leakage_kind: LeakageKind::Circulator,
            circulator_isolation_db: 20.0,
            waveform_mode: WaveformMode::Square,
            modulation_hz: 100e3,
            protocol_enabled: false,
            ..Self::anechoic()
        }
    }

    pub fn for_setup(setup: Setup) -> Self {
        match setup {
            Setup::Wired => Self::wired(),
            Setup::Anechoic | Setup::Custom => Self::anechoic(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Float,
    Int,
    Other,
}

/// Which discriminator a key depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum When {
    Always,
    FarField,
    Circulator,
    Coupling,
    Square,
    Protocol,
}

struct KeySpec {
    name: &'static str,
    kind: Kind,
    when: When,
}

const fn key(name: &'static str, kind: Kind, when: When) -> KeySpec {
    KeySpec { name, kind, when }
}

const KEYS: &[KeySpec] = &[
    key("seed", Kind::Int, When::Always),
    key("link.kind", Kind::Other, When::Always),
    key("link.p_tx_dbm", Kind::Float, When::Always),
    key("link.frequency_hz", Kind::Float, When::Always),
    key("link.distance_dl_m", Kind::Float, When::FarField),
    key("link.distance_ul_m", Kind::Float, When::FarField),
    key("antenna.source_gain_dbi", Kind::Float, When::FarField),
    key("antenna.node_gain_dbi", Kind::Float, When::FarField),
    key("antenna.monitor_gain_dbi", Kind::Float, When::FarField),
    key("leakage.kind", Kind::Other, When::Always),
    key("leakage.circulator_isolation_db", Kind::Float, When::Circulator),
    key("leakage.coupling_floor_dbm", Kind::Float, When::Coupling),
    key("leakage.ref_tx_power_dbm", Kind::Float, When::Coupling),
    key("rectifier.gamma_low_db", Kind::Float, When::Always),
    key("rectifier.gamma_high_db", Kind::Float, When::Always),
    key("rectifier.load_ohms", Kind::Float, When::Always),
    key("rectifier.efficiency_curve", Kind::Other, When::Always),
    key("noise.power_dbm", Kind::Float, When::Always),
    key("waveform.mode", Kind::Other, When::Always),
    key("waveform.bit_rate_hz", Kind::Float, When::Always),
    key("waveform.modulation_hz", Kind::Float, When::Square),
    key("waveform.oversampling", Kind::Int, When::Always),
    key("waveform.periods", Kind::Int, When::Square),
    key("protocol.enabled", Kind::Other, When::Always),
    key("protocol.n_keys", Kind::Int, When::Always),
    key("protocol.key_len", Kind::Int, When::Always),
    key("protocol.storage_capacity_j", Kind::Float, When::Protocol),
    key("protocol.wake_threshold_j", Kind::Float, When::Protocol),
    key("protocol.tx_cost_j_per_bit", Kind::Float, When::Protocol),
    key("protocol.dt_s", Kind::Float, When::Protocol),
    key("protocol.max_time_s", Kind::Float, When::Protocol),
    key("protocol.selection", Kind::Other, When::Protocol),
    key("protocol.attacker", Kind::Other, When::Protocol),
];

fn spec(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

/// Keys that can be swept: every numeric scalar.
pub fn sweepable_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().filter(|k| k.kind != Kind::Other).map(|k| k.name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub setup: Setup,
    pub seed: u64,
    pub params: Params,
    pub sweep: Option<Sweep>,
}

fn parse_f64(raw: &str) -> Result<f64, String> {
    let v: f64 = raw.parse().map_err(|_| format!("expected a number, got {raw:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a finite number, got {raw:?}"))
    }
}

fn parse_int<T: std::str::FromStr>(raw: &str) -> Result<T, String> {
    raw.parse().map_err(|_| format!("expected a non-negative integer, got {raw:?}"))
}

fn parse_curve(raw: &str) -> Result<Vec<(f64, f64)>, String> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pt| {
            let (p, e) = pt.split_once(':').ok_or_else(|| format!("curve point {pt:?} is not p_dbm:efficiency"))?;
            Ok((parse_f64(p.trim())?, parse_f64(e.trim())?))
        })
        .collect()
}

/// `a, b, c` or inclusive `start:stop:step`.
fn parse_values(raw: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = raw.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let (start, stop, step) = (parse_f64(parts[0])?, parse_f64(parts[1])?, parse_f64(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err("range needs start <= stop and step > 0".into());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| start + step * i as f64).collect());
    }
    let values: Vec<f64> =
        raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(parse_f64).collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err("sweep.values is empty".into());
    }
    Ok(values)
}

fn fmt_curve(curve: &[(f64, f64)]) -> String {
    curve.iter().map(|(p, e)| format!("{p}:{e}")).collect::<Vec<_>>().join(", ")
}

impl ScenarioConfig {
    pub fn preset(setup: Setup) -> Self {
        Self { setup, seed: 0, params: Params::for_setup(setup), sweep: None }
    }

    /// Assign one key from its text value.
    pub fn set(&mut self, name: &str, raw: &str) -> Result<(), String> {
        let p = &mut self.params;
        match name {
            "seed" => self.seed = parse_int(raw)?,
            "link.kind" => {
                p.link_kind = match raw {
                    "wired" => LinkKind::Wired,
                    "far_field" => LinkKind::FarField,
                    _ => return Err(format!("expected wired|far_field, got {raw:?}")),
                }
            }
            "link.p_tx_dbm" => p.p_tx_dbm = parse_f64(raw)?,
            "link.frequency_hz" => p.frequency_hz = parse_f64(raw)?,
            "link.distance_dl_m" => p.distance_dl_m = parse_f64(raw)?,
            "link.distance_ul_m" => p.distance_ul_m = parse_f64(raw)?,
            "antenna.source_gain_dbi" => p.source_gain_dbi = parse_f64(raw)?,
            "antenna.node_gain_dbi" => p.node_gain_dbi = parse_f64(raw)?,
            "antenna.monitor_gain_dbi" => p.monitor_gain_dbi = parse_f64(raw)?,
            "leakage.kind" => {
                p.leakage_kind = match raw {
                    "circulator" => LeakageKind::Circulator,
                    "coupling" => LeakageKind::Coupling,
                    _ => return Err(format!("expected circulator|coupling, got {raw:?}")),
                }
            }
            "leakage.circulator_isolation_db" => p.circulator_isolation_db = parse_f64(raw)?,
            "leakage.coupling_floor_dbm" => p.coupling_floor_dbm = parse_f64(raw)?,
            "leakage.ref_tx_power_dbm" => p.ref_tx_power_dbm = parse_f64(raw)?,
            "rectifier.gamma_low_db" => p.gamma_low_db = parse_f64(raw)?,
            "rectifier.gamma_high_db" => p.gamma_high_db = parse_f64(raw)?,
            "rectifier.load_ohms" => p.load_ohms = parse_f64(raw)?,
            "rectifier.efficiency_curve" => p.efficiency_curve = parse_curve(raw)?,
            "noise.power_dbm" => p.noise_power_dbm = if raw == "none" { None } else { Some(parse_f64(raw)?) },
            "waveform.mode" => {
                p.waveform_mode = match raw {
                    "frame" => WaveformMode::Frame,
                    "square" => WaveformMode::Square,
                    _ => return Err(format!("expected frame|square, got {raw:?}")),
                }
            }
            "waveform.bit_rate_hz" => p.bit_rate_hz = parse_f64(raw)?,
            "waveform.modulation_hz" => p.modulation_hz = parse_f64(raw)?,
            "waveform.oversampling" => p.oversampling = parse_int(raw)?,
            "waveform.periods" => p.periods = parse_int(raw)?,
            "protocol.enabled" => {
                p.protocol_enabled = raw.parse().map_err(|_| format!("expected true|false, got {raw:?}"))?
            }
            "protocol.n_keys" => p.n_keys = parse_int(raw)?,
            "protocol.key_len" => p.key_len = parse_int(raw)?,
            "protocol.storage_capacity_j" => p.storage_capacity_j = parse_f64(raw)?,
            "protocol.wake_threshold_j" => p.wake_threshold_j = parse_f64(raw)?,
            "protocol.tx_cost_j_per_bit" => p.tx_cost_j_per_bit = parse_f64(raw)?,
            "protocol.dt_s" => p.dt_s = parse_f64(raw)?,
            "protocol.max_time_s" => p.max_time_s = parse_f64(raw)?,
            "protocol.selection" => {
                p.selection = match raw {
                    "sequential" => KeySelection::Sequential,
                    "random" => KeySelection::Random,
                    _ => return Err(format!("expected sequential|random, got {raw:?}")),
                }
            }
            "protocol.attacker" => {
                p.attacker = match raw {
                    "none" => AttackerKind::None,
                    "replay" => AttackerKind::Replay,
                    _ => return Err(format!("expected none|replay, got {raw:?}")),
                }
            }
            _ => return Err(format!("unknown key {name:?}")),
        }
        Ok(())
    }

    /// Assign a numeric sweep value.
    pub fn set_numeric(&mut self, name: &str, value: f64) -> Result<(), String> {
        match spec(name).map(|s| s.kind) {
            Some(Kind::Float) => self.set(name, &value.to_string()),
            Some(Kind::Int) if value >= 0.0 && value.fract() == 0.0 => self.set(name, &format!("{value:.0}")),
            Some(Kind::Int) => Err(format!("{name} needs a non-negative integer, got {value}")),
            _ => Err(format!("{name:?} is not a numeric scalar key")),
        }
    }

    fn value_text(&self, name: &str) -> String {
        let p = &self.params;
        match name {
            "seed" => self.seed.to_string(),
            "link.kind" => match p.link_kind {
                LinkKind::Wired => "wired".into(),
                LinkKind::FarField => "far_field".into(),
            },
            "link.p_tx_dbm" => p.p_tx_dbm.to_string(),
            "link.frequency_hz" => p.frequency_hz.to_string(),
            "link.distance_dl_m" => p.distance_dl_m.to_string(),
            "link.distance_ul_m" => p.distance_ul_m.to_string(),
            "antenna.source_gain_dbi" => p.source_gain_dbi.to_string(),
            "antenna.node_gain_dbi" => p.node_gain_dbi.to_string(),
            "antenna.monitor_gain_dbi" => p.monitor_gain_dbi.to_string(),
            "leakage.kind" => match p.leakage_kind {
                LeakageKind::Circulator => "circulator".into(),
                LeakageKind::Coupling => "coupling".into(),
            },
            "leakage.circulator_isolation_db" => p.circulator_isolation_db.to_string(),
            "leakage.coupling_floor_dbm" => p.coupling_floor_dbm.to_string(),
            "leakage.ref_tx_power_dbm" => p.ref_tx_power_dbm.to_string(),
            "rectifier.gamma_low_db" => p.gamma_low_db.to_string(),
            "rectifier.gamma_high_db" => p.gamma_high_db.to_string(),
            "rectifier.load_ohms" => p.load_ohms.to_string(),
            "rectifier.efficiency_curve" => fmt_curve(&p.efficiency_curve),
            "noise.power_dbm" => p.noise_power_dbm.map_or("none".into(), |v| v.to_string()),
            "waveform.mode" => match p.waveform_mode {
                WaveformMode::Frame => "frame".into(),
                WaveformMode::Square => "square".into(),
            },
            "waveform.bit_rate_hz" => p.bit_rate_hz.to_string(),
            "waveform.modulation_hz" => p.modulation_hz.to_string(),
            "waveform.oversampling" => p.oversampling.to_string(),
            "waveform.periods" => p.periods.to_string(),
            "protocol.enabled" => p.protocol_enabled.to_string(),
            "protocol.n_keys" => p.n_keys.to_string(),
            "protocol.key_len" => p.key_len.to_string(),
            "protocol.storage_capacity_j" => p.storage_capacity_j.to_string(),
            "protocol.wake_threshold_j" => p.wake_threshold_j.to_string(),
            "protocol.tx_cost_j_per_bit" => p.tx_cost_j_per_bit.to_string(),
            "protocol.dt_s" => p.dt_s.to_string(),
            "protocol.max_time_s" => p.max_time_s.to_string(),
            "protocol.selection" => match p.selection {
                KeySelection::Sequential => "sequential".into(),
                KeySelection::Random => "random".into(),
            },
            "protocol.attacker" => match p.attacker {
                AttackerKind::None => "none".into(),
                AttackerKind::Replay => "replay".into(),
            },
            _ => unreachable!("value_text called with unknown key {name}"),
        }
    }

    /// Whether `when` applies, given the current discriminators. With
    /// `explicit` set, a discriminator that was not given counts as "any".
    fn applies(&self, when: When, explicit: Option<&BTreeSet<String>>) -> bool {
        let unknown = |k: &str| explicit.is_some_and(|e| !e.contains(k));
        let p = &self.params;
        match when {
            When::Always => true,
            When::FarField => unknown("link.kind") || p.link_kind == LinkKind::FarField,
            When::Circulator => unknown("leakage.kind") || p.leakage_kind == LeakageKind::Circulator,
            When::Coupling => unknown("leakage.kind") || p.leakage_kind == LeakageKind::Coupling,
            When::Square => unknown("waveform.mode") || p.waveform_mode == WaveformMode::Square,
            When::Protocol => unknown("protocol.enabled") || p.protocol_enabled,
        }
    }

    /// Canonical text form: every applicable key, one per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("setup = {}\n", self.setup);
        for k in KEYS.iter().filter(|k| self.applies(k.when, None)) {
            out.push_str(&format!("{} = {}\n", k.name, self.value_text(k.name)));
        }
        if let Some(s) = &self.sweep {
            let values: Vec<String> = s.values.iter().map(f64::to_string).collect();
            out.push_str(&format!("sweep.param = {}\nsweep.values = {}\n", s.param, values.join(", ")));
        }
        out
    }

    /// Channel scenario for these parameters.
    pub fn link_scenario(&self) -> Result<LinkScenarioF64, String> {
        let p = &self.params;
        let path = match p.link_kind {
            LinkKind::Wired => LinkPath::Wired { frequency_hz: p.frequency_hz },
            LinkKind::FarField => LinkPath::FarField {
                source: AntennaSpec::new(p.source_gain_dbi).map_err(|e| e.to_string())?,
                node: AntennaSpec::new(p.node_gain_dbi).map_err(|e| e.to_string())?,
                monitor: AntennaSpec::new(p.monitor_gain_dbi).map_err(|e| e.to_string())?,
                downlink: LinkGeometry::new(p.distance_dl_m, p.frequency_hz).map_err(|e| format!("downlink: {e}"))?,
                uplink: LinkGeometry::new(p.distance_ul_m, p.frequency_hz).map_err(|e| format!("uplink: {e}"))?,
            },
        };
        let leakage = match p.leakage_kind {
            LeakageKind::Circulator => LeakageModel::circulator(p.circulator_isolation_db),
            LeakageKind::Coupling => LeakageModel::coupling(p.coupling_floor_dbm, p.ref_tx_power_dbm),
        }
        .map_err(|e| e.to_string())?;
        let rectifier = RectifierModel::new(p.gamma_low_db, p.gamma_high_db, p.efficiency_curve.clone(), p.load_ohms)
            .map_err(|e| e.to_string())?;
        let scenario = LinkScenario {
            name: self.setup.to_string(),
            p_tx_dbm: p.p_tx_dbm,
            path,
            rectifier,
            leakage,
            noise: NoiseSpec { noise_power_dbm: p.noise_power_dbm, rng_seed: self.seed },
        };
        scenario.validate().map_err(|e| e.to_string())?;
        Ok(scenario)
    }

    pub fn node_params(&self) -> NodeParams {
        let p = &self.params;
        NodeParams {
            storage_capacity_j: p.storage_capacity_j,
            wake_threshold_j: p.wake_threshold_j,
            tx_cost_j_per_bit: p.tx_cost_j_per_bit,
            bit_rate_hz: p.bit_rate_hz,
            selection: p.selection,
        }
    }

    pub fn session_config(&self) -> SessionConfig {
        let p = &self.params;
        SessionConfig { dt_s: p.dt_s, max_time_s: p.max_time_s, seed: self.seed, oversampling: p.oversampling }
    }

    /// All constraint violations, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let p = &self.params;
        let mut v = Vec::new();
        if let Err(e) = self.link_scenario() {
            v.push(e);
        }
        let check_rate = |v: &mut Vec<String>, name: &str, rate: f64| {
            if !(rate > 0.0) {
                v.push(format!("{name} must be > 0"));
            } else if rate > MAX_BIT_RATE_HZ {
                v.push(format!("{name} = {rate} exceeds the {MAX_BIT_RATE_HZ} Hz switching ceiling"));
            } else if (rate * f64::from(p.oversampling)).fract() != 0.0 {
                v.push(format!("{name} x waveform.oversampling must be a whole number of Hz"));
            }
        };
        check_rate(&mut v, "waveform.bit_rate_hz", p.bit_rate_hz);
        if p.waveform_mode == WaveformMode::Square {
            check_rate(&mut v, "waveform.modulation_hz", p.modulation_hz);
            if p.periods == 0 {
                v.push("waveform.periods must be >= 1".into());
            }
        }
        if p.oversampling < 8 {
            v.push(format!("waveform.oversampling = {} is below the 8x minimum", p.oversampling));
        }
        if p.key_len == 0 || p.key_len > 64 {
            v.push(format!("protocol.key_len = {} outside 1..=64", p.key_len));
        } else if p.n_keys == 0 {
            v.push("protocol.n_keys must be >= 1".into());
        } else if 256u128.checked_pow(p.key_len as u32).is_some_and(|c| p.n_keys as u128 > c) {
            v.push(format!("protocol.n_keys = {} exceeds the {}-byte code space", p.n_keys, p.key_len));
        }
        if p.protocol_enabled {
            if !(p.storage_capacity_j > 0.0) {
                v.push("protocol.storage_capacity_j must be > 0".into());
            }
            if !(p.wake_threshold_j > 0.0 && p.wake_threshold_j <= p.storage_capacity_j) {
                v.push("protocol.wake_threshold_j must be in (0, storage_capacity_j]".into());
            }
            if !(p.tx_cost_j_per_bit >= 0.0) {
                v.push("protocol.tx_cost_j_per_bit must be >= 0".into());
            }
            if !(p.dt_s > 0.0) {
                v.push("protocol.dt_s must be > 0".into());
            }
            if !(p.max_time_s >= p.dt_s) {
                v.push("protocol.max_time_s must be >= protocol.dt_s".into());
            }
        } else if p.attacker != AttackerKind::None {
            v.push("protocol.attacker requires protocol.enabled = true".into());
        }
        if let Some(s) = &self.sweep {
            if !sweepable_keys().any(|k| k == s.param) {
                v.push(format!("sweep.param {:?} is not a numeric scalar key", s.param));
            } else {
                for &value in &s.values {
                    let mut point = self.clone();
                    point.sweep = None;
                    match point.set_numeric(&s.param, value) {
                        Err(e) => v.push(format!("sweep value {value}: {e}")),
                        Ok(()) => v.extend(point.violations().into_iter().map(|e| format!("sweep value {value}: {e}"))),
                    }
                }
            }
        }
        v
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation { violations })
        }
    }

    /// The configuration with the sweep parameter set to `value`.
    pub fn at_sweep_value(&self, value: f64) -> Result<Self, String> {
        let mut point = self.clone();
        point.sweep = None;
        if let Some(s) = &self.sweep {
            point.set_numeric(&s.param, value)?;
        }
        Ok(point)
    }
}

/// Parse and validate configuration text.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: line_no,
            message: format!("expected `key = value`, got {line:?}"),
        })?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        let known = k == "setup" || k == "sweep.param" || k == "sweep.values" || spec(&k).is_some();
        if !known {
            return Err(ConfigError::Parse { line: line_no, message: format!("unknown key {k:?}") });
        }
        if !seen.insert(k.clone()) {
            return Err(ConfigError::Parse { line: line_no, message: format!("duplicate key {k:?}") });
        }
        entries.push((line_no, k, v));
    }

    let setup = match entries.iter().find(|(_, k, _)| k == "setup") {
        Some((line, _, v)) => Setup::parse(v).ok_or_else(|| ConfigError::Parse {
            line: *line,
            message: format!("setup must be wired|anechoic|custom, got {v:?}"),
        })?,
        None => Setup::Custom,
    };
    let mut config = ScenarioConfig::preset(setup);
    let mut explicit = BTreeSet::new();
    let (mut sweep_param, mut sweep_values) = (None, None);
    for (line, k, v) in &entries {
        let field_err = |message: String| ConfigError::Parse { line: *line, message: format!("{k}: {message}") };
        match k.as_str() {
            "setup" => {}
            "sweep.param" => sweep_param = Some(v.clone()),
            "sweep.values" => sweep_values = Some(parse_values(v).map_err(field_err)?),
            _ => {
                config.set(k, v).map_err(field_err)?;
                explicit.insert(k.clone());
            }
        }
    }
    config.sweep = match (sweep_param, sweep_values) {
        (Some(param), Some(values)) => Some(Sweep { param, values }),
        (None, None) => None,
        (Some(_), None) => return Err(ConfigError::Validation { violations: vec!["sweep.param without sweep.values".into()] }),
        (None, Some(_)) => return Err(ConfigError::Validation { violations: vec!["sweep.values without sweep.param".into()] }),
    };

    if setup == Setup::Custom {
        let missing: Vec<String> = std::iter::once("setup")
            .filter(|_| !seen.contains("setup"))
            .chain(
                KEYS.iter()
                    .filter(|k| k.name != "seed" && !explicit.contains(k.name) && config.applies(k.when, Some(&explicit)))
                    .map(|k| k.name),
            )
            .map(|k| format!("missing required key {k}"))
            .collect();
        if !missing.is_empty() {
            return Err(ConfigError::Validation { violations: missing });
        }
    }
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anechoic_preset_defaults() {
        let c = parse_config("setup = anechoic").unwrap();
        let p = &c.params;
        assert_eq!((p.p_tx_dbm, p.distance_dl_m, p.distance_ul_m), (15.0, 3.4, 3.4));
        assert_eq!((p.source_gain_dbi, p.node_gain_dbi, p.monitor_gain_dbi), (2.5, 9.2, 9.2));
        assert_eq!(p.frequency_hz, 868e6);
        assert_eq!(p.leakage_kind, LeakageKind::Coupling);
        assert_eq!((p.coupling_floor_dbm, p.ref_tx_power_dbm), (-57.0, 15.0));
        assert_eq!(c.link_scenario().unwrap().leakage_dbm(), -57.0);
    }

    #[test]
    fn wired_preset_defaults() {
        let c = parse_config("setup = wired\n").unwrap();
        let p = &c.params;
        assert_eq!((p.p_tx_dbm, p.frequency_hz), (-15.0, 876e6));
        assert_eq!((p.leakage_kind, p.circulator_isolation_db), (LeakageKind::Circulator, 20.0));
        assert_eq!((p.waveform_mode, p.modulation_hz), (WaveformMode::Square, 100e3));
        assert_eq!(c.link_scenario().unwrap().leakage_dbm(), -35.0);
    }

    #[test]
    fn empty_custom_lists_every_missing_key() {
        let err = parse_config("").unwrap_err();
        let ConfigError::Validation { violations } = err else { panic!("{err:?}") };
        assert_eq!(violations.len(), KEYS.len());
        for k in KEYS.iter().filter(|k| k.name != "seed") {
            assert!(violations.iter().any(|v| v.ends_with(k.name)), "{}", k.name);
        }
        assert!(violations.iter().any(|v| v.ends_with("setup")));
    }

    #[test]
    fn full_custom_round_trips_through_text() {
        let mut base = ScenarioConfig::preset(Setup::Anechoic);
        base.setup = Setup::Custom;
        base.seed = 99;
        base.params.p_tx_dbm = 21.5;
        let parsed = parse_config(&base.to_text()).unwrap();
        assert_eq!(parsed, base);
    }

    #[test]
    fn custom_wired_needs_only_its_keys() {
        let mut base = ScenarioConfig::preset(Setup::Wired);
        base.setup = Setup::Custom;
        let text = base.to_text();
        assert!(!text.contains("antenna."));
        assert_eq!(parse_config(&text).unwrap(), base);
    }

    #[test]
    fn unknown_and_malformed_keys_are_parse_errors() {
        assert_eq!(
            parse_config("setup = anechoic\nlink.p_tx_dmb = 3\n"),
            Err(ConfigError::Parse { line: 2, message: "unknown key \"link.p_tx_dmb\"".into() })
        );
        assert!(matches!(parse_config("setup anechoic"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("setup = lab"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(
            parse_config("setup = anechoic\n\nlink.p_tx_dbm = hot"),
            Err(ConfigError::Parse { line: 3, .. })
        ));
        assert!(matches!(parse_config("seed = 1\nseed = 2"), Err(ConfigError::Parse { line: 2, .. })));
    }

    #[test]
    fn validation_collects_all_violations() {
        let err = parse_config("setup = anechoic\nwaveform.bit_rate_hz = 150000\nwaveform.oversampling = 4\nprotocol.key_len = 0\n")
            .unwrap_err();
        let ConfigError::Validation { violations } = err else { panic!() };
        assert_eq!(violations.len(), 3, "{violations:?}");
    }

    #[test]
    fn sweep_parsing() {
        let c = parse_config("setup = anechoic\nsweep.param = link.p_tx_dbm\nsweep.values = -15:24:3").unwrap();
        let s = c.sweep.unwrap();
        assert_eq!(s.values.len(), 14);
        assert_eq!((s.values[0], s.values[13]), (-15.0, 24.0));

        let c = parse_config("setup = wired\nsweep.param = waveform.modulation_hz\nsweep.values = 1000, 10000, 100000").unwrap();
        assert_eq!(c.sweep.unwrap().values, vec![1e3, 1e4, 1e5]);

        assert!(matches!(
            parse_config("setup = wired\nsweep.param = leakage.kind\nsweep.values = 1"),
            Err(ConfigError::Validation { .. })
        ));
        assert!(matches!(
            parse_config("setup = wired\nsweep.param = waveform.modulation_hz\nsweep.values = 1000, 150000"),
            Err(ConfigError::Validation { .. })
        ));
    }

    #[test]
    fn sweep_point_application() {
        let c = parse_config("setup = anechoic\nsweep.param = protocol.n_keys\nsweep.values = 4, 8").unwrap();
        assert_eq!(c.at_sweep_value(8.0).unwrap().params.n_keys, 8);
        assert!(c.at_sweep_value(2.5).is_err());
    }
}
