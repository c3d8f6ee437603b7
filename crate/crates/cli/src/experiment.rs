//! Runs a configuration (and its sweep) and tabulates the results.

use std::fmt;
use std::io::Write;

use ewave_core::monitor::{DecodeStatus, MonitorConfig, Verdict};
use ewave_core::protocol::{derive_seed, generate_table, run_session, Attacker, AttackerKind, NodeState, SessionLog};
use ewave_core::waveform::{build_frame, generate_square_cmd, synthesize_envelope, synthesize_states, FRAME_FORMAT};
use ewave_core::{EnvelopeTraceF64, MonitorF64};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ScenarioConfig, WaveformMode};

/// Seed streams derived from the configured seed.
const NOISE_STREAM: u64 = 1;
const TABLE_STREAM: u64 = 2;
const SELECTION_STREAM: u64 = 3;

/// Largest DR spread tolerated over a TX power sweep.
pub const POWER_SWEEP_DR_SPREAD_DB: f64 = 1.5;
/// Largest DR spread tolerated over a modulation frequency sweep.
pub const MODULATION_SWEEP_DR_SPREAD_DB: f64 = 0.1;

pub const CSV_HEADER: [&str; 9] =
    ["sweep_param", "sweep_value", "dr_db", "threshold_dbm", "verdict", "ber", "stored_energy_j", "status", "seed"];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Point(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One CSV row. Fields that do not apply to a point are left empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sweep_param: String,
    pub sweep_value: Option<f64>,
    pub dr_db: Option<f64>,
    pub threshold_dbm: Option<f64>,
    pub verdict: Option<Verdict>,
    pub ber: Option<f64>,
    pub stored_energy_j: Option<f64>,
    pub status: String,
    pub seed: u64,
}

impl Row {
    fn empty(config: &ScenarioConfig, sweep_value: Option<f64>, status: String) -> Self {
        Self {
            sweep_param: config.sweep.as_ref().map_or(String::new(), |s| s.param.clone()),
            sweep_value,
            dr_db: None,
            threshold_dbm: None,
            verdict: None,
            ber: None,
            stored_energy_j: None,
            status,
            seed: config.seed,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn record(&self) -> [String; 9] {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        [
            self.sweep_param.clone(),
            opt(self.sweep_value),
            opt(self.dr_db),
            opt(self.threshold_dbm),
            self.verdict.map_or(String::new(), |v| v.as_str().to_string()),
            opt(self.ber),
            opt(self.stored_energy_j),
            self.status.clone(),
            self.seed.to_string(),
        ]
    }
}

/// Everything produced for one parameter point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub row: Row,
    pub trace: Option<EnvelopeTraceF64>,
    pub session: Option<SessionLog>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub points: Vec<PointResult>,
    pub checks: Vec<Check>,
}

impl ExperimentOutput {
    pub fn rows(&self) -> impl Iterator<Item = &Row> {
        self.points.iter().map(|p| &p.row)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        write_csv(self.rows(), out)
    }

    /// Session event records of every point, as JSON lines.
    pub fn session_json_lines(&self) -> String {
        self.points.iter().filter_map(|p| p.session.as_ref()).map(SessionLog::to_json_lines).collect()
    }
}

pub fn write_csv<'a, W: Write>(rows: impl IntoIterator<Item = &'a Row>, out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

fn decode_status_str(s: DecodeStatus) -> &'static str {
    match s {
        DecodeStatus::Decoded => "ok",
        DecodeStatus::NoSync => "no_sync",
        DecodeStatus::PayloadInvalid => "payload_invalid",
    }
}

fn bit_error_rate(sent: &[u8], got: &[u8]) -> f64 {
    let errors: u32 = sent.iter().zip(got).map(|(a, b)| (a ^ b).count_ones()).sum::<u32>()
        + 8 * sent.len().abs_diff(got.len()) as u32;
    f64::from(errors) / (8 * sent.len().max(got.len())) as f64
}

fn session_point(config: &ScenarioConfig, mut row: Row) -> Result<PointResult, String> {
    let p = &config.params;
    let scenario = config.link_scenario()?;
    let table = generate_table(p.n_keys, p.key_len, derive_seed(config.seed, TABLE_STREAM)).map_err(|e| e.to_string())?;
    let mut cn_table = table.clone();
    let mut node = NodeState::new(config.node_params(), table, derive_seed(config.seed, SELECTION_STREAM))
        .map_err(|e| e.to_string())?;
    let mut attacker = match p.attacker {
        AttackerKind::None => Attacker::none(),
        AttackerKind::Replay => Attacker::replay(),
    };
    let monitor = MonitorF64::new(MonitorConfig::new(p.bit_rate_hz));
    let log = run_session(&scenario, &mut node, &mut cn_table, &mut attacker, &monitor, &config.session_config())
        .map_err(|e| e.to_string())?;

    row.stored_energy_j = Some(log.final_energy_j);
    if log.emission.is_none() {
        row.status = "timeout".into();
    } else {
        let legit = log.legitimate_decision();
        row.dr_db = Some(legit.decode.measured_dr_db);
        row.threshold_dbm = Some(legit.decode.threshold_dbm);
        row.verdict = Some(log.final_decision.verdict);
        row.ber = log.bit_error_rate();
        row.status = decode_status_str(legit.decode.status).into();
    }
    Ok(PointResult { row, trace: log.trace.clone(), session: Some(log) })
}

fn raw_point(config: &ScenarioConfig, mut row: Row) -> Result<PointResult, String> {
    let p = &config.params;
    let scenario = config.link_scenario()?;
    let (high, low) = scenario.state_levels_dbm().map_err(|e| e.to_string())?;
    let noise = ewave_core::NoiseSpecF64 { rng_seed: derive_seed(config.seed, NOISE_STREAM), ..scenario.noise };
    let os = f64::from(p.oversampling);
    let meta = format!("{FRAME_FORMAT} scenario={}", scenario.name);
    match p.waveform_mode {
        WaveformMode::Square => {
            let fs = p.modulation_hz * os;
            let duration = f64::from(p.periods) / p.modulation_hz;
            let cmd = generate_square_cmd(p.modulation_hz, duration, fs).map_err(|e| e.to_string())?;
            let trace = synthesize_states(&cmd, high, low, fs, &noise).map_err(|e| e.to_string())?.with_meta(meta);
            let levels = ewave_core::monitor::estimate_levels(&trace).map_err(|e| e.to_string())?;
            row.dr_db = Some(levels.dynamic_range_db);
            row.threshold_dbm = Some(levels.threshold_dbm);
            row.status = "ok".into();
            Ok(PointResult { row, trace: Some(trace), session: None })
        }
        WaveformMode::Frame => {
            let table =
                generate_table(p.n_keys, p.key_len, derive_seed(config.seed, TABLE_STREAM)).map_err(|e| e.to_string())?;
            let payload = table.entry(0).expect("validated n_keys >= 1").to_vec();
            let frame = build_frame(&payload, p.bit_rate_hz).map_err(|e| e.to_string())?;
            let trace = synthesize_envelope(&frame.bits(), high, low, p.bit_rate_hz, p.bit_rate_hz * os, &noise)
                .map_err(|e| e.to_string())?
                .with_meta(meta);
            let decode = MonitorF64::new(MonitorConfig::new(p.bit_rate_hz)).demodulate(&trace).map_err(|e| e.to_string())?;
            row.dr_db = Some(decode.measured_dr_db);
            row.threshold_dbm = Some(decode.threshold_dbm);
            row.ber = decode.payload.as_deref().map(|got| bit_error_rate(&payload, got));
            row.status = decode_status_str(decode.status).into();
            Ok(PointResult { row, trace: Some(trace), session: None })
        }
    }
}

/// Run one point. Failures become a row whose status carries the error.
pub fn run_point(config: &ScenarioConfig, sweep_value: Option<f64>) -> PointResult {
    let row = Row::empty(config, sweep_value, String::new());
    let result = match sweep_value {
        Some(v) => config.at_sweep_value(v),
        None => Ok(config.clone()),
    }
    .and_then(|point| {
        let row = row.clone();
        if point.params.protocol_enabled {
            session_point(&point, row)
        } else {
            raw_point(&point, row)
        }
    });
    result.unwrap_or_else(|e| {
        log::warn!("point {sweep_value:?} failed: {e}");
        PointResult { row: Row { status: format!("error: {e}"), ..row }, trace: None, session: None }
    })
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

fn summarize(config: &ScenarioConfig, points: &[PointResult]) -> Vec<Check> {
    let rows: Vec<&Row> = points.iter().map(|p| &p.row).collect();
    let mut checks = Vec::new();
    let bad: Vec<String> = rows.iter().filter(|r| !r.is_ok()).map(|r| r.status.clone()).collect();
    checks.push(Check {
        name: "points_ok",
        passed: bad.is_empty(),
        detail: format!("{} of {} points ok{}", rows.len() - bad.len(), rows.len(),
            bad.first().map_or(String::new(), |s| format!(" (first failure: {s})"))),
    });

    if config.params.protocol_enabled {
        let (name, want) = match config.params.attacker {
            AttackerKind::None => ("all_accepted", Verdict::Accepted),
            AttackerKind::Replay => ("replay_rejected", Verdict::RejectedReplay),
        };
        let hits = rows.iter().filter(|r| r.verdict == Some(want)).count();
        checks.push(Check {
            name,
            passed: hits == rows.len(),
            detail: format!("{hits} of {} final verdicts {}", rows.len(), want.as_str()),
        });
    }

    let limit = match config.sweep.as_ref().map(|s| s.param.as_str()) {
        Some("link.p_tx_dbm") => Some(("dr_spread_power_sweep", POWER_SWEEP_DR_SPREAD_DB)),
        Some("waveform.modulation_hz") => Some(("dr_spread_modulation_sweep", MODULATION_SWEEP_DR_SPREAD_DB)),
        _ => None,
    };
    if let Some((name, limit)) = limit {
        let drs: Vec<f64> = rows.iter().filter_map(|r| r.dr_db).collect();
        let s = spread(&drs);
        checks.push(Check {
            name,
            passed: drs.len() == rows.len() && s <= limit,
            detail: format!("DR spread {s:.4} dB over {} points (limit {limit} dB)", drs.len()),
        });
    }
    checks
}

/// Run every sweep point (in parallel) and evaluate the built-in checks.
/// Rows come back in sweep order and do not depend on the thread count.
pub fn run_experiment(config: &ScenarioConfig) -> ExperimentOutput {
    let points: Vec<PointResult> = match &config.sweep {
        Some(s) => s.values.par_iter().map(|&v| run_point(config, Some(v))).collect(),
        None => vec![run_point(config, None)],
    };
    let checks = summarize(config, &points);
    ExperimentOutput { points, checks }
}

/// Trace of the base (unswept) configuration: the emitted frame when the
/// protocol runs, otherwise the raw frame or square-wave envelope.
pub fn emit_trace(config: &ScenarioConfig) -> Result<EnvelopeTraceF64, ExperimentError> {
    let mut base = config.clone();
    base.sweep = None;
    let point = run_point(&base, None);
    point.trace.ok_or_else(|| ExperimentError::Point(format!("no trace produced ({})", point.row.status)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, Setup};

    #[test]
    fn ber_counts_bit_flips() {
        assert_eq!(bit_error_rate(&[0xFF, 0x00], &[0xFF, 0x00]), 0.0);
        assert_eq!(bit_error_rate(&[0xFF, 0x00], &[0xFE, 0x00]), 1.0 / 16.0);
        assert_eq!(bit_error_rate(&[0xFF], &[]), 1.0);
    }

    #[test]
    fn anechoic_preset_is_accepted() {
        let out = run_experiment(&ScenarioConfig::preset(Setup::Anechoic));
        let row = &out.points[0].row;
        assert_eq!(row.verdict, Some(Verdict::Accepted));
        assert_eq!(row.ber, Some(0.0));
        assert!((row.dr_db.unwrap() - 13.24).abs() < 0.5, "{row:?}");
        assert!(out.all_passed(), "{:?}", out.checks);
    }

    #[test]
    fn wired_preset_trace_has_10us_period() {
        let config = ScenarioConfig::preset(Setup::Wired);
        let trace = emit_trace(&config).unwrap();
        assert_eq!(trace.sample_rate_hz, 1.6e6);
        let threshold = run_experiment(&config).points[0].row.threshold_dbm.unwrap();
        let high: Vec<bool> = trace.samples.iter().map(|&s| s > threshold).collect();
        let rising: Vec<usize> = (1..high.len()).filter(|&i| high[i] && !high[i - 1]).collect();
        assert!(rising.len() >= 10);
        assert!(rising.windows(2).all(|w| w[1] - w[0] == 16));
    }

    #[test]
    fn failed_point_becomes_status_row() {
        let config = parse_config("setup = anechoic\nsweep.param = protocol.max_time_s\nsweep.values = 0.001, 86400").unwrap();
        let out = run_experiment(&config);
        assert_eq!(out.points[0].row.status, "timeout");
        assert!(out.points[1].row.is_ok());
        assert!(!out.all_passed());
    }

    #[test]
    fn csv_header_and_empty_cells() {
        let out = run_experiment(&ScenarioConfig::preset(Setup::Wired));
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(cells.len(), 9);
        assert_eq!((cells[0], cells[1], cells[4], cells[7]), ("", "", "", "ok"));
    }
}
