use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{node_step, Attacker, AttackerKind, Emission, NodeMode, NodeState, ProtocolError, PvkTable};
use crate::channel::{harvested_dc, LinkScenario, NoiseSpec};
use crate::monitor::{AuthDecision, DecodeResult, DecodeStatus, Monitor, Verdict};
use crate::waveform::{synthesize_envelope, EnvelopeTrace, FRAME_FORMAT};

/// Accumulation tolerance for the per-session energy balance.
pub const ENERGY_TOLERANCE_J: f64 = 1e-12;

/// Independent sub-seed `stream` of `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng.next_u64()
}

const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub dt_s: f64,
    /// Give up if the node has not transmitted by then.
    pub max_time_s: f64,
    pub seed: u64,
    /// Monitor samples per bit.
    pub oversampling: u32,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { dt_s: 100e-6, max_time_s: 86_400.0, seed: 0, oversampling: crate::waveform::DEFAULT_OVERSAMPLING }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Energize,
    BackscatterStart,
    BackscatterEnd,
    Verify,
    ReplayVerify,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub time_s: f64,
    pub event: EventKind,
    pub verdict: Option<Verdict>,
    pub measured_dr_db: Option<f64>,
    pub stored_energy_j: f64,
    pub key_index: Option<usize>,
}

impl SessionRecord {
    fn plain(time_s: f64, event: EventKind, stored_energy_j: f64) -> Self {
        Self { time_s, event, verdict: None, measured_dr_db: None, stored_energy_j, key_index: None }
    }

    fn decision(time_s: f64, event: EventKind, stored_energy_j: f64, d: &AuthDecision<f64>) -> Self {
        Self {
            time_s,
            event,
            verdict: Some(d.verdict),
            measured_dr_db: Some(d.decode.measured_dr_db),
            stored_energy_j,
            key_index: d.matched_key_index,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionLog {
    pub records: Vec<SessionRecord>,
    /// Every verification in order; the replay check, if any, comes last.
    pub decisions: Vec<AuthDecision<f64>>,
    pub final_decision: AuthDecision<f64>,
    /// `(time_s, stored_energy_j)` samples.
    pub energy_trace: Vec<(f64, f64)>,
    pub emission: Option<Emission>,
    pub trace: Option<EnvelopeTrace<f64>>,
    pub initial_energy_j: f64,
    pub final_energy_j: f64,
    pub harvested_j: f64,
    pub spent_j: f64,
    pub backscatter_time_s: f64,
    /// Simulated time until the end of the transmission (or the timeout).
    pub elapsed_s: f64,
}

impl SessionLog {
    /// The monitor's decision on the node's own transmission.
    pub fn legitimate_decision(&self) -> &AuthDecision<f64> {
        self.decisions.first().unwrap_or(&self.final_decision)
    }

    pub fn replay_decision(&self) -> Option<&AuthDecision<f64>> {
        self.records
            .iter()
            .any(|r| r.event == EventKind::ReplayVerify)
            .then(|| self.decisions.last())
            .flatten()
    }

    /// `final − (initial + harvested − spent)`.
    pub fn energy_residual_j(&self) -> f64 {
        self.final_energy_j - (self.initial_energy_j + self.harvested_j - self.spent_j)
    }

    pub fn backscatter_fraction(&self) -> f64 {
        if self.elapsed_s > 0.0 {
            self.backscatter_time_s / self.elapsed_s
        } else {
            0.0
        }
    }

    /// Bit errors of the legitimate frame: preamble mismatches plus payload
    /// Hamming distance. `None` when nothing was decoded.
    pub fn bit_errors(&self) -> Option<u32> {
        let emission = self.emission.as_ref()?;
        let decode = &self.legitimate_decision().decode;
        let payload = decode.payload.as_ref()?;
        if payload.len() != emission.frame.payload.len() {
            return None;
        }
        let payload_errors: u32 = payload.iter().zip(&emission.frame.payload).map(|(a, b)| (a ^ b).count_ones()).sum();
        Some(decode.bit_errors_in_preamble + payload_errors)
    }

    pub fn bit_error_rate(&self) -> Option<f64> {
        let bits = self.emission.as_ref()?.frame.bit_len();
        self.bit_errors().map(|e| e as f64 / bits as f64)
    }

    /// One JSON object per record.
    pub fn to_json_lines(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}

/// One end-to-end authentication exchange.
///
/// The CN energizes the node with CW at `scenario.p_tx_dbm`; the node charges
/// until its wake threshold, backscatters its next PVK, and the monitor
/// decodes the resulting envelope and verifies it against `cn_table`. A
/// replay attacker then re-presents the recorded envelope for a second
/// verification. Idle harvesting is integrated over whole `dt` steps in
/// closed form; the step that crosses the wake threshold goes through
/// [`node_step`].
pub fn run_session(
    scenario: &LinkScenario<f64>,
    node: &mut NodeState,
    cn_table: &mut PvkTable,
    attacker: &mut Attacker,
    monitor: &Monitor<f64>,
    cfg: &SessionConfig,
) -> Result<SessionLog, ProtocolError> {
    scenario.validate()?;
    let bad = |field: &'static str, reason: &str| ProtocolError::InvalidParameter { field, reason: reason.into() };
    if !(cfg.dt_s > 0.0) || !cfg.dt_s.is_finite() {
        return Err(bad("dt_s", "must be finite and > 0"));
    }
    if !(cfg.max_time_s >= cfg.dt_s) {
        return Err(bad("max_time_s", "must be at least one step"));
    }
    if cfg.oversampling < 8 {
        return Err(bad("oversampling", "must be >= 8"));
    }
    if monitor.config.bit_rate_hz != node.bit_rate_hz {
        return Err(bad("bit_rate_hz", "monitor and node disagree on the bit rate"));
    }
    node.mode = NodeMode::Harvesting;

    let dt = cfg.dt_s;
    let p_in = scenario.node_input_dbm()?;
    let p_dc = harvested_dc(p_in, &scenario.rectifier)?.p_dc_watts;
    let start_ledger = node.ledger;
    let initial_energy_j = node.stored_energy_j;
    let max_steps = (cfg.max_time_s / dt).floor() as u64;

    let mut records = vec![SessionRecord::plain(0.0, EventKind::Energize, initial_energy_j)];
    let mut energy_trace = vec![(0.0, initial_energy_j)];

    let mut steps = 0u64;
    let mut emission = None;
    while steps < max_steps {
        match node.steps_until_wake(p_dc, dt) {
            Some(k) if k > 1 => {
                let skip = (k - 1).min(max_steps - steps);
                node.store(p_dc * dt * skip as f64);
                steps += skip;
                energy_trace.push((steps as f64 * dt, node.stored_energy_j));
                if steps >= max_steps {
                    break;
                }
            }
            Some(_) => {}
            None => {
                steps = max_steps;
                break;
            }
        }
        steps += 1;
        if let Some(e) = node_step(node, dt, p_in, &scenario.rectifier)? {
            emission = Some(e);
            break;
        }
    }

    let finish = |node: &NodeState,
                  records: Vec<SessionRecord>,
                  mut energy_trace: Vec<(f64, f64)>,
                  decisions: Vec<AuthDecision<f64>>,
                  emission: Option<Emission>,
                  trace: Option<EnvelopeTrace<f64>>,
                  backscatter_time_s: f64,
                  elapsed_s: f64| {
        let last_t = records.last().map_or(0.0, |r| r.time_s);
        if energy_trace.last().is_none_or(|&(t, _)| t < last_t) {
            energy_trace.push((last_t, node.stored_energy_j));
        }
        let final_decision = decisions.last().cloned().unwrap_or_else(|| AuthDecision {
            verdict: Verdict::RejectedNoSignal,
            matched_key_index: None,
            decode: DecodeResult::no_signal(),
        });
        SessionLog {
            records,
            decisions,
            final_decision,
            energy_trace,
            emission,
            trace,
            initial_energy_j,
            final_energy_j: node.stored_energy_j,
            harvested_j: node.ledger.harvested_j - start_ledger.harvested_j,
            spent_j: node.ledger.spent_j - start_ledger.spent_j,
            backscatter_time_s,
            elapsed_s,
        }
    };

    let Some(emission) = emission else {
        let t = steps as f64 * dt;
        records.push(SessionRecord::plain(t, EventKind::Timeout, node.stored_energy_j));
        log::debug!("session timed out after {t} s without a transmission");
        return Ok(finish(node, records, energy_trace, vec![], None, None, 0.0, t));
    };

    let t_wake = steps as f64 * dt;
    records.push(SessionRecord {
        key_index: Some(emission.key_index),
        ..SessionRecord::plain(t_wake, EventKind::BackscatterStart, node.stored_energy_j)
    });
    energy_trace.push((t_wake, node.stored_energy_j));

    let (p_high, p_low) = scenario.state_levels_dbm()?;
    let bit_rate = emission.frame.bit_rate_hz;
    let noise = NoiseSpec { rng_seed: derive_seed(cfg.seed, NOISE_STREAM), ..scenario.noise };
    let trace = synthesize_envelope(&emission.frame.bits(), p_high, p_low, bit_rate, bit_rate * f64::from(cfg.oversampling), &noise)?
        .with_meta(format!("{FRAME_FORMAT} scenario={}", scenario.name));

    let airtime = emission.frame.duration_s();
    node_step(node, airtime, p_in, &scenario.rectifier)?;
    let t_end = t_wake + airtime;
    records.push(SessionRecord::plain(t_end, EventKind::BackscatterEnd, node.stored_energy_j));
    attacker.eavesdrop(&trace);

    let mut decisions = Vec::new();
    let legit = monitor.authenticate(&trace, cn_table)?;
    let t_verify = t_end + dt;
    records.push(SessionRecord::decision(t_verify, EventKind::Verify, node.stored_energy_j, &legit));
    decisions.push(legit);

    if attacker.kind == AttackerKind::Replay {
        let replayed = monitor.authenticate(attacker.replay_trace()?, cn_table)?;
        records.push(SessionRecord::decision(t_verify + dt, EventKind::ReplayVerify, node.stored_energy_j, &replayed));
        decisions.push(replayed);
    }
    if decisions[0].decode.status != DecodeStatus::Decoded {
        log::debug!("key {} emitted but not decoded; burnt on the node side", emission.key_index);
    }

    Ok(finish(node, records, energy_trace, decisions, Some(emission), Some(trace), airtime, t_end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitor::MonitorConfig;
    use crate::protocol::{generate_table, NodeParams};

    fn setup(scenario: &LinkScenario<f64>) -> (NodeState, PvkTable, Monitor<f64>) {
        let table = generate_table(4, 2, 11).unwrap();
        let node = NodeState::new(NodeParams::default(), table.clone(), 0).unwrap();
        let _ = scenario;
        (node, table, Monitor::new(MonitorConfig::new(NodeParams::default().bit_rate_hz)))
    }

    #[test]
    fn anechoic_session_is_accepted() {
        let s = LinkScenario::anechoic();
        let (mut node, mut cn, mon) = setup(&s);
        let log = run_session(&s, &mut node, &mut cn, &mut Attacker::none(), &mon, &SessionConfig::default()).unwrap();
        assert_eq!(log.final_decision.verdict, Verdict::Accepted);
        assert_eq!(log.final_decision.matched_key_index, Some(0));
        assert_eq!(log.bit_errors(), Some(0));
        assert!(log.energy_residual_j().abs() < ENERGY_TOLERANCE_J);
        assert!(log.records.windows(2).all(|w| w[0].time_s < w[1].time_s));
        assert!(log.backscatter_fraction() < 1e-3);
    }

    #[test]
    fn replayed_trace_is_rejected() {
        let s = LinkScenario::anechoic();
        let (mut node, mut cn, mon) = setup(&s);
        let mut attacker = Attacker::replay();
        let log = run_session(&s, &mut node, &mut cn, &mut attacker, &mon, &SessionConfig::default()).unwrap();
        assert_eq!(log.legitimate_decision().verdict, Verdict::Accepted);
        assert_eq!(log.replay_decision().unwrap().verdict, Verdict::RejectedReplay);
        assert_eq!(log.final_decision.verdict, Verdict::RejectedReplay);
    }

    #[test]
    fn disabled_modulation_is_no_signal() {
        let mut s = LinkScenario::anechoic();
        s.rectifier.gamma_high_db = s.rectifier.gamma_low_db;
        let (mut node, mut cn, mon) = setup(&s);
        let log = run_session(&s, &mut node, &mut cn, &mut Attacker::none(), &mon, &SessionConfig::default()).unwrap();
        assert_eq!(log.final_decision.verdict, Verdict::RejectedNoSignal);
    }

    #[test]
    fn dead_rectifier_times_out() {
        let mut s = LinkScenario::anechoic();
        s.rectifier.efficiency_curve = vec![(-30.0, 0.0), (30.0, 0.0)];
        let (mut node, mut cn, mon) = setup(&s);
        let cfg = SessionConfig { max_time_s: 5.0, ..SessionConfig::default() };
        let log = run_session(&s, &mut node, &mut cn, &mut Attacker::none(), &mon, &cfg).unwrap();
        assert_eq!(log.records.last().unwrap().event, EventKind::Timeout);
        assert_eq!(log.final_decision.verdict, Verdict::RejectedNoSignal);
        assert!(log.emission.is_none());
    }

    #[test]
    fn json_lines_carry_fixed_field_names() {
        let s = LinkScenario::anechoic();
        let (mut node, mut cn, mon) = setup(&s);
        let log = run_session(&s, &mut node, &mut cn, &mut Attacker::none(), &mon, &SessionConfig::default()).unwrap();
        let text = log.to_json_lines();
        let verify: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
        for key in ["time_s", "event", "verdict", "measured_dr_db", "stored_energy_j"] {
            assert!(verify.get(key).is_some(), "{key}");
        }
        assert_eq!(verify["event"], "verify");
        assert_eq!(verify["verdict"], "accepted");
    }

    #[test]
    fn seed_derivation_is_stable_and_separates_streams() {
        assert_eq!(derive_seed(5, 1), derive_seed(5, 1));
        assert_ne!(derive_seed(5, 1), derive_seed(5, 2));
        assert_ne!(derive_seed(5, 1), derive_seed(6, 1));
    }
}
