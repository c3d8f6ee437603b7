//! The E-wave monitor: level estimation, bit recovery, frame decoding and
//! PVK verification.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{dbm_to_watts, watts_to_dbm};
use crate::protocol::PvkTable;
use crate::waveform::{
    preamble, samples_per_bit, EnvelopeTrace, FRAME_OVERHEAD_BITS, MAX_PAYLOAD_BYTES, MIN_OVERSAMPLING,
    PREAMBLE_BITS, SYNC_BYTE,
};
use crate::Scalar;

/// Minimum preamble agreement (out of 16) to declare sync.
pub const DEFAULT_MIN_PREAMBLE_MATCHES: usize = 15;
const MAX_CLUSTER_ITERATIONS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("no preamble alignment reached {min_matches}/16 matching bits")]
    NoSync { min_matches: usize },
    #[error("trace sample rate {sample_rate_hz} Hz is below 8x the bit rate {bit_rate_hz} Hz")]
    Undersampled { sample_rate_hz: f64, bit_rate_hz: f64 },
}

/// Result of 2-means clustering of the trace's linear power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelEstimate<S> {
    pub low_watts: S,
    pub high_watts: S,
    /// Cluster-mean midpoint in the linear domain, expressed in dBm.
    pub threshold_dbm: S,
    pub dynamic_range_db: S,
}

impl<S: Scalar> LevelEstimate<S> {
    pub fn threshold_watts(&self) -> S {
        (self.low_watts + self.high_watts) / S::lit(2.0)
    }
}

fn mean<S: Scalar>(xs: &[S]) -> S {
    let sum = xs.iter().fold(S::zero(), |acc, &x| acc + x);
    sum / S::from_usize(xs.len()).unwrap()
}

/// Two-cluster Lloyd iteration on sorted linear powers, seeded at (min, max).
///
/// Working on the sorted samples makes both clusters contiguous and the
/// result independent of sample order.
pub fn estimate_levels<S: Scalar>(trace: &EnvelopeTrace<S>) -> Result<LevelEstimate<S>, MonitorError> {
    if trace.is_empty() {
        return Err(MonitorError::EmptyTrace);
    }
    let mut w: Vec<S> = trace.samples.iter().map(|&s| dbm_to_watts(s)).collect();
    w.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = w.len();
    let (mut low, mut high) = (w[0], w[n - 1]);
    let mut split = usize::MAX;
    for _ in 0..MAX_CLUSTER_ITERATIONS {
        let mid = (low + high) / S::lit(2.0);
        let k = w.partition_point(|&x| x <= mid);
        if k == split || k == 0 || k == n {
            break;
        }
        split = k;
        low = mean(&w[..k]);
        high = mean(&w[k..]);
    }
    let threshold_dbm = watts_to_dbm((low + high) / S::lit(2.0));
    let dynamic_range_db = (watts_to_dbm(high) - watts_to_dbm(low)).max(S::zero());
    Ok(LevelEstimate { low_watts: low, high_watts: high, threshold_dbm, dynamic_range_db })
}

pub fn estimate_threshold<S: Scalar>(trace: &EnvelopeTrace<S>) -> Result<S, MonitorError> {
    Ok(estimate_levels(trace)?.threshold_dbm)
}

pub fn measure_dynamic_range<S: Scalar>(trace: &EnvelopeTrace<S>) -> Result<S, MonitorError> {
    Ok(estimate_levels(trace)?.dynamic_range_db)
}

/// Bits sampled at bit centers from the detected frame start onward.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveredBits {
    pub bits: Vec<bool>,
    /// Sample index where the first preamble bit starts.
    pub sync_offset: usize,
    pub samples_per_bit: usize,
}

pub fn recover_bits<S: Scalar>(trace: &EnvelopeTrace<S>, bit_rate_hz: S) -> Result<RecoveredBits, MonitorError> {
    let levels = estimate_levels(trace)?;
    recover_bits_with(trace, bit_rate_hz, &levels, DEFAULT_MIN_PREAMBLE_MATCHES)
}

/// Slice, acquire the preamble and sample every following bit at its center.
///
/// Acquisition takes the first bit-center alignment whose preamble score
/// reaches `min_matches`. Because the preamble alternates, an alignment two
/// bits early can also score 15/16 when the frame is preceded by idle low
/// state, so the search continues for two more bit periods and keeps the
/// best-scoring run, locking to the middle of that run.
pub fn recover_bits_with<S: Scalar>(
    trace: &EnvelopeTrace<S>,
    bit_rate_hz: S,
    levels: &LevelEstimate<S>,
    min_matches: usize,
) -> Result<RecoveredBits, MonitorError> {
    if trace.is_empty() {
        return Err(MonitorError::EmptyTrace);
    }
    if !(bit_rate_hz > S::zero()) || trace.sample_rate_hz < S::lit(MIN_OVERSAMPLING) * bit_rate_hz {
        return Err(MonitorError::Undersampled {
            sample_rate_hz: trace.sample_rate_hz.to_f64_lossy(),
            bit_rate_hz: bit_rate_hz.to_f64_lossy(),
        });
    }
    let spb = samples_per_bit(bit_rate_hz, trace.sample_rate_hz);
    let half = spb / 2;
    let threshold = levels.threshold_watts();
    let sliced: Vec<bool> = trace.samples.iter().map(|&s| dbm_to_watts(s) > threshold).collect();
    let n = sliced.len();
    let no_sync = MonitorError::NoSync { min_matches };

    // Candidate positions are the center of the first preamble bit.
    let span = (PREAMBLE_BITS - 1) * spb;
    if n <= span {
        return Err(no_sync);
    }
    let last_center = n - 1 - span;
    let pattern = preamble();
    let score = |c: usize| -> usize {
        pattern.iter().enumerate().filter(|&(k, &p)| sliced[c + k * spb] == p).count()
    };

    let first = (0..=last_center).find(|&c| score(c) >= min_matches).ok_or(no_sync)?;
    let window_end = (first + 2 * spb).min(last_center);
    let (best_start, best) = (first..=window_end)
        .map(|c| (c, score(c)))
        .fold((first, 0), |acc, (c, s)| if s > acc.1 { (c, s) } else { acc });
    let mut run_end = best_start;
    while run_end < last_center && score(run_end + 1) == best {
        run_end += 1;
    }
    let center = (best_start + run_end).div_ceil(2);

    let bits = (center..n).step_by(spb).map(|i| sliced[i]).collect();
    Ok(RecoveredBits { bits, sync_offset: center.saturating_sub(half), samples_per_bit: spb })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStatus {
    Decoded,
    NoSync,
    PayloadInvalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult<S> {
    pub payload: Option<Vec<u8>>,
    pub bit_errors_in_preamble: u32,
    pub measured_dr_db: S,
    pub threshold_dbm: S,
    pub status: DecodeStatus,
}

impl<S: Scalar> DecodeResult<S> {
    /// Nothing was received (e.g. the node never transmitted).
    pub fn no_signal() -> Self {
        Self {
            payload: None,
            bit_errors_in_preamble: 0,
            measured_dr_db: S::zero(),
            threshold_dbm: S::nan(),
            status: DecodeStatus::NoSync,
        }
    }

    fn without_payload(levels: &LevelEstimate<S>, status: DecodeStatus, bit_errors_in_preamble: u32) -> Self {
        Self {
            payload: None,
            bit_errors_in_preamble,
            measured_dr_db: levels.dynamic_range_db,
            threshold_dbm: levels.threshold_dbm,
            status,
        }
    }
}

fn bits_to_byte(bits: &[bool]) -> u8 {
    bits.iter().fold(0u8, |acc, &b| (acc << 1) | u8::from(b))
}

/// Check the sync byte and collect the whole payload bytes that follow it.
pub fn decode_frame<S: Scalar>(recovered: &RecoveredBits, levels: &LevelEstimate<S>) -> DecodeResult<S> {
    let bits = &recovered.bits;
    let preamble_errors =
        preamble().iter().zip(bits.iter()).filter(|(p, b)| p != b).count() as u32 + PREAMBLE_BITS.saturating_sub(bits.len()) as u32;
    if bits.len() < FRAME_OVERHEAD_BITS || bits_to_byte(&bits[PREAMBLE_BITS..FRAME_OVERHEAD_BITS]) != SYNC_BYTE {
        return DecodeResult::without_payload(levels, DecodeStatus::PayloadInvalid, preamble_errors);
    }
    let payload: Vec<u8> = bits[FRAME_OVERHEAD_BITS..].chunks_exact(8).map(bits_to_byte).collect();
    if payload.is_empty() || payload.len() > MAX_PAYLOAD_BYTES {
        return DecodeResult::without_payload(levels, DecodeStatus::PayloadInvalid, preamble_errors);
    }
    DecodeResult {
        payload: Some(payload),
        bit_errors_in_preamble: preamble_errors,
        measured_dr_db: levels.dynamic_range_db,
        threshold_dbm: levels.threshold_dbm,
        status: DecodeStatus::Decoded,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    RejectedUnknownKey,
    RejectedReplay,
    RejectedNoSignal,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Accepted => "accepted",
            Verdict::RejectedUnknownKey => "rejected_unknown_key",
            Verdict::RejectedReplay => "rejected_replay",
            Verdict::RejectedNoSignal => "rejected_no_signal",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthDecision<S> {
    pub verdict: Verdict,
    pub matched_key_index: Option<usize>,
    pub decode: DecodeResult<S>,
}

impl<S: Scalar> AuthDecision<S> {
    pub fn is_accepted(&self) -> bool {
        self.verdict == Verdict::Accepted
    }
}

/// Check a decoded code against the CN's table. An accepted key is marked used.
pub fn verify<S: Scalar>(decode: DecodeResult<S>, table: &mut PvkTable) -> AuthDecision<S> {
    let payload = match (&decode.payload, decode.status) {
        (Some(p), DecodeStatus::Decoded) => p,
        _ => return AuthDecision { verdict: Verdict::RejectedNoSignal, matched_key_index: None, decode },
    };
    let (verdict, matched_key_index) = match table.lookup(payload) {
        None => (Verdict::RejectedUnknownKey, None),
        Some(i) if table.is_used(i) => (Verdict::RejectedReplay, Some(i)),
        Some(i) => {
            table.mark_used(i);
            (Verdict::Accepted, Some(i))
        }
    };
    AuthDecision { verdict, matched_key_index, decode }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig<S> {
    pub bit_rate_hz: S,
    pub min_preamble_matches: usize,
}

impl<S: Scalar> MonitorConfig<S> {
    pub fn new(bit_rate_hz: S) -> Self {
        Self { bit_rate_hz, min_preamble_matches: DEFAULT_MIN_PREAMBLE_MATCHES }
    }
}

/// Full receive chain for one bit rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monitor<S> {
    pub config: MonitorConfig<S>,
}

impl<S: Scalar> Monitor<S> {
    pub fn new(config: MonitorConfig<S>) -> Self {
        Self { config }
    }

    pub fn demodulate(&self, trace: &EnvelopeTrace<S>) -> Result<DecodeResult<S>, MonitorError> {
        let levels = estimate_levels(trace)?;
        match recover_bits_with(trace, self.config.bit_rate_hz, &levels, self.config.min_preamble_matches) {
            Ok(recovered) => Ok(decode_frame(&recovered, &levels)),
            Err(MonitorError::NoSync { .. }) => {
                Ok(DecodeResult::without_payload(&levels, DecodeStatus::NoSync, PREAMBLE_BITS as u32))
            }
            Err(e) => Err(e),
        }
    }

    pub fn authenticate(&self, trace: &EnvelopeTrace<S>, table: &mut PvkTable) -> Result<AuthDecision<S>, MonitorError> {
        Ok(verify(self.demodulate(trace)?, table))
    }
}
