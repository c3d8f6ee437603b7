//! PVK framing and synthesis of the envelope the monitor receives.
//!
//! On-air format (`ook-v1`): 16 alternating preamble bits starting with 1,
//! the sync byte `0xD3`, then 1..=64 payload bytes. Bytes go out MSB first.
//! Keying is NRZ OOK: a 1 bit drives the rectifier into its reflecting state
//! for one bit period, so a square command at `f` corresponds to alternating
//! bits at `2f`.

mod trace;

pub use trace::EnvelopeTrace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{dbm_to_watts, watts_to_dbm, NoiseSpec};
use crate::Scalar;

pub const PREAMBLE_BITS: usize = 16;
pub const SYNC_BYTE: u8 = 0xD3;
pub const MAX_PAYLOAD_BYTES: usize = 64;
/// Switching ceiling of the rectifier's command line.
pub const MAX_BIT_RATE_HZ: f64 = 100_000.0;
pub const MIN_OVERSAMPLING: f64 = 8.0;
pub const DEFAULT_OVERSAMPLING: u32 = 16;
/// Lower clip for noisy instantaneous power, keeps dBm finite.
pub const NOISE_FLOOR_WATTS: f64 = 1e-18;
pub const FRAME_FORMAT: &str = "ook-v1";
/// Frame bits that are not payload: preamble plus sync byte.
pub const FRAME_OVERHEAD_BITS: usize = PREAMBLE_BITS + 8;

#[derive(Debug, Error)]
pub enum WaveformError {
    #[error("payload is empty")]
    EmptyPayload,
    #[error("payload of {len} bytes exceeds {MAX_PAYLOAD_BYTES}")]
    PayloadTooLarge { len: usize },
    #[error("rate {rate_hz} Hz exceeds the {MAX_BIT_RATE_HZ} Hz switching ceiling")]
    BitRateTooHigh { rate_hz: f64 },
    #[error("invalid {what}: {value}")]
    InvalidRate { what: &'static str, value: f64 },
    #[error("sample rate {sample_rate_hz} Hz is below {required_hz} Hz (8x oversampling)")]
    Undersampled { sample_rate_hz: f64, required_hz: f64 },
    #[error("high-state level {p_high_dbm} dBm is below low-state level {p_low_dbm} dBm")]
    InvertedLevels { p_high_dbm: f64, p_low_dbm: f64 },
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("trace format, line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The 16-bit alternating preamble, `1010…10`.
pub fn preamble() -> [bool; PREAMBLE_BITS] {
    std::array::from_fn(|i| i % 2 == 0)
}

pub(crate) fn push_byte_msb_first(bits: &mut Vec<bool>, byte: u8) {
    bits.extend((0..8).rev().map(|k| (byte >> k) & 1 == 1));
}

/// A PVK ready for transmission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame<S> {
    pub payload: Vec<u8>,
    pub bit_rate_hz: S,
}

impl<S: Scalar> Frame<S> {
    pub fn sync_byte(&self) -> u8 {
        SYNC_BYTE
    }

    pub fn bit_len(&self) -> usize {
        FRAME_OVERHEAD_BITS + 8 * self.payload.len()
    }

    pub fn duration_s(&self) -> S {
        S::from_usize(self.bit_len()).unwrap() / self.bit_rate_hz
    }

    pub fn bits(&self) -> Vec<bool> {
        frame_to_bits(self)
    }
}

fn check_rate<S: Scalar>(what: &'static str, rate_hz: S) -> Result<(), WaveformError> {
    if !(rate_hz > S::zero()) || !rate_hz.is_finite() {
        return Err(WaveformError::InvalidRate { what, value: rate_hz.to_f64_lossy() });
    }
    if rate_hz > S::lit(MAX_BIT_RATE_HZ) {
        return Err(WaveformError::BitRateTooHigh { rate_hz: rate_hz.to_f64_lossy() });
    }
    Ok(())
}

fn check_oversampling<S: Scalar>(rate_hz: S, sample_rate_hz: S) -> Result<(), WaveformError> {
    if !(sample_rate_hz > S::zero()) || !sample_rate_hz.is_finite() {
        return Err(WaveformError::InvalidRate { what: "sample_rate_hz", value: sample_rate_hz.to_f64_lossy() });
    }
    let required = S::lit(MIN_OVERSAMPLING) * rate_hz;
    if sample_rate_hz < required {
        return Err(WaveformError::Undersampled {
            sample_rate_hz: sample_rate_hz.to_f64_lossy(),
            required_hz: required.to_f64_lossy(),
        });
    }
    Ok(())
}

pub fn build_frame<S: Scalar>(payload: &[u8], bit_rate_hz: S) -> Result<Frame<S>, WaveformError> {
    if payload.is_empty() {
        return Err(WaveformError::EmptyPayload);
    }
    if payload.len() > MAX_PAYLOAD_BYTES {
        return Err(WaveformError::PayloadTooLarge { len: payload.len() });
    }
    check_rate("bit_rate_hz", bit_rate_hz)?;
    Ok(Frame { payload: payload.to_vec(), bit_rate_hz })
}

pub fn frame_to_bits<S: Scalar>(frame: &Frame<S>) -> Vec<bool> {
    let mut bits = Vec::with_capacity(frame.bit_len());
    bits.extend(preamble());
    push_byte_msb_first(&mut bits, frame.sync_byte());
    for &b in &frame.payload {
        push_byte_msb_first(&mut bits, b);
    }
    bits
}

/// Samples per bit: `round(sample_rate / bit_rate)`.
pub fn samples_per_bit<S: Scalar>(bit_rate_hz: S, sample_rate_hz: S) -> usize {
    (sample_rate_hz / bit_rate_hz).round().to_usize().unwrap_or(0)
}

/// OOK envelope for a bit sequence, per-bit round-then-concatenate.
pub fn synthesize_envelope<S: Scalar>(
    bits: &[bool],
    p_high_dbm: S,
    p_low_dbm: S,
    bit_rate_hz: S,
    sample_rate_hz: S,
    noise: &NoiseSpec<S>,
) -> Result<EnvelopeTrace<S>, WaveformError> {
    check_rate("bit_rate_hz", bit_rate_hz)?;
    check_oversampling(bit_rate_hz, sample_rate_hz)?;
    let spb = samples_per_bit(bit_rate_hz, sample_rate_hz);
    let states: Vec<bool> = bits.iter().flat_map(|&b| std::iter::repeat_n(b, spb)).collect();
    synthesize_states(&states, p_high_dbm, p_low_dbm, sample_rate_hz, noise)
}

/// Envelope for a per-sample command sequence (`true` = reflecting state).
///
/// Noise is additive in linear power: each sample receives the mean noise
/// power plus a zero-mean Gaussian fluctuation of the same standard
/// deviation, clipped at [`NOISE_FLOOR_WATTS`]. Without noise the stored
/// samples are the level values themselves.
pub fn synthesize_states<S: Scalar>(
    states: &[bool],
    p_high_dbm: S,
    p_low_dbm: S,
    sample_rate_hz: S,
    noise: &NoiseSpec<S>,
) -> Result<EnvelopeTrace<S>, WaveformError> {
    if !p_high_dbm.is_finite() || !p_low_dbm.is_finite() {
        return Err(WaveformError::NonFiniteSample { index: 0 });
    }
    if p_high_dbm < p_low_dbm {
        return Err(WaveformError::InvertedLevels {
            p_high_dbm: p_high_dbm.to_f64_lossy(),
            p_low_dbm: p_low_dbm.to_f64_lossy(),
        });
    }
    let samples = match noise.noise_power_dbm {
        None => states.iter().map(|&s| if s { p_high_dbm } else { p_low_dbm }).collect(),
        Some(noise_dbm) => {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_seed);
            let (high_w, low_w) = (dbm_to_watts(p_high_dbm), dbm_to_watts(p_low_dbm));
            let noise_w = dbm_to_watts(noise_dbm);
            let floor = S::lit(NOISE_FLOOR_WATTS);
            states
                .iter()
                .map(|&s| {
                    let level = if s { high_w } else { low_w };
                    let z = S::standard_normal(&mut rng);
                    watts_to_dbm((level + noise_w + noise_w * z).max(floor))
                })
                .collect()
        }
    };
    EnvelopeTrace::new(sample_rate_hz, samples, FRAME_FORMAT)
}

/// Square command at `freq_hz` with 50 % duty, starting high at t = 0.
pub fn generate_square_cmd<S: Scalar>(freq_hz: S, duration_s: S, sample_rate_hz: S) -> Result<Vec<bool>, WaveformError> {
    check_rate("freq_hz", freq_hz)?;
    check_oversampling(freq_hz, sample_rate_hz)?;
    if !(duration_s >= S::zero()) || !duration_s.is_finite() {
        return Err(WaveformError::InvalidRate { what: "duration_s", value: duration_s.to_f64_lossy() });
    }
    let n = (duration_s * sample_rate_hz).round().to_usize().unwrap_or(0);
    let half_periods_per_sample = S::lit(2.0) * freq_hz / sample_rate_hz;
    Ok((0..n)
        .map(|i| {
            let half = (S::from_usize(i).unwrap() * half_periods_per_sample).floor();
            half.to_u64().unwrap_or(0).is_multiple_of(2)
        })
        .collect())
}
