use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::WaveformError;
use crate::scalar::format_round_trip;
use crate::Scalar;

const HEADER_PREFIX: &str = "sample_rate_hz=";
const HEADER_UNIT: &str = ",unit=dbm,meta=";

/// Uniformly sampled received power at the monitor, in dBm.
///
/// Text form: a header line `sample_rate_hz=<int>,unit=dbm,meta=<string>`
/// followed by one sample per line, written with enough digits to read back
/// bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeTrace<S> {
    pub sample_rate_hz: S,
    pub samples: Vec<S>,
    pub meta: String,
}

impl<S: Scalar> EnvelopeTrace<S> {
    pub fn new(sample_rate_hz: S, samples: Vec<S>, meta: impl Into<String>) -> Result<Self, WaveformError> {
        if !(sample_rate_hz > S::zero()) || !sample_rate_hz.is_finite() {
            return Err(WaveformError::InvalidRate { what: "sample_rate_hz", value: sample_rate_hz.to_f64_lossy() });
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(WaveformError::NonFiniteSample { index });
        }
        let meta = meta.into();
        if meta.contains(['\n', '\r']) {
            return Err(WaveformError::Format { line: 1, reason: "meta must be a single line".into() });
        }
        Ok(Self { sample_rate_hz, samples, meta })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> S {
        S::from_usize(self.samples.len()).unwrap() / self.sample_rate_hz
    }

    pub fn with_meta(mut self, meta: impl Into<String>) -> Self {
        self.meta = meta.into();
        self
    }

    /// Prepend `count` samples at `level_dbm`.
    pub fn padded_front(&self, count: usize, level_dbm: S) -> Self {
        let mut samples = vec![level_dbm; count];
        samples.extend_from_slice(&self.samples);
        Self { sample_rate_hz: self.sample_rate_hz, samples, meta: self.meta.clone() }
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), WaveformError> {
        let rate = self.sample_rate_hz;
        if rate.fract() != S::zero() {
            return Err(WaveformError::Format {
                line: 1,
                reason: format!("sample rate {rate} is not an integer number of Hz"),
            });
        }
        writeln!(out, "{HEADER_PREFIX}{}{HEADER_UNIT}{}", rate.to_u64().unwrap_or(0), self.meta)?;
        for &s in &self.samples {
            writeln!(out, "{}", format_round_trip(s))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> Result<String, WaveformError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(String::from_utf8(buf).expect("trace text is ASCII apart from meta"))
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self, WaveformError> {
        let mut lines = BufReader::new(input).lines();
        let header = lines.next().ok_or(WaveformError::Format { line: 1, reason: "missing header".into() })??;
        let bad_header = |reason: &str| WaveformError::Format { line: 1, reason: reason.to_string() };
        let rest = header.strip_prefix(HEADER_PREFIX).ok_or_else(|| bad_header("expected sample_rate_hz="))?;
        let (rate, meta) = rest.split_once(HEADER_UNIT).ok_or_else(|| bad_header("expected ,unit=dbm,meta="))?;
        let rate: u64 = rate.parse().map_err(|_| bad_header("sample rate is not an unsigned integer"))?;
        let sample_rate_hz = S::from_u64(rate).ok_or_else(|| bad_header("sample rate out of range"))?;

        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            let v: S = text.parse().map_err(|_| WaveformError::Format {
                line: i + 2,
                reason: format!("not a number: {text:?}"),
            })?;
            samples.push(v);
        }
        Self::new(sample_rate_hz, samples, meta)
    }

    pub fn from_text(text: &str) -> Result<Self, WaveformError> {
        Self::read_from(text.as_bytes())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), WaveformError> {
        fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WaveformError> {
        Self::read_from(fs::File::open(path)?)
    }
}
