//! Physical-layer identification for SWIPT sensor nodes.
//!
//! A node's rectifier switches between a matched and a mismatched state
//! under control of a private key code (PVK), ON/OFF-modulating the power it
//! reflects from the energy wave. A monitor next to the RF source receives
//! that backscatter, recovers the code and checks it against a one-time key
//! table.
//!
//! - [`channel`]: link budgets, leakage, power combination, harvested DC.
//! - [`waveform`]: PVK framing and envelope synthesis, trace file format.
//! - [`monitor`]: threshold and dynamic-range estimation, bit recovery,
//!   frame decoding, verification.
//! - [`protocol`]: key tables, node state machine, sessions, replay attacker.
//!
//! The signal math is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common instantiations.

// `!(x > 0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod monitor;
pub mod protocol;
pub mod scalar;
pub mod waveform;

pub use scalar::Scalar;

pub type AntennaSpecF64 = channel::AntennaSpec<f64>;
pub type LinkGeometryF64 = channel::LinkGeometry<f64>;
pub type RectifierModelF64 = channel::RectifierModel<f64>;
pub type LeakageModelF64 = channel::LeakageModel<f64>;
pub type NoiseSpecF64 = channel::NoiseSpec<f64>;
pub type LinkScenarioF64 = channel::LinkScenario<f64>;
pub type FrameF64 = waveform::Frame<f64>;
pub type EnvelopeTraceF64 = waveform::EnvelopeTrace<f64>;
pub type EnvelopeTraceF32 = waveform::EnvelopeTrace<f32>;
pub type DecodeResultF64 = monitor::DecodeResult<f64>;
pub type AuthDecisionF64 = monitor::AuthDecision<f64>;
pub type MonitorF64 = monitor::Monitor<f64>;
pub type MonitorF32 = monitor::Monitor<f32>;
