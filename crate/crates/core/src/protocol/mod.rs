//! Session-level simulation: PVK tables, the sensor node's harvest/backscatter
//! state machine, the CN-side session driver and the replay attacker.

mod attacker;
mod node;
mod session;
mod table;

pub use attacker::{Attacker, AttackerKind};
pub use node::{node_step, EnergyLedger, Emission, NodeMode, NodeParams, NodeState};
pub use session::{
    derive_seed, run_session, EventKind, SessionConfig, SessionLog, SessionRecord, ENERGY_TOLERANCE_J,
};
pub use table::{generate_table, next_key, KeySelection, PvkTable};

use thiserror::Error;

use crate::channel::ChannelError;
use crate::monitor::MonitorError;
use crate::waveform::WaveformError;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("no unused PVK left in the table")]
    TableExhausted,
    #[error("duplicate PVK at index {index}")]
    DuplicateKey { index: usize },
    #[error("PVK length {len} outside 1..=64 bytes")]
    InvalidKeyLength { len: usize },
    #[error("{n_keys} distinct keys of {key_len_bytes} bytes do not exist")]
    Capacity { n_keys: usize, key_len_bytes: usize },
    #[error("emission needs {needed_j} J but only {stored_j} J is stored")]
    InsufficientEnergy { needed_j: f64, stored_j: f64 },
    #[error("replay attacker has not recorded a trace")]
    NothingRecorded,
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
}
