use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{KeySelection, ProtocolError, PvkTable};
use crate::channel::{harvested_dc, RectifierModel};
use crate::waveform::{build_frame, Frame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeMode {
    Harvesting,
    Backscattering,
}

/// Running energy account of a node.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    /// Harvested energy actually stored.
    pub harvested_j: f64,
    /// Harvested energy lost because storage was full.
    pub spilled_j: f64,
    /// Energy spent on emissions.
    pub spent_j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeParams {
    pub storage_capacity_j: f64,
    pub wake_threshold_j: f64,
    pub tx_cost_j_per_bit: f64,
    pub bit_rate_hz: f64,
    pub selection: KeySelection,
}

impl Default for NodeParams {
    fn default() -> Self {
        Self {
            storage_capacity_j: 100e-6,
            wake_threshold_j: 10e-6,
            tx_cost_j_per_bit: 1e-9,
            bit_rate_hz: 20e3,
            selection: KeySelection::Sequential,
        }
    }
}

/// A key the node has just put on air.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub key_index: usize,
    pub frame: Frame<f64>,
    pub cost_j: f64,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub mode: NodeMode,
    pub stored_energy_j: f64,
    pub storage_capacity_j: f64,
    pub wake_threshold_j: f64,
    pub tx_cost_j_per_bit: f64,
    pub bit_rate_hz: f64,
    pub selection: KeySelection,
    pub table: PvkTable,
    pub ledger: EnergyLedger,
    selection_rng: ChaCha8Rng,
}

impl NodeState {
    pub fn new(params: NodeParams, table: PvkTable, selection_seed: u64) -> Result<Self, ProtocolError> {
        let bad = |field: &'static str, reason: &str| ProtocolError::InvalidParameter { field, reason: reason.into() };
        if !(params.storage_capacity_j > 0.0) || !params.storage_capacity_j.is_finite() {
            return Err(bad("storage_capacity_j", "must be finite and > 0"));
        }
        if !(params.wake_threshold_j > 0.0) || params.wake_threshold_j > params.storage_capacity_j {
            return Err(bad("wake_threshold_j", "must be in (0, storage_capacity_j]"));
        }
        if !(params.tx_cost_j_per_bit >= 0.0) || !params.tx_cost_j_per_bit.is_finite() {
            return Err(bad("tx_cost_j_per_bit", "must be finite and >= 0"));
        }
        build_frame(&[0], params.bit_rate_hz)?;
        Ok(Self {
            mode: NodeMode::Harvesting,
            stored_energy_j: 0.0,
            storage_capacity_j: params.storage_capacity_j,
            wake_threshold_j: params.wake_threshold_j,
            tx_cost_j_per_bit: params.tx_cost_j_per_bit,
            bit_rate_hz: params.bit_rate_hz,
            selection: params.selection,
            table,
            ledger: EnergyLedger::default(),
            selection_rng: ChaCha8Rng::seed_from_u64(selection_seed),
        })
    }

    /// Store harvested energy, clamping at capacity.
    pub fn store(&mut self, energy_j: f64) {
        let accepted = energy_j.min(self.storage_capacity_j - self.stored_energy_j).max(0.0);
        self.stored_energy_j += accepted;
        self.ledger.harvested_j += accepted;
        self.ledger.spilled_j += energy_j - accepted;
    }

    /// Whole harvesting steps needed before the wake threshold is reached,
    /// counting the step that crosses it. `None` if the node never wakes.
    pub fn steps_until_wake(&self, p_dc_watts: f64, dt_s: f64) -> Option<u64> {
        let deficit = self.wake_threshold_j - self.stored_energy_j;
        if deficit <= 0.0 {
            return Some(1);
        }
        let per_step = p_dc_watts * dt_s;
        if !(per_step > 0.0) {
            return None;
        }
        Some((deficit / per_step).ceil().max(1.0) as u64)
    }

    fn emit(&mut self) -> Result<Emission, ProtocolError> {
        let (key_index, code) = {
            let (i, c) = self.table.select(self.selection, &mut self.selection_rng)?;
            (i, c.to_vec())
        };
        let frame = build_frame(&code, self.bit_rate_hz)?;
        let cost_j = self.tx_cost_j_per_bit * frame.bit_len() as f64;
        if cost_j >= self.stored_energy_j {
            return Err(ProtocolError::InsufficientEnergy { needed_j: cost_j, stored_j: self.stored_energy_j });
        }
        self.stored_energy_j -= cost_j;
        self.ledger.spent_j += cost_j;
        self.table.mark_used(key_index);
        self.mode = NodeMode::Backscattering;
        Ok(Emission { key_index, frame, cost_j })
    }
}

/// Advance the node by one step.
///
/// In harvesting mode the step adds `harvested_dc(p_in) · dt` and, once the
/// wake threshold is reached, emits the next PVK and debits its cost. In
/// backscattering mode the step is the frame airtime: nothing is harvested
/// and the node returns to harvesting.
pub fn node_step(
    state: &mut NodeState,
    dt_s: f64,
    p_in_dbm: f64,
    rect: &RectifierModel<f64>,
) -> Result<Option<Emission>, ProtocolError> {
    if !(dt_s > 0.0) || !dt_s.is_finite() {
        return Err(ProtocolError::InvalidParameter { field: "dt_s", reason: "must be finite and > 0".into() });
    }
    match state.mode {
        NodeMode::Backscattering => {
            state.mode = NodeMode::Harvesting;
            Ok(None)
        }
        NodeMode::Harvesting => {
            let p_dc = harvested_dc(p_in_dbm, rect)?.p_dc_watts;
            state.store(p_dc * dt_s);
            if state.stored_energy_j >= state.wake_threshold_j {
                state.emit().map(Some)
            } else {
                Ok(None)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::generate_table;

    fn flat_rect(eta: f64) -> RectifierModel<f64> {
        RectifierModel::new(-20.0, -3.0, vec![(-30.0, eta), (30.0, eta)], 1e4).unwrap()
    }

    fn node() -> NodeState {
        NodeState::new(NodeParams::default(), generate_table(3, 2, 5).unwrap(), 0).unwrap()
    }

    #[test]
    fn zero_efficiency_never_wakes() {
        let mut n = node();
        for _ in 0..1000 {
            assert!(node_step(&mut n, 1e-3, -10.0, &flat_rect(0.0)).unwrap().is_none());
        }
        assert_eq!(n.stored_energy_j, 0.0);
        assert_eq!(n.steps_until_wake(0.0, 1e-4), None);
    }

    #[test]
    fn wakes_after_half_a_second_at_20_microwatts() {
        // -10 dBm at 20 % is 20 µW; 10 µJ / 20 µW = 0.5 s.
        let mut n = node();
        let rect = flat_rect(0.2);
        let dt = 100e-6;
        let mut steps = 0u64;
        let emission = loop {
            steps += 1;
            if let Some(e) = node_step(&mut n, dt, -10.0, &rect).unwrap() {
                break e;
            }
        };
        let t = steps as f64 * dt;
        assert!((t - 0.5).abs() <= dt + 1e-12, "{t}");
        assert_eq!(emission.frame.bit_len(), 40);
        assert_eq!(n.mode, NodeMode::Backscattering);
        assert_eq!(n.steps_until_wake(20e-6, dt).map(|_| ()), Some(()));
    }

    #[test]
    fn emission_debits_forty_nanojoules() {
        let mut n = node();
        n.store(10e-6);
        let before = n.stored_energy_j;
        let e = node_step(&mut n, 1e-4, -60.0, &flat_rect(0.0)).unwrap().unwrap();
        assert_eq!(e.cost_j, 40e-9);
        assert!((before - n.stored_energy_j - 40e-9).abs() < 1e-21);
        assert_eq!(e.key_index, 0);
        assert!(n.table.is_used(0));
        assert!(node_step(&mut n, 2e-3, -60.0, &flat_rect(0.0)).unwrap().is_none());
        assert_eq!(n.mode, NodeMode::Harvesting);
    }

    #[test]
    fn storage_clamps_at_capacity() {
        let mut n = node();
        n.wake_threshold_j = n.storage_capacity_j;
        n.store(150e-6);
        assert_eq!(n.stored_energy_j, 100e-6);
        assert!((n.ledger.spilled_j - 50e-6).abs() < 1e-18);
    }

    #[test]
    fn exhausted_table_errors_at_wake() {
        let mut n = NodeState::new(NodeParams::default(), generate_table(1, 2, 5).unwrap(), 0).unwrap();
        n.store(10e-6);
        node_step(&mut n, 1e-4, -60.0, &flat_rect(0.0)).unwrap().unwrap();
        node_step(&mut n, 1e-4, -60.0, &flat_rect(0.0)).unwrap();
        n.store(10e-6);
        assert!(matches!(node_step(&mut n, 1e-4, -60.0, &flat_rect(0.0)), Err(ProtocolError::TableExhausted)));
    }

    #[test]
    fn parameter_validation() {
        let t = || generate_table(1, 1, 0).unwrap();
        let p = NodeParams { wake_threshold_j: 200e-6, ..NodeParams::default() };
        assert!(NodeState::new(p, t(), 0).is_err());
        let p = NodeParams { bit_rate_hz: 200e3, ..NodeParams::default() };
        assert!(NodeState::new(p, t(), 0).is_err());
        assert!(node_step(&mut node(), 0.0, 0.0, &flat_rect(0.1)).is_err());
    }
}
