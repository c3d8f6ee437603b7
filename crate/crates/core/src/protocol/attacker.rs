use super::ProtocolError;
use crate::waveform::EnvelopeTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttackerKind {
    #[default]
    None,
    /// Records the post-channel envelope and re-presents it to the monitor.
    Replay,
}

#[derive(Debug, Clone, Default)]
pub struct Attacker {
    pub kind: AttackerKind,
    pub recorded_trace: Option<EnvelopeTrace<f64>>,
}

impl Attacker {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn replay() -> Self {
        Self { kind: AttackerKind::Replay, recorded_trace: None }
    }

    /// Listen to a transmission. Only a replay attacker keeps it.
    pub fn eavesdrop(&mut self, trace: &EnvelopeTrace<f64>) {
        if self.kind == AttackerKind::Replay {
            self.recorded_trace = Some(trace.clone());
        }
    }

    pub fn replay_trace(&self) -> Result<&EnvelopeTrace<f64>, ProtocolError> {
        match self.kind {
            AttackerKind::Replay => self.recorded_trace.as_ref().ok_or(ProtocolError::NothingRecorded),
            AttackerKind::None => Err(ProtocolError::NothingRecorded),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_needs_a_recording() {
        let mut a = Attacker::replay();
        assert!(matches!(a.replay_trace(), Err(ProtocolError::NothingRecorded)));
        let t = EnvelopeTrace::new(16e3, vec![-40.0, -50.0], "x").unwrap();
        a.eavesdrop(&t);
        assert_eq!(a.replay_trace().unwrap(), &t);
    }

    #[test]
    fn passive_observer_keeps_nothing() {
        let mut a = Attacker::none();
        a.eavesdrop(&EnvelopeTrace::new(16e3, vec![-40.0], "x").unwrap());
        assert!(a.recorded_trace.is_none());
    }
}
