//! RF power bookkeeping for the energy link and its backscattered uplink.
//!
//! All interface quantities are logarithmic (dBm, dBi, dB). Conversion to
//! linear watts happens only where powers have to be summed or where the
//! harvested DC power is needed.

mod scenario;

pub use scenario::{LinkPath, LinkScenario};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Typical antenna gain range; values outside it only raise a warning.
pub const TYPICAL_GAIN_DBI: (f64, f64) = (-10.0, 30.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("distance {distance_m} m is inside one wavelength ({wavelength_m} m); Friis model requires far field")]
    NearField { distance_m: f64, wavelength_m: f64 },
    #[error("cannot combine an empty list of powers")]
    EmptyInput,
    #[error("rectifier efficiency curve is empty")]
    EmptyCurve,
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ChannelError {
    ChannelError::InvalidParameter { field, reason: reason.into() }
}

/// dBm to watts.
#[inline]
pub fn dbm_to_watts<S: Scalar>(dbm: S) -> S {
    S::lit(10.0).powf((dbm - S::lit(30.0)) / S::lit(10.0))
}

/// Watts to dBm. Zero maps to negative infinity.
#[inline]
pub fn watts_to_dbm<S: Scalar>(watts: S) -> S {
    S::lit(10.0) * watts.log10() + S::lit(30.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaSpec<S> {
    pub gain_dbi: S,
}

impl<S: Scalar> AntennaSpec<S> {
    pub fn new(gain_dbi: S) -> Result<Self, ChannelError> {
        if !gain_dbi.is_finite() {
            return Err(invalid("gain_dbi", "must be finite"));
        }
        let spec = Self { gain_dbi };
        if let Some(w) = spec.range_warning() {
            log::warn!("{w}");
        }
        Ok(spec)
    }

    /// Warning text when the gain falls outside [`TYPICAL_GAIN_DBI`].
    pub fn range_warning(&self) -> Option<String> {
        let g = self.gain_dbi.to_f64_lossy();
        let (lo, hi) = TYPICAL_GAIN_DBI;
        (g < lo || g > hi).then(|| format!("antenna gain {g} dBi outside typical range [{lo}, {hi}]"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry<S> {
    pub distance_m: S,
    pub frequency_hz: S,
}

impl<S: Scalar> LinkGeometry<S> {
    pub fn new(distance_m: S, frequency_hz: S) -> Result<Self, ChannelError> {
        if !(distance_m > S::zero()) || !distance_m.is_finite() {
            return Err(invalid("distance_m", "must be finite and > 0"));
        }
        if !(frequency_hz > S::zero()) || !frequency_hz.is_finite() {
            return Err(invalid("frequency_hz", "must be finite and > 0"));
        }
        Ok(Self { distance_m, frequency_hz })
    }

    pub fn wavelength_m(&self) -> S {
        S::lit(SPEED_OF_LIGHT) / self.frequency_hz
    }

    pub fn check_far_field(&self) -> Result<(), ChannelError> {
        let wavelength = self.wavelength_m();
        if self.distance_m < wavelength {
            return Err(ChannelError::NearField {
                distance_m: self.distance_m.to_f64_lossy(),
                wavelength_m: wavelength.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// Free-space path loss `20·log10(4πd/λ)` in dB.
    pub fn free_space_loss_db(&self) -> S {
        let ratio = S::lit(4.0) * S::PI() * self.distance_m / self.wavelength_m();
        S::lit(20.0) * ratio.log10()
    }
}

/// Behavioral model of the switchable-match rectifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectifierModel<S> {
    /// |S11| in dB with the command line low (matched, harvesting).
    pub gamma_low_db: S,
    /// |S11| in dB with the command line high (mismatched, reflecting).
    pub gamma_high_db: S,
    /// `(p_in_dbm, efficiency)` points, strictly increasing in input power.
    pub efficiency_curve: Vec<(S, S)>,
    pub load_ohms: S,
}

impl<S: Scalar> RectifierModel<S> {
    pub const DEFAULT_GAMMA_LOW_DB: f64 = -20.0;
    pub const DEFAULT_GAMMA_HIGH_DB: f64 = -3.0;
    pub const DEFAULT_LOAD_OHMS: f64 = 10_000.0;
    pub const DEFAULT_EFFICIENCY_CURVE: [(f64, f64); 5] =
        [(-20.0, 0.05), (-10.0, 0.20), (0.0, 0.40), (10.0, 0.50), (20.0, 0.55)];

    /// Validates the model. `gamma_high_db == gamma_low_db` is accepted and
    /// means modulation is disabled.
    pub fn new(
        gamma_low_db: S,
        gamma_high_db: S,
        efficiency_curve: Vec<(S, S)>,
        load_ohms: S,
    ) -> Result<Self, ChannelError> {
        let model = Self { gamma_low_db, gamma_high_db, efficiency_curve, load_ohms };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !self.gamma_low_db.is_finite() || self.gamma_low_db > S::zero() {
            return Err(invalid("gamma_low_db", "must be finite and <= 0 dB"));
        }
        if !self.gamma_high_db.is_finite() || self.gamma_high_db > S::zero() {
            return Err(invalid("gamma_high_db", "must be finite and <= 0 dB"));
        }
        if self.gamma_high_db < self.gamma_low_db {
            return Err(invalid(
                "gamma_high_db",
                "mismatched state must reflect at least as much as the matched state",
            ));
        }
        if !(self.load_ohms > S::zero()) || !self.load_ohms.is_finite() {
            return Err(invalid("load_ohms", "must be finite and > 0"));
        }
        for (i, &(p, eta)) in self.efficiency_curve.iter().enumerate() {
            if !p.is_finite() {
                return Err(invalid("efficiency_curve", format!("point {i}: input power not finite")));
            }
            if !(eta >= S::zero() && eta <= S::one()) {
                return Err(invalid("efficiency_curve", format!("point {i}: efficiency outside [0, 1]")));
            }
            if i > 0 && !(p > self.efficiency_curve[i - 1].0) {
                return Err(invalid("efficiency_curve", format!("point {i}: input power not strictly increasing")));
            }
        }
        Ok(())
    }

    /// Reflection coefficient for the given command state.
    #[inline]
    pub fn gamma_db(&self, cmd_high: bool) -> S {
        if cmd_high {
            self.gamma_high_db
        } else {
            self.gamma_low_db
        }
    }

    /// Piecewise-linear efficiency in (dBm, η), clamped at the curve ends.
    pub fn efficiency_at(&self, p_in_dbm: S) -> Result<S, ChannelError> {
        let curve = &self.efficiency_curve;
        let (first, last) = match (curve.first(), curve.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return Err(ChannelError::EmptyCurve),
        };
        if p_in_dbm <= first.0 {
            return Ok(first.1);
        }
        if p_in_dbm >= last.0 {
            return Ok(last.1);
        }
        let upper = curve.partition_point(|&(p, _)| p <= p_in_dbm);
        let (p0, e0) = curve[upper - 1];
        let (p1, e1) = curve[upper];
        let frac = (p_in_dbm - p0) / (p1 - p0);
        Ok(e0 + (e1 - e0) * frac)
    }
}

impl<S: Scalar> Default for RectifierModel<S> {
    fn default() -> Self {
        Self {
            gamma_low_db: S::lit(Self::DEFAULT_GAMMA_LOW_DB),
            gamma_high_db: S::lit(Self::DEFAULT_GAMMA_HIGH_DB),
            efficiency_curve: Self::DEFAULT_EFFICIENCY_CURVE
                .iter()
                .map(|&(p, e)| (S::lit(p), S::lit(e)))
                .collect(),
            load_ohms: S::lit(Self::DEFAULT_LOAD_OHMS),
        }
    }
}

/// Power that reaches the monitor without going through the rectifier's reflection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeakageModel<S> {
    /// Wired bench: port 1 to port 3 leakage of a circulator.
    Circulator { isolation_db: S },
    /// Antenna-to-antenna coupling calibrated at one TX power.
    Coupling { floor_dbm_at_ref: S, ref_tx_power_dbm: S },
}

impl<S: Scalar> LeakageModel<S> {
    pub fn circulator(isolation_db: S) -> Result<Self, ChannelError> {
        if !(isolation_db >= S::zero()) || !isolation_db.is_finite() {
            return Err(invalid("circulator_isolation_db", "must be finite and >= 0"));
        }
        Ok(Self::Circulator { isolation_db })
    }

    pub fn coupling(floor_dbm_at_ref: S, ref_tx_power_dbm: S) -> Result<Self, ChannelError> {
        if !floor_dbm_at_ref.is_finite() || !ref_tx_power_dbm.is_finite() {
            return Err(invalid("coupling_floor_dbm_at_ref", "calibration point must be finite"));
        }
        Ok(Self::Coupling { floor_dbm_at_ref, ref_tx_power_dbm })
    }
}

/// Additive measurement noise at the monitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec<S> {
    /// Mean noise power in the measurement bandwidth; `None` disables noise.
    pub noise_power_dbm: Option<S>,
    pub rng_seed: u64,
}

impl<S: Scalar> NoiseSpec<S> {
    pub fn noiseless() -> Self {
        Self { noise_power_dbm: None, rng_seed: 0 }
    }

    pub fn new(noise_power_dbm: S, rng_seed: u64) -> Self {
        Self { noise_power_dbm: Some(noise_power_dbm), rng_seed }
    }

    /// Mean noise power in watts (zero when disabled).
    pub fn mean_watts(&self) -> S {
        self.noise_power_dbm.map_or(S::zero(), dbm_to_watts)
    }
}

/// One-hop free-space reception.
pub fn friis_received_power<S: Scalar>(
    p_tx_dbm: S,
    tx: &AntennaSpec<S>,
    rx: &AntennaSpec<S>,
    geom: &LinkGeometry<S>,
) -> Result<S, ChannelError> {
    geom.check_far_field()?;
    Ok(p_tx_dbm + tx.gain_dbi + rx.gain_dbi - geom.free_space_loss_db())
}

/// Two-hop budget: source to node, reflection in the given command state,
/// node back to the monitor antenna.
#[allow(clippy::too_many_arguments)]
pub fn backscatter_received_power<S: Scalar>(
    p_tx_dbm: S,
    src_tx: &AntennaSpec<S>,
    node: &AntennaSpec<S>,
    mon_rx: &AntennaSpec<S>,
    dl: &LinkGeometry<S>,
    ul: &LinkGeometry<S>,
    rect: &RectifierModel<S>,
    cmd_high: bool,
) -> Result<S, ChannelError> {
    let at_node = friis_received_power(p_tx_dbm, src_tx, node, dl)?;
    let reflected = at_node + rect.gamma_db(cmd_high);
    friis_received_power(reflected, node, mon_rx, ul)
}

pub fn leakage_power<S: Scalar>(p_tx_dbm: S, model: &LeakageModel<S>) -> S {
    match *model {
        LeakageModel::Circulator { isolation_db } => p_tx_dbm - isolation_db,
        LeakageModel::Coupling { floor_dbm_at_ref, ref_tx_power_dbm } => {
            floor_dbm_at_ref + (p_tx_dbm - ref_tx_power_dbm)
        }
    }
}

/// Power sum of uncorrelated contributions.
pub fn combine_noncoherent<S: Scalar>(powers_dbm: &[S]) -> Result<S, ChannelError> {
    if powers_dbm.is_empty() {
        return Err(ChannelError::EmptyInput);
    }
    // Summing in ascending order makes the result independent of input order.
    let mut linear: Vec<S> = powers_dbm.iter().map(|&p| dbm_to_watts(p)).collect();
    linear.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let total = linear.into_iter().fold(S::zero(), |acc, w| acc + w);
    Ok(watts_to_dbm(total))
}

#[inline]
pub fn dynamic_range_db<S: Scalar>(p_high_state_dbm: S, p_low_state_dbm: S) -> S {
    p_high_state_dbm - p_low_state_dbm
}

/// Harvested DC power and load voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarvestedDc<S> {
    pub p_dc_watts: S,
    pub v_out_volts: S,
}

pub fn harvested_dc<S: Scalar>(p_in_dbm: S, rect: &RectifierModel<S>) -> Result<HarvestedDc<S>, ChannelError> {
    let eta = rect.efficiency_at(p_in_dbm)?.max(S::zero()).min(S::one());
    let p_dc_watts = eta * dbm_to_watts(p_in_dbm);
    let v_out_volts = (p_dc_watts * rect.load_ohms).sqrt();
    Ok(HarvestedDc { p_dc_watts, v_out_volts })
}
