//! Frame-scale energy management: how much harvested energy to store and how
//! much grid energy to buy, decided once per frame in closed form.
//!
//! The frame objective weighs the purchase cost against the battery headroom
//! `𝓔 = capacity − level`:
//!
//! ```text
//! D(g, ϑ) = (V·T·β·η − 𝓔)·g + (V·T·β·κ − 𝓔)·ϑ
//! ```
//!
//! which is linear in both decisions over the feasible box
//! `0 ≤ ϑ ≤ Φ`, `0 ≤ g ≤ g_max`, `g + ϑ ≤ 𝓔`. With free (or cheap)
//! harvested energy the minimizer is: store as much harvested energy as fits,
//! then top up from the grid only when the price signal `Ψ = V·T·β·η − 𝓔`
//! is negative. The policy is myopic per frame and needs no price forecast.

use alloc::format;

use crate::config::SimConfig;
use crate::error::{Error, Result};

/// Constants of the frame-level energy subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    /// Battery capacity, J.
    pub battery_capacity: f64,
    /// Per-frame grid purchase cap, J.
    pub purchase_cap: f64,
    /// Drift-vs-utility weight.
    pub utility_weight: f64,
    /// Slots per frame.
    pub slots_per_frame: u64,
    /// Cost weight inside the network objective.
    pub cost_weight: f64,
}

impl EnergyParams {
    #[must_use]
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            battery_capacity: cfg.battery_capacity,
            purchase_cap: cfg.purchase_cap,
            utility_weight: cfg.utility_weight,
            slots_per_frame: cfg.slots_per_frame,
            cost_weight: cfg.cost_weight,
        }
    }

    /// `V·T·β`: converts a price (RMB/J) into drift units.
    #[must_use]
    pub fn price_gain(&self) -> f64 {
        self.utility_weight * self.slots_per_frame as f64 * self.cost_weight
    }
}

/// One frame's energy decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDecision {
    /// Harvested energy stored this frame, J.
    pub harvested: f64,
    /// Grid energy purchased this frame, J.
    pub purchased: f64,
    /// Purchase signal `Ψ = V·T·β·η − 𝓔`; buying happens iff `Ψ < 0`.
    pub psi: f64,
}

/// Closed-form frame decision given the battery level, the harvesting cap
/// `Φ`, and the grid price `η` (RMB/J).
///
/// `harvested = min(Φ, 𝓔)`; `purchased = min(𝓔 − harvested, g_max)` if
/// `Ψ < 0`, else 0. Both caps and the battery-capacity coupling hold by
/// construction, which the debug assertion double-checks.
pub fn schedule_energy(
    battery_level: f64,
    harvest_cap: f64,
    grid_price: f64,
    params: &EnergyParams,
) -> Result<EnergyDecision> {
    if battery_level > params.battery_capacity + 1e-9 {
        return Err(Error::InvalidInput(format!(
            "battery level {battery_level} exceeds capacity {}",
            params.battery_capacity
        )));
    }
    if battery_level < 0.0 || harvest_cap < 0.0 || grid_price < 0.0 {
        return Err(Error::InvalidInput(format!(
            "energy inputs must be nonnegative, got E={battery_level}, cap={harvest_cap}, price={grid_price}"
        )));
    }
    let headroom = (params.battery_capacity - battery_level).max(0.0);
    let harvested = harvest_cap.min(headroom);
    let psi = params.price_gain() * grid_price - headroom;
    let purchased = if psi < 0.0 {
        (headroom - harvested).min(params.purchase_cap)
    } else {
        0.0
    };
    debug_assert!(battery_level + purchased + harvested <= params.battery_capacity + 1e-9);
    Ok(EnergyDecision {
        harvested,
        purchased,
        psi,
    })
}

/// Value of the frame energy objective at a candidate decision:
/// `(V·T·β·η − 𝓔)·g + (V·T·β·κ − 𝓔)·ϑ` with `𝓔` the battery headroom.
#[must_use]
pub fn energy_objective(
    purchased: f64,
    harvested: f64,
    battery_level: f64,
    grid_price: f64,
    harvest_price: f64,
    params: &EnergyParams,
) -> f64 {
    let headroom = params.battery_capacity - battery_level;
    let gain = params.price_gain();
    gain * grid_price * purchased - headroom * purchased + gain * harvest_price * harvested
        - headroom * harvested
}
