//! Per-slot and per-frame observables plus the aggregate statistics the
//! experiment harness reports (peak-to-average ratios, empirical CDFs, time
//! averages, cumulative cost).

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Experienced quality for one device: `χ·log₂(1+r)` with `r` in Mbit/s.
pub fn qoe(rate_mbps: f64, priority: f64) -> Result<f64> {
    if rate_mbps < 0.0 {
        return Err(Error::InvalidInput(format!(
            "rate must be nonnegative, got {rate_mbps}"
        )));
    }
    Ok(priority * libm::log2(1.0 + rate_mbps))
}

/// Downlink rate for one device across its assigned channels:
/// `Σ_k x_k·W_k·log₂(1 + p_k·h_k/σ²)`, Mbit/s with `W` in MHz.
#[must_use]
pub fn shannon_rate(
    assigned: &[bool],
    powers: &[f64],
    gains: &[f64],
    bandwidth_mhz: &[f64],
    noise: f64,
) -> f64 {
    assigned
        .iter()
        .zip(powers)
        .zip(gains)
        .zip(bandwidth_mhz)
        .filter(|(((x, _), _), _)| **x)
        .map(|(((_, p), h), w)| w * libm::log2(1.0 + p * h / noise))
        .sum()
}

/// Peak-to-average ratio of a nonnegative series with positive mean.
pub fn par(series: &[f64]) -> Result<f64> {
    let (mean, _) = time_avg_std(series)?;
    if mean <= 0.0 {
        return Err(Error::InvalidInput(
            "peak-to-average ratio needs a positive mean".into(),
        ));
    }
    let peak = series.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    Ok(peak / mean)
}

/// Empirical CDF of `series` evaluated at each grid point (fraction ≤ g).
pub fn cdf(series: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let n = series.len() as f64;
    Ok(grid
        .iter()
        .map(|g| series.iter().filter(|x| *x <= g).count() as f64 / n)
        .collect())
}

/// Mean and population standard deviation.
pub fn time_avg_std(series: &[f64]) -> Result<(f64, f64)> {
    if series.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok((mean, libm::sqrt(var)))
}

/// Total energy cost over a run: `Σ_τ (η·g + κ·ϑ)`, RMB.
#[must_use]
pub fn cumulative_cost(slots: &[SlotRecord]) -> f64 {
    slots.iter().map(|s| s.cost).sum()
}

/// Everything observable about one data slot. State fields hold the values
/// the controller saw (before the end-of-slot queue updates).
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub frame: u64,
    pub frame_start: bool,
    /// Data backlogs `Q_n(τ)`, Mbit.
    pub queue_backlogs: Vec<f64>,
    /// Battery level `E(τ)`, J.
    pub battery: f64,
    /// Admitted rates `r_n(τ)`, Mbit/s.
    pub admitted: Vec<f64>,
    /// Realized service rates `v_n(τ)`, Mbit/s.
    pub served: Vec<f64>,
    /// Per-device experienced quality `U_n(τ)`.
    pub qoe: Vec<f64>,
    /// Grid energy bought this slot, J (the frame's inflow rate, curtailed
    /// to the battery headroom).
    pub purchased: f64,
    /// Harvested energy stored this slot, J.
    pub harvested: f64,
    /// Grid price, RMB/J.
    pub grid_price: f64,
    /// Harvested-energy price, RMB/J.
    pub harvest_price: f64,
    /// Energy consumed by transmission, J.
    pub consumed: f64,
    /// Network objective `f(τ) = ΣU − β(η·g + κ·ϑ)`.
    pub objective: f64,
    /// Energy cost this slot `η·g + κ·ϑ`, RMB.
    pub cost: f64,
    /// Whether each device met its minimum-rate target.
    pub rate_target_met: Vec<bool>,
    pub solver_iterations: u64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub solver_converged: bool,
    pub solver_bypassed: bool,
    pub matching_rounds: u64,
    /// True when powers were scaled down to respect the battery level.
    pub power_scaled: bool,
}

/// Frame-level record: the energy decision and the drift-bound audit.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame: u64,
    pub start_slot: u64,
    /// Grid price this frame, RMB/J.
    pub grid_price: f64,
    /// Harvesting cap this frame, J.
    pub harvest_cap: f64,
    /// Battery level at the frame start, J.
    pub battery_start: f64,
    /// Battery headroom at the frame start, J.
    pub headroom: f64,
    /// Purchase signal Ψ.
    pub psi: f64,
    /// Decided per-slot grid purchase rate, J.
    pub purchased: f64,
    /// Decided per-slot harvest rate, J.
    pub harvested: f64,
    /// Grid energy actually stored over the frame, J.
    pub purchased_total: f64,
    /// Harvested energy actually stored over the frame, J.
    pub harvested_total: f64,
    /// Frame energy objective at the decision.
    pub energy_objective: f64,
    /// Σ of the network objective over the frame's slots.
    pub objective_sum: f64,
    /// Realized drift-minus-utility for the frame.
    pub drift_lhs: f64,
    /// Bound on the drift-minus-utility from the frame's decisions.
    pub drift_rhs: f64,
    pub drift_bound_ok: bool,
}
