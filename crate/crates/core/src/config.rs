//! Scenario configuration: every parameter a run depends on, including the
//! stochastic-model choices, solver knobs, and the master seed.
//!
//! [`SimConfig::default`] is the reference desk scenario (5 devices, 12
//! channels, 200 frames of 5 one-second slots, 20 Mbit/s admission cap,
//! 5 J battery). The CLI ships the same values as the `tableII.cfg` preset.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Electricity-price process for grid energy, sampled per frame.
/// Prices are configured in RMB/kWh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriceModel {
    /// `min + (max−min)·(1+sin)/2` over `period_frames`, with a seeded phase.
    Sinusoid,
    /// Off-peak `min` for half the period, peak `max` for the other half.
    TwoTier,
    /// Always `min`.
    Constant,
}

impl PriceModel {
    #[must_use]
    pub fn name(&self) -> &'static str {
        match self {
            PriceModel::Sinusoid => "sinusoid",
            PriceModel::TwoTier => "two_tier",
            PriceModel::Constant => "constant",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceConfig {
    pub model: PriceModel,
    /// Minimum grid price, RMB/kWh.
    pub min_rmb_per_kwh: f64,
    /// Maximum grid price, RMB/kWh.
    pub max_rmb_per_kwh: f64,
    /// Price-cycle length in frames (sinusoid and two-tier models).
    pub period_frames: u64,
    /// Price paid for harvested energy, RMB/kWh (0 = free renewables).
    pub harvest_rmb_per_kwh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// ADMM penalty ρ (rates are in Mbit/s, so unit scale works well).
    pub penalty: f64,
    /// Primal feasibility tolerance, Mbit/s.
    pub tol_primal: f64,
    /// Dual feasibility tolerance, Mbit/s.
    pub tol_dual: f64,
    /// Iteration cap; exceeding it returns the best iterate, flagged.
    pub max_iterations: usize,
    /// Size of the first ADMM block (0 = auto, ⌊N/2⌋).
    pub first_block: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            penalty: 1.0,
            tol_primal: 1e-4,
            tol_dual: 1e-4,
            max_iterations: 500,
            first_block: 0,
        }
    }
}

/// Full scenario description. See module docs for the unit conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Number of devices `N`.
    pub devices: usize,
    /// Number of channels `K`.
    pub channels: usize,
    /// Number of energy frames `M`.
    pub frames: u64,
    /// Data slots per energy frame `T`.
    pub slots_per_frame: u64,
    /// Slot duration, seconds.
    pub slot_duration: f64,
    /// Master RNG seed; all stochastic processes derive from it.
    pub seed: u64,

    /// Drift-vs-utility weight (larger favors utility over queue stability).
    pub utility_weight: f64,
    /// Weight of energy cost inside the network objective.
    pub cost_weight: f64,
    /// Maximum channels one device may hold.
    pub quota: usize,

    /// Per-device service priorities, one per device, all positive.
    pub priorities: Vec<f64>,
    /// Per-device instantaneous-delay target, seconds.
    pub delay_target: f64,
    /// Initial data-queue backlog, Mbit.
    pub queue_init: f64,
    /// Buffer bound per data queue, Mbit; overflow is dropped and counted.
    pub storage_cap: f64,

    /// Network-wide admission cap, Mbit/s.
    pub sum_rate_cap: f64,

    /// Battery capacity, J.
    pub battery_capacity: f64,
    /// Initial battery level, J.
    pub battery_init: f64,
    /// Per-frame grid purchase cap, J.
    pub purchase_cap: f64,
    /// Upper end of the per-frame harvesting cap (drawn uniform in [0, this]), J.
    pub harvest_cap_max: f64,

    /// Channel bandwidth, MHz (uniform across channels).
    pub bandwidth_mhz: f64,
    /// Noise power, W.
    pub noise_power: f64,
    /// Per-pair transmit power cap, W.
    pub power_cap: f64,
    /// Large-scale (path-loss) gain; small-scale fading multiplies it.
    pub large_scale_gain: f64,

    pub price: PriceConfig,
    pub solver: SolverConfig,

    /// Matching price increment as a fraction of the median pair utility.
    pub price_step_fraction: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            devices: 5,
            channels: 12,
            frames: 200,
            slots_per_frame: 5,
            slot_duration: 1.0,
            seed: 1,
            utility_weight: 100.0,
            cost_weight: 5000.0,
            quota: 1,
            priorities: vec![0.1, 0.15, 0.2, 0.25, 0.3],
            delay_target: 1e-5,
            queue_init: 3.0,
            storage_cap: 4e6, // 500 GB expressed in Mbit
            sum_rate_cap: 20.0,
            battery_capacity: 5.0,
            battery_init: 2.0,
            purchase_cap: 2.5,
            harvest_cap_max: 2.5,
            bandwidth_mhz: 1.0,
            noise_power: 1e-13,
            power_cap: 2.0,
            large_scale_gain: 1e-10,
            price: PriceConfig {
                model: PriceModel::Sinusoid,
                min_rmb_per_kwh: 1.8,
                max_rmb_per_kwh: 9.0,
                period_frames: 40,
                harvest_rmb_per_kwh: 0.0,
            },
            solver: SolverConfig::default(),
            price_step_fraction: 0.01,
        }
    }
}

impl SimConfig {
    /// Total number of data slots, `M·T`.
    #[must_use]
    pub fn horizon(&self) -> u64 {
        self.frames * self.slots_per_frame
    }

    /// Effective first ADMM block size (resolves the auto setting).
    #[must_use]
    pub fn first_block(&self) -> usize {
        if self.solver.first_block == 0 {
            (self.devices / 2).max(1)
        } else {
            self.solver.first_block
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_utility_weight(mut self, v: f64) -> Self {
        self.utility_weight = v;
        self
    }

    /// Validates every field and returns non-fatal warnings (e.g. a harvest
    /// price that may exceed the grid price, for which the purchase rule was
    /// not designed).
    pub fn validate(&self) -> Result<Vec<String>> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
            Ok(())
        }
        fn nonnegative(name: &str, v: f64) -> Result<()> {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
            Ok(())
        }

        if self.devices == 0 {
            return Err(Error::Config("devices must be at least 1".into()));
        }
        if self.channels == 0 {
            return Err(Error::Config("channels must be at least 1".into()));
        }
        if self.frames == 0 || self.slots_per_frame == 0 {
            return Err(Error::Config(
                "frames and slots_per_frame must be at least 1".into(),
            ));
        }
        if self.priorities.len() != self.devices {
            return Err(Error::Config(format!(
                "expected {} priorities, got {}",
                self.devices,
                self.priorities.len()
            )));
        }
        for (n, chi) in self.priorities.iter().enumerate() {
            if !chi.is_finite() || *chi <= 0.0 {
                return Err(Error::Config(format!(
                    "priority of device {n} must be positive, got {chi}"
                )));
            }
        }
        positive("slot_duration", self.slot_duration)?;
        nonnegative("utility_weight", self.utility_weight)?;
        nonnegative("cost_weight", self.cost_weight)?;
        if self.quota == 0 {
            return Err(Error::Config("quota must be at least 1".into()));
        }
        positive("delay_target", self.delay_target)?;
        nonnegative("queue_init", self.queue_init)?;
        positive("storage_cap", self.storage_cap)?;
        if self.queue_init > self.storage_cap {
            return Err(Error::Config(
                "queue_init exceeds the storage cap".into(),
            ));
        }
        positive("sum_rate_cap", self.sum_rate_cap)?;
        positive("battery_capacity", self.battery_capacity)?;
        nonnegative("battery_init", self.battery_init)?;
        if self.battery_init > self.battery_capacity {
            return Err(Error::Config(format!(
                "battery_init {} exceeds capacity {}",
                self.battery_init, self.battery_capacity
            )));
        }
        nonnegative("purchase_cap", self.purchase_cap)?;
        nonnegative("harvest_cap_max", self.harvest_cap_max)?;
        positive("bandwidth_mhz", self.bandwidth_mhz)?;
        positive("noise_power", self.noise_power)?;
        positive("power_cap", self.power_cap)?;
        positive("large_scale_gain", self.large_scale_gain)?;

        let p = &self.price;
        nonnegative("price.min_rmb_per_kwh", p.min_rmb_per_kwh)?;
        nonnegative("price.max_rmb_per_kwh", p.max_rmb_per_kwh)?;
        if p.min_rmb_per_kwh > p.max_rmb_per_kwh {
            return Err(Error::Config(
                "price.min_rmb_per_kwh exceeds price.max_rmb_per_kwh".into(),
            ));
        }
        if p.period_frames == 0 {
            return Err(Error::Config("price.period_frames must be at least 1".into()));
        }
        nonnegative("price.harvest_rmb_per_kwh", p.harvest_rmb_per_kwh)?;

        let s = &self.solver;
        positive("solver.penalty", s.penalty)?;
        positive("solver.tol_primal", s.tol_primal)?;
        positive("solver.tol_dual", s.tol_dual)?;
        if s.max_iterations == 0 {
            return Err(Error::Config("solver.max_iterations must be at least 1".into()));
        }
        if s.first_block != 0 && self.devices > 1 && s.first_block >= self.devices {
            return Err(Error::Config(format!(
                "solver.first_block must stay below the device count {}, got {}",
                self.devices, s.first_block
            )));
        }
        positive("price_step_fraction", self.price_step_fraction)?;

        let mut warnings = Vec::new();
        if p.harvest_rmb_per_kwh >= p.min_rmb_per_kwh && p.harvest_rmb_per_kwh > 0.0 {
            warnings.push(String::from(
                "harvest price can reach the grid price; the purchase rule assumes harvested energy is the cheaper source",
            ));
        }
        Ok(warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_is_valid() {
        let cfg = SimConfig::default();
        assert!(cfg.validate().unwrap().is_empty());
        assert_eq!(cfg.horizon(), 1000);
        assert_eq!(cfg.first_block(), 2);
    }

    #[test]
    fn negative_battery_capacity_is_rejected() {
        let cfg = SimConfig {
            battery_capacity: -5.0,
            ..SimConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn priority_count_must_match_devices() {
        let cfg = SimConfig {
            devices: 3,
            ..SimConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn expensive_harvest_energy_warns() {
        let mut cfg = SimConfig::default();
        cfg.price.harvest_rmb_per_kwh = 2.0;
        assert_eq!(cfg.validate().unwrap().len(), 1);
    }
}
