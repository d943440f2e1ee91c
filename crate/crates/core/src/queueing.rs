//! Data queues and the battery energy queue, with their update recursions
//! and stability/delay statistics.
//!
//! Data queues follow the service-then-arrival recursion
//! `Q' = max(Q − v·T₀, 0) + r·T₀`, clamped to the buffer bound with drop
//! accounting. The battery follows `E' = max(E − p_c, 0) + g + ϑ` and must
//! stay within `[0, capacity]`; the controller enforces the causality and
//! capacity constraints upstream, so a violation here is a contract error.

use alloc::format;

use crate::error::{Error, Result};

/// One device's data queue, in Mbit.
#[derive(Debug, Clone, PartialEq)]
pub struct DataQueue {
    backlog: f64,
    priority: f64,
    storage_cap: f64,
    cumulative_arrivals: f64,
    cumulative_service: f64,
    dropped: f64,
    initial_backlog: f64,
}

impl DataQueue {
    pub fn new(initial_backlog: f64, priority: f64, storage_cap: f64) -> Result<Self> {
        if initial_backlog < 0.0 || initial_backlog > storage_cap {
            return Err(Error::InvalidInput(format!(
                "initial backlog {initial_backlog} outside [0, {storage_cap}]"
            )));
        }
        Ok(Self {
            backlog: initial_backlog,
            priority,
            storage_cap,
            cumulative_arrivals: 0.0,
            cumulative_service: 0.0,
            dropped: 0.0,
            initial_backlog,
        })
    }

    /// Applies one slot: serve at `service_rate`, then admit at
    /// `arrival_rate`, both in Mbit/s over `slot_duration` seconds.
    pub fn update(&mut self, arrival_rate: f64, service_rate: f64, slot_duration: f64) -> Result<()> {
        if arrival_rate < 0.0 || service_rate < 0.0 {
            return Err(Error::InvalidInput(format!(
                "queue rates must be nonnegative, got r={arrival_rate}, v={service_rate}"
            )));
        }
        let served = (service_rate * slot_duration).min(self.backlog);
        let admitted = arrival_rate * slot_duration;
        let before_clamp = self.backlog - served + admitted;
        let dropped = (before_clamp - self.storage_cap).max(0.0);
        self.backlog = before_clamp - dropped;
        self.cumulative_arrivals += admitted;
        self.cumulative_service += served;
        self.dropped += dropped;
        Ok(())
    }

    #[must_use]
    pub fn backlog(&self) -> f64 {
        self.backlog
    }

    #[must_use]
    pub fn priority(&self) -> f64 {
        self.priority
    }

    #[must_use]
    pub fn cumulative_arrivals(&self) -> f64 {
        self.cumulative_arrivals
    }

    #[must_use]
    pub fn cumulative_service(&self) -> f64 {
        self.cumulative_service
    }

    #[must_use]
    pub fn dropped(&self) -> f64 {
        self.dropped
    }

    /// Bit accounting closes exactly:
    /// `arrivals − service − drops = backlog − initial`.
    #[must_use]
    pub fn conservation_residual(&self) -> f64 {
        (self.cumulative_arrivals - self.cumulative_service - self.dropped)
            - (self.backlog - self.initial_backlog)
    }
}

/// The battery viewed as an energy queue, in J.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyQueue {
    level: f64,
    capacity: f64,
}

impl EnergyQueue {
    pub fn new(initial_level: f64, capacity: f64) -> Result<Self> {
        if !capacity.is_finite() || capacity <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "battery capacity must be positive, got {capacity}"
            )));
        }
        if initial_level < 0.0 || initial_level > capacity {
            return Err(Error::InvalidInput(format!(
                "battery level {initial_level} outside [0, {capacity}]"
            )));
        }
        Ok(Self {
            level: initial_level,
            capacity,
        })
    }

    /// Applies one slot: drain `consumed`, then add `purchased + harvested`.
    ///
    /// Preconditions (enforced by the controller, checked here with a small
    /// float tolerance): `consumed ≤ level` and
    /// `level + purchased + harvested ≤ capacity`.
    pub fn update(&mut self, consumed: f64, purchased: f64, harvested: f64) -> Result<()> {
        const TOL: f64 = 1e-9;
        if consumed < -TOL || purchased < -TOL || harvested < -TOL {
            return Err(Error::InvalidInput(format!(
                "energy amounts must be nonnegative, got p_c={consumed}, g={purchased}, harvested={harvested}"
            )));
        }
        if consumed > self.level + TOL {
            return Err(Error::InvalidInput(format!(
                "energy causality broken: consuming {consumed} J from a {} J battery",
                self.level
            )));
        }
        if self.level + purchased + harvested > self.capacity + TOL {
            return Err(Error::InvalidInput(format!(
                "battery overflow: {} + {purchased} + {harvested} J exceeds capacity {} J",
                self.level, self.capacity
            )));
        }
        self.level = (self.level - consumed).max(0.0) + purchased + harvested;
        self.level = self.level.min(self.capacity).max(0.0);
        Ok(())
    }

    #[must_use]
    pub fn level(&self) -> f64 {
        self.level
    }

    #[must_use]
    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Distance from full, `capacity − level`; the drift terms price energy
    /// decisions against this headroom.
    #[must_use]
    pub fn headroom(&self) -> f64 {
        self.capacity - self.level
    }
}

/// End-of-horizon mean-rate-stability statistic: `Q(τ_last) / τ_last`.
/// Values near zero certify stability numerically.
pub fn stability_statistic(backlog_history: &[f64]) -> Result<f64> {
    if backlog_history.len() < 2 {
        return Err(Error::EmptyHistory);
    }
    let last = backlog_history[backlog_history.len() - 1];
    Ok(last / backlog_history.len() as f64)
}

/// Time-average queueing delay from realized arrival and service rates:
/// `r̄ / (v̄ · (v̄ − r̄))`, defined when the queue is stabilized (`v̄ > r̄`).
///
/// The output is in seconds when the rates are per-second counts, so callers
/// convert Mbit/s to bit/s before calling.
pub fn time_average_delay(arrival_rates: &[f64], service_rates: &[f64]) -> Result<f64> {
    if arrival_rates.is_empty() || arrival_rates.len() != service_rates.len() {
        return Err(Error::EmptyHistory);
    }
    let n = arrival_rates.len() as f64;
    let r_bar = arrival_rates.iter().sum::<f64>() / n;
    let v_bar = service_rates.iter().sum::<f64>() / n;
    if r_bar == 0.0 {
        return Ok(0.0);
    }
    if v_bar <= r_bar {
        return Err(Error::UnstableQueue);
    }
    Ok(r_bar / (v_bar * (v_bar - r_bar)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn service_clamps_at_zero_before_arrivals() {
        let mut q = DataQueue::new(5.0, 0.1, 1e9).unwrap();
        q.update(2.0, 10.0, 1.0).unwrap();
        assert_eq!(q.backlog(), 2.0);
    }

    #[test]
    fn idle_slot_keeps_backlog() {
        let mut q = DataQueue::new(3.0, 0.1, 1e9).unwrap();
        q.update(0.0, 0.0, 1.0).unwrap();
        assert_eq!(q.backlog(), 3.0);
    }

    #[test]
    fn one_step_recursion_from_initial_backlog() {
        let mut q = DataQueue::new(3.0, 0.1, 1e9).unwrap();
        q.update(1.0, 2.0, 1.0).unwrap();
        assert_eq!(q.backlog(), 2.0);
    }

    #[test]
    fn negative_rates_are_rejected() {
        let mut q = DataQueue::new(3.0, 0.1, 1e9).unwrap();
        assert!(q.update(-1.0, 0.0, 1.0).is_err());
        assert!(q.update(0.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn overflow_is_dropped_and_counted() {
        let mut q = DataQueue::new(3.0, 0.1, 4.0).unwrap();
        q.update(5.0, 0.0, 1.0).unwrap();
        assert_eq!(q.backlog(), 4.0);
        assert_eq!(q.dropped(), 4.0);
        assert!(q.conservation_residual().abs() < 1e-12);
    }

    #[test]
    fn battery_formula_and_full_drain() {
        let mut e = EnergyQueue::new(2.0, 5.0).unwrap();
        e.update(0.5, 1.0, 0.5).unwrap();
        assert_eq!(e.level(), 3.0);

        let mut e = EnergyQueue::new(2.0, 5.0).unwrap();
        e.update(2.0, 0.0, 0.0).unwrap();
        assert_eq!(e.level(), 0.0);
    }

    #[test]
    fn battery_never_exceeds_capacity() {
        let mut e = EnergyQueue::new(2.0, 5.0).unwrap();
        e.update(0.0, 2.0, 1.0).unwrap();
        assert!(e.level() <= 5.0);
        assert_eq!(e.level(), 5.0);
    }

    #[test]
    fn causality_violation_is_a_contract_error() {
        let mut e = EnergyQueue::new(1.0, 5.0).unwrap();
        assert!(e.update(2.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn overflow_violation_is_a_contract_error() {
        let mut e = EnergyQueue::new(4.0, 5.0).unwrap();
        assert!(e.update(0.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn stability_statistic_shrinks_for_constant_backlog() {
        let short: alloc::vec::Vec<f64> = (0..10).map(|_| 4.0).collect();
        let long: alloc::vec::Vec<f64> = (0..1000).map(|_| 4.0).collect();
        assert!(stability_statistic(&long).unwrap() < stability_statistic(&short).unwrap());
    }

    #[test]
    fn stability_statistic_detects_linear_growth() {
        let grow: alloc::vec::Vec<f64> = (1..=1000).map(|t| 0.5 * t as f64).collect();
        let stat = stability_statistic(&grow).unwrap();
        assert!((stat - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stability_statistic_needs_history() {
        assert_eq!(stability_statistic(&[1.0]), Err(Error::EmptyHistory));
    }

    #[test]
    fn delay_formula() {
        assert_eq!(time_average_delay(&[1.0], &[2.0]).unwrap(), 0.5);
        assert_eq!(time_average_delay(&[0.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(
            time_average_delay(&[2.0], &[2.0]),
            Err(Error::UnstableQueue)
        );
    }
}
