//! Per-slot joint channel selection and power allocation, solved as a
//! price-based one-to-many matching between devices and channels.
//!
//! For every device–channel pair, the best transmit power has the closed
//! water-filling-like form
//!
//! ```text
//! p* = clamp( Q·T₀·W / (𝓔·ln2) − σ²/h,  0,  p_max )
//! ```
//!
//! trading backlog drain `Q·v·T₀` against battery headroom `𝓔·p`. The value
//! of a pair at its best power, `f = Q·T₀·W·log₂(1+p*·h/σ²) − 𝓔·p*`, drives
//! the matching: each device demands its `q` best channels by price-adjusted
//! surplus `F = f − Λ_k`, and every channel wanted by more than one device
//! raises its virtual price by `ΔΛ` until demand is conflict-free. Prices
//! only rise, every conflict round raises at least one price, and a device
//! never demands a channel with `F ≤ 0`, so the auction terminates within
//! `K·max(F)/ΔΛ` rounds and ends with zero blocking pairs: any channel a
//! device does not hold is either overpriced for it or worse than everything
//! it holds.
//!
//! Two post-passes keep the physical coupling honest: powers are scaled down
//! proportionally if the slot would consume more energy than the battery
//! holds, and per-device minimum-rate targets derived from the delay bound
//! are checked and reported (not enforced; the objective already rewards
//! serving backlogged queues).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const LN2: f64 = core::f64::consts::LN_2;

/// Minimum service rate that keeps the instantaneous queueing delay of an
/// admission rate `r` below `delay_target`: the positive root of
/// `r − d·v² + d·v·r = 0`.
///
/// Unit-consistent: `r` per second and `delay_target` in seconds (callers
/// using Mbit/s convert to bit/s first).
pub fn min_rate_for_delay(admitted_rate: f64, delay_target: f64) -> Result<f64> {
    if delay_target <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "delay target must be positive, got {delay_target}"
        )));
    }
    if admitted_rate < 0.0 {
        return Err(Error::InvalidInput(format!(
            "admitted rate must be nonnegative, got {admitted_rate}"
        )));
    }
    if admitted_rate == 0.0 {
        return Ok(0.0);
    }
    let dr = delay_target * admitted_rate;
    Ok((dr + libm::sqrt(dr * dr + 4.0 * admitted_rate * delay_target)) / (2.0 * delay_target))
}

/// Best transmit power for one device–channel pair (see module docs).
///
/// `headroom = 0` (full battery) is the limit where spending is free, so the
/// power cap is returned whenever the queue is nonempty.
#[must_use]
pub fn optimal_power(
    queue_mbit: f64,
    headroom: f64,
    bandwidth_mhz: f64,
    gain: f64,
    noise: f64,
    slot_duration: f64,
    power_cap: f64,
) -> f64 {
    if headroom <= 0.0 {
        return if queue_mbit > 0.0 { power_cap } else { 0.0 };
    }
    let interior = queue_mbit * slot_duration * bandwidth_mhz / (headroom * LN2) - noise / gain;
    interior.clamp(0.0, power_cap)
}

/// Pair value at power `p`: `Q·T₀·W·log₂(1+p·h/σ²) − 𝓔·p`.
#[must_use]
pub fn pair_utility(
    queue_mbit: f64,
    headroom: f64,
    bandwidth_mhz: f64,
    gain: f64,
    noise: f64,
    slot_duration: f64,
    power: f64,
) -> f64 {
    queue_mbit * slot_duration * bandwidth_mhz * libm::log2(1.0 + power * gain / noise)
        - headroom * power
}

/// One device–channel pair at its best power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEvaluation {
    /// Best power, W.
    pub power: f64,
    /// Shannon rate at that power, Mbit/s.
    pub rate_mbps: f64,
    /// Pair value at that power.
    pub utility: f64,
}

/// Evaluates all `N×K` pairs for one slot.
#[must_use]
pub fn evaluate_pairs(
    queues_mbit: &[f64],
    headroom: f64,
    gains: &[Vec<f64>],
    bandwidth_mhz: &[f64],
    noise: f64,
    slot_duration: f64,
    power_cap: f64,
) -> Vec<Vec<PairEvaluation>> {
    queues_mbit
        .iter()
        .zip(gains)
        .map(|(q, row)| {
            row.iter()
                .zip(bandwidth_mhz)
                .map(|(h, w)| {
                    let power = optimal_power(*q, headroom, *w, *h, noise, slot_duration, power_cap);
                    PairEvaluation {
                        power,
                        rate_mbps: w * libm::log2(1.0 + power * h / noise),
                        utility: pair_utility(*q, headroom, *w, *h, noise, slot_duration, power),
                    }
                })
                .collect()
        })
        .collect()
}

/// Price increment: `fraction` of the median absolute pair value, floored to
/// stay positive when every pair value is zero.
#[must_use]
pub fn default_price_step(evals: &[Vec<PairEvaluation>], fraction: f64) -> f64 {
    let mut magnitudes: Vec<f64> = evals
        .iter()
        .flat_map(|row| row.iter().map(|e| libm::fabs(e.utility)))
        .collect();
    if magnitudes.is_empty() {
        return 1e-12;
    }
    magnitudes.sort_unstable_by(f64::total_cmp);
    let median = magnitudes[magnitudes.len() / 2];
    (fraction * median).max(1e-12)
}

/// One device's view: all channels with positive price-adjusted surplus
/// `F = f − Λ`, best first, ties broken by ascending channel index.
#[must_use]
pub fn build_preferences(
    device: usize,
    evals: &[Vec<PairEvaluation>],
    prices: &[f64],
) -> Vec<(usize, f64)> {
    let mut prefs: Vec<(usize, f64)> = evals[device]
        .iter()
        .enumerate()
        .map(|(k, e)| (k, e.utility - prices[k]))
        .filter(|(_, surplus)| *surplus > 0.0)
        .collect();
    prefs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    prefs
}

/// A conflict-free one-to-many assignment with the prices that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Channels held per device (each at most `quota` long).
    pub assigned: Vec<Vec<usize>>,
    /// Owning device per channel.
    pub owner: Vec<Option<usize>>,
    /// Final virtual prices per channel.
    pub prices: Vec<f64>,
    /// Demand rounds until termination.
    pub rounds: u64,
}

impl Matching {
    /// Sum of all price increments applied; bounds the welfare gap to the
    /// assignment optimum.
    #[must_use]
    pub fn total_price_increments(&self) -> f64 {
        self.prices.iter().sum()
    }
}

/// Runs the price auction until every channel has at most one demander.
///
/// Each round, every device demands its `quota` best positive-surplus
/// channels at current prices; contested channels raise their price by
/// `price_step` and the round repeats. Quota and exclusivity hold at every
/// intermediate state because demands are quota-bounded and the final
/// assignment maps each channel to its unique demander.
#[must_use]
pub fn match_channels(
    evals: &[Vec<PairEvaluation>],
    quota: usize,
    price_step: f64,
) -> Matching {
    debug_assert!(price_step > 0.0);
    let devices = evals.len();
    let channels = evals.first().map_or(0, Vec::len);
    let mut prices = vec![0.0; channels];
    let mut rounds = 0u64;

    loop {
        rounds += 1;
        let demands: Vec<Vec<usize>> = (0..devices)
            .map(|n| {
                build_preferences(n, evals, &prices)
                    .into_iter()
                    .take(quota)
                    .map(|(k, _)| k)
                    .collect()
            })
            .collect();

        let mut demand_count = vec![0usize; channels];
        for wanted in &demands {
            for &k in wanted {
                demand_count[k] += 1;
            }
        }

        let mut any_conflict = false;
        for k in 0..channels {
            if demand_count[k] > 1 {
                prices[k] += price_step;
                any_conflict = true;
            }
        }
        if !any_conflict {
            let mut owner = vec![None; channels];
            for (n, wanted) in demands.iter().enumerate() {
                for &k in wanted {
                    owner[k] = Some(n);
                }
            }
            return Matching {
                assigned: demands,
                owner,
                prices,
                rounds,
            };
        }
    }
}

/// Pairs that would destabilize the matching at its final prices: the device
/// strictly gains by adding or swapping in the channel, and the channel
/// either is idle or values the device above its current owner.
#[must_use]
pub fn blocking_pairs(
    evals: &[Vec<PairEvaluation>],
    matching: &Matching,
    quota: usize,
) -> Vec<(usize, usize)> {
    let mut blocking = Vec::new();
    for (n, held) in matching.assigned.iter().enumerate() {
        let worst_held = held
            .iter()
            .map(|&k| evals[n][k].utility - matching.prices[k])
            .fold(f64::INFINITY, f64::min);
        for k in 0..matching.prices.len() {
            if held.contains(&k) {
                continue;
            }
            let surplus = evals[n][k].utility - matching.prices[k];
            let device_prefers =
                surplus > 0.0 && (held.len() < quota || surplus > worst_held);
            if !device_prefers {
                continue;
            }
            let channel_prefers = match matching.owner[k] {
                None => true,
                Some(owner) => evals[n][k].utility > evals[owner][k].utility,
            };
            if channel_prefers {
                blocking.push((n, k));
            }
        }
    }
    blocking
}

/// Scales all powers by `available / consumed` when the slot would drain more
/// than the battery holds. Returns whether scaling was applied.
pub fn scale_to_energy_budget(powers: &mut [f64], slot_duration: f64, available: f64) -> bool {
    let consumed: f64 = powers.iter().sum::<f64>() * slot_duration;
    if consumed <= available {
        return false;
    }
    let factor = if consumed > 0.0 { (available / consumed).max(0.0) } else { 0.0 };
    for p in powers.iter_mut() {
        *p *= factor;
    }
    true
}

/// Marks which devices meet their minimum-rate target this slot.
#[must_use]
pub fn check_rate_targets(served: &[f64], targets: &[f64]) -> Vec<bool> {
    served
        .iter()
        .zip(targets)
        .map(|(v, t)| v + 1e-12 >= *t)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_needs_no_service() {
        assert_eq!(min_rate_for_delay(0.0, 1e-5).unwrap(), 0.0);
    }

    #[test]
    fn unit_rate_unit_delay_is_golden_ratio() {
        let v = min_rate_for_delay(1.0, 1.0).unwrap();
        assert!((v - (1.0 + libm::sqrt(5.0)) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_delay_target_is_rejected() {
        assert!(min_rate_for_delay(1.0, 0.0).is_err());
        assert!(min_rate_for_delay(1.0, -1.0).is_err());
    }

    #[test]
    fn empty_queue_draws_no_power() {
        let p = optimal_power(0.0, 3.0, 1.0, 1e-10, 1e-13, 1.0, 2.0);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn power_clamps_at_the_cap() {
        // Huge backlog pushes the interior point far beyond the cap.
        let p = optimal_power(1e6, 0.1, 1.0, 1e-10, 1e-13, 1.0, 2.0);
        assert_eq!(p, 2.0);
    }

    #[test]
    fn full_battery_spends_freely() {
        assert_eq!(optimal_power(1.0, 0.0, 1.0, 1e-10, 1e-13, 1.0, 2.0), 2.0);
        assert_eq!(optimal_power(0.0, 0.0, 1.0, 1e-10, 1e-13, 1.0, 2.0), 0.0);
    }

    #[test]
    fn pair_utility_zero_power_is_zero() {
        assert_eq!(pair_utility(3.0, 2.0, 1.0, 1e-10, 1e-13, 1.0, 0.0), 0.0);
    }

    #[test]
    fn pair_utility_is_increasing_without_headroom() {
        let f1 = pair_utility(3.0, 0.0, 1.0, 1e-10, 1e-13, 1.0, 0.5);
        let f2 = pair_utility(3.0, 0.0, 1.0, 1e-10, 1e-13, 1.0, 1.5);
        assert!(f2 > f1);
    }

    fn eval_grid(utilities: &[&[f64]]) -> Vec<Vec<PairEvaluation>> {
        utilities
            .iter()
            .map(|row| {
                row.iter()
                    .map(|u| PairEvaluation {
                        power: 1.0,
                        rate_mbps: 1.0,
                        utility: *u,
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn better_channel_ranks_first_at_zero_prices() {
        let queues = [3.0];
        let gains = vec![vec![2e-10, 1e-10]];
        let evals = evaluate_pairs(&queues, 2.0, &gains, &[1.0, 1.0], 1e-13, 1.0, 2.0);
        let prefs = build_preferences(0, &evals, &[0.0, 0.0]);
        assert_eq!(prefs[0].0, 0);
        assert_eq!(prefs[1].0, 1);
    }

    #[test]
    fn raised_price_swaps_the_order() {
        let evals = eval_grid(&[&[10.0, 8.0]]);
        let prefs = build_preferences(0, &evals, &[0.0, 0.0]);
        assert_eq!(prefs[0].0, 0);
        let prefs = build_preferences(0, &evals, &[3.0, 0.0]);
        assert_eq!(prefs[0].0, 1);
    }

    #[test]
    fn nonpositive_surplus_is_excluded() {
        let evals = eval_grid(&[&[10.0, -1.0, 0.0]]);
        let prefs = build_preferences(0, &evals, &[10.0, 0.0, 0.0]);
        assert!(prefs.is_empty());
    }

    #[test]
    fn lone_device_takes_everything_it_values() {
        let evals = eval_grid(&[&[5.0, 4.0, 3.0]]);
        let m = match_channels(&evals, 3, 0.1);
        assert_eq!(m.assigned[0], vec![0, 1, 2]);
        assert!(blocking_pairs(&evals, &m, 3).is_empty());
    }

    #[test]
    fn higher_value_wins_the_price_war() {
        // One channel, two devices; the bigger pair value outlasts rising prices.
        let evals = eval_grid(&[&[5.0], &[8.0]]);
        let m = match_channels(&evals, 1, 0.5);
        assert_eq!(m.owner[0], Some(1));
        assert!(m.prices[0] > 0.0);
        assert!(blocking_pairs(&evals, &m, 1).is_empty());
    }

    #[test]
    fn quota_and_exclusivity_hold() {
        let evals = eval_grid(&[&[5.0, 4.0, 3.0, 2.0], &[5.5, 4.5, 3.5, 2.5]]);
        let m = match_channels(&evals, 2, 0.05);
        for held in &m.assigned {
            assert!(held.len() <= 2);
        }
        let mut seen = [false; 4];
        for held in &m.assigned {
            for &k in held {
                assert!(!seen[k], "channel {k} assigned twice");
                seen[k] = true;
            }
        }
    }

    #[test]
    fn scaling_preserves_proportions_and_budget() {
        let mut powers = vec![2.0, 1.0, 1.0];
        let scaled = scale_to_energy_budget(&mut powers, 1.0, 2.0);
        assert!(scaled);
        assert!((powers.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!((powers[0] - 2.0 * powers[1]).abs() < 1e-12);
    }

    #[test]
    fn within_budget_is_identity() {
        let mut powers = vec![0.5, 0.5];
        assert!(!scale_to_energy_budget(&mut powers, 1.0, 2.0));
        assert_eq!(powers, vec![0.5, 0.5]);
    }

    #[test]
    fn empty_battery_zeroes_all_powers() {
        let mut powers = vec![0.5, 0.5];
        assert!(scale_to_energy_budget(&mut powers, 1.0, 0.0));
        assert_eq!(powers, vec![0.0, 0.0]);
    }

    #[test]
    fn rate_target_flags() {
        assert_eq!(check_rate_targets(&[1.0], &[1.0]), vec![true]);
        assert_eq!(check_rate_targets(&[0.0], &[0.5]), vec![false]);
    }
}
