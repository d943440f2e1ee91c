//! Stability, optimality, and comparative-statics checks for the channel
//! auction and the closed-form power allocation.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use ttra_core::matching::{
    blocking_pairs, build_preferences, default_price_step, evaluate_pairs, match_channels,
    min_rate_for_delay, optimal_power, pair_utility, Matching, PairEvaluation,
};

const NOISE: f64 = 1e-13;

fn random_evals(
    rng: &mut ChaCha12Rng,
    devices: usize,
    channels: usize,
) -> Vec<Vec<PairEvaluation>> {
    let queues: Vec<f64> = (0..devices).map(|_| rng.random::<f64>() * 8.0).collect();
    let headroom = rng.random::<f64>() * 5.0;
    let gains: Vec<Vec<f64>> = (0..devices)
        .map(|_| {
            (0..channels)
                .map(|_| 1e-12 * libm::pow(10.0, rng.random::<f64>() * 4.0))
                .collect()
        })
        .collect();
    let bandwidth = vec![1.0; channels];
    evaluate_pairs(&queues, headroom, &gains, &bandwidth, NOISE, 1.0, 2.0)
}

#[test]
fn substituting_the_positive_root_zeroes_the_delay_relation() {
    let mut rng = ChaCha12Rng::seed_from_u64(31);
    for _ in 0..2000 {
        let r = rng.random::<f64>() * 3e7;
        let d = 1e-6 * libm::pow(10.0, rng.random::<f64>() * 3.0);
        let v = min_rate_for_delay(r, d).unwrap();
        // f(v) = r − d·v² + d·v·r must vanish at the root.
        let f = r - d * v * v + d * v * r;
        let scale = r.max(d * v * v).max(1.0);
        assert!(f.abs() <= 1e-9 * scale, "r={r} d={d} v={v} f={f}");
        assert!(v >= 0.0);
    }
}

/// Ternary search over the discrete power grid; exact for the strictly
/// concave pair value. A dense full scan cross-checks it below.
fn grid_argmax(
    queue: f64,
    headroom: f64,
    gain: f64,
    power_cap: f64,
    step: f64,
    f: impl Fn(f64) -> f64,
) -> f64 {
    let _ = (queue, headroom, gain);
    let n = (power_cap / step).round() as i64;
    let (mut lo, mut hi) = (0i64, n);
    while hi - lo > 2 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        if f(m1 as f64 * step) < f(m2 as f64 * step) {
            lo = m1 + 1;
        } else {
            hi = m2;
        }
    }
    let mut best = lo;
    for i in lo..=hi {
        if f(i as f64 * step) > f(best as f64 * step) {
            best = i;
        }
    }
    best as f64 * step
}

#[test]
fn ternary_grid_search_agrees_with_a_dense_scan() {
    let mut rng = ChaCha12Rng::seed_from_u64(32);
    let step = 1e-4;
    for _ in 0..10 {
        let queue = rng.random::<f64>() * 8.0;
        let headroom = 0.1 + rng.random::<f64>() * 4.9;
        let gain = 1e-12 * libm::pow(10.0, rng.random::<f64>() * 4.0);
        let f = |p: f64| pair_utility(queue, headroom, 1.0, gain, NOISE, 1.0, p);
        let fast = grid_argmax(queue, headroom, gain, 2.0, step, f);
        let mut dense_best = 0.0f64;
        let mut i = 0i64;
        while (i as f64) * step <= 2.0 {
            if f(i as f64 * step) > f(dense_best) {
                dense_best = i as f64 * step;
            }
            i += 1;
        }
        assert!(
            (f(fast) - f(dense_best)).abs() <= 1e-12 * (1.0 + f(dense_best).abs()),
            "ternary {fast} vs dense {dense_best}"
        );
    }
}

#[test]
fn closed_form_power_attains_the_grid_maximum() {
    let mut rng = ChaCha12Rng::seed_from_u64(33);
    let step = 1e-6;
    for _ in 0..500 {
        let queue = rng.random::<f64>() * 8.0;
        let headroom = rng.random::<f64>() * 5.0;
        let gain = 1e-12 * libm::pow(10.0, rng.random::<f64>() * 4.0);
        let p_star = optimal_power(queue, headroom, 1.0, gain, NOISE, 1.0, 2.0);
        let f = |p: f64| pair_utility(queue, headroom, 1.0, gain, NOISE, 1.0, p);
        let p_grid = grid_argmax(queue, headroom, gain, 2.0, step, f);
        let close = (p_star - p_grid).abs() <= step + 1e-9;
        let same_value = (f(p_star) - f(p_grid)).abs() <= 1e-10 * (1.0 + f(p_grid).abs());
        assert!(
            close || same_value,
            "p*={p_star} grid={p_grid} f*={} fg={}",
            f(p_star),
            f(p_grid)
        );
        assert!(f(p_star) >= f(p_grid) - 1e-9 * (1.0 + f(p_grid).abs()));
    }
}

#[test]
fn preference_lists_match_exhaustive_recomputation() {
    let mut rng = ChaCha12Rng::seed_from_u64(34);
    let evals = random_evals(&mut rng, 5, 12);
    let prices: Vec<f64> = (0..12).map(|_| rng.random::<f64>() * 10.0).collect();
    for device in 0..5 {
        let prefs = build_preferences(device, &evals, &prices);
        // Independent recomputation: surplus per channel, filter, sort.
        let mut expect: Vec<(usize, f64)> = (0..12)
            .map(|k| (k, evals[device][k].utility - prices[k]))
            .filter(|(_, s)| *s > 0.0)
            .collect();
        expect.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        assert_eq!(prefs, expect);
    }
}

fn assert_feasible(m: &Matching, devices: usize, channels: usize, quota: usize) {
    assert_eq!(m.assigned.len(), devices);
    let mut seen = vec![false; channels];
    for (n, held) in m.assigned.iter().enumerate() {
        assert!(held.len() <= quota, "device {n} exceeded quota");
        for &k in held {
            assert!(!seen[k], "channel {k} double-assigned");
            seen[k] = true;
            assert_eq!(m.owner[k], Some(n));
        }
    }
}

#[test]
fn auction_is_stable_feasible_and_terminates_within_budget() {
    let mut rng = ChaCha12Rng::seed_from_u64(35);
    for trial in 0..2000 {
        let devices = 2 + rng.random_range(0..7usize);
        let channels = 2 + rng.random_range(0..15usize);
        let quota = 1 + rng.random_range(0..3usize);
        let evals = random_evals(&mut rng, devices, channels);
        let step = default_price_step(&evals, 0.01);
        let m = match_channels(&evals, quota, step);
        assert_feasible(&m, devices, channels, quota);
        let blocking = blocking_pairs(&evals, &m, quota);
        assert!(
            blocking.is_empty(),
            "trial {trial}: blocking pairs {blocking:?}"
        );
        // Every conflict round raises at least one price by the step, and a
        // channel's price stops rising once it exceeds every pair value.
        let max_utility = evals
            .iter()
            .flat_map(|row| row.iter().map(|e| e.utility))
            .fold(0.0f64, f64::max);
        let bound = channels as f64 * (max_utility.max(0.0) / step + 1.0) + 1.0;
        assert!(
            (m.rounds as f64) <= bound,
            "trial {trial}: rounds {} exceed budget {bound}",
            m.rounds
        );
    }
}

/// All one-to-many assignments for tiny instances, by channel-owner tuples.
fn enumerate_best_welfare(evals: &[Vec<PairEvaluation>], quota: usize) -> f64 {
    let devices = evals.len();
    let channels = evals[0].len();
    let mut owners = vec![0usize; channels]; // 0 = unassigned, n+1 = device n
    let mut best = 0.0f64;
    loop {
        let mut counts = vec![0usize; devices];
        let mut welfare = 0.0;
        let mut feasible = true;
        for (k, owner) in owners.iter().enumerate() {
            if *owner > 0 {
                let n = owner - 1;
                counts[n] += 1;
                if counts[n] > quota {
                    feasible = false;
                    break;
                }
                welfare += evals[n][k].utility;
            }
        }
        if feasible {
            best = best.max(welfare);
        }
        // Next assignment in mixed radix.
        let mut k = 0;
        loop {
            if k == channels {
                return best;
            }
            owners[k] += 1;
            if owners[k] <= devices {
                break;
            }
            owners[k] = 0;
            k += 1;
        }
    }
}

#[test]
fn auction_welfare_is_within_price_slack_of_the_enumerated_optimum() {
    let mut rng = ChaCha12Rng::seed_from_u64(36);
    for _ in 0..300 {
        let devices = 1 + rng.random_range(0..3usize);
        let channels = 1 + rng.random_range(0..4usize);
        let quota = 1 + rng.random_range(0..2usize);
        let evals = random_evals(&mut rng, devices, channels);
        let step = default_price_step(&evals, 0.01);
        let m = match_channels(&evals, quota, step);
        let evals_ref = &evals;
        let matched: f64 = m
            .assigned
            .iter()
            .enumerate()
            .flat_map(|(n, held)| held.iter().map(move |&k| evals_ref[n][k].utility))
            .sum();
        let best = enumerate_best_welfare(&evals, quota);
        assert!(
            matched >= best - m.total_price_increments() - 1e-9,
            "welfare {matched} vs optimum {best} with slack {}",
            m.total_price_increments()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Power comparative statics: climbing in backlog, falling in battery
    /// headroom, falling in noise-to-gain ratio.
    #[test]
    fn power_is_monotone_in_its_drivers(
        queue in 0.0f64..8.0,
        bump in 0.01f64..4.0,
        headroom in 0.01f64..5.0,
        gain_exp in 0.0f64..4.0,
    ) {
        let gain = 1e-12 * libm::pow(10.0, gain_exp);
        let base = optimal_power(queue, headroom, 1.0, gain, NOISE, 1.0, 2.0);
        prop_assert!(optimal_power(queue + bump, headroom, 1.0, gain, NOISE, 1.0, 2.0) >= base - 1e-12);
        prop_assert!(optimal_power(queue, headroom + bump, 1.0, gain, NOISE, 1.0, 2.0) <= base + 1e-12);
        prop_assert!(optimal_power(queue, headroom, 1.0, gain * 0.5, NOISE, 1.0, 2.0) <= base + 1e-12);
    }

    /// The pair value at the closed-form power dominates random candidates.
    #[test]
    fn no_random_power_beats_the_closed_form(
        queue in 0.0f64..8.0,
        headroom in 0.0f64..5.0,
        gain_exp in 0.0f64..4.0,
        candidate in 0.0f64..2.0,
    ) {
        let gain = 1e-12 * libm::pow(10.0, gain_exp);
        let p_star = optimal_power(queue, headroom, 1.0, gain, NOISE, 1.0, 2.0);
        let best = pair_utility(queue, headroom, 1.0, gain, NOISE, 1.0, p_star);
        let other = pair_utility(queue, headroom, 1.0, gain, NOISE, 1.0, candidate);
        prop_assert!(best >= other - 1e-9 * (1.0 + other.abs()));
    }
}
