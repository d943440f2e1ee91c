//! The end-to-end control loop over the full horizon, plus the baseline
//! controllers and the independent constraint audit.
//!
//! Every slot proceeds in a fixed order: frame-start energy management,
//! rate control, channel selection and power allocation, then the queue
//! recursions. The frame's energy decision `(g*, ϑ*)` is a per-slot inflow
//! rate: the battery receives it on every slot of the frame (energy-frame
//! processes change per frame but flow per slot), curtailed against the
//! remaining battery headroom, cutting paid grid energy before free
//! harvest. The audit re-checks every hard constraint from the raw slot
//! decisions without trusting the modules that produced them, and aborts
//! with the slot and constraint on violation.
//!
//! Controllers:
//! - `Proposed`: the full pipeline (closed-form energy, ADMM rates,
//!   price-based matching).
//! - `RandomChannels`: matching replaced by a random feasible assignment;
//!   everything else identical, isolating the matching's contribution.
//! - `CostBlind`: energy management with zero cost weight (buys whenever the
//!   battery has headroom); isolates the price-awareness contribution.
//! - `OracleRates`: ADMM replaced by the exact KKT rate solver; isolates the
//!   ADMM approximation error.
//!
//! [`check_drift_bound`] evaluates, per frame, the realized drift-minus-
//! utility of the quadratic queue potential against the bound the decision
//! rules minimize; the bound is algebraic given the recursions and caps, so
//! a failure always means a bookkeeping or controller bug.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::clock::Clock;
use crate::config::SimConfig;
use crate::energy::{energy_objective, schedule_energy, EnergyParams};
use crate::env::{stream_rng, EnvSample, EnvSampler, STREAM_BASELINE};
use crate::error::{Error, Result};
use crate::matching::{
    check_rate_targets, default_price_step, evaluate_pairs, match_channels, min_rate_for_delay,
    scale_to_energy_budget, Matching,
};
use crate::metrics::{qoe, shannon_rate, FrameRecord, SlotRecord};
use crate::queueing::{DataQueue, EnergyQueue};
use crate::rate::{IterationTrace, RateProblem, RateSolution};

/// Which controller drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Controller {
    Proposed,
    RandomChannels,
    CostBlind,
    OracleRates,
}

impl Controller {
    #[must_use]
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Proposed => "proposed",
            Controller::RandomChannels => "baseline1",
            Controller::CostBlind => "baseline2",
            Controller::OracleRates => "baseline3",
        }
    }
}

/// Extra knobs for a run that are not part of the scenario.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record the ADMM residual trace of this slot (e.g. the last one).
    pub admm_trace_slot: Option<u64>,
    /// Keep every slot's channel assignment and final prices.
    pub capture_assignments: bool,
}

/// One slot's channel assignment and final prices, kept on request.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentRecord {
    pub slot: u64,
    /// Channels held per device.
    pub assigned: Vec<Vec<usize>>,
    /// Final virtual prices per channel.
    pub prices: Vec<f64>,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub slots: Vec<SlotRecord>,
    pub frames: Vec<FrameRecord>,
    /// Data backlogs after the final update, Mbit.
    pub final_queues: Vec<f64>,
    /// Battery level after the final update, J.
    pub final_battery: f64,
    /// Largest channel gain realized during the run.
    pub peak_gain: f64,
    /// Bits dropped at the buffer bound per device, Mbit.
    pub queue_drops: Vec<f64>,
    /// Per-device bit-accounting residuals (should be ≈ 0).
    pub conservation_residuals: Vec<f64>,
    /// ADMM residual trace of the requested slot, if any.
    pub admm_trace: Option<Vec<IterationTrace>>,
    /// Per-slot assignments and prices when capture was requested.
    pub assignments: Option<Vec<AssignmentRecord>>,
}

pub fn run(cfg: &SimConfig, controller: Controller) -> Result<RunOutput> {
    run_with_options(cfg, controller, RunOptions::default())
}

pub fn run_with_options(
    cfg: &SimConfig,
    controller: Controller,
    options: RunOptions,
) -> Result<RunOutput> {
    cfg.validate()?;
    let sampler = EnvSampler::new(cfg);
    let mut queues: Vec<DataQueue> = cfg
        .priorities
        .iter()
        .map(|chi| DataQueue::new(cfg.queue_init, *chi, cfg.storage_cap))
        .collect::<Result<_>>()?;
    let mut battery = EnergyQueue::new(cfg.battery_init, cfg.battery_capacity)?;
    let mut clock = Clock::start(cfg.slots_per_frame, cfg.frames)?;

    // Cost blindness only changes the purchase rule's view of the price.
    let mut energy_params = EnergyParams::from_config(cfg);
    if controller == Controller::CostBlind {
        energy_params.cost_weight = 0.0;
    }

    let mut slots: Vec<SlotRecord> = Vec::with_capacity(cfg.horizon() as usize);
    let mut frames: Vec<FrameRecord> = Vec::with_capacity(cfg.frames as usize);
    let mut peak_gain = 0.0f64;
    let mut admm_trace = None;
    let mut assignments = options.capture_assignments.then(Vec::new);
    let mut frame_decision = (0.0f64, 0.0f64, 0.0f64);

    loop {
        let env = sampler.sample(&clock);
        for row in &env.gains {
            for g in row {
                peak_gain = peak_gain.max(*g);
            }
        }

        // The per-slot energy inflow rate is decided at each frame start.
        if clock.is_frame_start() {
            let d = schedule_energy(
                battery.level(),
                env.harvest_cap,
                env.grid_price,
                &energy_params,
            )?;
            frame_decision = (d.purchased, d.harvested, d.psi);
        }
        // Apply the frame's inflow this slot, curtailed to what the battery
        // can still store (paid energy is curtailed before free harvest).
        let (rate_purchased, rate_harvested, psi) = frame_decision;
        let harvested = rate_harvested.min(battery.headroom());
        let purchased = rate_purchased.min(battery.headroom() - harvested);

        // Rate control.
        let backlogs: Vec<f64> = queues.iter().map(DataQueue::backlog).collect();
        let queue_weights: Vec<f64> = backlogs.iter().map(|q| q * cfg.slot_duration).collect();
        let utility_weights: Vec<f64> = cfg
            .priorities
            .iter()
            .map(|chi| cfg.utility_weight * chi)
            .collect();
        let problem = RateProblem::new(
            queue_weights,
            utility_weights,
            cfg.sum_rate_cap,
            cfg.first_block(),
            &cfg.solver,
        )?;
        let solution: RateSolution = if controller == Controller::OracleRates {
            RateSolution {
                rates: problem.kkt_rates(),
                iterations: 0,
                primal_residual: 0.0,
                dual_residual: 0.0,
                converged: true,
                bypassed: false,
            }
        } else if options.admm_trace_slot == Some(clock.slot()) {
            let (solution, trace) = problem.solve_traced();
            admm_trace = Some(trace);
            solution
        } else {
            problem.solve()
        };
        let rates = solution.rates.clone();

        // Minimum service rates that keep per-slot delay within target.
        // The delay relation lives in per-second units, hence the Mbit/s
        // to bit/s round trip.
        let targets: Vec<f64> = rates
            .iter()
            .map(|r| min_rate_for_delay(r * 1e6, cfg.delay_target).map(|v| v / 1e6))
            .collect::<Result<_>>()?;

        // Channel selection and power allocation.
        let evals = evaluate_pairs(
            &backlogs,
            battery.headroom(),
            &env.gains,
            &env.bandwidth_mhz,
            cfg.noise_power,
            cfg.slot_duration,
            cfg.power_cap,
        );
        let matching = if controller == Controller::RandomChannels {
            random_assignment(cfg.seed, clock.slot(), cfg.devices, cfg.channels, cfg.quota)
        } else {
            let step = default_price_step(&evals, cfg.price_step_fraction);
            match_channels(&evals, cfg.quota, step)
        };

        let mut powers: Vec<f64> = (0..cfg.channels)
            .map(|k| matching.owner[k].map_or(0.0, |n| evals[n][k].power))
            .collect();
        let power_scaled =
            scale_to_energy_budget(&mut powers, cfg.slot_duration, battery.level());
        let consumed: f64 = powers.iter().sum::<f64>() * cfg.slot_duration;

        let served: Vec<f64> = (0..cfg.devices)
            .map(|n| {
                let row: Vec<bool> = (0..cfg.channels)
                    .map(|k| matching.owner[k] == Some(n))
                    .collect();
                shannon_rate(&row, &powers, &env.gains[n], &env.bandwidth_mhz, cfg.noise_power)
            })
            .collect();

        let qoe_values: Vec<f64> = rates
            .iter()
            .zip(&cfg.priorities)
            .map(|(r, chi)| qoe(*r, *chi))
            .collect::<Result<_>>()?;
        let cost = env.grid_price * purchased + env.harvest_price * harvested;
        let objective = qoe_values.iter().sum::<f64>() - cfg.cost_weight * cost;
        let rate_target_met = check_rate_targets(&served, &targets);

        audit_slot(
            cfg,
            clock.slot(),
            &env,
            &backlogs,
            battery.level(),
            purchased,
            harvested,
            &rates,
            &matching,
            &powers,
        )?;

        if clock.is_frame_start() {
            frames.push(FrameRecord {
                frame: clock.frame(),
                start_slot: clock.slot(),
                grid_price: env.grid_price,
                harvest_cap: env.harvest_cap,
                battery_start: battery.level(),
                headroom: battery.headroom(),
                psi,
                purchased: rate_purchased,
                harvested: rate_harvested,
                purchased_total: 0.0,
                harvested_total: 0.0,
                energy_objective: energy_objective(
                    rate_purchased,
                    rate_harvested,
                    battery.level(),
                    env.grid_price,
                    env.harvest_price,
                    &EnergyParams::from_config(cfg),
                ),
                objective_sum: 0.0,
                drift_lhs: 0.0,
                drift_rhs: 0.0,
                drift_bound_ok: false,
            });
        }
        if let Some(frame) = frames.last_mut() {
            frame.objective_sum += objective;
            frame.purchased_total += purchased;
            frame.harvested_total += harvested;
        }

        slots.push(SlotRecord {
            slot: clock.slot(),
            frame: clock.frame(),
            frame_start: clock.is_frame_start(),
            queue_backlogs: backlogs,
            battery: battery.level(),
            admitted: rates.clone(),
            served: served.clone(),
            qoe: qoe_values,
            purchased,
            harvested,
            grid_price: env.grid_price,
            harvest_price: env.harvest_price,
            consumed,
            objective,
            cost,
            rate_target_met,
            solver_iterations: solution.iterations as u64,
            primal_residual: solution.primal_residual,
            dual_residual: solution.dual_residual,
            solver_converged: solution.converged,
            solver_bypassed: solution.bypassed,
            matching_rounds: matching.rounds,
            power_scaled,
        });

        if let Some(log) = assignments.as_mut() {
            log.push(AssignmentRecord {
                slot: clock.slot(),
                assigned: matching.assigned.clone(),
                prices: matching.prices.clone(),
            });
        }

        for (queue, (r, v)) in queues.iter_mut().zip(rates.iter().zip(&served)) {
            queue.update(*r, *v, cfg.slot_duration)?;
        }
        battery.update(consumed, purchased, harvested)?;

        if clock.is_last_slot() {
            break;
        }
        clock.advance()?;
    }

    let final_queues: Vec<f64> = queues.iter().map(DataQueue::backlog).collect();
    let final_battery = battery.level();
    let checks = check_drift_bound(&slots, &final_queues, final_battery, peak_gain, cfg);
    for (frame, check) in frames.iter_mut().zip(&checks) {
        frame.drift_lhs = check.lhs;
        frame.drift_rhs = check.rhs;
        frame.drift_bound_ok = check.ok;
    }

    Ok(RunOutput {
        slots,
        frames,
        final_queues,
        final_battery,
        peak_gain,
        queue_drops: queues.iter().map(DataQueue::dropped).collect(),
        conservation_residuals: queues.iter().map(DataQueue::conservation_residual).collect(),
        admm_trace,
        assignments,
    })
}

/// Random feasible assignment: each channel picks a uniformly random device
/// that still has quota. Respects quota and exclusivity by construction.
fn random_assignment(
    seed: u64,
    slot: u64,
    devices: usize,
    channels: usize,
    quota: usize,
) -> Matching {
    let mut rng = stream_rng(seed, STREAM_BASELINE, slot);
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); devices];
    let mut owner: Vec<Option<usize>> = vec![None; channels];
    for k in 0..channels {
        let candidates: Vec<usize> = (0..devices)
            .filter(|n| assigned[*n].len() < quota)
            .collect();
        if candidates.is_empty() {
            break;
        }
        let pick = candidates[rng.random_range(0..candidates.len())];
        assigned[pick].push(k);
        owner[k] = Some(pick);
    }
    Matching {
        assigned,
        owner,
        prices: vec![0.0; channels],
        rounds: 0,
    }
}

/// Re-checks every hard constraint from the raw slot decisions.
#[allow(clippy::too_many_arguments)]
fn audit_slot(
    cfg: &SimConfig,
    slot: u64,
    env: &EnvSample,
    _backlogs: &[f64],
    battery_level: f64,
    purchased: f64,
    harvested: f64,
    rates: &[f64],
    matching: &Matching,
    powers: &[f64],
) -> Result<()> {
    const TOL: f64 = 1e-9;
    let fail = |constraint: &'static str, details: alloc::string::String| {
        Err(Error::ContractViolation {
            slot,
            constraint,
            details,
        })
    };

    if harvested < -TOL || harvested > env.harvest_cap + TOL {
        return fail(
            "harvest_cap",
            format!("harvested {harvested} J outside [0, {}]", env.harvest_cap),
        );
    }
    if purchased < -TOL || purchased > cfg.purchase_cap + TOL {
        return fail(
            "purchase_cap",
            format!("purchased {purchased} J outside [0, {}]", cfg.purchase_cap),
        );
    }
    if battery_level + purchased + harvested > cfg.battery_capacity + TOL {
        return fail(
            "battery_capacity",
            format!(
                "{battery_level} + {purchased} + {harvested} J exceeds {} J",
                cfg.battery_capacity
            ),
        );
    }
    let consumed: f64 = powers.iter().sum::<f64>() * cfg.slot_duration;
    if consumed < -TOL || consumed > battery_level + TOL {
        return fail(
            "energy_causality",
            format!("consumed {consumed} J with only {battery_level} J stored"),
        );
    }
    for (k, p) in powers.iter().enumerate() {
        if *p < -TOL || *p > cfg.power_cap + TOL {
            return fail(
                "power_cap",
                format!("power {p} W on channel {k} outside [0, {}]", cfg.power_cap),
            );
        }
    }
    let mut seen = vec![false; cfg.channels];
    for (n, held) in matching.assigned.iter().enumerate() {
        if held.len() > cfg.quota {
            return fail(
                "quota",
                format!("device {n} holds {} channels, quota {}", held.len(), cfg.quota),
            );
        }
        for &k in held {
            if seen[k] {
                return fail(
                    "channel_exclusivity",
                    format!("channel {k} assigned to more than one device"),
                );
            }
            seen[k] = true;
            if matching.owner[k] != Some(n) {
                return fail(
                    "channel_exclusivity",
                    format!("assignment and ownership disagree on channel {k}"),
                );
            }
        }
    }
    let total_rate: f64 = rates.iter().sum();
    if total_rate > cfg.sum_rate_cap + cfg.solver.tol_primal + TOL {
        return fail(
            "sum_rate_cap",
            format!("admitted {total_rate} Mbit/s exceeds cap {}", cfg.sum_rate_cap),
        );
    }
    if rates.iter().any(|r| *r < -TOL) {
        return fail("sum_rate_cap", "negative admitted rate".into());
    }
    Ok(())
}

/// One frame's drift-bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftCheck {
    pub frame: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Quadratic queue potential `L = (Σ_n Q_n² + (capacity − E)²) / 2`.
fn potential(backlogs: &[f64], battery: f64, capacity: f64) -> f64 {
    let q: f64 = backlogs.iter().map(|q| q * q).sum();
    let headroom = capacity - battery;
    0.5 * (q + headroom * headroom)
}

/// The constant term `B` of the drift bound:
/// `N·(r_max² + v_max²)·T₀² + capacity² + (g_max + ϑ_max)²`, with `v_max`
/// the largest service rate realizable at the run's peak channel gain.
#[must_use]
pub fn drift_bound_constant(cfg: &SimConfig, peak_gain: f64) -> f64 {
    let r_max = cfg.sum_rate_cap;
    let v_max = cfg.quota as f64
        * cfg.bandwidth_mhz
        * libm::log2(1.0 + cfg.power_cap * peak_gain / cfg.noise_power);
    let theta_max = cfg.harvest_cap_max.min(cfg.battery_capacity);
    let inflow_max = cfg.purchase_cap + theta_max;
    cfg.devices as f64 * (r_max * r_max + v_max * v_max) * cfg.slot_duration * cfg.slot_duration
        + cfg.battery_capacity * cfg.battery_capacity
        + inflow_max * inflow_max
}

/// Evaluates the per-frame drift bound on a recorded trajectory.
///
/// LHS is the realized drift-minus-utility
/// `L(frame end) − L(frame start) − V·Σ_frame f(τ)`. RHS is the bound
/// `(B + (T−1)/2·(g_max+ϑ_max)²)·T/2 + D_energy + Σ_frame (D_rate − D_alloc)`
/// with `B = N·(r_max² + v_max²)·T₀² + capacity² + (g_max+ϑ_max)²`.
/// `r_max` is the admission cap; `v_max` is the largest service rate the run
/// could have realized (quota × bandwidth × log₂(1 + p_max·peak gain/σ²)),
/// using the run's realized peak gain since the fading law is unbounded.
#[must_use]
pub fn check_drift_bound(
    slots: &[SlotRecord],
    final_queues: &[f64],
    final_battery: f64,
    peak_gain: f64,
    cfg: &SimConfig,
) -> Vec<DriftCheck> {
    let t = cfg.slots_per_frame as usize;
    if t == 0 || slots.is_empty() {
        return Vec::new();
    }
    let t0 = cfg.slot_duration;
    let theta_max = cfg.harvest_cap_max.min(cfg.battery_capacity);
    let inflow_max = cfg.purchase_cap + theta_max;
    let b = drift_bound_constant(cfg, peak_gain);
    let constant = 0.5 * (b + 0.5 * (t as f64 - 1.0) * inflow_max * inflow_max) * t as f64;
    let params = EnergyParams::from_config(cfg);

    let mut checks = Vec::new();
    for (i, frame_slots) in slots.chunks(t).enumerate() {
        let start = &frame_slots[0];
        let l_start = potential(&start.queue_backlogs, start.battery, cfg.battery_capacity);
        let l_end = match slots.get((i + 1) * t) {
            Some(next) => potential(&next.queue_backlogs, next.battery, cfg.battery_capacity),
            None => potential(final_queues, final_battery, cfg.battery_capacity),
        };
        let sum_f: f64 = frame_slots.iter().map(|s| s.objective).sum();
        let lhs = l_end - l_start - cfg.utility_weight * sum_f;

        let d_energy = energy_objective(
            start.purchased,
            start.harvested,
            start.battery,
            start.grid_price,
            start.harvest_price,
            &params,
        );
        let mut d_rate_minus_alloc = 0.0;
        for s in frame_slots {
            let headroom = cfg.battery_capacity - s.battery;
            let d_rate: f64 = s
                .queue_backlogs
                .iter()
                .zip(&s.admitted)
                .zip(&s.qoe)
                .map(|((q, r), u)| q * r * t0 - cfg.utility_weight * u)
                .sum();
            let d_alloc: f64 = s
                .queue_backlogs
                .iter()
                .zip(&s.served)
                .map(|(q, v)| q * v * t0)
                .sum::<f64>()
                - headroom * s.consumed;
            d_rate_minus_alloc += d_rate - d_alloc;
        }
        let rhs = constant + d_energy + d_rate_minus_alloc;
        checks.push(DriftCheck {
            frame: i as u64 + 1,
            lhs,
            rhs,
            ok: lhs <= rhs + 1e-6 * (1.0 + libm::fabs(rhs)),
        });
    }
    checks
}

/// One row of the stability-vs-utility tradeoff table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffRow {
    pub utility_weight: f64,
    /// Time-average of the total data backlog, Mbit.
    pub avg_backlog: f64,
    /// Time-average of the network objective.
    pub avg_utility: f64,
}

/// Runs the controller over a grid of drift-vs-utility weights (common seed)
/// and tabulates average backlog and average objective per weight.
pub fn tradeoff_sweep(
    base: &SimConfig,
    controller: Controller,
    weights: &[f64],
) -> Result<Vec<TradeoffRow>> {
    if weights.len() < 3 {
        return Err(Error::InsufficientGrid);
    }
    let mut rows = Vec::with_capacity(weights.len());
    for &v in weights {
        let cfg = base.clone().with_utility_weight(v);
        let out = run(&cfg, controller)?;
        let n = out.slots.len() as f64;
        let avg_backlog = out
            .slots
            .iter()
            .map(|s| s.queue_backlogs.iter().sum::<f64>())
            .sum::<f64>()
            / n;
        let avg_utility = out.slots.iter().map(|s| s.objective).sum::<f64>() / n;
        rows.push(TradeoffRow {
            utility_weight: v,
            avg_backlog,
            avg_utility,
        });
    }
    Ok(rows)
}
