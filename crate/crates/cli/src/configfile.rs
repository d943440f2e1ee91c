//! Scenario config files: flat `key = value` lines with dotted sections,
//! `#` comments, and line-precise error reporting.

use std::fmt;

use ttra_core::config::{PriceModel, SimConfig};

/// A parse failure with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFileError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigFileError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigFileError> {
    Err(ConfigFileError {
        line,
        message: message.into(),
    })
}

/// Parses a scenario file on top of the default scenario: keys override
/// defaults, unknown keys are rejected.
pub fn parse(text: &str) -> Result<SimConfig, ConfigFileError> {
    let mut cfg = SimConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(line_no, format!("expected `key = value`, got `{line}`"));
        };
        let key = key.trim();
        let value = value.trim();
        if value.is_empty() {
            return err(line_no, format!("`{key}` has no value"));
        }
        apply(&mut cfg, key, value).map_err(|message| ConfigFileError {
            line: line_no,
            message,
        })?;
    }
    Ok(cfg)
}

fn parse_f64(key: &str, value: &str) -> Result<f64, String> {
    value
        .parse::<f64>()
        .map_err(|_| format!("`{key}` expects a number, got `{value}`"))
}

fn parse_u64(key: &str, value: &str) -> Result<u64, String> {
    value
        .parse::<u64>()
        .map_err(|_| format!("`{key}` expects a nonnegative integer, got `{value}`"))
}

fn parse_usize(key: &str, value: &str) -> Result<usize, String> {
    value
        .parse::<usize>()
        .map_err(|_| format!("`{key}` expects a nonnegative integer, got `{value}`"))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|item| {
            item.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{key}` expects comma-separated numbers, got `{item}`"))
        })
        .collect()
}

fn apply(cfg: &mut SimConfig, key: &str, value: &str) -> Result<(), String> {
    match key {
        "sim.devices" => cfg.devices = parse_usize(key, value)?,
        "sim.channels" => cfg.channels = parse_usize(key, value)?,
        "sim.frames" => cfg.frames = parse_u64(key, value)?,
        "sim.slots_per_frame" => cfg.slots_per_frame = parse_u64(key, value)?,
        "sim.slot_duration_s" => cfg.slot_duration = parse_f64(key, value)?,
        "sim.seed" => cfg.seed = parse_u64(key, value)?,
        "control.utility_weight" => cfg.utility_weight = parse_f64(key, value)?,
        "control.cost_weight" => cfg.cost_weight = parse_f64(key, value)?,
        "control.quota" => cfg.quota = parse_usize(key, value)?,
        "device.priorities" => cfg.priorities = parse_list(key, value)?,
        "device.delay_target_s" => cfg.delay_target = parse_f64(key, value)?,
        "device.queue_init_mbit" => cfg.queue_init = parse_f64(key, value)?,
        "device.storage_cap_mbit" => cfg.storage_cap = parse_f64(key, value)?,
        "rate.sum_cap_mbps" => cfg.sum_rate_cap = parse_f64(key, value)?,
        "energy.battery_capacity_j" => cfg.battery_capacity = parse_f64(key, value)?,
        "energy.battery_init_j" => cfg.battery_init = parse_f64(key, value)?,
        "energy.purchase_cap_j" => cfg.purchase_cap = parse_f64(key, value)?,
        "energy.harvest_cap_max_j" => cfg.harvest_cap_max = parse_f64(key, value)?,
        "radio.bandwidth_mhz" => cfg.bandwidth_mhz = parse_f64(key, value)?,
        "radio.noise_w" => cfg.noise_power = parse_f64(key, value)?,
        "radio.power_cap_w" => cfg.power_cap = parse_f64(key, value)?,
        "radio.large_scale_gain" => cfg.large_scale_gain = parse_f64(key, value)?,
        "price.model" => {
            cfg.price.model = match value {
                "sinusoid" => PriceModel::Sinusoid,
                "two_tier" => PriceModel::TwoTier,
                "constant" => PriceModel::Constant,
                other => {
                    return Err(format!(
                        "`price.model` must be sinusoid, two_tier, or constant, got `{other}`"
                    ))
                }
            }
        }
        "price.min_rmb_per_kwh" => cfg.price.min_rmb_per_kwh = parse_f64(key, value)?,
        "price.max_rmb_per_kwh" => cfg.price.max_rmb_per_kwh = parse_f64(key, value)?,
        "price.period_frames" => cfg.price.period_frames = parse_u64(key, value)?,
        "price.harvest_rmb_per_kwh" => cfg.price.harvest_rmb_per_kwh = parse_f64(key, value)?,
        "solver.penalty" => cfg.solver.penalty = parse_f64(key, value)?,
        "solver.tol_primal" => cfg.solver.tol_primal = parse_f64(key, value)?,
        "solver.tol_dual" => cfg.solver.tol_dual = parse_f64(key, value)?,
        "solver.max_iterations" => cfg.solver.max_iterations = parse_usize(key, value)?,
        "solver.first_block" => cfg.solver.first_block = parse_usize(key, value)?,
        "matching.price_step_fraction" => cfg.price_step_fraction = parse_f64(key, value)?,
        other => return Err(format!("unknown key `{other}`")),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_an_empty_file() {
        assert_eq!(parse("").unwrap(), SimConfig::default());
        assert_eq!(parse("# just a comment\n\n").unwrap(), SimConfig::default());
    }

    #[test]
    fn overrides_apply() {
        let cfg = parse("sim.seed = 42\ncontrol.quota = 3\ndevice.priorities = 0.5, 0.5\nsim.devices = 2\n").unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.quota, 3);
        assert_eq!(cfg.priorities, vec![0.5, 0.5]);
    }

    #[test]
    fn unknown_key_reports_the_line() {
        let e = parse("sim.seed = 1\nbogus.key = 2\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("bogus.key"));
    }

    #[test]
    fn bad_number_reports_the_line() {
        let e = parse("energy.battery_capacity_j = five\n").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.message.contains("battery_capacity"));
    }

    #[test]
    fn missing_equals_is_rejected() {
        let e = parse("sim.seed 1\n").unwrap_err();
        assert_eq!(e.line, 1);
    }

    #[test]
    fn inline_comments_are_stripped() {
        let cfg = parse("sim.seed = 9 # master seed\n").unwrap();
        assert_eq!(cfg.seed, 9);
    }
}
