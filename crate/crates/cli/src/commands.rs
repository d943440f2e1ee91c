//! Command implementations behind the CLI: single runs, sweeps, controller
//! comparisons, and the acceptance check.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use ttra_core::orchestrator::{run_with_options, Controller, RunOptions};
use ttra_core::{Error as CoreError, SimConfig};

use crate::acceptance;
use crate::configfile;
use crate::output;

/// The preset scenario shipped with the binary.
pub const DEFAULT_PRESET: &str = include_str!("../presets/tableII.cfg");

/// Process outcomes, mapped to exit codes by `main`.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or usage (exit 1).
    Config(String),
    /// A constraint audit tripped mid-run (exit 2).
    Contract(String),
    /// The acceptance suite reported failures (exit 3).
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Contract(_) => 2,
            CliError::Acceptance(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Contract(m) | CliError::Acceptance(m) => m,
        }
    }
}

fn core_error(e: CoreError) -> CliError {
    match e {
        CoreError::Config(_) | CoreError::InvalidInput(_) => CliError::Config(e.to_string()),
        _ => CliError::Contract(e.to_string()),
    }
}

fn io_error(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{context}: {e}"))
}

pub fn parse_controller(name: &str) -> Result<Controller, CliError> {
    match name {
        "proposed" => Ok(Controller::Proposed),
        "baseline1" => Ok(Controller::RandomChannels),
        "baseline2" => Ok(Controller::CostBlind),
        "baseline3" => Ok(Controller::OracleRates),
        other => Err(CliError::Config(format!(
            "unknown controller `{other}` (expected proposed, baseline1, baseline2, or baseline3)"
        ))),
    }
}

/// Loads a scenario file (or the embedded preset) and applies overrides.
pub fn load_config(
    path: Option<&Path>,
    seed: Option<u64>,
    slots: Option<u64>,
) -> Result<SimConfig, CliError> {
    let text = match path {
        Some(p) => fs::read_to_string(p)
            .map_err(|e| io_error(&format!("cannot read config {}", p.display()), e))?,
        None => DEFAULT_PRESET.to_string(),
    };
    let mut cfg = configfile::parse(&text).map_err(|e| {
        let name = path.map_or("<preset>".into(), |p| p.display().to_string());
        CliError::Config(format!("{name}:{e}"))
    })?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(slots) = slots {
        if slots == 0 || slots % cfg.slots_per_frame != 0 {
            return Err(CliError::Config(format!(
                "--slots {slots} must be a positive multiple of slots_per_frame {}",
                cfg.slots_per_frame
            )));
        }
        cfg.frames = slots / cfg.slots_per_frame;
    }
    for warning in cfg.validate().map_err(core_error)? {
        eprintln!("warning: {warning}");
    }
    Ok(cfg)
}

pub struct RunArgs {
    pub config: Option<PathBuf>,
    pub controller: String,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub slots: Option<u64>,
    pub admm_trace: bool,
    pub dump_assignments: bool,
    pub quiet: bool,
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref(), args.seed, args.slots)?;
    let controller = parse_controller(&args.controller)?;
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(controller.name()));
    fs::create_dir_all(&out_dir)
        .map_err(|e| io_error(&format!("cannot create {}", out_dir.display()), e))?;

    let options = RunOptions {
        admm_trace_slot: args.admm_trace.then(|| cfg.horizon()),
        capture_assignments: args.dump_assignments,
    };
    let output = run_with_options(&cfg, controller, options).map_err(core_error)?;

    let summary = output::build_summary(&cfg, controller.name(), &output);
    output::write_slots_csv(&out_dir.join("slots.csv"), &cfg, &output)
        .map_err(|e| io_error("writing slots.csv", e))?;
    output::write_frames_csv(&out_dir.join("frames.csv"), &output)
        .map_err(|e| io_error("writing frames.csv", e))?;
    output::write_summary(&out_dir.join("summary.json"), &summary)
        .map_err(|e| io_error("writing summary.json", e))?;
    if let Some(trace) = &output.admm_trace {
        output::write_admm_trace_csv(&out_dir.join("admm_trace.csv"), trace)
            .map_err(|e| io_error("writing admm_trace.csv", e))?;
    }
    if let Some(assignments) = &output.assignments {
        output::write_assignments_csv(&out_dir.join("assignments.csv"), &cfg, assignments)
            .map_err(|e| io_error("writing assignments.csv", e))?;
    }

    if !args.quiet {
        println!(
            "{}: {} slots, avg QoE {:.4}, cost {:.6e} RMB, outputs in {}",
            controller.name(),
            output.slots.len(),
            summary.network.avg_qoe_total,
            summary.network.cumulative_cost_rmb,
            out_dir.display()
        );
    }
    Ok(())
}

pub struct SweepArgs {
    pub config: Option<PathBuf>,
    pub v_grid: Option<String>,
    pub seeds: Option<String>,
    pub controllers: Option<String>,
    pub out: Option<PathBuf>,
    pub slots: Option<u64>,
}

fn parse_f64_list(name: &str, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|item| {
            item.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("{name}: `{item}` is not a number")))
        })
        .collect()
}

fn parse_u64_list(name: &str, text: &str) -> Result<Vec<u64>, CliError> {
    text.split(',')
        .map(|item| {
            item.trim()
                .parse::<u64>()
                .map_err(|_| CliError::Config(format!("{name}: `{item}` is not an integer")))
        })
        .collect()
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let base = load_config(args.config.as_deref(), None, args.slots)?;
    let weights = match &args.v_grid {
        Some(text) => parse_f64_list("--v-grid", text)?,
        None => vec![base.utility_weight],
    };
    let seeds = match &args.seeds {
        Some(text) => parse_u64_list("--seeds", text)?,
        None => vec![base.seed],
    };
    let controllers: Vec<Controller> = match &args.controllers {
        Some(text) => text
            .split(',')
            .map(|name| parse_controller(name.trim()))
            .collect::<Result<_, _>>()?,
        None => vec![Controller::Proposed],
    };
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("out/sweep"));
    fs::create_dir_all(&out_dir)
        .map_err(|e| io_error(&format!("cannot create {}", out_dir.display()), e))?;

    let mut jobs = Vec::new();
    for &v in &weights {
        for &seed in &seeds {
            for &controller in &controllers {
                jobs.push((v, seed, controller));
            }
        }
    }
    let results: Vec<Result<String, CliError>> = jobs
        .par_iter()
        .map(|&(v, seed, controller)| {
            let mut cfg = base.clone().with_seed(seed);
            cfg.utility_weight = v;
            let output = ttra_core::orchestrator::run(&cfg, controller).map_err(core_error)?;
            let summary = output::build_summary(&cfg, controller.name(), &output);
            let label = format!("v{v}_seed{seed}_{}", controller.name());
            let dir = out_dir.join(&label);
            fs::create_dir_all(&dir)
                .map_err(|e| io_error(&format!("cannot create {}", dir.display()), e))?;
            output::write_summary(&dir.join("summary.json"), &summary)
                .map_err(|e| io_error("writing summary.json", e))?;
            let mut row = String::new();
            write!(
                row,
                "{v},{seed},{},{},{},{},{}",
                controller.name(),
                summary.network.avg_total_backlog_mbit,
                summary.network.avg_objective,
                summary.network.avg_qoe_total,
                summary.network.cumulative_cost_rmb,
            )
            .unwrap();
            Ok(row)
        })
        .collect();

    let mut table = String::from(
        "utility_weight,seed,controller,avg_total_backlog_mbit,avg_objective,avg_qoe_total,cumulative_cost_rmb\n",
    );
    for result in results {
        table.push_str(&result?);
        table.push('\n');
    }
    let table_path = out_dir.join("sweep.csv");
    fs::write(&table_path, table).map_err(|e| io_error("writing sweep.csv", e))?;
    println!(
        "swept {} weights x {} seeds x {} controllers -> {}",
        weights.len(),
        seeds.len(),
        controllers.len(),
        table_path.display()
    );
    Ok(())
}

/// Resolves a compare operand: an explicit summary path, or a controller
/// name under the output directory.
fn resolve_summary(operand: &str, out_dir: &Path) -> Result<output::Summary, CliError> {
    let direct = Path::new(operand);
    let path = if direct.is_file() {
        direct.to_path_buf()
    } else {
        let candidate = out_dir.join(operand).join("summary.json");
        if !candidate.is_file() {
            return Err(CliError::Config(format!(
                "no summary for `{operand}`: run `ttra run --controller {operand}` first (looked at {})",
                candidate.display()
            )));
        }
        candidate
    };
    output::read_summary(&path).map_err(|e| io_error(&format!("reading {}", path.display()), e))
}

fn percent_below(reference: f64, value: f64) -> f64 {
    if reference == 0.0 {
        0.0
    } else {
        (reference - value) / reference * 100.0
    }
}

#[derive(serde::Serialize)]
struct CompareReport {
    schema_version: u32,
    a: String,
    b: String,
    cost_reduction_pct: f64,
    qoe_delta_pct: f64,
    par_backlog_reduction_pct: f64,
    par_admitted_reduction_pct: f64,
}

pub fn cmd_compare(a: &str, b: &str, out: Option<&Path>) -> Result<(), CliError> {
    let out_dir = out.map_or_else(|| PathBuf::from("out"), Path::to_path_buf);
    let sa = resolve_summary(a, &out_dir)?;
    let sb = resolve_summary(b, &out_dir)?;

    let report = CompareReport {
        schema_version: output::SCHEMA_VERSION,
        a: sa.controller.clone(),
        b: sb.controller.clone(),
        cost_reduction_pct: percent_below(
            sb.network.cumulative_cost_rmb,
            sa.network.cumulative_cost_rmb,
        ),
        qoe_delta_pct: -percent_below(sb.network.avg_qoe_total, sa.network.avg_qoe_total),
        par_backlog_reduction_pct: percent_below(
            output::mean_par_backlog(&sb),
            output::mean_par_backlog(&sa),
        ),
        par_admitted_reduction_pct: percent_below(
            output::mean_par_admitted(&sb),
            output::mean_par_admitted(&sa),
        ),
    };

    println!("{} vs {}:", report.a, report.b);
    println!("  energy cost reduction: {:.2}%", report.cost_reduction_pct);
    println!("  QoE delta:             {:+.2}%", report.qoe_delta_pct);
    println!(
        "  backlog PAR reduction: {:.2}%",
        report.par_backlog_reduction_pct
    );
    println!(
        "  arrival PAR reduction: {:.2}%",
        report.par_admitted_reduction_pct
    );
    let path = out_dir.join(format!("compare_{}_vs_{}.json", report.a, report.b));
    let json = serde_json::to_string_pretty(&report).map_err(|e| io_error("serializing", e))?;
    fs::write(&path, json + "\n").map_err(|e| io_error("writing compare report", e))?;
    println!("  report: {}", path.display());
    Ok(())
}

pub fn cmd_check() -> Result<(), CliError> {
    let outcomes = acceptance::run_all();
    let mut failed = 0usize;
    for outcome in &outcomes {
        println!("{outcome}");
        if !outcome.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CliError::Acceptance(format!(
            "{failed} of {} acceptance criteria failed",
            outcomes.len()
        )));
    }
    println!("all {} acceptance criteria passed", outcomes.len());
    Ok(())
}
