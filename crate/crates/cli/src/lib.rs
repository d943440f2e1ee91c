//! Experiment harness around the simulation core: scenario files, CSV/JSON
//! emission, sweeps, controller comparisons, and the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod configfile;
pub mod output;
