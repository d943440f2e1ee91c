//! Online two-timescale resource allocation for a base station that serves
//! `N` devices over `K` channels and draws power from both a rechargeable
//! battery (fed by energy harvesting) and the grid.
//!
//! Time is split into two scales: short *data slots* over which channel
//! fading and data arrivals change, grouped into longer *energy frames* over
//! which harvesting capacity and electricity prices change. The controller
//! keeps per-device data queues and one battery-level energy queue, and each
//! slot makes four decisions:
//!
//! - energy management (frame starts only): how much harvested energy to
//!   store and how much grid energy to buy, in closed form ([`energy`]);
//! - rate control: how much data to admit per device under a network-wide
//!   sum-rate cap, via a two-block ADMM splitting ([`rate`]);
//! - channel selection: which device gets which channels, via price-based
//!   one-to-many matching with quotas ([`matching`]);
//! - power allocation: transmit power per matched pair, in closed form
//!   ([`matching::optimal_power`]).
//!
//! The decision rules all come from opportunistically minimizing a
//! drift-minus-utility bound built on the quadratic potential
//! `L = (Σ_n Q_n² + (E_max − E)²) / 2`, so queue stability and long-run
//! utility are traded off through a single weight. [`orchestrator`] wires the
//! loop together, runs the baseline controllers, and audits every constraint
//! independently of the decision modules.
//!
//! The crate is `no_std` (with `alloc`): it performs no IO and owns no global
//! state, so many simulations can run in parallel. All randomness flows from
//! one master seed through per-process streams ([`env`]), making every run
//! bit-reproducible. The companion CLI crate adds config files, CSV/JSON
//! emission, and the acceptance harness.
//!
//! Internal unit conventions, chosen once and used everywhere:
//!
//! - data: megabits; rates: Mbit/s; bandwidth: MHz
//! - energy: joules; power: watts; time: seconds
//! - prices: configured in RMB/kWh, converted to RMB/J internally

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod clock;
pub mod config;
pub mod energy;
pub mod env;
pub mod error;
pub mod matching;
pub mod metrics;
pub mod orchestrator;
pub mod queueing;
pub mod rate;

pub use clock::Clock;
pub use config::{PriceConfig, PriceModel, SimConfig, SolverConfig};
pub use error::{Error, Result};
pub use orchestrator::{Controller, RunOutput};

/// Joules per kilowatt-hour; converts configured RMB/kWh prices to RMB/J.
pub const JOULES_PER_KWH: f64 = 3.6e6;
