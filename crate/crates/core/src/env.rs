//! Exogenous stochastic processes: channel fading, harvesting caps, and
//! electricity prices, all derived deterministically from one master seed.
//!
//! Slot-scale processes (fading) are redrawn every slot; frame-scale
//! processes (harvest cap, prices) are functions of the frame index alone, so
//! every slot of a frame observes identical values. Sampling is stateless:
//! the draw for (seed, slot) never depends on which slots were sampled
//! before, which makes runs reproducible and samples randomly accessible.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::clock::Clock;
use crate::config::{PriceModel, SimConfig};
use crate::JOULES_PER_KWH;

/// One slot's exogenous state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSample {
    /// Linear power gains, `gains[n][k] > 0`.
    pub gains: Vec<Vec<f64>>,
    /// Cap on harvestable energy this frame, J.
    pub harvest_cap: f64,
    /// Grid electricity price, RMB/J.
    pub grid_price: f64,
    /// Harvested-energy price, RMB/J.
    pub harvest_price: f64,
    /// Per-channel bandwidth, MHz.
    pub bandwidth_mhz: Vec<f64>,
}

const STREAM_FADING: u64 = 1;
const STREAM_HARVEST: u64 = 2;
const STREAM_PRICE: u64 = 3;
pub(crate) const STREAM_BASELINE: u64 = 4;

/// splitmix64 finalizer; decorrelates derived seeds.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn stream_rng(master: u64, stream: u64, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(mix(mix(master, stream), index))
}

/// Samples the environment for a fixed scenario.
#[derive(Debug, Clone)]
pub struct EnvSampler {
    devices: usize,
    channels: usize,
    slots_per_frame: u64,
    large_scale_gain: f64,
    harvest_cap_max: f64,
    bandwidth_mhz: f64,
    price_model: PriceModel,
    price_min: f64,
    price_max: f64,
    price_period: u64,
    harvest_price: f64,
    seed: u64,
    /// Sinusoid phase in [0, 2π) or two-tier frame offset, drawn once per seed.
    price_phase: f64,
    tier_offset: u64,
}

impl EnvSampler {
    #[must_use]
    pub fn new(cfg: &SimConfig) -> Self {
        let mut price_rng = stream_rng(cfg.seed, STREAM_PRICE, 0);
        let price_phase = price_rng.random::<f64>() * 2.0 * core::f64::consts::PI;
        let tier_offset = price_rng.random_range(0..cfg.price.period_frames.max(1));
        Self {
            devices: cfg.devices,
            channels: cfg.channels,
            slots_per_frame: cfg.slots_per_frame,
            large_scale_gain: cfg.large_scale_gain,
            harvest_cap_max: cfg.harvest_cap_max,
            bandwidth_mhz: cfg.bandwidth_mhz,
            price_model: cfg.price.model,
            price_min: cfg.price.min_rmb_per_kwh,
            price_max: cfg.price.max_rmb_per_kwh,
            price_period: cfg.price.period_frames,
            harvest_price: cfg.price.harvest_rmb_per_kwh / JOULES_PER_KWH,
            seed: cfg.seed,
            price_phase,
            tier_offset,
        }
    }

    /// Grid price for frame `m`, RMB/kWh.
    #[must_use]
    pub fn grid_price_rmb_per_kwh(&self, frame: u64) -> f64 {
        match self.price_model {
            PriceModel::Sinusoid => {
                let angle = 2.0 * core::f64::consts::PI * ((frame - 1) as f64)
                    / (self.price_period as f64)
                    + self.price_phase;
                self.price_min + (self.price_max - self.price_min) * (1.0 + libm::sin(angle)) / 2.0
            }
            PriceModel::TwoTier => {
                let pos = (frame - 1 + self.tier_offset) % self.price_period;
                if pos < self.price_period / 2 || self.price_period == 1 {
                    self.price_min
                } else {
                    self.price_max
                }
            }
            PriceModel::Constant => self.price_min,
        }
    }

    /// Harvesting cap for frame `m`, J; uniform on [0, harvest_cap_max].
    #[must_use]
    pub fn harvest_cap(&self, frame: u64) -> f64 {
        let mut rng = stream_rng(self.seed, STREAM_HARVEST, frame);
        rng.random::<f64>() * self.harvest_cap_max
    }

    /// Draws the full environment for the clock's slot.
    #[must_use]
    pub fn sample(&self, clock: &Clock) -> EnvSample {
        let frame = clock.frame();
        let mut fading = stream_rng(self.seed, STREAM_FADING, clock.slot());
        let gains = (0..self.devices)
            .map(|_| {
                (0..self.channels)
                    .map(|_| {
                        // Rayleigh amplitude fading = exponential power gain;
                        // 1−u keeps the log argument strictly positive.
                        let u: f64 = fading.random();
                        let small_scale = -libm::log(1.0 - u);
                        (self.large_scale_gain * small_scale).max(f64::MIN_POSITIVE)
                    })
                    .collect()
            })
            .collect();
        EnvSample {
            gains,
            harvest_cap: self.harvest_cap(frame),
            grid_price: self.grid_price_rmb_per_kwh(frame) / JOULES_PER_KWH,
            harvest_price: self.harvest_price,
            bandwidth_mhz: vec![self.bandwidth_mhz; self.channels],
        }
    }

    #[must_use]
    pub fn slots_per_frame(&self) -> u64 {
        self.slots_per_frame
    }
}
