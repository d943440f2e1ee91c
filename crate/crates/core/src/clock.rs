//! The two-timescale clock: 1-based data slots grouped into energy frames.
//!
//! Slot `τ` runs from 1 to `M·T` where `T` is the number of slots per frame
//! and `M` the number of frames. Frame `m = ⌈τ/T⌉`; slot `τ` opens frame `m`
//! exactly when `τ = (m−1)·T + 1`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Clock {
    slot: u64,
    slots_per_frame: u64,
    frame_count: u64,
}

impl Clock {
    /// Starts at slot 1 of frame 1.
    pub fn start(slots_per_frame: u64, frame_count: u64) -> Result<Self> {
        if slots_per_frame == 0 || frame_count == 0 {
            return Err(Error::InvalidInput(alloc::format!(
                "clock needs at least one slot per frame and one frame, got T={slots_per_frame}, M={frame_count}"
            )));
        }
        Ok(Self {
            slot: 1,
            slots_per_frame,
            frame_count,
        })
    }

    /// Current slot index `τ` (1-based).
    #[must_use]
    pub fn slot(&self) -> u64 {
        self.slot
    }

    /// Current frame index `m = ⌈τ/T⌉` (1-based).
    #[must_use]
    pub fn frame(&self) -> u64 {
        (self.slot - 1) / self.slots_per_frame + 1
    }

    /// Position of the current slot within its frame, 1-based.
    #[must_use]
    pub fn slot_in_frame(&self) -> u64 {
        (self.slot - 1) % self.slots_per_frame + 1
    }

    /// True exactly on the first slot of a frame, `τ = (m−1)·T + 1`.
    #[must_use]
    pub fn is_frame_start(&self) -> bool {
        (self.slot - 1).is_multiple_of(self.slots_per_frame)
    }

    /// True on the last slot of a frame.
    #[must_use]
    pub fn is_frame_end(&self) -> bool {
        self.slot.is_multiple_of(self.slots_per_frame)
    }

    /// Total number of slots, `M·T`.
    #[must_use]
    pub fn horizon(&self) -> u64 {
        self.slots_per_frame * self.frame_count
    }

    /// True on the final slot of the horizon.
    #[must_use]
    pub fn is_last_slot(&self) -> bool {
        self.slot == self.horizon()
    }

    /// Moves to the next slot. Rejects advancing past `M·T`.
    pub fn advance(&mut self) -> Result<()> {
        if self.slot >= self.horizon() {
            return Err(Error::EndOfHorizon);
        }
        self.slot += 1;
        Ok(())
    }
}
