//! Pseudorandom binary sequence from a 4-stage shift register.
//!
//! Feedback is the modulo-2 sum of stages 4 and 3 (characteristic polynomial
//! x⁴ + x³ + 1, primitive over GF(2)), so any nonzero seed cycles through all
//! 15 nonzero register states. The output bit is the content of stage 4.

use crate::error::{Error, Result};

pub const PRBS_LENGTH: usize = 15;
pub const DEFAULT_SEED: u8 = 0b1111;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lfsr4 {
    // bit 0 = stage 1 … bit 3 = stage 4
    state: u8,
}

impl Lfsr4 {
    pub fn new(seed: u8) -> Result<Self> {
        let state = seed & 0x0F;
        if state == 0 || seed > 0x0F {
            return Err(Error::InvalidArgument(format!("LFSR seed must be a nonzero 4-bit value, got {:#06b}", seed)));
        }
        Ok(Self { state })
    }

    pub fn state(&self) -> u8 {
        self.state
    }

    /// Clock once; returns the bit shifted out of stage 4.
    pub fn clock(&mut self) -> u8 {
        let out = (self.state >> 3) & 1;
        let feedback = ((self.state >> 3) ^ (self.state >> 2)) & 1;
        self.state = ((self.state << 1) | feedback) & 0x0F;
        out
    }
}

/// One full period of the maximal-length sequence.
pub fn prbs15(seed: u8) -> Result<[u8; PRBS_LENGTH]> {
    let mut reg = Lfsr4::new(seed)?;
    let mut out = [0u8; PRBS_LENGTH];
    for bit in out.iter_mut() {
        *bit = reg.clock();
    }
    Ok(out)
}
