//! Implicit communication: bits carried by deliberate collisions.
//!
//! A sender transmits `1` by pulling the receiver's communication arm (the
//! receiver sits there and observes a collision) and `0` by pulling its own.
//! Values in `[0, 1]` travel as truncated fixed-point codes, MSB first.

use crate::error::{Error, Result};

/// Arm the sender pulls to transmit `bit`.
pub fn sic_send_bit(bit: bool, own_comm_arm: usize, receiver_comm_arm: usize) -> Result<usize> {
    if own_comm_arm == receiver_comm_arm {
        return Err(Error::config(
            "comm_arm",
            "sender and receiver share a communication arm",
        ));
    }
    Ok(if bit { receiver_comm_arm } else { own_comm_arm })
}

/// Truncates `value` to a `bits`-bit fixed-point code `floor(value 2^bits)`.
///
/// Values at or above 1 map to the largest code.
pub fn quantize(value: f64, bits: u32) -> u64 {
    let scale = (1u64 << bits) as f64;
    let max = (1u64 << bits) - 1;
    if !(value > 0.0) {
        return 0;
    }
    ((value * scale).floor() as u64).min(max)
}

/// Code value of `quantize` as a real in `[0, 1)`.
pub fn dequantize(code: u64, bits: u32) -> f64 {
    code as f64 / (1u64 << bits) as f64
}

pub fn encode_bits(code: u64, bits: u32) -> Vec<bool> {
    (0..bits).rev().map(|b| (code >> b) & 1 == 1).collect()
}

pub fn decode_bits(flags: &[bool]) -> u64 {
    flags.iter().fold(0, |acc, &f| (acc << 1) | u64::from(f))
}

/// Reads collision flags (collision = 1) as a binary fraction `0.b1 b2 ...`.
pub fn sic_decode_bits(collision_flags: &[bool]) -> f64 {
    dequantize(decode_bits(collision_flags), collision_flags.len() as u32)
}

/// Bits needed to write any value in `0..count`.
pub(crate) fn width_for(count: usize) -> u32 {
    let mut w = 1;
    while (1usize << w) < count {
        w += 1;
    }
    w
}
