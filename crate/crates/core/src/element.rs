//! Floating-point element types a run can be instantiated with.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Sub};

/// Storage and accumulation precision of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub fn element_size(self) -> usize {
        match self {
            Precision::Single => 4,
            Precision::Double => 8,
        }
    }

    /// Explicit mantissa bits including the hidden bit.
    pub fn mantissa_bits(self) -> u32 {
        match self {
            Precision::Single => 24,
            Precision::Double => 53,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Precision::Single => "single",
            Precision::Double => "double",
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Precision::Single),
            "double" => Ok(Precision::Double),
            other => Err(format!("unknown precision '{other}' (expected single or double)")),
        }
    }
}

impl Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A real scalar usable as a vector element.
///
/// Only `f32` and `f64` implement this. All accumulation happens in `Self`;
/// there is no widening.
pub trait Element:
    Copy
    + Send
    + Sync
    + Default
    + PartialEq
    + PartialOrd
    + Debug
    + Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + 'static
{
    const PRECISION: Precision;
    const ZERO: Self;
    const ONE: Self;
    const TWO: Self;
    const THREE_HALVES: Self;

    /// Numeric minimum. Callers guarantee neither argument is NaN.
    fn min_elem(self, other: Self) -> Self;

    fn from_u64_exact(v: u64) -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// Raw bit pattern widened to 64 bits (single precision zero-extended).
    fn bits_u64(self) -> u64;

    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Element for f64 {
    const PRECISION: Precision = Precision::Double;
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    const TWO: Self = 2.0;
    const THREE_HALVES: Self = 1.5;

    #[inline(always)]
    fn min_elem(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn from_u64_exact(v: u64) -> Self {
        v as f64
    }

    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn bits_u64(self) -> u64 {
        self.to_bits()
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"))
    }
}

impl Element for f32 {
    const PRECISION: Precision = Precision::Single;
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    const TWO: Self = 2.0;
    const THREE_HALVES: Self = 1.5;

    #[inline(always)]
    fn min_elem(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn from_u64_exact(v: u64) -> Self {
        v as f32
    }

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn bits_u64(self) -> u64 {
        self.to_bits() as u64
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes[..4].try_into().expect("4 bytes"))
    }
}

pub(crate) fn encode_slice<T: Element>(values: &[T]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * T::PRECISION.element_size());
    for &v in values {
        v.write_le(&mut out);
    }
    out
}

pub(crate) fn decode_slice<T: Element>(bytes: &[u8]) -> Vec<T> {
    bytes
        .chunks_exact(T::PRECISION.element_size())
        .map(T::read_le)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_matches_numeric_min() {
        assert_eq!(2.0f64.min_elem(3.0), 2.0);
        assert_eq!(3.0f32.min_elem(2.0), 2.0);
        assert_eq!(0.0f64.min_elem(0.0), 0.0);
    }

    #[test]
    fn single_bits_zero_extended() {
        assert_eq!(1.0f32.bits_u64(), 0x3f80_0000);
        assert_eq!(1.0f64.bits_u64(), 0x3ff0_0000_0000_0000);
    }

    #[test]
    fn le_codec() {
        let xs = [0.5f32, 2.0, 7.25];
        assert_eq!(decode_slice::<f32>(&encode_slice(&xs)), xs);
        let ys = [0.1f64, 1e300];
        assert_eq!(decode_slice::<f64>(&encode_slice(&ys)), ys);
    }
}
