use serde::{Deserialize, Serialize};

use super::tensor::TensorF32;
use crate::error::{Error, Result};

pub const MIN_BITS: u8 = 2;
pub const MAX_BITS: u8 = 8;

/// Uniform quantizer: `bits` levels over `[-clip, clip]` (signed) or `[0, clip]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantSpec {
    bits: u8,
    clip: f64,
    signed: bool,
}

impl QuantSpec {
    pub fn new(bits: u8, clip: f64, signed: bool) -> Result<Self> {
        if !(MIN_BITS..=MAX_BITS).contains(&bits) {
            return Err(Error::InvalidQuant(format!("bits must be in [{MIN_BITS}, {MAX_BITS}], got {bits}")));
        }
        if !(clip.is_finite() && clip > 0.0) {
            return Err(Error::InvalidQuant(format!("clip must be positive and finite, got {clip}")));
        }
        Ok(QuantSpec { bits, clip, signed })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    pub fn signed(&self) -> bool {
        self.signed
    }

    /// Largest level index: `2^(b-1) - 1` signed, `2^b - 1` unsigned.
    pub fn max_level(&self) -> i64 {
        if self.signed {
            (1i64 << (self.bits - 1)) - 1
        } else {
            (1i64 << self.bits) - 1
        }
    }

    pub fn min_level(&self) -> i64 {
        if self.signed {
            -self.max_level()
        } else {
            0
        }
    }

    /// Quantization step `s = c / max_level`.
    pub fn step(&self) -> f64 {
        self.clip / self.max_level() as f64
    }

    fn lower(&self) -> f64 {
        if self.signed {
            -self.clip
        } else {
            0.0
        }
    }

    /// Level index of `w` (after clamping).
    pub(crate) fn level(&self, w: f32) -> i64 {
        let clamped = (w as f64).clamp(self.lower(), self.clip);
        // f64::round rounds half away from zero
        (clamped / self.step()).round() as i64
    }
}

/// `round(clamp(w, c) / s) * s` for one value.
pub fn quantize_value(w: f32, spec: &QuantSpec) -> f32 {
    (spec.level(w) as f64 * spec.step()) as f32
}

pub fn linear_quantize(t: &TensorF32, spec: &QuantSpec) -> Result<TensorF32> {
    t.ensure_finite()?;
    Ok(t.with_data(t.data().iter().map(|&w| quantize_value(w, spec)).collect()))
}
