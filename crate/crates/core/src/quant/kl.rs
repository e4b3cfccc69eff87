use super::linear::QuantSpec;
use super::tensor::TensorF32;
use crate::error::{Error, Result};

pub const KL_BINS: usize = 2048;
pub const KL_EPSILON: f64 = 1e-9;

const GRID_DENOM: u32 = 128;
const GRID_FIRST: u32 = 32;

/// Candidate clip values `i/128 · max_abs` for `i = 32..=128`, ascending.
pub fn kl_candidates(max_abs: f64) -> Vec<f64> {
    (GRID_FIRST..=GRID_DENOM).map(|i| i as f64 / GRID_DENOM as f64 * max_abs).collect()
}

/// Reference histogram of the original values over `[-max|w|, max|w|]`
/// (or `[0, max|w|]` unsigned). Every grid candidate lands on a bin edge.
struct Reference<'a> {
    values: &'a [f32],
    lo: f64,
    width: f64,
    counts: Vec<u32>,
    signed: bool,
}

impl<'a> Reference<'a> {
    fn new(t: &'a TensorF32, signed: bool) -> Result<Self> {
        t.ensure_finite()?;
        let data = t.data();
        let first = data[0];
        if data.iter().all(|&v| v == first) {
            return Err(Error::DegenerateDistribution);
        }
        let max_abs = t.max_abs() as f64;
        let (lo, span) = if signed { (-max_abs, 2.0 * max_abs) } else { (0.0, max_abs) };
        if span <= 0.0 {
            return Err(Error::DegenerateDistribution);
        }
        let width = span / KL_BINS as f64;
        let mut r = Reference { values: data, lo, width, counts: vec![0; KL_BINS], signed };
        for &v in data {
            let b = r.bin(v);
            r.counts[b] += 1;
        }
        Ok(r)
    }

    fn bin(&self, v: f32) -> usize {
        let u = ((v as f64 - self.lo) / self.width).floor();
        if u <= 0.0 {
            0
        } else {
            (u as usize).min(KL_BINS - 1)
        }
    }

    fn center(&self, bin: usize) -> f64 {
        self.lo + (bin as f64 + 0.5) * self.width
    }

    fn divergence(&self, bits: u8, clip: f64) -> Result<f64> {
        let spec = QuantSpec::new(bits, clip, self.signed)?;
        let offset = spec.min_level();
        let n_levels = (spec.max_level() - offset + 1) as usize;

        // mass of each level in the quantized tensor
        let mut level_mass = vec![0u64; n_levels];
        for &v in self.values {
            level_mass[(spec.level(v) - offset) as usize] += 1;
        }

        // bins belonging to each level's interval, by bin centre
        let step = spec.step();
        let lower = if self.signed { -clip } else { 0.0 };
        let bin_level: Vec<Option<usize>> = (0..KL_BINS)
            .map(|j| {
                let c = self.center(j);
                (c > lower && c < clip).then(|| {
                    let n = (c / step).round() as i64;
                    (n.clamp(offset, spec.max_level()) - offset) as usize
                })
            })
            .collect();
        let mut covered = vec![0u32; n_levels];
        let mut occupied = vec![0u32; n_levels];
        for (j, lvl) in bin_level.iter().enumerate() {
            if let Some(l) = *lvl {
                covered[l] += 1;
                if self.counts[j] > 0 {
                    occupied[l] += 1;
                }
            }
        }

        let mut q = vec![0.0f64; KL_BINS];
        for (j, lvl) in bin_level.iter().enumerate() {
            let Some(l) = *lvl else { continue };
            let mass = level_mass[l] as f64;
            if mass == 0.0 {
                continue;
            }
            q[j] = if occupied[l] > 0 {
                if self.counts[j] > 0 {
                    mass / occupied[l] as f64
                } else {
                    0.0
                }
            } else {
                mass / covered[l] as f64
            };
        }
        let q_total: f64 = q.iter().sum();
        let p_total = self.values.len() as f64;

        let mut d = 0.0;
        for (j, &count) in self.counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let p = count as f64 / p_total;
            let qj = if q_total > 0.0 { q[j] / q_total } else { 0.0 };
            let qj = if qj > 0.0 { qj } else { KL_EPSILON };
            d += p * (p / qj).ln();
        }
        Ok(d)
    }
}

/// `D_KL(hist(t) || hist(quantize(t, c)))` for one clip value.
pub fn kl_divergence_at(t: &TensorF32, bits: u8, signed: bool, clip: f64) -> Result<f64> {
    Reference::new(t, signed)?.divergence(bits, clip)
}

/// Clip value minimizing the KL divergence over the fixed candidate grid.
/// Ties go to the larger clip.
pub fn kl_calibrate(t: &TensorF32, bits: u8, signed: bool) -> Result<f64> {
    let reference = Reference::new(t, signed)?;
    let mut best = (f64::INFINITY, 0.0);
    for c in kl_candidates(t.max_abs() as f64) {
        let d = reference.divergence(bits, c)?;
        if d <= best.0 {
            best = (d, c);
        }
    }
    Ok(best.1)
}
