use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::TensorF32;
use crate::error::{Error, Result};

/// Scalar codebook produced by k-means.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub bits: u8,
    /// `2^bits` centroids, strictly ascending.
    pub centroids: Vec<f32>,
    /// Centroid index per tensor element.
    pub assignments: Vec<u32>,
    /// Mean squared distortion after every assignment step.
    pub distortion_history: Vec<f64>,
    /// Set when the tensor had fewer distinct values than centroids and the
    /// codebook was padded.
    pub degenerate: bool,
}

impl Codebook {
    /// Mean squared error of the decoded tensor against `t`.
    pub fn distortion(&self, t: &TensorF32) -> f64 {
        let sum: f64 = t
            .data()
            .iter()
            .zip(&self.assignments)
            .map(|(&v, &a)| {
                let d = v as f64 - self.centroids[a as usize] as f64;
                d * d
            })
            .sum();
        sum / t.len() as f64
    }

    pub fn decode(&self, like: &TensorF32) -> TensorF32 {
        like.with_data(self.assignments.iter().map(|&a| self.centroids[a as usize]).collect())
    }
}

fn nearest(v: f64, centroids: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &c) in centroids.iter().enumerate() {
        let d = (v - c) * (v - c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn assign(values: &[f64], centroids: &[f64], out: &mut [u32]) -> f64 {
    let mut total = 0.0;
    for (slot, &v) in out.iter_mut().zip(values) {
        let (i, d) = nearest(v, centroids);
        *slot = i as u32;
        total += d;
    }
    total / values.len() as f64
}

fn kmeans_plus_plus(values: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(values[rng.random_range(0..values.len())]);
    let mut d2: Vec<f64> = values.iter().map(|&v| (v - centroids[0]).powi(2)).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = values.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // floating residue can walk past the end; fall back to the farthest point
            if d2[chosen] == 0.0 {
                chosen = d2.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
            }
            chosen
        } else {
            rng.random_range(0..values.len())
        };
        let c = values[pick];
        centroids.push(c);
        for (w, &v) in d2.iter_mut().zip(values) {
            *w = w.min((v - c) * (v - c));
        }
    }
    centroids
}

/// Lloyd's algorithm with k-means++ seeding, `k = 2^bits` centroids.
pub fn kmeans_quantize(t: &TensorF32, bits: u8, max_iters: usize, seed: u64) -> Result<Codebook> {
    if !(1..=8).contains(&bits) {
        return Err(Error::InvalidQuant(format!("codebook bits must be in [1, 8], got {bits}")));
    }
    t.ensure_finite()?;
    let k = 1usize << bits;

    let mut distinct: Vec<f32> = t.data().to_vec();
    distinct.sort_by(f32::total_cmp);
    distinct.dedup();

    if distinct.len() < k {
        let mut centroids = distinct.clone();
        while centroids.len() < k {
            let last = *centroids.last().unwrap();
            centroids.push(last.next_up());
        }
        let assignments =
            t.data().iter().map(|v| distinct.binary_search_by(|d| d.total_cmp(v)).unwrap() as u32).collect();
        return Ok(Codebook { bits, centroids, assignments, distortion_history: vec![0.0], degenerate: true });
    }

    let values: Vec<f64> = t.data().iter().map(|&v| v as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(&values, k, &mut rng);
    let mut assignments = vec![0u32; values.len()];
    let mut history = vec![assign(&values, &centroids, &mut assignments)];

    let mut next = assignments.clone();
    for _ in 0..max_iters {
        let mut sums = vec![0.0f64; k];
        let mut counts = vec![0usize; k];
        for (&a, &v) in assignments.iter().zip(&values) {
            sums[a as usize] += v;
            counts[a as usize] += 1;
        }
        for ((c, s), n) in centroids.iter_mut().zip(&sums).zip(&counts) {
            if *n > 0 {
                *c = s / *n as f64;
            }
        }
        history.push(assign(&values, &centroids, &mut next));
        let converged = next == assignments;
        std::mem::swap(&mut assignments, &mut next);
        if converged {
            break;
        }
    }

    // sort ascending and remap assignments
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centroids[a].total_cmp(&centroids[b]));
    let mut rank = vec![0u32; k];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r as u32;
    }
    let mut sorted: Vec<f32> = order.iter().map(|&i| centroids[i] as f32).collect();
    for a in assignments.iter_mut() {
        *a = rank[*a as usize];
    }

    let mut perturbed = false;
    for i in 1..k {
        if sorted[i] <= sorted[i - 1] {
            sorted[i] = sorted[i - 1].next_up();
            perturbed = true;
        }
    }
    if perturbed {
        let as_f64: Vec<f64> = sorted.iter().map(|&c| c as f64).collect();
        history.push(assign(&values, &as_f64, &mut assignments));
    }

    Ok(Codebook { bits, centroids: sorted, assignments, distortion_history: history, degenerate: false })
}
