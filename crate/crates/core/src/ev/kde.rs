//! One-dimensional Gaussian kernel density models.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rng_for;

/// Smallest bandwidth, in the feature's own units.
pub const BANDWIDTH_FLOOR: f64 = 1e-3;
const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum KdeError {
    #[error("{feature}: need at least 2 samples, got {n}")]
    TooFewSamples { feature: String, n: usize },
    #[error("{feature}: sample {value} lies outside the support")]
    OutsideSupport { feature: String, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Support {
    Real,
    /// Draws outside `(lower, upper]` are rejected and redrawn.
    Interval {
        lower: f64,
        upper: f64,
    },
    /// Draws wrap modulo `period` into `[0, period)`.
    Circular {
        period: f64,
    },
}

impl Support {
    fn admits(&self, x: f64) -> bool {
        match *self {
            Support::Real => x.is_finite(),
            Support::Interval { lower, upper } => lower < x && x <= upper,
            Support::Circular { period } => (0.0..period).contains(&x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    #[default]
    Silverman,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    pub feature: String,
    pub support: Support,
    pub bandwidth: f64,
    pub samples: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `0.9 * min(s, IQR / 1.34) * n^(-1/5)` with `s` the (n-1) sample standard
/// deviation, floored at [`BANDWIDTH_FLOOR`]. When the IQR is zero but the
/// data spread is not, `s` alone is used.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    (0.9 * spread * n.powf(-0.2)).max(BANDWIDTH_FLOOR)
}

pub fn fit_kde(feature: &str, samples: &[f64], rule: BandwidthRule, support: Support) -> Result<KdeModel, KdeError> {
    if samples.len() < 2 {
        return Err(KdeError::TooFewSamples {
            feature: feature.into(),
            n: samples.len(),
        });
    }
    if let Some(&value) = samples.iter().find(|&&x| !support.admits(x)) {
        return Err(KdeError::OutsideSupport {
            feature: feature.into(),
            value,
        });
    }
    let bandwidth = match rule {
        BandwidthRule::Silverman => silverman_bandwidth(samples),
        BandwidthRule::Fixed(h) => h.max(BANDWIDTH_FLOOR),
    };
    Ok(KdeModel {
        feature: feature.into(),
        support,
        bandwidth,
        samples: samples.to_vec(),
    })
}

impl KdeModel {
    /// One draw: a random data point plus kernel noise, fitted to the support.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut first = None;
        for _ in 0..MAX_REJECTIONS {
            let centre = self.samples[rng.random_range(0..self.samples.len())];
            let z: f64 = StandardNormal.sample(rng);
            let x = centre + self.bandwidth * z;
            first.get_or_insert(centre);
            match self.support {
                Support::Circular { period } => return x.rem_euclid(period),
                s if s.admits(x) => return x,
                _ => {}
            }
        }
        // Every data point is inside the support, so this cannot leave it.
        first.expect("at least one attempt")
    }

    /// Kernel noise around data point `index`, redrawn until it lands in the
    /// support (wrapped for circular support).
    pub fn draw_near<R: Rng + ?Sized>(&self, index: usize, rng: &mut R) -> f64 {
        let centre = self.samples[index];
        for _ in 0..MAX_REJECTIONS {
            let z: f64 = StandardNormal.sample(rng);
            let x = centre + self.bandwidth * z;
            match self.support {
                Support::Circular { period } => return x.rem_euclid(period),
                s if s.admits(x) => return x,
                _ => {}
            }
        }
        centre
    }

    /// Density at `x` (ignores support truncation).
    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / (self.samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
        norm * self
            .samples
            .iter()
            .map(|s| (-0.5 * ((x - s) / h).powi(2)).exp())
            .sum::<f64>()
    }
}

/// `n` seeded draws from `model`.
pub fn sample_kde(model: &KdeModel, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 3);
    (0..n).map(|_| model.draw(&mut rng)).collect()
}
