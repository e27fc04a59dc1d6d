//! Threshold exceedances and their generalized Pareto approximation.
//!
//! The controller constrains the first two moments of the conditional
//! excess, so the fit here is the matching method of moments: with sample
//! mean `m` and variance `s²`,
//!
//! ```text
//! ξ = (1 − m²/s²) / 2,    σ = m (1 + m²/s²) / 2
//! ```
//!
//! which inverts `mean = σ/(1 − ξ)` and `var = σ²/((1 − ξ)²(1 − 2ξ))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_FIT_SAMPLES: usize = 30;
/// Largest shape reported by a fit.
pub const SHAPE_CLAMP: f64 = 0.499;
/// `|ξ|` below this is treated as the exponential case.
pub const EXPONENTIAL_SHAPE_EPS: f64 = 1e-8;

/// Exceedances of one queue over its threshold, in arrival order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceLog {
    samples: Vec<f64>,
    slots: Vec<u64>,
    mean: f64,
    m2: f64,
    sum_sq: f64,
}

impl ExceedanceLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(samples: impl IntoIterator<Item = f64>) -> Self {
        let mut log = Self::new();
        for (k, x) in samples.into_iter().enumerate() {
            log.push(k as u64, x);
        }
        log
    }

    /// Records exceedance `x > 0` observed at `slot`.
    pub fn push(&mut self, slot: u64, x: f64) {
        debug_assert!(x > 0.0);
        self.samples.push(x);
        self.slots.push(slot);
        let n = self.samples.len() as f64;
        let delta = x - self.mean;
        self.mean += delta / n;
        self.m2 += delta * (x - self.mean);
        self.sum_sq += x * x;
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn slots(&self) -> &[u64] {
        &self.slots
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Mean of the squared exceedances.
    pub fn second_moment(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.sum_sq / self.samples.len() as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.samples.len() < 2 {
            0.0
        } else {
            self.m2 / (self.samples.len() - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    pub scale: f64,
    pub shape: f64,
    pub samples: usize,
    /// Set when the raw shape estimate reached 1/2 and was clamped.
    pub clamped: bool,
}

impl GpdFit {
    /// Moment inversion from a mean and a variance.
    pub fn from_moments(mean: f64, variance: f64, samples: usize) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::DegenerateVariance);
        }
        let ratio = mean * mean / variance;
        let mut shape = 0.5 * (1.0 - ratio);
        let scale = 0.5 * mean * (1.0 + ratio);
        let clamped = shape >= 0.5;
        if clamped {
            shape = SHAPE_CLAMP;
        }
        Ok(Self {
            scale,
            shape,
            samples,
            clamped,
        })
    }

    pub fn ccdf(&self, x: f64) -> f64 {
        gpd_ccdf(x, self.scale, self.shape)
    }
}

/// GPD mean and variance for `ξ < 1/2`.
pub fn gpd_moments(scale: f64, shape: f64) -> (f64, f64) {
    let mean = scale / (1.0 - shape);
    (mean, mean * mean / (1.0 - 2.0 * shape))
}

pub fn fit_gpd_mom(log: &ExceedanceLog) -> Result<GpdFit> {
    if log.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples {
            required: MIN_FIT_SAMPLES,
            got: log.len(),
        });
    }
    GpdFit::from_moments(log.mean(), log.variance(), log.len())
}

/// `Pr(X > x)` for `X ~ GPD(σ, ξ)`.
pub fn gpd_ccdf(x: f64, scale: f64, shape: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if shape.abs() < EXPONENTIAL_SHAPE_EPS {
        return (-x / scale).exp();
    }
    let base = 1.0 + shape * x / scale;
    if base <= 0.0 {
        0.0
    } else {
        base.powf(-1.0 / shape)
    }
}

/// Right-continuous empirical tail `x ↦ #{s > x} / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCcdf {
    sorted: Vec<f64>,
}

impl EmpiricalCcdf {
    pub fn new(samples: &[f64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let at_most = self.sorted.partition_point(|&s| s <= x);
        (self.sorted.len() - at_most) as f64 / self.sorted.len() as f64
    }

    /// `(x, #{s > x}/n)` at every distinct sample value.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (k, &x) in self.sorted.iter().enumerate() {
            let tail = (self.sorted.len() - k - 1) as f64 / self.sorted.len() as f64;
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 = tail,
                _ => out.push((x, tail)),
            }
        }
        out
    }
}

pub fn empirical_ccdf(samples: &[f64]) -> EmpiricalCcdf {
    EmpiricalCcdf::new(samples)
}

/// Kolmogorov–Smirnov distance between the empirical tail of `samples` and
/// a fitted GPD, taking both one-sided limits at each sample point.
pub fn ks_distance(samples: &[f64], fit: &GpdFit) -> f64 {
    let ecdf = EmpiricalCcdf::new(samples);
    let n = ecdf.len() as f64;
    let mut worst: f64 = 0.0;
    let mut k = 0;
    while k < ecdf.sorted.len() {
        let x = ecdf.sorted[k];
        let mut next = k;
        while next < ecdf.sorted.len() && ecdf.sorted[next] == x {
            next += 1;
        }
        let fitted = fit.ccdf(x);
        let left = (ecdf.sorted.len() - k) as f64 / n;
        let right = (ecdf.sorted.len() - next) as f64 / n;
        worst = worst.max((left - fitted).abs()).max((right - fitted).abs());
        k = next;
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Number of exceedances in the fitted prefix.
    pub exceedances: usize,
    /// Slot of the last exceedance in the prefix.
    pub slot: u64,
    pub scale: f64,
    pub shape: f64,
}

/// Refits on prefixes of length `stride, 2·stride, …` (those with enough
/// samples for a fit).
pub fn parameter_trace(log: &ExceedanceLog, stride: usize) -> Vec<TracePoint> {
    assert!(stride > 0, "stride must be positive");
    let mut prefix = ExceedanceLog::new();
    let mut out = Vec::new();
    for (k, (&x, &slot)) in log.samples.iter().zip(&log.slots).enumerate() {
        prefix.push(slot, x);
        if (k + 1) % stride == 0 {
            if let Ok(fit) = fit_gpd_mom(&prefix) {
                out.push(TracePoint {
                    exceedances: k + 1,
                    slot,
                    scale: fit.scale,
                    shape: fit.shape,
                });
            }
        }
    }
    out
}

/// Mean and population standard deviation of the last quarter of `values`.
pub fn last_quartile_stats(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let start = values.len() - values.len().div_ceil(4);
    let tail = &values[start..];
    let n = tail.len() as f64;
    let mean = tail.iter().sum::<f64>() / n;
    let var = tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}
