//! Empirical law of the aggregate interference a UE sees at one server.
//!
//! Interference is binned on a log grid with a dedicated atom at zero and an
//! overflow bin. The estimate follows the recursion
//!
//! ```text
//! Pr(k; t+1) = 1{I(t) ∈ k}/(t+2) + (t+1) Pr(k; t)/(t+2),   Pr(·; 0) = δ_zero
//! ```
//!
//! which telescopes to `Pr(k; t) = (n_k(t) + δ_zero(k)) / (t + 1)` where
//! `n_k` counts observations in bin `k`. Storing the counts makes `observe`
//! O(1) while reproducing the recursion exactly.

use std::fmt::Write as _;

pub const NUM_LOG_BINS: usize = 128;
pub const LOWEST_EDGE: f64 = 1e-18;
pub const HIGHEST_EDGE: f64 = 1e-6;

/// Index of the zero-interference atom.
pub const ZERO_BIN: usize = 0;
/// Index of the overflow bin (`I > HIGHEST_EDGE`).
pub const OVERFLOW_BIN: usize = NUM_LOG_BINS + 1;
pub const NUM_BINS: usize = NUM_LOG_BINS + 2;

fn log_step() -> f64 {
    (HIGHEST_EDGE / LOWEST_EDGE).log10() / NUM_LOG_BINS as f64
}

/// Lower and upper edge of log bin `k` (1-based, `1..=NUM_LOG_BINS`).
pub fn bin_edges(k: usize) -> (f64, f64) {
    assert!((1..=NUM_LOG_BINS).contains(&k));
    let lo = LOWEST_EDGE.log10() + (k - 1) as f64 * log_step();
    (10f64.powf(lo), 10f64.powf(lo + log_step()))
}

/// Bin holding interference value `i ≥ 0`. Positive values below the
/// lowest edge share the first log bin.
pub fn bin_of(i: f64) -> usize {
    if i <= 0.0 {
        ZERO_BIN
    } else if i > HIGHEST_EDGE {
        OVERFLOW_BIN
    } else {
        let pos = ((i.log10() - LOWEST_EDGE.log10()) / log_step()).floor();
        (pos.max(0.0) as usize + 1).min(NUM_LOG_BINS)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    counts: Vec<u64>,
    observations: u64,
    overflow_sum: f64,
}

impl Default for EmpiricalDistribution {
    fn default() -> Self {
        Self::new()
    }
}

impl EmpiricalDistribution {
    /// Point mass on zero interference.
    pub fn new() -> Self {
        Self {
            counts: vec![0; NUM_BINS],
            observations: 0,
            overflow_sum: 0.0,
        }
    }

    pub fn observe(&mut self, interference: f64) {
        let k = bin_of(interference);
        if k == OVERFLOW_BIN {
            self.overflow_sum += interference;
        }
        self.counts[k] += 1;
        self.observations += 1;
    }

    /// Number of `observe` calls, `t`.
    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn probability(&self, bin: usize) -> f64 {
        let prior = if bin == ZERO_BIN { 1 } else { 0 };
        (self.counts[bin] + prior) as f64 / (self.observations + 1) as f64
    }

    /// Value standing in for a whole bin: 0 for the zero atom, the geometric
    /// midpoint for log bins, the mean of observed values for overflow.
    pub fn representative(&self, bin: usize) -> f64 {
        match bin {
            ZERO_BIN => 0.0,
            OVERFLOW_BIN if self.counts[OVERFLOW_BIN] > 0 => {
                self.overflow_sum / self.counts[OVERFLOW_BIN] as f64
            }
            OVERFLOW_BIN => HIGHEST_EDGE,
            k => {
                let (lo, hi) = bin_edges(k);
                (lo * hi).sqrt()
            }
        }
    }

    /// `(representative, probability)` for every bin with positive mass.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        (0..NUM_BINS)
            .filter(|&k| self.probability(k) > 0.0)
            .map(|k| (self.representative(k), self.probability(k)))
            .collect()
    }

    /// `Σ_bins Pr(k) · g(representative_k)`.
    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        (0..NUM_BINS)
            .filter(|&k| self.counts[k] > 0 || k == ZERO_BIN)
            .map(|k| self.probability(k) * g(self.representative(k)))
            .sum()
    }

    /// CSV with columns `lower_edge,upper_edge,representative,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lower_edge,upper_edge,representative,probability\n");
        for k in 0..NUM_BINS {
            let (lo, hi) = match k {
                ZERO_BIN => (0.0, 0.0),
                OVERFLOW_BIN => (HIGHEST_EDGE, f64::INFINITY),
                k => bin_edges(k),
            };
            let _ = writeln!(
                out,
                "{lo:e},{hi:e},{:e},{:e}",
                self.representative(k),
                self.probability(k)
            );
        }
        out
    }
}
