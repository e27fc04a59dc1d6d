//! Decentralized transmit-power allocation at one UE.
//!
//! The UE minimizes
//!
//! ```text
//! Σ_j V P_j + (b_j − a) E_I[(W/|S|) log2(1 + |S| P_j h_j / (N0 W + |S| I_j))]
//! s.t. Σ_j P_j ≤ P_max, P_j ≥ 0
//! ```
//!
//! where the expectation runs over the UE's empirical interference law for
//! each server. Stationarity gives, for every active link,
//!
//! ```text
//! g_j(P_j) := E[(a − b_j) W h_j / ((N0 W + |S| I + |S| P_j h_j) ln 2)] = V + γ
//! ```
//!
//! and `P_j = 0` when `g_j(0) ≤ V + γ`. Each `g_j` is decreasing, so the
//! per-link solve is a monotone root find and the budget multiplier `γ` is
//! found by bisection on the (non-increasing) total power.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// One accessible server as seen by the UE.
#[derive(Debug, Clone, Copy)]
pub struct PowerLink<'a> {
    /// `b_ji`.
    pub server_weight: f64,
    /// `h_ij` for this slot.
    pub gain: f64,
    /// `(interference, probability)` atoms; probabilities sum to 1.
    pub interference: &'a [(f64, f64)],
}

#[derive(Debug, Clone)]
pub struct PowerProblem<'a> {
    /// `a_i`.
    pub ue_weight: f64,
    pub v: f64,
    pub max_power: f64,
    pub bandwidth: f64,
    /// Total number of servers `|S|`; each owns `W/|S|` of the band.
    pub num_servers: usize,
    pub noise_psd: f64,
    pub links: Vec<PowerLink<'a>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerDecision {
    /// `P_ij`, aligned with the problem's links.
    pub powers: Vec<f64>,
    /// Budget multiplier `γ ≥ 0`.
    pub multiplier: f64,
}

impl PowerDecision {
    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }
}

pub const MAX_BISECTION_ITERATIONS: usize = 200;
const MAX_BRACKET_DOUBLINGS: usize = 2048;
const MAX_ROOT_ITERATIONS: usize = 200;
pub const BUDGET_TOLERANCE: f64 = 1e-9;
pub const ROOT_TOLERANCE: f64 = 1e-12;

impl PowerProblem<'_> {
    fn noise(&self) -> f64 {
        self.noise_psd * self.bandwidth
    }

    fn servers(&self) -> f64 {
        self.num_servers as f64
    }

    /// `g_j(P)` and its derivative.
    fn marginal_and_slope(&self, link: &PowerLink<'_>, power: f64) -> (f64, f64) {
        let c = (self.ue_weight - link.server_weight) * self.bandwidth * link.gain / LN_2;
        let hs = link.gain * self.servers();
        let mut g = 0.0;
        let mut dg = 0.0;
        for &(i, p) in link.interference {
            let denom = self.noise() + self.servers() * i + power * hs;
            g += p * c / denom;
            dg -= p * c * hs / (denom * denom);
        }
        (g, dg)
    }

    /// Expected marginal utility of power on `link`, `g_j(P)`.
    pub fn marginal(&self, link: usize, power: f64) -> f64 {
        self.marginal_and_slope(&self.links[link], power).0
    }

    /// `E[(W/|S|) log2(1 + |S| P h / (N0 W + |S| I))]`, bits/s.
    pub fn expected_rate(&self, link: usize, power: f64) -> f64 {
        if power <= 0.0 {
            return 0.0;
        }
        let l = &self.links[link];
        let band = self.bandwidth / self.servers();
        l.interference
            .iter()
            .map(|&(i, p)| {
                let snr = self.servers() * power * l.gain / (self.noise() + self.servers() * i);
                p * band * snr.ln_1p() / LN_2
            })
            .sum()
    }

    /// The UE's objective at `powers`.
    pub fn objective(&self, powers: &[f64]) -> f64 {
        powers
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                self.v * p + (self.links[j].server_weight - self.ue_weight) * self.expected_rate(j, p)
            })
            .sum()
    }

    /// Power on one link when the price of power is `level = V + γ`.
    fn link_power(&self, link: &PowerLink<'_>, level: f64) -> Result<f64> {
        if self.ue_weight <= link.server_weight {
            return Ok(0.0);
        }
        let (g0, _) = self.marginal_and_slope(link, 0.0);
        if g0 <= level {
            return Ok(0.0);
        }
        let (gmax, _) = self.marginal_and_slope(link, self.max_power);
        if gmax >= level {
            return Ok(self.max_power);
        }
        // Newton on 1/g(P) − 1/level, which is concave and increasing, so
        // iterates approach the root monotonically from below. A single
        // interference atom converges in one step.
        let mut p = 0.0;
        for _ in 0..MAX_ROOT_ITERATIONS {
            let (g, dg) = self.marginal_and_slope(link, p);
            let step = (1.0 / g - 1.0 / level) * g * g / dg;
            p = (p + step).min(self.max_power);
            if step.abs() <= ROOT_TOLERANCE * self.max_power {
                return Ok(p);
            }
        }
        Err(Error::NonConvergence {
            iterations: MAX_ROOT_ITERATIONS,
            residual: f64::NAN,
        })
    }

    fn powers_at(&self, multiplier: f64) -> Result<Vec<f64>> {
        self.links
            .iter()
            .map(|l| self.link_power(l, self.v + multiplier))
            .collect()
    }

    pub fn solve(&self) -> Result<PowerDecision> {
        let budget = self.max_power;
        let powers = self.powers_at(0.0)?;
        let total: f64 = powers.iter().sum();
        if total < budget {
            return Ok(PowerDecision {
                powers,
                multiplier: 0.0,
            });
        }

        let active: Vec<usize> = (0..self.links.len()).filter(|&j| powers[j] > 0.0).collect();
        if let [only] = active[..] {
            // The whole budget goes to one link; γ follows from stationarity.
            let mut powers = vec![0.0; self.links.len()];
            powers[only] = budget;
            let multiplier = (self.marginal(only, budget) - self.v).max(0.0);
            return Ok(PowerDecision { powers, multiplier });
        }

        let total_at = |m: f64| -> Result<(f64, Vec<f64>)> {
            let p = self.powers_at(m)?;
            Ok((p.iter().sum(), p))
        };
        let mut lo = 0.0;
        let mut hi = self.v.max(1.0);
        let mut hi_state = total_at(hi)?;
        let mut doublings = 0;
        while hi_state.0 > budget {
            lo = hi;
            hi *= 2.0;
            hi_state = total_at(hi)?;
            doublings += 1;
            if doublings > MAX_BRACKET_DOUBLINGS || !hi.is_finite() {
                return Err(Error::NonConvergence {
                    iterations: doublings,
                    residual: hi_state.0 - budget,
                });
            }
        }
        for _ in 0..MAX_BISECTION_ITERATIONS {
            let residual = budget - hi_state.0;
            let mid = 0.5 * (lo + hi);
            if residual <= BUDGET_TOLERANCE * budget || mid <= lo || mid >= hi {
                return Ok(PowerDecision {
                    powers: hi_state.1,
                    multiplier: hi,
                });
            }
            let mid_state = total_at(mid)?;
            if mid_state.0 > budget {
                lo = mid;
            } else {
                hi = mid;
                hi_state = mid_state;
            }
        }
        Err(Error::NonConvergence {
            iterations: MAX_BISECTION_ITERATIONS,
            residual: budget - hi_state.0,
        })
    }
}
