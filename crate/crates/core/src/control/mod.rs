//! Per-slot decisions from the drift-plus-penalty bound.
//!
//! Once the drift weights `a_i` and `b_ji` are fixed from the start-of-slot
//! state, the decision-dependent part of the bound separates into three
//! independent problems: local CPU frequency per UE, transmit power per UE,
//! and core allocation per server. All three use the rate form of the bound
//! (rates in bits/s, power in watts); `V` absorbs the slot length.

mod cores;
mod frequency;
mod power;
mod weights;

pub use cores::server_core_allocation;
pub use frequency::{local_cpu_frequency, local_objective};
pub use power::{
    PowerDecision, PowerLink, PowerProblem, BUDGET_TOLERANCE, MAX_BISECTION_ITERATIONS,
    ROOT_TOLERANCE,
};
pub use weights::{server_weight, ue_weight};

use crate::channel::offloading_rate;
use crate::error::{Error, Result};

/// `R_i^max`: full power, current channel, no interference, one server.
pub fn max_offload_rate(
    max_power: f64,
    gain: f64,
    num_servers: usize,
    bandwidth: f64,
    noise_psd: f64,
) -> f64 {
    offloading_rate(max_power, gain, 0.0, num_servers, bandwidth, noise_psd)
}

/// One UE–server link of a slot problem.
#[derive(Debug, Clone)]
pub struct LinkInput {
    pub server: usize,
    /// `b_ji`.
    pub server_weight: f64,
    pub gain: f64,
    /// Atoms of the UE's interference estimate for this server.
    pub interference: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct UeInput {
    /// `a_i`.
    pub weight: f64,
    pub processing_density: f64,
    pub max_cpu_freq: f64,
    pub max_tx_power: f64,
    pub links: Vec<LinkInput>,
}

/// One accessing UE at a server.
#[derive(Debug, Clone, Copy)]
pub struct ServerUeInput {
    pub ue: usize,
    /// `b_ji`.
    pub weight: f64,
    pub processing_density: f64,
}

#[derive(Debug, Clone)]
pub struct ServerInput {
    pub num_cores: usize,
    pub core_freq: f64,
    pub ues: Vec<ServerUeInput>,
}

/// Everything the three sub-problems of one slot need.
#[derive(Debug, Clone)]
pub struct SlotProblem {
    pub v: f64,
    pub cpu_power_coeff: f64,
    pub bandwidth: f64,
    pub noise_psd: f64,
    pub num_servers: usize,
    pub ues: Vec<UeInput>,
    pub servers: Vec<ServerInput>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotDecisions {
    /// `f_i`.
    pub frequencies: Vec<f64>,
    /// `P_ij`, aligned with each UE's links.
    pub powers: Vec<Vec<f64>>,
    /// `γ_i`.
    pub multipliers: Vec<f64>,
    /// `f_ji`, aligned with each server's `ues`.
    pub core_freqs: Vec<Vec<f64>>,
}

impl SlotDecisions {
    /// All-zero decisions shaped like `problem`.
    pub fn idle(problem: &SlotProblem) -> Self {
        Self {
            frequencies: vec![0.0; problem.ues.len()],
            powers: problem.ues.iter().map(|u| vec![0.0; u.links.len()]).collect(),
            multipliers: vec![0.0; problem.ues.len()],
            core_freqs: problem.servers.iter().map(|s| vec![0.0; s.ues.len()]).collect(),
        }
    }
}

impl SlotProblem {
    pub fn power_problem(&self, ue: usize) -> PowerProblem<'_> {
        let u = &self.ues[ue];
        PowerProblem {
            ue_weight: u.weight,
            v: self.v,
            max_power: u.max_tx_power,
            bandwidth: self.bandwidth,
            num_servers: self.num_servers,
            noise_psd: self.noise_psd,
            links: u
                .links
                .iter()
                .map(|l| PowerLink {
                    server_weight: l.server_weight,
                    gain: l.gain,
                    interference: &l.interference,
                })
                .collect(),
        }
    }

    /// Solves the three decoupled problems. Errors carry the failing UE index
    /// as `Error::AtSlot { slot: 0, .. }`; the engine rewrites the slot.
    pub fn solve(&self) -> Result<SlotDecisions> {
        let frequencies = self
            .ues
            .iter()
            .map(|u| {
                local_cpu_frequency(
                    u.weight,
                    self.v,
                    self.cpu_power_coeff,
                    u.processing_density,
                    u.max_cpu_freq,
                )
            })
            .collect();

        let mut powers = Vec::with_capacity(self.ues.len());
        let mut multipliers = Vec::with_capacity(self.ues.len());
        for i in 0..self.ues.len() {
            let d = self.power_problem(i).solve().map_err(|e| Error::AtSlot {
                slot: 0,
                ue: i,
                source: Box::new(e),
            })?;
            powers.push(d.powers);
            multipliers.push(d.multiplier);
        }

        let core_freqs = self
            .servers
            .iter()
            .map(|s| {
                let w: Vec<f64> = s.ues.iter().map(|u| u.weight / u.processing_density).collect();
                server_core_allocation(&w, s.num_cores)
                    .into_iter()
                    .map(|on| if on { s.core_freq } else { 0.0 })
                    .collect()
            })
            .collect();

        Ok(SlotDecisions {
            frequencies,
            powers,
            multipliers,
            core_freqs,
        })
    }

    /// Decision-dependent part of the drift-plus-penalty bound:
    ///
    /// ```text
    /// Σ_i [V(κ f_i³ + Σ_j P_ij) − a_i f_i / L_i + Σ_j (b_ji − a_i) E[R_ij]]
    ///   − Σ_j Σ_{i ∈ U_j} b_ji f_ji / L_i
    /// ```
    pub fn objective(&self, d: &SlotDecisions) -> f64 {
        let ue_part: f64 = self
            .ues
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let local = local_objective(
                    d.frequencies[i],
                    u.weight,
                    self.v,
                    self.cpu_power_coeff,
                    u.processing_density,
                );
                local + self.power_problem(i).objective(&d.powers[i])
            })
            .sum();
        let server_part: f64 = self
            .servers
            .iter()
            .zip(&d.core_freqs)
            .map(|(s, f)| {
                s.ues
                    .iter()
                    .zip(f)
                    .map(|(u, &fji)| u.weight * fji / u.processing_density)
                    .sum::<f64>()
            })
            .sum();
        ue_part - server_part
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_problem(a: f64, b: f64) -> SlotProblem {
        SlotProblem {
            v: 1e9,
            cpu_power_coeff: 1e-27,
            bandwidth: 10e6,
            noise_psd: 4e-21,
            num_servers: 1,
            ues: vec![UeInput {
                weight: a,
                processing_density: 737.5,
                max_cpu_freq: 1e9,
                max_tx_power: 0.1,
                links: vec![LinkInput {
                    server: 0,
                    server_weight: b,
                    gain: 1e-11,
                    interference: vec![(0.0, 1.0)],
                }],
            }],
            servers: vec![ServerInput {
                num_cores: 1,
                core_freq: 1e10,
                ues: vec![ServerUeInput {
                    ue: 0,
                    weight: b,
                    processing_density: 737.5,
                }],
            }],
        }
    }

    #[test]
    fn idle_state_scores_zero() {
        let p = tiny_problem(0.0, 0.0);
        assert_eq!(p.objective(&SlotDecisions::idle(&p)), 0.0);
        let d = p.solve().unwrap();
        assert_eq!(d.frequencies, [0.0]);
        assert_eq!(d.powers, [vec![0.0]]);
        // the greedy pass still hands out the core
        assert_eq!(d.core_freqs, [vec![1e10]]);
        assert_eq!(p.objective(&d), 0.0);
    }

    #[test]
    fn solution_beats_idle() {
        let p = tiny_problem(1e6, 1e3);
        let d = p.solve().unwrap();
        assert!(p.objective(&d) < p.objective(&SlotDecisions::idle(&p)));
    }

    #[test]
    fn frequency_moves_objective_down() {
        let p = tiny_problem(1e5, 0.0);
        let best = p.solve().unwrap();
        let mut d = best.clone();
        let mut prev = f64::INFINITY;
        for k in 0..=8 {
            d.frequencies[0] = best.frequencies[0] * k as f64 / 8.0;
            let o = p.objective(&d);
            assert!(o < prev);
            prev = o;
        }
    }

    #[test]
    fn max_rate_uses_full_power_without_interference() {
        let r = max_offload_rate(0.1, 1e-10, 4, 10e6, 4e-21);
        assert_eq!(r, offloading_rate(0.1, 1e-10, 0.0, 4, 10e6, 4e-21));
        assert!(r > 0.0);
    }
}
