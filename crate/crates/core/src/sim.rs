//! The slot loop and run-level summaries.
//!
//! Each slot runs, in order: arrivals, channel draw, drift weights, the
//! three decisions, rate realization with the actual interference, physical
//! queue updates, moving-average update, virtual queue updates, interference
//! estimator update, and metric accumulation.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::channel::{offloading_rate, sample_gains};
use crate::config::Scenario;
use crate::control::{
    max_offload_rate, server_weight, ue_weight, LinkInput, ServerInput, ServerUeInput,
    SlotDecisions, SlotProblem, UeInput,
};
use crate::error::{Error, Result};
use crate::evt::{fit_gpd_mom, ks_distance, ExceedanceLog, GpdFit};
use crate::interference::EmpiricalDistribution;
use crate::queueing::{
    excess_mean_target, excess_second_moment_target, ServerPhysicalQueue, ServerVirtualQueues,
    TailTargets, UePhysicalQueue, UeVirtualQueues,
};
use crate::rng::{substream, DOMAIN_ARRIVALS, DOMAIN_CHANNEL};
use crate::topology::Topology;

/// Bits arriving in one slot: `u · Poisson(λ/u)`, mean `λ`.
pub fn sample_arrivals<R: Rng + ?Sized>(mean_bits: f64, granularity: f64, rng: &mut R) -> f64 {
    if mean_bits <= 0.0 {
        return 0.0;
    }
    let units: f64 = Poisson::new(mean_bits / granularity)
        .expect("positive finite Poisson mean")
        .sample(rng);
    units * granularity
}

/// `κ f³ + Σ_j P_ij`, watts.
pub fn slot_power(cpu_power_coeff: f64, freq: f64, tx_power: f64) -> f64 {
    cpu_power_coeff * freq.powi(3) + tx_power
}

/// Little's-law composition of UE and server queuing delay, seconds:
///
/// ```text
/// τ · avg Q / avg A + Σ_j w_j · avg Z_j / avg R_j,   w_j = avg R_j / Σ_k avg R_k
/// ```
///
/// `links` holds `(avg Z_ji, avg R_ij)` per accessible server. Returns `None`
/// when the UE saw no arrivals.
pub fn end_to_end_delay(
    slot_duration: f64,
    avg_backlog: f64,
    avg_arrival: f64,
    links: &[(f64, f64)],
) -> Option<f64> {
    if !(avg_arrival > 0.0) {
        return None;
    }
    let local = slot_duration * avg_backlog / avg_arrival;
    let total_rate: f64 = links.iter().map(|&(_, r)| r).sum();
    let server = if total_rate > 0.0 {
        links
            .iter()
            .filter(|&&(_, r)| r > 0.0)
            .map(|&(z, r)| (r / total_rate) * z / r)
            .sum()
    } else {
        0.0
    };
    Some(local + server)
}

/// Time-averaged `κ f³ + Σ_j P_ij` per UE over `records`.
pub fn average_power(records: &[SlotRecord], cpu_power_coeff: f64) -> Vec<f64> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let mut sums = vec![0.0; first.ues.len()];
    for r in records {
        for (s, u) in sums.iter_mut().zip(&r.ues) {
            *s += slot_power(cpu_power_coeff, u.freq, u.tx_power);
        }
    }
    sums.iter().map(|s| s / records.len() as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeSlot {
    /// `A_i(t)`, bits.
    pub arrival: f64,
    /// `f_i(t)`, Hz.
    pub freq: f64,
    /// `Σ_j P_ij(t)`, watts.
    pub tx_power: f64,
    /// `Q_i(t+1)`, bits.
    pub backlog: f64,
    pub virtual_queues: UeVirtualQueues,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSlot {
    pub ue: usize,
    pub server: usize,
    /// Watts.
    pub power: f64,
    /// Bits/s.
    pub rate: f64,
    /// Watts.
    pub interference: f64,
    /// Bits moved from `Q_i` into `Z_ji` this slot.
    pub offloaded: f64,
    /// `Z_ji(t+1)`, bits.
    pub backlog: f64,
    /// `f_ji(t)`, Hz.
    pub core_freq: f64,
    pub virtual_queues: ServerVirtualQueues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub ues: Vec<UeSlot>,
    pub pairs: Vec<PairSlot>,
}

/// Outcome of the run-level constraint checks for one queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    /// Empirical violation frequency within tolerance.
    pub violation: bool,
    /// `σ̂ ≤ σ^th`; `None` without a fit.
    pub scale: Option<bool>,
    /// `ξ̂ ≤ ξ^th`; `None` without a fit.
    pub shape: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeSummary {
    pub ue: usize,
    pub avg_power: f64,
    pub avg_backlog: f64,
    pub avg_arrival: f64,
    /// Seconds; `None` when no bits arrived.
    pub delay: Option<f64>,
    /// Fraction of measured slots with `Q_i(t+1) > d_i`.
    pub violation_rate: f64,
    pub exceedances: usize,
    pub fit: Option<GpdFit>,
    pub ks_distance: Option<f64>,
    pub verdicts: Verdicts,
    pub final_virtual_queues: UeVirtualQueues,
    /// Final `[Q^(X), Q^(Y), Q^(Q)]` divided by `T` and by each queue's
    /// per-slot increment scale.
    pub virtual_queue_growth: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub ue: usize,
    pub server: usize,
    pub avg_power: f64,
    pub avg_backlog: f64,
    /// Bits/s.
    pub avg_rate: f64,
    /// Fraction of measured slots with `Z_ji(t+1) > R̃_ji(t) d_ji`.
    pub violation_rate: f64,
    pub exceedances: usize,
    pub fit: Option<GpdFit>,
    pub ks_distance: Option<f64>,
    /// `σ_ji^th` at the end of the run, bits.
    pub scale_threshold: f64,
    pub verdicts: Verdicts,
    pub final_virtual_queues: ServerVirtualQueues,
    pub virtual_queue_growth: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub slots: u64,
    /// Slots after warm-up that enter the averages.
    pub measured_slots: u64,
    pub ues: Vec<UeSummary>,
    pub pairs: Vec<PairSummary>,
    /// Network-wide mean of the per-UE averages; `None` when nothing was measured.
    pub mean_power: Option<f64>,
    pub mean_delay: Option<f64>,
    /// Fraction of all measured (UE, slot) samples with `Q > d`.
    pub pooled_violation_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    /// Exceedance log per UE queue.
    pub ue_exceedances: Vec<ExceedanceLog>,
    /// Exceedance log per (UE, server) pair, in `pairs` order.
    pub pair_exceedances: Vec<ExceedanceLog>,
    /// Recorded slots (every `record_stride`-th), empty when disabled.
    pub records: Vec<SlotRecord>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep every `k`-th slot record; `None` keeps none.
    pub record_stride: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
struct Pair {
    ue: usize,
    server: usize,
}

#[derive(Debug, Clone, Default)]
struct Accum {
    power: f64,
    backlog: f64,
    arrival: f64,
    rate: f64,
    violations: u64,
}

pub fn run(scenario: &Scenario, topology: &Topology, options: RunOptions) -> Result<RunOutput> {
    Engine::new(scenario, topology).run(options)
}

struct Engine<'a> {
    scenario: &'a Scenario,
    topology: &'a Topology,
    pairs: Vec<Pair>,
    /// Pair indices per UE.
    ue_pairs: Vec<Vec<usize>>,
    /// Pair indices per server.
    server_pairs: Vec<Vec<usize>>,
    ue_queues: Vec<UePhysicalQueue>,
    ue_vqs: Vec<UeVirtualQueues>,
    server_queues: Vec<ServerPhysicalQueue>,
    server_vqs: Vec<ServerVirtualQueues>,
    estimators: Vec<EmpiricalDistribution>,
}

impl<'a> Engine<'a> {
    fn new(scenario: &'a Scenario, topology: &'a Topology) -> Self {
        let mut pairs = Vec::new();
        let mut ue_pairs = vec![Vec::new(); scenario.num_ues()];
        let mut server_pairs = vec![Vec::new(); scenario.num_servers()];
        for (i, slots) in ue_pairs.iter_mut().enumerate() {
            for &j in topology.servers_of(i) {
                slots.push(pairs.len());
                server_pairs[j].push(pairs.len());
                pairs.push(Pair { ue: i, server: j });
            }
        }
        let np = pairs.len();
        Self {
            scenario,
            topology,
            pairs,
            ue_pairs,
            server_pairs,
            ue_queues: vec![UePhysicalQueue::default(); scenario.num_ues()],
            ue_vqs: vec![UeVirtualQueues::default(); scenario.num_ues()],
            server_queues: vec![ServerPhysicalQueue::default(); np],
            server_vqs: vec![ServerVirtualQueues::default(); np],
            estimators: vec![EmpiricalDistribution::new(); np],
        }
    }

    fn run(mut self, options: RunOptions) -> Result<RunOutput> {
        let sc = self.scenario;
        let c = &sc.config;
        let tau = c.slot_duration;
        let n_ue = sc.num_ues();
        let n_pairs = self.pairs.len();
        let warmup = (c.warmup_fraction * c.num_slots as f64).floor() as u64;

        let mut ue_acc = vec![Accum::default(); n_ue];
        let mut pair_acc = vec![Accum::default(); n_pairs];
        let mut ue_logs = vec![ExceedanceLog::new(); n_ue];
        let mut pair_logs = vec![ExceedanceLog::new(); n_pairs];
        let mut records = Vec::new();

        for t in 0..c.num_slots {
            // (1) arrivals
            let mut arrival_rng = substream(c.rng_seed, DOMAIN_ARRIVALS, t);
            let arrivals: Vec<f64> = sc
                .ues
                .iter()
                .map(|u| sample_arrivals(u.arrival_rate, c.arrival_granularity, &mut arrival_rng))
                .collect();

            // (2) channel
            let gains = sample_gains(self.topology, &mut substream(c.rng_seed, DOMAIN_CHANNEL, t));

            // (3) drift weights
            let a: Vec<f64> = (0..n_ue)
                .map(|i| {
                    ue_weight(
                        self.ue_queues[i].backlog,
                        arrivals[i],
                        &self.ue_vqs[i],
                        sc.ues[i].queue_bound,
                    )
                })
                .collect();
            let b: Vec<f64> = self
                .pairs
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let server = &sc.servers[p.server];
                    let ue = &sc.ues[p.ue];
                    let threshold = self.server_queues[k].average_rate() * server.delay_bound;
                    let r_max = max_offload_rate(
                        ue.max_tx_power,
                        gains.gain(p.ue, p.server),
                        sc.num_servers(),
                        c.bandwidth,
                        c.noise_psd,
                    );
                    server_weight(self.server_queues[k].backlog, &self.server_vqs[k], threshold, r_max * tau)
                })
                .collect();

            // (4) decisions
            let problem = self.slot_problem(&a, &b, &gains);
            let decisions = problem.solve().map_err(|e| match e {
                Error::AtSlot { ue, source, .. } => Error::AtSlot { slot: t, ue, source },
                other => other,
            })?;
            let powers = self.pair_powers(&decisions);
            let core_freqs = self.pair_core_freqs(&decisions);

            // (5) realized interference and rates
            let received: Vec<f64> = self
                .pairs
                .iter()
                .enumerate()
                .map(|(k, p)| powers[k] * gains.gain(p.ue, p.server))
                .collect();
            let mut interference = vec![0.0; n_pairs];
            for members in &self.server_pairs {
                for &k in members {
                    interference[k] = members.iter().filter(|&&o| o != k).map(|&o| received[o]).sum();
                }
            }
            let rates: Vec<f64> = self
                .pairs
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    offloading_rate(
                        powers[k],
                        gains.gain(p.ue, p.server),
                        interference[k],
                        sc.num_servers(),
                        c.bandwidth,
                        c.noise_psd,
                    )
                })
                .collect();

            // (6) physical queues
            let mut offloaded = vec![0.0; n_pairs];
            #[allow(clippy::needless_range_loop)]
            for i in 0..n_ue {
                let ue = &sc.ues[i];
                let q = self.ue_queues[i];
                let local = decisions.frequencies[i] * tau / ue.processing_density;
                let offload: f64 = self.ue_pairs[i].iter().map(|&k| rates[k] * tau).sum();
                let completion = local + offload;
                let available = q.backlog + arrivals[i];
                // When completion exceeds the backlog, only the available bits leave the UE;
                // the offloaded share shrinks in proportion.
                let share = if completion > available { available / completion } else { 1.0 };
                for &k in &self.ue_pairs[i] {
                    offloaded[k] = rates[k] * tau * share;
                }
                self.ue_queues[i] = q.update(arrivals[i], completion);
            }
            for (k, p) in self.pairs.iter().enumerate() {
                let service = core_freqs[k] * tau / sc.ues[p.ue].processing_density;
                self.server_queues[k].serve(offloaded[k], service);
            }

            // (7) moving averages
            for (k, &r) in rates.iter().enumerate() {
                self.server_queues[k].record_rate(r);
            }

            // (8) virtual queues
            let measured = t >= warmup;
            let mut ue_fired = vec![false; n_ue];
            for i in 0..n_ue {
                let ue = &sc.ues[i];
                let targets = TailTargets {
                    scale: ue.gpd_scale_threshold,
                    shape: ue.gpd_shape_threshold,
                    tolerance: ue.violation_tolerance,
                };
                if let Some(x) = self.ue_vqs[i].update(self.ue_queues[i].backlog, ue.queue_bound, targets) {
                    ue_logs[i].push(t, x);
                    ue_fired[i] = true;
                }
            }
            let mut pair_fired = vec![false; n_pairs];
            for (k, p) in self.pairs.iter().enumerate() {
                let server = &sc.servers[p.server];
                let avg_rate = self.server_queues[k].average_rate();
                let targets = TailTargets {
                    scale: server.gpd_scale_threshold.resolve(avg_rate, tau),
                    shape: server.gpd_shape_threshold,
                    tolerance: server.violation_tolerance,
                };
                let threshold = avg_rate * server.delay_bound;
                if let Some(x) = self.server_vqs[k].update(self.server_queues[k].backlog, threshold, targets) {
                    pair_logs[k].push(t, x);
                    pair_fired[k] = true;
                }
            }

            // (9) interference estimates
            for (k, &i) in interference.iter().enumerate() {
                self.estimators[k].observe(i);
            }

            // (10) metrics
            let tx_power: Vec<f64> = (0..n_ue)
                .map(|i| self.ue_pairs[i].iter().map(|&k| powers[k]).sum())
                .collect();
            if measured {
                for i in 0..n_ue {
                    let acc = &mut ue_acc[i];
                    acc.power += slot_power(c.cpu_power_coeff, decisions.frequencies[i], tx_power[i]);
                    acc.backlog += self.ue_queues[i].backlog;
                    acc.arrival += arrivals[i];
                    acc.violations += u64::from(ue_fired[i]);
                }
                for k in 0..n_pairs {
                    let acc = &mut pair_acc[k];
                    acc.power += powers[k];
                    acc.backlog += self.server_queues[k].backlog;
                    acc.rate += rates[k];
                    acc.violations += u64::from(pair_fired[k]);
                }
            }
            if let Some(stride) = options.record_stride {
                if t % stride.max(1) == 0 {
                    records.push(SlotRecord {
                        slot: t,
                        ues: (0..n_ue)
                            .map(|i| UeSlot {
                                arrival: arrivals[i],
                                freq: decisions.frequencies[i],
                                tx_power: tx_power[i],
                                backlog: self.ue_queues[i].backlog,
                                virtual_queues: self.ue_vqs[i],
                            })
                            .collect(),
                        pairs: self
                            .pairs
                            .iter()
                            .enumerate()
                            .map(|(k, p)| PairSlot {
                                ue: p.ue,
                                server: p.server,
                                power: powers[k],
                                rate: rates[k],
                                interference: interference[k],
                                offloaded: offloaded[k],
                                backlog: self.server_queues[k].backlog,
                                core_freq: core_freqs[k],
                                virtual_queues: self.server_vqs[k],
                            })
                            .collect(),
                    });
                }
            }
        }

        let measured_slots = c.num_slots.saturating_sub(warmup);
        let summary = self.summarize(measured_slots, &ue_acc, &pair_acc, &ue_logs, &pair_logs);
        Ok(RunOutput {
            summary,
            ue_exceedances: ue_logs,
            pair_exceedances: pair_logs,
            records,
        })
    }

    fn slot_problem(&self, a: &[f64], b: &[f64], gains: &crate::channel::ChannelState) -> SlotProblem {
        let sc = self.scenario;
        let c = &sc.config;
        SlotProblem {
            v: c.lyapunov_v,
            cpu_power_coeff: c.cpu_power_coeff,
            bandwidth: c.bandwidth,
            noise_psd: c.noise_psd,
            num_servers: sc.num_servers(),
            ues: (0..sc.num_ues())
                .map(|i| {
                    let ue = &sc.ues[i];
                    UeInput {
                        weight: a[i],
                        processing_density: ue.processing_density,
                        max_cpu_freq: ue.max_cpu_freq,
                        max_tx_power: ue.max_tx_power,
                        links: self.ue_pairs[i]
                            .iter()
                            .map(|&k| {
                                let p = self.pairs[k];
                                LinkInput {
                                    server: p.server,
                                    server_weight: b[k],
                                    gain: gains.gain(p.ue, p.server),
                                    interference: self.estimators[k].atoms(),
                                }
                            })
                            .collect(),
                    }
                })
                .collect(),
            servers: sc
                .servers
                .iter()
                .zip(&self.server_pairs)
                .map(|(s, members)| ServerInput {
                    num_cores: s.num_cores,
                    core_freq: s.core_freq,
                    ues: members
                        .iter()
                        .map(|&k| {
                            let i = self.pairs[k].ue;
                            ServerUeInput {
                                ue: i,
                                weight: b[k],
                                processing_density: sc.ues[i].processing_density,
                            }
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    fn pair_powers(&self, d: &SlotDecisions) -> Vec<f64> {
        let mut out = vec![0.0; self.pairs.len()];
        for (i, ks) in self.ue_pairs.iter().enumerate() {
            for (slot, &k) in ks.iter().enumerate() {
                out[k] = d.powers[i][slot];
            }
        }
        out
    }

    fn pair_core_freqs(&self, d: &SlotDecisions) -> Vec<f64> {
        let mut out = vec![0.0; self.pairs.len()];
        for (j, ks) in self.server_pairs.iter().enumerate() {
            for (slot, &k) in ks.iter().enumerate() {
                out[k] = d.core_freqs[j][slot];
            }
        }
        out
    }

    fn summarize(
        &self,
        measured: u64,
        ue_acc: &[Accum],
        pair_acc: &[Accum],
        ue_logs: &[ExceedanceLog],
        pair_logs: &[ExceedanceLog],
    ) -> RunSummary {
        let sc = self.scenario;
        let c = &sc.config;
        let n = measured as f64;
        let total_slots = c.num_slots as f64;
        let avg = |x: f64| if measured > 0 { x / n } else { 0.0 };
        let growth = |value: f64, scale: f64| {
            if c.num_slots == 0 || scale <= 0.0 {
                0.0
            } else {
                value / total_slots / scale
            }
        };
        let fit_of = |log: &ExceedanceLog| -> (Option<GpdFit>, Option<f64>) {
            match fit_gpd_mom(log) {
                Ok(fit) => (Some(fit), Some(ks_distance(log.samples(), &fit))),
                Err(_) => (None, None),
            }
        };

        let pairs: Vec<PairSummary> = self
            .pairs
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let server = &sc.servers[p.server];
                let acc = &pair_acc[k];
                let (fit, ks) = fit_of(&pair_logs[k]);
                let scale_threshold = server
                    .gpd_scale_threshold
                    .resolve(self.server_queues[k].average_rate(), c.slot_duration);
                let violation_rate = avg(acc.violations as f64);
                let vq = self.server_vqs[k];
                PairSummary {
                    ue: p.ue,
                    server: p.server,
                    avg_power: avg(acc.power),
                    avg_backlog: avg(acc.backlog),
                    avg_rate: avg(acc.rate),
                    violation_rate,
                    exceedances: pair_logs[k].len(),
                    fit,
                    ks_distance: ks,
                    scale_threshold,
                    verdicts: Verdicts {
                        violation: violation_rate <= server.violation_tolerance,
                        scale: fit.map(|f| f.scale <= scale_threshold),
                        shape: fit.map(|f| f.shape <= server.gpd_shape_threshold),
                    },
                    final_virtual_queues: vq,
                    virtual_queue_growth: [
                        growth(vq.excess, excess_mean_target(scale_threshold, server.gpd_shape_threshold)),
                        growth(
                            vq.excess_sq,
                            excess_second_moment_target(scale_threshold, server.gpd_shape_threshold),
                        ),
                        growth(vq.violation, 1.0),
                    ],
                }
            })
            .collect();

        let ues: Vec<UeSummary> = (0..sc.num_ues())
            .map(|i| {
                let ue = &sc.ues[i];
                let acc = &ue_acc[i];
                let (fit, ks) = fit_of(&ue_logs[i]);
                let links: Vec<(f64, f64)> = self.ue_pairs[i]
                    .iter()
                    .map(|&k| (pairs[k].avg_backlog, pairs[k].avg_rate))
                    .collect();
                let avg_backlog = avg(acc.backlog);
                let avg_arrival = avg(acc.arrival);
                let violation_rate = avg(acc.violations as f64);
                let vq = self.ue_vqs[i];
                UeSummary {
                    ue: i,
                    avg_power: avg(acc.power),
                    avg_backlog,
                    avg_arrival,
                    delay: if measured > 0 {
                        end_to_end_delay(c.slot_duration, avg_backlog, avg_arrival, &links)
                    } else {
                        None
                    },
                    violation_rate,
                    exceedances: ue_logs[i].len(),
                    fit,
                    ks_distance: ks,
                    verdicts: Verdicts {
                        violation: violation_rate <= ue.violation_tolerance,
                        scale: fit.map(|f| f.scale <= ue.gpd_scale_threshold),
                        shape: fit.map(|f| f.shape <= ue.gpd_shape_threshold),
                    },
                    final_virtual_queues: vq,
                    virtual_queue_growth: [
                        growth(vq.excess, excess_mean_target(ue.gpd_scale_threshold, ue.gpd_shape_threshold)),
                        growth(
                            vq.excess_sq,
                            excess_second_moment_target(ue.gpd_scale_threshold, ue.gpd_shape_threshold),
                        ),
                        growth(vq.violation, 1.0),
                    ],
                }
            })
            .collect();

        let defined = measured > 0 && !ues.is_empty();
        let mean_of = |xs: Vec<f64>| {
            if xs.is_empty() {
                None
            } else {
                Some(xs.iter().sum::<f64>() / xs.len() as f64)
            }
        };
        RunSummary {
            slots: c.num_slots,
            measured_slots: measured,
            mean_power: defined.then(|| ues.iter().map(|u| u.avg_power).sum::<f64>() / ues.len() as f64),
            mean_delay: if defined {
                mean_of(ues.iter().filter_map(|u| u.delay).collect())
            } else {
                None
            },
            pooled_violation_rate: defined.then(|| {
                ue_acc.iter().map(|a| a.violations).sum::<u64>() as f64 / (n * ues.len() as f64)
            }),
            ues,
            pairs,
        }
    }
}
