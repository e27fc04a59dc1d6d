//! Parameter sweeps with replications, run in parallel.
//!
//! Replication `r` of every sweep point uses the seed
//! `derive_seed(master, DOMAIN_SWEEP, r)`, so points on the same replication
//! share UE placement, arrivals and fading (common random numbers).

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{mbps_to_bits_per_slot, Association, Scenario};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, DOMAIN_SWEEP};
use crate::sim::{run, RunOptions, RunSummary};
use crate::topology::build_topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Lyapunov weight `V`.
    V,
    /// Per-UE arrival rate, Mbps. Queue bound and scale threshold follow as `4λ`.
    ArrivalRate,
    /// Per-UE processing density, cycles/bit.
    ProcessingDensity,
    /// Number of nearest servers each UE accesses.
    ServersPerUe,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::V => "V",
            SweepAxis::ArrivalRate => "arrival_rate",
            SweepAxis::ProcessingDensity => "processing_density",
            SweepAxis::ServersPerUe => "servers_per_ue",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = base.clone();
        match self {
            SweepAxis::V => s.config.lyapunov_v = value,
            SweepAxis::ArrivalRate => {
                let lambda = mbps_to_bits_per_slot(value, s.config.slot_duration);
                for ue in &mut s.ues {
                    ue.arrival_rate = lambda;
                    ue.queue_bound = 4.0 * lambda;
                    ue.gpd_scale_threshold = 4.0 * lambda;
                }
            }
            SweepAxis::ProcessingDensity => {
                for ue in &mut s.ues {
                    ue.processing_density = value;
                }
            }
            SweepAxis::ServersPerUe => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::Sweep(format!(
                        "servers_per_ue must be a positive integer, got {value}"
                    )));
                }
                s.config.association = Association::Nearest { k: value as usize };
            }
        }
        s.validated()
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V" | "v" => Ok(SweepAxis::V),
            "arrival_rate" => Ok(SweepAxis::ArrivalRate),
            "processing_density" => Ok(SweepAxis::ProcessingDensity),
            "servers_per_ue" => Ok(SweepAxis::ServersPerUe),
            other => Err(Error::Sweep(format!(
                "unknown sweep axis `{other}` (expected V, arrival_rate, processing_density or servers_per_ue)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub reps: usize,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, values: Vec<f64>, reps: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Sweep("sweep needs at least one value".into()));
        }
        if reps == 0 {
            return Err(Error::Sweep("replications must be at least 1".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Sweep(format!("sweep value {v} is not finite")));
        }
        Ok(Self { axis, values, reps })
    }

    /// Parses `axis=v1,v2,...`.
    pub fn parse(text: &str, reps: usize) -> Result<Self> {
        let (axis, list) = text
            .split_once('=')
            .ok_or_else(|| Error::Sweep(format!("expected <axis>=<v1,v2,...>, got `{text}`")))?;
        let values = list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Sweep(format!("bad sweep value `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(axis.trim().parse()?, values, reps)
    }
}

/// Seed for replication `rep` of a sweep.
pub fn replication_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, DOMAIN_SWEEP, rep as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub value: f64,
    pub rep: usize,
    pub seed: u64,
    pub summary: RunSummary,
}

/// Mean and sample standard deviation over replications. Undefined
/// replications (e.g. no arrivals) are skipped; `count` says how many
/// entered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let xs: Vec<f64> = values.into_iter().flatten().collect();
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN, count: 0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, count: n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub reps: usize,
    pub power: Stat,
    pub delay: Stat,
    pub violation: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub master_seed: u64,
    pub runs: Vec<SweepRun>,
    pub rows: Vec<SweepRow>,
}

/// Runs every (value, replication) pair on the rayon pool. Results come back
/// in (value, replication) order regardless of scheduling.
pub fn run_sweep(base: &Scenario, spec: &SweepSpec) -> Result<SweepResult> {
    let master = base.config.rng_seed;
    let jobs: Vec<(f64, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.reps).map(move |r| (v, r)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(value, rep)| {
            let mut scenario = spec.axis.apply(base, value)?;
            scenario.config.rng_seed = replication_seed(master, rep);
            let topology = build_topology(&scenario)?;
            let out = run(&scenario, &topology, RunOptions::default())?;
            Ok(SweepRun {
                value,
                rep,
                seed: scenario.config.rng_seed,
                summary: out.summary,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = runs
        .chunks(spec.reps)
        .map(|chunk| SweepRow {
            value: chunk[0].value,
            reps: chunk.len(),
            power: Stat::of(chunk.iter().map(|r| r.summary.mean_power)),
            delay: Stat::of(chunk.iter().map(|r| r.summary.mean_delay)),
            violation: Stat::of(chunk.iter().map(|r| r.summary.pooled_violation_rate)),
        })
        .collect();
    Ok(SweepResult {
        spec: spec.clone(),
        master_seed: master,
        runs,
        rows,
    })
}
