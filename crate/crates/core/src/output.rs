//! CSV and JSON artifacts. Every file starts with a provenance comment
//! carrying the config hash and seed; CSV bodies have a header row and use
//! shortest round-trip float formatting, so identical runs give identical
//! bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Scenario;
use crate::error::Result;
use crate::evt::{empirical_ccdf, parameter_trace, ExceedanceLog, GpdFit};
use crate::sim::{RunOutput, RunSummary, SlotRecord};
use crate::sweep::SweepResult;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// How `delay` in the summary is composed.
pub const DELAY_DEFINITION: &str = "tau * mean(Q_i) / mean(A_i) + sum_j w_ij * mean(Z_ji) / mean(R_ij), \
     w_ij = mean(R_ij) / sum_k mean(R_ik); queueing terms only, averages after warm-up";

/// `# config_sha256=…,seed=…,version=…`
pub fn provenance_line(config_hash: &str, seed: u64) -> String {
    format!("# config_sha256={config_hash},seed={seed},version={VERSION}\n")
}

fn csv(header: &str, config_hash: &str, seed: u64) -> String {
    let mut s = provenance_line(config_hash, seed);
    s.push_str(header);
    s.push('\n');
    s
}

pub fn ue_slots_csv(records: &[SlotRecord], config_hash: &str, seed: u64) -> String {
    let mut s = csv(
        "slot,ue,arrival_bits,cpu_freq_hz,tx_power_w,backlog_bits,vq_excess,vq_excess_sq,vq_violation",
        config_hash,
        seed,
    );
    for r in records {
        for (i, u) in r.ues.iter().enumerate() {
            let q = &u.virtual_queues;
            let _ = writeln!(
                s,
                "{},{i},{},{},{},{},{},{},{}",
                r.slot, u.arrival, u.freq, u.tx_power, u.backlog, q.excess, q.excess_sq, q.violation
            );
        }
    }
    s
}

pub fn pair_slots_csv(records: &[SlotRecord], config_hash: &str, seed: u64) -> String {
    let mut s = csv(
        "slot,ue,server,power_w,rate_bps,interference_w,offloaded_bits,backlog_bits,core_freq_hz,vq_excess,vq_excess_sq,vq_violation",
        config_hash,
        seed,
    );
    for r in records {
        for p in &r.pairs {
            let q = &p.virtual_queues;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.slot,
                p.ue,
                p.server,
                p.power,
                p.rate,
                p.interference,
                p.offloaded,
                p.backlog,
                p.core_freq,
                q.excess,
                q.excess_sq,
                q.violation
            );
        }
    }
    s
}

/// A monitored queue: a UE queue, or the queue for a UE at one server.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueId {
    Ue(usize),
    Server { ue: usize, server: usize },
}

impl QueueId {
    fn columns(self) -> String {
        match self {
            QueueId::Ue(i) => format!("ue,{i},"),
            QueueId::Server { ue, server } => format!("server,{ue},{server}"),
        }
    }
}

/// Every monitored queue of a run with its exceedance log and fit.
pub fn monitored_queues(out: &RunOutput) -> Vec<(QueueId, &ExceedanceLog, Option<GpdFit>)> {
    let ues = out
        .summary
        .ues
        .iter()
        .zip(&out.ue_exceedances)
        .map(|(u, log)| (QueueId::Ue(u.ue), log, u.fit));
    let pairs = out
        .summary
        .pairs
        .iter()
        .zip(&out.pair_exceedances)
        .map(|(p, log)| (QueueId::Server { ue: p.ue, server: p.server }, log, p.fit));
    ues.chain(pairs).collect()
}

pub fn exceedances_csv(out: &RunOutput, config_hash: &str, seed: u64) -> String {
    let mut s = csv("queue,ue,server,slot,excess_bits", config_hash, seed);
    for (id, log, _) in monitored_queues(out) {
        for (slot, x) in log.slots().iter().zip(log.samples()) {
            let _ = writeln!(s, "{},{slot},{x}", id.columns());
        }
    }
    s
}

/// Empirical and fitted CCDF at every distinct exceedance, for queues with a fit.
pub fn ccdf_csv(out: &RunOutput, config_hash: &str, seed: u64) -> String {
    let mut s = csv("queue,ue,server,excess_bits,empirical_ccdf,gpd_ccdf", config_hash, seed);
    for (id, log, fit) in monitored_queues(out) {
        let Some(fit) = fit else { continue };
        for (x, p) in empirical_ccdf(log.samples()).points() {
            let _ = writeln!(s, "{},{x},{p},{}", id.columns(), fit.ccdf(x));
        }
    }
    s
}

/// Refitted `(σ̂, ξ̂)` every `stride` exceedances.
pub fn gpd_trace_csv(out: &RunOutput, stride: usize, config_hash: &str, seed: u64) -> String {
    let mut s = csv("queue,ue,server,exceedances,slot,scale,shape", config_hash, seed);
    for (id, log, _) in monitored_queues(out) {
        for t in parameter_trace(log, stride) {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                id.columns(),
                t.exceedances,
                t.slot,
                t.scale,
                t.shape
            );
        }
    }
    s
}

pub fn sweep_csv(result: &SweepResult, config_hash: &str) -> String {
    let mut s = csv(
        "axis,value,reps,power_mean_w,power_std_w,delay_mean_s,delay_std_s,violation_mean,violation_std",
        config_hash,
        result.master_seed,
    );
    for r in &result.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            result.spec.axis,
            r.value,
            r.reps,
            r.power.mean,
            r.power.std,
            r.delay.mean,
            r.delay.std,
            r.violation.mean,
            r.violation.std
        );
    }
    s
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    tool: &'static str,
    version: &'static str,
    config_sha256: &'a str,
    seed: u64,
    delay_definition: &'static str,
    config: &'a Scenario,
    summary: &'a RunSummary,
}

/// Pretty-printed JSON with config echo, metrics and verdicts.
pub fn summary_json(scenario: &Scenario, summary: &RunSummary) -> Result<String> {
    let hash = scenario.config_hash();
    let doc = SummaryDocument {
        tool: "mec-offload",
        version: VERSION,
        config_sha256: &hash,
        seed: scenario.config.rng_seed,
        delay_definition: DELAY_DEFINITION,
        config: scenario,
        summary,
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, body)?;
    Ok(path)
}

/// `summary.json`, `ue_slots.csv` and `pair_slots.csv`.
pub fn write_run(dir: &Path, scenario: &Scenario, out: &RunOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let hash = scenario.config_hash();
    let seed = scenario.config.rng_seed;
    Ok(vec![
        write(dir, "summary.json", &summary_json(scenario, &out.summary)?)?,
        write(dir, "ue_slots.csv", &ue_slots_csv(&out.records, &hash, seed))?,
        write(dir, "pair_slots.csv", &pair_slots_csv(&out.records, &hash, seed))?,
    ])
}

/// `summary.json`, `exceedances.csv`, `ccdf.csv` and `gpd_trace.csv`.
pub fn write_tail(
    dir: &Path,
    scenario: &Scenario,
    out: &RunOutput,
    stride: usize,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let hash = scenario.config_hash();
    let seed = scenario.config.rng_seed;
    Ok(vec![
        write(dir, "summary.json", &summary_json(scenario, &out.summary)?)?,
        write(dir, "exceedances.csv", &exceedances_csv(out, &hash, seed))?,
        write(dir, "ccdf.csv", &ccdf_csv(out, &hash, seed))?,
        write(dir, "gpd_trace.csv", &gpd_trace_csv(out, stride, &hash, seed))?,
    ])
}

pub fn write_sweep(dir: &Path, base: &Scenario, result: &SweepResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    Ok(vec![write(dir, "sweep.csv", &sweep_csv(result, &base.config_hash()))?])
}
