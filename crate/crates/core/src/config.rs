//! Static scenario description: physics, per-UE and per-server parameters,
//! placement and association policy.
//!
//! Internally everything is SI, except UE arrival rates, queue bounds and GPD
//! scale thresholds, which are bits per slot. The TOML schema accepts the
//! customary units (Mbps, dBm) and converts on load.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, Violation};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

/// Converts a rate in Mbps into bits per slot of `slot_duration` seconds.
pub fn mbps_to_bits_per_slot(mbps: f64, slot_duration: f64) -> f64 {
    mbps * 1e6 * slot_duration
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeParams {
    /// Mean arrivals, bits per slot.
    pub arrival_rate: f64,
    /// CPU cycles per bit.
    pub processing_density: f64,
    /// Hz (cycles/s).
    pub max_cpu_freq: f64,
    /// Watts.
    pub max_tx_power: f64,
    /// Queue length bound, bits.
    pub queue_bound: f64,
    pub violation_tolerance: f64,
    /// Bits.
    pub gpd_scale_threshold: f64,
    pub gpd_shape_threshold: f64,
    /// Linear power gain; used by the threshold association policy.
    pub access_gain_threshold: f64,
}

impl UeParams {
    /// Default physics for a UE with the given arrival rate (bits/slot) and
    /// processing density. Queue bound and scale threshold are `4λ`.
    pub fn with_load(arrival_rate: f64, processing_density: f64) -> Self {
        Self {
            arrival_rate,
            processing_density,
            max_cpu_freq: 1e9,
            max_tx_power: dbm_to_watts(20.0),
            queue_bound: 4.0 * arrival_rate,
            violation_tolerance: 0.01,
            gpd_scale_threshold: 4.0 * arrival_rate,
            gpd_shape_threshold: 0.3,
            access_gain_threshold: DEFAULT_ACCESS_GAIN_THRESHOLD,
        }
    }
}

/// Scale threshold for the server-side exceedance tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleThreshold {
    /// Fixed value in bits.
    Bits(f64),
    /// `k · R̃_ij(t) · τ` bits, tracking the moving-average offloading rate.
    RateMultiple(f64),
}

impl ScaleThreshold {
    pub fn resolve(self, avg_rate: f64, slot_duration: f64) -> f64 {
        match self {
            ScaleThreshold::Bits(bits) => bits,
            ScaleThreshold::RateMultiple(k) => k * avg_rate * slot_duration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerParams {
    pub num_cores: usize,
    /// Per-core frequency, Hz.
    pub core_freq: f64,
    /// Queuing delay bound for offloaded tasks, seconds.
    pub delay_bound: f64,
    pub violation_tolerance: f64,
    pub gpd_scale_threshold: ScaleThreshold,
    pub gpd_shape_threshold: f64,
}

impl Default for ServerParams {
    fn default() -> Self {
        Self {
            num_cores: 9,
            core_freq: 1e10,
            delay_bound: 0.2,
            violation_tolerance: 0.01,
            gpd_scale_threshold: ScaleThreshold::RateMultiple(4.0),
            gpd_shape_threshold: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum Association {
    /// `S_i = { j : E[h_ij] ≥ h_i^th }`.
    Threshold,
    /// Each UE accesses its `k` nearest servers.
    Nearest { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Hz.
    pub bandwidth: f64,
    /// W/Hz.
    pub noise_psd: f64,
    /// W·s³/cycle³.
    pub cpu_power_coeff: f64,
    pub lyapunov_v: f64,
    /// Seconds.
    pub slot_duration: f64,
    pub num_slots: u64,
    pub rng_seed: u64,
    /// Side of the square deployment area, meters.
    pub area_side: f64,
    pub association: Association,
    /// Explicit UE positions; uniform random placement when absent.
    pub ue_positions: Option<Vec<[f64; 2]>>,
    /// Explicit server positions; uniform grid when absent.
    pub server_positions: Option<Vec<[f64; 2]>>,
    /// Fraction of slots excluded from summary statistics.
    pub warmup_fraction: f64,
    /// Size of one Poisson arrival unit, bits.
    pub arrival_granularity: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            bandwidth: 10e6,
            noise_psd: dbm_to_watts(-174.0),
            cpu_power_coeff: 1e-27,
            lyapunov_v: 0.0,
            slot_duration: 0.05,
            num_slots: 100_000,
            rng_seed: 1,
            area_side: 100.0,
            association: Association::Nearest { k: 1 },
            ue_positions: None,
            server_positions: None,
            warmup_fraction: 0.1,
            arrival_granularity: 100.0,
        }
    }
}

/// Everything needed to run one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: SimConfig,
    pub ues: Vec<UeParams>,
    pub servers: Vec<ServerParams>,
}

pub const DEFAULT_ACCESS_GAIN_THRESHOLD: f64 = 1e-11;

impl Scenario {
    /// The evaluation scenario: 36 UEs and four 9-core servers in a
    /// 100 m × 100 m area, nearest-server association, λ = 1.3 Mbps,
    /// L = 737.5 cycles/bit, V = 0.
    pub fn baseline() -> Self {
        Self::homogeneous(36, 4, 1.3, 737.5)
    }

    /// Default physics with `num_ues` identical UEs at `arrival_mbps` and
    /// `processing_density`, and `num_servers` default servers.
    pub fn homogeneous(
        num_ues: usize,
        num_servers: usize,
        arrival_mbps: f64,
        processing_density: f64,
    ) -> Self {
        let config = SimConfig::default();
        let lambda = mbps_to_bits_per_slot(arrival_mbps, config.slot_duration);
        Self {
            ues: vec![UeParams::with_load(lambda, processing_density); num_ues],
            servers: vec![ServerParams::default(); num_servers],
            config,
        }
    }

    pub fn num_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn num_servers(&self) -> usize {
        self.servers.len()
    }

    /// Every violated invariant, in field order. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let c = &self.config;
        let mut positive = |field: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                out.push(Violation::new(field, "must be positive"));
            }
        };
        positive("bandwidth", c.bandwidth);
        positive("noise_psd", c.noise_psd);
        positive("cpu_power_coeff", c.cpu_power_coeff);
        positive("slot_duration", c.slot_duration);
        positive("area_side", c.area_side);
        positive("arrival_granularity", c.arrival_granularity);
        if !(c.lyapunov_v >= 0.0 && c.lyapunov_v.is_finite()) {
            out.push(Violation::new("lyapunov_v", "must be non-negative"));
        }
        if c.num_slots == 0 {
            out.push(Violation::new("num_slots", "num_slots must be positive"));
        }
        if !(0.0..1.0).contains(&c.warmup_fraction) {
            out.push(Violation::new("warmup_fraction", "must be in [0, 1)"));
        }
        if self.ues.is_empty() {
            out.push(Violation::new("ues", "at least one UE is required"));
        }
        if self.servers.is_empty() {
            out.push(Violation::new("servers", "at least one server is required"));
        }
        if let Association::Nearest { k } = c.association {
            if k > self.servers.len() {
                out.push(Violation::new(
                    "association.k",
                    format!("{k} servers per UE exceeds the {} servers", self.servers.len()),
                ));
            }
        }
        check_positions(&mut out, "ue_positions", c.ue_positions.as_deref(), self.ues.len(), c.area_side);
        check_positions(
            &mut out,
            "server_positions",
            c.server_positions.as_deref(),
            self.servers.len(),
            c.area_side,
        );

        for (i, ue) in self.ues.iter().enumerate() {
            let f = |name: &str| format!("ues[{i}].{name}");
            for (name, v) in [
                ("arrival_rate", ue.arrival_rate),
                ("processing_density", ue.processing_density),
                ("max_cpu_freq", ue.max_cpu_freq),
                ("max_tx_power", ue.max_tx_power),
                ("queue_bound", ue.queue_bound),
                ("gpd_scale_threshold", ue.gpd_scale_threshold),
                ("access_gain_threshold", ue.access_gain_threshold),
            ] {
                if !(v > 0.0) || v.is_nan() {
                    out.push(Violation::new(f(name), "must be positive"));
                }
            }
            check_tolerance(&mut out, f("violation_tolerance"), ue.violation_tolerance);
            check_shape(&mut out, f("gpd_shape_threshold"), ue.gpd_shape_threshold);
        }
        for (j, s) in self.servers.iter().enumerate() {
            let f = |name: &str| format!("servers[{j}].{name}");
            if s.num_cores == 0 {
                out.push(Violation::new(f("num_cores"), "at least one core is required"));
            }
            for (name, v) in [("core_freq", s.core_freq), ("delay_bound", s.delay_bound)] {
                if !(v > 0.0 && v.is_finite()) {
                    out.push(Violation::new(f(name), "must be positive"));
                }
            }
            let scale = match s.gpd_scale_threshold {
                ScaleThreshold::Bits(v) | ScaleThreshold::RateMultiple(v) => v,
            };
            if !(scale > 0.0 && scale.is_finite()) {
                out.push(Violation::new(f("gpd_scale_threshold"), "must be positive"));
            }
            check_tolerance(&mut out, f("violation_tolerance"), s.violation_tolerance);
            check_shape(&mut out, f("gpd_shape_threshold"), s.gpd_shape_threshold);
        }
        out
    }

    pub fn validated(self) -> Result<Self> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidConfig(violations))
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text)?;
        file.resolve()
    }

    pub fn from_toml_file(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

fn check_tolerance(out: &mut Vec<Violation>, field: String, eps: f64) {
    if !(eps > 0.0) {
        out.push(Violation::new(field, "tolerance must be positive"));
    } else if !(eps < 1.0) {
        out.push(Violation::new(field, "tolerance must be below 1"));
    }
}

fn check_shape(out: &mut Vec<Violation>, field: String, xi: f64) {
    if !(xi < 0.5) {
        out.push(Violation::new(field, "shape threshold must be < 1/2"));
    }
}

fn check_positions(
    out: &mut Vec<Violation>,
    field: &str,
    positions: Option<&[[f64; 2]]>,
    expected: usize,
    side: f64,
) {
    let Some(positions) = positions else { return };
    if positions.len() != expected {
        out.push(Violation::new(
            field,
            format!("{} positions given for {expected} nodes", positions.len()),
        ));
    }
    for (k, p) in positions.iter().enumerate() {
        if !p.iter().all(|c| (0.0..=side).contains(c)) {
            out.push(Violation::new(format!("{field}[{k}]"), "outside the deployment area"));
        }
    }
}

// ---------------------------------------------------------------------------
// TOML schema

/// On-disk configuration. Every field has a default, so a file only needs
/// the keys it changes. See `book/src/configuration.md` for the schema.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub physics: PhysicsSection,
    pub run: RunSection,
    pub topology: TopologySection,
    #[serde(rename = "ue_class")]
    pub ue_classes: Vec<UeClass>,
    #[serde(rename = "server_class")]
    pub server_classes: Vec<ServerClass>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub cpu_power_coeff: f64,
    pub slot_duration_s: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self {
            bandwidth_hz: 10e6,
            noise_psd_dbm_per_hz: -174.0,
            cpu_power_coeff: 1e-27,
            slot_duration_s: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub lyapunov_v: f64,
    pub num_slots: u64,
    pub rng_seed: u64,
    pub warmup_fraction: f64,
    pub arrival_granularity_bits: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        let c = SimConfig::default();
        Self {
            lyapunov_v: c.lyapunov_v,
            num_slots: c.num_slots,
            rng_seed: c.rng_seed,
            warmup_fraction: c.warmup_fraction,
            arrival_granularity_bits: c.arrival_granularity,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySection {
    pub area_side_m: f64,
    /// `"nearest"` or `"threshold"`.
    pub association: String,
    pub servers_per_ue: usize,
    pub ue_positions: Option<Vec<[f64; 2]>>,
    pub server_positions: Option<Vec<[f64; 2]>>,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self {
            area_side_m: 100.0,
            association: "nearest".into(),
            servers_per_ue: 1,
            ue_positions: None,
            server_positions: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UeClass {
    pub count: usize,
    pub arrival_rate_mbps: f64,
    pub processing_density: f64,
    pub max_cpu_freq_hz: f64,
    pub max_tx_power_dbm: f64,
    /// Defaults to four slots' worth of mean arrivals.
    pub queue_bound_bits: Option<f64>,
    pub violation_tolerance: f64,
    /// Defaults to four slots' worth of mean arrivals.
    pub gpd_scale_threshold_bits: Option<f64>,
    pub gpd_shape_threshold: f64,
    pub access_gain_threshold: f64,
}

impl Default for UeClass {
    fn default() -> Self {
        Self {
            count: 36,
            arrival_rate_mbps: 1.3,
            processing_density: 737.5,
            max_cpu_freq_hz: 1e9,
            max_tx_power_dbm: 20.0,
            queue_bound_bits: None,
            violation_tolerance: 0.01,
            gpd_scale_threshold_bits: None,
            gpd_shape_threshold: 0.3,
            access_gain_threshold: DEFAULT_ACCESS_GAIN_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerClass {
    pub count: usize,
    pub num_cores: usize,
    pub core_freq_hz: f64,
    pub delay_bound_s: f64,
    pub violation_tolerance: f64,
    /// Fixed scale threshold in bits; overrides `gpd_scale_rate_multiple`.
    pub gpd_scale_threshold_bits: Option<f64>,
    pub gpd_scale_rate_multiple: f64,
    pub gpd_shape_threshold: f64,
}

impl Default for ServerClass {
    fn default() -> Self {
        Self {
            count: 4,
            num_cores: 9,
            core_freq_hz: 1e10,
            delay_bound_s: 0.2,
            violation_tolerance: 0.01,
            gpd_scale_threshold_bits: None,
            gpd_scale_rate_multiple: 4.0,
            gpd_shape_threshold: 0.3,
        }
    }
}

impl ScenarioFile {
    pub fn resolve(&self) -> Result<Scenario> {
        let tau = self.physics.slot_duration_s;
        let association = match self.topology.association.as_str() {
            "threshold" => Association::Threshold,
            "nearest" => Association::Nearest {
                k: self.topology.servers_per_ue,
            },
            other => {
                return Err(Error::InvalidConfig(vec![Violation::new(
                    "topology.association",
                    format!("unknown policy {other:?} (expected \"nearest\" or \"threshold\")"),
                )]))
            }
        };
        let config = SimConfig {
            bandwidth: self.physics.bandwidth_hz,
            noise_psd: dbm_to_watts(self.physics.noise_psd_dbm_per_hz),
            cpu_power_coeff: self.physics.cpu_power_coeff,
            lyapunov_v: self.run.lyapunov_v,
            slot_duration: tau,
            num_slots: self.run.num_slots,
            rng_seed: self.run.rng_seed,
            area_side: self.topology.area_side_m,
            association,
            ue_positions: self.topology.ue_positions.clone(),
            server_positions: self.topology.server_positions.clone(),
            warmup_fraction: self.run.warmup_fraction,
            arrival_granularity: self.run.arrival_granularity_bits,
        };

        let ue_classes = if self.ue_classes.is_empty() {
            vec![UeClass::default()]
        } else {
            self.ue_classes.clone()
        };
        let server_classes = if self.server_classes.is_empty() {
            vec![ServerClass::default()]
        } else {
            self.server_classes.clone()
        };

        let ues = ue_classes
            .iter()
            .flat_map(|c| {
                let lambda = mbps_to_bits_per_slot(c.arrival_rate_mbps, tau);
                let ue = UeParams {
                    arrival_rate: lambda,
                    processing_density: c.processing_density,
                    max_cpu_freq: c.max_cpu_freq_hz,
                    max_tx_power: dbm_to_watts(c.max_tx_power_dbm),
                    queue_bound: c.queue_bound_bits.unwrap_or(4.0 * lambda),
                    violation_tolerance: c.violation_tolerance,
                    gpd_scale_threshold: c.gpd_scale_threshold_bits.unwrap_or(4.0 * lambda),
                    gpd_shape_threshold: c.gpd_shape_threshold,
                    access_gain_threshold: c.access_gain_threshold,
                };
                std::iter::repeat_n(ue, c.count)
            })
            .collect();
        let servers = server_classes
            .iter()
            .flat_map(|c| {
                let s = ServerParams {
                    num_cores: c.num_cores,
                    core_freq: c.core_freq_hz,
                    delay_bound: c.delay_bound_s,
                    violation_tolerance: c.violation_tolerance,
                    gpd_scale_threshold: match c.gpd_scale_threshold_bits {
                        Some(bits) => ScaleThreshold::Bits(bits),
                        None => ScaleThreshold::RateMultiple(c.gpd_scale_rate_multiple),
                    },
                    gpd_shape_threshold: c.gpd_shape_threshold,
                };
                std::iter::repeat_n(s, c.count)
            })
            .collect();
        Ok(Scenario {
            config,
            ues,
            servers,
        })
    }
}
