//! Node placement and UE ↔ server association.

use rand::Rng;

use crate::channel::path_gain;
use crate::config::{Association, Scenario};
use crate::error::{Error, Result};
use crate::rng::{substream, DOMAIN_PLACEMENT};

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    ue_positions: Vec<[f64; 2]>,
    server_positions: Vec<[f64; 2]>,
    /// `E[h_ij]`, row-major by UE.
    expected_gains: Vec<f64>,
    /// `S_i`, ascending server index.
    serving: Vec<Vec<usize>>,
    /// `U_j`, ascending UE index.
    accessing: Vec<Vec<usize>>,
}

/// Servers on a uniform grid of cell centers covering the square.
pub fn grid_positions(n: usize, side: f64) -> Vec<[f64; 2]> {
    if n == 0 {
        return Vec::new();
    }
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    (0..n)
        .map(|k| {
            let (r, c) = (k / cols, k % cols);
            [
                (c as f64 + 0.5) * side / cols as f64,
                (r as f64 + 0.5) * side / rows as f64,
            ]
        })
        .collect()
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn build_topology(scenario: &Scenario) -> Result<Topology> {
    let c = &scenario.config;
    let num_servers = scenario.num_servers();
    let server_positions = c
        .server_positions
        .clone()
        .unwrap_or_else(|| grid_positions(num_servers, c.area_side));
    let ue_positions = match &c.ue_positions {
        Some(p) => p.clone(),
        None => {
            let mut rng = substream(c.rng_seed, DOMAIN_PLACEMENT, 0);
            (0..scenario.num_ues())
                .map(|_| {
                    [
                        rng.random_range(0.0..=c.area_side),
                        rng.random_range(0.0..=c.area_side),
                    ]
                })
                .collect()
        }
    };
    if ue_positions.len() != scenario.num_ues() || server_positions.len() != num_servers {
        return Err(Error::Topology("position count does not match node count".into()));
    }

    let expected_gains: Vec<f64> = ue_positions
        .iter()
        .flat_map(|&u| server_positions.iter().map(move |&s| path_gain(distance(u, s))))
        .collect();

    let serving: Vec<Vec<usize>> = match c.association {
        Association::Threshold => scenario
            .ues
            .iter()
            .enumerate()
            .map(|(i, ue)| {
                (0..num_servers)
                    .filter(|&j| expected_gains[i * num_servers + j] >= ue.access_gain_threshold)
                    .collect()
            })
            .collect(),
        Association::Nearest { k } => {
            if k > num_servers {
                return Err(Error::Topology(format!(
                    "{k} servers per UE requested but only {num_servers} exist"
                )));
            }
            ue_positions
                .iter()
                .map(|&u| {
                    let mut order: Vec<usize> = (0..num_servers).collect();
                    // stable sort keeps the lower index first on ties
                    order.sort_by(|&a, &b| {
                        distance(u, server_positions[a]).total_cmp(&distance(u, server_positions[b]))
                    });
                    order.truncate(k);
                    order.sort_unstable();
                    order
                })
                .collect()
        }
    };

    let mut accessing = vec![Vec::new(); num_servers];
    for (i, s) in serving.iter().enumerate() {
        for &j in s {
            accessing[j].push(i);
        }
    }

    Ok(Topology {
        ue_positions,
        server_positions,
        expected_gains,
        serving,
        accessing,
    })
}

impl Topology {
    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn num_servers(&self) -> usize {
        self.server_positions.len()
    }

    pub fn ue_positions(&self) -> &[[f64; 2]] {
        &self.ue_positions
    }

    pub fn server_positions(&self) -> &[[f64; 2]] {
        &self.server_positions
    }

    pub fn expected_gains(&self) -> &[f64] {
        &self.expected_gains
    }

    pub fn expected_gain(&self, ue: usize, server: usize) -> f64 {
        self.expected_gains[ue * self.num_servers() + server]
    }

    /// `S_i`.
    pub fn servers_of(&self, ue: usize) -> &[usize] {
        &self.serving[ue]
    }

    /// `U_j`.
    pub fn ues_of(&self, server: usize) -> &[usize] {
        &self.accessing[server]
    }
}
