//! Path loss, block Rayleigh fading, and the co-channel offloading rate.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::topology::Topology;

/// Transmitter–receiver distances below this are clamped, meters.
pub const MIN_DISTANCE: f64 = 1.0;

/// Indoor 5.8 GHz log-distance model, `24 log10(x) + 20 log10(5.8) + 60` dB.
pub fn path_loss_db(distance: f64) -> f64 {
    let x = distance.max(MIN_DISTANCE);
    24.0 * x.log10() + 20.0 * 5.8f64.log10() + 60.0
}

/// Mean linear power gain at `distance` (fading has unit mean).
pub fn path_gain(distance: f64) -> f64 {
    10f64.powf(-path_loss_db(distance) / 10.0)
}

/// Per-slot linear power gains `h_ij`, row-major by UE.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    gains: Vec<f64>,
    num_servers: usize,
}

impl ChannelState {
    pub fn from_gains(gains: Vec<f64>, num_servers: usize) -> Self {
        assert_eq!(gains.len() % num_servers.max(1), 0);
        Self { gains, num_servers }
    }

    #[inline]
    pub fn gain(&self, ue: usize, server: usize) -> f64 {
        self.gains[ue * self.num_servers + server]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gains
    }
}

/// Draws one block of fading: `h_ij = PL(d_ij) · g`, `g ~ Exp(1)`.
pub fn sample_gains<R: Rng + ?Sized>(topology: &Topology, rng: &mut R) -> ChannelState {
    let gains = topology
        .expected_gains()
        .iter()
        .map(|&mean| {
            let g: f64 = Exp1.sample(rng);
            mean * g
        })
        .collect();
    ChannelState::from_gains(gains, topology.num_servers())
}

/// Achievable rate in bits/s on a server's `W/|S|` sub-band:
/// `(W/|S|) log2(1 + P h / (N0 W/|S| + I))`.
pub fn offloading_rate(
    power: f64,
    gain: f64,
    interference: f64,
    num_servers: usize,
    bandwidth: f64,
    noise_psd: f64,
) -> f64 {
    if power <= 0.0 {
        return 0.0;
    }
    let band = bandwidth / num_servers as f64;
    band * (power * gain / (noise_psd * band + interference)).ln_1p() / std::f64::consts::LN_2
}
