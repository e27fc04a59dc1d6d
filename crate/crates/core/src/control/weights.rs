//! Drift weights multiplying the UE completion rate (`a_i`) and the
//! server-side queue change (`b_ji`) in the drift-plus-penalty bound.

use crate::queueing::{ServerVirtualQueues, UeVirtualQueues};

/// `a_i = Q^(Q) + Q + A + [Q^(X) + (Q+A) + 2Q^(Y)(Q+A) + 2(Q+A)³]·1{Q + A > d}`.
///
/// `arrival` is the current slot's `A_i`, known before any decision.
pub fn ue_weight(backlog: f64, arrival: f64, vq: &UeVirtualQueues, bound: f64) -> f64 {
    let load = backlog + arrival;
    let mut a = vq.violation + load;
    if load > bound {
        a += vq.excess + load + 2.0 * vq.excess_sq * load + 2.0 * load.powi(3);
    }
    a
}

/// `b_ji = Q^(Z) + Z + [Q^(X) + Z + 2Q^(Y)Z + 2Z³]·1{Z + R_max·τ > R̃(t−1)·d_ji}`.
///
/// `max_offload_bits` is `R_i^max` over one slot and `threshold` is
/// `R̃_ji(t−1)·d_ji` in bits.
pub fn server_weight(
    backlog: f64,
    vq: &ServerVirtualQueues,
    threshold: f64,
    max_offload_bits: f64,
) -> f64 {
    let mut b = vq.violation + backlog;
    if backlog + max_offload_bits > threshold {
        b += vq.excess + backlog + 2.0 * vq.excess_sq * backlog + 2.0 * backlog.powi(3);
    }
    b
}
