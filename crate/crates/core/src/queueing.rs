//! Physical task queues and the virtual queues that enforce the
//! time-averaged tail constraints.
//!
//! All quantities are fluid (real-valued bits). Virtual queues for slot
//! `t + 1` are driven by the already-updated physical backlog, and every
//! firing indicator yields one exceedance sample `backlog − threshold > 0`.

use serde::{Deserialize, Serialize};

/// Target for the time-averaged conditional excess, `σ/(1 − ξ)`.
pub fn excess_mean_target(scale: f64, shape: f64) -> f64 {
    scale / (1.0 - shape)
}

/// Target for the time-averaged squared excess, `2σ²/((1 − ξ)(1 − 2ξ))`.
pub fn excess_second_moment_target(scale: f64, shape: f64) -> f64 {
    2.0 * scale * scale / ((1.0 - shape) * (1.0 - 2.0 * shape))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UePhysicalQueue {
    /// `Q_i`, bits.
    pub backlog: f64,
    /// `A_i` of the most recent update, bits.
    pub last_arrival: f64,
    /// `B_i` of the most recent update, bits.
    pub last_completion: f64,
}

impl UePhysicalQueue {
    /// `Q(t+1) = max{Q(t) + A(t) − B(t), 0}`.
    pub fn update(self, arrival: f64, completion: f64) -> Self {
        Self {
            backlog: (self.backlog + arrival - completion).max(0.0),
            last_arrival: arrival,
            last_completion: completion,
        }
    }
}

/// Offloaded-task queue `Z_ji` of one UE at one server, with the moving
/// average of that UE's offloading rate to the server.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ServerPhysicalQueue {
    /// `Z_ji`, bits.
    pub backlog: f64,
    rate_sum: f64,
    slots: u64,
}

impl ServerPhysicalQueue {
    /// `Z(t+1) = max{Z(t) + offloaded − served, 0}`, taken with equality.
    pub fn serve(&mut self, offloaded: f64, service: f64) {
        self.backlog = (self.backlog + offloaded - service).max(0.0);
    }

    /// Appends `R_ij(t)` (bits/s) to the moving average.
    pub fn record_rate(&mut self, rate: f64) {
        self.rate_sum += rate;
        self.slots += 1;
    }

    /// Queue update followed by the moving-average update.
    pub fn update(mut self, offloaded: f64, service: f64, rate: f64) -> Self {
        self.serve(offloaded, service);
        self.record_rate(rate);
        self
    }

    /// `R̃_ij`: arithmetic mean of all recorded rates, 0 before the first.
    pub fn average_rate(&self) -> f64 {
        if self.slots == 0 {
            0.0
        } else {
            self.rate_sum / self.slots as f64
        }
    }

    pub fn slots(&self) -> u64 {
        self.slots
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UeVirtualQueues {
    /// `Q_i^(X)`, bits.
    pub excess: f64,
    /// `Q_i^(Y)`, bits².
    pub excess_sq: f64,
    /// `Q_i^(Q)`.
    pub violation: f64,
}

/// Tail-constraint parameters shared by the UE and server updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailTargets {
    pub scale: f64,
    pub shape: f64,
    pub tolerance: f64,
}

fn advance(queues: [&mut f64; 3], exceedance: Option<f64>, t: TailTargets) {
    let [x, y, v] = queues;
    let fired = exceedance.is_some();
    if let Some(e) = exceedance {
        *x = (*x + e - excess_mean_target(t.scale, t.shape)).max(0.0);
        *y = (*y + e * e - excess_second_moment_target(t.scale, t.shape)).max(0.0);
    }
    *v = (*v + if fired { 1.0 } else { 0.0 } - t.tolerance).max(0.0);
}

fn exceedance(backlog: f64, threshold: f64) -> Option<f64> {
    (backlog > threshold).then_some(backlog - threshold)
}

impl UeVirtualQueues {
    /// Advances `Q^(X)`, `Q^(Y)`, `Q^(Q)` with the post-update backlog
    /// `Q_i(t+1)`. Returns the exceedance `Q_i(t+1) − d_i` when it is positive.
    pub fn update(&mut self, backlog: f64, bound: f64, targets: TailTargets) -> Option<f64> {
        let e = exceedance(backlog, bound);
        advance(
            [&mut self.excess, &mut self.excess_sq, &mut self.violation],
            e,
            targets,
        );
        e
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ServerVirtualQueues {
    /// `Q_ji^(X)`, bits.
    pub excess: f64,
    /// `Q_ji^(Y)`, bits².
    pub excess_sq: f64,
    /// `Q_ji^(Z)`.
    pub violation: f64,
}

impl ServerVirtualQueues {
    /// Same as [`UeVirtualQueues::update`] with threshold `R̃_ji(t) d_ji`.
    pub fn update(&mut self, backlog: f64, threshold: f64, targets: TailTargets) -> Option<f64> {
        let e = exceedance(backlog, threshold);
        advance(
            [&mut self.excess, &mut self.excess_sq, &mut self.violation],
            e,
            targets,
        );
        e
    }
}
