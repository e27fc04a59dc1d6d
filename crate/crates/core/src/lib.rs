//! Slot-based simulation of task offloading from user equipment (UEs) to a
//! set of multi-core edge servers, driven by a Lyapunov drift-plus-penalty
//! controller with extreme-value constraints on queue tails.
//!
//! ```no_run
//! use mec_offload::{build_topology, run, RunOptions, Scenario};
//!
//! let mut scenario = Scenario::baseline();
//! scenario.config.num_slots = 1_000;
//! let topology = build_topology(&scenario)?;
//! let out = run(&scenario, &topology, RunOptions::default())?;
//! println!("{:?}", out.summary.mean_power);
//! # Ok::<(), mec_offload::Error>(())
//! ```

// `!(x > 0.0)` is how NaN gets rejected alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod control;
pub mod error;
pub mod evt;
pub mod interference;
pub mod output;
pub mod queueing;
pub mod rng;
pub mod sim;
pub mod sweep;
pub mod topology;

pub use config::{Association, Scenario, ScaleThreshold, ServerParams, SimConfig, UeParams};
pub use error::{Error, Result, Violation};
pub use sim::{run, RunOptions, RunOutput, RunSummary};
pub use sweep::{run_sweep, SweepAxis, SweepResult, SweepRow, SweepSpec};
pub use topology::{build_topology, Topology};

// Guide chapters run as doc-tests so their snippets stay in sync with the API.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/system-model.md")]
    mod system_model {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/queues.md")]
    mod queues {}
    #[doc = include_str!("../../../book/src/controller.md")]
    mod controller {}
    #[doc = include_str!("../../../book/src/interference.md")]
    mod interference {}
    #[doc = include_str!("../../../book/src/tails.md")]
    mod tails {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/sweeps.md")]
    mod sweeps {}
}
