//! Safe reinforcement learning with dynamic model predictive shielding.
//!
//! The crate is `no_std` (it only needs `alloc`) and holds every algorithmic
//! piece: the deterministic benchmark dynamics, the halting backup policy and
//! recoverability check, the MPS and DMPS shield compositions, the
//! continuous-action MCTS recovery planner, a small TD3 learner, the
//! shield-in-the-loop training loop, and the discrete oracles used to verify
//! the planner and the recovery-regret decay.
//!
//! File formats, configuration parsing and the command line live in the
//! companion `dmps` crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_op_in_unsafe_fn)]

extern crate alloc;

pub mod env;
mod error;
pub mod math;
pub mod mdp;
pub mod nn;
pub mod oracle;
pub mod planner;
pub mod replay;
pub mod rng;
pub mod scaling;
pub mod shield;
pub mod td3;
pub mod trainer;

pub use env::{Dynamics, Env, EnvConfig, EnvName};
pub use error::{CoreError, CoreResult};
pub use mdp::{n_step_return, ActionBounds, ActionVec, Discount, EnvState};
pub use planner::{plan_rec, PlanResult, PlannerConfig};
pub use shield::{ShieldConfig, ShieldDecision, ShieldMode, Source};
pub use td3::{LearnerConfig, Td3Agent};
pub use trainer::{EpisodeMetrics, RunSpec, TrainConfig};
