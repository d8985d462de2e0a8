//! Exact oracles on small discrete problems: a gridworld toy with a wall,
//! value iteration, exhaustive plan enumeration, and the empirical
//! recovery-regret suite.

mod regret;
mod toy;
mod value;

pub use regret::{
    empirical_recovery_regret, fit_bound_constant, regret_decay_suite, RegretConfig, RegretReport, ShieldKind,
};
pub use toy::{DiscreteToyMdp, ToyActions, GRID};
pub use value::{
    brute_force_plan, perturbed_q, value_iteration, BruteForcePlan, ValueConstraint, ValueTables, ENUMERATION_GUARD,
};

#[cfg(test)]
mod tests;
