use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::toy::DiscreteToyMdp;
use crate::error::{CoreError, CoreResult};
use crate::rng::Rng;

/// Largest number of action sequences [`brute_force_plan`] will enumerate.
pub const ENUMERATION_GUARD: u64 = 1_000_000;

/// Which actions the Bellman maximum ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueConstraint {
    All,
    /// Actions with a recoverable successor, when the state has any.
    Recoverable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    pub v: Vec<f64>,
    /// `q[s * |A| + a]`.
    pub q: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
}

fn state_value(toy: &DiscreteToyMdp, q: &[f64], s: usize, constraint: ValueConstraint) -> f64 {
    let na = toy.n_actions();
    let row = &q[s * na..(s + 1) * na];
    let unconstrained = || row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match constraint {
        ValueConstraint::All => unconstrained(),
        ValueConstraint::Recoverable => {
            let best = toy.safe_actions(s).map(|a| row[a]).fold(f64::NEG_INFINITY, f64::max);
            if best.is_finite() {
                best
            } else {
                unconstrained()
            }
        }
    }
}

/// Synchronous value iteration. Sweeps stop once the change is small enough
/// that both tables are within `tol / 2` of the fixed point in sup-norm.
pub fn value_iteration(toy: &DiscreteToyMdp, tol: f64, constraint: ValueConstraint) -> ValueTables {
    let (ns, na) = (toy.n_states(), toy.n_actions());
    let stop = tol * (1.0 - toy.gamma) / (2.0 * toy.gamma);
    let mut v = vec![0.0; ns];
    let mut q = vec![0.0; ns * na];
    let mut iterations = 0;
    loop {
        for s in 0..ns {
            for a in 0..na {
                q[s * na + a] = toy.reward(s, a) + toy.gamma * v[toy.next(s, a)];
            }
        }
        let mut residual: f64 = 0.0;
        for (s, vs) in v.iter_mut().enumerate() {
            let new = state_value(toy, &q, s, constraint);
            residual = residual.max((new - *vs).abs());
            *vs = new;
        }
        iterations += 1;
        if residual <= stop {
            for s in 0..ns {
                for a in 0..na {
                    q[s * na + a] = toy.reward(s, a) + toy.gamma * v[toy.next(s, a)];
                }
            }
            return ValueTables { v, q, iterations, residual };
        }
    }
}

/// `q + uniform(−eps, eps)` per entry.
pub fn perturbed_q(q: &[f64], eps: f64, rng: &mut Rng) -> Vec<f64> {
    q.iter().map(|x| x + if eps > 0.0 { rng.gen_range(-eps..eps) } else { 0.0 }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForcePlan {
    pub actions: Vec<usize>,
    pub objective: f64,
}

/// Exhaustive optimum of the recovery-planning objective over sequences of
/// `n + 1` actions whose successors are all recoverable. The last action is
/// valued by `q`; a prefix whose end state has no recoverable action is
/// valued by its own last action. Ties go to the lexicographically first
/// sequence. `None` when no action from `s0` is recoverable.
pub fn brute_force_plan(toy: &DiscreteToyMdp, s0: usize, n: usize, q: &[f64]) -> CoreResult<Option<BruteForcePlan>> {
    let count = (toy.n_actions() as u64).checked_pow(n as u32 + 1).unwrap_or(u64::MAX);
    if count > ENUMERATION_GUARD {
        return Err(CoreError::EnumerationGuard { count, guard: ENUMERATION_GUARD });
    }
    let mut prefix = Vec::with_capacity(n + 1);
    let mut best: Option<BruteForcePlan> = None;
    search(toy, s0, 0, n + 1, q, 0.0, 1.0, &mut prefix, &mut best);
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn search(
    toy: &DiscreteToyMdp,
    s: usize,
    depth: usize,
    len: usize,
    q: &[f64],
    acc: f64,
    weight: f64,
    prefix: &mut Vec<usize>,
    best: &mut Option<BruteForcePlan>,
) {
    for a in 0..toy.n_actions() {
        let n = toy.next(s, a);
        if !toy.recoverable(n) {
            continue;
        }
        prefix.push(a);
        let dead_end = toy.safe_actions(n).next().is_none();
        if depth + 1 == len || dead_end {
            let objective = acc + weight * q[toy.sa(s, a)];
            if best.as_ref().is_none_or(|b| objective > b.objective) {
                *best = Some(BruteForcePlan { actions: prefix.clone(), objective });
            }
        } else {
            search(toy, n, depth + 1, len, q, acc + weight * toy.reward(s, a), weight * toy.gamma, prefix, best);
        }
        prefix.pop();
    }
}
