use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::*;
use crate::math::powi;
use crate::planner::{plan_rec, PlannerConfig};
use crate::rng::{stream, substream, Stream};

/// Line of `len` cells with an absorbing goal at 0. Action 0 moves left,
/// action 1 moves right; every step outside the goal costs 1.
fn chain(len: usize, gamma: f64) -> DiscreteToyMdp {
    let mut next = Vec::new();
    let mut reward = Vec::new();
    for s in 0..len {
        let left = s.saturating_sub(1);
        let right = (s + 1).min(len - 1);
        let r = if s == 0 { 0.0 } else { -1.0 };
        next.extend([if s == 0 { 0 } else { left }, if s == 0 { 0 } else { right }]);
        reward.extend([r, r]);
    }
    DiscreteToyMdp::from_tables(2, next, reward, vec![false; len], vec![0; len], len, vec![len - 1], gamma).unwrap()
}

/// Two cells: a safe cell whose only action leads into an absorbing unsafe cell.
fn doomed(r_unsafe: f64, gamma: f64) -> DiscreteToyMdp {
    DiscreteToyMdp::from_tables(1, vec![1, 1], vec![0.0, r_unsafe], vec![false, true], vec![0, 0], 1, vec![], gamma)
        .unwrap()
}

#[test]
fn chain_values_are_geometric_sums() {
    let gamma = 0.9;
    let toy = chain(12, gamma);
    let t = value_iteration(&toy, 1e-12, ValueConstraint::All);
    for d in 0..12 {
        let expected = -(1.0 - powi(gamma, d as u32)) / (1.0 - gamma);
        assert!((t.v[d] - expected).abs() < 1e-10, "d={d}: {} vs {expected}", t.v[d]);
    }
    assert!(t.residual <= 1e-12);
}

#[test]
fn unsafe_absorbing_value() {
    for (r, gamma) in [(-10.0, 0.9), (-3.0, 0.5), (-100.0, 0.99)] {
        let toy = doomed(r, gamma);
        let t = value_iteration(&toy, 1e-12, ValueConstraint::Recoverable);
        let expected = r / (1.0 - gamma);
        assert!((t.v[1] - expected).abs() < 1e-9 * expected.abs(), "{} vs {expected}", t.v[1]);
        assert!(!toy.recoverable(0) && !toy.recoverable(1));
    }
}

#[test]
fn halving_tolerance_moves_tables_by_at_most_tol() {
    let toy = DiscreteToyMdp::wall_with_gap(ToyActions::Five, 0.9).unwrap();
    for tol in [1e-2, 1e-4, 1e-6] {
        let a = value_iteration(&toy, tol, ValueConstraint::Recoverable);
        let b = value_iteration(&toy, tol / 2.0, ValueConstraint::Recoverable);
        let dv = a.v.iter().zip(&b.v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let dq = a.q.iter().zip(&b.q).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(dv <= tol && dq <= tol, "tol {tol}: dv {dv} dq {dq}");
    }
}

#[test]
fn bellman_residual_is_within_tolerance() {
    let toy = DiscreteToyMdp::wall_with_gap(ToyActions::Three, 0.9).unwrap();
    let tol = 1e-8;
    let t = value_iteration(&toy, tol, ValueConstraint::All);
    let na = toy.n_actions();
    for s in 0..toy.n_states() {
        for a in 0..na {
            let backup = toy.reward(s, a)
                + toy.gamma * (0..na).map(|b| t.q[toy.next(s, a) * na + b]).fold(f64::NEG_INFINITY, f64::max);
            assert!((backup - t.q[s * na + a]).abs() <= tol * toy.gamma + 1e-12);
        }
    }
}

#[test]
fn wall_toy_layout() {
    let toy = DiscreteToyMdp::wall_with_gap(ToyActions::Five, 0.9).unwrap();
    assert_eq!(toy.n_states(), 15 * 15 * 25 + 2);
    assert_eq!(toy.n_actions(), 5);
    let s = DiscreteToyMdp::encode(3, 11, -2, 1);
    assert_eq!(DiscreteToyMdp::decode(s), (3, 11, -2, 1));
    // Stationary cells off the wall are equilibria of the brake.
    assert!(toy.recoverable(DiscreteToyMdp::encode(0, 0, 0, 0)));
    assert!(toy.is_unsafe(DiscreteToyMdp::encode(7, 0, 0, 0)));
    assert!(!toy.is_unsafe(DiscreteToyMdp::encode(7, 7, 0, 0)));
    // Two cells from the wall at full speed: braking lands in column 6 and stops.
    assert!(toy.recoverable(DiscreteToyMdp::encode(4, 0, 2, 0)));
    assert!(toy.recoverable(DiscreteToyMdp::encode(5, 0, 2, 0)));
    // Next to the wall at full speed: the brake still moves one cell into it.
    assert!(!toy.recoverable(DiscreteToyMdp::encode(6, 0, 2, 0)));
    // Moving right through the gap is fine.
    assert!(toy.recoverable(DiscreteToyMdp::encode(6, 7, 2, 0)));
    // Every transition from an unsafe state stays unsafe.
    for s in (0..toy.n_states()).filter(|&s| toy.is_unsafe(s)) {
        for a in 0..5 {
            assert!(toy.is_unsafe(toy.next(s, a)));
        }
    }
}

#[test]
fn brute_force_degenerate_horizon_is_argmax_q() {
    let toy = DiscreteToyMdp::wall_with_gap(ToyActions::Five, 0.9).unwrap();
    let mut rng = stream(1, Stream::Planner);
    let q: Vec<f64> = (0..toy.n_states() * 5).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for &s in toy.start_states() {
        let plan = brute_force_plan(&toy, s, 0, &q).unwrap().unwrap();
        let (best_a, best_q) =
            toy.safe_actions(s)
                .map(|a| (a, q[s * 5 + a]))
                .fold((9, f64::NEG_INFINITY), |b, x| if x.1 > b.1 { x } else { b });
        assert_eq!(plan.actions, vec![best_a]);
        assert_eq!(plan.objective, best_q);
    }
}

#[test]
fn brute_force_breaks_ties_lexicographically() {
    let toy = chain(5, 0.9);
    let q = vec![0.0; 10];
    let plan = brute_force_plan(&toy, 3, 2, &q).unwrap().unwrap();
    // Rewards are −1 for both moves and the bootstrap is flat, so all sequences tie.
    assert_eq!(plan.actions, vec![0, 0, 0]);
    assert!((plan.objective - (-1.0 - 0.9)).abs() < 1e-12);
}

#[test]
fn brute_force_refuses_large_enumerations() {
    let toy = DiscreteToyMdp::wall_with_gap(ToyActions::Five, 0.9).unwrap();
    let q = vec![0.0; toy.n_states() * 5];
    // 5^8 < 1e6 < 5^9.
    assert!(brute_force_plan(&toy, toy.start_states()[0], 7, &q).is_ok());
    assert!(matches!(
        brute_force_plan(&toy, toy.start_states()[0], 8, &q),
        Err(crate::error::CoreError::EnumerationGuard { count: 1_953_125, .. })
    ));
}

#[test]
fn brute_force_follows_the_gap() {
    // Heading right at full speed one row below the gap, two cells before the
    // wall: only turning up into the gap avoids braking short of the wall.
    let toy = DiscreteToyMdp::wall_with_gap(ToyActions::Five, 0.9).unwrap();
    let t = value_iteration(&toy, 1e-10, ValueConstraint::Recoverable);
    let s0 = DiscreteToyMdp::encode(4, 5, 2, 0);
    let plan = brute_force_plan(&toy, s0, 3, &t.q).unwrap().unwrap();
    let mut s = s0;
    let mut crossed = false;
    for &a in &plan.actions {
        s = toy.next(s, a);
        assert!(toy.recoverable(s));
        if s < toy.n_states() - 2 {
            let (x, y, _, _) = DiscreteToyMdp::decode(s);
            crossed |= x >= 7 && (6..=8).contains(&y);
        }
    }
    assert!(crossed, "{:?}", plan.actions);
    assert!((plan.objective - t.v[s0]).abs() < 1e-8);
}

/// Exhaustive recursion written independently of the oracle's: enumerates
/// every index in `0..|A|^len`, decodes it into a sequence, and scores it.
fn odometer_optimum(toy: &DiscreteToyMdp, s0: usize, len: usize, q: &[f64]) -> f64 {
    let na = toy.n_actions();
    let mut best = f64::NEG_INFINITY;
    for code in 0..na.pow(len as u32) {
        let seq: Vec<usize> = (0..len).rev().map(|i| (code / na.pow(i as u32)) % na).collect();
        let (mut s, mut acc, mut w) = (s0, 0.0, 1.0);
        for (i, &a) in seq.iter().enumerate() {
            let n = toy.next(s, a);
            if !toy.recoverable(n) {
                break;
            }
            if i + 1 == len {
                best = best.max(acc + w * q[s * na + a]);
            }
            acc += w * toy.reward(s, a);
            w *= toy.gamma;
            s = n;
        }
    }
    best
}

#[test]
fn brute_force_matches_independent_enumeration() {
    let toy = DiscreteToyMdp::wall_with_gap(ToyActions::Three, 0.9).unwrap();
    let mut rng = stream(5, Stream::Planner);
    let q: Vec<f64> = (0..toy.n_states() * 3).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let recoverable: Vec<usize> = (0..toy.n_states()).filter(|&s| toy.recoverable(s)).collect();
    for _ in 0..200 {
        let s0 = recoverable[rng.gen_range(0..recoverable.len())];
        let n = rng.gen_range(0..4);
        let oracle = brute_force_plan(&toy, s0, n, &q).unwrap().unwrap();
        assert!((oracle.objective - odometer_optimum(&toy, s0, n + 1, &q)).abs() < 1e-12);
    }
}

#[test]
fn planner_never_beats_the_oracle_and_converges() {
    let toy = DiscreteToyMdp::wall_with_gap(ToyActions::Three, 0.9).unwrap();
    let t = value_iteration(&toy, 1e-10, ValueConstraint::Recoverable);
    let recoverable: Vec<usize> = (0..toy.n_states()).filter(|&s| toy.recoverable(s)).collect();
    let pcfg =
        PlannerConfig { horizon: 3, branching: 3, iterations: 2_000, ucb_c: core::f64::consts::SQRT_2, gamma: 0.9 };
    let mut matches = 0;
    for trial in 0..20 {
        let mut rng = substream(trial, Stream::Planner, 0);
        let s0 = recoverable[rng.gen_range(0..recoverable.len())];
        let oracle = brute_force_plan(&toy, s0, 2, &t.q).unwrap().unwrap();
        let plan = plan_rec(s0, &mut |s: &usize, a: &usize| t.q[s * 3 + a], &toy, &pcfg, &mut rng);
        let obj = plan.objective().unwrap();
        assert!(oracle.objective >= obj - 1e-12);
        matches += ((oracle.objective - obj).abs() <= 1e-9) as usize;
    }
    assert!(matches >= 19, "{matches}/20");
}

fn uniform_policy(n: usize) -> impl FnMut(usize, &mut crate::rng::Rng) -> usize {
    move |_, rng| rng.gen_range(0..n)
}

fn regret_cfg(shield: ShieldKind) -> RegretConfig {
    RegretConfig {
        shield,
        episodes: 200,
        episode_len: 40,
        planner: PlannerConfig {
            horizon: 1,
            branching: 5,
            iterations: 500,
            ucb_c: core::f64::consts::SQRT_2,
            gamma: 0.9,
        },
        seed: 3,
        measure_planner_gap: false,
    }
}

#[test]
fn regret_is_zero_without_triggers() {
    let toy = DiscreteToyMdp::wall_with_gap(ToyActions::Five, 0.9).unwrap();
    let t = value_iteration(&toy, 1e-10, ValueConstraint::Recoverable);
    // Braking from a recoverable state never leaves the recoverable set.
    let mut brake = |_: usize, _: &mut crate::rng::Rng| 0;
    let r = empirical_recovery_regret(&toy, 2, &t.q, &t.v, &t.q, &regret_cfg(ShieldKind::Mps), &mut brake).unwrap();
    assert_eq!(r.triggers, 0);
    assert_eq!(r.empirical_rr, 0.0);
}

#[test]
fn regret_is_zero_when_the_backup_is_optimal() {
    // In the chain every action is recoverable, so the shield sees a toy
    // where "left" is both the backup and the optimal action.
    let toy = chain(6, 0.9);
    let t = value_iteration(&toy, 1e-12, ValueConstraint::Recoverable);
    for s in 1..6 {
        assert!(t.q[s * 2] >= t.q[s * 2 + 1]);
    }
    let r = empirical_recovery_regret(&toy, 2, &t.q, &t.v, &t.q, &regret_cfg(ShieldKind::Mps), &mut uniform_policy(2))
        .unwrap();
    assert_eq!(r.empirical_rr, 0.0);
}

#[test]
fn mps_regret_is_positive_on_the_wall_toy() {
    let toy = DiscreteToyMdp::wall_with_gap(ToyActions::Five, 0.9).unwrap();
    let t = value_iteration(&toy, 1e-10, ValueConstraint::Recoverable);
    let r = empirical_recovery_regret(&toy, 1, &t.q, &t.v, &t.q, &regret_cfg(ShieldKind::Mps), &mut uniform_policy(5))
        .unwrap();
    assert!(r.triggers > 100, "{r:?}");
    assert!(r.empirical_rr > 0.0 && r.stderr > 0.0);
}

#[test]
fn exact_q_dmps_regret_vanishes_and_decays() {
    let toy = DiscreteToyMdp::wall_with_gap(ToyActions::Five, 0.9).unwrap();
    let t = value_iteration(&toy, 1e-10, ValueConstraint::Recoverable);
    let mut cfg = regret_cfg(ShieldKind::Dmps);
    cfg.measure_planner_gap = true;
    let reports = regret_decay_suite(&toy, &[1, 3], &t.q, &t.v, &t.q, &cfg, &mut uniform_policy(5)).unwrap();
    assert!(reports[1].empirical_rr <= reports[0].empirical_rr);
    for r in &reports {
        assert!(r.empirical_rr < 1e-6, "{r:?}");
        assert!(r.empirical_rr <= r.bound_constant * r.gamma_power + 1e-15);
    }
}

#[test]
fn suite_rejects_unsorted_horizons() {
    let toy = chain(3, 0.9);
    let t = value_iteration(&toy, 1e-12, ValueConstraint::All);
    let cfg = regret_cfg(ShieldKind::Dmps);
    assert!(regret_decay_suite(&toy, &[3, 1], &t.q, &t.v, &t.q, &cfg, &mut uniform_policy(2)).is_err());
    assert!(regret_decay_suite(&toy, &[], &t.q, &t.v, &t.q, &cfg, &mut uniform_policy(2)).is_err());
}

#[test]
fn perturbation_is_bounded_and_seeded() {
    let q = vec![1.0; 100];
    let a = perturbed_q(&q, 0.5, &mut stream(2, Stream::Learner));
    assert_eq!(a, perturbed_q(&q, 0.5, &mut stream(2, Stream::Learner)));
    assert!(a.iter().all(|x| (x - 1.0).abs() < 0.5));
    assert_eq!(perturbed_q(&q, 0.0, &mut stream(2, Stream::Learner)), q);
}
