use alloc::vec::Vec;

use super::toy::DiscreteToyMdp;
use super::value::brute_force_plan;
use crate::error::{CoreError, CoreResult};
use crate::math::{powi, sqrt};
use crate::planner::{plan_rec, PlanResult, PlannerConfig};
use crate::rng::{substream, Rng, Stream};

/// Recovery mechanism whose regret is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShieldKind {
    /// Always the backup action.
    Mps,
    /// The planner's first action, the backup action on ⊥.
    Dmps,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretConfig {
    pub shield: ShieldKind,
    pub episodes: usize,
    pub episode_len: usize,
    /// Planner settings; `horizon` is overridden per run.
    pub planner: PlannerConfig,
    pub seed: u64,
    /// Compare each plan's objective with the exhaustive optimum.
    pub measure_planner_gap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretReport {
    pub horizon: usize,
    pub empirical_rr: f64,
    /// Standard error of `empirical_rr` over episodes.
    pub stderr: f64,
    /// Smallest `C` with `RR(n) ≤ C·γⁿ` over the suite. Zero outside a suite.
    pub bound_constant: f64,
    pub gamma_power: f64,
    pub triggers: usize,
    /// Largest exhaustive-minus-planner objective over all triggers, when measured.
    pub max_planner_gap: f64,
}

/// Monte Carlo estimate of the recovery regret of `cfg.shield` with plan
/// length `horizon`. Each episode starts from a seeded start state and
/// follows `policy` until the shield overrides it; every override at step
/// `t` contributes `(1−γ)·γᵗ·(V*(s) − Q*(s, chosen))`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_recovery_regret(
    toy: &DiscreteToyMdp,
    horizon: usize,
    q_plan: &[f64],
    v_star: &[f64],
    q_star: &[f64],
    cfg: &RegretConfig,
    policy: &mut dyn FnMut(usize, &mut Rng) -> usize,
) -> CoreResult<RegretReport> {
    let na = toy.n_actions();
    if q_plan.len() != toy.n_states() * na || q_star.len() != q_plan.len() || v_star.len() != toy.n_states() {
        return Err(CoreError::Shape { expected: toy.n_states() * na, got: q_plan.len() });
    }
    if cfg.episodes == 0 || toy.start_states().is_empty() {
        return Err(CoreError::config("regret estimation needs episodes and start states"));
    }
    let pcfg = PlannerConfig { horizon, gamma: toy.gamma, ..cfg.planner };
    pcfg.validate()?;
    let gamma = toy.gamma;
    let mut q_fn = |s: &usize, a: &usize| q_plan[s * na + a];
    let mut per_episode = Vec::with_capacity(cfg.episodes);
    let mut triggers = 0;
    let mut max_gap: f64 = 0.0;
    for e in 0..cfg.episodes {
        let mut policy_rng = substream(cfg.seed, Stream::Exploration, e as u64);
        let mut plan_rng = substream(cfg.seed, Stream::Planner, e as u64);
        let starts = toy.start_states();
        let mut s = starts[rand::Rng::gen_range(&mut policy_rng, 0..starts.len())];
        let mut weight = 1.0 - gamma;
        let mut total = 0.0;
        for _ in 0..cfg.episode_len {
            let proposed = policy(s, &mut policy_rng);
            let a = if toy.recoverable(toy.next(s, proposed)) {
                proposed
            } else {
                triggers += 1;
                let chosen = match cfg.shield {
                    ShieldKind::Mps => toy.backup_action(s),
                    ShieldKind::Dmps => match plan_rec(s, &mut q_fn, toy, &pcfg, &mut plan_rng) {
                        PlanResult::Plan { actions, objective } => {
                            if cfg.measure_planner_gap {
                                if let Some(best) = brute_force_plan(toy, s, horizon - 1, q_plan)? {
                                    max_gap = max_gap.max(best.objective - objective);
                                }
                            }
                            actions[0]
                        }
                        PlanResult::Bottom => toy.backup_action(s),
                    },
                };
                total += weight * (v_star[s] - q_star[s * na + chosen]).max(0.0);
                chosen
            };
            s = toy.next(s, a);
            weight *= gamma;
            if toy.safe_actions(s).all(|b| toy.next(s, b) == s) {
                break;
            }
        }
        per_episode.push(total);
    }
    let n = per_episode.len() as f64;
    let mean = per_episode.iter().sum::<f64>() / n;
    let var = if per_episode.len() > 1 {
        per_episode.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(RegretReport {
        horizon,
        empirical_rr: mean,
        stderr: sqrt(var / n),
        bound_constant: 0.0,
        gamma_power: powi(gamma, horizon as u32),
        triggers,
        max_planner_gap: max_gap,
    })
}

/// Smallest `C` with `RR(n) ≤ C·γⁿ` for every report.
pub fn fit_bound_constant(reports: &[RegretReport]) -> f64 {
    reports.iter().map(|r| r.empirical_rr / r.gamma_power).fold(0.0, f64::max)
}

/// [`empirical_recovery_regret`] for each horizon, with the shared bound
/// constant filled in. Every horizon replays the same policy and start-state
/// draws.
#[allow(clippy::too_many_arguments)]
pub fn regret_decay_suite(
    toy: &DiscreteToyMdp,
    horizons: &[usize],
    q_plan: &[f64],
    v_star: &[f64],
    q_star: &[f64],
    cfg: &RegretConfig,
    policy: &mut dyn FnMut(usize, &mut Rng) -> usize,
) -> CoreResult<Vec<RegretReport>> {
    if horizons.is_empty() || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoreError::config("regret horizons must be non-empty and strictly ascending"));
    }
    let mut reports = horizons
        .iter()
        .map(|&n| empirical_recovery_regret(toy, n, q_plan, v_star, q_star, cfg, policy))
        .collect::<CoreResult<Vec<_>>>()?;
    let c = fit_bound_constant(&reports);
    for r in &mut reports {
        r.bound_constant = c;
    }
    Ok(reports)
}
