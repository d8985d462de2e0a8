//! Planner compute scaling: how many node expansions the search needs before
//! it holds a given number of nodes at depth `H`.

use alloc::vec::Vec;

use crate::env::Env;
use crate::error::{CoreError, CoreResult};
use crate::math::sqrt;
use crate::mdp::{ActionVec, EnvState};
use crate::planner::{PlannerConfig, SearchTree};
use crate::rng::{stream, substream, Stream};
use crate::shield::{Shield, ShieldConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingConfig {
    pub horizons: Vec<usize>,
    pub branching: usize,
    /// Nodes required at depth `H`.
    pub target_nodes: usize,
    /// Start states averaged over, drawn from the initial distribution.
    pub states: usize,
    /// Searches still short of the target after this many expansions stop
    /// and count as censored.
    pub max_expansions: usize,
    pub ucb_c: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            horizons: (2..=9).collect(),
            branching: 10,
            target_nodes: 10,
            states: 20,
            max_expansions: 200_000,
            ucb_c: core::f64::consts::SQRT_2,
            gamma: 0.99,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub horizon: usize,
    pub mean_expansions: f64,
    pub sd_expansions: f64,
    pub states: usize,
    /// Searches that hit `max_expansions`; their count enters the mean as the cap.
    pub censored: usize,
}

/// Expansions until the tree rooted at `s0` holds `target` nodes at depth
/// `horizon`, searching with plan length `horizon` and a zero `Q`.
pub fn expansions_to_reach(
    shield: &Shield<'_>,
    s0: EnvState,
    horizon: usize,
    target: usize,
    max_expansions: usize,
    pcfg: &PlannerConfig,
    rng: &mut crate::rng::Rng,
) -> (usize, bool) {
    let pcfg = PlannerConfig { horizon, ..*pcfg };
    let mut q = |_: &EnvState, _: &ActionVec| 0.0;
    let mut tree = SearchTree::new(s0);
    if !tree.expand(0, shield, &mut q, &pcfg, rng) {
        return (tree.expansions(), false);
    }
    let mut reached = tree.nodes_at_depth(horizon);
    while reached < target && tree.expansions() < max_expansions {
        let before = tree.nodes().len();
        tree.iterate(shield, &mut q, &pcfg, rng);
        reached += tree.nodes()[before..].iter().filter(|n| n.depth == horizon).count();
    }
    (tree.expansions(), reached >= target)
}

/// Average expansions needed per horizon over `cfg.states` start states.
/// The same start states are used for every horizon.
pub fn planner_scaling(env: &Env, shield_cfg: ShieldConfig, cfg: &ScalingConfig) -> CoreResult<Vec<ScalingRow>> {
    if cfg.horizons.is_empty()
        || cfg.horizons.contains(&0)
        || cfg.states == 0
        || cfg.target_nodes == 0
        || cfg.branching == 0
    {
        return Err(CoreError::config("scaling needs positive horizons, states, target and branching"));
    }
    let shield = Shield::halting(env, shield_cfg);
    let mut env_rng = stream(cfg.seed, Stream::Env);
    let starts: Vec<EnvState> = (0..cfg.states).map(|_| env.sample_initial(&mut env_rng)).collect();
    let base =
        PlannerConfig { horizon: 1, branching: cfg.branching, iterations: 0, ucb_c: cfg.ucb_c, gamma: cfg.gamma };
    base.validate()?;
    let mut rows = Vec::with_capacity(cfg.horizons.len());
    for &h in &cfg.horizons {
        let mut counts = Vec::with_capacity(starts.len());
        let mut censored = 0;
        for (i, s0) in starts.iter().enumerate() {
            let mut rng = substream(cfg.seed, Stream::Planner, (h * cfg.states + i) as u64);
            let (n, ok) = expansions_to_reach(&shield, *s0, h, cfg.target_nodes, cfg.max_expansions, &base, &mut rng);
            censored += (!ok) as usize;
            counts.push(n as f64);
        }
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<f64>() / n;
        let var = if counts.len() > 1 {
            counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        rows.push(ScalingRow {
            horizon: h,
            mean_expansions: mean,
            sd_expansions: sqrt(var),
            states: counts.len(),
            censored,
        });
    }
    Ok(rows)
}
