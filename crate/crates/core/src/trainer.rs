//! Shield-in-the-loop training and deterministic evaluation.
//!
//! Each step the learner proposes an action (with exploration noise); if its
//! successor is not recoverable the shield substitutes a recovery action and
//! the rejected proposal is stored as an absorbing record with reward `r⁻`.
//! The executed transition is stored as well, and the learner takes one
//! gradient step per environment step at the end of every episode.

use alloc::vec::Vec;

use crate::env::Env;
use crate::error::{CoreError, CoreResult};
use crate::mdp::{ActionVec, EnvState, Mdp};
use crate::planner::PlannerConfig;
use crate::replay::{ReplayBuffer, TransitionRecord};
use crate::rng::{stream, substream, Stream};
use crate::shield::{Shield, ShieldConfig, ShieldMode, Source};
use crate::td3::{LearnerConfig, Td3Agent};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub total_timesteps: usize,
    pub episode_max_steps: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub shield_mode: ShieldMode,
    /// Uniformly random proposals before the actor takes over.
    pub random_steps: usize,
}

impl TrainConfig {
    /// Desk-scale defaults for an environment.
    pub fn for_env(env: &Env) -> Self {
        Self {
            total_timesteps: 50_000,
            episode_max_steps: env.config().episode_max_steps,
            eval_every: 10_000,
            eval_episodes: 10,
            seeds: alloc::vec![0, 1, 2],
            shield_mode: ShieldMode::Dmps,
            random_steps: 1_000,
        }
    }

    pub fn validate(&self) -> CoreResult<()> {
        if self.total_timesteps == 0 || self.episode_max_steps == 0 || self.eval_every == 0 {
            return Err(CoreError::config("train.total_timesteps, episode_max_steps and eval_every must be positive"));
        }
        if self.eval_every > self.total_timesteps {
            return Err(CoreError::config("train.eval_every must not exceed train.total_timesteps"));
        }
        if self.seeds.is_empty() {
            return Err(CoreError::config("train.seeds must list at least one seed"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    pub episode_index: usize,
    pub undiscounted_return: f64,
    pub shield_invocations: usize,
    pub safety_violations: usize,
    pub steps: usize,
    pub goal_reached: bool,
}

/// One row of an evaluation trajectory dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStep {
    pub episode: usize,
    pub t: usize,
    pub state: EnvState,
    pub action: ActionVec,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Training timesteps completed when the evaluation ran.
    pub timestep: usize,
    pub episodes: Vec<EpisodeMetrics>,
}

impl EvalReport {
    pub fn mean_return(&self) -> f64 {
        mean(self.episodes.iter().map(|m| m.undiscounted_return))
    }

    pub fn mean_invocations(&self) -> f64 {
        mean(self.episodes.iter().map(|m| m.shield_invocations as f64))
    }

    pub fn total_violations(&self) -> usize {
        self.episodes.iter().map(|m| m.safety_violations).sum()
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Observation points for a training run. All methods default to no-ops.
pub trait TrainHooks {
    fn on_episode(&mut self, _m: &EpisodeMetrics) {}
    fn on_eval(&mut self, _report: &EvalReport, _agent: &Td3Agent) {}
}

impl TrainHooks for () {}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub agent: Td3Agent,
    pub episodes: Vec<EpisodeMetrics>,
    pub evals: Vec<EvalReport>,
    /// Absorbing `r⁻` records pushed to the buffer.
    pub penalty_records: usize,
    pub buffer: ReplayBuffer,
}

/// Everything a run needs besides the seed.
#[derive(Debug, Clone, Copy)]
pub struct RunSpec<'a> {
    pub env: &'a Env,
    pub shield: &'a ShieldConfig,
    pub planner: &'a PlannerConfig,
    pub learner: &'a LearnerConfig,
    pub train: &'a TrainConfig,
}

impl RunSpec<'_> {
    pub fn validate(&self) -> CoreResult<()> {
        self.shield.validate(self.env.config())?;
        self.planner.validate()?;
        self.learner.validate()?;
        self.train.validate()
    }
}

/// Trains one agent from `seed`.
pub fn train(spec: &RunSpec<'_>, seed: u64, hooks: &mut dyn TrainHooks) -> CoreResult<TrainOutput> {
    spec.validate()?;
    let RunSpec { env, planner, learner, train: tcfg, .. } = *spec;
    let mode = tcfg.shield_mode;
    let shield = Shield::halting(env, *spec.shield);
    let bounds = env.action_bounds();

    let mut env_rng = stream(seed, Stream::Env);
    let mut explore_rng = stream(seed, Stream::Exploration);
    let mut plan_rng = stream(seed, Stream::Planner);
    let mut agent = Td3Agent::new(env.feature_dim(), bounds, learner.clone(), stream(seed, Stream::Learner))?;
    let mut buffer = ReplayBuffer::new(learner.buffer_capacity, stream(seed, Stream::Replay))?;

    let mut episodes = Vec::new();
    let mut evals = Vec::new();
    let mut penalty_records = 0;
    let mut t = 0;
    while t < tcfg.total_timesteps {
        let mut s = env.sample_initial(&mut env_rng);
        let mut m = EpisodeMetrics {
            episode_index: episodes.len(),
            undiscounted_return: 0.0,
            shield_invocations: 0,
            safety_violations: 0,
            steps: 0,
            goal_reached: false,
        };
        while m.steps < tcfg.episode_max_steps && t < tcfg.total_timesteps {
            let proposed = if t < tcfg.random_steps {
                bounds.sample_uniform(&mut explore_rng)
            } else {
                agent.explore(&agent.act(env, &s), &mut explore_rng)
            };
            let decision = shield.decide(
                mode,
                &s,
                &proposed,
                planner,
                &mut |x: &EnvState, a: &ActionVec| agent.q_value(env, x, a),
                &mut plan_rng,
            );
            if decision.triggered() {
                buffer.push(TransitionRecord::absorbing(s, proposed, spec.shield.r_minus));
                penalty_records += 1;
                m.shield_invocations += 1;
            }
            let (next, r) = env.step(&s, &decision.action)?;
            let violation = env.is_unsafe(&next);
            let goal = env.is_goal(&next);
            let stored = if violation && mode == ShieldMode::None { r + spec.shield.r_minus } else { r };
            buffer.push(TransitionRecord::step(s, decision.action, next, stored, goal));
            m.undiscounted_return += r;
            m.safety_violations += violation as usize;
            m.steps += 1;
            t += 1;
            s = next;
            if t % tcfg.eval_every == 0 {
                let report =
                    EvalReport { timestep: t, episodes: evaluate(&agent, spec, seed, evals.len() as u64, None)? };
                hooks.on_eval(&report, &agent);
                evals.push(report);
            }
            if goal {
                m.goal_reached = true;
                break;
            }
        }
        if buffer.len() >= learner.batch_size {
            for _ in 0..m.steps {
                agent.update(&mut buffer, env)?;
            }
        }
        hooks.on_episode(&m);
        episodes.push(m);
    }
    Ok(TrainOutput { agent, episodes, evals, penalty_records, buffer })
}

/// Deterministic rollouts of the actor under the run's shield mode. Start
/// states and planner randomness come from evaluation stream `round`.
pub fn evaluate(
    agent: &Td3Agent,
    spec: &RunSpec<'_>,
    seed: u64,
    round: u64,
    mut trajectory: Option<&mut dyn FnMut(&TrajectoryStep)>,
) -> CoreResult<Vec<EpisodeMetrics>> {
    let RunSpec { env, planner, train: tcfg, .. } = *spec;
    let shield = Shield::halting(env, *spec.shield);
    let mut rng = substream(seed, Stream::Evaluation, round);
    let mut out = Vec::with_capacity(tcfg.eval_episodes);
    for episode in 0..tcfg.eval_episodes {
        let mut s = env.sample_initial(&mut rng);
        let mut m = EpisodeMetrics {
            episode_index: episode,
            undiscounted_return: 0.0,
            shield_invocations: 0,
            safety_violations: 0,
            steps: 0,
            goal_reached: false,
        };
        while m.steps < tcfg.episode_max_steps {
            let proposed = agent.act(env, &s);
            let d = shield.decide(
                tcfg.shield_mode,
                &s,
                &proposed,
                planner,
                &mut |x: &EnvState, a: &ActionVec| agent.q_value(env, x, a),
                &mut rng,
            );
            if let Some(sink) = trajectory.as_mut() {
                sink(&TrajectoryStep { episode, t: m.steps, state: s, action: d.action, source: d.source });
            }
            m.shield_invocations += d.triggered() as usize;
            let (next, r) = env.step(&s, &d.action)?;
            m.undiscounted_return += r;
            m.safety_violations += env.is_unsafe(&next) as usize;
            m.steps += 1;
            s = next;
            if env.is_goal(&s) {
                m.goal_reached = true;
                break;
            }
        }
        out.push(m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
