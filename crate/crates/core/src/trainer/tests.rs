use super::*;
use crate::env::{make_env, Dynamics, EnvConfig, EnvName};

fn small_learner() -> LearnerConfig {
    LearnerConfig { hidden: alloc::vec![16, 16], batch_size: 32, ..Default::default() }
}

struct Fixture {
    env: Env,
    shield: ShieldConfig,
    planner: PlannerConfig,
    learner: LearnerConfig,
    train: TrainConfig,
}

impl Fixture {
    fn new(name: EnvName, dynamics: Dynamics, mode: ShieldMode, steps: usize) -> Self {
        let env = make_env(EnvConfig::preset(name, dynamics)).unwrap();
        let shield = ShieldConfig::for_env(env.config());
        let train = TrainConfig {
            total_timesteps: steps,
            eval_every: steps / 2,
            eval_episodes: 2,
            shield_mode: mode,
            random_steps: 500,
            ..TrainConfig::for_env(&env)
        };
        let planner = PlannerConfig { iterations: 20, ..PlannerConfig::default() };
        Fixture { env, shield, planner, learner: small_learner(), train }
    }

    fn spec(&self) -> RunSpec<'_> {
        RunSpec {
            env: &self.env,
            shield: &self.shield,
            planner: &self.planner,
            learner: &self.learner,
            train: &self.train,
        }
    }
}

#[derive(Default)]
struct Recorder {
    episodes: usize,
    evals: Vec<usize>,
}

impl TrainHooks for Recorder {
    fn on_episode(&mut self, _m: &EpisodeMetrics) {
        self.episodes += 1;
    }

    fn on_eval(&mut self, report: &EvalReport, _agent: &Td3Agent) {
        self.evals.push(report.timestep);
    }
}

#[test]
fn config_validation() {
    let f = Fixture::new(EnvName::Obstacle, Dynamics::Di, ShieldMode::Mps, 100);
    assert!(f.train.validate().is_ok());
    assert!(TrainConfig { eval_every: 101, ..f.train.clone() }.validate().is_err());
    assert!(TrainConfig { seeds: alloc::vec![], ..f.train.clone() }.validate().is_err());
    assert!(TrainConfig { total_timesteps: 0, ..f.train.clone() }.validate().is_err());
}

#[test]
fn dmps_run_is_safe_and_accounted() {
    let f = Fixture::new(EnvName::SingleGate, Dynamics::Di, ShieldMode::Dmps, 3000);
    let mut rec = Recorder::default();
    let out = train(&f.spec(), 1, &mut rec).unwrap();
    assert_eq!(out.episodes.iter().map(|m| m.safety_violations).sum::<usize>(), 0);
    assert_eq!(out.episodes.iter().map(|m| m.steps).sum::<usize>(), 3000);
    let invocations: usize = out.episodes.iter().map(|m| m.shield_invocations).sum();
    assert_eq!(out.penalty_records, invocations);
    assert_eq!(out.buffer.iter().filter(|r| r.is_absorbing()).count(), invocations);
    assert!(out.buffer.iter().filter(|r| r.is_absorbing()).all(|r| r.r == f.shield.r_minus && r.done));
    assert_eq!(rec.episodes, out.episodes.len());
    assert_eq!(rec.evals, [1500, 3000]);
    assert!(out.evals.iter().all(|e| e.total_violations() == 0));
    assert!(out.agent.updates() > 0);
}

#[test]
fn unshielded_run_counts_no_invocations() {
    let mut f = Fixture::new(EnvName::DoubleGates, Dynamics::Di, ShieldMode::None, 4000);
    f.train.random_steps = 4000;
    let out = train(&f.spec(), 2, &mut ()).unwrap();
    assert!(out.episodes.iter().all(|m| m.shield_invocations == 0));
    assert_eq!(out.penalty_records, 0);
    let violations: usize = out.episodes.iter().take(50).map(|m| m.safety_violations).sum();
    assert!(violations > 0);
}

#[test]
fn training_is_reproducible() {
    let f = Fixture::new(EnvName::Obstacle, Dynamics::Dd, ShieldMode::Mps, 1500);
    let a = train(&f.spec(), 3, &mut ()).unwrap();
    let b = train(&f.spec(), 3, &mut ()).unwrap();
    assert_eq!(a.episodes, b.episodes);
    assert_eq!(a.evals, b.evals);
    assert_eq!(a.agent.actor().params(), b.agent.actor().params());
}

#[test]
fn evaluation_is_deterministic_and_traced() {
    let f = Fixture::new(EnvName::DoubleGatesPlus, Dynamics::Di, ShieldMode::Dmps, 1000);
    let out = train(&f.spec(), 4, &mut ()).unwrap();
    let first = evaluate(&out.agent, &f.spec(), 4, 99, None).unwrap();
    let mut rows = Vec::new();
    let mut sink = |r: &TrajectoryStep| rows.push(*r);
    let second = evaluate(&out.agent, &f.spec(), 4, 99, Some(&mut sink)).unwrap();
    assert_eq!(first, second);
    assert_eq!(rows.len(), second.iter().map(|m| m.steps).sum::<usize>());
    for (i, m) in second.iter().enumerate() {
        let triggered = rows.iter().filter(|r| r.episode == i && r.source != Source::Learned).count();
        assert_eq!(triggered, m.shield_invocations);
    }
}
