//! Experiment orchestration shared by the command line and the tests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use dmps_core::oracle::{
    brute_force_plan, perturbed_q, regret_decay_suite, value_iteration, DiscreteToyMdp, RegretConfig, RegretReport,
    ShieldKind, ToyActions, ValueConstraint,
};
use dmps_core::planner::{plan_rec, PlannerConfig};
use dmps_core::rng::{stream, substream, Rng, Stream};
use dmps_core::scaling::{planner_scaling, ScalingConfig};
use dmps_core::trainer::{self, EvalReport, TrainHooks, TrajectoryStep};
use dmps_core::{Env, EpisodeMetrics, RunSpec, ShieldConfig, ShieldMode, Td3Agent};
use rand::Rng as _;

use crate::checkpoint::{self, Checkpoint};
use crate::config::RunConfig;
use crate::csvio::{self, ComparisonRow, EvalRow, MetricsRow, RegretRow, ScalingCsvRow, SeriesRow, SummaryRow};
use crate::error::{DmpsError, DmpsResult};
use crate::manifest::RunManifest;

/// Mean and sample standard deviation; the deviation is zero for fewer
/// than two values.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn metrics_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("metrics_seed{seed}.csv"))
}

pub fn evals_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("evals_seed{seed}.csv"))
}

pub fn checkpoint_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("checkpoint_seed{seed}.txt"))
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub episodes: Vec<EpisodeMetrics>,
    pub evals: Vec<EvalReport>,
    pub penalty_records: usize,
    pub agent: Td3Agent,
}

impl SeedRun {
    pub fn final_eval(&self) -> Option<&EvalReport> {
        self.evals.last()
    }

    pub fn total_violations(&self) -> usize {
        self.episodes.iter().map(|m| m.safety_violations).sum()
    }
}

struct CheckpointHooks<'a> {
    cfg: &'a RunConfig,
    seed: u64,
    out: Option<&'a Path>,
    error: Option<DmpsError>,
}

impl TrainHooks for CheckpointHooks<'_> {
    fn on_eval(&mut self, report: &EvalReport, agent: &Td3Agent) {
        log::info!(
            "seed {} t={} eval return {:.3} invocations {:.1} violations {}",
            self.seed,
            report.timestep,
            report.mean_return(),
            report.mean_invocations(),
            report.total_violations()
        );
        if let (Some(out), None) = (self.out, &self.error) {
            if let Err(e) =
                checkpoint::save(&checkpoint_path(out, self.seed), self.cfg, self.seed, report.timestep, agent)
            {
                self.error = Some(e);
            }
        }
    }
}

/// Trains one seed. With `out`, writes the per-episode metrics, the
/// evaluation rows and a checkpoint after every evaluation and at the end.
pub fn run_seed(cfg: &RunConfig, seed: u64, out: Option<&Path>) -> DmpsResult<SeedRun> {
    cfg.validate()?;
    let env = Env::new(cfg.env.clone())?;
    let spec =
        RunSpec { env: &env, shield: &cfg.shield, planner: &cfg.planner, learner: &cfg.learner, train: &cfg.train };
    let mut hooks = CheckpointHooks { cfg, seed, out, error: None };
    let result = trainer::train(&spec, seed, &mut hooks)?;
    if let Some(e) = hooks.error {
        return Err(e);
    }
    if let Some(out) = out {
        let rows: Vec<MetricsRow> = result.episodes.iter().map(MetricsRow::from).collect();
        csvio::write_rows(&metrics_path(out, seed), &rows)?;
        let evals: Vec<EvalRow> = result
            .evals
            .iter()
            .flat_map(|r| {
                r.episodes.iter().map(move |m| EvalRow {
                    timestep: r.timestep,
                    episode: m.episode_index,
                    r#return: m.undiscounted_return,
                    shield_invocations: m.shield_invocations,
                    safety_violations: m.safety_violations,
                    steps: m.steps,
                    goal_reached: m.goal_reached as u8,
                })
            })
            .collect();
        csvio::write_rows(&evals_path(out, seed), &evals)?;
        checkpoint::save(&checkpoint_path(out, seed), cfg, seed, cfg.train.total_timesteps, &result.agent)?;
    }
    Ok(SeedRun {
        seed,
        episodes: result.episodes,
        evals: result.evals,
        penalty_records: result.penalty_records,
        agent: result.agent,
    })
}

/// Runs `jobs` on up to `workers` threads and returns results in job order.
pub fn parallel_map<T: Sync, R: Send>(jobs: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = f(&jobs[i]);
                results.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    results.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every job ran")).collect()
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Trains every configured seed into `out` alongside a manifest and the
/// resolved config snapshot.
pub fn train_all(cfg: &RunConfig, config_path: Option<&Path>, out: &Path) -> DmpsResult<Vec<SeedRun>> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| DmpsError::io(out, e))?;
    RunManifest::new(cfg, config_path, out).save(&out.join("manifest.json"))?;
    let snap = out.join("config.snapshot");
    fs::write(&snap, cfg.snapshot()).map_err(|e| DmpsError::io(&snap, e))?;
    parallel_map(&cfg.train.seeds, default_workers(), |&seed| {
        log::info!("training {} {} {} seed {seed}", cfg.env.name, cfg.env.dynamics.as_str(), cfg.train.shield_mode);
        run_seed(cfg, seed, Some(out))
    })
    .into_iter()
    .collect()
}

/// Evaluates a checkpoint under its own config, optionally overriding the
/// shield mode and the episode count.
pub fn eval_checkpoint(
    ckpt: &Checkpoint,
    shield: Option<ShieldMode>,
    episodes: Option<usize>,
    trajectory: Option<&mut dyn FnMut(&TrajectoryStep)>,
) -> DmpsResult<Vec<EpisodeMetrics>> {
    let mut train = ckpt.config.train.clone();
    if let Some(mode) = shield {
        train.shield_mode = mode;
    }
    if let Some(n) = episodes {
        train.eval_episodes = n;
    }
    let env = Env::new(ckpt.config.env.clone())?;
    let cfg = &ckpt.config;
    let spec = RunSpec { env: &env, shield: &cfg.shield, planner: &cfg.planner, learner: &cfg.learner, train: &train };
    Ok(trainer::evaluate(&ckpt.agent, &spec, ckpt.seed, 0, trajectory)?)
}

/// Per-seed evaluation results of one configuration.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub env: String,
    pub dynamics: String,
    pub shield: ShieldMode,
    pub seed: u64,
    pub episodes: Vec<EpisodeMetrics>,
}

fn episode_mean(eps: &[EpisodeMetrics], f: impl Fn(&EpisodeMetrics) -> f64) -> f64 {
    mean_sd(&eps.iter().map(f).collect::<Vec<_>>()).0
}

/// One summary row per (env, dynamics, shield) group, with statistics over
/// seeds of the per-seed episode means, and a comparison row for every
/// group that has both an MPS and a DMPS entry.
pub fn summarize(outcomes: &[EvalOutcome]) -> (Vec<SummaryRow>, Vec<ComparisonRow>) {
    let mut groups: BTreeMap<(String, String, &'static str), Vec<&EvalOutcome>> = BTreeMap::new();
    for o in outcomes {
        groups.entry((o.env.clone(), o.dynamics.clone(), o.shield.as_str())).or_default().push(o);
    }
    let rows: Vec<SummaryRow> = groups
        .iter()
        .map(|((env, dynamics, shield), os)| {
            let per_seed = |f: &dyn Fn(&EpisodeMetrics) -> f64| {
                mean_sd(&os.iter().map(|o| episode_mean(&o.episodes, f)).collect::<Vec<_>>())
            };
            let (return_mean, return_sd) = per_seed(&|m| m.undiscounted_return);
            let (invocations_mean, invocations_sd) = per_seed(&|m| m.shield_invocations as f64);
            let (violations_mean, violations_sd) = per_seed(&|m| m.safety_violations as f64);
            SummaryRow {
                env: env.clone(),
                dynamics: dynamics.clone(),
                shield: shield.to_string(),
                seeds: os.len(),
                return_mean,
                return_sd,
                invocations_mean,
                invocations_sd,
                violations_mean,
                violations_sd,
            }
        })
        .collect();
    let mut comparisons = Vec::new();
    for mps in rows.iter().filter(|r| r.shield == "mps") {
        if let Some(dmps) = rows.iter().find(|r| r.shield == "dmps" && r.env == mps.env && r.dynamics == mps.dynamics) {
            comparisons.push(ComparisonRow {
                env: mps.env.clone(),
                dynamics: mps.dynamics.clone(),
                mps_invocations_mean: mps.invocations_mean,
                dmps_invocations_mean: dmps.invocations_mean,
                invocation_ratio: if mps.invocations_mean > 0.0 {
                    dmps.invocations_mean / mps.invocations_mean
                } else {
                    f64::NAN
                },
            });
        }
    }
    (rows, comparisons)
}

/// Per-episode mean and 1-sigma series over runs, truncated to the episodes
/// every run reached.
pub fn series(runs: &[Vec<MetricsRow>]) -> Vec<SeriesRow> {
    let len = runs.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let (mean_return, sd_return) = mean_sd(&runs.iter().map(|r| r[i].r#return).collect::<Vec<_>>());
            let (mean_invocations, sd_invocations) =
                mean_sd(&runs.iter().map(|r| r[i].shield_invocations as f64).collect::<Vec<_>>());
            SeriesRow { episode: runs[0][i].episode, mean_return, sd_return, mean_invocations, sd_invocations }
        })
        .collect()
}

/// Mean invocations over the first and last tenth of the episodes (at least
/// one episode each).
pub fn invocation_trend(episodes: &[EpisodeMetrics]) -> (f64, f64) {
    let k = (episodes.len() / 10).max(1).min(episodes.len());
    let avg = |ms: &[EpisodeMetrics]| episode_mean(ms, |m| m.shield_invocations as f64);
    (avg(&episodes[..k]), avg(&episodes[episodes.len() - k..]))
}

/// Pinned settings of the oracle suites.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSettings {
    pub seed: u64,
    pub gamma: f64,
    pub trials: usize,
    pub mcts_iterations: usize,
    /// Perturbation of `Q*` handed to the planner in the equivalence trials,
    /// so that matches are not produced by tied objectives.
    pub mcts_eps: f64,
    pub horizons: Vec<usize>,
    pub regret_eps: f64,
    pub regret_episodes: usize,
    pub regret_episode_len: usize,
    pub regret_iterations: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            gamma: 0.9,
            trials: 100,
            mcts_iterations: 10_000,
            mcts_eps: 0.5,
            horizons: (1..=5).collect(),
            regret_eps: 2.0,
            regret_episodes: 400,
            regret_episode_len: 40,
            regret_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McTsEquivalence {
    pub trials: usize,
    /// Trials whose objective is within `1e-9` of the exhaustive optimum.
    pub matches: usize,
    pub max_gap: f64,
    /// The exhaustive optimum was never below the planner's objective.
    pub oracle_dominates: bool,
}

/// Planner against exhaustive enumeration on the three-action toy with plan
/// length 3, from uniformly drawn recoverable start states.
pub fn mcts_equivalence(settings: &OracleSettings) -> DmpsResult<McTsEquivalence> {
    let toy = DiscreteToyMdp::wall_with_gap(ToyActions::Three, settings.gamma)?;
    let tables = value_iteration(&toy, 1e-10, ValueConstraint::Recoverable);
    let q = perturbed_q(&tables.q, settings.mcts_eps, &mut stream(settings.seed, Stream::Learner));
    let na = toy.n_actions();
    let recoverable: Vec<usize> = (0..toy.n_states()).filter(|&s| toy.recoverable(s)).collect();
    let pcfg = PlannerConfig {
        horizon: 3,
        branching: na,
        iterations: settings.mcts_iterations,
        ucb_c: std::f64::consts::SQRT_2,
        gamma: settings.gamma,
    };
    let mut out = McTsEquivalence { trials: settings.trials, matches: 0, max_gap: 0.0, oracle_dominates: true };
    for trial in 0..settings.trials as u64 {
        let mut rng = substream(settings.seed, Stream::Planner, trial);
        let s0 = recoverable[rng.gen_range(0..recoverable.len())];
        let oracle = brute_force_plan(&toy, s0, 2, &q)?.expect("recoverable states have a recoverable action");
        let plan = plan_rec(s0, &mut |s: &usize, a: &usize| q[s * na + a], &toy, &pcfg, &mut rng);
        let objective = plan.objective().expect("root expands");
        let gap = oracle.objective - objective;
        out.max_gap = out.max_gap.max(gap.abs());
        out.matches += (gap.abs() <= 1e-9) as usize;
        out.oracle_dominates &= gap >= -1e-12;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretSuites {
    pub exact: Vec<RegretReport>,
    pub perturbed: Vec<RegretReport>,
    pub perturbed_doubled: Vec<RegretReport>,
}

/// Recovery-regret decay of DMPS on the five-action toy under a uniformly
/// random learned policy, with the planner bootstrapped from `Q*`, from
/// `Q* + U(±ε)` and from `Q* + U(±2ε)`.
pub fn regret_suites(settings: &OracleSettings) -> DmpsResult<RegretSuites> {
    let toy = DiscreteToyMdp::wall_with_gap(ToyActions::Five, settings.gamma)?;
    let t = value_iteration(&toy, 1e-10, ValueConstraint::Recoverable);
    let na = toy.n_actions();
    let cfg = RegretConfig {
        shield: ShieldKind::Dmps,
        episodes: settings.regret_episodes,
        episode_len: settings.regret_episode_len,
        planner: PlannerConfig {
            horizon: 1,
            branching: na,
            iterations: settings.regret_iterations,
            ucb_c: std::f64::consts::SQRT_2,
            gamma: settings.gamma,
        },
        seed: settings.seed,
        measure_planner_gap: true,
    };
    let mut policy = |_: usize, rng: &mut Rng| rng.gen_range(0..na);
    let mut suite = |q: &[f64]| regret_decay_suite(&toy, &settings.horizons, q, &t.v, &t.q, &cfg, &mut policy);
    let exact = suite(&t.q)?;
    let perturbed = suite(&perturbed_q(&t.q, settings.regret_eps, &mut stream(settings.seed, Stream::Learner)))?;
    let perturbed_doubled =
        suite(&perturbed_q(&t.q, 2.0 * settings.regret_eps, &mut stream(settings.seed, Stream::Learner)))?;
    Ok(RegretSuites { exact, perturbed, perturbed_doubled })
}

pub fn regret_rows(reports: &[RegretReport]) -> Vec<RegretRow> {
    reports
        .iter()
        .map(|r| RegretRow {
            horizon: r.horizon,
            rr_mean: r.empirical_rr,
            rr_stderr: r.stderr,
            fitted_c: r.bound_constant,
        })
        .collect()
}

/// Expansions needed to hold ten nodes at depth `H` on double-gates+,
/// for `H = 2..=max_horizon`.
pub fn scaling_rows(dynamics: dmps_core::Dynamics, max_horizon: usize, seed: u64) -> DmpsResult<Vec<ScalingCsvRow>> {
    let env = Env::new(dmps_core::EnvConfig::preset(dmps_core::EnvName::DoubleGatesPlus, dynamics))?;
    let cfg = ScalingConfig { horizons: (2..=max_horizon.max(2)).collect(), seed, ..ScalingConfig::default() };
    let rows = planner_scaling(&env, ShieldConfig::for_env(env.config()), &cfg)?;
    Ok(rows
        .into_iter()
        .map(|r| ScalingCsvRow {
            horizon: r.horizon,
            mean_expansions: r.mean_expansions,
            sd_expansions: r.sd_expansions,
            states: r.states,
            censored: r.censored,
        })
        .collect())
}
