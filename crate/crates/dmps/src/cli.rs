//! The `dmps` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use dmps_core::{Dynamics, EnvName, ShieldMode};

use crate::checkpoint;
use crate::config::RunConfig;
use crate::csvio::{self, MetricsRow, RegretRow, ScalingCsvRow, TrajectoryRow};
use crate::error::{exit, DmpsError, DmpsResult};
use crate::experiment::{self, EvalOutcome, OracleSettings};
use crate::manifest;

/// Log verbosity, in `env_logger` filter syntax.
pub const LOG_ENV: &str = "DMPS_LOG_LEVEL";

#[derive(Debug, Parser)]
#[command(name = "dmps", version, about = "Safe reinforcement learning with dynamic model predictive shielding")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one agent per seed and write metrics, checkpoints and a manifest.
    Train(TrainArgs),
    /// Evaluate checkpoints and write a summary table.
    Eval(EvalArgs),
    /// Aggregate metrics files into plot-ready mean and sd series.
    Report(ReportArgs),
    /// Run the planner-equivalence and recovery-regret suites.
    Oracle(OracleArgs),
    /// Measure planner expansions against plan horizon.
    Scaling(ScalingArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `key = value` config file or a manifest.json from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub env: Option<EnvName>,
    #[arg(long)]
    pub dynamics: Option<Dynamics>,
    #[arg(long)]
    pub shield: Option<ShieldMode>,
    /// A count `N` for seeds `0..N`, or a comma-separated list.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub timesteps: Option<usize>,
    /// Planner horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint files; repeat the flag or separate with commas.
    #[arg(long, required = true, value_delimiter = ',')]
    pub checkpoint: Vec<PathBuf>,
    /// Overrides the shield mode stored in each checkpoint.
    #[arg(long)]
    pub shield: Option<ShieldMode>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Also write one trajectory file per checkpoint.
    #[arg(long)]
    pub trajectories: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Metrics files, or run directories holding `metrics_seed*.csv`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Largest regret horizon.
    #[arg(long, default_value_t = 5)]
    pub horizon: usize,
    /// Root seed.
    #[arg(long, default_value_t = 0)]
    pub seeds: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[arg(long, default_value = "di")]
    pub dynamics: Dynamics,
    /// Largest horizon; rows cover `2..=H`.
    #[arg(long, default_value_t = 9)]
    pub horizon: usize,
    /// Root seed.
    #[arg(long, default_value_t = 0)]
    pub seeds: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> DmpsResult<()> {
    match cmd {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report(a),
        Command::Oracle(a) => oracle(a),
        Command::Scaling(a) => scaling(a),
    }
}

/// `N` means seeds `0..N`; anything with a comma is an explicit list.
pub fn parse_seeds(raw: &str) -> DmpsResult<Vec<u64>> {
    let bad = || DmpsError::Config(format!("--seeds: cannot parse `{raw}`"));
    if raw.contains(',') {
        raw.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse().map_err(|_| bad())).collect()
    } else {
        let n: u64 = raw.trim().parse().map_err(|_| bad())?;
        Ok((0..n).collect())
    }
}

/// Resolves the run config: file entries first, then command-line flags.
pub fn resolve_train_config(a: &TrainArgs) -> DmpsResult<RunConfig> {
    let mut entries: BTreeMap<String, String> = match &a.config {
        Some(p) => manifest::load_entries(p)?,
        None => BTreeMap::new(),
    };
    if let Some(e) = a.env {
        entries.insert("env.name".into(), e.to_string());
    }
    if let Some(d) = a.dynamics {
        entries.insert("env.dynamics".into(), d.as_str().into());
    }
    if let Some(s) = a.shield {
        entries.insert("train.shield_mode".into(), s.to_string());
    }
    if let Some(raw) = &a.seeds {
        let seeds: Vec<String> = parse_seeds(raw)?.iter().map(u64::to_string).collect();
        entries.insert("train.seeds".into(), seeds.join(","));
    }
    if let Some(h) = a.horizon {
        entries.insert("planner.horizon".into(), h.to_string());
    }
    if let Some(t) = a.timesteps {
        entries.insert("train.total_timesteps".into(), t.to_string());
        // Short runs still get one evaluation, at their end.
        if !entries.contains_key("train.eval_every") {
            let probe = RunConfig::from_entries(BTreeMap::from([
                (
                    "env.name".to_string(),
                    entries.get("env.name").cloned().unwrap_or_else(|| "double-gates-plus".into()),
                ),
                ("env.dynamics".to_string(), entries.get("env.dynamics").cloned().unwrap_or_else(|| "di".into())),
            ]))?;
            entries.insert("train.eval_every".into(), probe.train.eval_every.min(t.max(1)).to_string());
        }
    }
    RunConfig::from_entries(entries)
}

fn train(a: TrainArgs) -> DmpsResult<()> {
    let cfg = resolve_train_config(&a)?;
    let runs = experiment::train_all(&cfg, a.config.as_deref(), &a.out)?;
    for r in &runs {
        let last = r.final_eval();
        println!(
            "seed {}: episodes {} violations {} final eval return {:.3} invocations {:.2}",
            r.seed,
            r.episodes.len(),
            r.total_violations(),
            last.map_or(f64::NAN, |e| e.mean_return()),
            last.map_or(f64::NAN, |e| e.mean_invocations()),
        );
    }
    Ok(())
}

fn create_dir(p: &Path) -> DmpsResult<()> {
    fs::create_dir_all(p).map_err(|e| DmpsError::io(p, e))
}

fn eval(a: EvalArgs) -> DmpsResult<()> {
    create_dir(&a.out)?;
    let mut outcomes = Vec::new();
    for (i, path) in a.checkpoint.iter().enumerate() {
        let ckpt = checkpoint::load(path)?;
        let mut traj = Vec::new();
        let episodes = if a.trajectories {
            let mut sink = |s: &dmps_core::trainer::TrajectoryStep| traj.push(TrajectoryRow::from(s));
            experiment::eval_checkpoint(&ckpt, a.shield, a.episodes, Some(&mut sink))?
        } else {
            experiment::eval_checkpoint(&ckpt, a.shield, a.episodes, None)?
        };
        if a.trajectories {
            csvio::write_rows(&a.out.join(format!("trajectories_{i}.csv")), &traj)?;
        }
        outcomes.push(EvalOutcome {
            env: ckpt.config.env.name.to_string(),
            dynamics: ckpt.config.env.dynamics.as_str().into(),
            shield: a.shield.unwrap_or(ckpt.config.train.shield_mode),
            seed: ckpt.seed,
            episodes,
        });
    }
    let (rows, comparisons) = experiment::summarize(&outcomes);
    csvio::write_rows(&a.out.join("summary.csv"), &rows)?;
    if !comparisons.is_empty() {
        csvio::write_rows(&a.out.join("comparison.csv"), &comparisons)?;
    }
    for r in &rows {
        println!(
            "{} {} {}: seeds {} return {:.3} ± {:.3} invocations {:.2} ± {:.2} violations {:.2} ± {:.2}",
            r.env,
            r.dynamics,
            r.shield,
            r.seeds,
            r.return_mean,
            r.return_sd,
            r.invocations_mean,
            r.invocations_sd,
            r.violations_mean,
            r.violations_sd
        );
    }
    for c in &comparisons {
        println!("{} {}: dmps/mps invocation ratio {:.3}", c.env, c.dynamics, c.invocation_ratio);
    }
    Ok(())
}

fn seed_of(path: &Path) -> Option<u64> {
    path.file_stem()?.to_str()?.strip_prefix("metrics_seed")?.parse().ok()
}

fn list_dir(dir: &Path) -> DmpsResult<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> =
        fs::read_dir(dir).map_err(|e| DmpsError::io(dir, e))?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    v.sort();
    Ok(v)
}

fn report(a: ReportArgs) -> DmpsResult<()> {
    create_dir(&a.out)?;
    let mut files = Vec::new();
    let mut passthrough = Vec::new();
    for input in &a.inputs {
        if input.is_dir() {
            for p in list_dir(input)? {
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
                if seed_of(&p).is_some() {
                    files.push(p);
                } else if (name.starts_with("regret_") || name == "scaling.csv") && name.ends_with(".csv") {
                    passthrough.push(p);
                }
            }
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            return Err(DmpsError::Report(format!("{} does not exist", input.display())));
        }
    }
    let mut seen = BTreeMap::new();
    let mut runs = Vec::new();
    for f in files {
        if let Some(seed) = seed_of(&f) {
            if let Some(prev) = seen.insert(seed, f.clone()) {
                log::warn!("seed {seed} appears in {} and {}; keeping the first", prev.display(), f.display());
                seen.insert(seed, prev);
                continue;
            }
        }
        runs.push(csvio::read_rows::<MetricsRow>(&f)?);
    }
    if runs.is_empty() && passthrough.is_empty() {
        return Err(DmpsError::Report("no metrics files found".into()));
    }
    if !runs.is_empty() {
        let lens: Vec<usize> = runs.iter().map(Vec::len).collect();
        if lens.iter().any(|&l| l != lens[0]) {
            log::warn!("runs have different episode counts {lens:?}; using the common prefix");
        }
        let series = experiment::series(&runs);
        csvio::write_rows(&a.out.join("series.csv"), &series)?;
        println!("series.csv: {} episodes over {} runs", series.len(), runs.len());
    }
    for p in passthrough {
        let name = p.file_name().expect("listed file").to_owned();
        if name == "scaling.csv" {
            csvio::write_rows(&a.out.join(&name), &csvio::read_rows::<ScalingCsvRow>(&p)?)?;
        } else {
            csvio::write_rows(&a.out.join(&name), &csvio::read_rows::<RegretRow>(&p)?)?;
        }
        println!("{}", Path::new(&name).display());
    }
    Ok(())
}

fn oracle(a: OracleArgs) -> DmpsResult<()> {
    if a.horizon == 0 {
        return Err(DmpsError::Config("--horizon must be at least 1".into()));
    }
    create_dir(&a.out)?;
    let settings = OracleSettings { seed: a.seeds, horizons: (1..=a.horizon).collect(), ..OracleSettings::default() };
    let eq = experiment::mcts_equivalence(&settings)?;
    println!(
        "planner vs exhaustive: {}/{} within 1e-9, max gap {:.3e}, oracle dominates: {}",
        eq.matches, eq.trials, eq.max_gap, eq.oracle_dominates
    );
    let suites = experiment::regret_suites(&settings)?;
    for (name, reports) in [
        ("regret_exact.csv", &suites.exact),
        ("regret_eps.csv", &suites.perturbed),
        ("regret_eps2.csv", &suites.perturbed_doubled),
    ] {
        csvio::write_rows(&a.out.join(name), &experiment::regret_rows(reports))?;
        println!("{name}");
        for r in reports.iter() {
            println!(
                "  n={} rr={:.6} ± {:.6} C={:.6} triggers={} planner gap={:.3e}",
                r.horizon, r.empirical_rr, r.stderr, r.bound_constant, r.triggers, r.max_planner_gap
            );
        }
    }
    Ok(())
}

fn scaling(a: ScalingArgs) -> DmpsResult<()> {
    if a.horizon < 2 {
        return Err(DmpsError::Config("--horizon must be at least 2".into()));
    }
    create_dir(&a.out)?;
    let rows = experiment::scaling_rows(a.dynamics, a.horizon, a.seeds)?;
    csvio::write_rows(&a.out.join("scaling.csv"), &rows)?;
    for r in &rows {
        println!(
            "H={} expansions {:.1} ± {:.1} censored {}",
            r.horizon, r.mean_expansions, r.sd_expansions, r.censored
        );
    }
    Ok(())
}
