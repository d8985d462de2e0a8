//! Flat `key = value` run configuration.
//!
//! Keys carry a section prefix (`env.`, `shield.`, `planner.`, `learner.`,
//! `train.`). `env.name` and `env.dynamics` select a preset, the remaining
//! `env.*` keys override it, and shield and train defaults are derived from
//! the resulting environment before their own overrides apply. Lines
//! starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use dmps_core::env::{Disc, Gate, Lane, MovingObstacle};
use dmps_core::{Dynamics, EnvConfig, EnvName, LearnerConfig, PlannerConfig, ShieldConfig, TrainConfig};

use crate::error::{DmpsError, DmpsResult};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub shield: ShieldConfig,
    pub planner: PlannerConfig,
    pub learner: LearnerConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    /// Defaults for an environment preset.
    pub fn preset(name: EnvName, dynamics: Dynamics) -> Self {
        let env = EnvConfig::preset(name, dynamics);
        let shield = ShieldConfig::for_env(&env);
        let planner = PlannerConfig::default();
        let learner = LearnerConfig { gamma: planner.gamma, ..LearnerConfig::default() };
        let train = TrainConfig::for_env(&dmps_core::Env::new(env.clone()).expect("presets are valid"));
        Self { env, shield, planner, learner, train }
    }

    pub fn validate(&self) -> DmpsResult<()> {
        self.env.validate()?;
        self.shield.validate(&self.env)?;
        self.planner.validate()?;
        self.learner.validate()?;
        self.train.validate()?;
        if self.planner.gamma != self.learner.gamma {
            return Err(DmpsError::Config("planner.gamma must equal learner.gamma".into()));
        }
        Ok(())
    }

    /// Parses a config text. Unknown keys and repeated keys are errors.
    pub fn parse(text: &str) -> DmpsResult<Self> {
        Self::from_entries(parse_entries(text)?)
    }

    pub fn from_entries(mut e: BTreeMap<String, String>) -> DmpsResult<Self> {
        let name: EnvName = take(&mut e, "env.name")?.unwrap_or(EnvName::DoubleGatesPlus);
        let dynamics: Dynamics = take(&mut e, "env.dynamics")?.unwrap_or(Dynamics::Di);
        let mut env = EnvConfig::preset(name, dynamics);
        set(&mut e, "env.dt", &mut env.dt)?;
        set(&mut e, "env.a_max", &mut env.a_max)?;
        set(&mut e, "env.v_max", &mut env.v_max)?;
        set(&mut e, "env.wheel_base", &mut env.wheel_base)?;
        if let Some(Pair(p)) = take(&mut e, "env.goal")? {
            env.goal = p;
        }
        set(&mut e, "env.goal_radius", &mut env.goal_radius)?;
        set(&mut e, "env.step_penalty", &mut env.step_penalty)?;
        set(&mut e, "env.shaping", &mut env.shaping)?;
        set(&mut e, "env.goal_bonus", &mut env.goal_bonus)?;
        set(&mut e, "env.arena_half", &mut env.arena_half)?;
        if let Some(OptF64(v)) = take(&mut e, "env.speed_limit")? {
            env.speed_limit = v;
        }
        if let Some(raw) = e.remove("env.lane") {
            env.lane = if raw == "none" {
                None
            } else {
                let v = floats(&raw, 4, "env.lane")?;
                Some(Lane { x_min: v[0], x_max: v[1], y_min: v[2], y_max: v[3] })
            };
        }
        if let Some(Pair(p)) = take(&mut e, "env.start")? {
            env.start = p;
        }
        set(&mut e, "env.start_radius", &mut env.start_radius)?;
        set(&mut e, "env.episode_max_steps", &mut env.episode_max_steps)?;
        if let Some(raw) = e.remove("env.gates") {
            env.gates = records(&raw, 4, "env.gates")?
                .into_iter()
                .map(|v| Gate { r_in: v[0], thickness: v[1], opening_half_angle: v[2], omega: v[3] })
                .collect();
        }
        if let Some(raw) = e.remove("env.moving_obstacles") {
            env.moving_obstacles = records(&raw, 5, "env.moving_obstacles")?
                .into_iter()
                .map(|v| MovingObstacle { center: [v[0], v[1]], orbit: v[2], radius: v[3], omega: v[4] })
                .collect();
        }
        if let Some(raw) = e.remove("env.static_obstacles") {
            env.static_obstacles = records(&raw, 3, "env.static_obstacles")?
                .into_iter()
                .map(|v| Disc { center: [v[0], v[1]], radius: v[2] })
                .collect();
        }
        env.validate()?;

        let mut shield = ShieldConfig::for_env(&env);
        set(&mut e, "shield.recovery_horizon", &mut shield.recovery_horizon)?;
        set(&mut e, "shield.equilibrium_speed_tol", &mut shield.equilibrium_speed_tol)?;
        set(&mut e, "shield.r_minus", &mut shield.r_minus)?;

        let mut planner = PlannerConfig::default();
        set(&mut e, "planner.horizon", &mut planner.horizon)?;
        set(&mut e, "planner.branching", &mut planner.branching)?;
        set(&mut e, "planner.iterations", &mut planner.iterations)?;
        set(&mut e, "planner.ucb_c", &mut planner.ucb_c)?;
        set(&mut e, "planner.gamma", &mut planner.gamma)?;

        let mut learner = LearnerConfig { gamma: planner.gamma, ..LearnerConfig::default() };
        set(&mut e, "learner.gamma", &mut learner.gamma)?;
        set(&mut e, "learner.actor_lr", &mut learner.actor_lr)?;
        set(&mut e, "learner.critic_lr", &mut learner.critic_lr)?;
        set(&mut e, "learner.tau", &mut learner.tau)?;
        set(&mut e, "learner.policy_delay", &mut learner.policy_delay)?;
        set(&mut e, "learner.smoothing_sigma", &mut learner.smoothing_sigma)?;
        set(&mut e, "learner.smoothing_clip", &mut learner.smoothing_clip)?;
        set(&mut e, "learner.batch_size", &mut learner.batch_size)?;
        if let Some(raw) = e.remove("learner.hidden") {
            learner.hidden = list(&raw, "learner.hidden")?;
        }
        set(&mut e, "learner.buffer_capacity", &mut learner.buffer_capacity)?;
        set(&mut e, "learner.exploration_sigma", &mut learner.exploration_sigma)?;

        let mut train = TrainConfig::for_env(&dmps_core::Env::new(env.clone())?);
        set(&mut e, "train.total_timesteps", &mut train.total_timesteps)?;
        set(&mut e, "train.episode_max_steps", &mut train.episode_max_steps)?;
        set(&mut e, "train.eval_every", &mut train.eval_every)?;
        set(&mut e, "train.eval_episodes", &mut train.eval_episodes)?;
        if let Some(raw) = e.remove("train.seeds") {
            train.seeds = list(&raw, "train.seeds")?;
        }
        set(&mut e, "train.shield_mode", &mut train.shield_mode)?;
        set(&mut e, "train.random_steps", &mut train.random_steps)?;

        if let Some(k) = e.keys().next() {
            return Err(DmpsError::Config(format!("unknown key `{k}`")));
        }
        let cfg = Self { env, shield, planner, learner, train };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key with its resolved value. Parsing the result gives back an
    /// equal config.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let env = &self.env;
        kv("env.name", env.name.to_string());
        kv("env.dynamics", env.dynamics.as_str().to_string());
        kv("env.dt", env.dt.to_string());
        kv("env.a_max", env.a_max.to_string());
        kv("env.v_max", env.v_max.to_string());
        kv("env.wheel_base", env.wheel_base.to_string());
        kv("env.goal", join(&env.goal));
        kv("env.goal_radius", env.goal_radius.to_string());
        kv("env.step_penalty", env.step_penalty.to_string());
        kv("env.shaping", env.shaping.to_string());
        kv("env.goal_bonus", env.goal_bonus.to_string());
        kv("env.arena_half", env.arena_half.to_string());
        kv("env.speed_limit", env.speed_limit.map_or("none".into(), |v| v.to_string()));
        kv("env.lane", env.lane.map_or("none".into(), |l| join(&[l.x_min, l.x_max, l.y_min, l.y_max])));
        kv("env.start", join(&env.start));
        kv("env.start_radius", env.start_radius.to_string());
        kv("env.episode_max_steps", env.episode_max_steps.to_string());
        kv(
            "env.gates",
            join_records(env.gates.iter().map(|g| vec![g.r_in, g.thickness, g.opening_half_angle, g.omega])),
        );
        kv(
            "env.moving_obstacles",
            join_records(
                env.moving_obstacles.iter().map(|o| vec![o.center[0], o.center[1], o.orbit, o.radius, o.omega]),
            ),
        );
        kv(
            "env.static_obstacles",
            join_records(env.static_obstacles.iter().map(|d| vec![d.center[0], d.center[1], d.radius])),
        );
        kv("shield.recovery_horizon", self.shield.recovery_horizon.to_string());
        kv("shield.equilibrium_speed_tol", self.shield.equilibrium_speed_tol.to_string());
        kv("shield.r_minus", self.shield.r_minus.to_string());
        let p = &self.planner;
        kv("planner.horizon", p.horizon.to_string());
        kv("planner.branching", p.branching.to_string());
        kv("planner.iterations", p.iterations.to_string());
        kv("planner.ucb_c", p.ucb_c.to_string());
        kv("planner.gamma", p.gamma.to_string());
        let l = &self.learner;
        kv("learner.gamma", l.gamma.to_string());
        kv("learner.actor_lr", l.actor_lr.to_string());
        kv("learner.critic_lr", l.critic_lr.to_string());
        kv("learner.tau", l.tau.to_string());
        kv("learner.policy_delay", l.policy_delay.to_string());
        kv("learner.smoothing_sigma", l.smoothing_sigma.to_string());
        kv("learner.smoothing_clip", l.smoothing_clip.to_string());
        kv("learner.batch_size", l.batch_size.to_string());
        kv("learner.hidden", join(&l.hidden));
        kv("learner.buffer_capacity", l.buffer_capacity.to_string());
        kv("learner.exploration_sigma", l.exploration_sigma.to_string());
        let t = &self.train;
        kv("train.total_timesteps", t.total_timesteps.to_string());
        kv("train.episode_max_steps", t.episode_max_steps.to_string());
        kv("train.eval_every", t.eval_every.to_string());
        kv("train.eval_episodes", t.eval_episodes.to_string());
        kv("train.seeds", join(&t.seeds));
        kv("train.shield_mode", t.shield_mode.to_string());
        kv("train.random_steps", t.random_steps.to_string());
        out
    }
}

/// `key = value` pairs of a config text, without interpretation.
pub fn parse_entries(text: &str) -> DmpsResult<BTreeMap<String, String>> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| DmpsError::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if entries.insert(k.clone(), v).is_some() {
            return Err(DmpsError::Config(format!("line {}: duplicate key `{k}`", i + 1)));
        }
    }
    Ok(entries)
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> DmpsResult<T> {
    raw.parse().map_err(|_| DmpsError::Config(format!("`{key}`: cannot parse `{raw}`")))
}

fn take<T: FromStr>(e: &mut BTreeMap<String, String>, key: &str) -> DmpsResult<Option<T>> {
    e.remove(key).map(|raw| parse_value(key, &raw)).transpose()
}

fn set<T: FromStr>(e: &mut BTreeMap<String, String>, key: &str, field: &mut T) -> DmpsResult<()> {
    if let Some(v) = take(e, key)? {
        *field = v;
    }
    Ok(())
}

fn list<T: FromStr>(raw: &str, key: &str) -> DmpsResult<Vec<T>> {
    raw.split(',').map(|p| parse_value(key, p.trim())).collect()
}

fn floats(raw: &str, n: usize, key: &str) -> DmpsResult<Vec<f64>> {
    let v: Vec<f64> = list(raw, key)?;
    if v.len() != n {
        return Err(DmpsError::Config(format!("`{key}` needs {n} comma-separated numbers")));
    }
    Ok(v)
}

/// `none` or `;`-separated records of `n` comma-separated numbers.
fn records(raw: &str, n: usize, key: &str) -> DmpsResult<Vec<Vec<f64>>> {
    if raw == "none" {
        return Ok(Vec::new());
    }
    raw.split(';').map(|r| floats(r, n, key)).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn join_records(rs: impl Iterator<Item = Vec<f64>>) -> String {
    let parts: Vec<String> = rs.map(|r| join(&r)).collect();
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join(";")
    }
}

struct Pair([f64; 2]);

impl FromStr for Pair {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        let (a, b) = s.split_once(',').ok_or(())?;
        Ok(Pair([a.trim().parse().map_err(|_| ())?, b.trim().parse().map_err(|_| ())?]))
    }
}

struct OptF64(Option<f64>);

impl FromStr for OptF64 {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        if s == "none" {
            Ok(OptF64(None))
        } else {
            s.parse().map(|v| OptF64(Some(v))).map_err(|_| ())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dmps_core::ShieldMode;

    #[test]
    fn snapshot_round_trips_for_every_preset() {
        for name in EnvName::ALL {
            for dynamics in [Dynamics::Di, Dynamics::Dd] {
                let cfg = RunConfig::preset(name, dynamics);
                let text = cfg.snapshot();
                assert_eq!(RunConfig::parse(&text).unwrap(), cfg, "{name} {dynamics:?}");
            }
        }
    }

    #[test]
    fn overrides_apply_on_top_of_the_preset() {
        let cfg = RunConfig::parse(
            "# comment\nenv.name = obstacle\nenv.dynamics = dd\nplanner.horizon = 3\nlearner.hidden = 32,16\ntrain.seeds = 4,5\n\
             train.shield_mode = mps\nenv.static_obstacles = 1,2,0.5;0,0,0.25\nplanner.gamma = 0.9\nlearner.gamma = 0.9\n",
        )
        .unwrap();
        assert_eq!(cfg.env.name, EnvName::Obstacle);
        assert_eq!(cfg.env.dynamics, Dynamics::Dd);
        assert_eq!(cfg.planner.horizon, 3);
        assert_eq!(cfg.learner.hidden, vec![32, 16]);
        assert_eq!(cfg.train.seeds, vec![4, 5]);
        assert_eq!(cfg.train.shield_mode, ShieldMode::Mps);
        assert_eq!(cfg.env.static_obstacles.len(), 2);
        assert_eq!(cfg.env.static_obstacles[1].radius, 0.25);
        assert_eq!(RunConfig::parse(&cfg.snapshot()).unwrap(), cfg);
    }

    #[test]
    fn odd_floats_round_trip() {
        let mut cfg = RunConfig::preset(EnvName::Road2d, Dynamics::Di);
        cfg.env.dt = 0.1 + 0.2;
        cfg.shield.equilibrium_speed_tol = 1e-300;
        cfg.learner.actor_lr = 1.0 / 3.0;
        assert_eq!(RunConfig::parse(&cfg.snapshot()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "env.nme = obstacle",
            "env.name = moon",
            "planner.horizon = -1",
            "planner.horizon",
            "planner.horizon = 2\nplanner.horizon = 3",
            "planner.gamma = 0.9\nlearner.gamma = 0.95",
            "env.goal = 1",
            "env.lane = 1,2,3",
            "shield.r_minus = 0",
            "train.seeds = ",
        ] {
            assert_eq!(RunConfig::parse(bad).unwrap_err().exit_code(), crate::exit::CONFIG, "{bad}");
        }
    }
}
