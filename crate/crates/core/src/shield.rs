//! Backup policy, recoverability, and the MPS / DMPS shield compositions.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::env::{Dynamics, Env, EnvConfig};
use crate::error::{CoreError, CoreResult};
use crate::math::ceil;
use crate::mdp::{ActionVec, EnvState, Mdp};
use crate::planner::{plan_rec, PlanResult, PlannerConfig, PlanningDomain};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShieldConfig {
    /// Steps of backup simulation in the recoverability check.
    pub recovery_horizon: usize,
    /// Speed at or below which the agent counts as stopped.
    pub equilibrium_speed_tol: f64,
    /// Reward recorded for a proposed action that the shield rejects.
    pub r_minus: f64,
}

impl ShieldConfig {
    /// Smallest horizon that brakes from full speed, plus two steps.
    pub fn for_env(cfg: &EnvConfig) -> Self {
        let brake_steps = ceil(cfg.v_max / (cfg.a_max * cfg.dt)) as usize;
        Self { recovery_horizon: brake_steps + 2, equilibrium_speed_tol: 1e-6, r_minus: -10.0 }
    }

    /// Lowest one-step reward the environment can pay: the step penalty
    /// plus the largest possible per-step increase in goal distance.
    pub fn min_env_reward(cfg: &EnvConfig) -> f64 {
        cfg.step_penalty - cfg.shaping.abs() * cfg.v_max * cfg.dt
    }

    pub fn validate(&self, env: &EnvConfig) -> CoreResult<()> {
        if self.recovery_horizon == 0 {
            return Err(CoreError::config("shield.recovery_horizon must be at least 1"));
        }
        if !(self.equilibrium_speed_tol >= 0.0) {
            return Err(CoreError::config("shield.equilibrium_speed_tol must be non-negative"));
        }
        if !(self.r_minus < Self::min_env_reward(env)) {
            return Err(CoreError::config("shield.r_minus must lie below every one-step reward"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShieldMode {
    None,
    Mps,
    Dmps,
}

impl ShieldMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ShieldMode::None => "none",
            ShieldMode::Mps => "mps",
            ShieldMode::Dmps => "dmps",
        }
    }
}

impl fmt::Display for ShieldMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShieldMode {
    type Err = CoreError;
    fn from_str(s: &str) -> CoreResult<Self> {
        match s {
            "none" => Ok(ShieldMode::None),
            "mps" => Ok(ShieldMode::Mps),
            "dmps" => Ok(ShieldMode::Dmps),
            other => Err(CoreError::Config(alloc::format!("unknown shield mode `{other}`"))),
        }
    }
}

/// Who produced the executed action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Learned,
    Planner,
    Backup,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Learned => "learned",
            Source::Planner => "planner",
            Source::Backup => "backup",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShieldDecision {
    pub action: ActionVec,
    pub source: Source,
}

impl ShieldDecision {
    /// The learned action was replaced.
    pub fn triggered(&self) -> bool {
        self.source != Source::Learned
    }
}

/// A deterministic, task-oblivious safety controller.
pub trait BackupPolicy {
    fn act(&self, env: &Env, s: &EnvState) -> ActionVec;
}

/// Brakes as hard as allowed along the current velocity, never past zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaltingBackup {
    pub speed_tol: f64,
}

impl BackupPolicy for HaltingBackup {
    fn act(&self, env: &Env, s: &EnvState) -> ActionVec {
        backup_halt(env, s, self.speed_tol)
    }
}

/// Maximum deceleration opposing the velocity. The magnitude is capped at
/// `speed / dt` so the agent stops exactly instead of reversing.
pub fn backup_halt(env: &Env, s: &EnvState, speed_tol: f64) -> ActionVec {
    let cfg = env.config();
    let speed = env.speed(s);
    if speed <= speed_tol {
        return ActionVec::zeros(2);
    }
    let mag = cfg.a_max.min(speed / cfg.dt);
    match cfg.dynamics {
        Dynamics::Di => ActionVec::new(&[-mag * s[2] / speed, -mag * s[3] / speed]),
        Dynamics::Dd => {
            let t = -s[2].signum() * mag;
            ActionVec::new(&[t, t])
        }
    }
}

/// The environment together with its backup policy and shield settings.
#[derive(Debug, Clone)]
pub struct Shield<'a, B = HaltingBackup> {
    env: &'a Env,
    backup: B,
    cfg: ShieldConfig,
}

impl<'a> Shield<'a, HaltingBackup> {
    pub fn halting(env: &'a Env, cfg: ShieldConfig) -> Self {
        Shield { env, backup: HaltingBackup { speed_tol: cfg.equilibrium_speed_tol }, cfg }
    }
}

impl<'a, B: BackupPolicy> Shield<'a, B> {
    pub fn new(env: &'a Env, backup: B, cfg: ShieldConfig) -> Self {
        Shield { env, backup, cfg }
    }

    pub fn env(&self) -> &'a Env {
        self.env
    }

    pub fn config(&self) -> &ShieldConfig {
        &self.cfg
    }

    pub fn backup_action(&self, s: &EnvState) -> ActionVec {
        self.backup.act(self.env, s)
    }

    /// Simulates the backup policy for `N` steps from `s`. Recoverable iff
    /// `s` and every visited state are safe and the final state is stopped at
    /// a position that stays safe under all future wall/obstacle motion.
    pub fn is_recoverable(&self, s: &EnvState) -> bool {
        if self.env.is_unsafe(s) {
            return false;
        }
        let mut cur = *s;
        for _ in 0..self.cfg.recovery_horizon {
            let a = self.backup.act(self.env, &cur);
            cur = match self.env.transition(&cur, &a) {
                Ok(n) => n,
                Err(_) => return false,
            };
            if self.env.is_unsafe(&cur) {
                return false;
            }
        }
        self.env.speed(&cur) <= self.cfg.equilibrium_speed_tol && self.env.is_permanently_safe_position(cur[0], cur[1])
    }

    /// Is `T(s, a)` recoverable?
    pub fn successor_recoverable(&self, s: &EnvState, a: &ActionVec) -> bool {
        match self.env.transition(s, a) {
            Ok(next) => self.is_recoverable(&next),
            Err(_) => false,
        }
    }

    /// MPS: keep the proposed action when its successor is recoverable,
    /// otherwise substitute the backup action.
    pub fn mps_action(&self, s: &EnvState, proposed: &ActionVec) -> ShieldDecision {
        let a = self.env.action_bounds().clamp(proposed);
        if self.successor_recoverable(s, &a) {
            ShieldDecision { action: a, source: Source::Learned }
        } else {
            ShieldDecision { action: self.backup_action(s), source: Source::Backup }
        }
    }

    /// DMPS: like MPS, but the substitute is the first action of a recovery
    /// plan; the backup policy is used only when planning returns ⊥.
    pub fn dmps_action<F>(
        &self,
        s: &EnvState,
        proposed: &ActionVec,
        pcfg: &PlannerConfig,
        q_fn: &mut F,
        rng: &mut Rng,
    ) -> ShieldDecision
    where
        F: FnMut(&EnvState, &ActionVec) -> f64,
    {
        let a = self.env.action_bounds().clamp(proposed);
        if self.successor_recoverable(s, &a) {
            return ShieldDecision { action: a, source: Source::Learned };
        }
        self.recovery_action(s, pcfg, q_fn, rng)
    }

    /// The dynamic backup: planned first action, or the backup action on ⊥.
    pub fn recovery_action<F>(&self, s: &EnvState, pcfg: &PlannerConfig, q_fn: &mut F, rng: &mut Rng) -> ShieldDecision
    where
        F: FnMut(&EnvState, &ActionVec) -> f64,
    {
        match plan_rec(*s, q_fn, self, pcfg, rng) {
            PlanResult::Plan { actions, .. } => ShieldDecision { action: actions[0], source: Source::Planner },
            PlanResult::Bottom => ShieldDecision { action: self.backup_action(s), source: Source::Backup },
        }
    }

    /// Shield decision for `mode`. With no shield the proposed (clamped)
    /// action is returned untouched.
    pub fn decide<F>(
        &self,
        mode: ShieldMode,
        s: &EnvState,
        proposed: &ActionVec,
        pcfg: &PlannerConfig,
        q_fn: &mut F,
        rng: &mut Rng,
    ) -> ShieldDecision
    where
        F: FnMut(&EnvState, &ActionVec) -> f64,
    {
        match mode {
            ShieldMode::None => {
                ShieldDecision { action: self.env.action_bounds().clamp(proposed), source: Source::Learned }
            }
            ShieldMode::Mps => self.mps_action(s, proposed),
            ShieldMode::Dmps => self.dmps_action(s, proposed, pcfg, q_fn, rng),
        }
    }
}

impl<B: BackupPolicy> PlanningDomain for Shield<'_, B> {
    type State = EnvState;
    type Action = ActionVec;

    fn step(&self, s: &EnvState, a: &ActionVec) -> Option<(EnvState, f64)> {
        self.env.step(s, a).ok()
    }

    fn is_recoverable(&self, s: &EnvState) -> bool {
        Shield::is_recoverable(self, s)
    }

    fn sample_actions(&self, rng: &mut Rng, k: usize, out: &mut Vec<ActionVec>) {
        let bounds = self.env.action_bounds();
        out.extend((0..k).map(|_| bounds.sample_uniform(rng)));
    }
}
