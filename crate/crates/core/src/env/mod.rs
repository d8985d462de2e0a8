//! Benchmark environments: static obstacle courses, speed-limited roads,
//! circling obstacles and rotating gates, each under double-integrator or
//! differential-drive dynamics.
//!
//! State layout: the four agent entries (`x, y, vx, vy` or `x, y, v, theta`)
//! followed by one phase per rotating wall, then one per moving obstacle.

mod config;
pub mod dynamics;

use core::f64::consts::TAU;

use rand::Rng;

pub use config::{Disc, Dynamics, EnvConfig, EnvName, Gate, Lane, MovingObstacle};
use dynamics::{dd_step, di_step, DdParams, DdState, DiParams, DiState};

use crate::error::{CoreError, CoreResult};
use crate::math::{atan2, cos, hypot, sin, sqrt, wrap_pi, wrap_two_pi};
use crate::mdp::{ActionBounds, ActionVec, EnvState, Mdp};

const AGENT_DIM: usize = 4;

/// An instantiated, immutable environment model.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    bounds: ActionBounds,
}

/// Builds the environment described by `cfg`.
pub fn make_env(cfg: EnvConfig) -> CoreResult<Env> {
    Env::new(cfg)
}

impl Env {
    pub fn new(cfg: EnvConfig) -> CoreResult<Self> {
        cfg.validate()?;
        let bounds = ActionBounds::symmetric(cfg.a_max, 2)?;
        let env = Env { cfg, bounds };
        env.check_start_region()?;
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn dynamics(&self) -> Dynamics {
        self.cfg.dynamics
    }

    fn di_params(&self) -> DiParams {
        DiParams { dt: self.cfg.dt, a_max: self.cfg.a_max, v_max: self.cfg.v_max }
    }

    fn dd_params(&self) -> DdParams {
        DdParams { dt: self.cfg.dt, torque_max: self.cfg.a_max, v_max: self.cfg.v_max, wheel_base: self.cfg.wheel_base }
    }

    pub fn position(&self, s: &EnvState) -> (f64, f64) {
        (s[0], s[1])
    }

    /// Magnitude of the agent's velocity.
    pub fn speed(&self, s: &EnvState) -> f64 {
        match self.cfg.dynamics {
            Dynamics::Di => hypot(s[2], s[3]),
            Dynamics::Dd => s[2].abs(),
        }
    }

    pub fn wall_phases<'a>(&self, s: &'a EnvState) -> &'a [f64] {
        &s.as_slice()[AGENT_DIM..AGENT_DIM + self.cfg.gates.len()]
    }

    pub fn obstacle_phases<'a>(&self, s: &'a EnvState) -> &'a [f64] {
        &s.as_slice()[AGENT_DIM + self.cfg.gates.len()..]
    }

    pub fn di_state(s: &EnvState) -> DiState {
        DiState { x: s[0], y: s[1], vx: s[2], vy: s[3] }
    }

    pub fn dd_state(s: &EnvState) -> DdState {
        DdState { x: s[0], y: s[1], v: s[2], theta: s[3] }
    }

    /// Assembles a state from agent entries and phases.
    pub fn state(&self, agent: [f64; 4], phases: &[f64]) -> CoreResult<EnvState> {
        if phases.len() != self.cfg.phase_count() {
            return Err(CoreError::Shape { expected: self.cfg.phase_count(), got: phases.len() });
        }
        let mut s = EnvState::zeros(self.obs_dim());
        let v = s.as_mut_slice();
        v[..AGENT_DIM].copy_from_slice(&agent);
        for (dst, p) in v[AGENT_DIM..].iter_mut().zip(phases) {
            *dst = wrap_two_pi(*p);
        }
        if self.cfg.dynamics == Dynamics::Dd {
            v[3] = wrap_pi(v[3]);
        }
        s.check_finite()?;
        Ok(s)
    }

    fn advance_phases(&self, phases: &mut [f64]) {
        let dt = self.cfg.dt;
        let omegas = self.cfg.gates.iter().map(|g| g.omega).chain(self.cfg.moving_obstacles.iter().map(|m| m.omega));
        for (p, w) in phases.iter_mut().zip(omegas) {
            *p = wrap_two_pi(*p + w * dt);
        }
    }

    /// Transition without reward.
    pub fn transition(&self, s: &EnvState, a: &ActionVec) -> CoreResult<EnvState> {
        s.check_finite()?;
        if s.dim() != self.obs_dim() {
            return Err(CoreError::Shape { expected: self.obs_dim(), got: s.dim() });
        }
        let a = self.bounds.clamp(a);
        let mut next = *s;
        let v = next.as_mut_slice();
        match self.cfg.dynamics {
            Dynamics::Di => {
                let n = di_step(Self::di_state(s), [a[0], a[1]], &self.di_params());
                v[..AGENT_DIM].copy_from_slice(&[n.x, n.y, n.vx, n.vy]);
            }
            Dynamics::Dd => {
                let n = dd_step(Self::dd_state(s), [a[0], a[1]], &self.dd_params());
                v[..AGENT_DIM].copy_from_slice(&[n.x, n.y, n.v, n.theta]);
            }
        }
        self.advance_phases(&mut v[AGENT_DIM..]);
        Ok(next)
    }

    pub fn goal_distance(&self, s: &EnvState) -> f64 {
        hypot(s[0] - self.cfg.goal[0], s[1] - self.cfg.goal[1])
    }

    /// Shaped reward for moving from `s` to `next`.
    pub fn reward_between(&self, s: &EnvState, next: &EnvState) -> f64 {
        let shaping = self.cfg.shaping * (self.goal_distance(s) - self.goal_distance(next));
        let bonus = if self.is_goal(next) { self.cfg.goal_bonus } else { 0.0 };
        self.cfg.step_penalty + shaping + bonus
    }

    /// `R(s, a)`; the successor is computed internally for the shaping term.
    pub fn reward(&self, s: &EnvState, a: &ActionVec) -> CoreResult<f64> {
        let next = self.transition(s, a)?;
        Ok(self.reward_between(s, &next))
    }

    fn moving_obstacle_center(m: &MovingObstacle, phase: f64) -> (f64, f64) {
        (m.center[0] + m.orbit * cos(phase), m.center[1] + m.orbit * sin(phase))
    }

    fn in_static_region(&self, x: f64, y: f64) -> bool {
        let c = &self.cfg;
        if x.abs() > c.arena_half || y.abs() > c.arena_half {
            return true;
        }
        if let Some(lane) = &c.lane {
            if !lane.contains(x, y) {
                return true;
            }
        }
        c.static_obstacles.iter().any(|d| hypot(x - d.center[0], y - d.center[1]) <= d.radius)
    }

    /// True when the wall of `gate` at `phase` covers point `(x, y)`.
    pub fn gate_blocks(&self, gate: &Gate, phase: f64, x: f64, y: f64) -> bool {
        let dx = x - self.cfg.goal[0];
        let dy = y - self.cfg.goal[1];
        let r = hypot(dx, dy);
        if r < gate.r_in || r > gate.r_in + gate.thickness {
            return false;
        }
        wrap_pi(atan2(dy, dx) - phase).abs() > gate.opening_half_angle
    }

    /// `s ∈ S_U`.
    pub fn is_unsafe(&self, s: &EnvState) -> bool {
        let (x, y) = (s[0], s[1]);
        if self.in_static_region(x, y) {
            return true;
        }
        if let Some(limit) = self.cfg.speed_limit {
            if self.speed(s) > limit {
                return true;
            }
        }
        let walls = self.wall_phases(s);
        if self.cfg.gates.iter().zip(walls).any(|(g, &p)| self.gate_blocks(g, p, x, y)) {
            return true;
        }
        let obst = self.obstacle_phases(s);
        self.cfg.moving_obstacles.iter().zip(obst).any(|(m, &p)| {
            let (cx, cy) = Self::moving_obstacle_center(m, p);
            hypot(x - cx, y - cy) <= m.radius
        })
    }

    /// A stationary agent at `(x, y)` is safe for every future wall and
    /// obstacle phase: the point lies outside every region the moving
    /// geometry sweeps and outside all static geometry.
    pub fn is_permanently_safe_position(&self, x: f64, y: f64) -> bool {
        if self.in_static_region(x, y) {
            return false;
        }
        let r = hypot(x - self.cfg.goal[0], y - self.cfg.goal[1]);
        if self.cfg.gates.iter().any(|g| r >= g.r_in && r <= g.r_in + g.thickness) {
            return false;
        }
        !self.cfg.moving_obstacles.iter().any(|m| {
            let d = hypot(x - m.center[0], y - m.center[1]);
            (d - m.orbit).abs() <= m.radius
        })
    }

    pub fn is_goal(&self, s: &EnvState) -> bool {
        self.goal_distance(s) <= self.cfg.goal_radius
    }

    /// Draws a stationary start state: uniform position in the start disc,
    /// uniform phases, uniform heading for differential drive.
    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        let c = &self.cfg;
        let radius = c.start_radius * sqrt(rng.gen::<f64>());
        let angle = rng.gen::<f64>() * TAU;
        let x = c.start[0] + radius * cos(angle);
        let y = c.start[1] + radius * sin(angle);
        let heading = match c.dynamics {
            Dynamics::Di => 0.0,
            Dynamics::Dd => rng.gen::<f64>() * TAU - core::f64::consts::PI,
        };
        let mut phases = [0.0; crate::mdp::MAX_STATE_DIM];
        let n = c.phase_count();
        for p in phases[..n].iter_mut() {
            *p = rng.gen::<f64>() * TAU;
        }
        self.state([x, y, 0.0, heading], &phases[..n]).expect("start region validated at construction")
    }

    /// The whole start disc must be permanently safe so every initial state
    /// is a recoverable equilibrium.
    fn check_start_region(&self) -> CoreResult<()> {
        let c = &self.cfg;
        let rings = 16;
        let spokes = 64;
        for i in 0..=rings {
            let r = c.start_radius * i as f64 / rings as f64;
            for j in 0..spokes {
                let t = TAU * j as f64 / spokes as f64;
                let (x, y) = (c.start[0] + r * cos(t), c.start[1] + r * sin(t));
                if !self.is_permanently_safe_position(x, y) {
                    return Err(CoreError::config("start region intersects unsafe or swept geometry"));
                }
            }
        }
        Ok(())
    }

    /// Length of the learner's feature vector.
    pub fn feature_dim(&self) -> usize {
        let agent = match self.cfg.dynamics {
            Dynamics::Di => 4,
            Dynamics::Dd => 5,
        };
        agent + 2 * self.cfg.phase_count()
    }

    /// Network input for state `s`: scaled position and velocity, heading
    /// and phases as `(cos, sin)` pairs so the features are continuous.
    pub fn observe(&self, s: &EnvState, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.feature_dim());
        let c = &self.cfg;
        out[0] = (s[0] - c.goal[0]) / c.arena_half;
        out[1] = (s[1] - c.goal[1]) / c.arena_half;
        let mut k = match c.dynamics {
            Dynamics::Di => {
                out[2] = s[2] / c.v_max;
                out[3] = s[3] / c.v_max;
                4
            }
            Dynamics::Dd => {
                out[2] = s[2] / c.v_max;
                out[3] = cos(s[3]);
                out[4] = sin(s[3]);
                5
            }
        };
        for &p in &s.as_slice()[AGENT_DIM..] {
            out[k] = cos(p);
            out[k + 1] = sin(p);
            k += 2;
        }
    }
}

impl Mdp for Env {
    fn obs_dim(&self) -> usize {
        AGENT_DIM + self.cfg.phase_count()
    }

    fn act_dim(&self) -> usize {
        2
    }

    fn action_bounds(&self) -> ActionBounds {
        self.bounds
    }

    fn step(&self, s: &EnvState, a: &ActionVec) -> CoreResult<(EnvState, f64)> {
        let next = self.transition(s, a)?;
        Ok((next, self.reward_between(s, &next)))
    }

    fn is_unsafe(&self, s: &EnvState) -> bool {
        Env::is_unsafe(self, s)
    }

    fn is_goal(&self, s: &EnvState) -> bool {
        Env::is_goal(self, s)
    }
}
