use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use crate::error::{CoreError, CoreResult};
use crate::math::hypot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvName {
    Obstacle,
    Obstacle2,
    Road,
    Road2d,
    DynamicObst,
    SingleGate,
    DoubleGates,
    DoubleGatesPlus,
}

impl EnvName {
    pub const ALL: [EnvName; 8] = [
        EnvName::Obstacle,
        EnvName::Obstacle2,
        EnvName::Road,
        EnvName::Road2d,
        EnvName::DynamicObst,
        EnvName::SingleGate,
        EnvName::DoubleGates,
        EnvName::DoubleGatesPlus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::Obstacle => "obstacle",
            EnvName::Obstacle2 => "obstacle2",
            EnvName::Road => "road",
            EnvName::Road2d => "road2d",
            EnvName::DynamicObst => "dynamic-obst",
            EnvName::SingleGate => "single-gate",
            EnvName::DoubleGates => "double-gates",
            EnvName::DoubleGatesPlus => "double-gates-plus",
        }
    }

    pub fn is_gate(self) -> bool {
        matches!(self, EnvName::SingleGate | EnvName::DoubleGates | EnvName::DoubleGatesPlus)
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = CoreError;
    fn from_str(s: &str) -> CoreResult<Self> {
        Ok(match s {
            "obstacle" => EnvName::Obstacle,
            "obstacle2" => EnvName::Obstacle2,
            "road" => EnvName::Road,
            "road2d" => EnvName::Road2d,
            "dynamic-obst" | "dynamic-obs" => EnvName::DynamicObst,
            "single-gate" => EnvName::SingleGate,
            "double-gates" | "double-gate" => EnvName::DoubleGates,
            "double-gates-plus" | "double-gates+" | "double-gate+" => EnvName::DoubleGatesPlus,
            other => return Err(CoreError::Config(alloc::format!("unknown environment `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dynamics {
    /// Double integrator: state `(x, y, vx, vy)`, action `(ax, ay)`.
    Di,
    /// Differential drive: state `(x, y, v, theta)`, action `(tau_left, tau_right)`.
    Dd,
}

impl Dynamics {
    pub fn as_str(self) -> &'static str {
        match self {
            Dynamics::Di => "di",
            Dynamics::Dd => "dd",
        }
    }
}

impl fmt::Display for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dynamics {
    type Err = CoreError;
    fn from_str(s: &str) -> CoreResult<Self> {
        match s {
            "di" | "DI" => Ok(Dynamics::Di),
            "dd" | "DD" => Ok(Dynamics::Dd),
            other => Err(CoreError::Config(alloc::format!("unknown dynamics `{other}`"))),
        }
    }
}

/// A circular wall centred on the goal with one opening. The opening centre
/// sits at the wall's phase angle, which advances by `omega * dt` per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate {
    pub r_in: f64,
    pub thickness: f64,
    pub opening_half_angle: f64,
    pub omega: f64,
}

/// Disc of `radius` whose centre travels on a circle of `orbit` around `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingObstacle {
    pub center: [f64; 2],
    pub orbit: f64,
    pub radius: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Axis-aligned lane `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lane {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Lane {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x_min <= x && x <= self.x_max && self.y_min <= y && y <= self.y_max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub name: EnvName,
    pub dynamics: Dynamics,
    pub dt: f64,
    /// Acceleration bound (DI) or wheel torque bound (DD).
    pub a_max: f64,
    pub v_max: f64,
    pub wheel_base: f64,
    pub goal: [f64; 2],
    pub goal_radius: f64,
    pub step_penalty: f64,
    /// Coefficient of the potential-based distance shaping term.
    pub shaping: f64,
    pub goal_bonus: f64,
    pub gates: Vec<Gate>,
    pub moving_obstacles: Vec<MovingObstacle>,
    pub static_obstacles: Vec<Disc>,
    /// Positions with `|x|` or `|y|` above this are unsafe.
    pub arena_half: f64,
    pub speed_limit: Option<f64>,
    pub lane: Option<Lane>,
    pub start: [f64; 2],
    pub start_radius: f64,
    pub episode_max_steps: usize,
}

impl EnvConfig {
    /// Benchmark defaults for `name` under `dynamics`.
    pub fn preset(name: EnvName, dynamics: Dynamics) -> Self {
        let mut cfg = EnvConfig {
            name,
            dynamics,
            dt: 0.1,
            a_max: 1.0,
            v_max: 1.5,
            wheel_base: 0.5,
            goal: [5.0, 0.0],
            goal_radius: 0.3,
            step_penalty: -0.01,
            shaping: 1.0,
            goal_bonus: 20.0,
            gates: Vec::new(),
            moving_obstacles: Vec::new(),
            static_obstacles: Vec::new(),
            arena_half: 8.0,
            speed_limit: None,
            lane: None,
            start: [-5.0, 0.0],
            start_radius: 0.5,
            episode_max_steps: 500,
        };
        let gate =
            |r_in: f64, thickness: f64, omega: f64| Gate { r_in, thickness, opening_half_angle: PI / 8.0, omega };
        match name {
            EnvName::Obstacle => {
                cfg.static_obstacles = vec![Disc { center: [0.0, 2.0], radius: 1.0 }];
                cfg.episode_max_steps = 200;
            }
            EnvName::Obstacle2 => {
                cfg.static_obstacles = vec![Disc { center: [0.0, 0.0], radius: 1.5 }];
                cfg.episode_max_steps = 200;
            }
            EnvName::Road => {
                cfg.start = [-3.5, 0.0];
                cfg.start_radius = 0.3;
                cfg.goal = [3.5, 0.0];
                cfg.speed_limit = Some(1.0);
                cfg.episode_max_steps = 100;
            }
            EnvName::Road2d => {
                cfg.start = [-3.0, -2.0];
                cfg.start_radius = 0.3;
                cfg.goal = [3.0, 2.0];
                cfg.speed_limit = Some(1.0);
                cfg.lane = Some(Lane { x_min: -4.5, x_max: 4.5, y_min: -3.0, y_max: 3.0 });
                cfg.episode_max_steps = 100;
            }
            EnvName::DynamicObst => {
                cfg.start_radius = 0.3;
                let obst = |x: f64, y: f64| MovingObstacle { center: [x, y], orbit: 0.8, radius: 0.4, omega: 0.5 };
                cfg.moving_obstacles = vec![obst(-2.5, 0.5), obst(0.0, -0.5), obst(2.5, 0.5)];
            }
            EnvName::SingleGate => {
                cfg.goal = [0.0, 0.0];
                cfg.start = [-6.5, 0.0];
                cfg.gates = vec![gate(2.0, 0.2, 0.3)];
            }
            EnvName::DoubleGates => {
                cfg.goal = [0.0, 0.0];
                cfg.start = [-6.5, 0.0];
                cfg.gates = vec![gate(2.0, 0.2, 0.3), gate(4.0, 0.2, -0.3)];
            }
            EnvName::DoubleGatesPlus => {
                cfg.goal = [0.0, 0.0];
                cfg.start = [-6.5, 0.0];
                cfg.gates = vec![gate(2.0, 1.0, 0.3), gate(4.0, 1.0, -0.3)];
            }
        }
        cfg
    }

    /// Number of phase entries appended to the agent sub-state.
    pub fn phase_count(&self) -> usize {
        self.gates.len() + self.moving_obstacles.len()
    }

    pub fn validate(&self) -> CoreResult<()> {
        let positive = [
            ("dt", self.dt),
            ("a_max", self.a_max),
            ("v_max", self.v_max),
            ("wheel_base", self.wheel_base),
            ("goal_radius", self.goal_radius),
            ("arena_half", self.arena_half),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CoreError::Config(alloc::format!("env.{name} must be positive and finite")));
            }
        }
        if self.episode_max_steps == 0 {
            return Err(CoreError::config("env.episode_max_steps must be positive"));
        }
        if self.phase_count() + 4 > crate::mdp::MAX_STATE_DIM {
            return Err(CoreError::config("too many walls and moving obstacles for the state vector"));
        }
        if !(self.start_radius >= 0.0) {
            return Err(CoreError::config("env.start_radius must be non-negative"));
        }
        for d in &self.static_obstacles {
            if hypot(self.goal[0] - d.center[0], self.goal[1] - d.center[1]) <= d.radius + self.goal_radius {
                return Err(CoreError::config("goal lies inside a static obstacle"));
            }
        }
        let step_travel = self.v_max * self.dt;
        for g in &self.gates {
            if !(g.opening_half_angle > 0.0 && g.opening_half_angle < PI) {
                return Err(CoreError::config("opening half angle must lie in (0, pi)"));
            }
            if g.r_in <= self.goal_radius {
                return Err(CoreError::config("wall inner radius must exceed the goal radius"));
            }
            if step_travel >= g.thickness {
                return Err(CoreError::config("v_max * dt must stay below the wall thickness"));
            }
        }
        for m in &self.moving_obstacles {
            if !(m.radius > 0.0 && m.orbit >= 0.0) {
                return Err(CoreError::config("moving obstacle radius/orbit invalid"));
            }
            if step_travel >= 2.0 * m.radius {
                return Err(CoreError::config("v_max * dt must stay below a moving obstacle's diameter"));
            }
        }
        if let Some(limit) = self.speed_limit {
            if !(limit > 0.0) {
                return Err(CoreError::config("speed limit must be positive"));
            }
        }
        Ok(())
    }
}
