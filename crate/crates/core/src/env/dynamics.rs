//! Agent dynamics, integrated with explicit Euler at a fixed step.
//! Positions advance with the velocity (and heading) held at the start of the
//! step; velocities then absorb the commanded acceleration.

use crate::math::{cos, hypot, sin, wrap_pi};

/// Point mass driven by planar acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

/// Two-wheeled robot: signed forward speed and heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdState {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiParams {
    pub dt: f64,
    pub a_max: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdParams {
    pub dt: f64,
    pub torque_max: f64,
    pub v_max: f64,
    /// Body width `w` between the wheels.
    pub wheel_base: f64,
}

pub fn di_step(s: DiState, accel: [f64; 2], p: &DiParams) -> DiState {
    let ax = accel[0].clamp(-p.a_max, p.a_max);
    let ay = accel[1].clamp(-p.a_max, p.a_max);
    let mut vx = s.vx + ax * p.dt;
    let mut vy = s.vy + ay * p.dt;
    let speed = hypot(vx, vy);
    if speed > p.v_max {
        let k = p.v_max / speed;
        vx *= k;
        vy *= k;
    }
    DiState { x: s.x + s.vx * p.dt, y: s.y + s.vy * p.dt, vx, vy }
}

/// Unit wheel inertia: linear acceleration is the mean torque, body rotation
/// rate is the torque difference over the body width.
pub fn dd_step(s: DdState, torques: [f64; 2], p: &DdParams) -> DdState {
    let tl = torques[0].clamp(-p.torque_max, p.torque_max);
    let tr = torques[1].clamp(-p.torque_max, p.torque_max);
    let accel = (tl + tr) / 2.0;
    let omega = (tr - tl) / p.wheel_base;
    DdState {
        x: s.x + s.v * cos(s.theta) * p.dt,
        y: s.y + s.v * sin(s.theta) * p.dt,
        v: (s.v + accel * p.dt).clamp(-p.v_max, p.v_max),
        theta: wrap_pi(s.theta + omega * p.dt),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DI: DiParams = DiParams { dt: 0.1, a_max: 1.0, v_max: 1.5 };
    const DD: DdParams = DdParams { dt: 0.1, torque_max: 1.0, v_max: 1.5, wheel_base: 0.5 };

    #[test]
    fn di_rest_is_fixed_point() {
        let s = DiState { x: 1.25, y: -3.0, vx: 0.0, vy: 0.0 };
        assert_eq!(di_step(s, [0.0, 0.0], &DI), s);
    }

    #[test]
    fn di_accelerates_without_moving_on_first_step() {
        let s = DiState { x: 0.0, y: 0.0, vx: 0.0, vy: 0.0 };
        let n = di_step(s, [1.0, 0.0], &DI);
        assert_eq!((n.x, n.y), (0.0, 0.0));
        assert!((n.vx - 0.1).abs() < 1e-15 && n.vy == 0.0);
    }

    #[test]
    fn di_coasting_matches_scalar_integrator() {
        // Independent scalar Euler: x_{k+1} = x_k + v dt.
        let mut x = 0.0f64;
        let mut s = DiState { x: 0.0, y: 0.0, vx: 1.0, vy: 0.0 };
        for _ in 0..10 {
            x += 1.0 * 0.1;
            s = di_step(s, [0.0, 0.0], &DI);
            assert_eq!(s.x, x);
        }
        assert!((s.x - 1.0).abs() < 1e-12);
        let one = di_step(DiState { x: 0.0, y: 0.0, vx: 1.0, vy: 0.0 }, [0.0, 0.0], &DI);
        assert_eq!((one.x, one.y), (0.1, 0.0));
    }

    #[test]
    fn di_speed_is_capped() {
        let mut s = DiState { x: 0.0, y: 0.0, vx: 1.4, vy: 0.3 };
        for _ in 0..50 {
            s = di_step(s, [5.0, 5.0], &DI);
            assert!(hypot(s.vx, s.vy) <= DI.v_max * (1.0 + 1e-12));
        }
    }

    #[test]
    fn dd_rest_is_fixed_point() {
        let s = DdState { x: 0.5, y: 0.5, v: 0.0, theta: 1.0 };
        assert_eq!(dd_step(s, [0.0, 0.0], &DD), s);
    }

    #[test]
    fn dd_opposite_torques_rotate_in_place() {
        let s = DdState { x: 0.0, y: 0.0, v: 0.0, theta: 0.0 };
        let n = dd_step(s, [-0.5, 0.5], &DD);
        assert_eq!(n.v, 0.0);
        assert_eq!((n.x, n.y), (0.0, 0.0));
        assert!((n.theta - (0.5 - -0.5) / 0.5 * 0.1).abs() < 1e-15);
    }

    #[test]
    fn dd_equal_torques_keep_heading() {
        let mut s = DdState { x: 0.0, y: 0.0, v: 0.3, theta: 0.7 };
        for _ in 0..100 {
            s = dd_step(s, [0.8, 0.8], &DD);
            assert_eq!(s.theta, 0.7);
        }
        assert!(s.v <= DD.v_max);
    }
}
