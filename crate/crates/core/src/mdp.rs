//! Deterministic MDP vocabulary shared by every other module: fixed-capacity
//! state and action vectors, action boxes, discounting and return arithmetic.

use alloc::vec::Vec;
use core::fmt;
use core::ops::Deref;

use rand::Rng;

use crate::error::{CoreError, CoreResult};

/// Largest observation dimension of any built-in environment
/// (differential drive with three moving obstacles needs 7).
pub const MAX_STATE_DIM: usize = 8;
pub const MAX_ACTION_DIM: usize = 2;

/// Flat real state vector. The semantic layout (position, velocity, pose,
/// wall phases) is owned by the environment that produced it.
#[derive(Clone, Copy, PartialEq)]
pub struct EnvState {
    values: [f64; MAX_STATE_DIM],
    dim: u8,
}

impl EnvState {
    pub fn new(values: &[f64]) -> CoreResult<Self> {
        if values.len() > MAX_STATE_DIM {
            return Err(CoreError::Shape { expected: MAX_STATE_DIM, got: values.len() });
        }
        let mut s = Self { values: [0.0; MAX_STATE_DIM], dim: values.len() as u8 };
        s.values[..values.len()].copy_from_slice(values);
        s.check_finite()?;
        Ok(s)
    }

    pub(crate) fn zeros(dim: usize) -> Self {
        debug_assert!(dim <= MAX_STATE_DIM);
        Self { values: [0.0; MAX_STATE_DIM], dim: dim as u8 }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.dim as usize]
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values[..self.dim as usize]
    }

    pub fn check_finite(&self) -> CoreResult<()> {
        match self.as_slice().iter().position(|v| !v.is_finite()) {
            Some(index) => Err(CoreError::NonFiniteState { index }),
            None => Ok(()),
        }
    }
}

impl Deref for EnvState {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        self.as_slice()
    }
}

impl fmt::Debug for EnvState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

/// Real action vector. Bounds live in [`ActionBounds`].
#[derive(Clone, Copy, PartialEq)]
pub struct ActionVec {
    values: [f64; MAX_ACTION_DIM],
    dim: u8,
}

impl ActionVec {
    pub fn new(values: &[f64]) -> Self {
        assert!(values.len() <= MAX_ACTION_DIM, "action dimension {} too large", values.len());
        let mut a = Self { values: [0.0; MAX_ACTION_DIM], dim: values.len() as u8 };
        a.values[..values.len()].copy_from_slice(values);
        a
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim <= MAX_ACTION_DIM);
        Self { values: [0.0; MAX_ACTION_DIM], dim: dim as u8 }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.dim as usize]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values[..self.dim as usize]
    }
}

impl Deref for ActionVec {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        self.as_slice()
    }
}

impl fmt::Debug for ActionVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

/// Per-dimension closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionBounds {
    lo: [f64; MAX_ACTION_DIM],
    hi: [f64; MAX_ACTION_DIM],
    dim: u8,
}

impl ActionBounds {
    pub fn new(lo: &[f64], hi: &[f64]) -> CoreResult<Self> {
        if lo.len() != hi.len() {
            return Err(CoreError::Shape { expected: lo.len(), got: hi.len() });
        }
        if lo.len() > MAX_ACTION_DIM {
            return Err(CoreError::Shape { expected: MAX_ACTION_DIM, got: lo.len() });
        }
        if lo.iter().zip(hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
            return Err(CoreError::config("action bounds must be finite with lo <= hi"));
        }
        let mut b = Self { lo: [0.0; MAX_ACTION_DIM], hi: [0.0; MAX_ACTION_DIM], dim: lo.len() as u8 };
        b.lo[..lo.len()].copy_from_slice(lo);
        b.hi[..hi.len()].copy_from_slice(hi);
        Ok(b)
    }

    /// `[-bound, bound]` in every one of `dim` dimensions.
    pub fn symmetric(bound: f64, dim: usize) -> CoreResult<Self> {
        let lo = [-bound; MAX_ACTION_DIM];
        let hi = [bound; MAX_ACTION_DIM];
        if dim > MAX_ACTION_DIM {
            return Err(CoreError::Shape { expected: MAX_ACTION_DIM, got: dim });
        }
        Self::new(&lo[..dim], &hi[..dim])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim as usize]
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.dim as usize]
    }

    /// Component-wise clamp; NaN components map to the interval midpoint.
    pub fn clamp(&self, a: &ActionVec) -> ActionVec {
        let mut out = ActionVec::zeros(self.dim());
        for (i, v) in out.as_mut_slice().iter_mut().enumerate() {
            let x = a.as_slice().get(i).copied().unwrap_or(0.0);
            *v = if x.is_nan() { 0.5 * (self.lo[i] + self.hi[i]) } else { x.clamp(self.lo[i], self.hi[i]) };
        }
        out
    }

    pub fn contains(&self, a: &ActionVec) -> bool {
        a.dim() == self.dim() && a.iter().zip(self.lo()).zip(self.hi()).all(|((x, l), h)| *l <= *x && *x <= *h)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> ActionVec {
        let mut out = ActionVec::zeros(self.dim());
        for (i, v) in out.as_mut_slice().iter_mut().enumerate() {
            let u: f64 = rng.gen();
            *v = self.lo[i] + u * (self.hi[i] - self.lo[i]);
        }
        out
    }

    /// Width of the interval in each dimension.
    pub fn range(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }
}

/// Discount factor, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discount(f64);

impl Discount {
    pub fn new(gamma: f64) -> CoreResult<Self> {
        if gamma > 0.0 && gamma < 1.0 {
            Ok(Self(gamma))
        } else {
            Err(CoreError::config("discount must lie in (0, 1)"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// `Σ γ^i r_i + γ^n q` for `n = rewards.len()`.
pub fn n_step_return(rewards: &[f64], terminal_q: f64, gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut weight = 1.0;
    for r in rewards {
        total += weight * r;
        weight *= gamma;
    }
    total + weight * terminal_q
}

/// The transition structure every consumer needs from an environment.
pub trait Mdp {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn action_bounds(&self) -> ActionBounds;
    /// `(T(s, a), R(s, a))` for an already clamped action.
    fn step(&self, s: &EnvState, a: &ActionVec) -> CoreResult<(EnvState, f64)>;
    fn is_unsafe(&self, s: &EnvState) -> bool;
    fn is_goal(&self, s: &EnvState) -> bool;
}

/// Rollout trace of `horizon + 1` states starting at `s0`. Actions are
/// clamped to the model's bounds before stepping.
pub fn reach_set_sample<M: Mdp + ?Sized>(
    model: &M,
    mut policy: impl FnMut(&EnvState) -> ActionVec,
    s0: EnvState,
    horizon: usize,
) -> CoreResult<Vec<EnvState>> {
    let bounds = model.action_bounds();
    let mut trace = Vec::with_capacity(horizon + 1);
    trace.push(s0);
    let mut s = s0;
    for _ in 0..horizon {
        let a = bounds.clamp(&policy(&s));
        s = model.step(&s, &a)?.0;
        trace.push(s);
    }
    Ok(trace)
}
