use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{CoreError, CoreResult};
use crate::planner::PlanningDomain;
use crate::rng::Rng;

/// Side length of the position grid.
pub const GRID: i32 = 15;
const VMAX: i32 = 2;
const NV: i32 = 2 * VMAX + 1;
const WALL: [i32; 2] = [7, 8];
const GAP: core::ops::RangeInclusive<i32> = 6..=8;
const GOAL_X: i32 = GRID - 1;
const STEP_REWARD: f64 = -1.0;
const GOAL_REWARD: f64 = 10.0;
const UNSAFE_REWARD: f64 = -10.0;

/// Action sets for the grid toy. Every set starts with the brake action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyActions {
    /// Brake, accelerate `+x`, accelerate `+y`.
    Three,
    /// Brake and unit acceleration along `±x`, `±y`.
    Five,
}

impl ToyActions {
    fn accelerations(self) -> &'static [Option<(i32, i32)>] {
        match self {
            ToyActions::Three => &[None, Some((1, 0)), Some((0, 1))],
            ToyActions::Five => &[None, Some((1, 0)), Some((-1, 0)), Some((0, 1)), Some((0, -1))],
        }
    }
}

/// Finite deterministic MDP given by explicit tables.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteToyMdp {
    n_states: usize,
    n_actions: usize,
    /// `next[s * n_actions + a]`.
    next: Vec<usize>,
    reward: Vec<f64>,
    unsafe_mask: Vec<bool>,
    backup: Vec<usize>,
    recoverable: Vec<bool>,
    start_states: Vec<usize>,
    pub gamma: f64,
}

fn brake(v: i32) -> i32 {
    v - v.signum()
}

impl DiscreteToyMdp {
    /// Builds a toy from tables and derives the recoverable set by running
    /// `backup` for `horizon` steps: every visited state must be safe and the
    /// last one a fixed point of the backup.
    #[allow(clippy::too_many_arguments)]
    pub fn from_tables(
        n_actions: usize,
        next: Vec<usize>,
        reward: Vec<f64>,
        unsafe_mask: Vec<bool>,
        backup: Vec<usize>,
        horizon: usize,
        start_states: Vec<usize>,
        gamma: f64,
    ) -> CoreResult<Self> {
        let n_states = unsafe_mask.len();
        if n_actions == 0
            || next.len() != n_states * n_actions
            || reward.len() != next.len()
            || backup.len() != n_states
        {
            return Err(CoreError::config("toy tables have inconsistent sizes"));
        }
        if next.iter().any(|&n| n >= n_states) || backup.iter().any(|&a| a >= n_actions) {
            return Err(CoreError::config("toy table entry out of range"));
        }
        crate::mdp::Discount::new(gamma)?;
        let mut toy = Self {
            n_states,
            n_actions,
            next,
            reward,
            unsafe_mask,
            backup,
            recoverable: Vec::new(),
            start_states,
            gamma,
        };
        toy.recoverable = (0..n_states).map(|s| toy.backup_reaches_equilibrium(s, horizon)).collect();
        if toy.start_states.iter().any(|&s| s >= n_states || !toy.recoverable[s]) {
            return Err(CoreError::config("toy start states must be recoverable"));
        }
        Ok(toy)
    }

    fn backup_reaches_equilibrium(&self, s: usize, horizon: usize) -> bool {
        let mut cur = s;
        if self.unsafe_mask[cur] {
            return false;
        }
        for _ in 0..horizon {
            cur = self.next(cur, self.backup[cur]);
            if self.unsafe_mask[cur] {
                return false;
            }
        }
        self.next(cur, self.backup[cur]) == cur
    }

    /// The 15×15 wall-with-gap gridworld. Velocities range over `-2..=2`
    /// per axis, positions advance by the new velocity, the wall occupies
    /// columns 7 and 8 except rows 6 to 8, leaving the grid or entering the
    /// wall leads to an absorbing unsafe sink, and reaching the last column
    /// enters an absorbing goal.
    pub fn wall_with_gap(actions: ToyActions, gamma: f64) -> CoreResult<Self> {
        let acc = actions.accelerations();
        let n_actions = acc.len();
        let cells = (GRID * GRID * NV * NV) as usize;
        let (sink, goal) = (cells, cells + 1);
        let n_states = cells + 2;
        let mut next = vec![0; n_states * n_actions];
        let mut reward = vec![0.0; n_states * n_actions];
        let mut unsafe_mask = vec![false; n_states];
        unsafe_mask[sink] = true;
        for s in 0..cells {
            let (x, y, vx, vy) = Self::decode(s);
            if Self::in_wall(x, y) {
                unsafe_mask[s] = true;
            }
            for (a, acc) in acc.iter().enumerate() {
                let (nvx, nvy) = match acc {
                    None => (brake(vx), brake(vy)),
                    Some((ax, ay)) => ((vx + ax).clamp(-VMAX, VMAX), (vy + ay).clamp(-VMAX, VMAX)),
                };
                let (nx, ny) = (x + nvx, y + nvy);
                let (n, r) = if unsafe_mask[s] {
                    (sink, UNSAFE_REWARD)
                } else if (0..GRID).contains(&ny) && (GOAL_X..GRID + VMAX).contains(&nx) {
                    (goal, GOAL_REWARD)
                } else if !(0..GRID).contains(&nx) || !(0..GRID).contains(&ny) || Self::in_wall(nx, ny) {
                    (sink, UNSAFE_REWARD)
                } else {
                    (Self::encode(nx, ny, nvx, nvy), STEP_REWARD)
                };
                next[s * n_actions + a] = n;
                reward[s * n_actions + a] = r;
            }
        }
        for a in 0..n_actions {
            next[sink * n_actions + a] = sink;
            reward[sink * n_actions + a] = UNSAFE_REWARD;
            next[goal * n_actions + a] = goal;
        }
        let starts = (0..3).flat_map(|x| (0..GRID).map(move |y| Self::encode(x, y, 0, 0))).collect();
        Self::from_tables(n_actions, next, reward, unsafe_mask, vec![0; n_states], 3, starts, gamma)
    }

    fn in_wall(x: i32, y: i32) -> bool {
        WALL.contains(&x) && !GAP.contains(&y)
    }

    /// Grid-state index for position `(x, y)` and velocity `(vx, vy)`.
    pub fn encode(x: i32, y: i32, vx: i32, vy: i32) -> usize {
        (((x * GRID + y) * NV + (vx + VMAX)) * NV + (vy + VMAX)) as usize
    }

    pub fn decode(s: usize) -> (i32, i32, i32, i32) {
        let s = s as i32;
        let vy = s % NV - VMAX;
        let vx = (s / NV) % NV - VMAX;
        let y = (s / (NV * NV)) % GRID;
        let x = s / (NV * NV * GRID);
        (x, y, vx, vy)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn next(&self, s: usize, a: usize) -> usize {
        self.next[s * self.n_actions + a]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn is_unsafe(&self, s: usize) -> bool {
        self.unsafe_mask[s]
    }

    pub fn recoverable(&self, s: usize) -> bool {
        self.recoverable[s]
    }

    pub fn backup_action(&self, s: usize) -> usize {
        self.backup[s]
    }

    pub fn start_states(&self) -> &[usize] {
        &self.start_states
    }

    /// Actions whose successor is recoverable.
    pub fn safe_actions(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_actions).filter(move |&a| self.recoverable[self.next(s, a)])
    }

    /// Index-aligned `(s, a)` table access helper.
    pub fn sa(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }
}

impl PlanningDomain for DiscreteToyMdp {
    type State = usize;
    type Action = usize;

    fn step(&self, s: &usize, a: &usize) -> Option<(usize, f64)> {
        Some((self.next(*s, *a), self.reward(*s, *a)))
    }

    fn is_recoverable(&self, s: &usize) -> bool {
        self.recoverable[*s]
    }

    /// Draws without replacement, so `k ≥ |A|` covers every action.
    fn sample_actions(&self, rng: &mut Rng, k: usize, out: &mut Vec<usize>) {
        let mut all: Vec<usize> = (0..self.n_actions).collect();
        all.shuffle(rng);
        out.extend(all.into_iter().take(k));
    }
}
