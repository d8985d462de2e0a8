//! TD3: twin critics, target networks, delayed actor updates and target
//! policy smoothing, on top of [`crate::nn`].

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};

use crate::env::Env;
use crate::error::{CoreError, CoreResult};
use crate::mdp::{ActionBounds, ActionVec, EnvState, MAX_ACTION_DIM};
use crate::nn::{Adam, Mlp, OutputActivation, Tape};
use crate::replay::{ReplayBuffer, TransitionRecord};
use crate::rng::Rng;

/// Upper bound on critic inputs (features plus action).
const MAX_FEATURES: usize = 32;

/// Maps simulator states to network inputs.
pub trait Observer {
    fn feature_dim(&self) -> usize;
    fn observe(&self, s: &EnvState, out: &mut [f64]);
}

impl Observer for Env {
    fn feature_dim(&self) -> usize {
        Env::feature_dim(self)
    }

    fn observe(&self, s: &EnvState, out: &mut [f64]) {
        Env::observe(self, s, out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub policy_delay: usize,
    /// Target smoothing noise, as a fraction of the action half-range.
    pub smoothing_sigma: f64,
    pub smoothing_clip: f64,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
    /// Exploration noise, as a fraction of the action range.
    pub exploration_sigma: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            tau: 0.005,
            policy_delay: 2,
            smoothing_sigma: 0.2,
            smoothing_clip: 0.5,
            batch_size: 128,
            hidden: vec![64, 64],
            buffer_capacity: 1_000_000,
            exploration_sigma: 0.1,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> CoreResult<()> {
        crate::mdp::Discount::new(self.gamma)?;
        let positive = [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("smoothing_sigma", self.smoothing_sigma),
            ("smoothing_clip", self.smoothing_clip),
            ("exploration_sigma", self.exploration_sigma),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CoreError::Config(alloc::format!("learner.{name} must be positive")));
            }
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(CoreError::config("learner.tau must lie in (0, 1]"));
        }
        if self.policy_delay == 0 || self.batch_size == 0 || self.buffer_capacity == 0 {
            return Err(CoreError::config("learner.policy_delay, batch_size and buffer_capacity must be positive"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(CoreError::config("learner.hidden needs at least one non-empty layer"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    /// Mean squared TD error of the first critic before the step.
    pub critic_loss: f64,
    pub actor_updated: bool,
}

/// Reusable batch buffers.
#[derive(Debug, Clone, Default)]
struct Scratch {
    idx: Vec<usize>,
    feat: Vec<f64>,
    feat_next: Vec<f64>,
    sa: Vec<f64>,
    sa_next: Vec<f64>,
    rewards: Vec<f64>,
    cont: Vec<f64>,
    targets: Vec<f64>,
    d_out: Vec<f64>,
    d_in: Vec<f64>,
    d_act: Vec<f64>,
    grad: Vec<f64>,
    grad_actor: Vec<f64>,
    tape: Tape,
    tape2: Tape,
}

#[derive(Debug, Clone)]
pub struct Td3Agent {
    cfg: LearnerConfig,
    bounds: ActionBounds,
    feat_dim: usize,
    actor: Mlp,
    actor_target: Mlp,
    critics: [Mlp; 2],
    critic_targets: [Mlp; 2],
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    rng: Rng,
    updates: u64,
    scratch: Scratch,
}

impl Td3Agent {
    pub fn new(feat_dim: usize, bounds: ActionBounds, cfg: LearnerConfig, mut rng: Rng) -> CoreResult<Self> {
        cfg.validate()?;
        let act_dim = bounds.dim();
        if feat_dim + act_dim > MAX_FEATURES {
            return Err(CoreError::config("feature vector too long for the learner"));
        }
        let mut actor_sizes = vec![feat_dim];
        actor_sizes.extend_from_slice(&cfg.hidden);
        actor_sizes.push(act_dim);
        let mut critic_sizes = vec![feat_dim + act_dim];
        critic_sizes.extend_from_slice(&cfg.hidden);
        critic_sizes.push(1);
        let out = OutputActivation::TanhScaled { lo: bounds.lo().to_vec(), hi: bounds.hi().to_vec() };
        let actor = Mlp::new(&actor_sizes, out, &mut rng)?;
        let c1 = Mlp::new(&critic_sizes, OutputActivation::Linear, &mut rng)?;
        let c2 = Mlp::new(&critic_sizes, OutputActivation::Linear, &mut rng)?;
        Ok(Self {
            actor_opt: Adam::new(actor.param_count(), cfg.actor_lr),
            critic_opts: [Adam::new(c1.param_count(), cfg.critic_lr), Adam::new(c2.param_count(), cfg.critic_lr)],
            actor_target: actor.clone(),
            critic_targets: [c1.clone(), c2.clone()],
            actor,
            critics: [c1, c2],
            cfg,
            bounds,
            feat_dim,
            rng,
            updates: 0,
            scratch: Scratch::default(),
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn bounds(&self) -> &ActionBounds {
        &self.bounds
    }

    pub fn feature_dim(&self) -> usize {
        self.feat_dim
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self, i: usize) -> &Mlp {
        &self.critics[i]
    }

    pub fn actor_target(&self) -> &Mlp {
        &self.actor_target
    }

    pub fn critic_target(&self, i: usize) -> &Mlp {
        &self.critic_targets[i]
    }

    /// All six networks with their checkpoint names.
    pub fn networks(&self) -> [(&'static str, &Mlp); 6] {
        [
            ("actor", &self.actor),
            ("actor_target", &self.actor_target),
            ("critic1", &self.critics[0]),
            ("critic2", &self.critics[1]),
            ("critic1_target", &self.critic_targets[0]),
            ("critic2_target", &self.critic_targets[1]),
        ]
    }

    pub fn networks_mut(&mut self) -> [(&'static str, &mut Mlp); 6] {
        let [c1, c2] = &mut self.critics;
        let [t1, t2] = &mut self.critic_targets;
        [
            ("actor", &mut self.actor),
            ("actor_target", &mut self.actor_target),
            ("critic1", c1),
            ("critic2", c2),
            ("critic1_target", t1),
            ("critic2_target", t2),
        ]
    }

    /// Deterministic action for a feature vector.
    pub fn act_features(&self, feat: &[f64]) -> CoreResult<ActionVec> {
        let mut out = [0.0; MAX_ACTION_DIM];
        let n = self.bounds.dim();
        self.actor.forward(feat, &mut out[..n])?;
        Ok(ActionVec::new(&out[..n]))
    }

    pub fn act<O: Observer + ?Sized>(&self, obs: &O, s: &EnvState) -> ActionVec {
        let mut feat = [0.0; MAX_FEATURES];
        let feat = Self::features(obs, s, &mut feat);
        self.act_features(feat).expect("observer matches the agent's feature size")
    }

    /// `Q₁(s, a)`, the value handed to the recovery planner.
    pub fn q_value<O: Observer + ?Sized>(&self, obs: &O, s: &EnvState, a: &ActionVec) -> f64 {
        let mut buf = [0.0; MAX_FEATURES];
        let f = obs.feature_dim();
        obs.observe(s, &mut buf[..f]);
        buf[f..f + a.dim()].copy_from_slice(a.as_slice());
        let mut out = [0.0];
        self.critics[0].forward(&buf[..f + a.dim()], &mut out).expect("observer matches the agent's feature size");
        out[0]
    }

    fn features<'b, O: Observer + ?Sized>(obs: &O, s: &EnvState, buf: &'b mut [f64; MAX_FEATURES]) -> &'b [f64] {
        let f = obs.feature_dim();
        obs.observe(s, &mut buf[..f]);
        &buf[..f]
    }

    /// Gaussian exploration noise added to `a`, then clamped.
    pub fn explore(&self, a: &ActionVec, rng: &mut Rng) -> ActionVec {
        let mut out = *a;
        for (i, v) in out.as_mut_slice().iter_mut().enumerate() {
            let sd = self.cfg.exploration_sigma * self.bounds.range(i);
            let n = Normal::new(0.0, sd).expect("positive sd");
            *v += n.sample(rng);
        }
        self.bounds.clamp(&out)
    }

    fn load_batch<O: Observer + ?Sized>(&mut self, records: &[&TransitionRecord], obs: &O) {
        let f = self.feat_dim;
        let na = self.bounds.dim();
        let b = records.len();
        let sc = &mut self.scratch;
        sc.feat.resize(b * f, 0.0);
        sc.feat_next.resize(b * f, 0.0);
        sc.sa.resize(b * (f + na), 0.0);
        sc.rewards.clear();
        sc.cont.clear();
        for (i, r) in records.iter().enumerate() {
            obs.observe(&r.s, &mut sc.feat[i * f..(i + 1) * f]);
            let row = &mut sc.sa[i * (f + na)..(i + 1) * (f + na)];
            row[..f].copy_from_slice(&sc.feat[i * f..(i + 1) * f]);
            row[f..].copy_from_slice(r.a.as_slice());
            match &r.s_next {
                Some(n) => obs.observe(n, &mut sc.feat_next[i * f..(i + 1) * f]),
                None => sc.feat_next[i * f..(i + 1) * f].fill(0.0),
            }
            sc.rewards.push(r.r);
            sc.cont.push(if r.done { 0.0 } else { 1.0 });
        }
    }

    /// `r + γ·(1 − done)·min(Q₁', Q₂')(s', π'(s') + clipped noise)` for
    /// the batch loaded in scratch; absorbing and done records get `r`.
    fn compute_targets(&mut self) -> CoreResult<()> {
        let f = self.feat_dim;
        let na = self.bounds.dim();
        let b = self.scratch.rewards.len();
        let sc = &mut self.scratch;
        let next_actions = self.actor_target.forward_batch(&sc.feat_next, b, &mut sc.tape)?;
        sc.sa_next.resize(b * (f + na), 0.0);
        for i in 0..b {
            let row = &mut sc.sa_next[i * (f + na)..(i + 1) * (f + na)];
            row[..f].copy_from_slice(&sc.feat_next[i * f..(i + 1) * f]);
            for j in 0..na {
                let half = 0.5 * self.bounds.range(j);
                let sd = self.cfg.smoothing_sigma * half;
                let clip = self.cfg.smoothing_clip * half;
                let noise: f64 = Normal::new(0.0, sd).expect("positive sd").sample(&mut self.rng);
                let a = next_actions[i * na + j] + noise.clamp(-clip, clip);
                row[f + j] = a.clamp(self.bounds.lo()[j], self.bounds.hi()[j]);
            }
        }
        let q1 = self.critic_targets[0].forward_batch(&sc.sa_next, b, &mut sc.tape)?.to_vec();
        let q2 = self.critic_targets[1].forward_batch(&sc.sa_next, b, &mut sc.tape2)?;
        sc.targets.clear();
        for i in 0..b {
            let bootstrap = if sc.cont[i] > 0.0 { self.cfg.gamma * q1[i].min(q2[i]) } else { 0.0 };
            sc.targets.push(sc.rewards[i] + bootstrap);
        }
        Ok(())
    }

    /// TD targets for `records` exactly as an update would compute them.
    /// Consumes smoothing noise from the learner's stream.
    pub fn td_targets<O: Observer + ?Sized>(&mut self, records: &[TransitionRecord], obs: &O) -> CoreResult<Vec<f64>> {
        let refs: Vec<&TransitionRecord> = records.iter().collect();
        self.load_batch(&refs, obs);
        self.compute_targets()?;
        Ok(self.scratch.targets.clone())
    }

    /// One gradient step on a batch drawn from `buffer`.
    pub fn update<O: Observer + ?Sized>(&mut self, buffer: &mut ReplayBuffer, obs: &O) -> CoreResult<UpdateStats> {
        let b = self.cfg.batch_size;
        let mut idx = core::mem::take(&mut self.scratch.idx);
        buffer.sample_indices(b, &mut idx)?;
        let records: Vec<&TransitionRecord> = idx.iter().map(|&i| buffer.get(i)).collect();
        self.load_batch(&records, obs);
        self.scratch.idx = idx;
        self.compute_targets()?;

        let f = self.feat_dim;
        let na = self.bounds.dim();
        let sc = &mut self.scratch;
        let mut critic_loss = 0.0;
        for k in 0..2 {
            let critic = &mut self.critics[k];
            let q = critic.forward_batch(&sc.sa, b, &mut sc.tape)?;
            sc.d_out.clear();
            let mut loss = 0.0;
            for (qi, yi) in q.iter().zip(&sc.targets) {
                let e = qi - yi;
                loss += e * e;
                sc.d_out.push(2.0 * e / b as f64);
            }
            if k == 0 {
                critic_loss = loss / b as f64;
            }
            sc.grad.resize(critic.param_count(), 0.0);
            critic.backward(&mut sc.tape, &sc.d_out, &mut sc.grad, None)?;
            self.critic_opts[k].step(critic.params_mut(), &sc.grad);
        }

        let actor_updated = self.updates.is_multiple_of(self.cfg.policy_delay as u64);
        if actor_updated {
            let actions = self.actor.forward_batch(&sc.feat, b, &mut sc.tape2)?;
            for i in 0..b {
                sc.sa[i * (f + na) + f..(i + 1) * (f + na)].copy_from_slice(&actions[i * na..(i + 1) * na]);
            }
            let critic = &self.critics[0];
            critic.forward_batch(&sc.sa, b, &mut sc.tape)?;
            sc.d_out.clear();
            sc.d_out.resize(b, -1.0 / b as f64);
            sc.grad.resize(critic.param_count(), 0.0);
            sc.d_in.resize(b * (f + na), 0.0);
            critic.backward(&mut sc.tape, &sc.d_out, &mut sc.grad, Some(&mut sc.d_in))?;
            sc.d_act.clear();
            for i in 0..b {
                sc.d_act.extend_from_slice(&sc.d_in[i * (f + na) + f..(i + 1) * (f + na)]);
            }
            sc.grad_actor.resize(self.actor.param_count(), 0.0);
            self.actor.backward(&mut sc.tape2, &sc.d_act, &mut sc.grad_actor, None)?;
            self.actor_opt.step(self.actor.params_mut(), &sc.grad_actor);

            let tau = self.cfg.tau;
            self.actor_target.soft_update_from(&self.actor, tau);
            for k in 0..2 {
                self.critic_targets[k].soft_update_from(&self.critics[k], tau);
            }
        }
        self.updates += 1;
        for (name, net) in self.networks() {
            if !net.is_finite() {
                return Err(CoreError::NonFiniteParameters(name));
            }
        }
        Ok(UpdateStats { critic_loss, actor_updated })
    }
}
