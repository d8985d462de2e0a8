//! Multilayer perceptrons with manual reverse-mode gradients.
//!
//! Parameters live in one flat vector so optimisers and target-network
//! updates are plain slice loops. Layer `l` stores its weight matrix
//! row-major with shape `(out, in)`, followed by its bias.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{CoreError, CoreResult};
use crate::math::{sqrt, tanh_fast as tanh, tanh_in_place};
use crate::rng::Rng;

/// How the last layer maps pre-activations to outputs.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputActivation {
    Linear,
    /// `mid + half * tanh(z)` per output, mapping onto `[lo, hi]`.
    TanhScaled {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    output: OutputActivation,
}

/// Activations recorded by [`Mlp::forward_batch`] for the backward pass.
/// `acts[0]` is the input and `acts[l + 1]` the output of layer `l`.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    acts: Vec<Vec<f64>>,
    batch: usize,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network output of the last forward pass, `batch × out` row-major.
    pub fn output(&self) -> &[f64] {
        self.acts.last().map_or(&[], |v| v.as_slice())
    }
}

/// `C = A·B + beta·C` for strided row/column-major views.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    if k > 0 {
        assert!(last(m, k, rsa, csa) < a.len() && last(k, n, rsb, csb) < b.len());
    }
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above keep every strided access inside `a`, `b`
    // and `c`; `c` is a distinct mutable borrow.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    /// PyTorch-style uniform `±1/sqrt(fan_in)` initialisation.
    pub fn new(sizes: &[usize], output: OutputActivation, rng: &mut Rng) -> CoreResult<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(CoreError::config("network needs at least two non-empty layers"));
        }
        let out = *sizes.last().unwrap_or(&0);
        if let OutputActivation::TanhScaled { lo, hi } = &output {
            if lo.len() != out || hi.len() != out {
                return Err(CoreError::Shape { expected: out, got: lo.len().min(hi.len()) });
            }
            if lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
                return Err(CoreError::config("output bounds must satisfy lo < hi"));
            }
        }
        let mut net = Mlp { sizes: sizes.to_vec(), params: Vec::new(), output };
        net.params = vec![0.0; net.param_count()];
        for l in 0..net.n_layers() {
            let bound = 1.0 / sqrt(sizes[l] as f64);
            let (w, b) = net.layer_range(l);
            for p in &mut net.params[w.start..b.end] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn output_activation(&self) -> &OutputActivation {
        &self.output
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Index ranges of the weight matrix and bias of layer `l`.
    pub fn layer_range(&self, l: usize) -> (core::ops::Range<usize>, core::ops::Range<usize>) {
        let start: usize = self.sizes.windows(2).take(l).map(|w| w[0] * w[1] + w[1]).sum();
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        (start..start + i * o, start + i * o..start + i * o + o)
    }

    /// Zeroes the last layer so every output equals the activation of zero.
    pub fn zero_output_layer(&mut self) {
        let (w, b) = self.layer_range(self.n_layers() - 1);
        self.params[w.start..b.end].fill(0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn scale(&self, j: usize) -> Option<(f64, f64)> {
        match &self.output {
            OutputActivation::Linear => None,
            OutputActivation::TanhScaled { lo, hi } => Some((0.5 * (lo[j] + hi[j]), 0.5 * (hi[j] - lo[j]))),
        }
    }

    /// Single-sample evaluation.
    pub fn forward(&self, x: &[f64], out: &mut [f64]) -> CoreResult<()> {
        if x.len() != self.input_dim() {
            return Err(CoreError::Shape { expected: self.input_dim(), got: x.len() });
        }
        if out.len() != self.output_dim() {
            return Err(CoreError::Shape { expected: self.output_dim(), got: out.len() });
        }
        let mut cur = x.to_vec();
        let last = self.n_layers() - 1;
        for l in 0..=last {
            let (w, b) = self.layer_range(l);
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[w];
            let b = &self.params[b];
            let mut next = Vec::with_capacity(n_out);
            for j in 0..n_out {
                let row = &w[j * n_in..(j + 1) * n_in];
                let z = b[j] + row.iter().zip(&cur).map(|(a, c)| a * c).sum::<f64>();
                next.push(if l < last { tanh(z) } else { z });
            }
            cur = next;
        }
        for (j, (o, z)) in out.iter_mut().zip(&cur).enumerate() {
            *o = match self.scale(j) {
                None => *z,
                Some((mid, half)) => mid + half * tanh(*z),
            };
        }
        Ok(())
    }

    /// Evaluates `batch` row-major inputs and records the activations in
    /// `tape`. Returns the `batch × out` outputs.
    pub fn forward_batch<'t>(&self, x: &[f64], batch: usize, tape: &'t mut Tape) -> CoreResult<&'t [f64]> {
        if x.len() != batch * self.input_dim() {
            return Err(CoreError::Shape { expected: batch * self.input_dim(), got: x.len() });
        }
        let layers = self.n_layers();
        tape.acts.resize_with(layers + 1, Vec::new);
        tape.batch = batch;
        tape.acts[0].clear();
        tape.acts[0].extend_from_slice(x);
        for l in 0..layers {
            let (w, b) = self.layer_range(l);
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (done, rest) = tape.acts.split_at_mut(l + 1);
            let input = &done[l];
            let z = &mut rest[0];
            z.clear();
            z.resize(batch * n_out, 0.0);
            let bias = &self.params[b];
            for row in z.chunks_exact_mut(n_out) {
                row.copy_from_slice(bias);
            }
            // Z (batch × out) += X (batch × in) · Wᵀ (in × out).
            gemm(batch, n_in, n_out, input, (n_in, 1), &self.params[w], (1, n_in), 1.0, z);
            if l + 1 < layers {
                tanh_in_place(z);
            } else if !matches!(self.output, OutputActivation::Linear) {
                for row in z.chunks_exact_mut(n_out) {
                    for (j, v) in row.iter_mut().enumerate() {
                        let (mid, half) = self.scale(j).unwrap_or((0.0, 1.0));
                        *v = mid + half * tanh(*v);
                    }
                }
            }
        }
        Ok(tape.output())
    }

    /// Gradient of `Σ d_out ⊙ output` for the last forward pass in `tape`.
    /// Overwrites `grad` (length `param_count`) and, if given, `d_in`
    /// (`batch × in`) with the gradient with respect to the input.
    pub fn backward(
        &self,
        tape: &mut Tape,
        d_out: &[f64],
        grad: &mut [f64],
        d_in: Option<&mut [f64]>,
    ) -> CoreResult<()> {
        let batch = tape.batch;
        let layers = self.n_layers();
        if tape.acts.len() != layers + 1 {
            return Err(CoreError::config("backward called without a matching forward pass"));
        }
        if d_out.len() != batch * self.output_dim() {
            return Err(CoreError::Shape { expected: batch * self.output_dim(), got: d_out.len() });
        }
        if grad.len() != self.param_count() {
            return Err(CoreError::Shape { expected: self.param_count(), got: grad.len() });
        }
        let Tape { acts, delta, delta_prev, .. } = tape;
        let n_out = self.output_dim();
        delta.clear();
        delta.extend_from_slice(d_out);
        if !matches!(self.output, OutputActivation::Linear) {
            let y = &acts[layers];
            for (i, d) in delta.iter_mut().enumerate() {
                let (mid, half) = self.scale(i % n_out).unwrap_or((0.0, 1.0));
                let t = (y[i] - mid) / half;
                *d *= half * (1.0 - t * t);
            }
        }
        let mut d_in = d_in;
        for l in (0..layers).rev() {
            let (w, b) = self.layer_range(l);
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let input = &acts[l];
            // dW (out × in) = δᵀ (out × batch) · X (batch × in).
            gemm(n_out, batch, n_in, delta, (1, n_out), input, (n_in, 1), 0.0, &mut grad[w.clone()]);
            let gb = &mut grad[b];
            gb.fill(0.0);
            for row in delta.chunks_exact(n_out) {
                gb.iter_mut().zip(row).for_each(|(g, d)| *g += d);
            }
            let need_input_grad = l > 0 || d_in.is_some();
            if !need_input_grad {
                break;
            }
            // δ_prev (batch × in) = δ (batch × out) · W (out × in).
            delta_prev.clear();
            delta_prev.resize(batch * n_in, 0.0);
            gemm(batch, n_out, n_in, delta, (n_out, 1), &self.params[w], (n_in, 1), 0.0, delta_prev);
            if l > 0 {
                // Hidden tanh: dz = dh · (1 − h²).
                delta_prev.iter_mut().zip(input.iter()).for_each(|(d, h)| *d *= 1.0 - h * h);
                core::mem::swap(delta, delta_prev);
            } else if let Some(out) = d_in.take() {
                if out.len() != delta_prev.len() {
                    return Err(CoreError::Shape { expected: delta_prev.len(), got: out.len() });
                }
                out.copy_from_slice(delta_prev);
            }
        }
        Ok(())
    }

    /// `self ← tau·source + (1 − tau)·self`.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) {
        debug_assert_eq!(self.sizes, source.sizes);
        if tau >= 1.0 {
            self.params.copy_from_slice(&source.params);
            return;
        }
        for (t, s) in self.params.iter_mut().zip(&source.params) {
            *t += tau * (s - *t);
        }
    }

    /// Named parameter tensors with their shapes, in storage order.
    pub fn tensors(&self) -> Vec<(alloc::string::String, [usize; 2], &[f64])> {
        let mut out = Vec::with_capacity(2 * self.n_layers());
        for l in 0..self.n_layers() {
            let (w, b) = self.layer_range(l);
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            out.push((alloc::format!("layer{l}.weight"), [n_out, n_in], &self.params[w]));
            out.push((alloc::format!("layer{l}.bias"), [n_out, 1], &self.params[b]));
        }
        out
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1_t: f64,
    beta2_t: f64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1_t: 1.0,
            beta2_t: 1.0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Descends along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        self.t += 1;
        self.beta1_t *= self.beta1;
        self.beta2_t *= self.beta2;
        let c1 = 1.0 - self.beta1_t;
        let c2 = 1.0 - self.beta2_t;
        let step = self.lr * sqrt(c2) / c1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= step * *m / (sqrt(*v) + eps * sqrt(c2));
        }
    }
}
