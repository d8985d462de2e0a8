//! Continuous-action Monte Carlo tree search for recovery planning.
//!
//! The planner maximises `Σ_{i<k} γ^i R(s_i, a_i) + γ^k Q(s_k, a_k)` over
//! action sequences of length at most `L` whose every successor state is
//! recoverable. Each expansion samples `K` actions and keeps the ones that
//! lead to recoverable states; edge values start at `Q(s, a)` and are refined
//! by running means of backed-up returns along UCB-selected paths.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{CoreError, CoreResult};
use crate::mdp::n_step_return;
use crate::rng::Rng;

/// What the planner needs from the world.
pub trait PlanningDomain {
    type State: Clone;
    type Action: Clone;

    /// Deterministic successor and reward, `None` if the model cannot step.
    fn step(&self, s: &Self::State, a: &Self::Action) -> Option<(Self::State, f64)>;

    fn is_recoverable(&self, s: &Self::State) -> bool;

    /// Appends `k` candidate actions to `out`.
    fn sample_actions(&self, rng: &mut Rng, k: usize, out: &mut Vec<Self::Action>);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    /// Maximum number of actions in a plan.
    pub horizon: usize,
    /// Actions sampled per expansion. Zero disables planning (always ⊥).
    pub branching: usize,
    /// Select/expand/backpropagate iterations after the root expansion.
    pub iterations: usize,
    pub ucb_c: f64,
    pub gamma: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { horizon: 5, branching: 10, iterations: 100, ucb_c: core::f64::consts::SQRT_2, gamma: 0.99 }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> CoreResult<()> {
        if self.horizon == 0 {
            return Err(CoreError::config("planner.horizon must be at least 1"));
        }
        if !(self.ucb_c > 0.0) {
            return Err(CoreError::config("planner.ucb_c must be positive"));
        }
        crate::mdp::Discount::new(self.gamma).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanResult<A> {
    Plan {
        actions: Vec<A>,
        objective: f64,
    },
    /// No recoverable action could be sampled at the root.
    Bottom,
}

impl<A> PlanResult<A> {
    pub fn is_bottom(&self) -> bool {
        matches!(self, PlanResult::Bottom)
    }

    pub fn first_action(&self) -> Option<&A> {
        match self {
            PlanResult::Plan { actions, .. } => actions.first(),
            PlanResult::Bottom => None,
        }
    }

    pub fn objective(&self) -> Option<f64> {
        match self {
            PlanResult::Plan { objective, .. } => Some(*objective),
            PlanResult::Bottom => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Node<S> {
    pub state: S,
    pub depth: usize,
    first_edge: usize,
    n_edges: usize,
    expanded: bool,
}

impl<S> Node<S> {
    pub fn is_expanded(&self) -> bool {
        self.expanded
    }

    /// Expanded but no sampled action led to a recoverable state.
    pub fn is_dead_end(&self) -> bool {
        self.expanded && self.n_edges == 0
    }

    pub fn edge_ids(&self) -> core::ops::Range<usize> {
        self.first_edge..self.first_edge + self.n_edges
    }
}

#[derive(Debug, Clone)]
pub struct Edge<A> {
    pub parent: usize,
    pub child: usize,
    pub action: A,
    /// `R(parent, action)`, cached at creation.
    pub reward: f64,
    /// `Q(parent, action)` as returned by the value function at creation.
    pub q_init: f64,
    pub q_hat: f64,
    pub visits: u64,
}

/// Tree of recoverable states (nodes) joined by sampled actions (edges).
/// Node 0 is the root. The edges of a node are contiguous and appear in
/// insertion order, which is also the tie-break order.
#[derive(Debug, Clone)]
pub struct SearchTree<S, A> {
    nodes: Vec<Node<S>>,
    edges: Vec<Edge<A>>,
    expansions: usize,
}

/// Edges traversed from the root and the node where the walk stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub edges: Vec<usize>,
    pub end: usize,
}

impl<S: Clone, A: Clone> SearchTree<S, A> {
    pub fn new(root: S) -> Self {
        Self {
            nodes: alloc::vec![Node { state: root, depth: 0, first_edge: 0, n_edges: 0, expanded: false }],
            edges: Vec::new(),
            expansions: 0,
        }
    }

    pub fn root(&self) -> &Node<S> {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[Node<S>] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge<A>] {
        &self.edges
    }

    pub fn node(&self, id: usize) -> &Node<S> {
        &self.nodes[id]
    }

    pub fn edge(&self, id: usize) -> &Edge<A> {
        &self.edges[id]
    }

    /// Number of `expand` calls so far, successful or not.
    pub fn expansions(&self) -> usize {
        self.expansions
    }

    pub fn nodes_at_depth(&self, depth: usize) -> usize {
        self.nodes.iter().filter(|n| n.depth == depth).count()
    }

    /// Samples `K` actions at leaf `node` and adds an edge for each one whose
    /// successor is recoverable, with `q_hat = q_init = Q(s, a)` and a visit
    /// count of one. Returns whether any edge was added.
    pub fn expand<D, F>(&mut self, node: usize, domain: &D, q_fn: &mut F, pcfg: &PlannerConfig, rng: &mut Rng) -> bool
    where
        D: PlanningDomain<State = S, Action = A>,
        F: FnMut(&S, &A) -> f64,
    {
        debug_assert!(!self.nodes[node].expanded, "expanding a non-leaf");
        self.expansions += 1;
        let mut candidates = Vec::with_capacity(pcfg.branching);
        domain.sample_actions(rng, pcfg.branching, &mut candidates);
        let parent_state = self.nodes[node].state.clone();
        let depth = self.nodes[node].depth + 1;
        let first_edge = self.edges.len();
        for action in candidates {
            let Some((child_state, reward)) = domain.step(&parent_state, &action) else { continue };
            if !domain.is_recoverable(&child_state) {
                continue;
            }
            let q = q_fn(&parent_state, &action);
            let child = self.nodes.len();
            self.nodes.push(Node { state: child_state, depth, first_edge: 0, n_edges: 0, expanded: false });
            self.edges.push(Edge { parent: node, child, action, reward, q_init: q, q_hat: q, visits: 1 });
        }
        let n_edges = self.edges.len() - first_edge;
        let n = &mut self.nodes[node];
        n.expanded = true;
        n.first_edge = first_edge;
        n.n_edges = n_edges;
        n_edges > 0
    }

    /// First edge of `node` maximising `score`.
    fn argmax_edge(&self, node: usize, score: impl Fn(&Edge<A>) -> f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for id in self.nodes[node].edge_ids() {
            let v = score(&self.edges[id]);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((id, v));
            }
        }
        best.map(|(id, _)| id)
    }

    /// Highest `q_hat` edge out of `node`, first-inserted on ties.
    pub fn best_edge(&self, node: usize) -> Option<usize> {
        self.argmax_edge(node, |e| e.q_hat)
    }

    /// Walks from the root choosing the UCB-maximising edge until reaching a
    /// leaf, a dead end, or a node at the last action depth `L - 1`.
    pub fn select_path_ucb(&self, pcfg: &PlannerConfig) -> Path {
        let mut node = 0;
        let mut edges = Vec::new();
        loop {
            let n = &self.nodes[node];
            if !n.expanded || n.n_edges == 0 || n.depth + 1 >= pcfg.horizon {
                break;
            }
            let total: u64 = n.edge_ids().map(|e| self.edges[e].visits).sum();
            let log_total = crate::math::ln(total as f64);
            let c = pcfg.ucb_c;
            let id = self
                .argmax_edge(node, |e| e.q_hat + c * crate::math::sqrt(log_total / e.visits as f64))
                .expect("node has edges");
            edges.push(id);
            node = self.edges[id].child;
        }
        Path { edges, end: node }
    }

    /// Running-mean update of every edge on `path` towards its discounted
    /// return-to-go, bootstrapped with `terminal` after the last edge; visit
    /// counts are incremented afterwards.
    pub fn backprop(&mut self, path: &[usize], terminal: f64, gamma: f64) {
        let mut to_go = terminal;
        for &id in path.iter().rev() {
            to_go = self.edges[id].reward + gamma * to_go;
            let e = &mut self.edges[id];
            let n = e.visits as f64;
            e.q_hat = (n * e.q_hat + to_go) / (n + 1.0);
        }
        for &id in path {
            self.edges[id].visits += 1;
        }
    }

    /// One select/expand/backpropagate round.
    pub fn iterate<D, F>(&mut self, domain: &D, q_fn: &mut F, pcfg: &PlannerConfig, rng: &mut Rng)
    where
        D: PlanningDomain<State = S, Action = A>,
        F: FnMut(&S, &A) -> f64,
    {
        let path = self.select_path_ucb(pcfg);
        if !self.nodes[path.end].expanded {
            self.expand(path.end, domain, q_fn, pcfg, rng);
        }
        self.complete_iteration(&path, pcfg);
    }

    /// Backpropagation half of an iteration, for a path whose end node has
    /// already been expanded. The terminal bootstrap is the best `q_hat`
    /// leaving the end node.
    pub fn complete_iteration(&mut self, path: &Path, pcfg: &PlannerConfig) {
        match self.best_edge(path.end) {
            Some(best) => {
                let terminal = self.edges[best].q_hat;
                self.backprop(&path.edges, terminal, pcfg.gamma);
            }
            None => {
                // Dead end: the edge into it becomes the terminal action and
                // keeps its own Q bootstrap.
                if let Some((&last, prefix)) = path.edges.split_last() {
                    let terminal = self.edges[last].q_init;
                    self.backprop(prefix, terminal, pcfg.gamma);
                    self.edges[last].visits += 1;
                }
            }
        }
    }

    /// Greedy root-to-leaf walk along `q_hat`.
    pub fn select_path_greedy(&self) -> Vec<usize> {
        let mut node = 0;
        let mut path = Vec::new();
        while let Some(id) = self.best_edge(node) {
            path.push(id);
            node = self.edges[id].child;
        }
        path
    }

    /// Actions and objective of the greedy path. The last edge is the
    /// bootstrap action: its reward is replaced by its `Q` value.
    pub fn extract_plan(&self, gamma: f64) -> PlanResult<A> {
        let path = self.select_path_greedy();
        let Some((&last, prefix)) = path.split_last() else { return PlanResult::Bottom };
        let rewards: Vec<f64> = prefix.iter().map(|&id| self.edges[id].reward).collect();
        let objective = n_step_return(&rewards, self.edges[last].q_init, gamma);
        let actions = path.iter().map(|&id| self.edges[id].action.clone()).collect();
        PlanResult::Plan { actions, objective }
    }
}

impl<S: fmt::Debug, A: fmt::Debug> SearchTree<S, A> {
    /// Plain-text dump: one `node` line per node and one `edge` line per edge.
    pub fn write_trace(&self, w: &mut impl fmt::Write) -> fmt::Result {
        writeln!(w, "# nodes={} edges={} expansions={}", self.nodes.len(), self.edges.len(), self.expansions)?;
        for (i, n) in self.nodes.iter().enumerate() {
            writeln!(w, "node {i} depth={} expanded={} state={:?}", n.depth, n.expanded, n.state)?;
        }
        for (i, e) in self.edges.iter().enumerate() {
            writeln!(
                w,
                "edge {i} {}->{} visits={} reward={} q_init={} q_hat={} action={:?}",
                e.parent, e.child, e.visits, e.reward, e.q_init, e.q_hat, e.action
            )?;
        }
        Ok(())
    }
}

/// Runs the search from `s0` and returns the tree alongside the plan.
pub fn plan_rec_with_tree<D, F>(
    s0: D::State,
    q_fn: &mut F,
    domain: &D,
    pcfg: &PlannerConfig,
    rng: &mut Rng,
) -> (PlanResult<D::Action>, SearchTree<D::State, D::Action>)
where
    D: PlanningDomain,
    F: FnMut(&D::State, &D::Action) -> f64,
{
    let mut tree = SearchTree::new(s0);
    if !tree.expand(0, domain, q_fn, pcfg, rng) {
        return (PlanResult::Bottom, tree);
    }
    for _ in 0..pcfg.iterations {
        tree.iterate(domain, q_fn, pcfg, rng);
    }
    (tree.extract_plan(pcfg.gamma), tree)
}

/// Recovery planning from `s0`: either a plan whose every intermediate state
/// is recoverable, or [`PlanResult::Bottom`] when the root cannot be expanded.
pub fn plan_rec<D, F>(
    s0: D::State,
    q_fn: &mut F,
    domain: &D,
    pcfg: &PlannerConfig,
    rng: &mut Rng,
) -> PlanResult<D::Action>
where
    D: PlanningDomain,
    F: FnMut(&D::State, &D::Action) -> f64,
{
    plan_rec_with_tree(s0, q_fn, domain, pcfg, rng).0
}

#[cfg(test)]
mod tests;
