//! PO-UCT: Monte-Carlo tree search over action/observation histories.
//!
//! The planner is generic over a [`Pomdp`] generative model. Each simulation
//! samples a start state from the root belief, descends the tree with UCB1,
//! adds at most one new history node, evaluates it with a pluggable
//! [`Estimator`], and backs up the discounted return.

use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Generative POMDP interface consumed by the planner.
pub trait Pomdp {
    type State: Clone;
    type Action: Copy + Ord + Debug;
    type Observation: Copy + Eq + Debug;

    /// Enabled actions in `state`. Must not be empty for non-terminal states.
    fn actions(&self, state: &Self::State) -> Vec<Self::Action>;

    /// Samples `(next state, observation, reward)`.
    fn step<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        action: Self::Action,
        rng: &mut R,
    ) -> (Self::State, Self::Observation, f64);

    /// Absorbing states end a simulation with value zero.
    fn is_terminal(&self, state: &Self::State) -> bool;

    /// Heuristic value used by [`RewardEstimator`].
    fn heuristic_value(&self, _state: &Self::State) -> f64 {
        0.0
    }
}

/// Leaf value estimate for newly added history nodes.
pub trait Estimator<P: Pomdp> {
    fn estimate(
        &mut self,
        model: &P,
        state: &P::State,
        remaining_depth: usize,
        discount: f64,
        rng: &mut ChaCha8Rng,
    ) -> f64;
}

/// Uses [`Pomdp::heuristic_value`] directly, without any rollout.
#[derive(Debug, Clone, Copy, Default)]
pub struct RewardEstimator;

impl<P: Pomdp> Estimator<P> for RewardEstimator {
    fn estimate(&mut self, model: &P, state: &P::State, _: usize, _: f64, _: &mut ChaCha8Rng) -> f64 {
        model.heuristic_value(state)
    }
}

/// Uniform-random rollout to a terminal state or the depth limit.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomRollout;

impl<P: Pomdp> Estimator<P> for RandomRollout {
    fn estimate(
        &mut self,
        model: &P,
        state: &P::State,
        remaining_depth: usize,
        discount: f64,
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let mut state = state.clone();
        let mut total = 0.0;
        let mut weight = 1.0;
        for _ in 0..remaining_depth {
            if model.is_terminal(&state) {
                break;
            }
            let actions = model.actions(&state);
            let a = actions[rng.random_range(0..actions.len())];
            let (next, _, r) = model.step(&state, a, rng);
            total += weight * r;
            weight *= discount;
            state = next;
        }
        total
    }
}

impl<P, F> Estimator<P> for F
where
    P: Pomdp,
    F: FnMut(&P, &P::State) -> f64,
{
    fn estimate(&mut self, model: &P, state: &P::State, _: usize, _: f64, _: &mut ChaCha8Rng) -> f64 {
        self(model, state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rollout {
    Reward,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub iterations: usize,
    pub exploration_c: f64,
    pub max_depth: usize,
    pub discount: f64,
    pub seed: u64,
    pub rollout: Rollout,
    /// Particles retained per history node.
    pub max_particles: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            exploration_c: 100.0,
            max_depth: 50,
            discount: 0.95,
            seed: 0,
            rollout: Rollout::Reward,
            max_particles: 32,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("root belief is empty")]
    EmptyBelief,
    #[error("no enabled action at the root")]
    NoActions,
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.iterations == 0 {
            return Err(PlanError::Config("iterations must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(PlanError::Config("max depth must be at least 1".into()));
        }
        if !(self.exploration_c >= 0.0) {
            return Err(PlanError::Config("exploration constant must be non-negative".into()));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(PlanError::Config("discount must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionStats<A> {
    pub action: A,
    pub visits: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision<A> {
    pub action: A,
    pub root: Vec<ActionStats<A>>,
    /// Number of history (belief) nodes in the final tree.
    pub tree_size: usize,
}

struct BeliefNode<S> {
    visits: u32,
    actions: Vec<usize>,
    particles: Vec<S>,
}

struct ActionNode<A, O> {
    action: A,
    visits: u32,
    value: f64,
    children: Vec<(O, usize)>,
}

/// Runs the search with the estimator selected by `config.rollout`.
pub fn plan<P: Pomdp>(
    model: &P,
    belief: &[(P::State, f64)],
    config: &SolverConfig,
) -> Result<Decision<P::Action>, PlanError> {
    match config.rollout {
        Rollout::Reward => plan_with(model, belief, config, RewardEstimator),
        Rollout::Random => plan_with(model, belief, config, RandomRollout),
    }
}

pub fn plan_with<P: Pomdp, E: Estimator<P>>(
    model: &P,
    belief: &[(P::State, f64)],
    config: &SolverConfig,
    estimator: E,
) -> Result<Decision<P::Action>, PlanError> {
    config.validate()?;
    let total: f64 = belief.iter().map(|(_, w)| *w).sum();
    if belief.is_empty() || !(total > 0.0) {
        return Err(PlanError::EmptyBelief);
    }
    let mut search = Search {
        model,
        config,
        estimator,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        beliefs: Vec::new(),
        actions: Vec::new(),
    };
    let root_actions = model.actions(&belief[0].0);
    if root_actions.is_empty() {
        return Err(PlanError::NoActions);
    }
    let root = search.add_belief_node(&belief[0].0);

    if root_actions.len() > 1 {
        for _ in 0..config.iterations {
            let state = sample_weighted(belief, total, &mut search.rng).clone();
            search.simulate(state, root, 0);
        }
    }

    let stats: Vec<ActionStats<P::Action>> = search.beliefs[root]
        .actions
        .iter()
        .map(|&a| {
            let n = &search.actions[a];
            ActionStats {
                action: n.action,
                visits: n.visits,
                value: n.value,
            }
        })
        .collect();
    let action = best_action(&stats);
    Ok(Decision {
        action,
        root: stats,
        tree_size: search.beliefs.len(),
    })
}

/// Highest value among visited actions; ties go to the smallest action.
fn best_action<A: Copy + Ord>(stats: &[ActionStats<A>]) -> A {
    let visited = stats.iter().any(|s| s.visits > 0);
    let mut best: Option<&ActionStats<A>> = None;
    for s in stats.iter().filter(|s| !visited || s.visits > 0) {
        best = match best {
            None => Some(s),
            Some(b) if s.value > b.value || (s.value == b.value && s.action < b.action) => Some(s),
            keep => keep,
        };
    }
    best.expect("root has at least one action").action
}

fn sample_weighted<'b, S, R: Rng + ?Sized>(belief: &'b [(S, f64)], total: f64, rng: &mut R) -> &'b S {
    if belief.len() == 1 {
        return &belief[0].0;
    }
    let mut u = rng.random::<f64>() * total;
    for (s, w) in belief {
        if u < *w {
            return s;
        }
        u -= w;
    }
    &belief[belief.len() - 1].0
}

struct Search<'m, P: Pomdp, E> {
    model: &'m P,
    config: &'m SolverConfig,
    estimator: E,
    rng: ChaCha8Rng,
    beliefs: Vec<BeliefNode<P::State>>,
    actions: Vec<ActionNode<P::Action, P::Observation>>,
}

impl<P: Pomdp, E: Estimator<P>> Search<'_, P, E> {
    fn add_belief_node(&mut self, state: &P::State) -> usize {
        let mut acts = if self.model.is_terminal(state) {
            Vec::new()
        } else {
            self.model.actions(state)
        };
        acts.sort();
        let action_ids = acts
            .into_iter()
            .map(|action| {
                self.actions.push(ActionNode {
                    action,
                    visits: 0,
                    value: 0.0,
                    children: Vec::new(),
                });
                self.actions.len() - 1
            })
            .collect();
        self.beliefs.push(BeliefNode {
            visits: 0,
            actions: action_ids,
            particles: vec![state.clone()],
        });
        self.beliefs.len() - 1
    }

    fn select(&self, node: usize) -> usize {
        let b = &self.beliefs[node];
        let log_n = f64::from(b.visits.max(1)).ln();
        let mut best = b.actions[0];
        let mut best_score = f64::NEG_INFINITY;
        for &a in &b.actions {
            let an = &self.actions[a];
            if an.visits == 0 {
                return a;
            }
            let score = an.value + self.config.exploration_c * (log_n / f64::from(an.visits)).sqrt();
            if score > best_score {
                best_score = score;
                best = a;
            }
        }
        best
    }

    fn simulate(&mut self, state: P::State, node: usize, depth: usize) -> f64 {
        if depth >= self.config.max_depth || self.beliefs[node].actions.is_empty() {
            return 0.0;
        }
        let a = self.select(node);
        let action = self.actions[a].action;
        let (next, obs, reward) = self.model.step(&state, action, &mut self.rng);

        let child = self.actions[a]
            .children
            .iter()
            .find(|(o, _)| *o == obs)
            .map(|&(_, c)| c);
        let future = match child {
            Some(c) => {
                let particles = &mut self.beliefs[c].particles;
                if particles.len() < self.config.max_particles {
                    particles.push(next.clone());
                }
                self.simulate(next, c, depth + 1)
            }
            None => {
                let c = self.add_belief_node(&next);
                self.actions[a].children.push((obs, c));
                let remaining = self.config.max_depth - depth - 1;
                if remaining == 0 || self.model.is_terminal(&next) {
                    0.0
                } else {
                    self.estimator
                        .estimate(self.model, &next, remaining, self.config.discount, &mut self.rng)
                }
            }
        };
        let ret = reward + self.config.discount * future;

        self.beliefs[node].visits += 1;
        let an = &mut self.actions[a];
        an.visits += 1;
        an.value += (ret - an.value) / f64::from(an.visits);
        ret
    }
}
