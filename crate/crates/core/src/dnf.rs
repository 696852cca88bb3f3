//! The dependent-node-failure routing POMDP.
//!
//! A state is the bundle's location and time plus the sender-side history of
//! observed receiver states. The failure CTMC is not part of the state; it is
//! folded into the transition probabilities through
//! [`FailureModel::predict_functional`]. Partial observability comes from
//! transmission failures: a missing custody report cannot tell a failed
//! receiver from a lost transmission.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::contact_plan::{Contact, ContactId, ContactPlan, NodeId, Tick};
use crate::failure_model::{FailureModel, FunctionalState};
use crate::lttg::LttgMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum DnfError {
    #[error("action {action:?} is not enabled in state {state:?}")]
    ActionNotEnabled { action: DnfAction, state: DnfState },
    #[error("observation {0:?} has zero probability under the current belief")]
    ImpossibleObservation(DnfObservation),
    #[error("belief is empty")]
    EmptyBelief,
}

/// Last observed functional state per node, kept sorted by node so equal
/// histories are structurally equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObservationHistory(Vec<(NodeId, Tick, FunctionalState)>);

impl ObservationHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, node: NodeId) -> Option<(Tick, FunctionalState)> {
        self.0
            .binary_search_by_key(&node, |e| e.0)
            .ok()
            .map(|i| (self.0[i].1, self.0[i].2))
    }

    pub fn record(&mut self, node: NodeId, tick: Tick, state: FunctionalState) {
        match self.0.binary_search_by_key(&node, |e| e.0) {
            Ok(i) => self.0[i] = (node, tick, state),
            Err(i) => self.0.insert(i, (node, tick, state)),
        }
    }

    pub fn with(&self, node: NodeId, tick: Tick, state: FunctionalState) -> Self {
        let mut next = self.clone();
        next.record(node, tick, state);
        next
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, Tick, FunctionalState)> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(NodeId, Tick, FunctionalState)> for ObservationHistory {
    fn from_iter<I: IntoIterator<Item = (NodeId, Tick, FunctionalState)>>(iter: I) -> Self {
        let mut h = Self::new();
        for (n, t, s) in iter {
            h.record(n, t, s);
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DnfState {
    Network {
        node: NodeId,
        time: Tick,
        obs: ObservationHistory,
    },
    /// Absorbing state entered by the terminal action.
    Trap,
}

impl DnfState {
    pub fn network(node: NodeId, time: Tick, obs: ObservationHistory) -> Self {
        DnfState::Network { node, time, obs }
    }

    pub fn location(&self) -> Option<(NodeId, Tick)> {
        match self {
            DnfState::Network { node, time, .. } => Some((*node, *time)),
            DnfState::Trap => None,
        }
    }

    pub fn obs(&self) -> Option<&ObservationHistory> {
        match self {
            DnfState::Network { obs, .. } => Some(obs),
            DnfState::Trap => None,
        }
    }
}

/// Contact actions order by id; the terminal action sorts last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DnfAction {
    Contact(ContactId),
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DnfObservation {
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeKind {
    Success,
    NodeFailure,
    TransmissionFailure,
    Terminal,
}

impl OutcomeKind {
    /// Deterministic observation emitted on entering a successor of this kind.
    pub fn observation(self) -> DnfObservation {
        match self {
            OutcomeKind::Success => DnfObservation::Success,
            OutcomeKind::NodeFailure | OutcomeKind::TransmissionFailure | OutcomeKind::Terminal => {
                DnfObservation::Failure
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub kind: OutcomeKind,
    pub state: DnfState,
    pub observation: DnfObservation,
    pub reward: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    pub goal_max: f64,
    pub all_stuck: f64,
    pub discount: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            goal_max: 100.0,
            all_stuck: -100.0,
            discount: 0.95,
        }
    }
}

/// Per-network data computed once and shared by every routing problem.
#[derive(Debug, Clone)]
pub struct Network {
    pub plan: ContactPlan,
    pub failure_model: FailureModel,
    pub lttg: LttgMatrix,
}

impl Network {
    pub fn new(plan: ContactPlan, failure_model: FailureModel) -> Self {
        let lttg = LttgMatrix::compute(&plan);
        Self {
            plan,
            failure_model,
            lttg,
        }
    }
}

/// One routing decision: where the bundle is, where it goes, and what the
/// deciding node has observed so far.
#[derive(Debug, Clone)]
pub struct RoutingProblem<'a> {
    pub network: &'a Network,
    pub current_node: NodeId,
    pub current_time: Tick,
    pub destination: NodeId,
    pub initial_obs: ObservationHistory,
    pub rewards: RewardParams,
}

/// Timing of a greedy transmission over a contact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransmissionTiming {
    pub departure: Tick,
    pub t_store: Tick,
    /// Arrival at the receiver when the transmission succeeds.
    pub t_succ: Tick,
    /// Custody timeout after which the sender knows the transmission failed.
    pub t_fail: Tick,
}

impl TransmissionTiming {
    pub fn new(contact: &Contact, now: Tick) -> Self {
        let t_store = contact.t_start.saturating_sub(now);
        let t_succ = now + t_store + contact.t_prop;
        Self {
            departure: now + t_store,
            t_store,
            t_succ,
            t_fail: t_succ + contact.t_prop + 1,
        }
    }
}

impl<'a> RoutingProblem<'a> {
    pub fn new(
        network: &'a Network,
        current_node: NodeId,
        current_time: Tick,
        destination: NodeId,
        initial_obs: ObservationHistory,
    ) -> Self {
        Self {
            network,
            current_node,
            current_time,
            destination,
            initial_obs,
            rewards: RewardParams::default(),
        }
    }

    pub fn with_rewards(mut self, rewards: RewardParams) -> Self {
        self.rewards = rewards;
        self
    }

    pub fn plan(&self) -> &ContactPlan {
        &self.network.plan
    }

    pub fn initial_state(&self) -> DnfState {
        DnfState::network(self.current_node, self.current_time, self.initial_obs.clone())
    }

    pub fn initial_belief(&self) -> Belief {
        Belief::point(self.initial_state())
    }

    fn can_reach(&self, node: NodeId, time: Tick) -> bool {
        self.network.lttg.reachable(node, self.destination, time)
    }

    /// Enabled actions; never empty.
    pub fn available_actions(&self, state: &DnfState) -> Vec<DnfAction> {
        let DnfState::Network { node, time, .. } = *state else {
            return vec![DnfAction::Terminal];
        };
        if node == self.destination || !self.can_reach(node, time) {
            return vec![DnfAction::Terminal];
        }
        let actions: Vec<DnfAction> = self
            .plan()
            .schedulable_contacts(node, time)
            .map(|c| DnfAction::Contact(c.id))
            .collect();
        if actions.is_empty() {
            vec![DnfAction::Terminal]
        } else {
            actions
        }
    }

    pub fn is_enabled(&self, state: &DnfState, action: DnfAction) -> bool {
        match (state, action) {
            (_, DnfAction::Terminal) => self.available_actions(state) == [DnfAction::Terminal],
            (DnfState::Trap, DnfAction::Contact(_)) => false,
            (DnfState::Network { node, time, .. }, DnfAction::Contact(id)) => {
                *node != self.destination
                    && self.can_reach(*node, *time)
                    && self
                        .plan()
                        .contact(id)
                        .is_some_and(|c| c.src == *node && c.t_end >= *time)
            }
        }
    }

    /// State reward, granted on entering `state`.
    pub fn reward(&self, state: &DnfState) -> f64 {
        let DnfState::Network { node, time, .. } = *state else {
            return 0.0;
        };
        if node == self.destination {
            self.goal_reward(time)
        } else if !self.can_reach(node, time) {
            self.rewards.all_stuck
        } else {
            0.0
        }
    }

    /// Linear decay from `goal_max` at tick 0 to zero at the plan horizon.
    fn goal_reward(&self, time: Tick) -> f64 {
        let horizon = self.plan().horizon();
        if horizon == 0 {
            return self.rewards.goal_max;
        }
        self.rewards.goal_max * (1.0 - time as f64 / horizon as f64).max(0.0)
    }

    /// Reward of the terminal action from `state`. Delivered bundles were
    /// already rewarded on arrival; anything else giving up is stuck.
    pub fn terminal_reward(&self, state: &DnfState) -> f64 {
        match state.location() {
            None => 0.0,
            Some((node, _)) if node == self.destination => 0.0,
            Some(_) => self.rewards.all_stuck,
        }
    }

    /// Full successor distribution; rejects disabled actions.
    pub fn transition(&self, state: &DnfState, action: DnfAction) -> Result<Vec<Outcome>, DnfError> {
        if !self.is_enabled(state, action) {
            return Err(DnfError::ActionNotEnabled {
                action,
                state: state.clone(),
            });
        }
        Ok(self.transition_unchecked(state, action))
    }

    /// Successor distribution without the enabledness check. Zero-probability
    /// branches are kept so callers always see the three contact outcomes.
    pub fn transition_unchecked(&self, state: &DnfState, action: DnfAction) -> Vec<Outcome> {
        match (state, action) {
            (DnfState::Trap, _) => vec![Outcome {
                kind: OutcomeKind::Terminal,
                state: DnfState::Trap,
                observation: DnfObservation::Failure,
                reward: 0.0,
                probability: 1.0,
            }],
            (_, DnfAction::Terminal) => vec![Outcome {
                kind: OutcomeKind::Terminal,
                state: DnfState::Trap,
                observation: DnfObservation::Failure,
                reward: self.terminal_reward(state),
                probability: 1.0,
            }],
            (DnfState::Network { node, time, obs }, DnfAction::Contact(id)) => {
                let contact = self.plan().contact(id).expect("contact action references plan");
                let b = self.branches(*time, obs, contact);
                let kinds = [
                    (OutcomeKind::Success, b.p_success),
                    (OutcomeKind::TransmissionFailure, b.p_tx_failure),
                    (OutcomeKind::NodeFailure, b.p_node_failure),
                ];
                kinds
                    .into_iter()
                    .map(|(kind, probability)| {
                        let next = successor(kind, *node, obs, contact, &b.timing);
                        Outcome {
                            kind,
                            observation: kind.observation(),
                            reward: self.reward(&next),
                            state: next,
                            probability,
                        }
                    })
                    .collect()
            }
        }
    }

    fn branches(&self, time: Tick, obs: &ObservationHistory, contact: &Contact) -> Branches {
        let timing = TransmissionTiming::new(contact, time);
        let model = &self.network.failure_model;
        let p_up = model.predict_functional(obs.get(contact.dst), timing.t_succ);
        Branches {
            timing,
            p_success: model.transmission_success_probability(p_up),
            p_tx_failure: p_up * model.p_tx_fail(),
            p_node_failure: 1.0 - p_up,
        }
    }

    /// Samples one successor, its observation, and reward.
    pub fn generative_step<R: Rng + ?Sized>(
        &self,
        state: &DnfState,
        action: DnfAction,
        rng: &mut R,
    ) -> (DnfState, DnfObservation, f64) {
        match (state, action) {
            (DnfState::Network { node, time, obs }, DnfAction::Contact(id)) => {
                let contact = self.plan().contact(id).expect("contact action references plan");
                let b = self.branches(*time, obs, contact);
                let u: f64 = rng.random();
                let kind = if u < b.p_success {
                    OutcomeKind::Success
                } else if u < b.p_success + b.p_tx_failure {
                    OutcomeKind::TransmissionFailure
                } else {
                    OutcomeKind::NodeFailure
                };
                let next = successor(kind, *node, obs, contact, &b.timing);
                let r = self.reward(&next);
                (next, kind.observation(), r)
            }
            _ => {
                let r = match state {
                    DnfState::Trap => 0.0,
                    _ => self.terminal_reward(state),
                };
                (DnfState::Trap, DnfObservation::Failure, r)
            }
        }
    }

    /// Exact Bayes update of `belief` after `action` and observation `z`.
    pub fn update_belief(
        &self,
        belief: &Belief,
        action: DnfAction,
        z: DnfObservation,
    ) -> Result<Belief, DnfError> {
        let mut acc: BTreeMap<DnfState, f64> = BTreeMap::new();
        let mut p_z = 0.0;
        for (s, w) in belief.iter() {
            for o in self.transition(s, action)? {
                if o.observation == z && o.probability > 0.0 {
                    let mass = w * o.probability;
                    p_z += mass;
                    *acc.entry(o.state).or_insert(0.0) += mass;
                }
            }
        }
        if p_z <= 0.0 {
            return Err(DnfError::ImpossibleObservation(z));
        }
        let support = acc
            .into_iter()
            .map(|(s, m)| (s, m / p_z))
            .filter(|(_, w)| *w > 0.0)
            .collect();
        Ok(Belief { support })
    }

    /// Belief-weighted immediate reward of `action`.
    pub fn expected_reward(&self, belief: &Belief, action: DnfAction) -> Result<f64, DnfError> {
        let mut total = 0.0;
        for (s, w) in belief.iter() {
            for o in self.transition(s, action)? {
                total += w * o.probability * o.reward;
            }
        }
        Ok(total)
    }

    /// Leaf value used by the tree search: the state's own reward.
    pub fn estimate_value(&self, state: &DnfState) -> f64 {
        self.reward(state)
    }
}

impl crate::pomcp::Pomdp for RoutingProblem<'_> {
    type State = DnfState;
    type Action = DnfAction;
    type Observation = DnfObservation;

    fn actions(&self, state: &DnfState) -> Vec<DnfAction> {
        self.available_actions(state)
    }

    fn step<R: Rng + ?Sized>(&self, state: &DnfState, action: DnfAction, rng: &mut R) -> (DnfState, DnfObservation, f64) {
        self.generative_step(state, action, rng)
    }

    fn is_terminal(&self, state: &DnfState) -> bool {
        matches!(state, DnfState::Trap)
    }

    fn heuristic_value(&self, state: &DnfState) -> f64 {
        self.estimate_value(state)
    }
}

struct Branches {
    timing: TransmissionTiming,
    p_success: f64,
    p_tx_failure: f64,
    p_node_failure: f64,
}

fn successor(
    kind: OutcomeKind,
    src: NodeId,
    obs: &ObservationHistory,
    contact: &Contact,
    timing: &TransmissionTiming,
) -> DnfState {
    use FunctionalState::*;
    match kind {
        OutcomeKind::Success => {
            DnfState::network(contact.dst, timing.t_succ, obs.with(contact.dst, timing.t_succ, Operational))
        }
        OutcomeKind::TransmissionFailure => {
            DnfState::network(src, timing.t_fail, obs.with(contact.dst, timing.t_succ, Operational))
        }
        OutcomeKind::NodeFailure => {
            DnfState::network(src, timing.t_fail, obs.with(contact.dst, timing.t_succ, Failed))
        }
        OutcomeKind::Terminal => DnfState::Trap,
    }
}

/// Discrete distribution over states with strictly positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    support: Vec<(DnfState, f64)>,
}

impl Belief {
    pub fn point(state: DnfState) -> Self {
        Self {
            support: vec![(state, 1.0)],
        }
    }

    /// Normalizes the given weights, merging duplicate states and dropping
    /// zero entries.
    pub fn from_weights(weights: impl IntoIterator<Item = (DnfState, f64)>) -> Result<Self, DnfError> {
        let mut acc: BTreeMap<DnfState, f64> = BTreeMap::new();
        for (s, w) in weights {
            if w > 0.0 {
                *acc.entry(s).or_insert(0.0) += w;
            }
        }
        let total: f64 = acc.values().sum();
        if acc.is_empty() || total <= 0.0 {
            return Err(DnfError::EmptyBelief);
        }
        Ok(Self {
            support: acc.into_iter().map(|(s, w)| (s, w / total)).collect(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DnfState, f64)> {
        self.support.iter().map(|(s, w)| (s, *w))
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn weight(&self, state: &DnfState) -> f64 {
        self.support
            .iter()
            .find(|(s, _)| s == state)
            .map_or(0.0, |(_, w)| *w)
    }

    /// Shared node and time of all network states, when they agree.
    pub fn location(&self) -> Option<(NodeId, Tick)> {
        let mut locs = self.support.iter().map(|(s, _)| s.location());
        let first = locs.next()??;
        locs.all(|l| l == Some(first)).then_some(first)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &DnfState {
        if self.support.len() == 1 {
            return &self.support[0].0;
        }
        let mut u: f64 = rng.random();
        for (s, w) in &self.support {
            if u < *w {
                return s;
            }
            u -= w;
        }
        &self.support.last().expect("belief is never empty").0
    }
}
