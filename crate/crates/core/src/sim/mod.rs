//! Discrete-event simulation of single-copy custody routing.
//!
//! Bundles are forwarded one decision at a time. A transmission succeeds iff
//! the receiver is operational at the arrival tick and the independent
//! transmission-failure draw does not fire. Senders learn about a failure at
//! the custody timeout, exactly as in the POMDP's transition function.

mod ground_truth;
pub mod sweep;

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::cgr::{cgr_next_hop, CgrMode};
use crate::contact_plan::{ContactId, NodeId, Tick};
use crate::dnf::{DnfAction, Network, ObservationHistory, RewardParams, RoutingProblem, TransmissionTiming};
use crate::failure_model::FunctionalState;
use crate::pomcp::{self, SolverConfig};

pub use ground_truth::{GroundTruth, TxFailures};

/// ChaCha stream ids carved out of one master seed.
pub(crate) mod streams {
    pub const TRANSMISSION: u64 = 1;
    pub const SOLVER: u64 = 2;
    pub const GROUND_TRUTH: u64 = 1 << 32;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RouterKind {
    Dnf,
    Cgr,
    CgrCr,
}

impl RouterKind {
    pub const ALL: [RouterKind; 3] = [RouterKind::Dnf, RouterKind::Cgr, RouterKind::CgrCr];

    pub fn name(self) -> &'static str {
        match self {
            RouterKind::Dnf => "dnf",
            RouterKind::Cgr => "cgr",
            RouterKind::CgrCr => "cgr-cr",
        }
    }

    pub fn cgr_mode(self) -> Option<CgrMode> {
        match self {
            RouterKind::Dnf => None,
            RouterKind::Cgr => Some(CgrMode::Plain),
            RouterKind::CgrCr => Some(CgrMode::Custody),
        }
    }
}

impl fmt::Display for RouterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RouterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dnf" => Ok(RouterKind::Dnf),
            "cgr" => Ok(RouterKind::Cgr),
            "cgr-cr" => Ok(RouterKind::CgrCr),
            other => Err(format!("unknown router `{other}` (expected dnf, cgr, cgr-cr)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouterConfig {
    pub kind: RouterKind,
    pub solver: SolverConfig,
    pub rewards: RewardParams,
}

impl RouterConfig {
    pub fn new(kind: RouterKind) -> Self {
        Self {
            kind,
            solver: SolverConfig::default(),
            rewards: RewardParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BundleSpec {
    pub source: NodeId,
    pub destination: NodeId,
    pub creation_time: Tick,
}

/// Every node sends one bundle to every other node at `creation_time`.
pub fn all_to_all(node_count: u32, creation_time: Tick) -> Vec<BundleSpec> {
    let mut out = Vec::new();
    for s in 0..node_count {
        for d in 0..node_count {
            if s != d {
                out.push(BundleSpec {
                    source: NodeId(s),
                    destination: NodeId(d),
                    creation_time,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundleStatus {
    InTransit,
    Delivered(Tick),
    Lost(Tick),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub id: u32,
    pub source: NodeId,
    pub destination: NodeId,
    pub creation_time: Tick,
    pub current_node: NodeId,
    pub obs_history: ObservationHistory,
    pub hop_count: u32,
    pub transmission_count: u32,
    pub status: BundleStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Created,
    Transmit { success: bool },
    Delivered,
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogRecord {
    pub tick: Tick,
    pub bundle: u32,
    pub event: EventKind,
    pub node: NodeId,
    pub contact: Option<ContactId>,
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let event = match self.event {
            EventKind::Created => "created",
            EventKind::Transmit { success: true } => "tx-ok",
            EventKind::Transmit { success: false } => "tx-fail",
            EventKind::Delivered => "delivered",
            EventKind::Lost => "lost",
        };
        write!(f, "{},{},{},{},", self.tick, self.bundle, event, self.node)?;
        if let Some(c) = self.contact {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub bundles: usize,
    pub delivered: usize,
    pub delivery_ratio: f64,
    pub transmissions: u64,
    pub energy_efficiency: f64,
    /// NaN when nothing was delivered.
    pub mean_delay: f64,
    /// NaN when nothing was delivered.
    pub mean_hops: f64,
    /// Wall-clock milliseconds per planner call (DNF only).
    pub decision_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub report: SimReport,
    pub bundles: Vec<Bundle>,
    pub log: Vec<LogRecord>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("router chose disabled action {action:?} for bundle {bundle} at node {node}, tick {tick}")]
    DisabledAction {
        bundle: u32,
        node: NodeId,
        tick: Tick,
        action: DnfAction,
    },
    #[error("planner failed for bundle {bundle}: {source}")]
    Planner { bundle: u32, source: pomcp::PlanError },
    #[error("ground truth covers {have} nodes, plan has {want}")]
    GroundTruthSize { have: usize, want: usize },
}

/// Derives an independent 64-bit seed from a master seed and a tag tuple.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    let mut x = master ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// One simulated run. `seed` drives the solver; ground truth and
/// transmission failures are passed in so callers control their streams.
pub struct Simulation<'a> {
    pub network: &'a Network,
    pub truth: &'a GroundTruth,
    pub tx: &'a TxFailures,
    pub router: RouterConfig,
    pub seed: u64,
}

impl Simulation<'_> {
    pub fn run(&self, traffic: &[BundleSpec]) -> Result<SimOutcome, SimError> {
        let plan = &self.network.plan;
        if self.truth.node_count() < plan.node_count() as usize {
            return Err(SimError::GroundTruthSize {
                have: self.truth.node_count(),
                want: plan.node_count() as usize,
            });
        }
        let mut bundles: Vec<Bundle> = traffic
            .iter()
            .enumerate()
            .map(|(i, spec)| Bundle {
                id: i as u32,
                source: spec.source,
                destination: spec.destination,
                creation_time: spec.creation_time,
                current_node: spec.source,
                obs_history: ObservationHistory::new(),
                hop_count: 0,
                transmission_count: 0,
                status: BundleStatus::InTransit,
            })
            .collect();
        let mut log = Vec::new();
        let mut decision_ms = Vec::new();
        let mut decisions = vec![0u64; bundles.len()];

        // (tick, bundle id); one pending decision per bundle at most
        let mut queue: BinaryHeap<Reverse<(Tick, u32)>> = BinaryHeap::new();
        for b in &bundles {
            log.push(LogRecord {
                tick: b.creation_time,
                bundle: b.id,
                event: EventKind::Created,
                node: b.source,
                contact: None,
            });
            queue.push(Reverse((b.creation_time, b.id)));
        }

        while let Some(Reverse((now, id))) = queue.pop() {
            let b = &mut bundles[id as usize];
            if b.current_node == b.destination {
                b.status = BundleStatus::Delivered(now);
                log.push(record(now, b, EventKind::Delivered, None));
                continue;
            }
            let reachable = now <= plan.horizon()
                && self.network.lttg.reachable(b.current_node, b.destination, now);
            let choice = if reachable {
                let decision_idx = decisions[id as usize];
                decisions[id as usize] += 1;
                self.choose(b, now, decision_idx, &mut decision_ms)?
            } else {
                None
            };
            let Some(contact_id) = choice else {
                b.status = BundleStatus::Lost(now);
                log.push(record(now, b, EventKind::Lost, None));
                continue;
            };

            let contact = *plan.contact(contact_id).expect("router picks plan contacts");
            let timing = TransmissionTiming::new(&contact, now);
            let attempt = b.transmission_count;
            b.transmission_count += 1;
            let receiver_up = self.truth.functional_at(contact.dst, timing.t_succ) == FunctionalState::Operational;
            let success = receiver_up && !self.tx.failed(b.id, attempt);
            log.push(record(timing.departure, b, EventKind::Transmit { success }, Some(contact_id)));

            if success {
                b.current_node = contact.dst;
                b.hop_count += 1;
                // histories are local to the deciding node
                b.obs_history = ObservationHistory::new();
                queue.push(Reverse((timing.t_succ, b.id)));
                continue;
            }
            match self.router.kind.cgr_mode() {
                Some(mode) if !mode.retries_after_failure() => {
                    b.status = BundleStatus::Lost(timing.t_fail);
                    log.push(record(timing.t_fail, b, EventKind::Lost, Some(contact_id)));
                }
                Some(_) => queue.push(Reverse((timing.t_fail, b.id))),
                None => {
                    b.obs_history.record(contact.dst, timing.t_succ, FunctionalState::Failed);
                    queue.push(Reverse((timing.t_fail, b.id)));
                }
            }
        }

        let report = summarize(&bundles, decision_ms);
        Ok(SimOutcome { report, bundles, log })
    }

    fn choose(
        &self,
        b: &Bundle,
        now: Tick,
        decision_idx: u64,
        decision_ms: &mut Vec<f64>,
    ) -> Result<Option<ContactId>, SimError> {
        let plan = &self.network.plan;
        match self.router.kind {
            RouterKind::Cgr | RouterKind::CgrCr => Ok(cgr_next_hop(plan, b.current_node, now, b.destination)),
            RouterKind::Dnf => {
                let problem = RoutingProblem::new(self.network, b.current_node, now, b.destination, b.obs_history.clone())
                    .with_rewards(self.router.rewards);
                let belief: Vec<_> = problem.initial_belief().iter().map(|(s, w)| (s.clone(), w)).collect();
                let mut cfg = self.router.solver;
                cfg.seed = derive_seed(self.seed ^ streams::SOLVER, u64::from(b.id), decision_idx);
                cfg.discount = self.router.rewards.discount;
                let started = Instant::now();
                let decision = pomcp::plan(&problem, &belief, &cfg)
                    .map_err(|source| SimError::Planner { bundle: b.id, source })?;
                decision_ms.push(started.elapsed().as_secs_f64() * 1e3);
                log::debug!(
                    "bundle {} at node {} tick {now}: {:?} ({} history nodes)",
                    b.id,
                    b.current_node.0,
                    decision.action,
                    decision.tree_size
                );
                match decision.action {
                    DnfAction::Terminal => Ok(None),
                    action @ DnfAction::Contact(id) => {
                        if !problem.is_enabled(&belief[0].0, action) {
                            return Err(SimError::DisabledAction {
                                bundle: b.id,
                                node: b.current_node,
                                tick: now,
                                action,
                            });
                        }
                        Ok(Some(id))
                    }
                }
            }
        }
    }
}

fn record(tick: Tick, b: &Bundle, event: EventKind, contact: Option<ContactId>) -> LogRecord {
    LogRecord {
        tick,
        bundle: b.id,
        event,
        node: b.current_node,
        contact,
    }
}

fn summarize(bundles: &[Bundle], decision_ms: Vec<f64>) -> SimReport {
    let transmissions: u64 = bundles.iter().map(|b| u64::from(b.transmission_count)).sum();
    let delivered: Vec<&Bundle> = bundles
        .iter()
        .filter(|b| matches!(b.status, BundleStatus::Delivered(_)))
        .collect();
    let n = delivered.len();
    let (mut delay, mut hops) = (0.0, 0.0);
    for b in &delivered {
        if let BundleStatus::Delivered(t) = b.status {
            delay += (t - b.creation_time) as f64;
        }
        hops += f64::from(b.hop_count);
    }
    let mean = |sum: f64| if n == 0 { f64::NAN } else { sum / n as f64 };
    SimReport {
        bundles: bundles.len(),
        delivered: n,
        delivery_ratio: if bundles.is_empty() { 0.0 } else { n as f64 / bundles.len() as f64 },
        transmissions,
        energy_efficiency: n as f64 / transmissions.max(1) as f64,
        mean_delay: mean(delay),
        mean_hops: mean(hops),
        decision_ms,
    }
}
