//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use dnf_core::dnf::{DnfAction, DnfState, RoutingProblem};
use dnf_core::{Contact, ContactPlan, NodeId, Tick};
use rand::Rng;

/// Small random plan: every contact is a uniform (src != dst, window, delay).
pub fn random_plan<R: Rng>(rng: &mut R, max_nodes: u32, max_contacts: usize, max_horizon: Tick) -> ContactPlan {
    let n = rng.random_range(2..=max_nodes);
    let horizon = rng.random_range(1..=max_horizon);
    let count = rng.random_range(0..=max_contacts);
    let contacts = (0..count)
        .map(|i| {
            let src = rng.random_range(0..n);
            let mut dst = rng.random_range(0..n - 1);
            if dst >= src {
                dst += 1;
            }
            let a = rng.random_range(0..=horizon);
            let b = rng.random_range(a..=horizon);
            Contact {
                id: i as u32,
                src: NodeId(src),
                dst: NodeId(dst),
                t_start: a,
                t_end: b,
                t_prop: rng.random_range(0..=3),
            }
        })
        .collect();
    ContactPlan::new(n, contacts, Some(horizon)).expect("valid random plan")
}

/// Earliest arrival at every node from `(src, t)` when links have no delay.
/// `None` marks nodes that cannot be reached at all.
pub fn delay_free_arrivals(plan: &ContactPlan, src: NodeId, t: Tick) -> Vec<Option<Tick>> {
    let n = plan.node_count() as usize;
    let mut best: Vec<Option<Tick>> = vec![None; n];
    best[src.index()] = Some(t);
    // Bellman-Ford style: at most n rounds of relaxation.
    for _ in 0..=n {
        let mut changed = false;
        for c in plan.contacts() {
            let Some(ready) = best[c.src.index()] else { continue };
            if ready > c.t_end {
                continue;
            }
            let arr = ready.max(c.t_start);
            let slot = &mut best[c.dst.index()];
            if slot.is_none_or(|cur| arr < cur) {
                *slot = Some(arr);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    best
}

/// Earliest delivery over every contact sequence (each contact used at most
/// once), with link delays.
pub fn exhaustive_earliest(plan: &ContactPlan, src: NodeId, t: Tick, dst: NodeId) -> Option<Tick> {
    fn dfs(plan: &ContactPlan, at: NodeId, now: Tick, dst: NodeId, used: &mut Vec<bool>, best: &mut Option<Tick>) {
        if at == dst {
            if best.is_none_or(|b| now < b) {
                *best = Some(now);
            }
            return;
        }
        for c in plan.outgoing(at) {
            let i = c.id as usize;
            if used[i] {
                continue;
            }
            let Some(dep) = c.departure(now) else { continue };
            used[i] = true;
            dfs(plan, c.dst, dep + c.t_prop, dst, used, best);
            used[i] = false;
        }
    }
    let max_id = plan.contacts().iter().map(|c| c.id as usize + 1).max().unwrap_or(0);
    let mut used = vec![false; max_id];
    let mut best = None;
    dfs(plan, src, t, dst, &mut used, &mut best);
    best
}

/// Exact finite-horizon expectimax value of the fully observable model,
/// returned together with the optimal action at `state` (ties to the
/// smallest action).
pub fn expectimax(problem: &RoutingProblem<'_>, state: &DnfState, depth: usize, discount: f64) -> (f64, DnfAction) {
    fn value(
        p: &RoutingProblem<'_>,
        s: &DnfState,
        depth: usize,
        g: f64,
        memo: &mut BTreeMap<(DnfState, usize), f64>,
    ) -> f64 {
        if depth == 0 || *s == DnfState::Trap {
            return 0.0;
        }
        if let Some(v) = memo.get(&(s.clone(), depth)) {
            return *v;
        }
        let v = p
            .available_actions(s)
            .into_iter()
            .map(|a| q(p, s, a, depth, g, memo))
            .fold(f64::NEG_INFINITY, f64::max);
        memo.insert((s.clone(), depth), v);
        v
    }
    fn q(
        p: &RoutingProblem<'_>,
        s: &DnfState,
        a: DnfAction,
        depth: usize,
        g: f64,
        memo: &mut BTreeMap<(DnfState, usize), f64>,
    ) -> f64 {
        p.transition(s, a)
            .expect("enabled action")
            .into_iter()
            .filter(|o| o.probability > 0.0)
            .map(|o| o.probability * (o.reward + g * value(p, &o.state, depth - 1, g, memo)))
            .sum()
    }
    let mut memo = BTreeMap::new();
    let mut best = (f64::NEG_INFINITY, DnfAction::Terminal);
    for a in problem.available_actions(state) {
        let v = q(problem, state, a, depth, discount, &mut memo);
        if v > best.0 + 1e-12 {
            best = (v, a);
        }
    }
    best
}
