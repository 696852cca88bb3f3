//! Contact graph routing baselines.
//!
//! Only the earliest-delivery core of CGR is implemented: given a bundle at
//! `src` at tick `t`, find the contact sequence that delivers it to `dst` as
//! early as possible, assuming every hop succeeds. Contacts are used greedily
//! (depart at `max(ready, t_start)`, never after `t_end`).

use crate::contact_plan::{ContactId, ContactPlan, NodeId, Tick};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub hops: Vec<ContactId>,
    pub delivery_time: Tick,
}

impl Route {
    pub fn first_hop(&self) -> Option<ContactId> {
        self.hops.first().copied()
    }

    /// Replays the route from `(src, t)`; `None` if it does not chain or a
    /// window is missed. Returns the arrival tick.
    pub fn replay(&self, plan: &ContactPlan, src: NodeId, t: Tick) -> Option<Tick> {
        let mut at = src;
        let mut now = t;
        for &id in &self.hops {
            let c = plan.contact(id)?;
            if c.src != at {
                return None;
            }
            now = c.departure(now)? + c.t_prop;
            at = c.dst;
        }
        Some(now)
    }
}

/// Earliest-delivery route. Ties are broken by fewer hops, then by the
/// lexicographically smallest contact-id sequence.
///
/// Runs in two passes. A hop-indexed relaxation gives, for each hop count
/// `k`, the earliest arrival at every node using exactly `k` contacts; the
/// best `(delivery, hops)` pair is read off directly. A backward pass then
/// computes, per node and remaining hop budget, the latest tick from which
/// the target delivery is still met, which lets a forward greedy walk pick
/// the smallest feasible contact id at every hop.
pub fn cgr_best_route(plan: &ContactPlan, src: NodeId, t: Tick, dst: NodeId) -> Option<Route> {
    if src == dst {
        return Some(Route {
            hops: Vec::new(),
            delivery_time: t,
        });
    }
    let n = plan.node_count() as usize;
    if src.index() >= n || dst.index() >= n {
        return None;
    }
    // Simple paths suffice: a loop never arrives earlier with fewer hops.
    let max_hops = n - 1;

    let mut arrival: Vec<Option<Tick>> = vec![None; n];
    arrival[src.index()] = Some(t);
    let mut best: Option<(Tick, usize)> = None;
    for k in 1..=max_hops {
        let mut next: Vec<Option<Tick>> = vec![None; n];
        for c in plan.contacts() {
            let Some(ready) = arrival[c.src.index()] else { continue };
            let Some(dep) = c.departure(ready) else { continue };
            let arr = dep + c.t_prop;
            let slot = &mut next[c.dst.index()];
            if slot.is_none_or(|cur| arr < cur) {
                *slot = Some(arr);
            }
        }
        if let Some(a) = next[dst.index()] {
            if best.is_none_or(|(b, _)| a < b) {
                best = Some((a, k));
            }
        }
        if next.iter().all(Option::is_none) {
            break;
        }
        arrival = next;
    }
    let (delivery, hops) = best?;

    // latest[j][v]: latest tick at v from which dst is reached by `delivery`
    // in exactly j more hops.
    let mut latest: Vec<Vec<Option<Tick>>> = Vec::with_capacity(hops + 1);
    let mut zero = vec![None; n];
    zero[dst.index()] = Some(delivery);
    latest.push(zero);
    for j in 1..=hops {
        let prev = &latest[j - 1];
        let mut cur: Vec<Option<Tick>> = vec![None; n];
        for c in plan.contacts() {
            let Some(deadline) = prev[c.dst.index()] else { continue };
            let Some(last_dep) = deadline.checked_sub(c.t_prop) else { continue };
            let last_ready = last_dep.min(c.t_end);
            if last_ready < c.t_start {
                continue;
            }
            let slot = &mut cur[c.src.index()];
            if slot.is_none_or(|v| last_ready > v) {
                *slot = Some(last_ready);
            }
        }
        latest.push(cur);
    }

    let mut route = Vec::with_capacity(hops);
    let mut at = src;
    let mut now = t;
    for remaining in (0..hops).rev() {
        let deadline = &latest[remaining];
        let hop = plan.outgoing(at).find(|c| {
            c.departure(now)
                .zip(deadline[c.dst.index()])
                .is_some_and(|(dep, limit)| dep + c.t_prop <= limit)
        })?;
        now = hop.departure(now)? + hop.t_prop;
        at = hop.dst;
        route.push(hop.id);
    }
    debug_assert_eq!((at, now <= delivery), (dst, true));
    Some(Route {
        hops: route,
        delivery_time: delivery,
    })
}

/// Baseline forwarding behaviour after a failed transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgrMode {
    /// Bundles are dropped on the first failed transmission.
    Plain,
    /// Custody reports: on timeout, recompute from the current node and retry.
    Custody,
}

/// Next-hop decision shared by both baselines: the first contact of the
/// current best route.
pub fn cgr_next_hop(plan: &ContactPlan, at: NodeId, now: Tick, dst: NodeId) -> Option<ContactId> {
    cgr_best_route(plan, at, now, dst).and_then(|r| r.first_hop())
}

impl CgrMode {
    /// Whether a bundle survives a failed transmission and is routed again
    /// at the custody timeout.
    pub fn retries_after_failure(self) -> bool {
        matches!(self, CgrMode::Custody)
    }
}
