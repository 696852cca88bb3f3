//! Latest-time-to-goal matrix.
//!
//! For every ordered pair `(s, d)` the matrix stores the latest tick at which
//! a bundle sitting at `s` can still hope to reach `d`. It ignores link delays,
//! so it over-approximates reachability: `reachable == false` is a proof that
//! the destination is out of reach.

use std::fmt::Write as _;

use crate::contact_plan::{ContactPlan, NodeId, Tick};

const UNREACHABLE: i64 = -1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LttgMatrix {
    node_count: usize,
    /// Row-major `[dst][src]`.
    entries: Vec<i64>,
}

impl LttgMatrix {
    /// Backward sweep from each destination over integer ticks, from the plan
    /// horizon down to 0. At each tick, any contact open at that tick whose
    /// receiver is already known to reach the destination marks its sender,
    /// recording the tick. Additions are closed transitively within a tick.
    pub fn compute(plan: &ContactPlan) -> Self {
        let n = plan.node_count() as usize;
        let mut entries = vec![UNREACHABLE; n * n];
        for d in 0..n {
            entries[d * n + d] = 0;
        }

        // Contacts bucketed by tick so the sweep only touches open ones.
        let horizon = plan.horizon();
        let mut by_tick: Vec<Vec<(usize, usize)>> = vec![Vec::new(); horizon as usize + 1];
        for c in plan.contacts() {
            for t in c.t_start..=c.t_end.min(horizon) {
                by_tick[t as usize].push((c.src.index(), c.dst.index()));
            }
        }

        let mut visited = vec![false; n];
        for dst in 0..n {
            visited.iter_mut().for_each(|v| *v = false);
            visited[dst] = true;
            for time in (0..=horizon).rev() {
                let open = &by_tick[time as usize];
                loop {
                    let mut grew = false;
                    for &(src, rx) in open {
                        if visited[rx] && !visited[src] {
                            entries[dst * n + src] = time as i64;
                            visited[src] = true;
                            grew = true;
                        }
                    }
                    if !grew {
                        break;
                    }
                }
            }
        }
        Self {
            node_count: n,
            entries,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Raw entry: latest tick to leave `src` toward `dst`, `-1` if never.
    pub fn entry(&self, dst: NodeId, src: NodeId) -> i64 {
        self.entries[dst.index() * self.node_count + src.index()]
    }

    /// Whether `dst` may still be reached from `src` at tick `t`.
    pub fn reachable(&self, src: NodeId, dst: NodeId, t: Tick) -> bool {
        if src == dst {
            return true;
        }
        let e = self.entry(dst, src);
        e != UNREACHABLE && t as i64 <= e
    }

    /// Matrix as CSV: one row per destination, one column per source.
    pub fn to_csv(&self) -> String {
        let n = self.node_count;
        let mut out = String::from("dst");
        for s in 0..n {
            write!(out, ",{s}").unwrap();
        }
        out.push('\n');
        for d in 0..n {
            write!(out, "{d}").unwrap();
            for s in 0..n {
                write!(out, ",{}", self.entries[d * n + s]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}
