//! Scheduled contact plans.
//!
//! A plan is an immutable list of unidirectional contacts over a fixed node
//! set. Windows are closed intervals `[t_start, t_end]` in integer ticks.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Discrete simulation time. One tick is one second of the benchmark scenarios.
pub type Tick = u64;

/// Identifier of a contact within its plan.
pub type ContactId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

/// A unidirectional transmission opportunity from `src` to `dst`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Contact {
    pub id: ContactId,
    pub src: NodeId,
    pub dst: NodeId,
    pub t_start: Tick,
    pub t_end: Tick,
    pub t_prop: Tick,
}

impl Contact {
    pub fn is_active_at(&self, t: Tick) -> bool {
        self.t_start <= t && t <= self.t_end
    }

    /// Greedy departure tick for a bundle ready at `t`, if the window has not passed.
    pub fn departure(&self, t: Tick) -> Option<Tick> {
        let dep = t.max(self.t_start);
        (dep <= self.t_end).then_some(dep)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing `nodes,<N>` header")]
    MissingHeader,
    #[error("invalid plan: {0}")]
    Invalid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactPlan {
    node_count: u32,
    contacts: Vec<Contact>,
    horizon: Tick,
    by_id: HashMap<ContactId, usize>,
    outgoing: Vec<Vec<usize>>,
}

impl ContactPlan {
    /// Builds a validated plan. Contacts are stored in ascending id order.
    /// The horizon defaults to the latest `t_end`; an explicit override must
    /// not cut any contact short.
    pub fn new(
        node_count: u32,
        mut contacts: Vec<Contact>,
        horizon: Option<Tick>,
    ) -> Result<Self, PlanError> {
        if node_count == 0 {
            return Err(PlanError::Invalid("node count must be positive".into()));
        }
        contacts.sort_by_key(|c| c.id);
        let mut by_id = HashMap::with_capacity(contacts.len());
        let mut outgoing = vec![Vec::new(); node_count as usize];
        for (idx, c) in contacts.iter().enumerate() {
            validate_contact(c, node_count).map_err(PlanError::Invalid)?;
            if by_id.insert(c.id, idx).is_some() {
                return Err(PlanError::Invalid(format!("duplicate contact id {}", c.id)));
            }
            outgoing[c.src.index()].push(idx);
        }
        let latest = contacts.iter().map(|c| c.t_end).max().unwrap_or(0);
        let horizon = match horizon {
            Some(h) if h < latest => {
                return Err(PlanError::Invalid(format!(
                    "horizon {h} ends before the last contact ({latest})"
                )))
            }
            Some(h) => h,
            None => latest,
        };
        Ok(Self {
            node_count,
            contacts,
            horizon,
            by_id,
            outgoing,
        })
    }

    pub fn node_count(&self) -> u32 {
        self.node_count
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count).map(NodeId)
    }

    pub fn contacts(&self) -> &[Contact] {
        &self.contacts
    }

    pub fn horizon(&self) -> Tick {
        self.horizon
    }

    pub fn contact(&self, id: ContactId) -> Option<&Contact> {
        self.by_id.get(&id).map(|&i| &self.contacts[i])
    }

    /// Contacts whose source is `node`, in id order.
    pub fn outgoing(&self, node: NodeId) -> impl Iterator<Item = &Contact> + '_ {
        self.outgoing
            .get(node.index())
            .into_iter()
            .flatten()
            .map(move |&i| &self.contacts[i])
    }

    /// All contacts open at tick `t` (closed windows).
    pub fn contacts_at_time(&self, t: Tick) -> impl Iterator<Item = &Contact> + '_ {
        self.contacts.iter().filter(move |c| c.is_active_at(t))
    }

    /// Contacts out of `node` whose window has not yet closed at `t`:
    /// both currently open and future contacts.
    pub fn schedulable_contacts(&self, node: NodeId, t: Tick) -> impl Iterator<Item = &Contact> + '_ {
        self.outgoing(node).filter(move |c| c.t_end >= t)
    }

    /// Parses the line-oriented plan format:
    ///
    /// ```text
    /// # comment
    /// nodes,8
    /// horizon,100          (optional)
    /// id,src,dst,t_start,t_end,t_prop
    /// ```
    pub fn parse(text: &str) -> Result<Self, PlanError> {
        let mut node_count: Option<u32> = None;
        let mut horizon: Option<Tick> = None;
        let mut contacts = Vec::new();
        let mut seen = HashMap::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| PlanError::Parse { line: line_no, msg };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();

            let Some(nodes) = node_count else {
                if fields.len() != 2 || fields[0] != "nodes" {
                    return Err(err(format!("expected `nodes,<N>`, found `{line}`")));
                }
                let n: u32 = fields[1]
                    .parse()
                    .map_err(|_| err(format!("bad node count `{}`", fields[1])))?;
                if n == 0 {
                    return Err(err("node count must be positive".into()));
                }
                node_count = Some(n);
                continue;
            };

            if fields[0] == "horizon" {
                if fields.len() != 2 {
                    return Err(err(format!("expected `horizon,<T>`, found `{line}`")));
                }
                let h = fields[1]
                    .parse()
                    .map_err(|_| err(format!("bad horizon `{}`", fields[1])))?;
                horizon = Some(h);
                continue;
            }

            if fields.len() != 6 {
                return Err(err(format!("expected 6 fields, found {}", fields.len())));
            }
            let mut nums = [0u64; 6];
            for (slot, f) in nums.iter_mut().zip(&fields) {
                *slot = f
                    .parse()
                    .map_err(|_| err(format!("`{f}` is not a non-negative integer")))?;
            }
            let id = ContactId::try_from(nums[0]).map_err(|_| err("contact id too large".into()))?;
            let node = |v: u64| u32::try_from(v).map(NodeId).map_err(|_| err(format!("node {v} out of range")));
            let c = Contact {
                id,
                src: node(nums[1])?,
                dst: node(nums[2])?,
                t_start: nums[3],
                t_end: nums[4],
                t_prop: nums[5],
            };
            validate_contact(&c, nodes).map_err(err)?;
            if let Some(prev) = seen.insert(c.id, line_no) {
                return Err(err(format!("duplicate contact id {} (first on line {prev})", c.id)));
            }
            contacts.push(c);
        }

        let node_count = node_count.ok_or(PlanError::MissingHeader)?;
        Self::new(node_count, contacts, horizon)
    }

    /// Serializes in the format accepted by [`ContactPlan::parse`]. The
    /// horizon line is only written when it differs from the latest `t_end`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "nodes,{}", self.node_count).unwrap();
        let latest = self.contacts.iter().map(|c| c.t_end).max().unwrap_or(0);
        if self.horizon != latest {
            writeln!(out, "horizon,{}", self.horizon).unwrap();
        }
        for c in &self.contacts {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                c.id, c.src, c.dst, c.t_start, c.t_end, c.t_prop
            )
            .unwrap();
        }
        out
    }
}

fn validate_contact(c: &Contact, node_count: u32) -> Result<(), String> {
    if c.src.0 >= node_count || c.dst.0 >= node_count {
        return Err(format!(
            "contact {} references node outside 0..{node_count}",
            c.id
        ));
    }
    if c.src == c.dst {
        return Err(format!("contact {} has src = dst = {}", c.id, c.src));
    }
    if c.t_start > c.t_end {
        return Err(format!(
            "contact {} starts after it ends ({} > {})",
            c.id, c.t_start, c.t_end
        ));
    }
    Ok(())
}

/// Parameters of the random benchmark plan generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanGenerator {
    pub node_count: u32,
    pub bidirectional_contacts: u32,
    pub horizon: Tick,
    pub contact_duration: Tick,
    pub t_prop: Tick,
}

impl Default for PlanGenerator {
    fn default() -> Self {
        Self {
            node_count: 8,
            bidirectional_contacts: 70,
            horizon: 100,
            contact_duration: 10,
            t_prop: 2,
        }
    }
}

impl PlanGenerator {
    /// Draws a random plan. Each bidirectional contact picks a uniform
    /// unordered node pair and a uniform start in `[0, horizon - duration]`
    /// and is emitted as two mirrored contacts with ids `2k` and `2k + 1`.
    pub fn generate(&self, seed: u64) -> Result<ContactPlan, PlanError> {
        if self.node_count < 2 {
            return Err(PlanError::InvalidArgument(format!(
                "need at least 2 nodes, got {}",
                self.node_count
            )));
        }
        if self.contact_duration > self.horizon {
            return Err(PlanError::InvalidArgument(format!(
                "contact duration {} exceeds horizon {}",
                self.contact_duration, self.horizon
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let latest_start = self.horizon - self.contact_duration;
        let mut contacts = Vec::with_capacity(2 * self.bidirectional_contacts as usize);
        for k in 0..self.bidirectional_contacts {
            let a = rng.random_range(0..self.node_count);
            let mut b = rng.random_range(0..self.node_count - 1);
            if b >= a {
                b += 1;
            }
            let start = rng.random_range(0..=latest_start);
            for (id, src, dst) in [(2 * k, a, b), (2 * k + 1, b, a)] {
                contacts.push(Contact {
                    id,
                    src: NodeId(src),
                    dst: NodeId(dst),
                    t_start: start,
                    t_end: start + self.contact_duration,
                    t_prop: self.t_prop,
                });
            }
        }
        ContactPlan::new(self.node_count, contacts, Some(self.horizon))
    }
}
