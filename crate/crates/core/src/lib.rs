//! Routing for delay-tolerant networks with dependent node failures.
//!
//! Node outages follow a two-state repairable CTMC; transmissions can
//! additionally fail at random. Each forwarding decision is posed as a
//! POMDP over (bundle location, time, observed receiver states) and solved
//! online with PO-UCT. Contact graph routing with and without custody
//! retransmission serves as the baseline, and a discrete-event simulator
//! compares all three.

pub mod cgr;
pub mod contact_plan;
pub mod dnf;
pub mod failure_model;
pub mod lttg;
pub mod pomcp;
pub mod sim;

pub use contact_plan::{Contact, ContactId, ContactPlan, NodeId, PlanGenerator, Tick};
pub use failure_model::{FailureModel, FunctionalState};
pub use lttg::LttgMatrix;
