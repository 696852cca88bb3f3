//! Hidden failure behaviour of the simulated network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::contact_plan::{NodeId, Tick};
use crate::failure_model::{FailureModel, FunctionalState};

use super::streams;

/// Per-node on/off trajectories. Every node starts operational at time 0 and
/// flips state at each recorded toggle time.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    toggles: Vec<Vec<f64>>,
}

impl GroundTruth {
    /// Samples independent CTMC trajectories up to (at least) `until`.
    /// Each node draws from its own stream, so trajectories do not depend on
    /// `until` or on the number of nodes sampled before it.
    pub fn sample(model: &FailureModel, node_count: u32, until: Tick, seed: u64) -> Self {
        let up = Exp::new(model.lambda()).expect("positive failure rate");
        let down = Exp::new(model.mu()).expect("positive repair rate");
        let toggles = (0..node_count)
            .map(|n| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(streams::GROUND_TRUTH + u64::from(n));
                let mut times = Vec::new();
                let mut now = 0.0;
                let mut operational = true;
                while now <= until as f64 {
                    let hold: f64 = if operational { up.sample(&mut rng) } else { down.sample(&mut rng) };
                    now += hold;
                    if now.is_finite() && now <= until as f64 {
                        times.push(now);
                    } else {
                        break;
                    }
                    operational = !operational;
                }
                times
            })
            .collect();
        Self { toggles }
    }

    /// Hand-written trajectories; `toggles[n]` must be non-decreasing.
    pub fn scripted(toggles: Vec<Vec<f64>>) -> Self {
        debug_assert!(toggles.iter().all(|t| t.windows(2).all(|w| w[0] <= w[1])));
        Self { toggles }
    }

    pub fn always_up(node_count: u32) -> Self {
        Self {
            toggles: vec![Vec::new(); node_count as usize],
        }
    }

    pub fn node_count(&self) -> usize {
        self.toggles.len()
    }

    pub fn functional_at(&self, node: NodeId, tick: Tick) -> FunctionalState {
        let Some(times) = self.toggles.get(node.index()) else {
            return FunctionalState::Operational;
        };
        let flips = times.partition_point(|&x| x <= tick as f64);
        if flips % 2 == 0 {
            FunctionalState::Operational
        } else {
            FunctionalState::Failed
        }
    }

    /// Fraction of `[0, until)` spent operational, integrated exactly over
    /// the toggle times.
    pub fn operational_fraction(&self, node: NodeId, until: f64) -> f64 {
        let mut up_time = 0.0;
        let mut last = 0.0;
        let mut operational = true;
        for &t in &self.toggles[node.index()] {
            if t >= until {
                break;
            }
            if operational {
                up_time += t - last;
            }
            last = t;
            operational = !operational;
        }
        if operational {
            up_time += until - last;
        }
        up_time / until
    }
}

/// Independent transmission failures (noise), keyed by bundle and attempt so
/// that the k-th transmission of a bundle has the same fate under every router.
#[derive(Debug, Clone, PartialEq)]
pub enum TxFailures {
    Never,
    Seeded { seed: u64, p: f64 },
    /// Attempts listed here fail, every other attempt succeeds.
    Scripted(Vec<(u32, u32)>),
}

impl TxFailures {
    pub fn failed(&self, bundle: u32, attempt: u32) -> bool {
        match self {
            TxFailures::Never => false,
            TxFailures::Seeded { seed, p } => {
                if *p <= 0.0 {
                    return false;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(streams::TRANSMISSION);
                rng.set_word_pos((u128::from(bundle) << 40) | (u128::from(attempt) << 4));
                rng.random::<f64>() < *p
            }
            TxFailures::Scripted(list) => list.contains(&(bundle, attempt)),
        }
    }
}
