//! Two-state repairable system (operational / failed) as a continuous-time
//! Markov chain with failure rate `lambda` and repair rate `mu`.

use thiserror::Error;

use crate::contact_plan::Tick;

pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FunctionalState {
    Operational,
    Failed,
}

impl FunctionalState {
    fn index(self) -> usize {
        match self {
            FunctionalState::Operational => 0,
            FunctionalState::Failed => 1,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("rates must be positive and finite (lambda = {lambda}, mu = {mu})")]
    Rates { lambda: f64, mu: f64 },
    #[error("transmission failure probability {0} outside [0, 1]")]
    TxProbability(f64),
    #[error("precision epsilon must be positive, got {0}")]
    Epsilon(f64),
}

/// Row-major 2x2 matrix indexed by `[from][to]`, operational first.
pub type TransitionMatrix = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureModel {
    lambda: f64,
    mu: f64,
    p_tx_fail: f64,
    epsilon: f64,
    cutoff: Option<Cutoff>,
}

/// Elapsed-time thresholds after which the stationary distribution replaces
/// the exact transient probability, one per observed state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Cutoff {
    from_operational: Tick,
    from_failed: Tick,
}

impl FailureModel {
    /// Model with the cut-off optimization enabled at [`DEFAULT_EPSILON`].
    pub fn new(lambda: f64, mu: f64, p_tx_fail: f64) -> Result<Self, ModelError> {
        if !(lambda > 0.0 && mu > 0.0 && lambda.is_finite() && mu.is_finite()) {
            return Err(ModelError::Rates { lambda, mu });
        }
        if !(0.0..=1.0).contains(&p_tx_fail) {
            return Err(ModelError::TxProbability(p_tx_fail));
        }
        let mut model = Self {
            lambda,
            mu,
            p_tx_fail,
            epsilon: DEFAULT_EPSILON,
            cutoff: None,
        };
        model.cutoff = Some(model.cutoffs());
        Ok(model)
    }

    pub fn from_mtbf_mttr(mtbf: f64, mttr: f64, p_tx_fail: f64) -> Result<Self, ModelError> {
        Self::new(1.0 / mtbf, 1.0 / mttr, p_tx_fail)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self, ModelError> {
        if !(epsilon > 0.0) {
            return Err(ModelError::Epsilon(epsilon));
        }
        self.epsilon = epsilon;
        self.cutoff = Some(self.cutoffs());
        Ok(self)
    }

    /// Disables the cut-off so predictions always use the exact `P(t)`.
    pub fn exact(mut self) -> Self {
        self.cutoff = None;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn mtbf(&self) -> f64 {
        1.0 / self.lambda
    }

    pub fn mttr(&self) -> f64 {
        1.0 / self.mu
    }

    pub fn p_tx_fail(&self) -> f64 {
        self.p_tx_fail
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `P(t) = e^{Qt}` in closed form.
    pub fn transition_matrix(&self, t: f64) -> TransitionMatrix {
        let (l, m) = (self.lambda, self.mu);
        let s = l + m;
        let decay = (-s * t).exp();
        let up_up = (m + l * decay) / s;
        let down_down = (l + m * decay) / s;
        [[up_up, 1.0 - up_up], [1.0 - down_down, down_down]]
    }

    /// Stationary distribution `(pi_up, pi_down)`.
    pub fn steady_state(&self) -> (f64, f64) {
        let s = self.lambda + self.mu;
        (self.mu / s, self.lambda / s)
    }

    /// Smallest integer tick `T` with `T > -(1/(l+m)) ln(eps (l+m)/l)`, so that
    /// `|P_up,up(t) - pi_up| <= eps` for all `t >= T`. Zero when the bound is
    /// not positive.
    pub fn derive_cutoff(&self) -> Tick {
        cutoff_bound(self.lambda, self.lambda + self.mu, self.epsilon)
    }

    /// The cut-off currently in effect for an observation of `state`, if enabled.
    pub fn cutoff_for(&self, state: FunctionalState) -> Option<Tick> {
        self.cutoff.map(|c| match state {
            FunctionalState::Operational => c.from_operational,
            FunctionalState::Failed => c.from_failed,
        })
    }

    fn cutoffs(&self) -> Cutoff {
        let s = self.lambda + self.mu;
        // |P_down,up(t) - pi_up| = mu/(l+m) e^{-(l+m)t}; same shape with mu in
        // place of lambda.
        Cutoff {
            from_operational: self.derive_cutoff(),
            from_failed: cutoff_bound(self.mu, s, self.epsilon),
        }
    }

    /// Probability that a node is operational at tick `arrival`, given its
    /// last observation (tick, state). Unobserved nodes use the stationary
    /// distribution.
    pub fn predict_functional(
        &self,
        last_obs: Option<(Tick, FunctionalState)>,
        arrival: Tick,
    ) -> f64 {
        let Some((obs_tick, state)) = last_obs else {
            return self.steady_state().0;
        };
        debug_assert!(arrival >= obs_tick, "arrival precedes observation");
        let elapsed = arrival.saturating_sub(obs_tick);
        if let Some(cut) = self.cutoff_for(state) {
            if elapsed >= cut {
                return self.steady_state().0;
            }
        }
        self.transition_matrix(elapsed as f64)[state.index()][FunctionalState::Operational.index()]
    }

    /// Overall success probability of one transmission to a receiver that is
    /// operational with probability `p_functional`.
    pub fn transmission_success_probability(&self, p_functional: f64) -> f64 {
        p_functional * (1.0 - self.p_tx_fail)
    }
}

fn cutoff_bound(weight: f64, total: f64, epsilon: f64) -> Tick {
    let arg = epsilon * total / weight;
    if arg >= 1.0 {
        return 0;
    }
    let bound = -arg.ln() / total;
    bound.floor() as Tick + 1
}
