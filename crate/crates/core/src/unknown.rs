//! Policy optimization with aggregate bandit feedback when the transition
//! kernel is unknown.
//!
//! The learner replaces the exact occupancy in the estimator by the upper
//! occupancy bound over a Bernstein confidence set, adds a transition
//! uncertainty term to the local bonus, and backs the bonus up under the
//! kernel in the set that maximizes it.

use ndarray::{Array2, Array3};

use crate::confidence::{compute_occupancy_bounds, ConfidencePolytope, Counters, Direction, OccupancyBounds};
use crate::env::EpisodeFeedback;
use crate::error::{Error, Result};
use crate::known::{theorem_learning_rate, KnownDynConfig};
use crate::mdp::{Dims, Policy};
use crate::mwu::{max_exponent, policy_improve};
use crate::{check_bound, BoundTracker, Learner};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnknownDynConfig {
    pub eta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Episode budget `K`, used in the confidence radius.
    pub num_episodes: usize,
    /// Occupancy bounds are recomputed every this many episodes; values
    /// above one reuse stale bounds between refreshes.
    pub recompute_period: usize,
}

impl UnknownDynConfig {
    pub fn theorem_defaults(dims: Dims, num_episodes: usize, delta: f64, with_log_factor: bool) -> Self {
        let eta = theorem_learning_rate(
            dims.horizon,
            dims.num_states,
            dims.num_actions,
            num_episodes,
            delta,
            with_log_factor,
        );
        Self {
            eta,
            gamma: 2.0 * eta * dims.horizon as f64,
            delta,
            num_episodes,
            recompute_period: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        KnownDynConfig {
            eta: self.eta,
            gamma: self.gamma,
            delta: self.delta,
        }
        .validate()?;
        if self.num_episodes == 0 {
            return Err(Error::InvalidParameter("episode budget must be positive".into()));
        }
        if self.recompute_period == 0 {
            return Err(Error::InvalidParameter("recompute period must be positive".into()));
        }
        Ok(())
    }
}

/// `Û_h(s,a) = 1{(s_h, a_h) = (s, a)} · L / (μ̄_h(s) π_h(a|s) + γ)`.
pub fn estimate_u_unknown(
    bounds: &OccupancyBounds,
    policy: &Policy,
    feedback: &EpisodeFeedback,
    gamma: f64,
) -> Array3<f64> {
    let mut u_hat = Array3::zeros(policy.dims().shape3());
    for (h, &(s, a)) in feedback.trajectory.steps.iter().enumerate() {
        u_hat[[h, s, a]] = feedback.aggregate_loss / (bounds.upper_sa(policy, h, s, a) + gamma);
    }
    u_hat
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalBonuses {
    /// `b̃_h(s) = Σ_a 3γHπ / (μ̄_h(s)π + γ)`.
    pub exploration: Array2<f64>,
    /// `b̄_h(s) = Σ_a Hπ (μ̄_h(s,a) - μ̲_h(s,a)) / (μ̄_h(s)π + γ)`.
    pub transition: Array2<f64>,
    /// `b = b̃ + b̄`.
    pub total: Array2<f64>,
}

pub fn local_bonuses_unknown(
    bounds: &OccupancyBounds,
    policy: &Policy,
    gamma: f64,
    horizon: usize,
) -> LocalBonuses {
    let dims = policy.dims();
    let h_f = horizon as f64;
    let shape = (dims.horizon, dims.num_states);
    let mut exploration = Array2::zeros(shape);
    let mut transition = Array2::zeros(shape);
    for h in 0..dims.horizon {
        for s in 0..dims.num_states {
            let upper = bounds.upper[[h, s]];
            let lower = bounds.lower[[h, s]];
            let mut tilde = 0.0;
            let mut bar = 0.0;
            for a in 0..dims.num_actions {
                let pi = policy.prob(h, s, a);
                if pi == 0.0 {
                    continue;
                }
                let denom = upper * pi + gamma;
                if denom == 0.0 {
                    continue;
                }
                tilde += 3.0 * gamma * h_f * pi / denom;
                bar += h_f * pi * (upper * pi - lower * pi) / denom;
            }
            exploration[[h, s]] = tilde;
            transition[[h, s]] = bar;
        }
    }
    let total = &exploration + &transition;
    LocalBonuses {
        exploration,
        transition,
        total,
    }
}

/// `B̂_h(s,a) = b_h(s) + max_{p' in set} Σ_{s'} p'(s') Σ_{a'} π_{h+1}(a'|s') B̂_{h+1}(s',a')`.
pub fn optimistic_bonus_backup(
    policy: &Policy,
    polytope: &ConfidencePolytope,
    bonus: &Array2<f64>,
) -> Result<Array3<f64>> {
    let dims = policy.dims();
    if polytope.horizon() != dims.horizon
        || polytope.num_states() != dims.num_states
        || polytope.num_actions() != dims.num_actions
        || bonus.dim() != (dims.horizon, dims.num_states)
    {
        return Err(Error::Dimension(
            "policy, confidence set and bonus disagree on dimensions".into(),
        ));
    }
    let (horizon, num_states, num_actions) = dims.shape3();
    let mut backup = Array3::zeros(dims.shape3());
    let mut weights = vec![0.0; num_states];
    let mut order = Vec::with_capacity(num_states);
    for h in (0..horizon).rev() {
        if h + 1 < horizon {
            for (next, w) in weights.iter_mut().enumerate() {
                *w = (0..num_actions)
                    .map(|a| policy.prob(h + 1, next, a) * backup[[h + 1, next, a]])
                    .sum();
            }
        }
        for s in 0..num_states {
            for a in 0..num_actions {
                let continuation = if h + 1 < horizon {
                    polytope.optimize_row_with(h, s, a, &weights, Direction::Max, &mut order)
                } else {
                    0.0
                };
                backup[[h, s, a]] = bonus[[h, s]] + continuation;
            }
        }
    }
    Ok(backup)
}

#[derive(Debug, Clone)]
pub struct UnknownScratch {
    pub u_hat: Array3<f64>,
    pub local: LocalBonuses,
    pub bonus: Array3<f64>,
}

#[derive(Debug, Clone)]
pub struct UnknownLearner {
    dims: Dims,
    initial_state: usize,
    config: UnknownDynConfig,
    policy: Policy,
    counters: Counters,
    polytope: ConfidencePolytope,
    bounds: OccupancyBounds,
    episode: usize,
    scratch: Option<UnknownScratch>,
    tracker: BoundTracker,
}

impl UnknownLearner {
    pub fn new(dims: Dims, initial_state: usize, config: UnknownDynConfig) -> Result<Self> {
        config.validate()?;
        if initial_state >= dims.num_states {
            return Err(Error::Dimension(format!("initial state {initial_state} out of range")));
        }
        let policy = Policy::uniform(dims);
        let counters = Counters::new(dims.horizon, dims.num_states, dims.num_actions);
        let polytope = ConfidencePolytope::from_counts(&counters, config.delta, config.num_episodes)?;
        let bounds = compute_occupancy_bounds(&policy, &polytope, initial_state)?;
        Ok(Self {
            dims,
            initial_state,
            config,
            policy,
            counters,
            polytope,
            bounds,
            episode: 0,
            scratch: None,
            tracker: BoundTracker::default(),
        })
    }

    pub fn config(&self) -> &UnknownDynConfig {
        &self.config
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn polytope(&self) -> &ConfidencePolytope {
        &self.polytope
    }

    /// Bounds used for the next update (computed from earlier episodes only).
    pub fn occupancy_bounds(&self) -> &OccupancyBounds {
        &self.bounds
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn scratch(&self) -> Option<&UnknownScratch> {
        self.scratch.as_ref()
    }

    pub fn bounds(&self) -> &BoundTracker {
        &self.tracker
    }

    pub fn step(&mut self, feedback: &EpisodeFeedback) -> Result<()> {
        let h = self.dims.horizon as f64;
        let gamma = self.config.gamma;
        let eta = self.config.eta;

        let u_hat = estimate_u_unknown(&self.bounds, &self.policy, feedback, gamma);
        let max_estimate = u_hat.iter().copied().fold(0.0, f64::max);
        check_bound("U estimate", max_estimate, h / gamma)?;

        let local = local_bonuses_unknown(&self.bounds, &self.policy, gamma, self.dims.horizon);
        let max_tilde = local.exploration.iter().copied().fold(0.0, f64::max);
        let max_bar = local.transition.iter().copied().fold(0.0, f64::max);
        let max_local = local.total.iter().copied().fold(0.0, f64::max);
        check_bound("exploration bonus b~", max_tilde, 3.0 * h)?;
        check_bound("transition bonus b-", max_bar, h)?;
        check_bound("local bonus b", max_local, 4.0 * h)?;

        let bonus = optimistic_bonus_backup(&self.policy, &self.polytope, &local.total)?;
        let max_backup = bonus.iter().copied().fold(0.0, f64::max);
        check_bound("optimistic bonus backup B^", max_backup, 4.0 * h * h)?;

        let exponent = max_exponent(&u_hat, &bonus, eta);
        check_bound("update exponent", exponent, (eta * max_estimate).max(eta * 4.0 * h * h))?;
        self.tracker.record_unknown(max_tilde, max_bar, max_local, max_backup, exponent);

        self.policy = policy_improve(&self.policy, &u_hat, &bonus, eta)?;
        self.counters.update(&feedback.trajectory)?;
        self.polytope =
            ConfidencePolytope::from_counts(&self.counters, self.config.delta, self.config.num_episodes)?;
        self.episode += 1;
        if self.episode.is_multiple_of(self.config.recompute_period) {
            self.bounds = compute_occupancy_bounds(&self.policy, &self.polytope, self.initial_state)?;
        }
        self.scratch = Some(UnknownScratch { u_hat, local, bonus });
        Ok(())
    }
}

impl Learner for UnknownLearner {
    fn policy(&self) -> &Policy {
        &self.policy
    }

    fn observe(&mut self, feedback: &EpisodeFeedback) -> Result<()> {
        self.step(feedback)
    }
}
