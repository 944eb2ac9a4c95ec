//! Policy optimization for finite-horizon adversarial MDPs when the learner
//! only observes the total loss of each episode.
//!
//! * [`mdp`] and [`dp`]: tabular MDP types and exact dynamic programming
//!   (occupancy, Q/V, the trajectory-level U/W functions, hindsight optimum).
//! * [`env`]: episode simulation and oblivious adversaries, including the
//!   lower-bound construction.
//! * [`known`]: the learner for known dynamics.
//! * [`confidence`] and [`unknown`]: Bernstein confidence sets, occupancy
//!   bounds and the learner for unknown dynamics.

pub mod confidence;
pub mod dp;
pub mod env;
pub mod error;
pub mod format;
pub mod known;
pub mod mdp;
pub mod mwu;
pub mod rng;
pub mod unknown;

pub use error::{Error, Result};

use env::EpisodeFeedback;
use mdp::Policy;

/// A learner sees its own policy and the aggregate feedback of each episode,
/// nothing else.
pub trait Learner {
    /// Policy to play in the next episode.
    fn policy(&self) -> &Policy;

    fn observe(&mut self, feedback: &EpisodeFeedback) -> Result<()>;
}

/// Relative slack allowed when checking the runtime bounds.
const BOUND_SLACK: f64 = 1e-9;

pub(crate) fn check_bound(what: &str, value: f64, cap: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::NonFinite(what.to_string()));
    }
    if value < -BOUND_SLACK || value > cap * (1.0 + BOUND_SLACK) + BOUND_SLACK {
        return Err(Error::Invariant(format!("{what} = {value} exceeds {cap}")));
    }
    Ok(())
}

/// Running maxima of the quantities whose bounds are checked on every update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundTracker {
    pub updates: usize,
    /// `b` (known) or `b̃ + b̄` (unknown).
    pub max_local_bonus: f64,
    pub max_exploration_bonus: f64,
    pub max_transition_bonus: f64,
    /// `B` (known) or `B̂` (unknown).
    pub max_backup: f64,
    /// `max |η (Û - B)|`.
    pub max_exponent: f64,
}

impl BoundTracker {
    fn record_known(&mut self, local: f64, backup: f64, exponent: f64) {
        self.updates += 1;
        self.max_local_bonus = self.max_local_bonus.max(local);
        self.max_exploration_bonus = self.max_exploration_bonus.max(local);
        self.max_backup = self.max_backup.max(backup);
        self.max_exponent = self.max_exponent.max(exponent);
    }

    fn record_unknown(&mut self, tilde: f64, bar: f64, local: f64, backup: f64, exponent: f64) {
        self.updates += 1;
        self.max_local_bonus = self.max_local_bonus.max(local);
        self.max_exploration_bonus = self.max_exploration_bonus.max(tilde);
        self.max_transition_bonus = self.max_transition_bonus.max(bar);
        self.max_backup = self.max_backup.max(backup);
        self.max_exponent = self.max_exponent.max(exponent);
    }

    pub fn merge(&mut self, other: &BoundTracker) {
        self.updates += other.updates;
        self.max_local_bonus = self.max_local_bonus.max(other.max_local_bonus);
        self.max_exploration_bonus = self.max_exploration_bonus.max(other.max_exploration_bonus);
        self.max_transition_bonus = self.max_transition_bonus.max(other.max_transition_bonus);
        self.max_backup = self.max_backup.max(other.max_backup);
        self.max_exponent = self.max_exponent.max(other.max_exponent);
    }
}
