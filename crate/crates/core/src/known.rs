//! Policy optimization with aggregate bandit feedback when the transition
//! kernel is known.
//!
//! Each episode the learner builds an importance-weighted estimate of the
//! trajectory-level U-function from the single scalar episode loss, computes
//! a local exploration bonus and its Bellman backup under the true dynamics,
//! and takes an exponential-weights step on `Û - B`.

use ndarray::{Array2, Array3};

use crate::dp::{compute_occupancy, q_values_raw};
use crate::env::EpisodeFeedback;
use crate::error::{Error, Result};
use crate::mdp::{OccupancyTable, Policy, TabularMdp};
use crate::mwu::{max_exponent, policy_improve};
use crate::{check_bound, BoundTracker, Learner};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownDynConfig {
    pub eta: f64,
    pub gamma: f64,
    pub delta: f64,
}

/// `ι = ln(H S A K / δ)`.
pub fn log_factor(horizon: usize, num_states: usize, num_actions: usize, num_episodes: usize, delta: f64) -> f64 {
    ((horizon * num_states * num_actions * num_episodes) as f64 / delta).ln()
}

/// `η = c / (H sqrt(S A K) + H² sqrt(K))` with `c = 1`, or `c = sqrt(ι)`
/// when `with_log_factor` is set.
pub fn theorem_learning_rate(
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    num_episodes: usize,
    delta: f64,
    with_log_factor: bool,
) -> f64 {
    let h = horizon as f64;
    let k = num_episodes as f64;
    let sa = (num_states * num_actions) as f64;
    let scale = if with_log_factor {
        log_factor(horizon, num_states, num_actions, num_episodes, delta).sqrt()
    } else {
        1.0
    };
    scale / (h * (sa * k).sqrt() + h * h * k.sqrt())
}

impl KnownDynConfig {
    /// `η` as above and `γ = 2 η H`.
    pub fn theorem_defaults(
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        num_episodes: usize,
        delta: f64,
        with_log_factor: bool,
    ) -> Self {
        let eta = theorem_learning_rate(
            horizon,
            num_states,
            num_actions,
            num_episodes,
            delta,
            with_log_factor,
        );
        Self {
            eta,
            gamma: 2.0 * eta * horizon as f64,
            delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta = {} must be >= 0", self.eta)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma = {} must be > 0", self.gamma)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {} must lie in (0, 1)", self.delta)));
        }
        Ok(())
    }
}

/// `Û_h(s,a) = 1{(s_h, a_h) = (s, a)} · L / (μ_h(s,a) + γ)`.
pub fn estimate_u_known(occupancy: &OccupancyTable, feedback: &EpisodeFeedback, gamma: f64) -> Array3<f64> {
    let mu = occupancy.values();
    let mut u_hat = Array3::zeros(mu.raw_dim());
    for (h, &(s, a)) in feedback.trajectory.steps.iter().enumerate() {
        u_hat[[h, s, a]] = feedback.aggregate_loss / (mu[[h, s, a]] + gamma);
    }
    u_hat
}

/// `b_h(s) = Σ_a 3γHπ_h(a|s) / (μ_h(s)π_h(a|s) + γ)`.
///
/// Terms with `π_h(a|s) = 0` contribute nothing; with `γ = 0` the bonus is
/// identically zero.
pub fn local_bonus_known(occupancy: &OccupancyTable, policy: &Policy, gamma: f64, horizon: usize) -> Array2<f64> {
    let dims = policy.dims();
    let h_f = horizon as f64;
    let mut bonus = Array2::zeros((dims.horizon, dims.num_states));
    for h in 0..dims.horizon {
        for s in 0..dims.num_states {
            let reach = occupancy.state(h, s);
            let mut total = 0.0;
            for a in 0..dims.num_actions {
                let pi = policy.prob(h, s, a);
                if pi > 0.0 && gamma > 0.0 {
                    total += 3.0 * gamma * h_f * pi / (reach * pi + gamma);
                }
            }
            bonus[[h, s]] = total;
        }
    }
    bonus
}

/// Broadcasts a state bonus `b[h, s]` over actions.
pub(crate) fn state_bonus_as_loss(bonus: &Array2<f64>, num_actions: usize) -> Array3<f64> {
    let (horizon, num_states) = bonus.dim();
    Array3::from_shape_fn((horizon, num_states, num_actions), |(h, s, _)| bonus[[h, s]])
}

/// `B_h(s,a) = b_h(s) + Σ_{s',a'} p_h(s'|s,a) π_{h+1}(a'|s') B_{h+1}(s',a')`,
/// i.e. the Q-function of `π` for the state loss `b`.
pub fn bonus_backup_known(mdp: &TabularMdp, policy: &Policy, bonus: &Array2<f64>) -> Array3<f64> {
    let loss = state_bonus_as_loss(bonus, mdp.num_actions());
    q_values_raw(mdp, policy, loss.view()).q
}

#[derive(Debug, Clone)]
pub struct KnownScratch {
    pub u_hat: Array3<f64>,
    pub local_bonus: Array2<f64>,
    pub bonus: Array3<f64>,
}

#[derive(Debug, Clone)]
pub struct KnownLearner {
    mdp: TabularMdp,
    config: KnownDynConfig,
    policy: Policy,
    occupancy: OccupancyTable,
    episode: usize,
    scratch: Option<KnownScratch>,
    bounds: BoundTracker,
}

impl KnownLearner {
    pub fn new(mdp: TabularMdp, config: KnownDynConfig) -> Result<Self> {
        config.validate()?;
        let policy = Policy::uniform(mdp.dims());
        let occupancy = compute_occupancy(&mdp, &policy)?;
        Ok(Self {
            mdp,
            config,
            policy,
            occupancy,
            episode: 0,
            scratch: None,
            bounds: BoundTracker::default(),
        })
    }

    pub fn config(&self) -> &KnownDynConfig {
        &self.config
    }

    pub fn occupancy(&self) -> &OccupancyTable {
        &self.occupancy
    }

    /// Number of completed updates.
    pub fn episode(&self) -> usize {
        self.episode
    }

    /// Tables from the most recent update.
    pub fn scratch(&self) -> Option<&KnownScratch> {
        self.scratch.as_ref()
    }

    pub fn bounds(&self) -> &BoundTracker {
        &self.bounds
    }

    /// One update from the played episode's feedback.
    pub fn step(&mut self, feedback: &EpisodeFeedback) -> Result<()> {
        if feedback.trajectory.len() != self.mdp.horizon() {
            return Err(Error::Dimension(format!(
                "trajectory has {} steps, horizon is {}",
                feedback.trajectory.len(),
                self.mdp.horizon()
            )));
        }
        let u_hat = estimate_u_known(&self.occupancy, feedback, self.config.gamma);
        let h = self.mdp.horizon() as f64;
        let estimate_cap = h / self.config.gamma;
        let largest = u_hat.iter().copied().fold(0.0, f64::max);
        check_bound("U estimate", largest, estimate_cap)?;
        self.update_with_estimate(u_hat)
    }

    /// Same update with an externally supplied U table in place of `Û`.
    pub fn update_with_estimate(&mut self, u_hat: Array3<f64>) -> Result<()> {
        self.mdp.dims().check3("U estimate", u_hat.shape())?;
        let h = self.mdp.horizon() as f64;
        let local_bonus = local_bonus_known(&self.occupancy, &self.policy, self.config.gamma, self.mdp.horizon());
        let bonus = bonus_backup_known(&self.mdp, &self.policy, &local_bonus);
        let max_local = local_bonus.iter().copied().fold(0.0, f64::max);
        let max_backup = bonus.iter().copied().fold(0.0, f64::max);
        check_bound("local bonus b", max_local, 3.0 * h)?;
        check_bound("bonus backup B", max_backup, 3.0 * h * h)?;
        let eta = self.config.eta;
        let exponent = max_exponent(&u_hat, &bonus, eta);
        let max_estimate = u_hat.iter().copied().fold(0.0, f64::max);
        check_bound("update exponent", exponent, (eta * max_estimate).max(eta * 3.0 * h * h))?;
        self.bounds.record_known(max_local, max_backup, exponent);

        self.policy = policy_improve(&self.policy, &u_hat, &bonus, eta)?;
        self.occupancy = compute_occupancy(&self.mdp, &self.policy)?;
        self.episode += 1;
        self.scratch = Some(KnownScratch {
            u_hat,
            local_bonus,
            bonus,
        });
        Ok(())
    }
}

impl Learner for KnownLearner {
    fn policy(&self) -> &Policy {
        &self.policy
    }

    fn observe(&mut self, feedback: &EpisodeFeedback) -> Result<()> {
        self.step(feedback)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{compute_q_v, sample_episode};
    use crate::mdp::{LossTable, Trajectory};
    use crate::rng::RandomStream;
    use ndarray::Array4;

    fn feedback(steps: Vec<(usize, usize)>, loss: f64) -> EpisodeFeedback {
        EpisodeFeedback {
            trajectory: Trajectory { steps },
            aggregate_loss: loss,
        }
    }

    #[test]
    fn estimate_formula_and_support() {
        // single state, uniform over two actions: μ = 0.5 everywhere
        let mdp = TabularMdp::new(0, Array4::ones((2, 1, 2, 1))).unwrap();
        let occ = compute_occupancy(&mdp, &Policy::uniform(mdp.dims())).unwrap();
        let u = estimate_u_known(&occ, &feedback(vec![(0, 1), (0, 0)], 2.0), 0.1);
        assert!((u[[0, 0, 1]] - 2.0 / 0.6).abs() < 1e-12);
        assert!((u[[0, 0, 1]] - 3.333_333_333_333_333).abs() < 1e-12);
        assert_eq!(u[[0, 0, 0]], 0.0);
        assert_eq!(u[[1, 0, 1]], 0.0);
        assert_eq!(u.iter().filter(|&&x| x != 0.0).count(), 2);
    }

    #[test]
    fn local_bonus_limits() {
        let mut rng = RandomStream::new(4);
        let mdp = TabularMdp::random(3, 2, 3, &mut rng).unwrap();
        let pi = Policy::random(mdp.dims(), &mut rng);
        let occ = compute_occupancy(&mdp, &pi).unwrap();
        assert!(local_bonus_known(&occ, &pi, 0.0, 3).iter().all(|&b| b == 0.0));
        let b = local_bonus_known(&occ, &pi, 0.05, 3);
        for h in 0..3 {
            for s in 0..3 {
                assert!(b[[h, s]] >= 0.0 && b[[h, s]] <= 9.0 + 1e-12);
                if occ.state(h, s) == 0.0 {
                    assert!((b[[h, s]] - 9.0).abs() < 1e-12);
                }
            }
        }
        // state 1 is unreachable at step 0
        assert!((b[[0, 1]] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn single_action_bonus() {
        let mut rng = RandomStream::new(5);
        let mdp = TabularMdp::random(2, 1, 2, &mut rng).unwrap();
        let pi = Policy::uniform(mdp.dims());
        let occ = compute_occupancy(&mdp, &pi).unwrap();
        let b = local_bonus_known(&occ, &pi, 0.2, 2);
        for h in 0..2 {
            for s in 0..2 {
                let expected = 3.0 * 0.2 * 2.0 / (occ.state(h, s) + 0.2);
                assert!((b[[h, s]] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn backup_is_q_function_of_bonus() {
        let mut rng = RandomStream::new(6);
        let mdp = TabularMdp::random(3, 2, 4, &mut rng).unwrap();
        let pi = Policy::random(mdp.dims(), &mut rng);
        let b = Array2::from_shape_simple_fn((4, 3), || rng.uniform());
        let backup = bonus_backup_known(&mdp, &pi, &b);
        for s in 0..3 {
            for a in 0..2 {
                assert_eq!(backup[[3, s, a]], b[[3, s]]);
            }
        }
        let zero = bonus_backup_known(&mdp, &pi, &Array2::zeros((4, 3)));
        assert!(zero.iter().all(|&x| x == 0.0));
        // a [0,1]-valued bonus can go through the public Q/V path
        let loss = LossTable::new(state_bonus_as_loss(&b, 2)).unwrap();
        let qv = compute_q_v(&mdp, &pi, &loss).unwrap();
        for (x, y) in qv.q.iter().zip(backup.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_learning_rate_keeps_uniform() {
        let mut rng = RandomStream::new(7);
        let mdp = TabularMdp::random(3, 2, 3, &mut rng).unwrap();
        let config = KnownDynConfig {
            eta: 0.0,
            gamma: 0.1,
            delta: 0.1,
        };
        let mut learner = KnownLearner::new(mdp.clone(), config).unwrap();
        let uniform = Policy::uniform(mdp.dims());
        for _ in 0..20 {
            let loss = LossTable::uniform_random(mdp.dims(), &mut rng);
            let (trajectory, total) = sample_episode(&mdp, learner.policy(), &loss, &mut rng).unwrap();
            learner
                .step(&EpisodeFeedback {
                    trajectory,
                    aggregate_loss: total,
                })
                .unwrap();
            assert_eq!(learner.policy(), &uniform);
        }
    }

    #[test]
    fn one_step_keeps_invariants() {
        let mut rng = RandomStream::new(8);
        let mdp = TabularMdp::random(4, 3, 3, &mut rng).unwrap();
        let config = KnownDynConfig::theorem_defaults(3, 4, 3, 16, 0.1, false);
        assert!((config.gamma - 2.0 * config.eta * 3.0).abs() < 1e-18);
        let mut learner = KnownLearner::new(mdp.clone(), config).unwrap();
        let loss = LossTable::uniform_random(mdp.dims(), &mut rng);
        let (trajectory, total) = sample_episode(&mdp, learner.policy(), &loss, &mut rng).unwrap();
        learner
            .step(&EpisodeFeedback {
                trajectory,
                aggregate_loss: total,
            })
            .unwrap();
        assert!(Policy::new(learner.policy().probs().clone()).is_ok());
        assert!(learner.policy().probs().iter().all(|&p| p > 0.0));
        assert_eq!(learner.episode(), 1);
        assert!(learner.bounds().max_exponent <= 1.0);
    }

    #[test]
    fn theorem_rate_matches_formula() {
        let eta = theorem_learning_rate(3, 4, 2, 100, 0.1, false);
        let expected = 1.0 / (3.0 * (800f64).sqrt() + 9.0 * 10.0);
        assert!((eta - expected).abs() < 1e-18);
        let with_log = theorem_learning_rate(3, 4, 2, 100, 0.1, true);
        assert!((with_log / eta - (24000f64).ln().sqrt()).abs() < 1e-12);
    }

    #[test]
    fn config_rejects_bad_values() {
        let bad = KnownDynConfig {
            eta: 0.1,
            gamma: 0.0,
            delta: 0.1,
        };
        assert!(bad.validate().is_err());
        let bad = KnownDynConfig {
            eta: -1.0,
            gamma: 0.1,
            delta: 0.1,
        };
        assert!(bad.validate().is_err());
    }
}
