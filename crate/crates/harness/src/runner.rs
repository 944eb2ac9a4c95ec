//! Learner-versus-adversary loops with exact expected regret.

use std::time::Instant;

use aggbandit_core::dp::{best_policy_for_total, compute_occupancy, compute_u_w, evaluate_policy};
use aggbandit_core::env::{make_adversary, run_episode, LossSequence};
use aggbandit_core::known::{KnownDynConfig, KnownLearner};
use aggbandit_core::mdp::{LossTable, Policy};
use aggbandit_core::rng::{purpose, RandomStream};
use aggbandit_core::unknown::{UnknownDynConfig, UnknownLearner};
use aggbandit_core::{BoundTracker, Learner};
use ndarray::{Array2, Array3};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{Algorithm, Experiment};
use crate::error::Result;
use crate::records::{EpisodeRecord, RunSummary, SeedSummary};

enum Agent {
    Known(KnownLearner),
    Unknown(UnknownLearner),
    Uniform(Policy),
    Oracle(KnownLearner),
}

impl Agent {
    fn new(exp: &Experiment) -> Result<Self> {
        let dims = exp.dims();
        let c = &exp.config;
        let known = || {
            KnownLearner::new(
                exp.mdp.clone(),
                KnownDynConfig {
                    eta: exp.eta,
                    gamma: exp.gamma,
                    delta: c.delta,
                },
            )
        };
        Ok(match c.algorithm {
            Algorithm::PoKnown => Agent::Known(known()?),
            Algorithm::OracleUMwu => Agent::Oracle(known()?),
            Algorithm::UniformBaseline => Agent::Uniform(Policy::uniform(dims)),
            Algorithm::PoUnknown => Agent::Unknown(UnknownLearner::new(
                dims,
                exp.mdp.initial_state(),
                UnknownDynConfig {
                    eta: exp.eta,
                    gamma: exp.gamma,
                    delta: c.delta,
                    num_episodes: c.episodes,
                    recompute_period: c.recompute_period,
                },
            )?),
        })
    }

    fn policy(&self) -> &Policy {
        match self {
            Agent::Known(l) | Agent::Oracle(l) => l.policy(),
            Agent::Unknown(l) => l.policy(),
            Agent::Uniform(p) => p,
        }
    }

    fn tracker(&self) -> BoundTracker {
        match self {
            Agent::Known(l) | Agent::Oracle(l) => l.bounds().clone(),
            Agent::Unknown(l) => l.bounds().clone(),
            Agent::Uniform(_) => BoundTracker::default(),
        }
    }
}

/// One seed's trajectory of records and its comparator.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<EpisodeRecord>,
    pub comparator_value: f64,
    pub comparator_values: Vec<f64>,
    pub comparator_actions: Array2<usize>,
    pub final_regret: f64,
    pub wall_seconds: f64,
    pub bounds: BoundTracker,
}

impl SeedRun {
    pub fn summary(&self) -> SeedSummary {
        SeedSummary {
            seed: self.seed,
            comparator_value: self.comparator_value,
            comparator_values: self.comparator_values.clone(),
            comparator_actions: self.comparator_actions.outer_iter().map(|r| r.to_vec()).collect(),
            comparator_hash: policy_hash(&self.comparator_actions),
            final_regret: self.final_regret,
            wall_seconds: self.wall_seconds,
            bounds: (&self.bounds).into(),
        }
    }
}

/// SHA-256 of the shape and the action table, hex encoded.
pub fn policy_hash(actions: &Array2<usize>) -> String {
    let mut hasher = Sha256::new();
    for d in actions.shape() {
        hasher.update((*d as u64).to_le_bytes());
    }
    for a in actions.iter() {
        hasher.update((*a as u64).to_le_bytes());
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn losses(exp: &Experiment, seed: u64) -> Result<LossSequence> {
    Ok(make_adversary(
        &exp.adversary,
        exp.dims(),
        exp.config.episodes,
        RandomStream::for_purpose(seed, purpose::ADVERSARY),
    )?)
}

/// Runs one seed. The learner only ever sees `EpisodeFeedback`; the loss
/// tables are used for exact evaluation (and, for `oracle_u_mwu`, for the
/// exact U-function).
pub fn run_seed(exp: &Experiment, seed: u64) -> Result<SeedRun> {
    let start = Instant::now();
    let dims = exp.dims();
    let mdp = &exp.mdp;
    let mut agent = Agent::new(exp)?;
    let mut episodes = RandomStream::for_purpose(seed, purpose::EPISODES);
    let mut total = Array3::<f64>::zeros(dims.shape3());
    let mut records = Vec::with_capacity(exp.config.episodes);
    for (k, loss) in losses(exp, seed)?.enumerate() {
        let policy = agent.policy();
        let expected_value = evaluate_policy(mdp, policy, &loss)?;
        let feedback = run_episode(mdp, policy, &loss, &mut episodes)?;
        match &mut agent {
            Agent::Known(l) => l.observe(&feedback)?,
            Agent::Unknown(l) => l.observe(&feedback)?,
            Agent::Uniform(_) => {}
            Agent::Oracle(l) => {
                let u = compute_u_w(mdp, l.policy(), &loss, l.occupancy())?.u;
                l.update_with_estimate(u)?;
            }
        }
        total += loss.values();
        records.push(EpisodeRecord {
            episode: k + 1,
            seed,
            realized_loss: feedback.aggregate_loss,
            expected_value,
            cum_regret: 0.0,
        });
    }
    let (comparator, _) = best_policy_for_total(mdp, total.view())?;
    let comparator_values = comparator_values(exp, seed, &comparator)?;
    let mut regret = 0.0;
    for (r, v) in records.iter_mut().zip(&comparator_values) {
        regret += r.expected_value - v;
        r.cum_regret = regret;
    }
    let comparator_value = comparator_values.iter().sum();
    Ok(SeedRun {
        seed,
        records,
        comparator_value,
        comparator_values,
        comparator_actions: comparator.as_deterministic().expect("hindsight optimum is deterministic"),
        final_regret: regret,
        wall_seconds: start.elapsed().as_secs_f64(),
        bounds: agent.tracker(),
    })
}

/// `V^{π*}(ℓ^k)` for every episode; the adversary is replayed from its seed.
fn comparator_values(exp: &Experiment, seed: u64, comparator: &Policy) -> Result<Vec<f64>> {
    let occupancy = compute_occupancy(&exp.mdp, comparator)?;
    losses(exp, seed)?
        .map(|loss: LossTable| Ok(occupancy.inner(&loss)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub runs: Vec<SeedRun>,
}

impl RunResult {
    /// All records, seeds in config order.
    pub fn records(&self) -> Vec<EpisodeRecord> {
        self.runs.iter().flat_map(|r| r.records.iter().copied()).collect()
    }

    pub fn final_regrets(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.final_regret).collect()
    }

    pub fn summary(&self, exp: &Experiment) -> RunSummary {
        let (mean, se) = mean_and_se(&self.final_regrets());
        RunSummary {
            config: exp.config.clone(),
            eta: exp.eta,
            gamma: exp.gamma,
            epsilon: exp.epsilon,
            episodes: exp.config.episodes,
            seeds: self.runs.iter().map(SeedRun::summary).collect(),
            mean_final_regret: mean,
            std_error_final_regret: se,
            slope_fit: None,
        }
    }
}

/// Sample mean and its standard error (zero for a single sample).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every seed of the config in parallel; results keep the seed order.
pub fn run_experiment(exp: &Experiment) -> Result<RunResult> {
    let runs = exp
        .config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(exp, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult { runs })
}
