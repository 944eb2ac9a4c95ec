//! Episode simulation and oblivious adversaries.
//!
//! Learners only ever receive an [`EpisodeFeedback`]: the trajectory and the
//! scalar episode loss. Per-step losses stay with the caller that owns the
//! [`LossTable`].

use std::path::PathBuf;

use ndarray::{Array2, Array3, Array4};

use crate::dp::sample_episode;
use crate::error::{Error, Result};
use crate::format::read_loss_sequence;
use crate::mdp::{Dims, LossTable, Policy, TabularMdp, Trajectory};
use crate::rng::RandomStream;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeFeedback {
    pub trajectory: Trajectory,
    /// `L_{1:H} = Σ_h ℓ_h(s_h, a_h)`.
    pub aggregate_loss: f64,
}

/// Plays one episode and hides everything but the trajectory and its
/// aggregate loss.
pub fn run_episode(
    mdp: &TabularMdp,
    policy: &Policy,
    loss: &LossTable,
    rng: &mut RandomStream,
) -> Result<EpisodeFeedback> {
    let (trajectory, aggregate_loss) = sample_episode(mdp, policy, loss, rng)?;
    debug_assert!((trajectory.path_loss(loss) - aggregate_loss).abs() <= 1e-12);
    Ok(EpisodeFeedback {
        trajectory,
        aggregate_loss,
    })
}

/// Gap of the lower-bound instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gap {
    /// `min(1/4, sqrt(A S / K) / 4)`.
    Auto,
    Fixed(f64),
}

impl Gap {
    pub fn resolve(self, num_states: usize, num_actions: usize, num_episodes: usize) -> f64 {
        match self {
            Gap::Fixed(eps) => eps,
            Gap::Auto => {
                let ratio = (num_actions * num_states) as f64 / num_episodes as f64;
                (ratio.sqrt() / 4.0).min(0.25)
            }
        }
    }
}

/// Hard instance: step 1 scatters uniformly over all states, after which the
/// agent stays put; each state hosts an `(H - 1)`-task Bernoulli bandit.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundInstance {
    pub mdp: TabularMdp,
    /// `best_action[[state, h]]` for `h >= 1`; column 0 is unused and zero.
    pub best_action: Array2<usize>,
    pub epsilon: f64,
}

impl LowerBoundInstance {
    /// Mean loss of `(h, s, a)`: zero at the first step, `1/2 - ε` for the
    /// best action of each task and `1/2` otherwise.
    pub fn mean_loss(&self, h: usize, s: usize, a: usize) -> f64 {
        if h == 0 {
            0.0
        } else if self.best_action[[s, h]] == a {
            0.5 - self.epsilon
        } else {
            0.5
        }
    }

    pub fn mean_loss_table(&self) -> LossTable {
        let dims = self.mdp.dims();
        let values = Array3::from_shape_fn(dims.shape3(), |(h, s, a)| self.mean_loss(h, s, a));
        LossTable::new(values).expect("means lie in [0, 1/2]")
    }

    /// One realized episode: independent Bernoulli draws per cell.
    pub fn draw_losses(&self, rng: &mut RandomStream) -> LossTable {
        let dims = self.mdp.dims();
        let mut values = Array3::zeros(dims.shape3());
        for h in 1..dims.horizon {
            for s in 0..dims.num_states {
                for a in 0..dims.num_actions {
                    if rng.bernoulli(self.mean_loss(h, s, a)) {
                        values[[h, s, a]] = 1.0;
                    }
                }
            }
        }
        LossTable::new(values).expect("bernoulli draws are 0 or 1")
    }
}

pub fn make_lower_bound_instance(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    num_episodes: usize,
    gap: Gap,
    rng: &mut RandomStream,
) -> Result<LowerBoundInstance> {
    if num_states < 2 || num_actions < 2 || horizon < 2 {
        return Err(Error::InvalidParameter(format!(
            "lower-bound instance needs S, A, H >= 2 (got S={num_states}, A={num_actions}, H={horizon})"
        )));
    }
    if num_episodes < 2 * num_states {
        return Err(Error::InvalidParameter(format!(
            "lower-bound instance needs K >= 2S (got K={num_episodes}, S={num_states})"
        )));
    }
    let epsilon = gap.resolve(num_states, num_actions, num_episodes);
    if !(0.0..=0.25).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "gap {epsilon} outside [0, 1/4]"
        )));
    }
    let mut best_action = Array2::zeros((num_states, horizon));
    for s in 0..num_states {
        for h in 1..horizon {
            best_action[[s, h]] = rng.below(num_actions);
        }
    }
    let dims = Dims {
        horizon,
        num_states,
        num_actions,
    };
    make_lower_bound_shell(dims, epsilon, best_action)
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdversarySpec {
    /// Tables read from a loss-sequence document, one per episode.
    FixedSequence { path: PathBuf },
    /// Every entry iid uniform on `[0, 1]` in every episode.
    IidUniform,
    /// Two random tables, alternated every `period` episodes.
    Switching { period: usize },
    /// Bernoulli losses of a lower-bound instance.
    LowerBound {
        epsilon: f64,
        best_action: Array2<usize>,
    },
}

impl AdversarySpec {
    pub fn lower_bound(instance: &LowerBoundInstance) -> Self {
        Self::LowerBound {
            epsilon: instance.epsilon,
            best_action: instance.best_action.clone(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::FixedSequence { .. } => "fixed_sequence",
            Self::IidUniform => "iid_uniform",
            Self::Switching { .. } => "switching",
            Self::LowerBound { .. } => "lower_bound_instance",
        }
    }
}

/// Oblivious loss sequence for episodes `1..=K`.
///
/// The sequence owns its random stream, so its output depends only on the
/// spec and the seed, never on what the learner does.
#[derive(Debug, Clone)]
pub struct LossSequence {
    source: Source,
    remaining: usize,
    episode: usize,
}

#[derive(Debug, Clone)]
enum Source {
    Fixed(Vec<LossTable>),
    Iid {
        dims: Dims,
        rng: RandomStream,
    },
    Switching {
        tables: [LossTable; 2],
        period: usize,
    },
    LowerBound {
        instance: Box<LowerBoundInstance>,
        rng: RandomStream,
    },
}

pub fn make_adversary(
    spec: &AdversarySpec,
    dims: Dims,
    num_episodes: usize,
    mut rng: RandomStream,
) -> Result<LossSequence> {
    let source = match spec {
        AdversarySpec::FixedSequence { path } => {
            let (file_dims, tables) = read_loss_sequence(path)?;
            if file_dims != dims {
                return Err(Error::Dimension(format!(
                    "{} holds {file_dims:?} tables, expected {dims:?}",
                    path.display()
                )));
            }
            if tables.len() < num_episodes {
                return Err(Error::InvalidParameter(format!(
                    "{} holds {} tables, fewer than K = {num_episodes}",
                    path.display(),
                    tables.len()
                )));
            }
            Source::Fixed(tables)
        }
        AdversarySpec::IidUniform => Source::Iid { dims, rng },
        AdversarySpec::Switching { period } => {
            if *period == 0 {
                return Err(Error::InvalidParameter("switch period must be positive".into()));
            }
            let first = LossTable::uniform_random(dims, &mut rng);
            let second = LossTable::uniform_random(dims, &mut rng);
            Source::Switching {
                tables: [first, second],
                period: *period,
            }
        }
        AdversarySpec::LowerBound {
            epsilon,
            best_action,
        } => {
            if best_action.shape() != [dims.num_states, dims.horizon] {
                return Err(Error::Dimension(format!(
                    "best-action table has shape {:?}, expected [{}, {}]",
                    best_action.shape(),
                    dims.num_states,
                    dims.horizon
                )));
            }
            if !(0.0..=0.25).contains(epsilon) {
                return Err(Error::InvalidParameter(format!("gap {epsilon} outside [0, 1/4]")));
            }
            if best_action.iter().any(|&a| a >= dims.num_actions) {
                return Err(Error::InvalidParameter("best action out of range".into()));
            }
            let instance = make_lower_bound_shell(dims, *epsilon, best_action.clone())?;
            Source::LowerBound {
                instance: Box::new(instance),
                rng,
            }
        }
    };
    Ok(LossSequence {
        source,
        remaining: num_episodes,
        episode: 0,
    })
}

fn make_lower_bound_shell(
    dims: Dims,
    epsilon: f64,
    best_action: Array2<usize>,
) -> Result<LowerBoundInstance> {
    let mut p = Array4::zeros((dims.horizon, dims.num_states, dims.num_actions, dims.num_states));
    p.slice_mut(ndarray::s![0, .., .., ..])
        .fill(1.0 / dims.num_states as f64);
    for h in 1..dims.horizon {
        for s in 0..dims.num_states {
            for a in 0..dims.num_actions {
                p[[h, s, a, s]] = 1.0;
            }
        }
    }
    crate::mdp::normalize_rows(&mut p);
    Ok(LowerBoundInstance {
        mdp: TabularMdp::new(0, p)?,
        best_action,
        epsilon,
    })
}

impl Iterator for LossSequence {
    type Item = LossTable;

    fn next(&mut self) -> Option<LossTable> {
        if self.remaining == 0 {
            return None;
        }
        let k = self.episode;
        self.remaining -= 1;
        self.episode += 1;
        let table = match &mut self.source {
            Source::Fixed(tables) => tables[k].clone(),
            Source::Iid { dims, rng } => LossTable::uniform_random(*dims, rng),
            Source::Switching { tables, period } => tables[(k / *period) % 2].clone(),
            Source::LowerBound { instance, rng } => instance.draw_losses(rng),
        };
        Some(table)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for LossSequence {}
