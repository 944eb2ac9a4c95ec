#![allow(dead_code)]

use aggbandit_core::mdp::{Dims, LossTable, Policy, TabularMdp};
use aggbandit_core::rng::RandomStream;

pub fn dims(num_states: usize, num_actions: usize, horizon: usize) -> Dims {
    Dims {
        horizon,
        num_states,
        num_actions,
    }
}

/// Random MDP, policy and loss from one seed.
pub fn instance(seed: u64, d: Dims) -> (TabularMdp, Policy, LossTable) {
    let mut rng = RandomStream::for_purpose(seed, 99);
    let mdp = TabularMdp::random(d.num_states, d.num_actions, d.horizon, &mut rng).unwrap();
    let policy = Policy::random(d, &mut rng);
    let loss = LossTable::uniform_random(d, &mut rng);
    (mdp, policy, loss)
}

/// Welford accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std_error(&self) -> f64 {
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }
}
