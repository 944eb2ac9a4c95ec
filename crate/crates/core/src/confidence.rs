//! Visit counters, Bernstein confidence sets over transition rows, and the
//! extremal occupancy bounds they induce.
//!
//! A confidence set is rectangular: each `(h, s, a)` row ranges
//! independently over `{p' ∈ Δ_S : |p'(s') - p̄(s')| <= r(s') ∀ s'}`.
//! Linear objectives over one row are solved exactly by a greedy fill, and
//! rectangularity lets the row-wise optimum be composed by backward
//! induction.

use ndarray::{Array2, Array3, Array4};

use crate::error::{Error, Result};
use crate::mdp::{Policy, TabularMdp, Trajectory};

/// Transition counts `n[h, s, a, s']` for `h` in `0..H-1`; the last step has
/// no modeled successor.
#[derive(Debug, Clone, PartialEq)]
pub struct Counters {
    transitions: Array4<u64>,
    visits: Array3<u64>,
}

impl Counters {
    pub fn new(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        let layers = horizon.saturating_sub(1);
        Self {
            transitions: Array4::zeros((layers, num_states, num_actions, num_states)),
            visits: Array3::zeros((layers, num_states, num_actions)),
        }
    }

    pub fn transitions(&self) -> &Array4<u64> {
        &self.transitions
    }

    /// `n[h, s, a] = Σ_{s'} n[h, s, a, s']`.
    pub fn visits(&self) -> &Array3<u64> {
        &self.visits
    }

    pub fn horizon(&self) -> usize {
        self.transitions.shape()[0] + 1
    }

    pub fn update(&mut self, trajectory: &Trajectory) -> Result<()> {
        let horizon = self.horizon();
        let (num_states, num_actions) = (self.visits.shape()[1], self.visits.shape()[2]);
        if trajectory.len() != horizon {
            return Err(Error::Dimension(format!(
                "trajectory has {} steps, horizon is {horizon}",
                trajectory.len()
            )));
        }
        if let Some((h, &(s, a))) = trajectory
            .steps
            .iter()
            .enumerate()
            .find(|(_, &(s, a))| s >= num_states || a >= num_actions)
        {
            return Err(Error::Dimension(format!(
                "trajectory step {h} visits (s={s}, a={a}) outside S={num_states}, A={num_actions}"
            )));
        }
        for (h, window) in trajectory.steps.windows(2).enumerate() {
            let (s, a) = window[0];
            let next = window[1].0;
            self.transitions[[h, s, a, next]] += 1;
            self.visits[[h, s, a]] += 1;
        }
        Ok(())
    }
}

/// `ln(10 H S A K / δ)`.
pub fn confidence_log_term(
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    num_episodes: usize,
    delta: f64,
) -> f64 {
    (10.0 * (horizon * num_states * num_actions * num_episodes) as f64 / delta).ln()
}

/// `r = 4 sqrt(p̄ ι' / (n ∨ 1)) + 10 ι' / (n ∨ 1)` with `ι' = ln(10HSAK/δ)`.
pub fn confidence_radius(
    empirical: f64,
    count: u64,
    delta: f64,
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    num_episodes: usize,
) -> f64 {
    let log_term = confidence_log_term(horizon, num_states, num_actions, num_episodes, delta);
    radius_from_log_term(empirical, count, log_term)
}

fn radius_from_log_term(empirical: f64, count: u64, log_term: f64) -> f64 {
    let n = count.max(1) as f64;
    4.0 * (empirical * log_term / n).sqrt() + 10.0 * log_term / n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Max,
    Min,
}

/// One row of the confidence set, clipped to `[0, 1]` per coordinate.
#[derive(Debug, Clone, PartialEq)]
struct RowBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl RowBox {
    fn new(center: &[f64], radius: &[f64]) -> Self {
        let lower: Vec<f64> = center.iter().zip(radius).map(|(c, r)| (c - r).max(0.0)).collect();
        let upper: Vec<f64> = center.iter().zip(radius).map(|(c, r)| (c + r).min(1.0)).collect();
        let low_sum: f64 = lower.iter().sum();
        let high_sum: f64 = upper.iter().sum();
        if low_sum > 1.0 || high_sum < 1.0 {
            // empty intersection with the simplex: collapse to the center
            return Self {
                lower: center.to_vec(),
                upper: center.to_vec(),
            };
        }
        Self { lower, upper }
    }

    /// Greedy fill from the lower corner in order of decreasing (max) or
    /// increasing (min) weight. Returns the optimal value and, if `point` is
    /// given, writes the optimizer into it.
    fn optimize(
        &self,
        weights: &[f64],
        direction: Direction,
        order: &mut Vec<usize>,
        mut point: Option<&mut Vec<f64>>,
    ) -> f64 {
        let n = self.lower.len();
        order.clear();
        order.extend(0..n);
        match direction {
            Direction::Max => order.sort_by(|&i, &j| weights[j].total_cmp(&weights[i])),
            Direction::Min => order.sort_by(|&i, &j| weights[i].total_cmp(&weights[j])),
        }
        if let Some(p) = point.as_deref_mut() {
            p.clear();
            p.extend_from_slice(&self.lower);
        }
        let mut slack = 1.0 - self.lower.iter().sum::<f64>();
        let mut value: f64 = self.lower.iter().zip(weights).map(|(l, w)| l * w).sum();
        for &i in order.iter() {
            if slack <= 0.0 {
                break;
            }
            let add = (self.upper[i] - self.lower[i]).min(slack);
            value += add * weights[i];
            slack -= add;
            if let Some(p) = point.as_deref_mut() {
                p[i] += add;
            }
        }
        value
    }
}

/// Optimizes `⟨p', w⟩` over `{p' ∈ Δ : |p' - p̄| <= r}` (box clipped to
/// `[0, 1]`). If the clipped box misses the simplex the set is taken to be
/// `{p̄}`.
pub fn inner_linear_opt(
    center: &[f64],
    radius: &[f64],
    weights: &[f64],
    direction: Direction,
) -> (Vec<f64>, f64) {
    assert_eq!(center.len(), radius.len());
    assert_eq!(center.len(), weights.len());
    let row = RowBox::new(center, radius);
    let mut order = Vec::with_capacity(center.len());
    let mut point = Vec::with_capacity(center.len());
    let value = row.optimize(weights, direction, &mut order, Some(&mut point));
    (point, value)
}

/// Rectangular set of transition kernels around an empirical kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidencePolytope {
    empirical: Array4<f64>,
    radius: Array4<f64>,
    rows: Vec<RowBox>,
    num_states: usize,
    num_actions: usize,
}

impl ConfidencePolytope {
    /// Builds the set from explicit centers and radii (`[H-1, S, A, S]`).
    pub fn new(empirical: Array4<f64>, radius: Array4<f64>) -> Result<Self> {
        if empirical.shape() != radius.shape() {
            return Err(Error::Dimension(format!(
                "center {:?} vs radius {:?}",
                empirical.shape(),
                radius.shape()
            )));
        }
        if radius.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::InvalidParameter("radii must be nonnegative".into()));
        }
        let (layers, num_states, num_actions, _) = empirical.dim();
        let mut rows = Vec::with_capacity(layers * num_states * num_actions);
        for h in 0..layers {
            for s in 0..num_states {
                for a in 0..num_actions {
                    let c = empirical.slice(ndarray::s![h, s, a, ..]).to_vec();
                    let r = radius.slice(ndarray::s![h, s, a, ..]).to_vec();
                    rows.push(RowBox::new(&c, &r));
                }
            }
        }
        Ok(Self {
            empirical,
            radius,
            rows,
            num_states,
            num_actions,
        })
    }

    /// Bernstein set from visit counts. Unvisited rows are centered at the
    /// uniform distribution.
    pub fn from_counts(counters: &Counters, delta: f64, num_episodes: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {delta} must lie in (0, 1)")));
        }
        let counts = counters.transitions();
        let visits = counters.visits();
        let (layers, num_states, num_actions, _) = counts.dim();
        let log_term = confidence_log_term(layers + 1, num_states, num_actions, num_episodes, delta);
        let mut empirical = Array4::zeros(counts.raw_dim());
        let mut radius = Array4::zeros(counts.raw_dim());
        for ((h, s, a), &n) in visits.indexed_iter() {
            for next in 0..num_states {
                let p_bar = if n == 0 {
                    1.0 / num_states as f64
                } else {
                    counts[[h, s, a, next]] as f64 / n as f64
                };
                empirical[[h, s, a, next]] = p_bar;
                radius[[h, s, a, next]] = radius_from_log_term(p_bar, n, log_term);
            }
        }
        Self::new(empirical, radius)
    }

    /// Singleton set `{p}`.
    pub fn exact(mdp: &TabularMdp) -> Self {
        let layers = mdp.horizon().saturating_sub(1);
        let empirical = mdp
            .transitions()
            .slice(ndarray::s![..layers, .., .., ..])
            .to_owned();
        let radius = Array4::zeros(empirical.raw_dim());
        Self::new(empirical, radius).expect("shapes agree")
    }

    pub fn empirical(&self) -> &Array4<f64> {
        &self.empirical
    }

    pub fn radius(&self) -> &Array4<f64> {
        &self.radius
    }

    pub fn horizon(&self) -> usize {
        self.empirical.shape()[0] + 1
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn row(&self, h: usize, s: usize, a: usize) -> &RowBox {
        &self.rows[(h * self.num_states + s) * self.num_actions + a]
    }

    /// Whether `p` lies in the set (coordinate-wise, with tolerance `tol`).
    pub fn contains(&self, mdp: &TabularMdp, tol: f64) -> bool {
        let layers = self.horizon() - 1;
        (0..layers).all(|h| {
            (0..self.num_states).all(|s| {
                (0..self.num_actions).all(|a| {
                    let row = self.row(h, s, a);
                    (0..self.num_states).all(|next| {
                        let p = mdp.transitions()[[h, s, a, next]];
                        p >= row.lower[next] - tol && p <= row.upper[next] + tol
                    })
                })
            })
        })
    }

    /// Optimum of `⟨p', w⟩` over row `(h, s, a)`.
    pub fn optimize_row(&self, h: usize, s: usize, a: usize, weights: &[f64], direction: Direction) -> f64 {
        let mut order = Vec::with_capacity(self.num_states);
        self.row(h, s, a).optimize(weights, direction, &mut order, None)
    }

    pub(crate) fn optimize_row_with(
        &self,
        h: usize,
        s: usize,
        a: usize,
        weights: &[f64],
        direction: Direction,
        order: &mut Vec<usize>,
    ) -> f64 {
        self.row(h, s, a).optimize(weights, direction, order, None)
    }
}

/// State-level upper and lower occupancy bounds `μ̄[h, s]`, `μ̲[h, s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyBounds {
    pub upper: Array2<f64>,
    pub lower: Array2<f64>,
}

impl OccupancyBounds {
    /// `μ̄_h(s, a) = μ̄_h(s) π_h(a|s)`.
    pub fn upper_sa(&self, policy: &Policy, h: usize, s: usize, a: usize) -> f64 {
        self.upper[[h, s]] * policy.prob(h, s, a)
    }

    pub fn lower_sa(&self, policy: &Policy, h: usize, s: usize, a: usize) -> f64 {
        self.lower[[h, s]] * policy.prob(h, s, a)
    }
}

/// `max / min over p' in the set` of `μ^{π, p'}_h(s)` for every `(h, s)`.
///
/// For a target `(h*, s*)` the reach probability
/// `f_h(s') = Σ_a π_h(a|s') opt_{p'} ⟨p'_h(·|s',a), f_{h+1}⟩` is propagated
/// backward from `f_{h*} = 1{s*}`; the bound is `f_0(s_init)`.
pub fn compute_occupancy_bounds(
    policy: &Policy,
    polytope: &ConfidencePolytope,
    initial_state: usize,
) -> Result<OccupancyBounds> {
    let dims = policy.dims();
    if dims.horizon != polytope.horizon()
        || dims.num_states != polytope.num_states()
        || dims.num_actions != polytope.num_actions()
    {
        return Err(Error::Dimension(format!(
            "policy {:?} vs confidence set (H={}, S={}, A={})",
            dims,
            polytope.horizon(),
            polytope.num_states(),
            polytope.num_actions()
        )));
    }
    let (horizon, num_states, num_actions) = dims.shape3();
    if initial_state >= num_states {
        return Err(Error::Dimension(format!("initial state {initial_state} out of range")));
    }
    let mut upper = Array2::zeros((horizon, num_states));
    let mut lower = Array2::zeros((horizon, num_states));
    upper[[0, initial_state]] = 1.0;
    lower[[0, initial_state]] = 1.0;
    let mut order = Vec::with_capacity(num_states);
    let mut reach = vec![0.0; num_states];
    let mut prev = vec![0.0; num_states];
    for (direction, out) in [(Direction::Max, &mut upper), (Direction::Min, &mut lower)] {
        for target_h in 1..horizon {
            for target in 0..num_states {
                reach.iter_mut().for_each(|x| *x = 0.0);
                reach[target] = 1.0;
                for h in (0..target_h).rev() {
                    for s in 0..num_states {
                        let mut total = 0.0;
                        for a in 0..num_actions {
                            let pi = policy.prob(h, s, a);
                            if pi == 0.0 {
                                continue;
                            }
                            total += pi * polytope.optimize_row_with(h, s, a, &reach, direction, &mut order);
                        }
                        prev[s] = total;
                    }
                    std::mem::swap(&mut reach, &mut prev);
                }
                out[[target_h, target]] = reach[initial_state].clamp(0.0, 1.0);
            }
        }
    }
    Ok(OccupancyBounds { upper, lower })
}
