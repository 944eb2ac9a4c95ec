//! Reference computations by exhaustive enumeration.
//!
//! Nothing here calls the dynamic-programming routines of `aggbandit-core`;
//! only the data types are shared. Everything is exponential in the instance
//! size and meant for tiny instances.

use aggbandit_core::mdp::{Dims, LossTable, Policy, TabularMdp};
use ndarray::{Array2, Array3, Array4};

/// A full path `(s_h, a_h)` for `h = 0..H` with its probability.
#[derive(Debug, Clone)]
pub struct WeightedPath {
    pub steps: Vec<(usize, usize)>,
    pub prob: f64,
}

/// All state-action paths of positive probability under `(p, π)`.
pub fn enumerate_paths_with(
    transitions: &Array4<f64>,
    initial_state: usize,
    policy: &Policy,
) -> Vec<WeightedPath> {
    let dims = policy.dims();
    let mut out = Vec::new();
    let mut steps = Vec::with_capacity(dims.horizon);
    extend(transitions, policy, dims, 0, initial_state, 1.0, &mut steps, &mut out);
    out
}

pub fn enumerate_paths(mdp: &TabularMdp, policy: &Policy) -> Vec<WeightedPath> {
    enumerate_paths_with(mdp.transitions(), mdp.initial_state(), policy)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    p: &Array4<f64>,
    policy: &Policy,
    dims: Dims,
    h: usize,
    s: usize,
    prob: f64,
    steps: &mut Vec<(usize, usize)>,
    out: &mut Vec<WeightedPath>,
) {
    for a in 0..dims.num_actions {
        let pa = prob * policy.prob(h, s, a);
        if pa == 0.0 {
            continue;
        }
        steps.push((s, a));
        if h + 1 == dims.horizon {
            out.push(WeightedPath {
                steps: steps.clone(),
                prob: pa,
            });
        } else {
            for next in 0..dims.num_states {
                let pn = pa * p[[h, s, a, next]];
                if pn > 0.0 {
                    extend(p, policy, dims, h + 1, next, pn, steps, out);
                }
            }
        }
        steps.pop();
    }
}

fn path_loss(steps: &[(usize, usize)], loss: &LossTable) -> f64 {
    steps.iter().enumerate().map(|(h, &(s, a))| loss.get(h, s, a)).sum()
}

pub fn occupancy_from_paths(paths: &[WeightedPath], dims: Dims) -> Array3<f64> {
    let mut mu = Array3::zeros(dims.shape3());
    for path in paths {
        for (h, &(s, a)) in path.steps.iter().enumerate() {
            mu[[h, s, a]] += path.prob;
        }
    }
    mu
}

pub fn brute_occupancy(mdp: &TabularMdp, policy: &Policy) -> Array3<f64> {
    occupancy_from_paths(&enumerate_paths(mdp, policy), policy.dims())
}

/// `E[Σ_h ℓ_h(s_h, a_h)]`.
pub fn brute_value(mdp: &TabularMdp, policy: &Policy, loss: &LossTable) -> f64 {
    enumerate_paths(mdp, policy)
        .iter()
        .map(|p| p.prob * path_loss(&p.steps, loss))
        .sum()
}

/// Conditional expectations at every `(h, s, a)` with positive occupancy;
/// unreachable cells are `NaN`.
pub struct BruteConditionals {
    pub occupancy: Array3<f64>,
    /// `E[total loss | s_h = s, a_h = a]`.
    pub u: Array3<f64>,
    /// `E[loss from h on | s_h = s, a_h = a]`.
    pub q: Array3<f64>,
    /// `E[loss before h | s_h = s]`, `NaN` where the state is unreachable.
    pub w: Array2<f64>,
}

pub fn brute_conditionals(mdp: &TabularMdp, policy: &Policy, loss: &LossTable) -> BruteConditionals {
    let dims = policy.dims();
    let paths = enumerate_paths(mdp, policy);
    let mut mu = Array3::zeros(dims.shape3());
    let mut u_mass = Array3::zeros(dims.shape3());
    let mut q_mass = Array3::zeros(dims.shape3());
    let mut state_mass = Array2::zeros((dims.horizon, dims.num_states));
    let mut w_mass = Array2::zeros((dims.horizon, dims.num_states));
    for path in &paths {
        let total = path_loss(&path.steps, loss);
        let mut prefix = 0.0;
        for (h, &(s, a)) in path.steps.iter().enumerate() {
            mu[[h, s, a]] += path.prob;
            u_mass[[h, s, a]] += path.prob * total;
            q_mass[[h, s, a]] += path.prob * (total - prefix);
            state_mass[[h, s]] += path.prob;
            w_mass[[h, s]] += path.prob * prefix;
            prefix += loss.get(h, s, a);
        }
    }
    let div = |m: f64, p: f64| if p > 0.0 { m / p } else { f64::NAN };
    let u = ndarray::Zip::from(&u_mass).and(&mu).map_collect(|&m, &p| div(m, p));
    let q = ndarray::Zip::from(&q_mass).and(&mu).map_collect(|&m, &p| div(m, p));
    let w = ndarray::Zip::from(&w_mass)
        .and(&state_mass)
        .map_collect(|&m, &p| div(m, p));
    BruteConditionals {
        occupancy: mu,
        u,
        q,
        w,
    }
}

/// Every deterministic action table `[H, S]`, `A^{SH}` of them.
pub fn all_deterministic_policies(dims: Dims) -> Vec<Array2<usize>> {
    let cells = dims.horizon * dims.num_states;
    let count = dims.num_actions.pow(cells as u32);
    (0..count)
        .map(|mut code| {
            let mut table = Array2::zeros((dims.horizon, dims.num_states));
            for cell in 0..cells {
                table[[cell / dims.num_states, cell % dims.num_states]] = code % dims.num_actions;
                code /= dims.num_actions;
            }
            table
        })
        .collect()
}

/// Minimum of `Σ_k V^π(ℓ^k)` over all deterministic policies.
pub fn brute_hindsight(mdp: &TabularMdp, losses: &[LossTable]) -> (Array2<usize>, f64) {
    let dims = mdp.dims();
    let mut best = (Array2::zeros((dims.horizon, dims.num_states)), f64::INFINITY);
    for table in all_deterministic_policies(dims) {
        let pi = Policy::deterministic(dims, &table).expect("valid action table");
        let value: f64 = losses.iter().map(|l| brute_value(mdp, &pi, l)).sum();
        if value < best.1 {
            best = (table, value);
        }
    }
    best
}

/// Optimum of `⟨p, w⟩` over feasible points of a 3-outcome box-constrained
/// simplex on a grid of step `1 / resolution`. `None` if no grid point is
/// feasible.
pub fn grid_search_3(
    center: [f64; 3],
    radius: [f64; 3],
    weights: [f64; 3],
    maximize: bool,
    resolution: usize,
) -> Option<f64> {
    let step = 1.0 / resolution as f64;
    let inside = |i: usize, x: f64| x >= center[i] - radius[i] - 1e-12 && x <= center[i] + radius[i] + 1e-12;
    let mut best: Option<f64> = None;
    for i in 0..=resolution {
        let x = i as f64 * step;
        if !inside(0, x) {
            continue;
        }
        for j in 0..=(resolution - i) {
            let y = j as f64 * step;
            let z = 1.0 - x - y;
            if !inside(1, y) || !inside(2, z) || z < -1e-12 {
                continue;
            }
            let v = x * weights[0] + y * weights[1] + z * weights[2];
            best = Some(match best {
                None => v,
                Some(b) if maximize => b.max(v),
                Some(b) => b.min(v),
            });
        }
    }
    best
}

/// Candidate vertices of `{p ∈ Δ : lo <= p <= hi}`: all coordinates but one
/// at a bound, the remaining one absorbing the slack.
pub fn row_vertices(center: &[f64], radius: &[f64]) -> Vec<Vec<f64>> {
    let n = center.len();
    let lo: Vec<f64> = (0..n).map(|i| (center[i] - radius[i]).max(0.0)).collect();
    let hi: Vec<f64> = (0..n).map(|i| (center[i] + radius[i]).min(1.0)).collect();
    let mut out = Vec::new();
    for free in 0..n {
        for mask in 0..(1usize << (n - 1)) {
            let mut p = vec![0.0; n];
            let mut bit = 0;
            for i in 0..n {
                if i == free {
                    continue;
                }
                p[i] = if mask >> bit & 1 == 1 { hi[i] } else { lo[i] };
                bit += 1;
            }
            let rest: f64 = p.iter().sum();
            p[free] = 1.0 - rest;
            if p[free] >= lo[free] - 1e-12 && p[free] <= hi[free] + 1e-12 {
                out.push(p);
            }
        }
    }
    if out.is_empty() {
        out.push(center.to_vec());
    }
    out
}

/// Max and min of `μ_h(s)` over every combination of row vertices; each
/// combination's occupancy comes from path enumeration.
pub fn vertex_occupancy_bounds(
    centers: &Array4<f64>,
    radii: &Array4<f64>,
    policy: &Policy,
    initial_state: usize,
) -> (Array2<f64>, Array2<f64>) {
    let dims = policy.dims();
    let (layers, num_states, num_actions, _) = centers.dim();
    let mut rows = Vec::new();
    for h in 0..layers {
        for s in 0..num_states {
            for a in 0..num_actions {
                let c = centers.slice(ndarray::s![h, s, a, ..]).to_vec();
                let r = radii.slice(ndarray::s![h, s, a, ..]).to_vec();
                rows.push(((h, s, a), row_vertices(&c, &r)));
            }
        }
    }
    let mut upper = Array2::from_elem((dims.horizon, num_states), f64::NEG_INFINITY);
    let mut lower = Array2::from_elem((dims.horizon, num_states), f64::INFINITY);
    let mut choice = vec![0usize; rows.len()];
    let mut kernel = Array4::zeros((dims.horizon, num_states, num_actions, num_states));
    for s in 0..num_states {
        for a in 0..num_actions {
            kernel[[dims.horizon - 1, s, a, s]] = 1.0;
        }
    }
    loop {
        for (i, ((h, s, a), vertices)) in rows.iter().enumerate() {
            for (next, &v) in vertices[choice[i]].iter().enumerate() {
                kernel[[*h, *s, *a, next]] = v;
            }
        }
        let paths = enumerate_paths_with(&kernel, initial_state, policy);
        let mu = occupancy_from_paths(&paths, dims).sum_axis(ndarray::Axis(2));
        for ((h, s), &m) in mu.indexed_iter() {
            upper[[h, s]] = upper[[h, s]].max(m);
            lower[[h, s]] = lower[[h, s]].min(m);
        }
        // odometer over vertex choices
        let mut i = 0;
        loop {
            if i == rows.len() {
                return (upper, lower);
            }
            choice[i] += 1;
            if choice[i] < rows[i].1.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}
