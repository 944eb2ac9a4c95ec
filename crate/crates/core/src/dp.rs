//! Exact dynamic programming over a known MDP: occupancy measures, Q/V,
//! the trajectory-level U/W functions, policy evaluation and the
//! hindsight-optimal policy.

use ndarray::{Array2, Array3, ArrayView3};

use crate::error::{Error, Result};
use crate::mdp::{Dims, LossTable, OccupancyTable, Policy, TabularMdp, Trajectory};
use crate::rng::RandomStream;

#[derive(Debug, Clone, PartialEq)]
pub struct QValues {
    /// `Q[h, s, a]`.
    pub q: Array3<f64>,
    /// `V[h, s]`.
    pub v: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UwValues {
    /// `U[h, s, a]`: expected total trajectory loss given `(s_h, a_h) = (s, a)`.
    pub u: Array3<f64>,
    /// `W[h, s]`: expected loss over steps before `h` given `s_h = s`.
    /// Zero where the state is unreachable.
    pub w: Array2<f64>,
}

fn check_policy(mdp: &TabularMdp, policy: &Policy) -> Result<()> {
    mdp.dims().check3("policy", policy.probs().shape())
}

/// Forward recursion `μ_{h+1}(s') = Σ_{s,a} μ_h(s,a) p_h(s'|s,a)`.
pub fn compute_occupancy(mdp: &TabularMdp, policy: &Policy) -> Result<OccupancyTable> {
    check_policy(mdp, policy)?;
    let Dims {
        horizon,
        num_states,
        num_actions,
    } = mdp.dims();
    let p = mdp.transitions();
    let pi = policy.probs();
    let mut mu = Array3::zeros((horizon, num_states, num_actions));
    let mut state = vec![0.0; num_states];
    state[mdp.initial_state()] = 1.0;
    for h in 0..horizon {
        let mut next = vec![0.0; num_states];
        for s in 0..num_states {
            if state[s] == 0.0 {
                continue;
            }
            for a in 0..num_actions {
                let m = state[s] * pi[[h, s, a]];
                mu[[h, s, a]] = m;
                if m == 0.0 || h + 1 == horizon {
                    continue;
                }
                for (s2, slot) in next.iter_mut().enumerate() {
                    *slot += m * p[[h, s, a, s2]];
                }
            }
        }
        state = next;
    }
    Ok(OccupancyTable { mu })
}

/// Backward Bellman recursion for an arbitrary (not necessarily `[0, 1]`)
/// loss array.
pub(crate) fn q_values_raw(mdp: &TabularMdp, policy: &Policy, loss: ArrayView3<'_, f64>) -> QValues {
    let Dims {
        horizon,
        num_states,
        num_actions,
    } = mdp.dims();
    let p = mdp.transitions();
    let pi = policy.probs();
    let mut q = Array3::zeros((horizon, num_states, num_actions));
    let mut v = Array2::zeros((horizon, num_states));
    for h in (0..horizon).rev() {
        for s in 0..num_states {
            let mut value = 0.0;
            for a in 0..num_actions {
                let mut qa = loss[[h, s, a]];
                if h + 1 < horizon {
                    for s2 in 0..num_states {
                        qa += p[[h, s, a, s2]] * v[[h + 1, s2]];
                    }
                }
                q[[h, s, a]] = qa;
                value += pi[[h, s, a]] * qa;
            }
            v[[h, s]] = value;
        }
    }
    QValues { q, v }
}

pub fn compute_q_v(mdp: &TabularMdp, policy: &Policy, loss: &LossTable) -> Result<QValues> {
    check_policy(mdp, policy)?;
    mdp.dims().check3("loss", loss.values().shape())?;
    Ok(q_values_raw(mdp, policy, loss.view()))
}

/// `U = Q + W` with `W` computed forward from the occupancy.
pub fn compute_u_w(
    mdp: &TabularMdp,
    policy: &Policy,
    loss: &LossTable,
    occupancy: &OccupancyTable,
) -> Result<UwValues> {
    let qv = compute_q_v(mdp, policy, loss)?;
    mdp.dims().check3("occupancy", occupancy.values().shape())?;
    let Dims {
        horizon,
        num_states,
        num_actions,
    } = mdp.dims();
    let p = mdp.transitions();
    let mu = occupancy.values();
    let mu_state = occupancy.state_table();
    let mut w = Array2::zeros((horizon, num_states));
    for h in 0..horizon.saturating_sub(1) {
        let mut mass = vec![0.0; num_states];
        for s in 0..num_states {
            for a in 0..num_actions {
                let m = mu[[h, s, a]];
                if m == 0.0 {
                    continue;
                }
                let carried = m * (w[[h, s]] + loss.get(h, s, a));
                for (s2, slot) in mass.iter_mut().enumerate() {
                    *slot += carried * p[[h, s, a, s2]];
                }
            }
        }
        for s2 in 0..num_states {
            let reach = mu_state[[h + 1, s2]];
            w[[h + 1, s2]] = if reach > 0.0 { mass[s2] / reach } else { 0.0 };
        }
    }
    let mut u = qv.q;
    for ((h, s, _), value) in u.indexed_iter_mut() {
        *value += w[[h, s]];
    }
    Ok(UwValues { u, w })
}

/// `V^π_1(s_init; ℓ)`.
pub fn evaluate_policy(mdp: &TabularMdp, policy: &Policy, loss: &LossTable) -> Result<f64> {
    let qv = compute_q_v(mdp, policy, loss)?;
    Ok(qv.v[[0, mdp.initial_state()]])
}

/// Deterministic policy minimizing `V_1(s_init)` for a summed loss array,
/// ties going to the lowest action index.
pub fn best_policy_for_total(mdp: &TabularMdp, total: ArrayView3<'_, f64>) -> Result<(Policy, f64)> {
    mdp.dims().check3("loss total", total.shape())?;
    let Dims {
        horizon,
        num_states,
        num_actions,
    } = mdp.dims();
    let p = mdp.transitions();
    let mut v = Array2::<f64>::zeros((horizon + 1, num_states));
    let mut actions = Array2::<usize>::zeros((horizon, num_states));
    for h in (0..horizon).rev() {
        for s in 0..num_states {
            let mut best = f64::INFINITY;
            let mut best_a = 0;
            for a in 0..num_actions {
                let mut qa = total[[h, s, a]];
                if h + 1 < horizon {
                    for s2 in 0..num_states {
                        qa += p[[h, s, a, s2]] * v[[h + 1, s2]];
                    }
                }
                if qa < best {
                    best = qa;
                    best_a = a;
                }
            }
            v[[h, s]] = best;
            actions[[h, s]] = best_a;
        }
    }
    let policy = Policy::deterministic(mdp.dims(), &actions)?;
    Ok((policy, v[[0, mdp.initial_state()]]))
}

/// `π* = argmin_π Σ_k V^π(ℓ^k)`; by linearity this is the optimum for the
/// summed loss.
pub fn best_policy_in_hindsight(mdp: &TabularMdp, losses: &[LossTable]) -> Result<(Policy, f64)> {
    let first = losses.first().ok_or(Error::EmptyLossSequence)?;
    let mut total = first.values().clone();
    for loss in &losses[1..] {
        mdp.dims().check3("loss", loss.values().shape())?;
        total += loss.values();
    }
    best_policy_for_total(mdp, total.view())
}

/// Samples one trajectory and its aggregate loss `Σ_h ℓ_h(s_h, a_h)`.
pub fn sample_episode(
    mdp: &TabularMdp,
    policy: &Policy,
    loss: &LossTable,
    rng: &mut RandomStream,
) -> Result<(Trajectory, f64)> {
    check_policy(mdp, policy)?;
    mdp.dims().check3("loss", loss.values().shape())?;
    let horizon = mdp.horizon();
    let mut steps = Vec::with_capacity(horizon);
    let mut state = mdp.initial_state();
    let mut aggregate = 0.0;
    for h in 0..horizon {
        let action = rng.categorical(policy.row(h, state).iter().copied());
        steps.push((state, action));
        aggregate += loss.get(h, state, action);
        if h + 1 < horizon {
            state = rng.categorical(mdp.row(h, state, action).iter().copied());
        }
    }
    Ok((Trajectory { steps }, aggregate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array4;

    fn single_state(actions: usize, horizon: usize) -> TabularMdp {
        TabularMdp::new(0, Array4::ones((horizon, 1, actions, 1))).unwrap()
    }

    #[test]
    fn single_state_uniform_occupancy() {
        let mdp = single_state(2, 4);
        let occ = compute_occupancy(&mdp, &Policy::uniform(mdp.dims())).unwrap();
        assert!(occ.values().iter().all(|&m| m == 0.5));
    }

    #[test]
    fn first_layer_is_initial_policy_row() {
        let mut rng = RandomStream::new(11);
        let mdp = TabularMdp::random(3, 3, 3, &mut rng).unwrap();
        let pi = Policy::random(mdp.dims(), &mut rng);
        let occ = compute_occupancy(&mdp, &pi).unwrap();
        for s in 0..3 {
            for a in 0..3 {
                let expected = if s == mdp.initial_state() { pi.prob(0, s, a) } else { 0.0 };
                assert_eq!(occ.get(0, s, a), expected);
            }
        }
    }

    #[test]
    fn single_step_q_is_loss() {
        let mut rng = RandomStream::new(2);
        let mdp = TabularMdp::random(2, 3, 1, &mut rng).unwrap();
        let pi = Policy::random(mdp.dims(), &mut rng);
        let loss = LossTable::uniform_random(mdp.dims(), &mut rng);
        let qv = compute_q_v(&mdp, &pi, &loss).unwrap();
        assert_eq!(&qv.q, loss.values());
        for s in 0..2 {
            let expected: f64 = (0..3).map(|a| pi.prob(0, s, a) * loss.get(0, s, a)).sum();
            assert!((qv.v[[0, s]] - expected).abs() < 1e-15);
        }
        let occ = compute_occupancy(&mdp, &pi).unwrap();
        let uw = compute_u_w(&mdp, &pi, &loss, &occ).unwrap();
        assert_eq!(&uw.u, loss.values());
    }

    #[test]
    fn zero_and_unit_losses() {
        let mut rng = RandomStream::new(5);
        let mdp = TabularMdp::random(3, 2, 4, &mut rng).unwrap();
        let pi = Policy::random(mdp.dims(), &mut rng);
        let zero = LossTable::zeros(mdp.dims());
        let qv = compute_q_v(&mdp, &pi, &zero).unwrap();
        assert!(qv.q.iter().all(|&x| x == 0.0));
        assert!(qv.v.iter().all(|&x| x == 0.0));
        assert_eq!(evaluate_policy(&mdp, &pi, &zero).unwrap(), 0.0);
        let one = LossTable::constant(mdp.dims(), 1.0).unwrap();
        assert!((evaluate_policy(&mdp, &pi, &one).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn prefix_loss_is_zero_at_first_step() {
        let mut rng = RandomStream::new(8);
        let mdp = TabularMdp::random(3, 2, 3, &mut rng).unwrap();
        let pi = Policy::random(mdp.dims(), &mut rng);
        let loss = LossTable::uniform_random(mdp.dims(), &mut rng);
        let occ = compute_occupancy(&mdp, &pi).unwrap();
        let uw = compute_u_w(&mdp, &pi, &loss, &occ).unwrap();
        let qv = compute_q_v(&mdp, &pi, &loss).unwrap();
        let s0 = mdp.initial_state();
        assert_eq!(uw.w[[0, s0]], 0.0);
        for a in 0..2 {
            assert_eq!(uw.u[[0, s0, a]], qv.q[[0, s0, a]]);
        }
    }

    #[test]
    fn unreachable_states_get_zero_prefix() {
        // state 1 is never entered
        let mut p = Array4::zeros((3, 2, 2, 2));
        p.slice_mut(ndarray::s![.., .., .., 0]).fill(1.0);
        let mdp = TabularMdp::new(0, p).unwrap();
        let pi = Policy::uniform(mdp.dims());
        let loss = LossTable::constant(mdp.dims(), 0.5).unwrap();
        let occ = compute_occupancy(&mdp, &pi).unwrap();
        let uw = compute_u_w(&mdp, &pi, &loss, &occ).unwrap();
        assert_eq!(uw.w[[1, 1]], 0.0);
        assert_eq!(uw.w[[2, 1]], 0.0);
        assert!((uw.w[[2, 0]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_decision_hindsight() {
        let mdp = single_state(3, 1);
        let loss = LossTable::new(Array3::from_shape_vec((1, 1, 3), vec![0.7, 0.2, 0.9]).unwrap())
            .unwrap();
        let (pi, value) = best_policy_in_hindsight(&mdp, &[loss]).unwrap();
        assert_eq!(pi.probs().as_slice().unwrap(), &[0.0, 1.0, 0.0]);
        assert!((value - 0.2).abs() < 1e-15);
    }

    #[test]
    fn hindsight_ties_pick_lowest_action() {
        let mut rng = RandomStream::new(4);
        let mdp = TabularMdp::random(2, 3, 3, &mut rng).unwrap();
        let loss = LossTable::constant(mdp.dims(), 0.25).unwrap();
        let (pi, value) = best_policy_in_hindsight(&mdp, &[loss.clone(), loss]).unwrap();
        assert!(pi.as_deterministic().is_some());
        assert!((value - 2.0 * 3.0 * 0.25).abs() < 1e-12);
        let single = single_state(3, 2);
        let flat = LossTable::constant(single.dims(), 0.5).unwrap();
        let (pi, _) = best_policy_in_hindsight(&single, &[flat]).unwrap();
        assert!(pi.as_deterministic().unwrap().iter().all(|&a| a == 0));
    }

    #[test]
    fn hindsight_rejects_empty() {
        let mdp = single_state(2, 1);
        assert!(matches!(
            best_policy_in_hindsight(&mdp, &[]),
            Err(Error::EmptyLossSequence)
        ));
    }

    #[test]
    fn deterministic_episode_is_exact_path() {
        // p moves s -> (s + a) mod 3
        let mut p = Array4::zeros((3, 3, 2, 3));
        for h in 0..3 {
            for s in 0..3 {
                for a in 0..2 {
                    p[[h, s, a, (s + a) % 3]] = 1.0;
                }
            }
        }
        let mdp = TabularMdp::new(0, p).unwrap();
        let actions = Array2::from_elem((3, 3), 1);
        let pi = Policy::deterministic(mdp.dims(), &actions).unwrap();
        let mut rng = RandomStream::new(0);
        let loss = LossTable::uniform_random(mdp.dims(), &mut rng);
        let (traj, total) = sample_episode(&mdp, &pi, &loss, &mut rng).unwrap();
        assert_eq!(traj.steps, vec![(0, 1), (1, 1), (2, 1)]);
        let expected = loss.get(0, 0, 1) + loss.get(1, 1, 1) + loss.get(2, 2, 1);
        assert_eq!(total, expected);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mdp = single_state(2, 2);
        let wrong = Policy::uniform(Dims {
            horizon: 3,
            num_states: 1,
            num_actions: 2,
        });
        assert!(matches!(compute_occupancy(&mdp, &wrong), Err(Error::Dimension(_))));
    }
}
