mod common;

use aggbandit_core::confidence::{compute_occupancy_bounds, ConfidencePolytope};
use aggbandit_core::dp::{compute_occupancy, compute_u_w, evaluate_policy, sample_episode};
use aggbandit_core::env::{make_lower_bound_instance, run_episode, Gap};
use aggbandit_core::known::estimate_u_known;
use aggbandit_core::mdp::Policy;
use aggbandit_core::rng::RandomStream;
use aggbandit_core::unknown::estimate_u_unknown;
use common::{dims, instance, Moments};
use ndarray::Array4;

const EPISODES: usize = 100_000;

#[test]
fn visit_frequencies_and_aggregate_mean() {
    let d = dims(3, 2, 3);
    let (mdp, policy, loss) = instance(11, d);
    let occ = compute_occupancy(&mdp, &policy).unwrap();
    let mut rng = RandomStream::new(5);
    let mut counts = ndarray::Array3::<f64>::zeros(d.shape3());
    let mut aggregate = Moments::default();
    for _ in 0..EPISODES {
        let (traj, total) = sample_episode(&mdp, &policy, &loss, &mut rng).unwrap();
        assert_eq!(traj.steps[0].0, mdp.initial_state());
        for (h, &(s, a)) in traj.steps.iter().enumerate() {
            counts[[h, s, a]] += 1.0;
        }
        aggregate.push(total);
    }
    let n = EPISODES as f64;
    for ((h, s, a), &c) in counts.indexed_iter() {
        let mu = occ.get(h, s, a);
        let se = (mu * (1.0 - mu) / n).sqrt();
        assert!((c / n - mu).abs() <= 3.0 * se + 1e-12, "({h},{s},{a}): {} vs {mu}", c / n);
    }
    let v = evaluate_policy(&mdp, &policy, &loss).unwrap();
    assert!((aggregate.mean() - v).abs() <= 3.0 * aggregate.std_error());
}

#[test]
fn lower_bound_marginals() {
    let mut rng = RandomStream::new(3);
    let inst = make_lower_bound_instance(3, 3, 4, 1000, Gap::Fixed(0.2), &mut rng).unwrap();
    let d = inst.mdp.dims();
    let mut cells = vec![Moments::default(); d.horizon * d.num_states * d.num_actions];
    let uniform = Policy::uniform(d);
    let mut value = Moments::default();
    let mut episodes = RandomStream::new(4);
    for _ in 0..EPISODES {
        let loss = inst.draw_losses(&mut rng);
        for ((h, s, a), &l) in loss.values().indexed_iter() {
            cells[(h * d.num_states + s) * d.num_actions + a].push(l);
        }
        value.push(run_episode(&inst.mdp, &uniform, &loss, &mut episodes).unwrap().aggregate_loss);
    }
    for h in 1..d.horizon {
        for s in 0..d.num_states {
            for a in 0..d.num_actions {
                let m = cells[(h * d.num_states + s) * d.num_actions + a];
                let expected = if inst.best_action[[s, h]] == a { 0.5 - inst.epsilon } else { 0.5 };
                assert!((m.mean() - expected).abs() <= 3.0 * m.std_error());
            }
        }
    }
    let closed = (d.horizon - 1) as f64 * (0.5 - inst.epsilon / d.num_actions as f64);
    assert!((value.mean() - closed).abs() <= 3.0 * value.std_error());
}

#[test]
fn known_estimator_bias() {
    let d = dims(3, 2, 3);
    let (mdp, policy, loss) = instance(21, d);
    let gamma = 0.1;
    let occ = compute_occupancy(&mdp, &policy).unwrap();
    let u = compute_u_w(&mdp, &policy, &loss, &occ).unwrap().u;
    let mut rng = RandomStream::new(8);
    let mut cells = vec![Moments::default(); u.len()];
    for _ in 0..EPISODES {
        let fb = run_episode(&mdp, &policy, &loss, &mut rng).unwrap();
        let est = estimate_u_known(&occ, &fb, gamma);
        assert!(est.iter().filter(|&&x| x != 0.0).count() <= d.horizon);
        for (m, &x) in cells.iter_mut().zip(est.iter()) {
            m.push(x);
        }
    }
    for (((h, s, a), &uu), m) in u.indexed_iter().zip(&cells) {
        let mu = occ.get(h, s, a);
        if mu > 0.0 {
            let target = mu / (mu + gamma) * uu;
            assert!(target <= uu);
            assert!((m.mean() - target).abs() <= 3.0 * m.std_error(), "({h},{s},{a})");
        }
    }
}

#[test]
fn unknown_estimator_bias() {
    let d = dims(3, 2, 3);
    let (mdp, policy, loss) = instance(22, d);
    let gamma = 0.1;
    let exact = ConfidencePolytope::exact(&mdp);
    let radius = Array4::from_elem(exact.empirical().raw_dim(), 0.15);
    let set = ConfidencePolytope::new(exact.empirical().clone(), radius).unwrap();
    let bounds = compute_occupancy_bounds(&policy, &set, mdp.initial_state()).unwrap();
    let occ = compute_occupancy(&mdp, &policy).unwrap();
    let u = compute_u_w(&mdp, &policy, &loss, &occ).unwrap().u;
    let mut rng = RandomStream::new(9);
    let mut cells = vec![Moments::default(); u.len()];
    for _ in 0..EPISODES {
        let fb = run_episode(&mdp, &policy, &loss, &mut rng).unwrap();
        let est = estimate_u_unknown(&bounds, &policy, &fb, gamma);
        for (m, &x) in cells.iter_mut().zip(est.iter()) {
            m.push(x);
        }
    }
    for (((h, s, a), &uu), m) in u.indexed_iter().zip(&cells) {
        let mu = occ.get(h, s, a);
        if mu > 0.0 {
            let upper = bounds.upper_sa(&policy, h, s, a);
            assert!(upper >= mu - 1e-12);
            let target = mu / (upper + gamma) * uu;
            assert!(target <= uu);
            assert!((m.mean() - target).abs() <= 3.0 * m.std_error(), "({h},{s},{a})");
        }
    }
}
