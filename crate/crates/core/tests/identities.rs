mod common;

use aggbandit_core::dp::{compute_occupancy, compute_q_v, compute_u_w, evaluate_policy};
use aggbandit_core::mdp::Policy;
use aggbandit_core::rng::RandomStream;
use common::{dims, instance};
use proptest::prelude::*;

fn shapes() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=4, 1usize..=3, 1usize..=4, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn u_minus_q_is_w((s, a, h, seed) in shapes()) {
        let (mdp, policy, loss) = instance(seed, dims(s, a, h));
        let occ = compute_occupancy(&mdp, &policy).unwrap();
        let qv = compute_q_v(&mdp, &policy, &loss).unwrap();
        let uw = compute_u_w(&mdp, &policy, &loss, &occ).unwrap();
        for ((hh, ss, aa), &u) in uw.u.indexed_iter() {
            if occ.state(hh, ss) > 0.0 {
                prop_assert!((u - qv.q[[hh, ss, aa]] - uw.w[[hh, ss]]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn value_difference_q_and_u_forms((s, a, h, seed) in shapes()) {
        let d = dims(s, a, h);
        let (mdp, pi, loss) = instance(seed, d);
        let other = Policy::random(d, &mut RandomStream::new(seed ^ 0x5eed));
        let gap = evaluate_policy(&mdp, &pi, &loss).unwrap() - evaluate_policy(&mdp, &other, &loss).unwrap();
        let occ_pi = compute_occupancy(&mdp, &pi).unwrap();
        let occ_other = compute_occupancy(&mdp, &other).unwrap();
        let q = compute_q_v(&mdp, &pi, &loss).unwrap().q;
        let u = compute_u_w(&mdp, &pi, &loss, &occ_pi).unwrap().u;
        let mut q_form = 0.0;
        let mut u_form = 0.0;
        for hh in 0..h {
            for ss in 0..s {
                let reach = occ_other.state(hh, ss);
                for aa in 0..a {
                    let diff = pi.prob(hh, ss, aa) - other.prob(hh, ss, aa);
                    q_form += reach * diff * q[[hh, ss, aa]];
                    u_form += reach * diff * u[[hh, ss, aa]];
                }
            }
        }
        prop_assert!((gap - q_form).abs() <= 1e-9);
        prop_assert!((gap - u_form).abs() <= 1e-9);
    }

    #[test]
    fn occupancy_layers_and_inner_product((s, a, h, seed) in shapes()) {
        let (mdp, policy, loss) = instance(seed, dims(s, a, h));
        let occ = compute_occupancy(&mdp, &policy).unwrap();
        for hh in 0..h {
            let layer: f64 = (0..s).map(|ss| occ.state(hh, ss)).sum();
            prop_assert!((layer - 1.0).abs() <= 1e-10);
        }
        prop_assert!(occ.values().iter().all(|&m| m >= 0.0));
        let v = evaluate_policy(&mdp, &policy, &loss).unwrap();
        prop_assert!((occ.inner(&loss) - v).abs() <= 1e-12);
        prop_assert!((0.0..=h as f64).contains(&v));
    }
}
