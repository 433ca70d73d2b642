mod common;

use dicekit::envs::{boyan_chain, hard_mdp, random_mdp, BoyanVariant, EnvName};
use dicekit::DiceError;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};

#[test]
fn continuing_boyan_matches_power_iteration() {
    let env = boyan_chain(BoyanVariant::Continuing);
    let model = env.occupancy().unwrap();
    let oracle = common::iterate_d_gamma(&env, 1_000_000);
    assert!((&oracle - model.d_gamma()).amax() < 1e-8);
    let tau = oracle.component_div(&DVector::from_column_slice(&env.d_mu));
    assert!((tau - model.tau_star()).amax() < 1e-8);
}

#[test]
fn discounted_chains_match_neumann_iteration() {
    for gamma in [0.1, 0.5, 0.9, 0.99] {
        let env = boyan_chain(BoyanVariant::Episodic).with_gamma(gamma).unwrap();
        let model = env.occupancy().unwrap();
        let oracle = common::iterate_d_gamma(&env, 1_000_000);
        assert!((&oracle - model.d_gamma()).amax() < 1e-10, "gamma {gamma}");
    }
}

#[test]
fn single_state_example() {
    let env = hard_mdp();
    let model = env.occupancy().unwrap();
    assert!((model.tau_star() - DVector::from_vec(vec![1.0, 1.0])).amax() < 1e-12);
    assert!((model.p_pi() - DMatrix::from_element(2, 2, 0.5)).amax() < 1e-15);
    assert_eq!(model.mu0().as_slice(), &[0.5, 0.5]);
    let t = model.apply_t(&DVector::from_vec(vec![1.0, 1.0]));
    assert!((t - DVector::from_vec(vec![0.5, 0.5])).amax() < 1e-15);
}

#[test]
fn gamma_zero_reduces_to_initial_pairs() {
    let env = random_mdp(4, 5, 3, 0.0).unwrap();
    let model = env.occupancy().unwrap();
    let m0 = common::mu0(&env);
    assert!((model.d_gamma() - &m0).amax() < 1e-14);
    let d_mu = DVector::from_column_slice(&env.d_mu);
    assert!((model.tau_star() - m0.component_div(&d_mu)).amax() < 1e-10);
    let y = DVector::from_fn(15, |i, _| i as f64 - 3.0);
    assert!((model.apply_t(&y) - &m0).amax() < 1e-15);
    assert!((model.policy_value(&env.mdp) - m0.dot(&env.mdp.reward_vector())).abs() < 1e-12);
}

#[test]
fn episodic_fixed_point_at_half() {
    let env = boyan_chain(BoyanVariant::Episodic).with_gamma(0.5).unwrap();
    let model = env.occupancy().unwrap();
    let tau = model.tau_star();
    let d_tau = model.d_mu().component_mul(tau);
    assert!((model.apply_t(tau) - d_tau).amax() < 1e-10);
}

#[test]
fn constant_reward_value() {
    for gamma in [0.0, 0.3, 0.9] {
        let env = random_mdp(8, 4, 2, gamma).unwrap();
        let mdp = env.mdp.clone().with_reward(|_, _| 2.5);
        let model = env.occupancy().unwrap();
        assert!((model.policy_value(&mdp) - 2.5).abs() < 1e-12);
    }
}

/// Long-run average reward of on-policy rollouts, r(s, a) = s.
#[test]
fn continuing_boyan_value_matches_rollouts() {
    let env = boyan_chain(BoyanVariant::Continuing);
    let mdp = env.mdp.clone().with_reward(|s, _| s as f64);
    let model = env.occupancy().unwrap();
    let exact = model.policy_value(&mdp);

    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let next: Vec<WeightedIndex<f64>> = (0..ns * na)
        .map(|i| WeightedIndex::new(mdp.next_state_probs(i / na, i % na)).unwrap())
        .collect();
    let act = WeightedIndex::new(env.policy.row(0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut s = 0;
    let mut total = 0.0;
    let steps = 10_000_000u64;
    for _ in 0..steps {
        let a = act.sample(&mut rng);
        total += mdp.reward(s, a);
        s = next[s * na + a].sample(&mut rng);
    }
    let mc = total / steps as f64;
    assert!((mc - exact).abs() < 1e-2, "mc {mc} exact {exact}");
}

#[test]
fn near_one_discount_is_continuous() {
    let env = boyan_chain(BoyanVariant::Continuing);
    let at_one = env.occupancy().unwrap();
    let near = env.clone().with_gamma(1.0 - 1e-6).unwrap().occupancy().unwrap();
    assert!((at_one.tau_star() - near.tau_star()).amax() < 1e-3);
}

/// Any v ≥ 0 with P_πᵀv = v and 1ᵀv = 1 is d_γ: the fixed space of P_πᵀ is
/// one-dimensional on ergodic chains.
#[test]
fn perron_vector_is_unique() {
    for seed in 0..10 {
        let env = random_mdp(seed, 4, 3, 1.0).unwrap();
        let model = env.occupancy().unwrap();
        let p = common::p_pi(&env);
        let n = p.nrows();
        let m = DMatrix::identity(n, n) - p.transpose();
        let svd = m.svd(false, true);
        let vt = svd.v_t.unwrap();
        let null: Vec<usize> = (0..n).filter(|&i| svd.singular_values[i] < 1e-10).collect();
        assert_eq!(null.len(), 1, "seed {seed}");
        let v = vt.row(null[0]).transpose();
        let v = &v / v.sum();
        assert!(v.min() >= -1e-12);
        assert!((v - model.d_gamma()).amax() < 1e-8);
    }
}

#[test]
fn episodic_chain_rejected_at_gamma_one() {
    let env = boyan_chain(BoyanVariant::Episodic).with_gamma(1.0).unwrap();
    assert!(matches!(env.occupancy(), Err(DiceError::NonErgodic(_))));
}

#[test]
fn boyan_tables() {
    let env = boyan_chain(BoyanVariant::Episodic);
    assert_eq!(env.mdp.next_state_probs(0, 0)[0], 1.0);
    let cont = boyan_chain(BoyanVariant::Continuing);
    assert!(cont.mdp.next_state_probs(0, 1).iter().all(|&p| (p - 1.0 / 13.0).abs() < 1e-15));
    assert!(env.d_mu.iter().all(|&d| d == 1.0 / 26.0));
    assert!((env.d_mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(EnvName::Boyan.instantiate(Some(1.0)).unwrap().name, EnvName::BoyanContinuing);
    assert_eq!(EnvName::Boyan.instantiate(Some(0.3)).unwrap().name, EnvName::BoyanEpisodic);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn occupancy_invariants(seed in 0u64..10_000, ns in 1usize..7, na in 1usize..4, gamma in prop_oneof![Just(1.0), 0.0f64..0.999]) {
        let env = random_mdp(seed, ns, na, gamma).unwrap();
        for s in 0..ns {
            for a in 0..na {
                prop_assert!((env.mdp.next_state_probs(s, a).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        let model = env.occupancy().unwrap();
        let tau = model.tau_star();
        prop_assert!(model.fixed_point_residual(tau) < 1e-8);
        prop_assert!((model.d_mu().dot(tau) - 1.0).abs() < 1e-10);
        let oracle = common::iterate_d_gamma(&env, 1_000_000);
        prop_assert!((&oracle - model.d_gamma()).amax() < 1e-8);
    }

    #[test]
    fn random_fixtures_are_deterministic(seed in 0u64..1000) {
        let a = random_mdp(seed, 3, 2, 0.7).unwrap();
        let b = random_mdp(seed, 3, 2, 0.7).unwrap();
        prop_assert_eq!(a.mdp, b.mdp);
        prop_assert_eq!(a.d_mu, b.d_mu);
    }
}
