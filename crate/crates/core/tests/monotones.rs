use bellkit_core::monotones::{
    best_chsh, chsh_expression, chsh_measure, chsh_measure_any, monotonicity_probe, select_inputs, BellFunctional,
    NuMap, SelectionStrategy,
};
use bellkit_core::random;
use bellkit_core::scenario::{make_theta_family, BellScenario, DistributionTuple};
use bellkit_core::transforms::{apply_elementary, ElementaryMove, Party};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pr_mix(seed: u64) -> DistributionTuple {
    random::pr_mixture(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

// Straight from the definition: max over the four sign patterns with one
// minus of |sum nu <A_x B_y>| - 2, floored at zero.
fn n_oracle(p: &DistributionTuple) -> f64 {
    let c = |x, y| p.correlator(x, y).unwrap();
    let mut best = f64::NEG_INFINITY;
    for minus in 0..4 {
        let mut s = 0.0;
        for k in 0..4 {
            let sign = if k == minus { -1.0 } else { 1.0 };
            s += sign * c(k / 2, k % 2);
        }
        best = best.max(s.abs());
    }
    (best - 2.0).max(0.0)
}

#[test]
fn known_values() {
    assert!((chsh_measure(&DistributionTuple::pr_box()).unwrap() - 2.0).abs() < 1e-15);
    assert_eq!(chsh_measure(&DistributionTuple::uniform(BellScenario::chsh())).unwrap(), 0.0);
    let p = make_theta_family(std::f64::consts::FRAC_PI_4, false);
    assert!((chsh_measure(&p).unwrap() - (2.0 * std::f64::consts::SQRT_2 - 2.0)).abs() < 1e-14);
    let (s, nu) = best_chsh(&p).unwrap();
    assert_eq!(nu, NuMap::STANDARD);
    assert!((s - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-14);
}

#[test]
fn nu_tables() {
    for nu in NuMap::ALL {
        let t = nu.table();
        assert_eq!(t.iter().flatten().filter(|&&v| v == -1).count(), 1);
        assert_eq!(NuMap::from_table(t).unwrap(), nu);
    }
    assert!(NuMap::from_table([[1, 1], [1, 1]]).is_err());
    assert!(NuMap::from_table([[-1, -1], [1, 1]]).is_err());
}

#[test]
fn extended_family_selects_the_first_two_inputs() {
    let p = make_theta_family(0.5, true);
    let sel = select_inputs(&p, SelectionStrategy::MaxChsh).unwrap();
    assert_eq!((sel.alice.as_slice(), sel.bob.as_slice()), (&[0usize, 1][..], &[0usize, 1][..]));
    assert!((chsh_measure_any(&p).unwrap() - chsh_measure(&make_theta_family(0.5, false)).unwrap()).abs() < 1e-15);
}

#[test]
fn probe_on_theta_family_finds_no_increase() {
    let p = make_theta_family(0.7, false);
    let report = monotonicity_probe(&p, 2000, 1).unwrap();
    assert!(report.max_increase <= 1e-12, "{report:?}");
    assert_eq!(report, monotonicity_probe(&p, 2000, 1).unwrap());
}

proptest! {
    #[test]
    fn measure_matches_definition(seed in any::<u64>()) {
        let p = pr_mix(seed);
        prop_assert!((chsh_measure(&p).unwrap() - n_oracle(&p)).abs() < 1e-14);
        let f = BellFunctional::standard_chsh();
        prop_assert!((f.value(&p).unwrap() - chsh_expression(&p, NuMap::STANDARD).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn measure_is_convex(s1 in any::<u64>(), s2 in any::<u64>(), lambda in 0.0f64..=1.0) {
        let (p, q) = (pr_mix(s1), pr_mix(s2));
        let mixed = chsh_measure(&p.mix(&q, lambda).unwrap()).unwrap();
        let bound = lambda * chsh_measure(&p).unwrap() + (1.0 - lambda) * chsh_measure(&q).unwrap();
        prop_assert!(mixed <= bound + 1e-12);
    }

    #[test]
    fn measure_is_relabeling_invariant(seed in any::<u64>(), party_alice in any::<bool>(), which in 0usize..3, input in 0usize..2) {
        let p = pr_mix(seed);
        let party = if party_alice { Party::Alice } else { Party::Bob };
        let mv = match which {
            0 => ElementaryMove::InputTransposition { party, first: 0, second: 1 },
            1 => ElementaryMove::OutputRelabeling { party, input, permutation: vec![1, 0] },
            _ => ElementaryMove::InputSubstitution { party, input, source: 1 - input },
        };
        let image = chsh_measure(&apply_elementary(&p, &mv).unwrap()).unwrap();
        let base = chsh_measure(&p).unwrap();
        if which < 2 {
            prop_assert!((image - base).abs() < 1e-14);
        } else {
            // Substitution is not invertible; it can only lose nonlocality.
            prop_assert!(image <= base + 1e-14);
        }
    }

    #[test]
    fn mixing_with_local_never_helps(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random::pr_mixture(&mut rng).unwrap();
        let l = random::local_tuple(p.scenario(), &mut rng, 4).unwrap();
        let mixed = chsh_measure(&p.mix(&l, lambda).unwrap()).unwrap();
        prop_assert!(mixed <= lambda * chsh_measure(&p).unwrap() + 1e-12);
    }
}
