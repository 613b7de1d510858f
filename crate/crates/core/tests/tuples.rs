use bellkit_core::scenario::{make_theta_family, make_theta_family_primed, BellScenario, DistributionTuple};
use bellkit_core::{random, Error};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ns_tuple(seed: u64) -> DistributionTuple {
    random::no_signaling_chsh(&mut ChaCha8Rng::seed_from_u64(seed))
}

// Correlator recomputed from its definition: sum over outcomes of a*b*P.
fn correlator_oracle(p: &DistributionTuple, x: usize, y: usize) -> f64 {
    let s = p.scenario();
    let mut acc = 0.0;
    for (a, va) in s.outputs_a().iter().enumerate() {
        for (b, vb) in s.outputs_b().iter().enumerate() {
            acc += (va * vb) as f64 * p.get(x, y, a, b);
        }
    }
    acc
}

proptest! {
    #[test]
    fn correlator_is_affine_under_mixing(s1 in any::<u64>(), s2 in any::<u64>(), lambda in 0.0f64..=1.0) {
        let (p, q) = (ns_tuple(s1), ns_tuple(s2));
        let mixed = p.mix(&q, lambda).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                let lhs = mixed.correlator(x, y).unwrap();
                let rhs = lambda * p.correlator(x, y).unwrap() + (1.0 - lambda) * q.correlator(x, y).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-14);
                prop_assert!((lhs - correlator_oracle(&mixed, x, y)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mixtures_stay_valid(s1 in any::<u64>(), s2 in any::<u64>(), lambda in 0.0f64..=1.0) {
        let mixed = ns_tuple(s1).mix(&ns_tuple(s2), lambda).unwrap();
        let report = mixed.validate(1e-12);
        prop_assert!(report.is_valid(), "{:?}", report);
    }

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let p = ns_tuple(seed);
        let back = DistributionTuple::from_json(&p.to_json()).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn theta_family_correlators(theta in 0.0f64..std::f64::consts::FRAC_PI_2) {
        let p = make_theta_family(theta, true);
        prop_assert!((p.correlator(0, 0).unwrap() - theta.cos()).abs() < 1e-15);
        prop_assert!((p.correlator(1, 0).unwrap() - theta.cos()).abs() < 1e-15);
        prop_assert!((p.correlator(0, 1).unwrap() - theta.sin()).abs() < 1e-15);
        prop_assert!((p.correlator(1, 1).unwrap() + theta.sin()).abs() < 1e-15);
        prop_assert!(p.correlator(2, 1).unwrap().abs() < 1e-15);
    }
}

#[test]
fn theta_family_is_no_signaling_across_the_range() {
    for i in 0..100 {
        let theta = std::f64::consts::FRAC_PI_2 * i as f64 / 99.0;
        for p in [make_theta_family(theta, false), make_theta_family(theta, true), make_theta_family_primed(theta)] {
            assert!(p.max_signaling() < 1e-14);
            let r = p.validate(1e-14);
            assert!(r.is_valid(), "{r:?}");
        }
    }
}

#[test]
fn signaling_tuple_is_flagged() {
    // Bob's output copies Alice's input: maximally signaling.
    let s = BellScenario::chsh();
    let p = DistributionTuple::from_fn(s, |x, _, a, b| if b == x { 0.5 } else { 0.0 } * if a < 2 { 1.0 } else { 0.0 });
    let r = p.validate(1e-9);
    assert!(r.normalized && r.nonnegative && !r.no_signaling);
    assert!((r.max_signaling - 1.0).abs() < 1e-15);
}

#[test]
fn malformed_json_is_rejected() {
    assert!(DistributionTuple::from_json("{\"m\":2}").is_err());
    let ragged = r#"{"m":1,"n":1,"outputs_a":[-1,1],"outputs_b":[-1,1],"p":[[[[0.5,0.5],[0.0]]]]}"#;
    assert!(DistributionTuple::from_json(ragged).is_err());
    let bad_alphabet = r#"{"m":1,"n":1,"outputs_a":[1,1],"outputs_b":[-1,1],"p":[[[[0.25,0.25],[0.25,0.25]]]]}"#;
    assert!(matches!(DistributionTuple::from_json(bad_alphabet), Err(Error::Json(_)) | Err(Error::InvalidArgument(_))));
}
