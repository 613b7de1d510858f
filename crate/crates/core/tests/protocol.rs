use std::f64::consts::FRAC_PI_4;

use bellkit_core::monotones::NuMap;
use bellkit_core::protocol::{
    analytic_joint, run_lemma_protocol, run_protocol, run_protocol_traced, ProtocolSpec, BLOCK_ROUNDS,
};
use bellkit_core::scenario::{make_theta_family, make_theta_family_primed, THETA_SUBSTITUTION};
use bellkit_core::transforms::{check_order, OrderVerdict};
use proptest::prelude::*;

fn specs() -> Vec<ProtocolSpec> {
    let mut v = vec![ProtocolSpec::MeasureAndMask { xi: 1, zeta: 0 }];
    v.extend(NuMap::ALL.iter().map(|&nu| ProtocolSpec::NuMasked { nu }));
    v
}

#[test]
fn every_cell_within_five_sigma_of_the_exact_joint() {
    for theta in [0.2, FRAC_PI_4, 1.3] {
        let p = make_theta_family(theta, true);
        for (k, spec) in specs().iter().enumerate() {
            let sim = run_protocol(&p, spec, 400_000, 100 + k as u64).unwrap();
            let exact = analytic_joint(&p, spec).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    let q = exact[a][b];
                    let sigma = (q * (1.0 - q) / sim.rounds as f64).sqrt().max(1e-12);
                    assert!((sim.joint_ab[a][b] - q).abs() <= 5.0 * sigma, "{spec:?} cell ({a},{b})");
                }
            }
        }
    }
}

#[test]
fn correlator_consistent_in_repeated_runs() {
    let p = make_theta_family(0.6, true);
    let s = p.scenario().clone();
    for spec in specs() {
        let analytic = bellkit_core::protocol::correlator_of(&s, &analytic_joint(&p, &spec).unwrap());
        let within = (0..100u64)
            .filter(|&seed| {
                let sim = run_protocol(&p, &spec, 20_000, seed).unwrap();
                (sim.empirical_correlator.unwrap() - analytic).abs() <= 5.0 * sim.correlator_stderr.unwrap()
            })
            .count();
        assert!(within >= 99, "{spec:?}: {within}/100");
    }
}

#[test]
fn masking_makes_marginals_uniform() {
    let p = make_theta_family(0.9, true);
    for spec in specs() {
        let exact = analytic_joint(&p, &spec).unwrap();
        for a in 0..2 {
            assert!((exact[a][0] + exact[a][1] - 0.5).abs() < 1e-15);
            assert!((exact[0][a] + exact[1][a] - 0.5).abs() < 1e-15);
        }
    }
}

#[test]
fn certificate_from_the_order_check_drives_the_simulation() {
    let theta = 0.5;
    let p = make_theta_family(theta, true);
    let target = make_theta_family_primed(theta);
    let cert = match check_order(&p, &target, 1e-9).unwrap() {
        OrderVerdict::Feasible(c) => c,
        OrderVerdict::Infeasible(w) => panic!("{w:?}"),
    };
    for x in 0..3 {
        let sim = run_lemma_protocol(&p, &cert, x, 1, 300_000, x as u64).unwrap();
        let exact: Vec<Vec<f64>> = target.block(x, 1).chunks(2).map(<[f64]>::to_vec).collect();
        assert!(sim.tv_distance(&exact) < 0.006);
    }
    // The substitution reads Alice's input z(x) in every wired round.
    let spec = ProtocolSpec::WiringLemma { certificate: cert.clone(), x: 2, y: 0 };
    let (_, rows) = run_protocol_traced(&p, &spec, 2000, 3).unwrap();
    if cert.terms.len() == 1 && cert.p0 == 0.0 && cert.terms[0].wiring.z == THETA_SUBSTITUTION {
        assert!(rows.iter().all(|r| r.x == 0));
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let p = make_theta_family(0.3, false);
    let spec = ProtocolSpec::MeasureAndMask { xi: 0, zeta: 1 };
    let rounds = 5 * BLOCK_ROUNDS + 17;
    let reference = run_protocol(&p, &spec, rounds, 77).unwrap();
    for threads in [1, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        assert_eq!(pool.install(|| run_protocol(&p, &spec, rounds, 77).unwrap()), reference);
    }
    assert_eq!(reference.rounds, rounds);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn seeds_reproduce(seed in any::<u64>(), rounds in 1u64..200_000, which in 0usize..5) {
        let p = make_theta_family(0.8, true);
        let spec = &specs()[which];
        let a = run_protocol(&p, spec, rounds, seed).unwrap();
        prop_assert_eq!(&a, &run_protocol(&p, spec, rounds, seed).unwrap());
        prop_assert_eq!(a.counts.iter().flatten().sum::<u64>(), rounds);
    }
}
