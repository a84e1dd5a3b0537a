mod common;

use common::*;
use crffw::{
    brute_force_map, decrease_bound, finite_diff_gradient, round_bcd, solve, tightness_report, ConvergenceParams,
    CrfInstance, Edge, EdgeList, Labeling, PairwiseBackend, Regularizer, SolverConfig, SolverMethod,
    StepsizeSchedule, potts,
};
use ndarray::array;
use proptest::prelude::*;

fn kind_strategy() -> impl Strategy<Value = Kind> {
    prop_oneof![Just(Kind::Dense), Just(Kind::Edges), Just(Kind::Gaussian)]
}

fn reenumerate(inst: &CrfInstance) -> (Vec<usize>, f64) {
    let mut best = (Vec::new(), f64::INFINITY);
    for labels in all_labelings(inst.n_nodes(), inst.n_labels()) {
        let e = naive_discrete(inst, &labels);
        if e < best.1 {
            best = (labels, e);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn brute_force_matches_reenumeration(seed in any::<u64>(), kind in kind_strategy(), n in 1usize..7, d in 1usize..4) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, kind, n, d);
        let report = brute_force_map(&inst).unwrap();
        let (labels, e) = reenumerate(&inst);
        prop_assert_eq!(report.enumerated_count, (d as u64).pow(n as u32));
        prop_assert!((report.optimal_energy - e).abs() <= 1e-9);
        prop_assert_eq!(report.optimal_energy, inst.energy_discrete(&report.optimal_labeling).unwrap());
        // continuous ties are measure-zero, so the labelings coincide
        prop_assert_eq!(report.optimal_labeling.labels(), labels.as_slice());
    }

    #[test]
    fn central_differences_are_exact_on_quadratics(seed in any::<u64>(), kind in kind_strategy(), n in 1usize..6, d in 1usize..4) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, kind, n, d);
        let x = random_point(&mut r, n, d);
        let g = inst.gradient(&x).unwrap();
        let fd = finite_diff_gradient(&inst, x.view(), 1e-5).unwrap();
        for (a, b) in g.iter().zip(fd.iter()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn decrease_bound_rows_are_consistent(lip in 0.0f64..10.0, sigma in 0.0f64..5.0, n in 1usize..50, s in 0.0f64..10.0, alpha in 0.0f64..1.0, sq in 0.0f64..4.0) {
        let params = ConvergenceParams::new(lip, sigma, n);
        let omega = params.omega;
        // adaptive row: omega S when strongly convex
        let adaptive = decrease_bound(&params, &StepsizeSchedule::Adaptive { lipschitz: lip, sigma }, 0, s, sq).unwrap();
        if lip == 0.0 {
            prop_assert!((adaptive - s).abs() <= 1e-12);
        } else if sigma > 0.0 {
            prop_assert!((adaptive - omega * s).abs() <= 1e-12);
        }
        let constant = decrease_bound(&params, &StepsizeSchedule::Constant { alpha }, 0, s, sq).unwrap();
        if lip > 0.0 && sigma > 0.0 && alpha < 2.0 * omega {
            prop_assert!((constant - alpha * (2.0 - alpha / omega).min(1.0) * s).abs() <= 1e-12);
        }
    }
}

#[test]
fn two_node_potts_oracle() {
    let edges = vec![Edge { i: 0, j: 1, theta: potts(2, 1.0) }];
    let inst = CrfInstance::new(
        array![[0.0, 1.0], [1.0, 0.0]],
        PairwiseBackend::Edges(EdgeList::new(2, 2, edges).unwrap()),
    )
    .unwrap();
    let report = brute_force_map(&inst).unwrap();
    assert_eq!(report.optimal_energy, 1.0);
    assert_eq!(report.optimal_labeling, Labeling::new(vec![0, 0]));
    assert_eq!(report.enumerated_count, 4);
}

#[test]
fn oracle_quality_floor() {
    let family = |max_iters| {
        vec![
            SolverConfig::new(SolverMethod::VanillaFW, max_iters),
            SolverConfig::new(SolverMethod::ConvexFW, max_iters),
            SolverConfig::new(SolverMethod::L2FW, max_iters).with_regularizer(Regularizer::L2 { lambda: 0.5 }),
            SolverConfig::new(SolverMethod::EntropicFW, max_iters).with_regularizer(Regularizer::Entropy { lambda: 0.25 }),
            SolverConfig::new(SolverMethod::MeanField, max_iters),
        ]
    };
    let mut exact = 0;
    let mut r = rng(100);
    for seed in 0..100u64 {
        let kind = KINDS[seed as usize % 3];
        let n = 2 + (seed as usize % 5);
        let d = 2 + (seed as usize % 2);
        let inst = random_instance(&mut r, kind, n, d);
        let e_star = brute_force_map(&inst).unwrap().optimal_energy;
        for (m, config) in family(200).into_iter().enumerate() {
            let (x, _) = solve(&inst, &config).unwrap();
            let decoded = inst.energy_discrete(&round_bcd(&inst, &x, 100).unwrap()).unwrap();
            assert!(decoded - e_star >= -1e-9, "seed {seed}: decoded {decoded} below optimum {e_star}");
            if m == 0 && (decoded - e_star).abs() <= 1e-9 {
                exact += 1;
            }
        }
    }
    assert!(exact >= 70, "vanilla FW with line search recovered the optimum on {exact}/100");
}

#[test]
fn tightness_on_vertices() {
    let mut r = rng(4);
    for kind in KINDS {
        let inst = random_instance(&mut r, kind, 4, 3);
        let oracle = brute_force_map(&inst).unwrap();
        let x = one_hot(oracle.optimal_labeling.labels(), 3);
        let report = tightness_report(&inst, &x, &Regularizer::None, true).unwrap();
        assert_eq!(report.e_rounded_nearest, report.e_star);
        assert_eq!(report.e_rounded_bcd, report.e_star);
        assert!(report.lower_held);
        assert_eq!(report.upper_held, Some(true));
        let l2 = tightness_report(&inst, &x, &Regularizer::L2 { lambda: 1.0 }, false).unwrap();
        assert!((l2.bound_bcd - (l2.e_star + 2.0 - 4.0 / 6.0)).abs() < 1e-12);
        assert_eq!(l2.upper_held, None);
    }
}
