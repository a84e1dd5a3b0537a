mod common;

use common::*;
use crffw::instances::{from_json_str, parse_uai, to_json_string};
use crffw::{brute_force_map, generate, read_json, solve, write_json, GeneratorSpec, SolverConfig, SolverMethod};
use proptest::prelude::*;
use rand::Rng;

fn spec_strategy() -> impl Strategy<Value = GeneratorSpec> {
    prop_oneof![
        (1usize..30, 1usize..5, any::<u64>()).prop_map(|(n, d, s)| GeneratorSpec::dense(n, d, s)),
        (1usize..5, 1usize..5, 1usize..4, any::<u64>()).prop_map(|(r, c, d, s)| GeneratorSpec::grid(r, c, d, s)),
        (1usize..10, 1usize..4, 0.0f64..1.0, any::<u64>()).prop_map(|(n, d, p, s)| GeneratorSpec::edge_list(n, d, p, s)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generation_is_pure(spec in spec_strategy()) {
        prop_assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn json_round_trip_preserves_energies(spec in spec_strategy(), seed in any::<u64>()) {
        let inst = generate(&spec).unwrap();
        let back = from_json_str(&to_json_string(&inst)).unwrap();
        let mut r = rng(seed);
        for _ in 0..20 {
            let x = random_point(&mut r, inst.n_nodes(), inst.n_labels());
            prop_assert_eq!(inst.energy_relaxed(&x).unwrap(), back.energy_relaxed(&x).unwrap());
        }
    }
}

/// Random pairwise MARKOV network; returns the text and the factor tables.
fn random_uai(r: &mut rand_chacha::ChaCha8Rng, n: usize, d: usize) -> (String, Vec<(Vec<usize>, Vec<f64>)>) {
    let mut factors = Vec::new();
    for i in 0..n {
        if r.random::<f64>() < 0.7 {
            factors.push((vec![i], (0..d).map(|_| r.random::<f64>() + 0.01).collect()));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if r.random::<f64>() < 0.6 {
                let scope = if r.random::<bool>() { vec![i, j] } else { vec![j, i] };
                let mut table: Vec<f64> = (0..d * d).map(|_| r.random::<f64>() + 0.01).collect();
                if r.random::<f64>() < 0.2 {
                    table[r.random_range(0..d * d)] = 0.0;
                }
                factors.push((scope, table));
            }
        }
    }
    let mut text = format!("MARKOV\n{n}\n{}\n{}\n", vec![d.to_string(); n].join(" "), factors.len());
    for (scope, _) in &factors {
        let vars: Vec<String> = scope.iter().map(|v| v.to_string()).collect();
        text.push_str(&format!("{} {}\n", scope.len(), vars.join(" ")));
    }
    for (_, table) in &factors {
        let vals: Vec<String> = table.iter().map(|v| format!("{v:e}")).collect();
        text.push_str(&format!("\n{}\n{}\n", table.len(), vals.join(" ")));
    }
    (text, factors)
}

/// Labeling maximizing the product of factor values, with the first maximizer kept.
fn product_argmax(n: usize, d: usize, factors: &[(Vec<usize>, Vec<f64>)]) -> (Vec<usize>, f64) {
    let mut best = (Vec::new(), -1.0);
    for labels in all_labelings(n, d) {
        let mut prod = 1.0f64;
        for (scope, table) in factors {
            let idx = scope.iter().fold(0, |acc, &v| acc * d + labels[v]);
            prod *= table[idx];
        }
        if prod > best.1 {
            best = (labels, prod);
        }
    }
    best
}

#[test]
fn uai_map_matches_product_maximization() {
    let mut r = rng(77);
    let mut checked = 0;
    for case in 0..200 {
        let (n, d) = [(2, 2), (3, 2), (4, 3), (6, 2), (3, 4), (4, 2)][case % 6];
        let (text, factors) = random_uai(&mut r, n, d);
        let inst = parse_uai(&text).unwrap();
        let (labels, prod) = product_argmax(n, d, &factors);
        let oracle = brute_force_map(&inst).unwrap();
        if prod <= 0.0 {
            continue;
        }
        checked += 1;
        let e = inst.energy_discrete(&crffw::Labeling::new(labels.clone())).unwrap();
        assert!((e - oracle.optimal_energy).abs() <= 1e-9 * (1.0 + e.abs()), "case {case}");
        assert!((oracle.optimal_energy + prod.ln()).abs() <= 1e-9 * (1.0 + prod.ln().abs()));
    }
    assert!(checked > 150);
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.json");
    let inst = generate(&GeneratorSpec::grid(3, 3, 4, 5)).unwrap();
    write_json(&inst, &path).unwrap();
    assert_eq!(read_json(&path).unwrap(), inst);
    let missing = read_json(dir.path().join("missing.json")).unwrap_err().to_string();
    assert!(missing.contains("missing.json"));
}

#[test]
fn default_dense_instance_runs_every_solver() {
    let inst = generate(&GeneratorSpec::dense(500, 21, 0)).unwrap();
    for method in ["fw", "cfw", "l2fw", "efw", "mf", "dmf", "pgd", "pgm", "emd", "admm"] {
        let method: SolverMethod = method.parse().unwrap();
        let mut config = SolverConfig::new(method, 20);
        config.regularizer = match method {
            SolverMethod::L2FW => crffw::Regularizer::L2 { lambda: 1.0 },
            SolverMethod::EntropicFW => crffw::Regularizer::Entropy { lambda: 0.25 },
            _ => crffw::Regularizer::None,
        };
        let (x, trace) = solve(&inst, &config).unwrap();
        assert_eq!(trace.len(), 20, "{method}");
        assert!(x.values().iter().all(|v| v.is_finite()), "{method}");
    }
}
