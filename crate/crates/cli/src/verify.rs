use std::time::Instant;

use anyhow::Context;
use clap::ValueEnum;
use crffw::instances::{from_json_str, to_json_string};
use crffw::{
    brute_force_map, finite_diff_gradient, generate, project_simplex, round_bcd, round_nearest, softmax_rows, solve,
    tightness_report, vertex_regularizer_constancy, CrfInstance, GeneratorSpec, Labeling, Regularizer, RelaxedPoint,
    SolverConfig, SolverMethod, StepsizeSchedule,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::io::write_json_file;
use crate::{CliError, CliResult, VerifyArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Invariants,
    Bounds,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

struct Checker {
    checks: Vec<Check>,
}

impl Checker {
    fn check(&mut self, name: &str, body: impl FnOnce() -> anyhow::Result<(bool, String)>) {
        let start = Instant::now();
        let (passed, detail) = body().unwrap_or_else(|e| (false, format!("error: {e:#}")));
        self.checks.push(Check { name: name.to_string(), passed, detail, seconds: start.elapsed().as_secs_f64() });
    }
}

fn small_instances(seed: u64) -> anyhow::Result<Vec<CrfInstance>> {
    [
        GeneratorSpec::dense(5, 3, seed),
        GeneratorSpec::grid(2, 3, 3, seed),
        GeneratorSpec::edge_list(6, 3, 0.5, seed),
    ]
    .iter()
    .map(|s| generate(s).map_err(Into::into))
    .collect()
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, d: usize) -> RelaxedPoint {
    let mut x = Array2::from_shape_simple_fn((n, d), || if rng.random_bool(0.15) { 0.0 } else { -rng.random::<f64>().ln() });
    for mut row in x.rows_mut() {
        if row.sum() == 0.0 {
            row[0] = 1.0;
        }
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    RelaxedPoint::new(x).expect("rows are normalized")
}

fn labelings(n: usize, d: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..d.pow(n as u32)).map(move |mut code| {
        (0..n)
            .map(|_| {
                let l = code % d;
                code /= d;
                l
            })
            .collect()
    })
}

fn invariants(seed: u64, c: &mut Checker) -> anyhow::Result<()> {
    let instances = small_instances(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    c.check("one_hot_energy_matches_discrete", || {
        let mut worst: f64 = 0.0;
        for inst in &instances {
            for labels in labelings(inst.n_nodes(), inst.n_labels()) {
                let l = Labeling::new(labels);
                let relaxed = inst.energy_relaxed(&RelaxedPoint::one_hot(&l, inst.n_labels())?)?;
                worst = worst.max((relaxed - inst.energy_discrete(&l)?).abs());
            }
        }
        Ok((worst <= 1e-9, format!("max difference {worst:e}")))
    });

    c.check("pairwise_operator_symmetric", || {
        let mut worst: f64 = 0.0;
        for inst in &instances {
            for _ in 0..20 {
                let a = random_point(&mut rng, inst.n_nodes(), inst.n_labels());
                let b = random_point(&mut rng, inst.n_nodes(), inst.n_labels());
                let pab = (&inst.pairwise_matvec(a.view())? * b.values()).sum();
                let pba = (&inst.pairwise_matvec(b.view())? * a.values()).sum();
                worst = worst.max((pab - pba).abs());
            }
        }
        Ok((worst <= 1e-9, format!("max asymmetry {worst:e}")))
    });

    c.check("gradient_matches_finite_differences", || {
        let mut worst: f64 = 0.0;
        for inst in &instances {
            let x = random_point(&mut rng, inst.n_nodes(), inst.n_labels());
            let g = inst.gradient(&x)?;
            let fd = finite_diff_gradient(inst, x.view(), 1e-5)?;
            worst = g.iter().zip(fd.iter()).fold(worst, |w, (a, b)| w.max((a - b).abs()));
        }
        Ok((worst <= 1e-6, format!("max difference {worst:e}")))
    });

    c.check("projection_kkt", || {
        let mut bad = 0;
        for _ in 0..200 {
            let d = rng.random_range(1..10);
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p = project_simplex(&v)?;
            let sum: f64 = p.iter().sum();
            // positive entries share one shift; zero entries sit at or below it
            let tau = v.iter().zip(&p).find(|(_, &x)| x > 0.0).map(|(a, b)| a - b).unwrap_or(0.0);
            let ok = (sum - 1.0).abs() <= 1e-12
                && p.iter().all(|&x| x >= 0.0)
                && v.iter().zip(&p).all(|(&a, &x)| if x > 0.0 { (a - x - tau).abs() <= 1e-9 } else { a <= tau + 1e-9 });
            bad += usize::from(!ok);
        }
        Ok((bad == 0, format!("failures {bad}/200")))
    });

    c.check("softmax_rows_positive_and_normalized", || {
        let v = Array2::from_shape_simple_fn((30, 6), || rng.random_range(-50.0..50.0));
        let s = softmax_rows(v.view());
        let ok = s.values().iter().all(|&x| x > 0.0)
            && s.values().rows().into_iter().all(|r| (r.sum() - 1.0).abs() <= 1e-12);
        let positive = s.values().iter().filter(|&&x| x > 0.0).count();
        Ok((ok, format!("positive entries {positive}/{}", s.values().len())))
    });

    c.check("bcd_rounding_never_increases_energy", || {
        let mut bad = 0;
        for inst in &instances {
            for _ in 0..50 {
                let x = random_point(&mut rng, inst.n_nodes(), inst.n_labels());
                let rounded = inst.energy_discrete(&round_bcd(inst, &x, 100)?)?;
                bad += usize::from(rounded > inst.energy_relaxed(&x)? + 1e-9);
            }
        }
        Ok((bad == 0, format!("increases {bad}/150")))
    });

    c.check("mean_field_equals_entropic_fw", || {
        let inst = generate(&GeneratorSpec::dense(40, 5, seed))?;
        let (x_mf, t_mf) = solve(&inst, &SolverConfig::new(SolverMethod::MeanField, 5))?;
        let efw = SolverConfig::new(SolverMethod::EntropicFW, 5)
            .with_regularizer(Regularizer::Entropy { lambda: 1.0 })
            .with_schedule(StepsizeSchedule::Constant { alpha: 1.0 });
        let (x_efw, t_efw) = solve(&inst, &efw)?;
        let same = x_mf.values() == x_efw.values()
            && t_mf.records.iter().zip(&t_efw.records).all(|(a, b)| a.e_cont == b.e_cont);
        Ok((same, format!("{} iterations compared", t_mf.len())))
    });

    c.check("iterates_feasible", || {
        let inst = generate(&GeneratorSpec::grid(4, 4, 4, seed))?;
        let configs = [
            SolverConfig::new(SolverMethod::VanillaFW, 15),
            SolverConfig::new(SolverMethod::ConvexFW, 15),
            SolverConfig::new(SolverMethod::L2FW, 15).with_regularizer(Regularizer::L2 { lambda: 1.0 }),
            SolverConfig::new(SolverMethod::EntropicFW, 15).with_regularizer(Regularizer::Entropy { lambda: 0.25 }),
            SolverConfig::new(SolverMethod::MeanField, 15),
            SolverConfig::new(SolverMethod::DampedMeanField { alpha: 0.5 }, 15),
            SolverConfig::new(SolverMethod::PGD, 15),
            SolverConfig::new(SolverMethod::FastPGM, 15),
            SolverConfig::new(SolverMethod::EMD, 15),
            SolverConfig::new(SolverMethod::ADMM { rho: 1.0 }, 15),
        ];
        let mut bad = Vec::new();
        for config in configs {
            let (_, trace) = solve(&inst, &config.clone().with_iterates(true))?;
            let feasible = trace.iterates.iter().flatten().all(|x| {
                x.iter().all(|&v| v >= 0.0) && x.rows().into_iter().all(|r| (r.sum() - 1.0).abs() <= 1e-9)
            });
            if !feasible {
                bad.push(config.method.to_string());
            }
        }
        Ok((bad.is_empty(), if bad.is_empty() { "10 methods".into() } else { format!("infeasible: {}", bad.join(",")) }))
    });

    c.check("regularizers_constant_on_vertices", || {
        let ok = vertex_regularizer_constancy(&Regularizer::L2 { lambda: 0.7 }, 4, 3)
            && vertex_regularizer_constancy(&Regularizer::Entropy { lambda: 1.3 }, 4, 3)
            && vertex_regularizer_constancy(&Regularizer::Entropy { lambda: 0.5 }, 30, 5);
        Ok((ok, "l2 and entropy".into()))
    });

    c.check("json_round_trip_preserves_energy", || {
        let mut diffs = 0;
        for inst in &instances {
            let back = from_json_str(&to_json_string(inst))?;
            for _ in 0..20 {
                let x = random_point(&mut rng, inst.n_nodes(), inst.n_labels());
                diffs += usize::from(inst.energy_relaxed(&x)? != back.energy_relaxed(&x)?);
            }
        }
        Ok((diffs == 0, format!("differences {diffs}/60")))
    });
    Ok(())
}

fn bounds(seed: u64, c: &mut Checker) -> anyhow::Result<()> {
    let specs = [
        ("dense", GeneratorSpec::dense(40, 4, seed)),
        ("grid", GeneratorSpec::grid(5, 6, 3, seed)),
        ("edges", GeneratorSpec::edge_list(20, 3, 0.3, seed)),
    ];
    for (kind, spec) in specs {
        let inst = generate(&spec)?;
        let lip = inst.lipschitz_upper_bound();
        for lambda in [0.25, 1.0] {
            let omega = lambda / (lip + lambda);
            for (method, reg) in [
                (SolverMethod::L2FW, Regularizer::L2 { lambda }),
                (SolverMethod::EntropicFW, Regularizer::Entropy { lambda }),
            ] {
                for schedule in [
                    StepsizeSchedule::Adaptive { lipschitz: lip, sigma: lambda },
                    StepsizeSchedule::Constant { alpha: 0.5 * omega },
                    StepsizeSchedule::Constant { alpha: omega },
                    StepsizeSchedule::Constant { alpha: 1.5 * omega },
                ] {
                    let name = format!("{kind}/{method}@{lambda}/{schedule}");
                    c.check(&name, || {
                        let config = SolverConfig::new(method, 30)
                            .with_regularizer(reg)
                            .with_schedule(schedule)
                            .with_bound_check(true);
                        let (_, trace) = solve(&inst, &config)?;
                        let violations = trace.bound_violations();
                        let checked = trace.records.iter().filter(|r| r.bound_held.is_some()).count();
                        Ok((violations == 0 && checked > 0, format!("violations {violations}/{checked}")))
                    });
                }
            }
        }
    }
    Ok(())
}

fn oracle(seed: u64, c: &mut Checker) -> anyhow::Result<()> {
    let instances: Vec<CrfInstance> = (0..30)
        .map(|i| {
            let s = seed.wrapping_mul(1000).wrapping_add(i);
            let spec = match i % 3 {
                0 => GeneratorSpec::dense(6, 3, s),
                1 => GeneratorSpec::grid(2, 4, 3, s),
                _ => GeneratorSpec::edge_list(7, 3, 0.4, s),
            };
            generate(&spec)
        })
        .collect::<crffw::Result<_>>()?;

    c.check("fw_with_bcd_finds_exact_map", || {
        let mut exact = 0;
        for inst in &instances {
            let oracle = brute_force_map(inst)?;
            let (x, _) = solve(inst, &SolverConfig::new(SolverMethod::VanillaFW, 200))?;
            let e = inst.energy_discrete(&round_bcd(inst, &x, 100)?)?;
            exact += usize::from(e <= oracle.optimal_energy + 1e-9);
        }
        Ok((exact * 10 >= instances.len() * 7, format!("exact {exact}/{}", instances.len())))
    });

    c.check("rounded_energy_at_least_optimum", || {
        let mut bad = 0;
        for inst in &instances {
            let (x, _) = solve(
                inst,
                &SolverConfig::new(SolverMethod::EntropicFW, 50).with_regularizer(Regularizer::Entropy { lambda: 0.25 }),
            )?;
            let r = tightness_report(inst, &x, &Regularizer::Entropy { lambda: 0.25 }, false)?;
            bad += usize::from(!r.lower_held);
        }
        Ok((bad == 0, format!("violations {bad}/{}", instances.len())))
    });

    c.check("vertex_tightness", || {
        let mut bad = 0;
        for inst in &instances {
            let oracle = brute_force_map(inst)?;
            let x = RelaxedPoint::one_hot(&oracle.optimal_labeling, inst.n_labels())?;
            let relaxed = inst.energy_relaxed(&x)?;
            let nearest = inst.energy_discrete(&round_nearest(&x))?;
            bad += usize::from((relaxed - oracle.optimal_energy).abs() > 1e-9 || nearest != oracle.optimal_energy);
        }
        Ok((bad == 0, format!("mismatches {bad}/{}", instances.len())))
    });

    c.check("gradient_matches_finite_differences", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for inst in &instances {
            let x = random_point(&mut rng, inst.n_nodes(), inst.n_labels());
            let g = inst.gradient(&x)?;
            let fd = finite_diff_gradient(inst, x.view(), 1e-5)?;
            worst = g.iter().zip(fd.iter()).fold(worst, |w, (a, b)| w.max((a - b).abs()));
        }
        Ok((worst <= 1e-6, format!("max difference {worst:e}")))
    });
    Ok(())
}

pub(crate) fn run(args: &VerifyArgs) -> CliResult<()> {
    let mut checker = Checker { checks: Vec::new() };
    match args.suite {
        Suite::Invariants => invariants(args.seed, &mut checker)?,
        Suite::Bounds => bounds(args.seed, &mut checker)?,
        Suite::Oracle => oracle(args.seed, &mut checker)?,
    }
    let passed = checker.checks.iter().all(|c| c.passed);
    let report = Report { suite: args.suite, seed: args.seed, passed, checks: checker.checks };
    println!("{}", serde_json::to_string_pretty(&report).context("encoding report")?);
    if let Some(path) = &args.out {
        write_json_file(path, &report)?;
    }
    if passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(CliError::Runtime(anyhow::anyhow!("failed checks: {}", failed.join(", "))))
    }
}
