use std::path::PathBuf;

use anyhow::Context;
use crffw::{generate, solve, CrfInstance, GeneratorSpec, IterationTrace, Regularizer, SolverConfig, SolverMethod};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{create, load_instance, write_json_file};
use crate::solve::{parse_schedule, regularizer_for};
use crate::{classify, usage, CliError, CliResult, CompareArgs};

/// One entry of `--methods`: `method[@lambda][+stepsize]`, e.g. `efw@0.25+linesearch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub label: String,
    pub method: SolverMethod,
    pub lambda: Option<f64>,
    pub stepsize: Option<String>,
}

impl MethodSpec {
    pub fn parse(text: &str) -> CliResult<Self> {
        let text = text.trim();
        let (head, stepsize) = match text.split_once('+') {
            Some((h, s)) => (h, Some(s.to_string())),
            None => (text, None),
        };
        let (name, lambda) = match head.split_once('@') {
            Some((n, l)) => {
                let l: f64 = l.parse().map_err(|_| usage(format!("method entry '{text}': bad lambda '{l}'")))?;
                (n, Some(l))
            }
            None => (head, None),
        };
        let method: SolverMethod = name.parse().map_err(classify)?;
        regularizer_for(method, lambda)?;
        Ok(MethodSpec { label: text.to_string(), method, lambda, stepsize })
    }

    fn config(&self, instance: &CrfInstance, steps: usize) -> CliResult<SolverConfig> {
        let reg = regularizer_for(self.method, self.lambda)?;
        let mut config = SolverConfig::new(self.method, steps).with_regularizer(reg);
        if let Some(s) = &self.stepsize {
            config = config.with_schedule(parse_schedule(s, instance, &reg)?);
        }
        config.validate().map_err(classify)?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestMethod {
    pub label: String,
    pub method: String,
    pub regularizer: Regularizer,
    pub schedule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub method: String,
    pub lambdas: Vec<f64>,
    pub iteration: usize,
}

/// Everything needed to rerun a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub instances: Vec<String>,
    pub methods: Vec<ManifestMethod>,
    pub steps: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub sweep: Option<SweepSettings>,
}

impl RunManifest {
    pub fn validate(&self) -> CliResult<()> {
        if self.methods.is_empty() {
            return Err(usage("at least one method is required"));
        }
        if self.steps == 0 {
            return Err(usage("--steps must be positive"));
        }
        if self.instances.is_empty() {
            return Err(usage("at least one instance is required"));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct MethodSummary {
    label: String,
    final_mean_e_disc: Option<f64>,
    final_mean_e_cont: f64,
    final_mean_e_reg: f64,
    mean_time_ms: f64,
}

#[derive(Serialize)]
struct SweepSummary {
    method: String,
    iteration: usize,
    lambdas: Vec<f64>,
    mean_e_disc: Vec<f64>,
    argmin_lambda_of_mean: f64,
    argmin_lambda_per_instance: Vec<f64>,
    instances_with_argmin_below_one: usize,
}

#[derive(Serialize)]
struct Summary {
    instances: usize,
    steps: usize,
    methods: Vec<MethodSummary>,
    sweep: Option<SweepSummary>,
}

pub(crate) fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("lambda grid '{text}' must be start:stop:step")))?;
    let [start, stop, step] = parts[..] else {
        return Err(usage(format!("lambda grid '{text}' must be start:stop:step")));
    };
    if !(start > 0.0 && step > 0.0 && stop >= start) {
        return Err(usage(format!("lambda grid '{text}' needs 0 < start <= stop and step > 0")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn run_solve(instance: &CrfInstance, config: &SolverConfig) -> CliResult<IterationTrace> {
    solve(instance, config).map(|(_, t)| t).map_err(|e| match e {
        crffw::Error::Diverged { method, iteration, .. } => {
            CliError::Runtime(anyhow::anyhow!("{method} diverged at iteration {iteration}"))
        }
        other => classify(other),
    })
}

pub(crate) fn run(args: &CompareArgs) -> CliResult<()> {
    let specs: Vec<MethodSpec> = args
        .methods
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(MethodSpec::parse)
        .collect::<CliResult<_>>()?;
    let (names, instances): (Vec<String>, Vec<CrfInstance>) = match args.generate {
        Some(count) => (0..count as u64)
            .map(|i| {
                let seed = args.seed + i;
                let spec = GeneratorSpec::dense(args.nodes, args.labels, seed);
                Ok((format!("dense:{}x{}:seed{seed}", args.nodes, args.labels), generate(&spec).map_err(classify)?))
            })
            .collect::<CliResult<Vec<_>>>()?
            .into_iter()
            .unzip(),
        None => args
            .instances
            .iter()
            .map(|p| Ok((p.display().to_string(), load_instance(p)?)))
            .collect::<CliResult<Vec<_>>>()?
            .into_iter()
            .unzip(),
    };
    if args.generate.is_some() && !args.instances.is_empty() {
        return Err(usage("pass either --instance or --generate, not both"));
    }

    let sweep = match args.sweep_method.as_str() {
        "none" => None,
        m => {
            let method: SolverMethod = m.parse().map_err(classify)?;
            if !matches!(method, SolverMethod::L2FW | SolverMethod::EntropicFW) {
                return Err(usage("--sweep-method must be l2fw, efw or none"));
            }
            if args.sweep_iter == 0 {
                return Err(usage("--sweep-iter must be positive"));
            }
            Some((method, parse_grid(&args.lambdas)?))
        }
    };

    let first = instances.first().ok_or_else(|| usage("at least one instance is required (--instance or --generate)"))?;
    let manifest = RunManifest {
        instances: names.clone(),
        methods: specs
            .iter()
            .map(|s| {
                let c = s.config(first, args.steps)?;
                Ok(ManifestMethod {
                    label: s.label.clone(),
                    method: s.method.to_string(),
                    regularizer: c.effective_regularizer().map_err(classify)?,
                    schedule: c.effective_schedule().map_err(classify)?.to_string(),
                })
            })
            .collect::<CliResult<_>>()?,
        steps: args.steps,
        out_dir: args.out.clone(),
        seed: args.seed,
        sweep: sweep.as_ref().map(|(m, l)| SweepSettings { method: m.to_string(), lambdas: l.clone(), iteration: args.sweep_iter }),
    };
    manifest.validate()?;

    // traces[instance][method]
    let traces: Vec<Vec<IterationTrace>> = instances
        .par_iter()
        .map(|inst| specs.iter().map(|s| run_solve(inst, &s.config(inst, args.steps)?)).collect())
        .collect::<CliResult<_>>()?;
    // sweep[instance][lambda] = (e_disc, e_reg)
    let sweep_values: Option<Vec<Vec<(f64, f64)>>> = match &sweep {
        None => None,
        Some((method, lambdas)) => Some(
            instances
                .par_iter()
                .map(|inst| {
                    lambdas
                        .iter()
                        .map(|&l| {
                            let reg = regularizer_for(*method, Some(l))?;
                            let config = SolverConfig::new(*method, args.sweep_iter).with_regularizer(reg);
                            let t = run_solve(inst, &config)?;
                            let r = t.last().expect("sweep iteration is positive");
                            Ok((r.e_disc.unwrap_or(f64::NAN), r.e_reg))
                        })
                        .collect()
                })
                .collect::<CliResult<_>>()?,
        ),
    };

    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_json_file(&args.out.join("manifest.json"), &manifest)?;

    let mut by_iter = csv::Writer::from_writer(create(&args.out.join("energy_by_iteration.csv"))?);
    by_iter.write_record(["method", "k", "mean_e_disc", "mean_e_cont", "mean_e_reg"]).map_err(anyhow::Error::from)?;
    let mut method_summaries = Vec::new();
    for (m, spec) in specs.iter().enumerate() {
        for k in 0..=args.steps {
            let pick = |t: &IterationTrace| {
                if k == 0 {
                    (t.initial.e_disc, t.initial.e_cont, t.initial.e_reg)
                } else {
                    let r = &t.records[k - 1];
                    (r.e_disc, r.e_cont, r.e_reg)
                }
            };
            let rows: Vec<_> = traces.iter().map(|t| pick(&t[m])).collect();
            let disc = rows.iter().map(|r| r.0).collect::<Option<Vec<f64>>>().map(|v| mean(v.into_iter()));
            let cont = mean(rows.iter().map(|r| r.1));
            let reg = mean(rows.iter().map(|r| r.2));
            by_iter
                .write_record([
                    spec.label.clone(),
                    k.to_string(),
                    disc.map(|v| v.to_string()).unwrap_or_default(),
                    cont.to_string(),
                    reg.to_string(),
                ])
                .map_err(anyhow::Error::from)?;
            if k == args.steps {
                method_summaries.push(MethodSummary {
                    label: spec.label.clone(),
                    final_mean_e_disc: disc,
                    final_mean_e_cont: cont,
                    final_mean_e_reg: reg,
                    mean_time_ms: if args.no_timing {
                        0.0
                    } else {
                        mean(traces.iter().map(|t| t[m].last().map_or(0.0, |r| r.time_ms)))
                    },
                });
            }
        }
    }
    by_iter.flush().map_err(anyhow::Error::from)?;

    let mut finals = csv::Writer::from_writer(create(&args.out.join("final_by_instance.csv"))?);
    finals.write_record(["instance", "method", "e_disc", "e_cont", "e_reg"]).map_err(anyhow::Error::from)?;
    for (name, per_method) in names.iter().zip(&traces) {
        for (spec, t) in specs.iter().zip(per_method) {
            let r = t.last().expect("steps is positive");
            finals
                .write_record([
                    name.clone(),
                    spec.label.clone(),
                    r.e_disc.map(|v| v.to_string()).unwrap_or_default(),
                    r.e_cont.to_string(),
                    r.e_reg.to_string(),
                ])
                .map_err(anyhow::Error::from)?;
        }
    }
    finals.flush().map_err(anyhow::Error::from)?;

    let sweep_summary = match (&sweep, &sweep_values) {
        (Some((method, lambdas)), Some(values)) => {
            let mut w = csv::Writer::from_writer(create(&args.out.join("lambda_sweep.csv"))?);
            w.write_record(["instance", "lambda", "e_disc", "e_reg"]).map_err(anyhow::Error::from)?;
            for (name, row) in names.iter().zip(values) {
                for (l, (disc, reg)) in lambdas.iter().zip(row) {
                    w.write_record([name.clone(), l.to_string(), disc.to_string(), reg.to_string()])
                        .map_err(anyhow::Error::from)?;
                }
            }
            w.flush().map_err(anyhow::Error::from)?;
            let argmin = |v: &[f64]| {
                let best = v.iter().enumerate().fold(0, |b, (i, &x)| if x < v[b] { i } else { b });
                lambdas[best]
            };
            let mean_e: Vec<f64> = (0..lambdas.len()).map(|j| mean(values.iter().map(|row| row[j].0))).collect();
            let per_instance: Vec<f64> =
                values.iter().map(|row| argmin(&row.iter().map(|r| r.0).collect::<Vec<_>>())).collect();
            Some(SweepSummary {
                method: method.to_string(),
                iteration: args.sweep_iter,
                lambdas: lambdas.clone(),
                argmin_lambda_of_mean: argmin(&mean_e),
                mean_e_disc: mean_e,
                instances_with_argmin_below_one: per_instance.iter().filter(|&&l| l < 1.0).count(),
                argmin_lambda_per_instance: per_instance,
            })
        }
        _ => None,
    };

    let summary = Summary { instances: instances.len(), steps: args.steps, methods: method_summaries, sweep: sweep_summary };
    write_json_file(&args.out.join("summary.json"), &summary)?;

    for m in &summary.methods {
        let disc = m.final_mean_e_disc.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        println!("{:<20} mean e_disc {disc:>14}  mean e_cont {:.4}", m.label, m.final_mean_e_cont);
    }
    if let Some(s) = &summary.sweep {
        println!(
            "{} sweep at iteration {}: best mean lambda {} ({} of {} instances below 1)",
            s.method,
            s.iteration,
            s.argmin_lambda_of_mean,
            s.instances_with_argmin_below_one,
            summary.instances
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_entries() {
        let s = MethodSpec::parse("efw@0.25+linesearch").unwrap();
        assert_eq!(s.method, SolverMethod::EntropicFW);
        assert_eq!(s.lambda, Some(0.25));
        assert_eq!(s.stepsize.as_deref(), Some("linesearch"));
        assert_eq!(MethodSpec::parse("dmf:0.3").unwrap().method, SolverMethod::DampedMeanField { alpha: 0.3 });
        assert!(matches!(MethodSpec::parse("efw"), Err(CliError::Usage(_))));
        assert!(matches!(MethodSpec::parse("nosuch"), Err(CliError::Usage(_))));
        assert!(matches!(MethodSpec::parse("l2fw@-1"), Err(CliError::Usage(_))));
    }

    #[test]
    fn default_grid_has_25_points() {
        let g = parse_grid("0.1:2.5:0.1").unwrap();
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[9], 1.0);
        assert_eq!(g[24], 2.5);
        assert!(parse_grid("1:0.5:0.1").is_err());
        assert!(parse_grid("0.1:1").is_err());
    }
}
