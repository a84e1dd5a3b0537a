use std::io::Write;

use anyhow::Context;
use crffw::{
    generate, round_bcd, round_nearest, solve, CrfInstance, GeneratorSpec, Regularizer, SolverConfig, SolverMethod,
    StepsizeSchedule,
};
use serde::Serialize;

use crate::io::{create, load_instance, write_trace_csv};
use crate::{classify, usage, CliError, CliResult, SolveArgs};

/// Regularizer implied by a method and an optional `--lambda`.
pub(crate) fn regularizer_for(method: SolverMethod, lambda: Option<f64>) -> CliResult<Regularizer> {
    if let Some(l) = lambda {
        if !(l > 0.0 && l.is_finite()) {
            return Err(usage(format!("--lambda must be positive, got {l}")));
        }
    }
    let need = |what: &str| lambda.ok_or_else(|| usage(format!("{what} needs --lambda")));
    Ok(match method {
        SolverMethod::L2FW => Regularizer::L2 { lambda: need("l2fw")? },
        SolverMethod::EntropicFW => Regularizer::Entropy { lambda: need("efw")? },
        _ => Regularizer::None,
    })
}

/// Parses a schedule; a bare `adaptive` takes `L_f` from the instance and `sigma_g` from the
/// regularizer.
pub(crate) fn parse_schedule(text: &str, instance: &CrfInstance, reg: &Regularizer) -> CliResult<StepsizeSchedule> {
    if text.eq_ignore_ascii_case("adaptive") {
        return Ok(StepsizeSchedule::Adaptive {
            lipschitz: instance.lipschitz_upper_bound(),
            sigma: reg.strong_convexity(),
        });
    }
    text.parse().map_err(classify)
}

pub(crate) fn default_instance(seed: u64) -> CliResult<CrfInstance> {
    generate(&GeneratorSpec::dense(500, 21, seed)).map_err(classify)
}

#[derive(Serialize)]
struct Summary {
    method: String,
    regularizer: Regularizer,
    schedule: String,
    steps: usize,
    e_cont: f64,
    e_reg: f64,
    decoded_energy: f64,
    rounding: &'static str,
    bound_violations: usize,
}

pub(crate) fn run(args: &SolveArgs) -> CliResult<()> {
    let method: SolverMethod = args.method.parse().map_err(classify)?;
    let regularizer = regularizer_for(method, args.lambda)?;
    if args.steps == 0 {
        return Err(usage("--steps must be positive"));
    }
    let instance = match &args.instance {
        Some(path) => load_instance(path)?,
        None => default_instance(args.seed)?,
    };
    let mut config = SolverConfig::new(method, args.steps)
        .with_regularizer(regularizer)
        .with_bound_check(args.bound_check);
    if let Some(text) = &args.stepsize {
        config = config.with_schedule(parse_schedule(text, &instance, &regularizer)?);
    }
    config.validate().map_err(classify)?;

    let (x, trace) = match solve(&instance, &config) {
        Ok(done) => done,
        Err(crffw::Error::Diverged { method, iteration, trace }) => {
            if let Some(path) = &args.trace {
                write_trace_csv(&trace, create(path)?, !args.no_timing)?;
            }
            return Err(CliError::Runtime(anyhow::anyhow!("{method} diverged at iteration {iteration}")));
        }
        Err(e) => return Err(classify(e)),
    };
    if let Some(path) = &args.trace {
        write_trace_csv(&trace, create(path)?, !args.no_timing)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let (labeling, rounding) = if args.bcd {
        (round_bcd(&instance, &x, crffw::simplex::DEFAULT_BCD_SWEEPS).map_err(classify)?, "bcd")
    } else {
        (round_nearest(&x), "nearest")
    };
    if let Some(path) = &args.labeling {
        let mut f = create(path)?;
        for l in labeling.labels() {
            writeln!(f, "{l}").with_context(|| format!("writing {}", path.display()))?;
        }
    }
    let last = trace.last().expect("at least one step ran");
    let summary = Summary {
        method: method.to_string(),
        regularizer: config.effective_regularizer().map_err(classify)?,
        schedule: config.effective_schedule().map_err(classify)?.to_string(),
        steps: trace.len(),
        e_cont: last.e_cont,
        e_reg: last.e_reg,
        decoded_energy: instance.energy_discrete(&labeling).map_err(classify)?,
        rounding,
        bound_violations: trace.bound_violations(),
    };
    println!("{}", serde_json::to_string(&summary).context("encoding summary")?);
    Ok(())
}
