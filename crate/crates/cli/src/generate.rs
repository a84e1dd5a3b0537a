use anyhow::Context;
use crffw::instances::{default_image_size, DEFAULT_UNARY_SCALE, DENSE_UNARY_SCALE};
use crffw::{generate, write_json, Compatibility, GeneratorSpec, KernelParams};

use crate::{classify, usage, CliResult, GenerateArgs, InstanceKind};

pub(crate) fn spec_from_args(args: &GenerateArgs) -> CliResult<GeneratorSpec> {
    let positive = |what: &str, v: usize| if v == 0 { Err(usage(format!("{what} must be positive"))) } else { Ok(v) };
    let labels = positive("--labels", args.labels)?;
    let spec = match args.kind {
        InstanceKind::Dense => {
            let n = positive("--nodes", args.nodes.ok_or_else(|| usage("--nodes is required for dense instances"))?)?;
            GeneratorSpec::RandomDense {
                n,
                d: labels,
                image_size: args.image_size.unwrap_or_else(|| default_image_size(n)),
                kernel: KernelParams::default(),
                compatibility: if args.random_compatibility {
                    Compatibility::RandomSymmetric
                } else {
                    Compatibility::Potts { w: args.potts_w }
                },
                unary_scale: args.unary_scale.unwrap_or(DENSE_UNARY_SCALE),
                seed: args.seed,
            }
        }
        InstanceKind::Grid => {
            let (rows, cols) = match (args.rows, args.cols, args.nodes) {
                (Some(r), Some(c), _) => (r, c),
                (None, None, Some(n)) => {
                    let side = (n as f64).sqrt().round() as usize;
                    if side * side != n {
                        return Err(usage(format!("--nodes {n} is not a square; pass --rows and --cols")));
                    }
                    (side, side)
                }
                _ => return Err(usage("grid instances need --rows and --cols (or a square --nodes)")),
            };
            GeneratorSpec::RandomGrid {
                rows: positive("--rows", rows)?,
                cols: positive("--cols", cols)?,
                d: labels,
                potts_w: args.potts_w,
                unary_scale: args.unary_scale.unwrap_or(DEFAULT_UNARY_SCALE),
                seed: args.seed,
            }
        }
        InstanceKind::Edges => GeneratorSpec::RandomEdgeList {
            n: positive("--nodes", args.nodes.ok_or_else(|| usage("--nodes is required for edge-list instances"))?)?,
            d: labels,
            edge_prob: args.edge_prob,
            unary_scale: args.unary_scale.unwrap_or(DEFAULT_UNARY_SCALE),
            seed: args.seed,
        },
    };
    spec.validate().map_err(classify)?;
    Ok(spec)
}

pub(crate) fn run(args: &GenerateArgs) -> CliResult<()> {
    let spec = spec_from_args(args)?;
    let instance = generate(&spec).map_err(classify)?;
    write_json(&instance, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "n={} d={} backend={} out={}",
        instance.n_nodes(),
        instance.n_labels(),
        instance.pairwise().kind(),
        args.out.display()
    );
    Ok(())
}
