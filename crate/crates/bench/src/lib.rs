//! Fixed workloads shared by the benchmarks.

use crffw::{generate, CrfInstance, GeneratorSpec, PairwiseBackend, Regularizer, SolverConfig, SolverMethod};

/// Named instances covering each pairwise backend.
pub fn workloads() -> Vec<(&'static str, CrfInstance)> {
    let mut out: Vec<(&'static str, CrfInstance)> = [
        ("dense_500x21", GeneratorSpec::dense(500, 21, 0)),
        ("grid_32x32x8", GeneratorSpec::grid(32, 32, 8, 0)),
        ("edges_400x10", GeneratorSpec::edge_list(400, 10, 0.05, 0)),
    ]
    .into_iter()
    .map(|(name, spec)| (name, generate(&spec).expect("workload specs are valid")))
    .collect();
    let edges = &out[2].1;
    let dense = PairwiseBackend::Dense(edges.pairwise().to_dense());
    out.push(("matrix_400x10", CrfInstance::new(edges.unary().clone(), dense).expect("same shape")));
    out
}

/// Solver settings timed per workload.
pub fn configs(steps: usize) -> Vec<SolverConfig> {
    vec![
        SolverConfig::new(SolverMethod::VanillaFW, steps),
        SolverConfig::new(SolverMethod::L2FW, steps).with_regularizer(Regularizer::L2 { lambda: 1.0 }),
        SolverConfig::new(SolverMethod::EntropicFW, steps).with_regularizer(Regularizer::Entropy { lambda: 0.25 }),
        SolverConfig::new(SolverMethod::MeanField, steps),
        SolverConfig::new(SolverMethod::PGD, steps),
        SolverConfig::new(SolverMethod::FastPGM, steps),
        SolverConfig::new(SolverMethod::EMD, steps),
        SolverConfig::new(SolverMethod::ADMM { rho: 1.0 }, steps),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workloads_cover_every_backend() {
        let kinds: Vec<String> = workloads().iter().map(|(_, i)| i.pairwise().kind().to_string()).collect();
        for kind in ["gaussian", "edges", "dense"] {
            assert!(kinds.iter().any(|k| k == kind), "{kind} missing");
        }
        for c in configs(3) {
            c.validate().unwrap();
        }
    }
}
