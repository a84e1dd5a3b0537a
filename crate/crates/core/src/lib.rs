//! MAP inference for pairwise CRFs with regularized Frank-Wolfe and first-order baselines.
//!
//! The continuous relaxation minimizes `E(x) = 1/2 x^T P x + u^T x` over the product of
//! probability simplices, one per node. Solvers return the final relaxed point together
//! with a per-iteration [`IterationTrace`].

pub mod diagnostics;
pub mod error;
pub mod instances;
pub mod model;
pub mod regularizer;
pub mod simplex;
pub mod solvers;

pub use diagnostics::{
    brute_force_map, decrease_bound, finite_diff_gradient, tightness_report, vertex_regularizer_constancy,
    ConvergenceParams, OracleReport, TightnessReport,
};
pub use error::{Error, Result};
pub use instances::{generate, read_json, read_uai, write_json, Compatibility, GeneratorSpec};
pub use model::{
    potts, CrfInstance, DenseMatrix, Edge, EdgeList, GaussianKernel, KernelParams, Labeling, PairwiseBackend,
    RelaxedPoint,
};
pub use regularizer::{Regularizer, RegularizerFn};
pub use simplex::{
    project_feasible, project_simplex, regularizer_bounds, round_bcd, round_nearest, rounding_constant,
    softmax_rows, RoundingScheme,
};
pub use solvers::{
    solve, IterationTrace, SolverConfig, SolverMethod, StepsizeSchedule, TraceRecord,
};
