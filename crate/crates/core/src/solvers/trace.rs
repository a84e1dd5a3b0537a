use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking `F_k - F_{k+1} >= delta_k`.
pub const BOUND_TOLERANCE: f64 = 1e-7;

/// One solver iteration. Energies describe the iterate produced by this step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub alpha: f64,
    /// Relaxed energy `E(x_{k+1})` of the original instance.
    pub e_cont: f64,
    /// Objective `F(x_{k+1})` the solver minimizes (`E + r`, or the convexified energy).
    pub e_reg: f64,
    /// Discrete energy of the nearest rounding of `x_{k+1}`.
    pub e_disc: Option<f64>,
    /// Conditional gradient norm `S(x_k)` at the point the step started from.
    pub s_k: Option<f64>,
    pub step_norm: f64,
    pub bound_delta: Option<f64>,
    pub bound_held: Option<bool>,
    pub time_ms: f64,
}

/// Energies at the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialEnergies {
    pub e_cont: f64,
    pub e_reg: f64,
    pub e_disc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub method: String,
    pub initial: InitialEnergies,
    pub records: Vec<TraceRecord>,
    /// `x_0, x_1, ...` when iterate recording is enabled.
    #[serde(skip)]
    pub iterates: Option<Vec<Array2<f64>>>,
}

impl IterationTrace {
    pub fn new(method: impl Into<String>, initial: InitialEnergies, record_iterates: bool) -> Self {
        IterationTrace {
            method: method.into(),
            initial,
            records: Vec::new(),
            iterates: record_iterates.then(Vec::new),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// `F` before step `k`.
    pub fn f_before(&self, k: usize) -> f64 {
        if k == 0 {
            self.initial.e_reg
        } else {
            self.records[k - 1].e_reg
        }
    }

    /// Sequence `F_0, F_1, ..., F_K`.
    pub fn objective_values(&self) -> Vec<f64> {
        std::iter::once(self.initial.e_reg)
            .chain(self.records.iter().map(|r| r.e_reg))
            .collect()
    }

    /// Number of iterations whose decrease bound failed.
    pub fn bound_violations(&self) -> usize {
        self.records.iter().filter(|r| r.bound_held == Some(false)).count()
    }

    /// First violated decrease bound as an error.
    pub fn check_bounds(&self) -> Result<()> {
        for r in &self.records {
            if r.bound_held == Some(false) {
                return Err(Error::BoundViolated {
                    iteration: r.k,
                    decrease: self.f_before(r.k) - r.e_reg,
                    bound: r.bound_delta.unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }

    pub(crate) fn push_iterate(&mut self, x: &Array2<f64>) {
        if let Some(iterates) = &mut self.iterates {
            iterates.push(x.clone());
        }
    }
}
