use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backend::DenseMatrix;
use crate::error::{Error, Result};

/// Above this node count the kernel matrix is recomputed on every product instead of cached.
const KERNEL_CACHE_MAX_NODES: usize = 4096;

/// Weights and bandwidths of the bilateral + spatial kernel
/// `k(f_i, f_j) = w1 exp(-|p_i-p_j|^2/2a^2 - |c_i-c_j|^2/2b^2) + w2 exp(-|p_i-p_j|^2/2g^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub w1: f64,
    pub w2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            w1: 1.0,
            w2: 1.0,
            alpha: 80.0,
            beta: 13.0,
            gamma: 3.0,
        }
    }
}

/// Fully connected pairwise model with `theta_ij(s, t) = mu(s, t) k(f_i, f_j)` for every `i != j`.
///
/// Products are evaluated exactly in `O(n^2 d + n d^2)`.
#[derive(Debug, Clone)]
pub struct GaussianKernel {
    positions: Vec<[f64; 2]>,
    colors: Vec<[f64; 3]>,
    params: KernelParams,
    compatibility: Array2<f64>,
    kernel: OnceLock<Array2<f64>>,
}

impl PartialEq for GaussianKernel {
    fn eq(&self, other: &Self) -> bool {
        self.positions == other.positions
            && self.colors == other.colors
            && self.params == other.params
            && self.compatibility == other.compatibility
    }
}

impl GaussianKernel {
    pub fn new(
        positions: Vec<[f64; 2]>,
        colors: Vec<[f64; 3]>,
        params: KernelParams,
        compatibility: Array2<f64>,
    ) -> Result<Self> {
        if positions.len() != colors.len() {
            return Err(Error::invalid(format!(
                "{} positions but {} colors",
                positions.len(),
                colors.len()
            )));
        }
        for (name, v) in [("alpha", params.alpha), ("beta", params.beta), ("gamma", params.gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("bandwidth {name} must be positive, got {v}")));
            }
        }
        if !params.w1.is_finite() || !params.w2.is_finite() {
            return Err(Error::invalid("kernel weights must be finite"));
        }
        let (d, d2) = compatibility.dim();
        if d != d2 || d == 0 {
            return Err(Error::invalid("compatibility matrix must be square and non-empty"));
        }
        if compatibility.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("compatibility matrix has non-finite entries"));
        }
        for s in 0..d {
            for t in 0..s {
                if compatibility[(s, t)] != compatibility[(t, s)] {
                    return Err(Error::invalid("compatibility matrix must be symmetric"));
                }
            }
        }
        let features_finite = positions.iter().flatten().chain(colors.iter().flatten()).all(|v| v.is_finite());
        if !features_finite {
            return Err(Error::invalid("node features must be finite"));
        }
        Ok(GaussianKernel {
            positions,
            colors,
            params,
            compatibility,
            kernel: OnceLock::new(),
        })
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn colors(&self) -> &[[f64; 3]] {
        &self.colors
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn compatibility(&self) -> &Array2<f64> {
        &self.compatibility
    }

    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn n_labels(&self) -> usize {
        self.compatibility.nrows()
    }

    /// Kernel value between nodes `i` and `j` (self-pairs included; callers exclude them).
    pub fn kernel_value(&self, i: usize, j: usize) -> f64 {
        let p = &self.params;
        let (pi, pj) = (self.positions[i], self.positions[j]);
        let (ci, cj) = (self.colors[i], self.colors[j]);
        let dp = (pi[0] - pj[0]).powi(2) + (pi[1] - pj[1]).powi(2);
        let dc = (ci[0] - cj[0]).powi(2) + (ci[1] - cj[1]).powi(2) + (ci[2] - cj[2]).powi(2);
        let bilateral = (-dp / (2.0 * p.alpha * p.alpha) - dc / (2.0 * p.beta * p.beta)).exp();
        let spatial = (-dp / (2.0 * p.gamma * p.gamma)).exp();
        p.w1 * bilateral + p.w2 * spatial
    }

    fn kernel_row(&self, i: usize) -> Array1<f64> {
        match self.cached_kernel() {
            Some(k) => k.row(i).to_owned(),
            None => Array1::from_shape_fn(self.n_nodes(), |j| {
                if i == j {
                    0.0
                } else {
                    self.kernel_value(i, j)
                }
            }),
        }
    }

    /// The `n x n` kernel matrix with zero diagonal, built once for small instances.
    fn cached_kernel(&self) -> Option<&Array2<f64>> {
        let n = self.n_nodes();
        if n > KERNEL_CACHE_MAX_NODES {
            return None;
        }
        Some(self.kernel.get_or_init(|| {
            let mut k = Array2::zeros((n, n));
            k.axis_iter_mut(Axis(0))
                .into_par_iter()
                .enumerate()
                .for_each(|(i, mut row)| {
                    for j in 0..n {
                        if j != i {
                            row[j] = self.kernel_value(i, j);
                        }
                    }
                });
            k
        }))
    }

    /// `(Px)_i = mu * sum_{j != i} k_ij x_j`, summed in ascending `j` for every row.
    pub(crate) fn matvec(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let n = self.n_nodes();
        let d = self.n_labels();
        let mut smoothed = Array2::zeros((n, d));
        smoothed
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(i, mut out)| {
                let k = self.kernel_row(i);
                for j in 0..n {
                    let kij = k[j];
                    if kij != 0.0 {
                        out.scaled_add(kij, &x.row(j));
                    }
                }
            });
        smoothed.dot(&self.compatibility.t())
    }

    pub(crate) fn matvec_row(&self, x: ArrayView2<f64>, i: usize) -> Array1<f64> {
        let k = self.kernel_row(i);
        let smoothed = k.dot(&x);
        self.compatibility.dot(&smoothed)
    }

    pub(crate) fn labeling_energy(&self, labels: &[usize]) -> f64 {
        let n = self.n_nodes();
        let mut total = 0.0;
        for i in 0..n {
            let k = self.kernel_row(i);
            for j in (i + 1)..n {
                total += k[j] * self.compatibility[(labels[i], labels[j])];
            }
        }
        total
    }

    pub(crate) fn abs_row_sums(&self) -> Array2<f64> {
        let n = self.n_nodes();
        let mu_abs: Array1<f64> = self.compatibility.map(|v| v.abs()).sum_axis(Axis(1));
        let mut out = Array2::zeros((n, self.n_labels()));
        for i in 0..n {
            let ksum: f64 = self.kernel_row(i).iter().map(|v| v.abs()).sum();
            out.row_mut(i).assign(&(&mu_abs * ksum));
        }
        out
    }

    pub(crate) fn to_dense(&self) -> DenseMatrix {
        let n = self.n_nodes();
        let d = self.n_labels();
        let mut data = Array2::zeros((n * d, n * d));
        for i in 0..n {
            let k = self.kernel_row(i);
            for j in 0..n {
                if i == j {
                    continue;
                }
                for s in 0..d {
                    for t in 0..d {
                        data[(i * d + s, j * d + t)] = k[j] * self.compatibility[(s, t)];
                    }
                }
            }
        }
        DenseMatrix::new(n, d, data).expect("kernel block matrix is symmetric")
    }
}
