use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::gaussian::GaussianKernel;
use crate::error::{Error, Result};

/// The pairwise operator `P` of the relaxed energy, stored in one of three layouts.
///
/// All variants describe a symmetric `nd x nd` block matrix whose diagonal
/// `d x d` blocks are zero.
#[derive(Debug, Clone, PartialEq)]
pub enum PairwiseBackend {
    Dense(DenseMatrix),
    Edges(EdgeList),
    Gaussian(GaussianKernel),
}

impl PairwiseBackend {
    /// Backend with no pairwise terms at all.
    pub fn zero(n: usize, d: usize) -> Self {
        PairwiseBackend::Edges(EdgeList {
            n,
            d,
            edges: Vec::new(),
            adjacency: vec![Vec::new(); n],
        })
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            PairwiseBackend::Dense(m) => m.n,
            PairwiseBackend::Edges(e) => e.n,
            PairwiseBackend::Gaussian(g) => g.n_nodes(),
        }
    }

    pub fn n_labels(&self) -> usize {
        match self {
            PairwiseBackend::Dense(m) => m.d,
            PairwiseBackend::Edges(e) => e.d,
            PairwiseBackend::Gaussian(g) => g.n_labels(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PairwiseBackend::Dense(_) => "dense",
            PairwiseBackend::Edges(_) => "edges",
            PairwiseBackend::Gaussian(_) => "gaussian",
        }
    }

    /// Computes `Px` for an `n x d` matrix `x`.
    pub fn matvec(&self, x: ArrayView2<f64>) -> Array2<f64> {
        match self {
            PairwiseBackend::Dense(m) => m.matvec(x),
            PairwiseBackend::Edges(e) => e.matvec(x),
            PairwiseBackend::Gaussian(g) => g.matvec(x),
        }
    }

    /// Row `i` of `Px`, i.e. `sum_j Theta_ij x_j`.
    pub fn matvec_row(&self, x: ArrayView2<f64>, i: usize) -> Array1<f64> {
        match self {
            PairwiseBackend::Dense(m) => m.matvec_row(x, i),
            PairwiseBackend::Edges(e) => e.matvec_row(x, i),
            PairwiseBackend::Gaussian(g) => g.matvec_row(x, i),
        }
    }

    /// Pairwise part of the discrete energy, `sum_{ij in E} theta_ij(s_i, s_j)`.
    pub fn labeling_energy(&self, labels: &[usize]) -> f64 {
        match self {
            PairwiseBackend::Dense(m) => m.labeling_energy(labels),
            PairwiseBackend::Edges(e) => e.labeling_energy(labels),
            PairwiseBackend::Gaussian(g) => g.labeling_energy(labels),
        }
    }

    /// Absolute row sums of `P`, shaped `n x d`.
    pub fn abs_row_sums(&self) -> Array2<f64> {
        match self {
            PairwiseBackend::Dense(m) => {
                let sums = m.data.map(|v| v.abs()).sum_axis(Axis(1));
                sums.into_shape_with_order((m.n, m.d)).expect("nd layout")
            }
            PairwiseBackend::Edges(e) => e.abs_row_sums(),
            PairwiseBackend::Gaussian(g) => g.abs_row_sums(),
        }
    }

    /// Explicit `nd x nd` matrix. Intended for small instances and cross-checks.
    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            PairwiseBackend::Dense(m) => m.clone(),
            PairwiseBackend::Edges(e) => e.to_dense(),
            PairwiseBackend::Gaussian(g) => g.to_dense(),
        }
    }
}

/// Explicit symmetric `nd x nd` matrix, row index `i*d + s`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    d: usize,
    data: Array2<f64>,
}

impl DenseMatrix {
    pub fn new(n: usize, d: usize, data: Array2<f64>) -> Result<Self> {
        let nd = n * d;
        if data.dim() != (nd, nd) {
            return Err(Error::invalid(format!(
                "dense pairwise matrix must be {nd}x{nd}, got {:?}",
                data.dim()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dense pairwise matrix has non-finite entries"));
        }
        let scale = data.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for r in 0..nd {
            for c in (r + 1)..nd {
                if (data[(r, c)] - data[(c, r)]).abs() > 1e-12 * scale {
                    return Err(Error::invalid(format!(
                        "dense pairwise matrix is not symmetric at ({r}, {c})"
                    )));
                }
            }
        }
        for i in 0..n {
            let block = data.slice(s![i * d..(i + 1) * d, i * d..(i + 1) * d]);
            if block.iter().any(|&v| v != 0.0) {
                return Err(Error::invalid(format!(
                    "dense pairwise matrix has a nonzero diagonal block at node {i}"
                )));
            }
        }
        Ok(DenseMatrix { n, d, data })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    fn matvec(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let flat = x.to_owned().into_shape_with_order(self.n * self.d).expect("nd layout");
        self.data
            .dot(&flat)
            .into_shape_with_order((self.n, self.d))
            .expect("nd layout")
    }

    fn matvec_row(&self, x: ArrayView2<f64>, i: usize) -> Array1<f64> {
        let d = self.d;
        let rows = self.data.slice(s![i * d..(i + 1) * d, ..]);
        let flat = x.to_owned().into_shape_with_order(self.n * d).expect("nd layout");
        rows.dot(&flat)
    }

    fn labeling_energy(&self, labels: &[usize]) -> f64 {
        let d = self.d;
        let mut total = 0.0;
        for (i, &si) in labels.iter().enumerate() {
            for (j, &sj) in labels.iter().enumerate() {
                total += self.data[(i * d + si, j * d + sj)];
            }
        }
        0.5 * total
    }
}

/// One pairwise term `x_i^T Theta x_j` with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    /// `theta[(s, t)] = theta_ij(s, t)`.
    pub theta: Array2<f64>,
}

/// Sparse pairwise graph. Row `i` of `Px` receives `Theta_ij x_j`, row `j` receives `Theta_ij^T x_i`.
#[derive(Debug, Clone)]
pub struct EdgeList {
    n: usize,
    d: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
}

impl PartialEq for EdgeList {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.d == other.d && self.edges == other.edges
    }
}

impl EdgeList {
    pub fn new(n: usize, d: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); n];
        for (k, e) in edges.iter().enumerate() {
            if e.i >= e.j {
                return Err(Error::invalid(format!(
                    "edge {k} must satisfy i < j, got ({}, {})",
                    e.i, e.j
                )));
            }
            if e.j >= n {
                return Err(Error::invalid(format!("edge {k} references node {} >= {n}", e.j)));
            }
            if e.theta.dim() != (d, d) {
                return Err(Error::invalid(format!("edge {k} matrix must be {d}x{d}")));
            }
            if e.theta.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("edge {k} has non-finite potentials")));
            }
            if !seen.insert((e.i, e.j)) {
                return Err(Error::invalid(format!("duplicate edge ({}, {})", e.i, e.j)));
            }
            adjacency[e.i].push(k);
            adjacency[e.j].push(k);
        }
        Ok(EdgeList { n, d, edges, adjacency })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    fn matvec(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.d));
        for e in &self.edges {
            let xi = x.row(e.i);
            let xj = x.row(e.j);
            let to_i = e.theta.dot(&xj);
            let to_j = e.theta.t().dot(&xi);
            out.row_mut(e.i).scaled_add(1.0, &to_i);
            out.row_mut(e.j).scaled_add(1.0, &to_j);
        }
        out
    }

    fn matvec_row(&self, x: ArrayView2<f64>, i: usize) -> Array1<f64> {
        let mut out = Array1::zeros(self.d);
        for &k in &self.adjacency[i] {
            let e = &self.edges[k];
            if e.i == i {
                out.scaled_add(1.0, &e.theta.dot(&x.row(e.j)));
            } else {
                out.scaled_add(1.0, &e.theta.t().dot(&x.row(e.i)));
            }
        }
        out
    }

    fn labeling_energy(&self, labels: &[usize]) -> f64 {
        self.edges
            .iter()
            .map(|e| e.theta[(labels[e.i], labels[e.j])])
            .sum()
    }

    fn abs_row_sums(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.d));
        for e in &self.edges {
            let abs = e.theta.map(|v| v.abs());
            let rows: Array1<f64> = abs.sum_axis(Axis(1));
            let cols: Array1<f64> = abs.sum_axis(Axis(0));
            out.row_mut(e.i).scaled_add(1.0, &rows);
            out.row_mut(e.j).scaled_add(1.0, &cols);
        }
        out
    }

    fn to_dense(&self) -> DenseMatrix {
        let d = self.d;
        let mut data = Array2::zeros((self.n * d, self.n * d));
        for e in &self.edges {
            data.slice_mut(s![e.i * d..(e.i + 1) * d, e.j * d..(e.j + 1) * d])
                .assign(&e.theta);
            data.slice_mut(s![e.j * d..(e.j + 1) * d, e.i * d..(e.i + 1) * d])
                .assign(&e.theta.t());
        }
        DenseMatrix { n: self.n, d, data }
    }
}

/// `d x d` Potts compatibility `w * [s != t]`.
pub fn potts(d: usize, w: f64) -> Array2<f64> {
    Array2::from_shape_fn((d, d), |(s, t)| if s == t { 0.0 } else { w })
}
