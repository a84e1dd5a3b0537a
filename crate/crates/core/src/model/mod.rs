//! CRF instances and the relaxed quadratic energy `E(x) = 1/2 x^T P x + u^T x`.
//!
//! `x` is stored as an `n x d` matrix whose row `i` is the label distribution of
//! node `i`; the flattened vector in `R^{nd}` is its row-major layout.

mod backend;
mod gaussian;

pub use backend::{potts, DenseMatrix, Edge, EdgeList, PairwiseBackend};
pub use gaussian::{GaussianKernel, KernelParams};

use ndarray::{Array2, ArrayView2, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Row sums of a feasible point may deviate from one by at most this much.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Power-iteration estimates of `||P||_2` are inflated by this factor.
pub const POWER_ITERATION_SAFETY: f64 = 1.05;

/// A pairwise CRF: unary potentials `u` (`n x d`) and a symmetric pairwise operator `P`.
///
/// An optional diagonal term `q` adds `1/2 sum_is q_is x_is^2` to the relaxed energy.
/// Only [`crate::solvers::convexify`] produces one; on one-hot points it contributes the
/// constant-per-label `q_is / 2`, which `energy_discrete` includes.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfInstance {
    unary: Array2<f64>,
    pairwise: PairwiseBackend,
    diagonal: Option<Array2<f64>>,
}

impl CrfInstance {
    pub fn new(unary: Array2<f64>, pairwise: PairwiseBackend) -> Result<Self> {
        let (n, d) = unary.dim();
        if n == 0 || d == 0 {
            return Err(Error::invalid("instance needs at least one node and one label"));
        }
        if unary.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("unary potentials must be finite"));
        }
        if pairwise.n_nodes() != n || pairwise.n_labels() != d {
            return Err(Error::invalid(format!(
                "pairwise backend is {}x{}, unary is {n}x{d}",
                pairwise.n_nodes(),
                pairwise.n_labels()
            )));
        }
        Ok(CrfInstance {
            unary,
            pairwise,
            diagonal: None,
        })
    }

    /// Instance with unary terms only.
    pub fn unary_only(unary: Array2<f64>) -> Result<Self> {
        let (n, d) = unary.dim();
        Self::new(unary, PairwiseBackend::zero(n, d))
    }

    pub(crate) fn with_diagonal(mut self, diagonal: Array2<f64>) -> Result<Self> {
        if diagonal.dim() != self.unary.dim() {
            return Err(Error::invalid("diagonal term must match the unary shape"));
        }
        if diagonal.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("diagonal term must be finite"));
        }
        self.diagonal = if diagonal.iter().all(|&v| v == 0.0) {
            None
        } else {
            Some(diagonal)
        };
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.unary.nrows()
    }

    pub fn n_labels(&self) -> usize {
        self.unary.ncols()
    }

    pub fn unary(&self) -> &Array2<f64> {
        &self.unary
    }

    pub fn pairwise(&self) -> &PairwiseBackend {
        &self.pairwise
    }

    pub fn diagonal(&self) -> Option<&Array2<f64>> {
        self.diagonal.as_ref()
    }

    fn check_shape(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.dim() != self.unary.dim() {
            return Err(Error::invalid(format!(
                "point is {:?}, instance is {}x{}",
                x.dim(),
                self.n_nodes(),
                self.n_labels()
            )));
        }
        Ok(())
    }

    /// `Px` (plus `q * x` when a diagonal term is present).
    pub fn pairwise_matvec(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_shape(x)?;
        Ok(self.quadratic_matvec(x))
    }

    pub(crate) fn quadratic_matvec(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut px = self.pairwise.matvec(x);
        if let Some(q) = &self.diagonal {
            Zip::from(&mut px).and(q).and(x).for_each(|p, &q, &x| *p += q * x);
        }
        px
    }

    /// Discrete energy `sum_i theta_i(s_i) + sum_{ij} theta_ij(s_i, s_j)`.
    pub fn energy_discrete(&self, labeling: &Labeling) -> Result<f64> {
        let labels = labeling.labels();
        if labels.len() != self.n_nodes() {
            return Err(Error::invalid(format!(
                "labeling has {} entries, instance has {} nodes",
                labels.len(),
                self.n_nodes()
            )));
        }
        let d = self.n_labels();
        if let Some(&bad) = labels.iter().find(|&&s| s >= d) {
            return Err(Error::invalid(format!("label {bad} out of range for {d} labels")));
        }
        let unary: f64 = labels.iter().enumerate().map(|(i, &s)| self.unary[(i, s)]).sum();
        let mut energy = unary + self.pairwise.labeling_energy(labels);
        if let Some(q) = &self.diagonal {
            energy += 0.5 * labels.iter().enumerate().map(|(i, &s)| q[(i, s)]).sum::<f64>();
        }
        Ok(energy)
    }

    /// Relaxed energy `1/2 x^T P x + u^T x` at a feasible point.
    pub fn energy_relaxed(&self, x: &RelaxedPoint) -> Result<f64> {
        self.energy_at(x.view())
    }

    /// Relaxed energy at any `n x d` matrix, feasible or not.
    pub fn energy_at(&self, x: ArrayView2<f64>) -> Result<f64> {
        self.check_shape(x)?;
        Ok(self.energy_unchecked(x))
    }

    pub(crate) fn energy_unchecked(&self, x: ArrayView2<f64>) -> f64 {
        let px = self.quadratic_matvec(x);
        energy_from_product(x, px.view(), self.unary.view())
    }

    /// Gradient `Px + u`.
    pub fn gradient(&self, x: &RelaxedPoint) -> Result<Array2<f64>> {
        self.gradient_at(x.view())
    }

    pub fn gradient_at(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_shape(x)?;
        Ok(self.gradient_unchecked(x))
    }

    pub(crate) fn gradient_unchecked(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.quadratic_matvec(x) + &self.unary
    }

    /// Upper bound on `||P||_2`: the smaller of an inflated power-iteration estimate and
    /// the largest absolute row sum.
    pub fn lipschitz_upper_bound(&self) -> f64 {
        let mut rows = self.pairwise.abs_row_sums();
        if let Some(q) = &self.diagonal {
            rows = rows + q.map(|v| v.abs());
        }
        let inf_norm = rows.iter().fold(0.0_f64, |m, &v| m.max(v));
        if inf_norm == 0.0 {
            return 0.0;
        }
        let power = self.power_iteration_norm(500, 1e-12);
        (power * POWER_ITERATION_SAFETY).min(inf_norm)
    }

    /// Power-iteration estimate of the largest absolute eigenvalue of the quadratic operator.
    pub fn power_iteration_norm(&self, max_iters: usize, rel_tol: f64) -> f64 {
        let (n, d) = self.unary.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f00d);
        let mut v = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
        let norm = frobenius(v.view());
        v /= norm;
        let mut estimate = 0.0;
        for _ in 0..max_iters {
            let w = self.quadratic_matvec(v.view());
            let next = frobenius(w.view());
            if next == 0.0 {
                return 0.0;
            }
            v = w / next;
            let done = (next - estimate).abs() <= rel_tol * next;
            estimate = next;
            if done {
                break;
            }
        }
        estimate
    }
}

pub(crate) fn energy_from_product(x: ArrayView2<f64>, px: ArrayView2<f64>, unary: ArrayView2<f64>) -> f64 {
    let mut quad = 0.0;
    let mut lin = 0.0;
    Zip::from(x).and(px).and(unary).for_each(|&x, &p, &u| {
        quad += x * p;
        lin += u * x;
    });
    0.5 * quad + lin
}

pub(crate) fn frobenius(x: ArrayView2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn inner(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let mut acc = 0.0;
    Zip::from(a).and(b).for_each(|&a, &b| acc += a * b);
    acc
}

/// A point of the product of simplices: `n x d`, nonnegative rows summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedPoint(Array2<f64>);

impl RelaxedPoint {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::invalid("relaxed point needs at least one label"));
        }
        for (i, row) in values.outer_iter().enumerate() {
            if row.iter().any(|&v| !v.is_finite() || v < -1e-12) {
                return Err(Error::invalid(format!("row {i} has negative or non-finite entries")));
            }
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > FEASIBILITY_TOL {
                return Err(Error::invalid(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(RelaxedPoint(values))
    }

    pub(crate) fn new_unchecked(values: Array2<f64>) -> Self {
        debug_assert!(RelaxedPoint::new(values.clone()).is_ok(), "infeasible iterate");
        RelaxedPoint(values)
    }

    pub fn uniform(n: usize, d: usize) -> Self {
        RelaxedPoint(Array2::from_elem((n, d), 1.0 / d as f64))
    }

    pub fn one_hot(labeling: &Labeling, d: usize) -> Result<Self> {
        let labels = labeling.labels();
        let mut x = Array2::zeros((labels.len(), d));
        for (i, &s) in labels.iter().enumerate() {
            if s >= d {
                return Err(Error::invalid(format!("label {s} out of range for {d} labels")));
            }
            x[(i, s)] = 1.0;
        }
        Ok(RelaxedPoint(x))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn n_nodes(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_labels(&self) -> usize {
        self.0.ncols()
    }
}

/// A discrete assignment of one label per node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Labeling(Vec<usize>);

impl Labeling {
    pub fn new(labels: Vec<usize>) -> Self {
        Labeling(labels)
    }

    /// Checks every entry against the label count.
    pub fn checked(labels: Vec<usize>, d: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&s| s >= d) {
            return Err(Error::invalid(format!("label {bad} out of range for {d} labels")));
        }
        Ok(Labeling(labels))
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<usize>> for Labeling {
    fn from(v: Vec<usize>) -> Self {
        Labeling(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    pub(crate) fn two_node_potts() -> CrfInstance {
        let unary = array![[0.0, 1.0], [1.0, 0.0]];
        let edges = EdgeList::new(2, 2, vec![Edge { i: 0, j: 1, theta: potts(2, 1.0) }]).unwrap();
        CrfInstance::new(unary, PairwiseBackend::Edges(edges)).unwrap()
    }

    #[test]
    fn two_node_potts_energies() {
        let inst = two_node_potts();
        let e = |s: Vec<usize>| inst.energy_discrete(&Labeling::new(s)).unwrap();
        assert_eq!(e(vec![0, 0]), 1.0);
        assert_eq!(e(vec![0, 1]), 1.0);
        assert_eq!(e(vec![1, 0]), 3.0);
        assert_eq!(e(vec![1, 1]), 1.0);
        let x = RelaxedPoint::one_hot(&Labeling::new(vec![0, 1]), 2).unwrap();
        assert!((inst.energy_relaxed(&x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_node_unary_only() {
        let inst = CrfInstance::unary_only(array![[3.0, -2.0]]).unwrap();
        assert_eq!(inst.energy_discrete(&Labeling::new(vec![1])).unwrap(), -2.0);
    }

    #[test]
    fn zero_instance_has_zero_energy() {
        let inst = CrfInstance::unary_only(Array2::zeros((3, 2))).unwrap();
        assert_eq!(inst.energy_discrete(&Labeling::new(vec![1, 0, 1])).unwrap(), 0.0);
        assert_eq!(inst.lipschitz_upper_bound(), 0.0);
    }

    #[test]
    fn uniform_point_on_unary_only_instance_averages_unaries() {
        let u = array![[1.0, 2.0, 6.0], [0.0, -3.0, 0.0]];
        let inst = CrfInstance::unary_only(u).unwrap();
        let e = inst.energy_relaxed(&RelaxedPoint::uniform(2, 3)).unwrap();
        assert!((e - (3.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gradient_of_unary_only_is_unary() {
        let u = array![[1.0, 2.0], [0.5, -3.0]];
        let inst = CrfInstance::unary_only(u.clone()).unwrap();
        let g = inst.gradient(&RelaxedPoint::uniform(2, 2)).unwrap();
        assert_eq!(g, u);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let inst = two_node_potts();
        assert!(inst.energy_discrete(&Labeling::new(vec![0])).is_err());
        assert!(inst.energy_discrete(&Labeling::new(vec![0, 2])).is_err());
        assert!(inst.energy_relaxed(&RelaxedPoint::uniform(3, 2)).is_err());
        assert!(inst.gradient(&RelaxedPoint::uniform(2, 3)).is_err());
    }

    #[test]
    fn relaxed_point_validation() {
        assert!(RelaxedPoint::new(array![[0.5, 0.5], [1.0, 0.0]]).is_ok());
        assert!(RelaxedPoint::new(array![[0.6, 0.5]]).is_err());
        assert!(RelaxedPoint::new(array![[1.5, -0.5]]).is_err());
    }

    #[test]
    fn potts_chain_lipschitz_bound() {
        // 3-node chain, d = 2, w = 1: P has eigenvalues +-sqrt(2) (and 0), so ||P||_2 = sqrt(2).
        let edges = EdgeList::new(
            3,
            2,
            vec![
                Edge { i: 0, j: 1, theta: potts(2, 1.0) },
                Edge { i: 1, j: 2, theta: potts(2, 1.0) },
            ],
        )
        .unwrap();
        let inst = CrfInstance::new(Array2::zeros((3, 2)), PairwiseBackend::Edges(edges)).unwrap();
        let bound = inst.lipschitz_upper_bound();
        assert!(bound >= 1.0);
        assert!(bound >= std::f64::consts::SQRT_2 - 1e-9, "bound {bound}");
        assert!(bound <= 2.0 + 1e-12);
    }
}
