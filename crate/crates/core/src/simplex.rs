//! Geometry of the product of simplices: projections, softmax, rounding.

use ndarray::{Array2, ArrayView2, ArrayViewMut1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CrfInstance, Labeling, RelaxedPoint};
use crate::regularizer::Regularizer;

pub const DEFAULT_BCD_SWEEPS: usize = 100;

/// How a relaxed point is decoded into a labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RoundingScheme {
    Nearest,
    Bcd { max_sweeps: usize },
}

impl Default for RoundingScheme {
    fn default() -> Self {
        RoundingScheme::Nearest
    }
}

impl RoundingScheme {
    pub fn round(&self, instance: &CrfInstance, x: &RelaxedPoint) -> Result<Labeling> {
        match *self {
            RoundingScheme::Nearest => Ok(round_nearest(x)),
            RoundingScheme::Bcd { max_sweeps } => round_bcd(instance, x, max_sweeps),
        }
    }
}

/// Euclidean projection of `v` onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::invalid("cannot project onto the 0-dimensional simplex"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("projection input must be finite"));
    }
    let mut out = v.to_vec();
    project_in_place(ndarray::ArrayViewMut1::from(&mut out[..]));
    Ok(out)
}

/// Sort-based projection: with `a` sorted decreasingly and `g_k = (a_1 + ... + a_k - 1) / k`,
/// the threshold is `g_k` for the largest `k` with `a_k > g_k`.
pub(crate) fn project_in_place(mut row: ArrayViewMut1<f64>) {
    let mut sorted: Vec<f64> = row.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut threshold = 0.0;
    let mut support = 0;
    for (k, &a) in sorted.iter().enumerate() {
        cumsum += a;
        let gamma = (cumsum - 1.0) / (k + 1) as f64;
        if a > gamma {
            threshold = gamma;
            support = k + 1;
        }
    }
    if support == 1 {
        // a single active coordinate is exactly a vertex
        let top = argmax(row.iter().copied());
        row.fill(0.0);
        row[top] = 1.0;
        return;
    }
    row.mapv_inplace(|v| (v - threshold).max(0.0));
}

/// Row-wise simplex projection.
pub fn project_feasible(v: ArrayView2<f64>) -> Result<RelaxedPoint> {
    if v.ncols() == 0 {
        return Err(Error::invalid("cannot project onto the 0-dimensional simplex"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("projection input must be finite"));
    }
    Ok(RelaxedPoint::new_unchecked(project_rows(v.to_owned())))
}

pub(crate) fn project_rows(mut v: Array2<f64>) -> Array2<f64> {
    for row in v.axis_iter_mut(Axis(0)) {
        project_in_place(row);
    }
    v
}

/// Row-wise `exp(v_s - max v) / sum_t exp(v_t - max v)`.
pub fn softmax_rows(v: ArrayView2<f64>) -> RelaxedPoint {
    RelaxedPoint::new_unchecked(softmax_owned(v.to_owned()))
}

pub(crate) fn softmax_owned(mut v: Array2<f64>) -> Array2<f64> {
    for mut row in v.axis_iter_mut(Axis(0)) {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let z: f64 = row.sum();
        row.mapv_inplace(|x| x / z);
    }
    v
}

/// Index of the largest entry; ties go to the lowest index.
pub(crate) fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (s, v) in row.into_iter().enumerate() {
        if v > best_val {
            best = s;
            best_val = v;
        }
    }
    best
}

/// Index of the smallest entry; ties go to the lowest index.
pub(crate) fn argmin(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (s, v) in row.into_iter().enumerate() {
        if v < best_val {
            best = s;
            best_val = v;
        }
    }
    best
}

/// Per-node argmax decoding.
pub fn round_nearest(x: &RelaxedPoint) -> Labeling {
    Labeling::new(
        x.values()
            .outer_iter()
            .map(|row| argmax(row.iter().copied()))
            .collect(),
    )
}

/// Block-coordinate rounding.
///
/// Nodes are visited in ascending order; each is replaced by the vertex minimizing the
/// energy with every other node held at its current (possibly fractional) value.
/// Sweeps repeat until nothing changes or `max_sweeps` is reached. For instances without
/// a diagonal term the result never has higher energy than `x`.
pub fn round_bcd(instance: &CrfInstance, x: &RelaxedPoint, max_sweeps: usize) -> Result<Labeling> {
    if max_sweeps == 0 {
        return Err(Error::invalid("BCD rounding needs at least one sweep"));
    }
    if x.view().dim() != instance.unary().dim() {
        return Err(Error::invalid("point and instance dimensions differ"));
    }
    let n = x.n_nodes();
    let mut y = x.values().clone();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let diagonal = instance.diagonal();
    for _ in 0..max_sweeps {
        let mut changed = false;
        for i in 0..n {
            let mut cost = instance.pairwise().matvec_row(y.view(), i);
            cost += &instance.unary().row(i);
            if let Some(q) = diagonal {
                cost.scaled_add(0.5, &q.row(i));
            }
            let s = argmin(cost.iter().copied());
            if labels[i] != Some(s) {
                changed = true;
                labels[i] = Some(s);
                let mut row = y.row_mut(i);
                row.fill(0.0);
                row[s] = 1.0;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(Labeling::new(labels.into_iter().map(|l| l.unwrap_or(0)).collect()))
}

/// Bound on `|E(x) - E(round_nearest(x))|` over the feasible set:
/// `sqrt(n (1 - 1/d)) (||u||_2 + sqrt(n) ||P||_2)`, with `||P||_2` replaced by its upper bound.
pub fn rounding_constant(instance: &CrfInstance) -> f64 {
    let n = instance.n_nodes() as f64;
    let d = instance.n_labels() as f64;
    let unary_norm = instance.unary().iter().map(|v| v * v).sum::<f64>().sqrt();
    (n * (1.0 - 1.0 / d)).sqrt() * (unary_norm + n.sqrt() * instance.lipschitz_upper_bound())
}

/// Tight bounds `(m, M)` with `m <= r(x) <= M` over the product of `n` simplices of size `d`.
pub fn regularizer_bounds(reg: &Regularizer, n: usize, d: usize) -> Result<(f64, f64)> {
    reg.validate()?;
    if d == 0 {
        return Err(Error::invalid("label count must be positive"));
    }
    let (n, d) = (n as f64, d as f64);
    Ok(match *reg {
        Regularizer::None => (0.0, 0.0),
        Regularizer::L2 { lambda } => (lambda * n / (2.0 * d), lambda * n / 2.0),
        Regularizer::Entropy { lambda } => (-lambda * n * d.ln(), 0.0),
    })
}
