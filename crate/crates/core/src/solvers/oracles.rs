use ndarray::{Array2, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::model::{inner, CrfInstance, RelaxedPoint};
use crate::regularizer::Regularizer;
use crate::simplex::{argmin, project_rows, softmax_owned};

/// `softmax(-u)`, the starting point of every solver.
pub fn initial_point(instance: &CrfInstance) -> RelaxedPoint {
    RelaxedPoint::new_unchecked(softmax_owned(instance.unary().mapv(|v| -v)))
}

/// Vanilla linear minimization oracle: one-hot at each row's smallest gradient entry.
pub fn lmo_vanilla(grad: ArrayView2<f64>) -> RelaxedPoint {
    RelaxedPoint::new_unchecked(lmo_owned(grad))
}

pub(crate) fn lmo_owned(grad: ArrayView2<f64>) -> Array2<f64> {
    let mut p = Array2::zeros(grad.dim());
    for (g, mut row) in grad.outer_iter().zip(p.axis_iter_mut(Axis(0))) {
        row[argmin(g.iter().copied())] = 1.0;
    }
    p
}

/// `Pi_X(-(Px + u) / lambda)`
pub fn direction_l2fw(instance: &CrfInstance, x: &RelaxedPoint, lambda: f64) -> Result<RelaxedPoint> {
    Regularizer::L2 { lambda }.validate()?;
    let g = instance.gradient(x)?;
    Ok(RelaxedPoint::new_unchecked(regularized_direction(
        &Regularizer::L2 { lambda },
        g.view(),
    )))
}

/// `softmax(-(Px + u) / lambda)`
pub fn direction_efw(instance: &CrfInstance, x: &RelaxedPoint, lambda: f64) -> Result<RelaxedPoint> {
    Regularizer::Entropy { lambda }.validate()?;
    let g = instance.gradient(x)?;
    Ok(RelaxedPoint::new_unchecked(regularized_direction(
        &Regularizer::Entropy { lambda },
        g.view(),
    )))
}

/// `argmin_p <g, p> + r(p)` over the feasible set.
pub(crate) fn regularized_direction(reg: &Regularizer, g: ArrayView2<f64>) -> Array2<f64> {
    match *reg {
        Regularizer::None => lmo_owned(g),
        Regularizer::L2 { lambda } => project_rows(g.mapv(|v| -v / lambda)),
        Regularizer::Entropy { lambda } => softmax_owned(g.mapv(|v| -v / lambda)),
    }
}

/// `S(x) = <grad E(x), x - p> + r(x) - r(p)` with `p` from the oracle matching `reg`.
pub fn conditional_gradient_norm(instance: &CrfInstance, x: &RelaxedPoint, reg: &Regularizer) -> Result<f64> {
    reg.validate()?;
    let g = instance.gradient(x)?;
    let p = regularized_direction(reg, g.view());
    Ok(gap(reg, g.view(), x.view(), p.view()))
}

pub(crate) fn gap(reg: &Regularizer, g: ArrayView2<f64>, x: ArrayView2<f64>, p: ArrayView2<f64>) -> f64 {
    let mut lin = 0.0;
    Zip::from(g).and(x).and(p).for_each(|&g, &x, &p| lin += g * (x - p));
    lin + reg.value(x) - reg.value(p)
}

/// Vanilla Frank-Wolfe gap `<g, x - lmo(g)>`.
pub(crate) fn vanilla_gap(g: ArrayView2<f64>, x: ArrayView2<f64>) -> f64 {
    let mut best = 0.0;
    for row in g.outer_iter() {
        best += row.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    }
    inner(g, x) - best
}

/// Adds `c_is x_is^2 - c_is x_is` with `c_is = 1/2 sum_j sum_t theta_ij(s, t)`.
///
/// The result agrees with the original on every one-hot point. For nonnegative pairwise
/// potentials its quadratic form is diagonally dominant, hence positive semidefinite.
pub fn convexify(instance: &CrfInstance) -> Result<CrfInstance> {
    let ones = Array2::<f64>::ones(instance.unary().dim());
    let c = instance.pairwise().matvec(ones.view()) * 0.5;
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("pairwise row sums are not finite"));
    }
    let unary = instance.unary() - &c;
    let mut diagonal = &c * 2.0;
    if let Some(q) = instance.diagonal() {
        diagonal += q;
    }
    CrfInstance::new(unary, instance.pairwise().clone())?.with_diagonal(diagonal)
}
