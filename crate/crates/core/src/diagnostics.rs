//! Ground-truth oracles and runtime checks of the convergence and rounding guarantees.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CrfInstance, Labeling, RelaxedPoint};
use crate::regularizer::{Regularizer, RegularizerFn};
use crate::simplex::{regularizer_bounds, round_bcd, round_nearest, rounding_constant, DEFAULT_BCD_SWEEPS};
use crate::solvers::{IterationTrace, StepsizeSchedule};

/// Largest number of labelings `brute_force_map` will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// Exhaustive MAP result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub optimal_labeling: Labeling,
    pub optimal_energy: f64,
    pub enumerated_count: u64,
}

/// Number of labelings `d^n`, as a float so it cannot overflow.
pub fn labeling_count(n: usize, d: usize) -> f64 {
    (d as f64).powi(n as i32)
}

/// Exact MAP by enumeration. Ties resolve to the lexicographically smallest labeling.
pub fn brute_force_map(instance: &CrfInstance) -> Result<OracleReport> {
    let n = instance.n_nodes();
    let d = instance.n_labels();
    let count = labeling_count(n, d);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::Capacity { labelings: count, limit: BRUTE_FORCE_LIMIT });
    }
    // one chunk per label of node 0; each chunk walks the rest in lexicographic order
    let best = (0..d)
        .into_par_iter()
        .map(|first| {
            let mut labels = vec![0usize; n];
            labels[0] = first;
            let mut best: Option<(f64, Vec<usize>)> = None;
            loop {
                let e = instance
                    .energy_discrete(&Labeling::new(labels.clone()))
                    .expect("labels are in range");
                if best.as_ref().is_none_or(|(b, _)| e < *b) {
                    best = Some((e, labels.clone()));
                }
                if !next_labeling(&mut labels[1..], d) {
                    break;
                }
            }
            best.expect("every chunk holds at least one labeling")
        })
        .reduce_with(|a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
        .expect("at least one label");
    Ok(OracleReport {
        optimal_labeling: Labeling::new(best.1),
        optimal_energy: best.0,
        enumerated_count: count as u64,
    })
}

/// Odometer increment with the last position fastest. Returns false after the last labeling.
pub(crate) fn next_labeling(labels: &mut [usize], d: usize) -> bool {
    for pos in (0..labels.len()).rev() {
        labels[pos] += 1;
        if labels[pos] < d {
            return true;
        }
        labels[pos] = 0;
    }
    false
}

/// Central differences of the relaxed energy, coordinate by coordinate.
pub fn finite_diff_gradient(instance: &CrfInstance, x: ArrayView2<f64>, h: f64) -> Result<Array2<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {h}")));
    }
    instance.energy_at(x)?;
    let mut grad = Array2::zeros(x.dim());
    let mut probe = x.to_owned();
    for ((i, s), g) in grad.indexed_iter_mut() {
        let orig = probe[(i, s)];
        probe[(i, s)] = orig + h;
        let plus = instance.energy_unchecked(probe.view());
        probe[(i, s)] = orig - h;
        let minus = instance.energy_unchecked(probe.view());
        probe[(i, s)] = orig;
        *g = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Rounding quality of a relaxed point against the exact optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub e_star: f64,
    pub e_rounded_nearest: f64,
    pub e_rounded_bcd: f64,
    /// `E* + M - m + C`
    pub bound_nearest: f64,
    /// `E* + M - m`
    pub bound_bcd: f64,
    /// `E* <= E(rounded)` for both schemes.
    pub lower_held: bool,
    /// Upper bounds, checked only for points certified as global minimizers of `E + r`.
    pub upper_held: Option<bool>,
}

/// Compares both roundings of `x` with the brute-force optimum.
///
/// `certified_global` states that `x` globally minimizes `E + r`; only then are the upper
/// bounds meaningful.
pub fn tightness_report(
    instance: &CrfInstance,
    x: &RelaxedPoint,
    reg: &Regularizer,
    certified_global: bool,
) -> Result<TightnessReport> {
    let oracle = brute_force_map(instance)?;
    let e_star = oracle.optimal_energy;
    let (m, big_m) = regularizer_bounds(reg, instance.n_nodes(), instance.n_labels())?;
    let e_nearest = instance.energy_discrete(&round_nearest(x))?;
    let e_bcd = instance.energy_discrete(&round_bcd(instance, x, DEFAULT_BCD_SWEEPS)?)?;
    let bound_bcd = e_star + big_m - m;
    let bound_nearest = bound_bcd + rounding_constant(instance);
    let tol = 1e-9;
    Ok(TightnessReport {
        e_star,
        e_rounded_nearest: e_nearest,
        e_rounded_bcd: e_bcd,
        bound_nearest,
        bound_bcd,
        lower_held: e_star <= e_nearest + tol && e_star <= e_bcd + tol,
        upper_held: certified_global.then(|| e_nearest <= bound_nearest + tol && e_bcd <= bound_bcd + tol),
    })
}

/// Constants of the per-iteration decrease bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceParams {
    /// Smoothness constant `L_f` of the energy.
    pub lipschitz: f64,
    /// Strong-convexity modulus `sigma_g` of the regularizer.
    pub sigma: f64,
    /// `sigma / (L + sigma)`, or 0 when both vanish.
    pub omega: f64,
    /// Diameter `sqrt(2n)` of the product of simplices.
    pub diameter: f64,
    /// `F_0 - min_k F_k` over an observed run; stands in for the unknown `F_0 - F*`.
    pub delta0_hat: f64,
}

impl ConvergenceParams {
    pub fn new(lipschitz: f64, sigma: f64, n_nodes: usize) -> Self {
        let denom = lipschitz + sigma;
        ConvergenceParams {
            lipschitz,
            sigma,
            omega: if denom > 0.0 { sigma / denom } else { 0.0 },
            diameter: (2.0 * n_nodes as f64).sqrt(),
            delta0_hat: 0.0,
        }
    }

    /// Adaptive schedules bring their own constants; everything else uses the instance
    /// Lipschitz bound and `sigma = lambda`.
    pub fn for_schedule(instance: &CrfInstance, reg: &Regularizer, schedule: &StepsizeSchedule) -> Self {
        match *schedule {
            StepsizeSchedule::Adaptive { lipschitz, sigma } => Self::new(lipschitz, sigma, instance.n_nodes()),
            _ => Self::new(instance.lipschitz_upper_bound(), reg.strong_convexity(), instance.n_nodes()),
        }
    }

    pub fn with_trace(mut self, trace: &IterationTrace) -> Self {
        let f = trace.objective_values();
        let min = f.iter().copied().fold(f64::INFINITY, f64::min);
        self.delta0_hat = f[0] - min;
        self
    }

    /// `K(a) = a ((L + sigma) a - sigma) / 2`
    pub fn k_of(&self, alpha: f64) -> f64 {
        0.5 * alpha * ((self.lipschitz + self.sigma) * alpha - self.sigma)
    }
}

/// Guaranteed lower bound `delta_k` on `F_k - F_{k+1}` for one step.
///
/// Row selection: a vanishing `L_f` means the energy is concave along every segment,
/// otherwise `sigma > 0` selects the strongly convex regularizer row and `sigma = 0` the
/// plain convex one. Rows without a convergence guarantee still return their (possibly
/// negative) bound.
pub fn decrease_bound(
    params: &ConvergenceParams,
    schedule: &StepsizeSchedule,
    k: usize,
    s_k: f64,
    step_sq: f64,
) -> Result<f64> {
    let ConvergenceParams { lipschitz: l, sigma, omega, diameter, .. } = *params;
    if !(l >= 0.0 && sigma >= 0.0 && l.is_finite() && sigma.is_finite() && diameter > 0.0) {
        return Err(Error::invalid("convergence constants must be finite and nonnegative"));
    }
    if !s_k.is_finite() || !step_sq.is_finite() {
        return Err(Error::invalid("gap and step must be finite"));
    }
    let big_omega = diameter;
    let kf = k as f64;
    let diminishing = match *schedule {
        StepsizeSchedule::Harmonic => Some(2.0 / (kf + 2.0)),
        StepsizeSchedule::Diminishing => Some(kf / (kf + 2.0)),
        StepsizeSchedule::InvSqrt => Some((1.0 / (kf + 1.0).sqrt()).min(1.0)),
        _ => None,
    };
    let strongly = |a: f64| a * (2.0 - a / omega).min(1.0) * s_k;

    let delta = if l == 0.0 {
        match *schedule {
            StepsizeSchedule::Constant { alpha } => alpha * s_k,
            StepsizeSchedule::ConstantLength { alpha } => {
                if clamped(alpha, step_sq) {
                    s_k
                } else {
                    alpha / big_omega * s_k
                }
            }
            StepsizeSchedule::Adaptive { .. } | StepsizeSchedule::LineSearch => s_k,
            _ => diminishing.expect("open-loop schedule") * s_k,
        }
    } else if sigma > 0.0 {
        match *schedule {
            StepsizeSchedule::Constant { alpha } => {
                if alpha < 2.0 * omega {
                    strongly(alpha)
                } else {
                    alpha * s_k - params.k_of(alpha) * big_omega * big_omega
                }
            }
            StepsizeSchedule::ConstantLength { alpha } => {
                if clamped(alpha, step_sq) {
                    s_k - params.k_of(1.0) * step_sq
                } else {
                    alpha * (2.0 * sigma * s_k.max(0.0)).sqrt() - 0.5 * (l + sigma) * alpha * alpha
                }
            }
            StepsizeSchedule::Adaptive { .. } | StepsizeSchedule::LineSearch => omega * s_k,
            _ => strongly(diminishing.expect("open-loop schedule")),
        }
    } else {
        let lo2 = l * big_omega * big_omega;
        match *schedule {
            StepsizeSchedule::Constant { alpha } => alpha * s_k - 0.5 * lo2 * alpha * alpha,
            StepsizeSchedule::ConstantLength { alpha } => {
                if clamped(alpha, step_sq) {
                    s_k - params.k_of(1.0) * step_sq
                } else {
                    alpha / big_omega * s_k - 0.5 * l * alpha * alpha
                }
            }
            StepsizeSchedule::Adaptive { .. } | StepsizeSchedule::LineSearch => 0.5 * s_k.min(s_k * s_k / lo2),
            _ => {
                let a = diminishing.expect("open-loop schedule");
                a * s_k - 0.5 * lo2 * a * a
            }
        }
    };
    Ok(delta)
}

fn clamped(alpha: f64, step_sq: f64) -> bool {
    step_sq <= 0.0 || alpha / step_sq.sqrt() >= 1.0
}

/// `min_{i <= k} S_i <= delta0_hat / (omega (k + 1))` for every prefix of the trace.
pub fn gap_rate_holds(trace: &IterationTrace, params: &ConvergenceParams, tol: f64) -> bool {
    if params.omega <= 0.0 {
        return false;
    }
    let mut min_gap = f64::INFINITY;
    for (k, r) in trace.records.iter().enumerate() {
        let Some(s) = r.s_k else { return false };
        min_gap = min_gap.min(s);
        if min_gap > params.delta0_hat / (params.omega * (k as f64 + 1.0)) + tol {
            return false;
        }
    }
    true
}

/// Whether `r` takes a single value on the vertices of the product of simplices.
///
/// All `d^n` vertices are tried when `n d <= 16`, otherwise a fixed pseudo-random sample.
pub fn vertex_regularizer_constancy(reg: &dyn RegularizerFn, n: usize, d: usize) -> bool {
    if n == 0 || d == 0 {
        return true;
    }
    let mut values = Vec::new();
    let mut vertex = |labels: &[usize]| {
        let mut x = Array2::zeros((n, d));
        for (i, &s) in labels.iter().enumerate() {
            x[(i, s)] = 1.0;
        }
        values.push(reg.evaluate(x.view()));
    };
    if n * d <= 16 {
        let mut labels = vec![0; n];
        loop {
            vertex(&labels);
            if !next_labeling(&mut labels, d) {
                break;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7e57);
        vertex(&vec![0; n]);
        for _ in 0..1000 {
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..d)).collect();
            vertex(&labels);
        }
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min <= 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{potts, Edge, EdgeList, PairwiseBackend};
    use ndarray::array;

    fn two_node_potts() -> CrfInstance {
        let edges = EdgeList::new(2, 2, vec![Edge { i: 0, j: 1, theta: potts(2, 1.0) }]).unwrap();
        CrfInstance::new(array![[0.0, 1.0], [1.0, 0.0]], PairwiseBackend::Edges(edges)).unwrap()
    }

    #[test]
    fn brute_force_examples() {
        let r = brute_force_map(&two_node_potts()).unwrap();
        assert_eq!(r.optimal_energy, 1.0);
        assert_eq!(r.optimal_labeling.labels(), &[0, 0]);
        assert_eq!(r.enumerated_count, 4);
        let zero = CrfInstance::unary_only(Array2::zeros((3, 2))).unwrap();
        let r = brute_force_map(&zero).unwrap();
        assert_eq!((r.optimal_energy, r.optimal_labeling.labels()), (0.0, &[0, 0, 0][..]));
        let single = CrfInstance::unary_only(array![[2.0, -1.0, 0.5]]).unwrap();
        assert_eq!(brute_force_map(&single).unwrap().optimal_labeling.labels(), &[1]);
        let big = CrfInstance::unary_only(Array2::zeros((30, 3))).unwrap();
        assert!(matches!(brute_force_map(&big), Err(Error::Capacity { .. })));
    }

    #[test]
    fn finite_differences_on_unary_only() {
        let inst = CrfInstance::unary_only(array![[0.3, -1.0], [2.0, 0.5]]).unwrap();
        let x = RelaxedPoint::uniform(2, 2);
        let g = finite_diff_gradient(&inst, x.view(), 1e-5).unwrap();
        assert!((&g - inst.unary()).iter().all(|v| v.abs() < 1e-9));
        assert!(finite_diff_gradient(&inst, x.view(), 0.0).is_err());
    }

    #[test]
    fn table_cells() {
        let p = ConvergenceParams::new(3.0, 1.0, 2);
        assert_eq!(p.omega, 0.25);
        let adaptive = StepsizeSchedule::Adaptive { lipschitz: 3.0, sigma: 1.0 };
        assert_eq!(decrease_bound(&p, &adaptive, 0, 2.0, 0.5).unwrap(), 0.5);
        let concave = ConvergenceParams::new(0.0, 1.0, 2);
        let c = StepsizeSchedule::Constant { alpha: 0.3 };
        assert!((decrease_bound(&concave, &c, 4, 2.0, 0.5).unwrap() - 0.6).abs() < 1e-15);
        let convex = ConvergenceParams::new(2.0, 0.0, 2);
        // 0.3 * 2 - 2 * 4 * 0.09 / 2
        assert!((decrease_bound(&convex, &c, 0, 2.0, 0.5).unwrap() - (0.6 - 0.36)).abs() < 1e-15);
        // alpha = 0.3 < 2 omega = 0.5: 0.3 * min(1, 2 - 1.2) * S
        assert!((decrease_bound(&p, &c, 0, 1.0, 0.5).unwrap() - 0.24).abs() < 1e-15);
        let bad = ConvergenceParams::new(f64::NAN, 1.0, 2);
        assert!(decrease_bound(&bad, &c, 0, 1.0, 1.0).is_err());
    }

    #[test]
    fn tightness_at_optimal_vertex() {
        let inst = two_node_potts();
        let star = brute_force_map(&inst).unwrap().optimal_labeling;
        let x = RelaxedPoint::one_hot(&star, 2).unwrap();
        let rep = tightness_report(&inst, &x, &Regularizer::None, true).unwrap();
        assert_eq!(rep.e_rounded_nearest, rep.e_star);
        assert_eq!(rep.e_rounded_bcd, rep.e_star);
        assert_eq!(rep.upper_held, Some(true));
        let l2 = tightness_report(&inst, &x, &Regularizer::L2 { lambda: 1.0 }, false).unwrap();
        assert_eq!(l2.bound_bcd, rep.e_star + 1.0 - 0.5);
        assert_eq!(l2.upper_held, None);
    }

    #[test]
    fn vertex_constancy() {
        assert!(vertex_regularizer_constancy(&Regularizer::L2 { lambda: 2.0 }, 3, 4));
        assert!(vertex_regularizer_constancy(&Regularizer::Entropy { lambda: 2.0 }, 3, 4));
        assert!(vertex_regularizer_constancy(&Regularizer::L2 { lambda: 2.0 }, 10, 5));
        let tilted = |x: ArrayView2<f64>| x[(0, 0)];
        assert!(!vertex_regularizer_constancy(&tilted, 2, 2));
    }

    #[test]
    fn odometer_is_lexicographic() {
        let mut l = vec![0, 0];
        let mut seen = vec![l.clone()];
        while next_labeling(&mut l, 2) {
            seen.push(l.clone());
        }
        assert_eq!(seen, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }
}
