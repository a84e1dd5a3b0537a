use std::time::Instant;

use ndarray::{Array2, ArrayView2, Zip};

use super::oracles::{convexify, gap, initial_point, regularized_direction};
use super::stepsize::{stepsize, Segment, StepState, StepsizeSchedule};
use super::trace::{InitialEnergies, IterationTrace, TraceRecord, BOUND_TOLERANCE};
use super::{SolverConfig, SolverMethod};
use crate::diagnostics::{decrease_bound, ConvergenceParams};
use crate::error::{Error, Result};
use crate::model::{energy_from_product, frobenius, inner, CrfInstance, Labeling, RelaxedPoint};
use crate::regularizer::Regularizer;
use crate::simplex::{argmax, softmax_owned};

/// Trace bookkeeping shared by all solvers.
pub(super) struct Recorder<'a> {
    original: &'a CrfInstance,
    record_disc: bool,
    trace: IterationTrace,
}

impl<'a> Recorder<'a> {
    pub(super) fn new(
        original: &'a CrfInstance,
        config: &SolverConfig,
        x0: &Array2<f64>,
        e_cont: f64,
        e_reg: f64,
    ) -> Self {
        let mut rec = Recorder {
            original,
            record_disc: config.record_discrete_energy,
            trace: IterationTrace::new(
                config.method.name(),
                InitialEnergies { e_cont, e_reg, e_disc: None },
                config.record_iterates,
            ),
        };
        rec.trace.initial.e_disc = rec.discrete(x0.view());
        rec.trace.push_iterate(x0);
        rec
    }

    /// Energy of the per-node argmax of `x` on the original instance.
    pub(super) fn discrete(&self, x: ArrayView2<f64>) -> Option<f64> {
        if !self.record_disc {
            return None;
        }
        let labels = Labeling::new(x.outer_iter().map(|row| argmax(row.iter().copied())).collect());
        self.original.energy_discrete(&labels).ok()
    }

    pub(super) fn push(&mut self, record: TraceRecord, x: &Array2<f64>) {
        self.trace.records.push(record);
        self.trace.push_iterate(x);
    }

    pub(super) fn diverged(self, iteration: usize) -> Error {
        Error::Diverged {
            method: self.trace.method.clone(),
            iteration,
            trace: Box::new(self.trace),
        }
    }

    pub(super) fn finish(self) -> IterationTrace {
        self.trace
    }
}

/// `x + alpha (p - x)`, returning `p` itself for a full step.
pub(super) fn advance(x: &Array2<f64>, p: &Array2<f64>, alpha: f64) -> Array2<f64> {
    if alpha == 1.0 {
        return p.clone();
    }
    let mut out = x.clone();
    Zip::from(&mut out).and(p).for_each(|o, &p| *o += alpha * (p - *o));
    out
}

pub(super) fn distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    frobenius((a - b).view())
}

/// Bound check outcome for one step.
pub(super) fn check_bound(
    params: Option<&ConvergenceParams>,
    schedule: &StepsizeSchedule,
    k: usize,
    s: f64,
    direction_sq: f64,
    decrease: f64,
) -> Result<(Option<f64>, Option<bool>)> {
    match params {
        None => Ok((None, None)),
        Some(params) => {
            let delta = decrease_bound(params, schedule, k, s, direction_sq)?;
            Ok((Some(delta), Some(decrease >= delta - BOUND_TOLERANCE)))
        }
    }
}

/// Generalized Frank-Wolfe: `p_k = argmin <grad E(x_k), p> + r(p)`, `x_{k+1} = x_k + a_k (p_k - x_k)`.
///
/// Covers vanilla, convexified, L2 and entropic FW as well as (damped) mean field.
pub fn run_generalized_fw(instance: &CrfInstance, config: &SolverConfig) -> Result<(RelaxedPoint, IterationTrace)> {
    config.validate()?;
    if !config.method.is_frank_wolfe() {
        return Err(Error::invalid(format!("{} is not a Frank-Wolfe method", config.method)));
    }
    let reg = config.effective_regularizer()?;
    let schedule = config.effective_schedule()?;
    let convex = config.method == SolverMethod::ConvexFW;
    let convexified;
    let objective = if convex {
        convexified = convexify(instance)?;
        &convexified
    } else {
        instance
    };
    let params = config
        .decrease_bound_check
        .then(|| ConvergenceParams::for_schedule(objective, &reg, &schedule));

    let mut x = initial_point(instance).into_inner();
    let mut px = objective.quadratic_matvec(x.view());
    let e = energy_from_product(x.view(), px.view(), objective.unary().view());
    let mut f = e + reg.value(x.view());
    let e_cont0 = if convex { instance.energy_unchecked(x.view()) } else { e };
    let mut rec = Recorder::new(instance, config, &x, e_cont0, f);

    for k in 0..config.max_iters {
        let started = Instant::now();
        let g = &px + objective.unary();
        let p = regularized_direction(&reg, g.view());
        let s = gap(&reg, g.view(), x.view(), p.view());
        let d = &p - &x;
        let r = d.iter().map(|v| v * v).sum::<f64>();

        let alpha = if schedule == StepsizeSchedule::LineSearch {
            let pd = objective.quadratic_matvec(d.view());
            let slope = inner(g.view(), d.view());
            let curvature = inner(d.view(), pd.view());
            let along = |a: f64| {
                let mut y = x.clone();
                y.scaled_add(a, &d);
                slope * a + 0.5 * curvature * a * a + reg.value(y.view())
            };
            let segment = match reg {
                Regularizer::None => Segment::Quadratic { slope, curvature },
                Regularizer::L2 { lambda } => Segment::Quadratic {
                    slope: slope + lambda * inner(x.view(), d.view()),
                    curvature: curvature + lambda * r,
                },
                Regularizer::Entropy { .. } => Segment::General(&along),
            };
            stepsize(
                &schedule,
                k,
                &StepState { gap: s, direction_sq: r, segment: Some(segment) },
            )?
        } else {
            stepsize(&schedule, k, &StepState { gap: s, direction_sq: r, segment: None })?
        };

        let x_new = advance(&x, &p, alpha);
        let px_new = objective.quadratic_matvec(x_new.view());
        let e_new = energy_from_product(x_new.view(), px_new.view(), objective.unary().view());
        let f_new = e_new + reg.value(x_new.view());
        let e_cont = if convex { instance.energy_unchecked(x_new.view()) } else { e_new };
        if !f_new.is_finite() || !e_cont.is_finite() {
            return Err(rec.diverged(k));
        }
        let (bound_delta, bound_held) = check_bound(params.as_ref(), &schedule, k, s, r, f - f_new)?;
        let record = TraceRecord {
            k,
            alpha,
            e_cont,
            e_reg: f_new,
            e_disc: rec.discrete(x_new.view()),
            s_k: Some(s),
            step_norm: distance(&x_new, &x),
            bound_delta,
            bound_held,
            time_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        rec.push(record, &x_new);
        x = x_new;
        px = px_new;
        f = f_new;
    }
    Ok((RelaxedPoint::new_unchecked(x), rec.finish()))
}

/// Parallel mean field `x_{k+1} = softmax(-P x_k - u)` for `iters` steps.
pub fn mean_field_run(instance: &CrfInstance, iters: usize) -> Result<(RelaxedPoint, IterationTrace)> {
    let config = SolverConfig::new(SolverMethod::MeanField, iters.max(1));
    mean_field_loop(instance, &config, 1.0, iters)
}

/// Mean field or damped mean field driven by a solver config.
pub(super) fn mean_field_config(instance: &CrfInstance, config: &SolverConfig) -> Result<(RelaxedPoint, IterationTrace)> {
    config.validate()?;
    let damping = match config.method {
        SolverMethod::MeanField => 1.0,
        SolverMethod::DampedMeanField { alpha } => alpha,
        other => return Err(Error::invalid(format!("{other} is not a mean-field method"))),
    };
    mean_field_loop(instance, config, damping, config.max_iters)
}

fn mean_field_loop(
    instance: &CrfInstance,
    config: &SolverConfig,
    damping: f64,
    iters: usize,
) -> Result<(RelaxedPoint, IterationTrace)> {
    let entropy = Regularizer::Entropy { lambda: 1.0 };
    let schedule = StepsizeSchedule::Constant { alpha: damping };
    let params = config
        .decrease_bound_check
        .then(|| ConvergenceParams::for_schedule(instance, &entropy, &schedule));

    let mut x = initial_point(instance).into_inner();
    let mut px = instance.quadratic_matvec(x.view());
    let e0 = energy_from_product(x.view(), px.view(), instance.unary().view());
    let mut f = e0 + entropy.value(x.view());
    let mut rec = Recorder::new(instance, config, &x, e0, f);

    for k in 0..iters {
        let started = Instant::now();
        let g = &px + instance.unary();
        let p = softmax_owned(g.mapv(|v| -v));
        let s = gap(&entropy, g.view(), x.view(), p.view());
        let r = distance(&p, &x).powi(2);
        let x_new = advance(&x, &p, damping);
        let px_new = instance.quadratic_matvec(x_new.view());
        let e_new = energy_from_product(x_new.view(), px_new.view(), instance.unary().view());
        let f_new = e_new + entropy.value(x_new.view());
        if !f_new.is_finite() {
            return Err(rec.diverged(k));
        }
        let (bound_delta, bound_held) = check_bound(params.as_ref(), &schedule, k, s, r, f - f_new)?;
        let record = TraceRecord {
            k,
            alpha: damping,
            e_cont: e_new,
            e_reg: f_new,
            e_disc: rec.discrete(x_new.view()),
            s_k: Some(s),
            step_norm: distance(&x_new, &x),
            bound_delta,
            bound_held,
            time_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        rec.push(record, &x_new);
        x = x_new;
        px = px_new;
        f = f_new;
    }
    Ok((RelaxedPoint::new_unchecked(x), rec.finish()))
}
