use std::time::Instant;

use ndarray::{Array2, Axis, Zip};

use super::frank_wolfe::{advance, distance, Recorder};
use super::oracles::{initial_point, vanilla_gap};
use super::stepsize::{stepsize, Segment, StepState, StepsizeSchedule};
use super::trace::{IterationTrace, TraceRecord};
use super::{SolverConfig, SolverMethod};
use crate::error::{Error, Result};
use crate::model::{energy_from_product, inner, CrfInstance, RelaxedPoint};
use crate::simplex::project_rows;

/// Additive smoothing applied to the iterate before each mirror-descent update.
pub const EMD_EPSILON: f64 = 1e-10;

fn expect_method(config: &SolverConfig, ok: bool) -> Result<()> {
    config.validate()?;
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("config names {}, not this solver", config.method)))
    }
}

fn open_loop_step(schedule: &StepsizeSchedule, k: usize) -> Result<f64> {
    stepsize(schedule, k, &StepState::open_loop())
}

/// Projected gradient: `p_k = Pi_X(x_k - grad E(x_k))`, `x_{k+1} = x_k + a_k (p_k - x_k)`.
pub fn pgd_run(instance: &CrfInstance, config: &SolverConfig) -> Result<(RelaxedPoint, IterationTrace)> {
    expect_method(config, config.method == SolverMethod::PGD)?;
    let schedule = config.effective_schedule()?;
    let unary = instance.unary();

    let mut x = initial_point(instance).into_inner();
    let mut px = instance.quadratic_matvec(x.view());
    let e0 = energy_from_product(x.view(), px.view(), unary.view());
    let mut rec = Recorder::new(instance, config, &x, e0, e0);

    for k in 0..config.max_iters {
        let started = Instant::now();
        let g = &px + unary;
        let s = vanilla_gap(g.view(), x.view());
        let p = project_rows(&x - &g);
        let d = &p - &x;
        let r = d.iter().map(|v| v * v).sum::<f64>();
        let segment = if schedule == StepsizeSchedule::LineSearch {
            let pd = instance.quadratic_matvec(d.view());
            Some(Segment::Quadratic {
                slope: inner(g.view(), d.view()),
                curvature: inner(d.view(), pd.view()),
            })
        } else {
            None
        };
        let alpha = stepsize(&schedule, k, &StepState { gap: s, direction_sq: r, segment })?;
        let x_new = advance(&x, &p, alpha);
        let px_new = instance.quadratic_matvec(x_new.view());
        let e_new = energy_from_product(x_new.view(), px_new.view(), unary.view());
        if !e_new.is_finite() {
            return Err(rec.diverged(k));
        }
        let record = baseline_record(&rec, k, alpha, e_new, s, &x_new, &x, started);
        rec.push(record, &x_new);
        x = x_new;
        px = px_new;
    }
    Ok((RelaxedPoint::new_unchecked(x), rec.finish()))
}

#[allow(clippy::too_many_arguments)]
fn baseline_record(
    rec: &Recorder,
    k: usize,
    alpha: f64,
    energy: f64,
    s: f64,
    x_new: &Array2<f64>,
    x_old: &Array2<f64>,
    started: Instant,
) -> TraceRecord {
    TraceRecord {
        k,
        alpha,
        e_cont: energy,
        e_reg: energy,
        e_disc: rec.discrete(x_new.view()),
        s_k: Some(s),
        step_norm: distance(x_new, x_old),
        bound_delta: None,
        bound_held: None,
        time_ms: started.elapsed().as_secs_f64() * 1e3,
    }
}

/// FISTA: `x_{k+1} = Pi_X(y_k - a_k grad E(y_k))` with Nesterov extrapolation of `y`.
pub fn fpgm_run(instance: &CrfInstance, config: &SolverConfig) -> Result<(RelaxedPoint, IterationTrace)> {
    expect_method(config, config.method == SolverMethod::FastPGM)?;
    let schedule = config.effective_schedule()?;
    let unary = instance.unary();

    let mut x = initial_point(instance).into_inner();
    let mut px = instance.quadratic_matvec(x.view());
    let e0 = energy_from_product(x.view(), px.view(), unary.view());
    let mut rec = Recorder::new(instance, config, &x, e0, e0);
    let mut y = x.clone();
    let mut py = px.clone();
    let mut t = 1.0_f64;

    for k in 0..config.max_iters {
        let started = Instant::now();
        let alpha = open_loop_step(&schedule, k)?;
        let s = vanilla_gap((&px + unary).view(), x.view());
        let gy = &py + unary;
        let mut target = y.clone();
        target.scaled_add(-alpha, &gy);
        let x_new = project_rows(target);
        let px_new = instance.quadratic_matvec(x_new.view());
        let e_new = energy_from_product(x_new.view(), px_new.view(), unary.view());
        if !e_new.is_finite() {
            return Err(rec.diverged(k));
        }
        let t_new = fista_momentum(t);
        let beta = (t - 1.0) / t_new;
        // P is linear, so P y follows from P x without another product
        y = &x_new + &((&x_new - &x) * beta);
        py = &px_new + &((&px_new - &px) * beta);
        t = t_new;

        let record = baseline_record(&rec, k, alpha, e_new, s, &x_new, &x, started);
        rec.push(record, &x_new);
        x = x_new;
        px = px_new;
    }
    Ok((RelaxedPoint::new_unchecked(x), rec.finish()))
}

/// `t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2`
pub(crate) fn fista_momentum(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

/// Entropic mirror descent in the shifted form
/// `x_is <- (x_is + eps) exp(-a g_is + a min_t g_it)`, then row normalization.
pub fn emd_run(instance: &CrfInstance, config: &SolverConfig) -> Result<(RelaxedPoint, IterationTrace)> {
    expect_method(config, config.method == SolverMethod::EMD)?;
    let schedule = config.effective_schedule()?;
    let unary = instance.unary();

    let mut x = initial_point(instance).into_inner();
    let mut px = instance.quadratic_matvec(x.view());
    let e0 = energy_from_product(x.view(), px.view(), unary.view());
    let mut rec = Recorder::new(instance, config, &x, e0, e0);

    for k in 0..config.max_iters {
        let started = Instant::now();
        let alpha = open_loop_step(&schedule, k)?;
        let g = &px + unary;
        let s = vanilla_gap(g.view(), x.view());
        let x_new = emd_step(&x, &g, alpha);
        let px_new = instance.quadratic_matvec(x_new.view());
        let e_new = energy_from_product(x_new.view(), px_new.view(), unary.view());
        if !e_new.is_finite() || x_new.iter().any(|v| !v.is_finite()) {
            return Err(rec.diverged(k));
        }
        let record = baseline_record(&rec, k, alpha, e_new, s, &x_new, &x, started);
        rec.push(record, &x_new);
        x = x_new;
        px = px_new;
    }
    Ok((RelaxedPoint::new_unchecked(x), rec.finish()))
}

pub(crate) fn emd_step(x: &Array2<f64>, g: &Array2<f64>, alpha: f64) -> Array2<f64> {
    let mut out = Array2::zeros(x.dim());
    for ((xr, gr), mut or) in x.outer_iter().zip(g.outer_iter()).zip(out.axis_iter_mut(Axis(0))) {
        let shift = alpha * gr.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        Zip::from(&mut or)
            .and(&xr)
            .and(&gr)
            .for_each(|o, &x, &g| *o = (x + EMD_EPSILON) * (-alpha * g + shift).exp());
        let z: f64 = or.sum();
        or.mapv_inplace(|v| v / z);
    }
    out
}

/// Nonconvex ADMM on the split `x = z`. The x-update and the z-update are recorded as
/// separate iterations, so `max_iters` counts half-steps.
pub fn admm_run(instance: &CrfInstance, config: &SolverConfig) -> Result<(RelaxedPoint, IterationTrace)> {
    let rho = match config.method {
        SolverMethod::ADMM { rho } => rho,
        _ => 0.0,
    };
    expect_method(config, rho > 0.0)?;
    let unary = instance.unary();

    let mut z = initial_point(instance).into_inner();
    let mut pz = instance.quadratic_matvec(z.view());
    let e0 = energy_from_product(z.view(), pz.view(), unary.view());
    let mut rec = Recorder::new(instance, config, &z, e0, e0);
    let mut dual = Array2::<f64>::zeros(z.dim());
    let mut x = z.clone();
    let mut px = pz.clone();
    let inv_rho = 1.0 / rho;

    for k in 0..config.max_iters {
        let started = Instant::now();
        let (prev, prev_p) = if k % 2 == 0 { (&z, &pz) } else { (&x, &px) };
        let s = vanilla_gap((prev_p + unary).view(), prev.view());
        let (next, p_next) = if k % 2 == 0 {
            let mut target = z.clone();
            Zip::from(&mut target)
                .and(&dual)
                .and(&pz)
                .and(unary)
                .for_each(|t, &y, &p, &u| *t -= inv_rho * (y + 0.5 * p + u));
            let x_new = project_rows(target);
            let px_new = instance.quadratic_matvec(x_new.view());
            (x_new, px_new)
        } else {
            let mut target = x.clone();
            Zip::from(&mut target)
                .and(&dual)
                .and(&px)
                .for_each(|t, &y, &p| *t -= inv_rho * (-y + 0.5 * p));
            let z_new = project_rows(target);
            let pz_new = instance.quadratic_matvec(z_new.view());
            (z_new, pz_new)
        };
        let e_new = energy_from_product(next.view(), p_next.view(), unary.view());
        if !e_new.is_finite() {
            return Err(rec.diverged(k));
        }
        let record = baseline_record(&rec, k, inv_rho, e_new, s, &next, prev, started);
        rec.push(record, &next);
        if k % 2 == 0 {
            x = next;
            px = p_next;
        } else {
            z = next;
            pz = p_next;
            Zip::from(&mut dual)
                .and(&x)
                .and(&z)
                .for_each(|y, &x, &z| *y += rho * (x - z));
        }
    }
    let last = if config.max_iters % 2 == 1 { x } else { z };
    Ok((RelaxedPoint::new_unchecked(last), rec.finish()))
}
