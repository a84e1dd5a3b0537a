use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of uniformly spaced points probed on `[0, 1]` before golden-section refinement.
pub const LINE_SEARCH_GRID: usize = 129;
/// Final bracket width of the golden-section refinement.
pub const LINE_SEARCH_TOL: f64 = 1e-10;

/// Rule producing the stepsize `alpha_k` of the update `x + alpha_k (p - x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepsizeSchedule {
    Constant { alpha: f64 },
    /// `alpha / ||p - x||`, so every step has length `alpha` (until clamped at 1).
    ConstantLength { alpha: f64 },
    /// `2 / (k + 2)`
    Harmonic,
    /// `k / (k + 2)`
    Diminishing,
    /// `min(1, 1 / sqrt(k + 1))`
    InvSqrt,
    Adaptive { lipschitz: f64, sigma: f64 },
    LineSearch,
}

impl StepsizeSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepsizeSchedule::Constant { alpha } => {
                if alpha > 0.0 && alpha <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("constant stepsize must lie in (0, 1], got {alpha}")))
                }
            }
            StepsizeSchedule::ConstantLength { alpha } => {
                if alpha > 0.0 && alpha.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("step length must be positive, got {alpha}")))
                }
            }
            StepsizeSchedule::Adaptive { lipschitz, sigma } => {
                if lipschitz >= 0.0 && sigma >= 0.0 && lipschitz.is_finite() && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("adaptive stepsize needs finite nonnegative L_f and sigma_g"))
                }
            }
            _ => Ok(()),
        }
    }

    /// Whether the stepsize depends only on the iteration counter.
    pub fn is_open_loop(&self) -> bool {
        matches!(
            self,
            StepsizeSchedule::Constant { .. }
                | StepsizeSchedule::Harmonic
                | StepsizeSchedule::Diminishing
                | StepsizeSchedule::InvSqrt
        )
    }
}

impl fmt::Display for StepsizeSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepsizeSchedule::Constant { alpha } => write!(f, "constant:{alpha}"),
            StepsizeSchedule::ConstantLength { alpha } => write!(f, "length:{alpha}"),
            StepsizeSchedule::Harmonic => write!(f, "harmonic"),
            StepsizeSchedule::Diminishing => write!(f, "diminishing"),
            StepsizeSchedule::InvSqrt => write!(f, "invsqrt"),
            StepsizeSchedule::Adaptive { lipschitz, sigma } => write!(f, "adaptive:{lipschitz}:{sigma}"),
            StepsizeSchedule::LineSearch => write!(f, "linesearch"),
        }
    }
}

/// Parses `constant:0.5`, `length:0.1`, `harmonic`, `diminishing`, `invsqrt`,
/// `adaptive:L:sigma` and `linesearch`.
impl FromStr for StepsizeSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default().to_ascii_lowercase();
        let mut num = |what: &str| -> Result<f64> {
            parts
                .next()
                .ok_or_else(|| Error::invalid(format!("stepsize '{s}' is missing {what}")))?
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("stepsize '{s}': {e}")))
        };
        let schedule = match head.as_str() {
            "constant" => StepsizeSchedule::Constant { alpha: num("alpha")? },
            "length" => StepsizeSchedule::ConstantLength { alpha: num("alpha")? },
            "harmonic" => StepsizeSchedule::Harmonic,
            "diminishing" => StepsizeSchedule::Diminishing,
            "invsqrt" => StepsizeSchedule::InvSqrt,
            "adaptive" => StepsizeSchedule::Adaptive {
                lipschitz: num("L_f")?,
                sigma: num("sigma_g")?,
            },
            "linesearch" => StepsizeSchedule::LineSearch,
            other => return Err(Error::invalid(format!("unknown stepsize schedule '{other}'"))),
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

/// The objective restricted to the segment `x + alpha (p - x)`, as a function of `alpha`.
pub enum Segment<'a> {
    /// `F(alpha) = F(0) + slope * alpha + curvature * alpha^2 / 2`
    Quadratic { slope: f64, curvature: f64 },
    General(&'a dyn Fn(f64) -> f64),
}

/// Quantities available to closed-loop schedules at iteration `k`.
pub struct StepState<'a> {
    /// Conditional gradient norm `S(x_k)`.
    pub gap: f64,
    /// `||p_k - x_k||^2`.
    pub direction_sq: f64,
    pub segment: Option<Segment<'a>>,
}

impl StepState<'_> {
    pub fn open_loop() -> Self {
        StepState {
            gap: 0.0,
            direction_sq: 0.0,
            segment: None,
        }
    }
}

/// Stepsize for iteration `k`, always in `[0, 1]`.
pub fn stepsize(schedule: &StepsizeSchedule, k: usize, state: &StepState) -> Result<f64> {
    let kf = k as f64;
    let alpha = match *schedule {
        StepsizeSchedule::Constant { alpha } => alpha,
        StepsizeSchedule::ConstantLength { alpha } => {
            if state.direction_sq > 0.0 {
                alpha / state.direction_sq.sqrt()
            } else {
                1.0
            }
        }
        StepsizeSchedule::Harmonic => 2.0 / (kf + 2.0),
        StepsizeSchedule::Diminishing => kf / (kf + 2.0),
        StepsizeSchedule::InvSqrt => 1.0 / (kf + 1.0).sqrt(),
        StepsizeSchedule::Adaptive { lipschitz, sigma } => adaptive(lipschitz, sigma, state.gap, state.direction_sq),
        StepsizeSchedule::LineSearch => match &state.segment {
            Some(segment) => line_search(segment),
            None => return Err(Error::invalid("line search needs the objective along the segment")),
        },
    };
    Ok(alpha.clamp(0.0, 1.0))
}

/// `min(1, (S / r + sigma / 2) / (L + sigma))`, or 1 when the direction vanishes.
pub fn adaptive(lipschitz: f64, sigma: f64, gap: f64, direction_sq: f64) -> f64 {
    let denom = lipschitz + sigma;
    if direction_sq <= 0.0 || denom <= 0.0 {
        return 1.0;
    }
    ((gap / direction_sq + 0.5 * sigma) / denom).min(1.0)
}

/// Exact minimizer of the segment objective over `[0, 1]`.
pub fn line_search(segment: &Segment) -> f64 {
    match *segment {
        Segment::Quadratic { slope, curvature } => quadratic_argmin(slope, curvature),
        Segment::General(f) => grid_golden_argmin(f),
    }
}

fn quadratic_argmin(slope: f64, curvature: f64) -> f64 {
    if curvature > 0.0 {
        return (-slope / curvature).clamp(0.0, 1.0);
    }
    // concave or linear: the minimum sits at an endpoint
    if slope + 0.5 * curvature < 0.0 {
        1.0
    } else {
        0.0
    }
}

fn grid_golden_argmin(f: &dyn Fn(f64) -> f64) -> f64 {
    let m = LINE_SEARCH_GRID - 1;
    let grid: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&a| f(a)).collect();

    let mut best_a = 0.0;
    let mut best_v = f64::INFINITY;
    for (&a, &v) in grid.iter().zip(&vals) {
        if v < best_v {
            best_a = a;
            best_v = v;
        }
    }
    // refine every grid-local minimum; a single bracket can miss a deeper basin
    for i in 0..=m {
        let left = if i == 0 { f64::INFINITY } else { vals[i - 1] };
        let right = if i == m { f64::INFINITY } else { vals[i + 1] };
        if vals[i] <= left && vals[i] <= right {
            let lo = grid[i.saturating_sub(1)];
            let hi = grid[(i + 1).min(m)];
            let (a, v) = golden_section(f, lo, hi);
            if v < best_v {
                best_a = a;
                best_v = v;
            }
        }
    }
    best_a
}

fn golden_section(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > LINE_SEARCH_TOL {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
