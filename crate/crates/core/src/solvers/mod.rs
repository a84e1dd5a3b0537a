//! Regularized Frank-Wolfe and the first-order baselines.

mod baselines;
mod frank_wolfe;
mod oracles;
mod stepsize;
mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CrfInstance, RelaxedPoint};
use crate::regularizer::Regularizer;

pub use baselines::{admm_run, emd_run, fpgm_run, pgd_run, EMD_EPSILON};
pub use frank_wolfe::{mean_field_run, run_generalized_fw};
pub use oracles::{
    conditional_gradient_norm, convexify, direction_efw, direction_l2fw, initial_point, lmo_vanilla,
};
pub use stepsize::{
    adaptive, line_search, stepsize, Segment, StepState, StepsizeSchedule, LINE_SEARCH_GRID, LINE_SEARCH_TOL,
};
pub use trace::{InitialEnergies, IterationTrace, TraceRecord, BOUND_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverMethod {
    VanillaFW,
    /// Vanilla FW on the convexified energy.
    ConvexFW,
    L2FW,
    EntropicFW,
    MeanField,
    DampedMeanField { alpha: f64 },
    PGD,
    FastPGM,
    EMD,
    ADMM { rho: f64 },
}

impl SolverMethod {
    /// Short name used on the command line and in traces.
    pub fn name(&self) -> &'static str {
        match self {
            SolverMethod::VanillaFW => "fw",
            SolverMethod::ConvexFW => "cfw",
            SolverMethod::L2FW => "l2fw",
            SolverMethod::EntropicFW => "efw",
            SolverMethod::MeanField => "mf",
            SolverMethod::DampedMeanField { .. } => "dmf",
            SolverMethod::PGD => "pgd",
            SolverMethod::FastPGM => "pgm",
            SolverMethod::EMD => "emd",
            SolverMethod::ADMM { .. } => "admm",
        }
    }

    pub fn is_frank_wolfe(&self) -> bool {
        matches!(
            self,
            SolverMethod::VanillaFW
                | SolverMethod::ConvexFW
                | SolverMethod::L2FW
                | SolverMethod::EntropicFW
                | SolverMethod::MeanField
                | SolverMethod::DampedMeanField { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SolverMethod::DampedMeanField { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                Err(Error::invalid(format!("damping must lie in (0, 1], got {alpha}")))
            }
            SolverMethod::ADMM { rho } if !(rho > 0.0 && rho.is_finite()) => {
                Err(Error::invalid(format!("ADMM penalty must be positive, got {rho}")))
            }
            _ => Ok(()),
        }
    }

    /// Schedule used when none is given.
    pub fn default_schedule(&self) -> StepsizeSchedule {
        match *self {
            SolverMethod::VanillaFW | SolverMethod::ConvexFW => StepsizeSchedule::LineSearch,
            SolverMethod::DampedMeanField { alpha } => StepsizeSchedule::Constant { alpha },
            _ => StepsizeSchedule::Constant { alpha: 1.0 },
        }
    }
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses the short names. `dmf` and `admm` take an optional parameter (`dmf:0.3`, `admm:2`);
/// without one the damping is 0.5 and `rho = 1`.
impl FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((name, p)) => {
                let v = p
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("method '{s}': {e}")))?;
                (name, Some(v))
            }
            None => (s, None),
        };
        let name = name.to_ascii_lowercase();
        let method = match (name.as_str(), param) {
            ("dmf", p) => SolverMethod::DampedMeanField { alpha: p.unwrap_or(0.5) },
            ("admm", p) => SolverMethod::ADMM { rho: p.unwrap_or(1.0) },
            (_, Some(_)) => return Err(Error::invalid(format!("method '{name}' takes no parameter"))),
            ("fw", None) => SolverMethod::VanillaFW,
            ("cfw", None) => SolverMethod::ConvexFW,
            ("l2fw", None) => SolverMethod::L2FW,
            ("efw", None) => SolverMethod::EntropicFW,
            ("mf", None) => SolverMethod::MeanField,
            ("pgd", None) => SolverMethod::PGD,
            ("pgm", None) => SolverMethod::FastPGM,
            ("emd", None) => SolverMethod::EMD,
            (other, None) => return Err(Error::invalid(format!("unknown method '{other}'"))),
        };
        method.validate()?;
        Ok(method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub regularizer: Regularizer,
    pub schedule: StepsizeSchedule,
    pub max_iters: usize,
    pub record_discrete_energy: bool,
    pub decrease_bound_check: bool,
    /// Keep every iterate in the trace (memory grows with `max_iters * n * d`).
    #[serde(default)]
    pub record_iterates: bool,
}

impl SolverConfig {
    /// Config with the method's default schedule, no regularizer and discrete energies on.
    pub fn new(method: SolverMethod, max_iters: usize) -> Self {
        SolverConfig {
            method,
            regularizer: Regularizer::None,
            schedule: method.default_schedule(),
            max_iters,
            record_discrete_energy: true,
            decrease_bound_check: false,
            record_iterates: false,
        }
    }

    pub fn with_regularizer(mut self, regularizer: Regularizer) -> Self {
        self.regularizer = regularizer;
        self
    }

    pub fn with_schedule(mut self, schedule: StepsizeSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_bound_check(mut self, on: bool) -> Self {
        self.decrease_bound_check = on;
        self
    }

    pub fn with_iterates(mut self, on: bool) -> Self {
        self.record_iterates = on;
        self
    }

    /// The regularizer the method actually uses.
    pub fn effective_regularizer(&self) -> Result<Regularizer> {
        let reg = match self.method {
            SolverMethod::L2FW => match self.regularizer {
                r @ Regularizer::L2 { .. } => r,
                _ => return Err(Error::invalid("l2fw needs an L2 regularizer")),
            },
            SolverMethod::EntropicFW => match self.regularizer {
                r @ Regularizer::Entropy { .. } => r,
                _ => return Err(Error::invalid("efw needs an entropy regularizer")),
            },
            SolverMethod::MeanField | SolverMethod::DampedMeanField { .. } => Regularizer::Entropy { lambda: 1.0 },
            _ => Regularizer::None,
        };
        reg.validate()?;
        Ok(reg)
    }

    /// The schedule the method actually uses.
    pub fn effective_schedule(&self) -> Result<StepsizeSchedule> {
        let schedule = match self.method {
            SolverMethod::MeanField => StepsizeSchedule::Constant { alpha: 1.0 },
            SolverMethod::DampedMeanField { alpha } => StepsizeSchedule::Constant { alpha },
            _ => self.schedule,
        };
        schedule.validate()?;
        let bad = match self.method {
            SolverMethod::PGD => matches!(schedule, StepsizeSchedule::Adaptive { .. }),
            SolverMethod::FastPGM | SolverMethod::EMD => matches!(
                schedule,
                StepsizeSchedule::Adaptive { .. }
                    | StepsizeSchedule::LineSearch
                    | StepsizeSchedule::ConstantLength { .. }
            ),
            _ => false,
        };
        if bad {
            return Err(Error::invalid(format!(
                "stepsize {schedule} is not available for {}",
                self.method
            )));
        }
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        self.method.validate()?;
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        self.effective_regularizer()?;
        self.effective_schedule()?;
        Ok(())
    }
}

/// Runs whichever solver the config names.
pub fn solve(instance: &CrfInstance, config: &SolverConfig) -> Result<(RelaxedPoint, IterationTrace)> {
    match config.method {
        SolverMethod::PGD => pgd_run(instance, config),
        SolverMethod::FastPGM => fpgm_run(instance, config),
        SolverMethod::EMD => emd_run(instance, config),
        SolverMethod::ADMM { .. } => admm_run(instance, config),
        SolverMethod::MeanField | SolverMethod::DampedMeanField { .. } => {
            frank_wolfe::mean_field_config(instance, config)
        }
        _ => run_generalized_fw(instance, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for name in ["fw", "cfw", "l2fw", "efw", "mf", "dmf", "pgd", "pgm", "emd", "admm"] {
            assert_eq!(name.parse::<SolverMethod>().unwrap().name(), name);
        }
        assert!("nosuch".parse::<SolverMethod>().is_err());
        assert_eq!("dmf:0.3".parse::<SolverMethod>().unwrap(), SolverMethod::DampedMeanField { alpha: 0.3 });
        assert_eq!("admm:2".parse::<SolverMethod>().unwrap(), SolverMethod::ADMM { rho: 2.0 });
        assert!("dmf:1.5".parse::<SolverMethod>().is_err());
        assert!("fw:1".parse::<SolverMethod>().is_err());
    }

    #[test]
    fn config_validation() {
        let c = SolverConfig::new(SolverMethod::L2FW, 5);
        assert!(c.validate().is_err());
        assert!(c.clone().with_regularizer(Regularizer::L2 { lambda: 1.0 }).validate().is_ok());
        assert!(c
            .with_regularizer(Regularizer::Entropy { lambda: 1.0 })
            .validate()
            .is_err());
        let pgd = SolverConfig::new(SolverMethod::PGD, 5)
            .with_regularizer(Regularizer::L2 { lambda: 3.0 });
        assert_eq!(pgd.effective_regularizer().unwrap(), Regularizer::None);
        assert!(pgd
            .with_schedule(StepsizeSchedule::Adaptive { lipschitz: 1.0, sigma: 0.0 })
            .validate()
            .is_err());
        assert!(SolverConfig::new(SolverMethod::FastPGM, 5)
            .with_schedule(StepsizeSchedule::LineSearch)
            .validate()
            .is_err());
        assert!(SolverConfig::new(SolverMethod::VanillaFW, 0).validate().is_err());
        assert!(SolverConfig::new(SolverMethod::DampedMeanField { alpha: 1.5 }, 3).validate().is_err());
    }
}
