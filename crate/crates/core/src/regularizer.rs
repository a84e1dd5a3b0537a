use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower clamp applied before taking logarithms, so that `0 log 0` evaluates to `0`.
pub const LOG_FLOOR: f64 = 1e-300;

/// Convex regularizer `r` added to the energy by the regularized Frank-Wolfe variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Regularizer {
    None,
    /// `lambda/2 * ||x||^2`
    L2 { lambda: f64 },
    /// `lambda * sum x log x` (negative entropy)
    Entropy { lambda: f64 },
}

impl Regularizer {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Regularizer::None => Ok(()),
            Regularizer::L2 { lambda } | Regularizer::Entropy { lambda } => {
                if lambda > 0.0 && lambda.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("regularization weight must be positive, got {lambda}")))
                }
            }
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            Regularizer::None => None,
            Regularizer::L2 { lambda } | Regularizer::Entropy { lambda } => Some(lambda),
        }
    }

    /// Strong-convexity modulus over the feasible set with respect to the Euclidean norm.
    pub fn strong_convexity(&self) -> f64 {
        self.lambda().unwrap_or(0.0)
    }

    pub fn value(&self, x: ArrayView2<f64>) -> f64 {
        match *self {
            Regularizer::None => 0.0,
            Regularizer::L2 { lambda } => 0.5 * lambda * x.iter().map(|v| v * v).sum::<f64>(),
            Regularizer::Entropy { lambda } => {
                lambda * x.iter().map(|&v| v * v.max(LOG_FLOOR).ln()).sum::<f64>()
            }
        }
    }
}

/// Anything that can be evaluated on an `n x d` point; lets tests plug in custom regularizers.
pub trait RegularizerFn {
    fn evaluate(&self, x: ArrayView2<f64>) -> f64;
}

impl RegularizerFn for Regularizer {
    fn evaluate(&self, x: ArrayView2<f64>) -> f64 {
        self.value(x)
    }
}

impl<F: Fn(ArrayView2<f64>) -> f64> RegularizerFn for F {
    fn evaluate(&self, x: ArrayView2<f64>) -> f64 {
        self(x)
    }
}
