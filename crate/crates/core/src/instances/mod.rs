//! Synthetic instance generators and file formats.

mod json;
mod uai;

pub use json::{from_json_str, read_json, to_json_string, write_json, FORMAT_VERSION};
pub use uai::{parse_uai, read_uai, UAI_PROB_FLOOR};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{potts, CrfInstance, Edge, EdgeList, GaussianKernel, KernelParams, PairwiseBackend};

/// Default multiplier of the standard-normal unaries on grids and edge lists.
pub const DEFAULT_UNARY_SCALE: f64 = 1.0;
/// Default unary multiplier of RandomDense instances.
pub const DENSE_UNARY_SCALE: f64 = 10.0;

/// Side length giving one pixel per unit area, so the kernel bandwidths read in pixels.
pub fn default_image_size(n: usize) -> f64 {
    (n as f64).sqrt()
}

/// Label compatibility `mu` of a dense instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Compatibility {
    Potts { w: f64 },
    /// Symmetric, zero diagonal, off-diagonal entries uniform in `[0, 1)`.
    RandomSymmetric,
}

/// Recipe for a synthetic instance. Every variant carries its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// Fully connected Gaussian-kernel CRF on random pixel features.
    RandomDense {
        n: usize,
        d: usize,
        image_size: f64,
        kernel: KernelParams,
        compatibility: Compatibility,
        unary_scale: f64,
        seed: u64,
    },
    /// 4-connected grid with Potts edges.
    RandomGrid {
        rows: usize,
        cols: usize,
        d: usize,
        potts_w: f64,
        unary_scale: f64,
        seed: u64,
    },
    /// Erdos-Renyi graph with standard-normal edge tables.
    RandomEdgeList {
        n: usize,
        d: usize,
        edge_prob: f64,
        unary_scale: f64,
        seed: u64,
    },
}

impl GeneratorSpec {
    /// Dense spec with the default kernel, Potts `w = 1`, image side `sqrt(n)` and
    /// [`DENSE_UNARY_SCALE`].
    pub fn dense(n: usize, d: usize, seed: u64) -> Self {
        GeneratorSpec::RandomDense {
            n,
            d,
            image_size: default_image_size(n),
            kernel: KernelParams::default(),
            compatibility: Compatibility::Potts { w: 1.0 },
            unary_scale: DENSE_UNARY_SCALE,
            seed,
        }
    }

    pub fn grid(rows: usize, cols: usize, d: usize, seed: u64) -> Self {
        GeneratorSpec::RandomGrid {
            rows,
            cols,
            d,
            potts_w: 1.0,
            unary_scale: DEFAULT_UNARY_SCALE,
            seed,
        }
    }

    pub fn edge_list(n: usize, d: usize, edge_prob: f64, seed: u64) -> Self {
        GeneratorSpec::RandomEdgeList {
            n,
            d,
            edge_prob,
            unary_scale: DEFAULT_UNARY_SCALE,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |what: &str, v: usize| {
            if v == 0 {
                Err(Error::invalid(format!("{what} must be positive")))
            } else {
                Ok(())
            }
        };
        let finite = |what: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be finite and nonnegative, got {v}")))
            }
        };
        match *self {
            GeneratorSpec::RandomDense { n, d, image_size, compatibility, unary_scale, .. } => {
                positive("node count", n)?;
                positive("label count", d)?;
                finite("image size", image_size)?;
                finite("unary scale", unary_scale)?;
                if let Compatibility::Potts { w } = compatibility {
                    if !w.is_finite() {
                        return Err(Error::invalid("Potts weight must be finite"));
                    }
                }
            }
            GeneratorSpec::RandomGrid { rows, cols, d, potts_w, unary_scale, .. } => {
                positive("rows", rows)?;
                positive("cols", cols)?;
                positive("label count", d)?;
                if !potts_w.is_finite() {
                    return Err(Error::invalid("Potts weight must be finite"));
                }
                finite("unary scale", unary_scale)?;
            }
            GeneratorSpec::RandomEdgeList { n, d, edge_prob, unary_scale, .. } => {
                positive("node count", n)?;
                positive("label count", d)?;
                if !(0.0..=1.0).contains(&edge_prob) {
                    return Err(Error::invalid(format!("edge probability must lie in [0, 1], got {edge_prob}")));
                }
                finite("unary scale", unary_scale)?;
            }
        }
        Ok(())
    }
}

fn normal_unary(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || scale * rng.sample::<f64, _>(StandardNormal))
}

/// Builds the instance a spec describes; a pure function of the spec.
pub fn generate(spec: &GeneratorSpec) -> Result<CrfInstance> {
    spec.validate()?;
    match *spec {
        GeneratorSpec::RandomDense { n, d, image_size, kernel, compatibility, unary_scale, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let positions: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.random::<f64>() * image_size, rng.random::<f64>() * image_size])
                .collect();
            let colors: Vec<[f64; 3]> = (0..n)
                .map(|_| [rng.random::<f64>() * 255.0, rng.random::<f64>() * 255.0, rng.random::<f64>() * 255.0])
                .collect();
            let unary = normal_unary(&mut rng, n, d, unary_scale);
            let mu = match compatibility {
                Compatibility::Potts { w } => potts(d, w),
                Compatibility::RandomSymmetric => {
                    let mut mu = Array2::zeros((d, d));
                    for s in 0..d {
                        for t in (s + 1)..d {
                            let v: f64 = rng.random();
                            mu[(s, t)] = v;
                            mu[(t, s)] = v;
                        }
                    }
                    mu
                }
            };
            let backend = GaussianKernel::new(positions, colors, kernel, mu)?;
            CrfInstance::new(unary, PairwiseBackend::Gaussian(backend))
        }
        GeneratorSpec::RandomGrid { rows, cols, d, potts_w, unary_scale, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rows * cols;
            let unary = normal_unary(&mut rng, n, d, unary_scale);
            let theta = potts(d, potts_w);
            let mut edges = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    let i = r * cols + c;
                    if c + 1 < cols {
                        edges.push(Edge { i, j: i + 1, theta: theta.clone() });
                    }
                    if r + 1 < rows {
                        edges.push(Edge { i, j: i + cols, theta: theta.clone() });
                    }
                }
            }
            CrfInstance::new(unary, PairwiseBackend::Edges(EdgeList::new(n, d, edges)?))
        }
        GeneratorSpec::RandomEdgeList { n, d, edge_prob, unary_scale, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let unary = normal_unary(&mut rng, n, d, unary_scale);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < edge_prob {
                        let theta = Array2::from_shape_simple_fn((d, d), || rng.sample::<f64, _>(StandardNormal));
                        edges.push(Edge { i, j, theta });
                    }
                }
            }
            CrfInstance::new(unary, PairwiseBackend::Edges(EdgeList::new(n, d, edges)?))
        }
    }
}
