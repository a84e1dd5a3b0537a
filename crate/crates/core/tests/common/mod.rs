#![allow(dead_code)]

use crffw::{
    CrfInstance, DenseMatrix, Edge, EdgeList, GaussianKernel, KernelParams, Labeling, PairwiseBackend, RelaxedPoint,
};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Dense,
    Edges,
    Gaussian,
}

pub const KINDS: [Kind; 3] = [Kind::Dense, Kind::Edges, Kind::Gaussian];

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Small random instance of the requested backend with unit-scale entries.
pub fn random_instance(rng: &mut ChaCha8Rng, kind: Kind, n: usize, d: usize) -> CrfInstance {
    let unary = Array2::from_shape_simple_fn((n, d), || normal(rng));
    let backend = match kind {
        Kind::Dense => {
            let m = n * d;
            let mut p = Array2::<f64>::zeros((m, m));
            for i in 0..n {
                for j in (i + 1)..n {
                    for s in 0..d {
                        for t in 0..d {
                            let v = normal(rng);
                            p[(i * d + s, j * d + t)] = v;
                            p[(j * d + t, i * d + s)] = v;
                        }
                    }
                }
            }
            PairwiseBackend::Dense(DenseMatrix::new(n, d, p).unwrap())
        }
        Kind::Edges => {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < 0.6 {
                        edges.push(Edge { i, j, theta: Array2::from_shape_simple_fn((d, d), || normal(rng)) });
                    }
                }
            }
            PairwiseBackend::Edges(EdgeList::new(n, d, edges).unwrap())
        }
        Kind::Gaussian => {
            let positions = (0..n).map(|_| [rng.random::<f64>() * 4.0, rng.random::<f64>() * 4.0]).collect();
            let colors = (0..n)
                .map(|_| [rng.random::<f64>() * 30.0, rng.random::<f64>() * 30.0, rng.random::<f64>() * 30.0])
                .collect();
            let params = KernelParams { w1: 1.5, w2: 0.7, alpha: 3.0, beta: 20.0, gamma: 1.5 };
            let mut mu = Array2::zeros((d, d));
            for s in 0..d {
                for t in (s + 1)..d {
                    let v = rng.random::<f64>();
                    mu[(s, t)] = v;
                    mu[(t, s)] = v;
                }
            }
            PairwiseBackend::Gaussian(GaussianKernel::new(positions, colors, params, mu).unwrap())
        }
    };
    CrfInstance::new(unary, backend).unwrap()
}

/// Random point of the product of simplices; some entries are exactly zero.
pub fn random_point(rng: &mut ChaCha8Rng, n: usize, d: usize) -> RelaxedPoint {
    let mut x = Array2::<f64>::zeros((n, d));
    for mut row in x.rows_mut() {
        for v in row.iter_mut() {
            let e: f64 = -rng.random::<f64>().max(1e-300).ln();
            *v = if rng.random::<f64>() < 0.15 { 0.0 } else { e };
        }
        let s: f64 = row.sum();
        if s == 0.0 {
            row[rng.random_range(0..d)] = 1.0;
        } else {
            row.mapv_inplace(|v| v / s);
        }
    }
    RelaxedPoint::new(x).unwrap()
}

/// The `nd x nd` matrix `P` assembled entry by entry from the model definitions.
pub fn explicit_p(instance: &CrfInstance) -> Array2<f64> {
    let (n, d) = (instance.n_nodes(), instance.n_labels());
    let mut p = Array2::<f64>::zeros((n * d, n * d));
    match instance.pairwise() {
        PairwiseBackend::Dense(m) => p.assign(m.data()),
        PairwiseBackend::Edges(e) => {
            for edge in e.edges() {
                for s in 0..d {
                    for t in 0..d {
                        p[(edge.i * d + s, edge.j * d + t)] += edge.theta[(s, t)];
                        p[(edge.j * d + t, edge.i * d + s)] += edge.theta[(s, t)];
                    }
                }
            }
        }
        PairwiseBackend::Gaussian(g) => {
            let k = g.params();
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let (pi, pj) = (g.positions()[i], g.positions()[j]);
                    let (ci, cj) = (g.colors()[i], g.colors()[j]);
                    let dp: f64 = (0..2).map(|a| (pi[a] - pj[a]).powi(2)).sum();
                    let dc: f64 = (0..3).map(|a| (ci[a] - cj[a]).powi(2)).sum();
                    let kv = k.w1 * (-dp / (2.0 * k.alpha * k.alpha) - dc / (2.0 * k.beta * k.beta)).exp()
                        + k.w2 * (-dp / (2.0 * k.gamma * k.gamma)).exp();
                    for s in 0..d {
                        for t in 0..d {
                            p[(i * d + s, j * d + t)] = kv * g.compatibility()[(s, t)];
                        }
                    }
                }
            }
        }
    }
    if let Some(q) = instance.diagonal() {
        for i in 0..n {
            for s in 0..d {
                p[(i * d + s, i * d + s)] += q[(i, s)];
            }
        }
    }
    p
}

pub fn flatten(x: ArrayView2<f64>) -> Vec<f64> {
    x.iter().copied().collect()
}

/// `1/2 x^T P x + u^T x` by plain loops over the explicit matrix.
pub fn naive_energy(p: &Array2<f64>, unary: &Array2<f64>, x: ArrayView2<f64>) -> f64 {
    let v = flatten(x);
    let u = flatten(unary.view());
    let m = v.len();
    let mut quad = 0.0;
    for a in 0..m {
        for b in 0..m {
            quad += v[a] * p[(a, b)] * v[b];
        }
    }
    0.5 * quad + (0..m).map(|a| u[a] * v[a]).sum::<f64>()
}

pub fn naive_gradient(p: &Array2<f64>, unary: &Array2<f64>, x: ArrayView2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let v = flatten(x);
    let m = v.len();
    Array2::from_shape_fn((n, d), |(i, s)| {
        let a = i * d + s;
        (0..m).map(|b| p[(a, b)] * v[b]).sum::<f64>() + unary[(i, s)]
    })
}

/// Discrete energy summed over unordered node pairs, independent of the relaxation.
pub fn naive_discrete(instance: &CrfInstance, labels: &[usize]) -> f64 {
    let d = instance.n_labels();
    let p = explicit_p(instance);
    let n = labels.len();
    let mut e: f64 = (0..n).map(|i| instance.unary()[(i, labels[i])]).sum();
    for i in 0..n {
        for j in (i + 1)..n {
            e += p[(i * d + labels[i], j * d + labels[j])];
        }
        e += 0.5 * p[(i * d + labels[i], i * d + labels[i])];
    }
    e
}

/// Every labeling of `n` nodes with `d` labels, built by recursion.
pub fn all_labelings(n: usize, d: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for prefix in all_labelings(n - 1, d) {
        for s in 0..d {
            let mut l = prefix.clone();
            l.push(s);
            out.push(l);
        }
    }
    out
}

pub fn one_hot(labels: &[usize], d: usize) -> RelaxedPoint {
    RelaxedPoint::one_hot(&Labeling::new(labels.to_vec()), d).unwrap()
}

/// Largest eigenvalue magnitude of a symmetric matrix by cyclic Jacobi rotations.
pub fn spectral_norm(a: &Array2<f64>) -> f64 {
    let m = a.nrows();
    let mut a = a.clone();
    for _ in 0..100 {
        let off: f64 = (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..m).map(|i| a[(i, i)].abs()).fold(0.0, f64::max)
}
