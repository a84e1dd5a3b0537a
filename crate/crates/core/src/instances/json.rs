//! Native JSON format.
//!
//! ```text
//! {
//!   "version": 1,
//!   "n": <nodes>, "d": <labels>,
//!   "unary": [n*d numbers, row-major],
//!   "pairwise": {"type": "dense", "data": [(n*d)^2 numbers, row-major]}
//!             | {"type": "edges", "edges": [{"i": .., "j": .., "theta": [d*d numbers]}, ...]}
//!             | {"type": "gaussian", "positions": [[x, y], ...], "colors": [[r, g, b], ...],
//!                "params": {"w1", "w2", "alpha", "beta", "gamma"}, "compatibility": [d*d numbers]},
//!   "diagonal": [n*d numbers]          (optional)
//! }
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CrfInstance, DenseMatrix, Edge, EdgeList, GaussianKernel, KernelParams, PairwiseBackend};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Deserialize)]
struct VersionProbe {
    version: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    version: u64,
    n: usize,
    d: usize,
    unary: Vec<f64>,
    pairwise: PairwiseDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diagonal: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum PairwiseDoc {
    Dense {
        data: Vec<f64>,
    },
    Edges {
        edges: Vec<EdgeDoc>,
    },
    Gaussian {
        positions: Vec<[f64; 2]>,
        colors: Vec<[f64; 3]>,
        params: KernelParams,
        compatibility: Vec<f64>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    i: usize,
    j: usize,
    theta: Vec<f64>,
}

fn flat(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

fn matrix(rows: usize, cols: usize, data: Vec<f64>, field: &str) -> Result<Array2<f64>> {
    let len = data.len();
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|_| Error::Parse(format!("field '{field}' has {len} entries, expected {rows}x{cols}")))
}

pub fn to_json_string(instance: &CrfInstance) -> String {
    let (n, d) = (instance.n_nodes(), instance.n_labels());
    let pairwise = match instance.pairwise() {
        PairwiseBackend::Dense(m) => PairwiseDoc::Dense { data: flat(m.data()) },
        PairwiseBackend::Edges(e) => PairwiseDoc::Edges {
            edges: e
                .edges()
                .iter()
                .map(|e| EdgeDoc { i: e.i, j: e.j, theta: flat(&e.theta) })
                .collect(),
        },
        PairwiseBackend::Gaussian(g) => PairwiseDoc::Gaussian {
            positions: g.positions().to_vec(),
            colors: g.colors().to_vec(),
            params: g.params(),
            compatibility: flat(g.compatibility()),
        },
    };
    let doc = Document {
        version: FORMAT_VERSION,
        n,
        d,
        unary: flat(instance.unary()),
        pairwise,
        diagonal: instance.diagonal().map(flat),
    };
    let mut s = serde_json::to_string(&doc).expect("instance documents always serialize");
    s.push('\n');
    s
}

pub fn from_json_str(text: &str) -> Result<CrfInstance> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    match probe.version {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(Error::UnsupportedVersion(v)),
        None => return Err(Error::Parse("missing field `version`".into())),
    }
    let doc: Document = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let (n, d) = (doc.n, doc.d);
    let unary = matrix(n, d, doc.unary, "unary")?;
    let pairwise = match doc.pairwise {
        PairwiseDoc::Dense { data } => {
            PairwiseBackend::Dense(DenseMatrix::new(n, d, matrix(n * d, n * d, data, "pairwise.data")?)?)
        }
        PairwiseDoc::Edges { edges } => {
            let edges = edges
                .into_iter()
                .enumerate()
                .map(|(k, e)| {
                    Ok(Edge {
                        i: e.i,
                        j: e.j,
                        theta: matrix(d, d, e.theta, &format!("pairwise.edges[{k}].theta"))?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            PairwiseBackend::Edges(EdgeList::new(n, d, edges)?)
        }
        PairwiseDoc::Gaussian { positions, colors, params, compatibility } => {
            if positions.len() != n {
                return Err(Error::Parse(format!("field 'pairwise.positions' has {} entries, expected {n}", positions.len())));
            }
            let mu = matrix(d, d, compatibility, "pairwise.compatibility")?;
            PairwiseBackend::Gaussian(GaussianKernel::new(positions, colors, params, mu)?)
        }
    };
    let instance = CrfInstance::new(unary, pairwise)?;
    match doc.diagonal {
        Some(q) => instance.with_diagonal(matrix(n, d, q, "diagonal")?),
        None => Ok(instance),
    }
}

pub fn write_json(instance: &CrfInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json_string(instance)).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn read_json(path: impl AsRef<Path>) -> Result<CrfInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    from_json_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, GeneratorSpec};
    use crate::solvers::convexify;

    #[test]
    fn round_trip_every_backend() {
        for spec in [
            GeneratorSpec::dense(7, 3, 1),
            GeneratorSpec::grid(2, 3, 2, 1),
            GeneratorSpec::edge_list(5, 3, 0.6, 1),
        ] {
            let inst = generate(&spec).unwrap();
            assert_eq!(from_json_str(&to_json_string(&inst)).unwrap(), inst);
            let dense = CrfInstance::new(inst.unary().clone(), PairwiseBackend::Dense(inst.pairwise().to_dense())).unwrap();
            assert_eq!(from_json_str(&to_json_string(&dense)).unwrap(), dense);
        }
        let cvx = convexify(&generate(&GeneratorSpec::grid(2, 2, 3, 4)).unwrap()).unwrap();
        assert_eq!(from_json_str(&to_json_string(&cvx)).unwrap(), cvx);
    }

    #[test]
    fn missing_unary_is_named() {
        let text = r#"{"version": 1, "n": 1, "d": 2, "pairwise": {"type": "edges", "edges": []}}"#;
        match from_json_str(text) {
            Err(Error::Parse(msg)) => assert!(msg.contains("unary"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = r#"{"version": 2, "n": 1, "d": 2}"#;
        assert!(matches!(from_json_str(text), Err(Error::UnsupportedVersion(2))));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let text = "{\"version\": 1,\n \"n\": }";
        match from_json_str(text) {
            Err(Error::Parse(msg)) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
