//! Pairwise subset of the UAI `MARKOV` format.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{CrfInstance, Edge, EdgeList, PairwiseBackend};

/// Probabilities are clamped to at least this value before taking `-log`.
pub const UAI_PROB_FLOOR: f64 = 1e-300;

struct Tokens<'a> {
    iter: std::str::SplitWhitespace<'a>,
    consumed: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.consumed += 1;
        self.iter
            .next()
            .ok_or_else(|| Error::Parse(format!("unexpected end of file while reading {what}")))
    }

    fn int(&mut self, what: &str) -> Result<usize> {
        let tok = self.next(what)?;
        tok.parse()
            .map_err(|_| Error::Parse(format!("token {} ('{tok}'): expected integer {what}", self.consumed)))
    }

    fn real(&mut self, what: &str) -> Result<f64> {
        let tok = self.next(what)?;
        tok.parse()
            .map_err(|_| Error::Parse(format!("token {} ('{tok}'): expected number {what}", self.consumed)))
    }
}

fn potential(phi: f64) -> f64 {
    -phi.max(UAI_PROB_FLOOR).ln()
}

/// Parses UAI `MARKOV` text into an edge-list instance with `theta = -log max(phi, 1e-300)`.
/// Factors sharing a scope are multiplied together.
pub fn parse_uai(text: &str) -> Result<CrfInstance> {
    let mut t = Tokens { iter: text.split_whitespace(), consumed: 0 };
    let kind = t.next("the network type")?;
    if !kind.eq_ignore_ascii_case("MARKOV") {
        return Err(Error::Unsupported(format!("network type '{kind}' (only MARKOV is read)")));
    }
    let n = t.int("variable count")?;
    if n == 0 {
        return Err(Error::Parse("network has no variables".into()));
    }
    let cards = (0..n).map(|_| t.int("cardinality")).collect::<Result<Vec<_>>>()?;
    let d = cards[0];
    if d == 0 {
        return Err(Error::Parse("cardinality must be positive".into()));
    }
    if cards.iter().any(|&c| c != d) {
        return Err(Error::Unsupported("variables with different cardinalities".into()));
    }
    let n_factors = t.int("factor count")?;
    let mut scopes = Vec::with_capacity(n_factors);
    for f in 0..n_factors {
        let arity = t.int("scope size")?;
        if arity > 2 {
            return Err(Error::Unsupported(format!("factor {f} has {arity} variables; only unary and pairwise factors are supported")));
        }
        let scope = (0..arity).map(|_| t.int("scope variable")).collect::<Result<Vec<_>>>()?;
        if let Some(&v) = scope.iter().find(|&&v| v >= n) {
            return Err(Error::Parse(format!("factor {f} refers to variable {v} of {n}")));
        }
        if arity == 2 && scope[0] == scope[1] {
            return Err(Error::Parse(format!("factor {f} repeats variable {}", scope[0])));
        }
        scopes.push(scope);
    }

    let mut unary = Array2::<f64>::zeros((n, d));
    let mut pair: BTreeMap<(usize, usize), Array2<f64>> = BTreeMap::new();
    for (f, scope) in scopes.iter().enumerate() {
        let expected = d.pow(scope.len() as u32);
        let count = t.int("table size")?;
        if count != expected {
            return Err(Error::Parse(format!("factor {f} table has {count} entries, expected {expected}")));
        }
        let table = (0..count).map(|_| t.real("table entry")).collect::<Result<Vec<_>>>()?;
        if let Some(bad) = table.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Parse(format!("factor {f} has invalid entry {bad}")));
        }
        match scope.as_slice() {
            [] => {}
            [v] => {
                for s in 0..d {
                    unary[(*v, s)] += potential(table[s]);
                }
            }
            [a, b] => {
                let (i, j) = if a < b { (*a, *b) } else { (*b, *a) };
                let theta = pair.entry((i, j)).or_insert_with(|| Array2::zeros((d, d)));
                // the last scope variable varies fastest
                for sa in 0..d {
                    for sb in 0..d {
                        let e = potential(table[sa * d + sb]);
                        if a < b {
                            theta[(sa, sb)] += e;
                        } else {
                            theta[(sb, sa)] += e;
                        }
                    }
                }
            }
            _ => unreachable!("arity checked above"),
        }
    }
    let edges = pair.into_iter().map(|((i, j), theta)| Edge { i, j, theta }).collect();
    CrfInstance::new(unary, PairwiseBackend::Edges(EdgeList::new(n, d, edges)?))
}

pub fn read_uai(path: impl AsRef<Path>) -> Result<CrfInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_uai(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_uniform_factor() {
        let inst = parse_uai("MARKOV\n1\n2\n1\n1 0\n2\n0.5 0.5\n").unwrap();
        let ln2 = 2f64.ln();
        assert!(inst.unary().iter().all(|&v| (v - ln2).abs() < 1e-15));
    }

    #[test]
    fn all_ones_pairwise_is_zero() {
        let inst = parse_uai("MARKOV\n2\n2 2\n1\n2 0 1\n4\n1 1 1 1\n").unwrap();
        assert_eq!(inst.lipschitz_upper_bound(), 0.0);
    }

    #[test]
    fn zero_probability_is_clamped() {
        let inst = parse_uai("MARKOV\n1\n2\n1\n1 0\n2\n0 1\n").unwrap();
        assert!((inst.unary()[(0, 0)] - 690.7755278982137).abs() < 1e-9);
        assert_eq!(inst.unary()[(0, 1)], 0.0);
    }

    #[test]
    fn reversed_scope_is_transposed() {
        // phi(x1, x0) with x0 fastest: entry (x1=1, x0=0) sits at index 2
        let inst = parse_uai("MARKOV\n2\n2 2\n1\n2 1 0\n4\n1 1 0.5 1\n").unwrap();
        match inst.pairwise() {
            PairwiseBackend::Edges(e) => {
                let theta = &e.edges()[0].theta;
                assert!((theta[(0, 1)] - 2f64.ln()).abs() < 1e-15);
                assert_eq!(theta[(1, 0)], 0.0);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn unsupported_inputs() {
        assert!(matches!(parse_uai("BAYES\n1\n2\n0\n"), Err(Error::Unsupported(_))));
        assert!(matches!(parse_uai("MARKOV\n2\n2 3\n0\n"), Err(Error::Unsupported(_))));
        assert!(matches!(parse_uai("MARKOV\n3\n2 2 2\n1\n3 0 1 2\n"), Err(Error::Unsupported(_))));
        assert!(matches!(parse_uai("MARKOV\n1\n2\n1\n1 0\n3\n1 1 1\n"), Err(Error::Parse(_))));
    }
}
