//! Text formats for the drift lab.
//!
//! A chain file holds one matrix row per line, whitespace separated; blank
//! lines and anything after `#` are ignored. A spec file is TOML:
//!
//! ```toml
//! V = [1.0, 2.0, 3.0]
//! f = 1.0              # a scalar is broadcast to every state
//! delta = [1.0, 1.0, 2.0]
//! C = [0]
//! b = 2.5
//! horizon = 4          # optional, for the supermartingale check
//!
//! [stop]
//! fixed = 1            # or: state_dependent = [1, 2, 1] / hitting = [0]
//! ```

use std::path::Path;

use serde::Deserialize;

use super::chain::FiniteChain;
use super::drift::{DriftSpec, StopRule};
use crate::error::{Error, Result};

pub const DEFAULT_HORIZON: usize = 4;

pub fn parse_chain(text: &str) -> Result<FiniteChain> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let row = body
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::Input(format!("chain line {}: bad number {tok:?}", lineno + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input("chain file has no rows".into()));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != rows.len()) {
        return Err(Error::Input(format!(
            "chain row {i} has {} entries, expected {}",
            rows[i].len(),
            rows.len()
        )));
    }
    FiniteChain::from_rows(&rows)
}

pub fn read_chain(path: &Path) -> Result<FiniteChain> {
    parse_chain(&std::fs::read_to_string(path)?)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PerState<T> {
    All(T),
    Each(Vec<T>),
}

impl<T: Clone> PerState<T> {
    fn expand(self, n: usize) -> Vec<T> {
        match self {
            PerState::All(x) => vec![x; n],
            PerState::Each(v) => v,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum StopFile {
    Fixed(u32),
    StateDependent(Vec<u32>),
    Hitting(Vec<usize>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    #[serde(rename = "V")]
    v: PerState<f64>,
    f: PerState<f64>,
    delta: PerState<f64>,
    #[serde(rename = "C")]
    c: Vec<usize>,
    b: f64,
    stop: StopFile,
    horizon: Option<usize>,
}

/// A parsed spec file: the drift spec plus the enumeration horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecInput {
    pub spec: DriftSpec,
    pub horizon: usize,
}

/// Parses a spec for an `n`-state chain; scalars in `V`, `f`, `delta` are broadcast.
pub fn parse_spec(text: &str, n: usize) -> Result<SpecInput> {
    let raw: SpecFile = toml::from_str(text).map_err(|e| Error::Input(format!("spec file: {e}")))?;
    let stop = match raw.stop {
        StopFile::Fixed(k) => StopRule::Fixed(k),
        StopFile::StateDependent(ns) => StopRule::StateDependent(ns),
        StopFile::Hitting(a) => StopRule::Hitting(a),
    };
    let spec = DriftSpec {
        v: raw.v.expand(n),
        f: raw.f.expand(n),
        delta: raw.delta.expand(n),
        c: raw.c,
        b: raw.b,
        stop,
    };
    spec.validate(n)?;
    Ok(SpecInput {
        spec,
        horizon: raw.horizon.unwrap_or(DEFAULT_HORIZON),
    })
}

pub fn read_spec(path: &Path, n: usize) -> Result<SpecInput> {
    parse_spec(&std::fs::read_to_string(path)?, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_with_comments() {
        let c = parse_chain("# two states\n0.8 0.2  # row 0\n\n0.3\t0.7\n").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.prob(1, 0), 0.3);
    }

    #[test]
    fn bad_chains() {
        assert!(parse_chain("").is_err());
        assert!(parse_chain("0.5 0.5\n1.0\n").is_err());
        assert!(parse_chain("0.5 x\n0.5 0.5\n").is_err());
        assert!(parse_chain("0.5 0.6\n0.5 0.5\n").is_err());
    }

    #[test]
    fn spec_roundtrip() {
        let s = parse_spec(
            "V = [1.0, 2.0]\nf = 1.0\ndelta = [1.0, 2.0]\nC = [0]\nb = 2.5\n[stop]\nhitting = [0]\n",
            2,
        )
        .unwrap();
        assert_eq!(s.spec.f, vec![1.0, 1.0]);
        assert_eq!(s.spec.stop, StopRule::Hitting(vec![0]));
        assert_eq!(s.horizon, DEFAULT_HORIZON);

        let s = parse_spec(
            "V = 1.0\nf = 1.0\ndelta = 1.0\nC = [0, 1]\nb = 1\nhorizon = 2\n[stop]\nstate_dependent = [1, 2]\n",
            2,
        )
        .unwrap();
        assert_eq!(s.spec.stop, StopRule::StateDependent(vec![1, 2]));
        assert_eq!(s.horizon, 2);
    }

    #[test]
    fn spec_errors() {
        assert!(parse_spec("V = 1.0\nf = 1.0\ndelta = 1.0\nC = [0]\nb = 1\nextra = 3\n[stop]\nfixed = 1\n", 2).is_err());
        assert!(parse_spec("V = 1.0\nf = 0.5\ndelta = 1.0\nC = [0]\nb = 1\n[stop]\nfixed = 1\n", 2).is_err());
        assert!(parse_spec("V = 1.0\nf = 1.0\ndelta = 1.0\nC = [0]\nb = 1\n[stop]\nsometimes = 1\n", 2).is_err());
    }
}
