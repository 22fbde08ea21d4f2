use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::plant::RandomStream;

pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Row-stochastic transition matrix on states `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    p: DMatrix<f64>,
}

impl FiniteChain {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        if p.nrows() == 0 || p.nrows() != p.ncols() {
            return Err(Error::Input(format!(
                "transition matrix must be square and non-empty, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        for (i, row) in p.row_iter().enumerate() {
            if let Some(j) = row.iter().position(|&v| !(v.is_finite() && v >= 0.0)) {
                return Err(Error::Input(format!("entry ({i},{j}) is negative or not finite")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Input(format!("row {i} sums to {s}, not 1")));
            }
        }
        Ok(Self { p })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Input("every row must have one entry per state".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn len(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    #[inline]
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.p[(from, to)]
    }

    /// Successors with positive probability.
    pub fn successors(&self, from: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len()).filter_map(move |j| {
            let v = self.p[(from, j)];
            (v > 0.0).then_some((j, v))
        })
    }

    /// `(P g)(i) = Σ_j P(i, j) g(j)`.
    pub fn apply(&self, g: &DVector<f64>) -> DVector<f64> {
        &self.p * g
    }

    /// Strongly connected components of the positive-entry digraph, each sorted.
    pub fn communicating_classes(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut graph = DiGraph::<(), ()>::with_capacity(n, n * n);
        let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
        for i in 0..n {
            for (j, _) in self.successors(i) {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
        let mut classes: Vec<Vec<usize>> = tarjan_scc(&graph)
            .into_iter()
            .map(|c| {
                let mut v: Vec<usize> = c.into_iter().map(|ix| ix.index()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        classes.sort();
        classes
    }

    pub fn is_irreducible(&self) -> bool {
        self.communicating_classes().len() == 1
    }

    /// States that can reach `target` in one or more steps.
    pub fn reaches_in_one_or_more(&self, target: &[bool]) -> Vec<bool> {
        let n = self.len();
        let mut reach = vec![false; n];
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..n {
                if !reach[i] && self.successors(i).any(|(j, _)| target[j] || reach[j]) {
                    reach[i] = true;
                    changed = true;
                }
            }
        }
        reach
    }

    /// One transition by inversion of the row CDF.
    pub fn sample_next(&self, from: usize, stream: &mut RandomStream) -> usize {
        let u = stream.uniform();
        let mut acc = 0.0;
        let mut last = from;
        for (j, v) in self.successors(from) {
            acc += v;
            last = j;
            if u < acc {
                return j;
            }
        }
        last
    }
}

/// The unique `π` with `πP = π`, `Σπ = 1`, from a direct solve of
/// `(Pᵀ − I)π = 0` with one equation replaced by normalization.
pub fn stationary_dist(chain: &FiniteChain) -> Result<DVector<f64>> {
    let classes = chain.communicating_classes();
    if classes.len() != 1 {
        return Err(Error::Reducible { classes });
    }
    let n = chain.len();
    let mut a = chain.matrix().transpose() - DMatrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut pi = lu.solve(&rhs).ok_or(Error::Singular("stationary distribution"))?;
    // one round of iterative refinement
    let r = &rhs - &a * &pi;
    if let Some(corr) = lu.solve(&r) {
        pi += corr;
    }
    Ok(pi)
}
