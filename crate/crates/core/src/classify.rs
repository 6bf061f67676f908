//! Nearest-node majority vote over a neighbor graph.

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::density::DistanceIndex;
use crate::error::{Error, Result};
use crate::graph::NeighborGraph;

/// Most frequent label; ties go to the smallest class code.
pub fn majority_vote(labels: impl IntoIterator<Item = usize>, n_classes: usize) -> Option<usize> {
    let mut counts = vec![0usize; n_classes];
    let mut any = false;
    for y in labels {
        counts[y] += 1;
        any = true;
    }
    if !any {
        return None;
    }
    // max_by_key keeps the last maximum; scan in reverse to keep the first.
    counts
        .iter()
        .enumerate()
        .rev()
        .max_by_key(|&(_, c)| *c)
        .map(|(y, _)| y)
}

#[derive(Debug, Clone)]
pub struct GraphClassifier {
    graph: NeighborGraph,
    index: DistanceIndex,
    train_labels: Vec<usize>,
    n_classes: usize,
    fallback_k: usize,
}

impl GraphClassifier {
    /// `fallback_k` neighbors vote for test points whose closest node has
    /// no graph neighbors (possible in the mutual variant).
    pub fn new(graph: NeighborGraph, index: DistanceIndex, fallback_k: usize) -> Result<Self> {
        if graph.n() != index.n() {
            return Err(Error::LengthMismatch {
                expected: index.n(),
                found: graph.n(),
            });
        }
        if fallback_k == 0 {
            return Err(Error::config("fallback_k must be positive"));
        }
        let train_labels = graph.node_labels.clone();
        let n_classes = train_labels.iter().max().map_or(0, |&y| y + 1);
        Ok(GraphClassifier {
            graph,
            index,
            train_labels,
            n_classes,
            fallback_k,
        })
    }

    pub fn graph(&self) -> &NeighborGraph {
        &self.graph
    }

    pub fn index(&self) -> &DistanceIndex {
        &self.index
    }

    pub fn fallback_k(&self) -> usize {
        self.fallback_k
    }

    /// Label voted by the graph neighbors of training node `v`.
    pub fn vote_at(&self, v: usize) -> Result<usize> {
        let labels = &self.train_labels;
        if let Some(y) = majority_vote(self.graph.neighbors(v).map(|j| labels[j]), self.n_classes) {
            return Ok(y);
        }
        let k = self.fallback_k.min(self.index.n() - 1);
        let knn = self.index.knn_of(v, k)?;
        Ok(majority_vote(knn.iter().map(|&j| labels[j as usize]), self.n_classes).expect("k >= 1"))
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        let v = self.index.query_nearest(x)?;
        self.vote_at(v)
    }

    pub fn predict_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        if xs.ncols() != self.index.d() && xs.nrows() > 0 {
            return Err(Error::DimensionMismatch {
                expected: self.index.d(),
                found: xs.ncols(),
            });
        }
        (0..xs.nrows()).into_par_iter().map(|t| self.predict(xs.row(t))).collect()
    }
}
