//! Brute-force neighbor orderings and Gaussian kernel density estimates.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest density value used before logs and divisions.
pub const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
}

impl Metric {
    /// Monotone surrogate used for ranking (squared distance for Euclidean).
    #[inline]
    fn rank_distance(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        match self {
            Metric::Euclidean => squared_euclidean(a, b),
        }
    }
}

#[inline]
pub fn squared_euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn by_distance_then_index(a: &(f64, u32), b: &(f64, u32)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Reference points with every point's neighbors sorted by distance.
///
/// Ties are ordered by ascending index so results never depend on the
/// sort implementation or on thread scheduling.
#[derive(Debug, Clone)]
pub struct DistanceIndex {
    reference: Array2<f64>,
    metric: Metric,
    // Row i holds the n-1 other indices, nearest first.
    order: Vec<u32>,
}

pub fn build_index(features: ArrayView2<'_, f64>, metric: Metric) -> Result<DistanceIndex> {
    let n = features.nrows();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: n });
    }
    if n > u32::MAX as usize {
        return Err(Error::config("too many reference points"));
    }
    if let Some(((row, col), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { row, col });
    }
    let rows: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = features.row(i);
            let mut d: Vec<(f64, u32)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (metric.rank_distance(xi, features.row(j)), j as u32))
                .collect();
            d.sort_unstable_by(by_distance_then_index);
            d.into_iter().map(|(_, j)| j).collect()
        })
        .collect();
    Ok(DistanceIndex {
        reference: features.to_owned(),
        metric,
        order: rows.concat(),
    })
}

impl DistanceIndex {
    pub fn n(&self) -> usize {
        self.reference.nrows()
    }

    pub fn d(&self) -> usize {
        self.reference.ncols()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn reference(&self) -> ArrayView2<'_, f64> {
        self.reference.view()
    }

    /// All other points ordered nearest first.
    pub fn ordering(&self, i: usize) -> &[u32] {
        let w = self.n() - 1;
        &self.order[i * w..(i + 1) * w]
    }

    /// The `k` nearest neighbors of reference point `i`, excluding `i`.
    pub fn knn_of(&self, i: usize, k: usize) -> Result<&[u32]> {
        if i >= self.n() {
            return Err(Error::config(format!("sample {i} outside 0..{}", self.n())));
        }
        if k == 0 || k > self.n() - 1 {
            return Err(Error::KOutOfRange { k, max: self.n() - 1 });
        }
        Ok(&self.ordering(i)[..k])
    }

    fn check_query(&self, x: ArrayView1<'_, f64>) -> Result<()> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: x.len(),
            });
        }
        if let Some(col) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col });
        }
        Ok(())
    }

    /// Closest reference point to `x`; ties go to the smallest index.
    pub fn query_nearest(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        self.check_query(x)?;
        let mut best = (f64::INFINITY, 0usize);
        for (j, r) in self.reference.rows().into_iter().enumerate() {
            let d = self.metric.rank_distance(x, r);
            if d < best.0 {
                best = (d, j);
            }
        }
        Ok(best.1)
    }

    /// The `k` reference points closest to an arbitrary query.
    pub fn query_knn(&self, x: ArrayView1<'_, f64>, k: usize) -> Result<Vec<usize>> {
        self.check_query(x)?;
        if k == 0 || k > self.n() {
            return Err(Error::KOutOfRange { k, max: self.n() });
        }
        let mut d: Vec<(f64, u32)> = self
            .reference
            .rows()
            .into_iter()
            .enumerate()
            .map(|(j, r)| (self.metric.rank_distance(x, r), j as u32))
            .collect();
        d.sort_unstable_by(by_distance_then_index);
        Ok(d[..k].iter().map(|&(_, j)| j as usize).collect())
    }
}

/// Per-sample Gaussian kernel density values.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub values: Vec<f64>,
    pub bandwidth: f64,
    pub normalized: bool,
}

impl DensityEstimate {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_bandwidth(bandwidth: f64) -> Result<()> {
    if bandwidth > 0.0 && bandwidth.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("bandwidth must be positive, got {bandwidth}")))
    }
}

fn finish(mut values: Vec<f64>, bandwidth: f64, normalize: bool) -> DensityEstimate {
    if normalize {
        let total: f64 = values.iter().sum();
        values.iter_mut().for_each(|v| *v /= total);
    }
    values.iter_mut().for_each(|v| *v = v.max(DENSITY_FLOOR));
    DensityEstimate {
        values,
        bandwidth,
        normalized: normalize,
    }
}

/// `values[i] = sum_j exp(-|p_i - p_j|^2 / (2 h^2))`, optionally scaled to
/// sum to one. Rows of `points` are samples.
pub fn kde(points: ArrayView2<'_, f64>, bandwidth: f64, normalize: bool) -> Result<DensityEstimate> {
    check_bandwidth(bandwidth)?;
    let n = points.nrows();
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pi = points.row(i);
            (0..n)
                .map(|j| (-squared_euclidean(pi, points.row(j)) * inv).exp())
                .sum()
        })
        .collect();
    Ok(finish(values, bandwidth, normalize))
}

/// One-dimensional specialisation of [`kde`].
pub fn kde_1d(points: &[f64], bandwidth: f64, normalize: bool) -> Result<DensityEstimate> {
    check_bandwidth(bandwidth)?;
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let n = points.len();
    let mut values = vec![1.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let diff = points[i] - points[j];
            let v = (-diff * diff * inv).exp();
            values[i] += v;
            values[j] += v;
        }
    }
    Ok(finish(values, bandwidth, normalize))
}
