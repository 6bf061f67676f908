//! Seeded synthetic datasets for tests and demos.

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::RawTable;
use crate::error::Result;
use crate::split::rng;

/// Two isotropic unit-variance Gaussians in `dim` dimensions whose means
/// are `separation` apart along the first axis. Rows `0..n0` are class 0,
/// the remaining `n1` rows class 1.
pub fn two_gaussians(n0: usize, n1: usize, dim: usize, separation: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = rng(seed);
    let n = n0 + n1;
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= n0)).collect();
    let mut x = Array2::from_shape_fn((n, dim), |_| StandardNormal.sample(&mut rng));
    for i in n0..n {
        x[[i, 0]] += separation;
    }
    (x, labels)
}

/// [`two_gaussians`] as a table with columns `x0..`, `label`.
pub fn two_gaussians_table(n0: usize, n1: usize, dim: usize, separation: f64, seed: u64) -> Result<RawTable> {
    let (x, y) = two_gaussians(n0, n1, dim, separation, seed);
    Ok(RawTable::from_numeric(x.view(), &y)?.with_name(format!("two-gaussians-{seed}")))
}
