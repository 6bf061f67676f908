//! Adaptive neighbor counts and graph construction.
//!
//! Each sample gets its own neighbor count
//!
//! ```text
//! k_i = clamp(round((1 - eta) * kappa + eta * f_i + eps_i), 1, n - 1)
//! ```
//!
//! with `f` the scaled fitness kernel and `eps_i ~ N(0, 1/9)` clamped to
//! `[-1, 1]`. Row `i` of the selection matrix `W` marks the `k_i` nearest
//! neighbors of `i`; the adjacency is `max(W, W^T)` (plain), `min(W, W^T)`
//! (mutual) or `W` itself (directed).

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::GraphClassifier;
use crate::dataset::Dataset;
use crate::density::{build_index, DistanceIndex, Metric};
use crate::error::{Error, Result};
use crate::fitness::{rescale, FitnessKernel, FitnessState};
use crate::matrix::BinaryMatrix;
use crate::split::{derive_seed, rng, stratified_holdout};

/// Standard deviation of the per-sample perturbation; 3 sigma = 1.
pub const NOISE_SIGMA: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KVector {
    values: Vec<usize>,
    eta: f64,
    kappa: usize,
    seed: u64,
    sigma: f64,
    noise: bool,
}

impl KVector {
    /// The unified-k baseline: every node gets `kappa`.
    pub fn uniform(n: usize, kappa: usize) -> Result<Self> {
        if kappa == 0 || kappa >= n {
            return Err(Error::KappaOutOfRange { kappa, n });
        }
        Ok(KVector {
            values: vec![kappa; n],
            eta: 0.0,
            kappa,
            seed: 0,
            sigma: 0.0,
            noise: false,
        })
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn noise(&self) -> bool {
        self.noise
    }
}

/// `(1 - eta) * kappa + eta * f_i`, before noise and rounding.
pub fn blend_k(f: &[f64], kappa: f64, eta: f64) -> Vec<f64> {
    f.iter().map(|&v| (1.0 - eta) * kappa + eta * v).collect()
}

/// Perturbations drawn from `N(0, sigma^2)` and clamped to `[-1, 1]`.
pub fn draw_noise(n: usize, seed: u64) -> Vec<f64> {
    let normal = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    let mut rng = rng(seed);
    (0..n).map(|_| normal.sample(&mut rng).clamp(-1.0, 1.0)).collect()
}

fn round_k(raw: f64, n: usize) -> usize {
    (raw.round_ties_even().max(1.0) as usize).min(n - 1)
}

fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::config(format!("eta must lie in [0, 1], got {eta}")))
    }
}

/// Per-node neighbor counts from a scaled fitness kernel.
pub fn compute_k(f: &FitnessKernel, kappa: usize, eta: f64, seed: u64, noise: bool) -> Result<KVector> {
    f.require(FitnessState::Scaled)?;
    let n = f.len();
    if kappa == 0 || kappa >= n {
        return Err(Error::KappaOutOfRange { kappa, n });
    }
    check_eta(eta)?;
    let mut raw = blend_k(f.values(), kappa as f64, eta);
    if noise {
        for (r, e) in raw.iter_mut().zip(draw_noise(n, seed)) {
            *r += e;
        }
    }
    Ok(KVector {
        values: raw.into_iter().map(|r| round_k(r, n)).collect(),
        eta,
        kappa,
        seed,
        sigma: if noise { NOISE_SIGMA } else { 0.0 },
        noise,
    })
}

/// `W[i][j] = 1` iff `j` is among the `k_i` nearest neighbors of `i`.
pub fn build_w(index: &DistanceIndex, k: &KVector) -> Result<BinaryMatrix> {
    let n = index.n();
    if k.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: k.len(),
        });
    }
    let mut w = BinaryMatrix::zeros(n);
    for (i, &ki) in k.values().iter().enumerate() {
        for &j in index.knn_of(i, ki)? {
            w.set(i, j as usize, true);
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphVariant {
    #[default]
    Plain,
    Mutual,
    Directed,
}

impl GraphVariant {
    pub fn is_symmetric(self) -> bool {
        !matches!(self, GraphVariant::Directed)
    }
}

impl fmt::Display for GraphVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphVariant::Plain => "plain",
            GraphVariant::Mutual => "mutual",
            GraphVariant::Directed => "directed",
        })
    }
}

impl FromStr for GraphVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(GraphVariant::Plain),
            "mutual" => Ok(GraphVariant::Mutual),
            "directed" => Ok(GraphVariant::Directed),
            other => Err(Error::config(format!("unknown graph variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    pub w: BinaryMatrix,
    pub adjacency: BinaryMatrix,
    pub variant: GraphVariant,
    pub node_labels: Vec<usize>,
}

impl NeighborGraph {
    pub fn n(&self) -> usize {
        self.adjacency.n()
    }

    /// Adjacency-row neighbors of node `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.row(i)
    }
}

/// Realizes the adjacency for `variant` from a selection matrix.
pub fn realize(w: BinaryMatrix, variant: GraphVariant, labels: Vec<usize>) -> Result<NeighborGraph> {
    if labels.len() != w.n() {
        return Err(Error::LengthMismatch {
            expected: w.n(),
            found: labels.len(),
        });
    }
    if !w.has_zero_diagonal() {
        return Err(Error::config("selection matrix has a self loop"));
    }
    let adjacency = match variant {
        GraphVariant::Plain => w.or(&w.transpose()),
        GraphVariant::Mutual => w.and(&w.transpose()),
        GraphVariant::Directed => w.clone(),
    };
    Ok(NeighborGraph {
        w,
        adjacency,
        variant,
        node_labels: labels,
    })
}

/// Builds the graph for `dataset` with neighbor counts `k`.
pub fn build_graph(index: &DistanceIndex, k: &KVector, variant: GraphVariant, labels: &[usize]) -> Result<NeighborGraph> {
    realize(build_w(index, k)?, variant, labels.to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaEquivalence {
    pub eta2: f64,
    pub max_abs_diff: f64,
    /// Noise-free blended K under the first scaling.
    pub k1: Vec<f64>,
    /// Noise-free blended K under the second scaling with `eta2`.
    pub k2: Vec<f64>,
}

fn check_symmetric_range(range: (f64, f64), kappa: f64) -> Result<()> {
    let (min, max) = range;
    if min == max || !min.is_finite() || !max.is_finite() {
        return Err(Error::InvalidRange {
            min,
            max,
            reason: "degenerate",
        });
    }
    if ((min + max) / 2.0 - kappa).abs() > 1e-9 * kappa.abs().max(1.0) {
        return Err(Error::InvalidRange {
            min,
            max,
            reason: "not centred on kappa",
        });
    }
    Ok(())
}

/// Two kappa-centred scalings of the same raw kernel give identical K once
/// eta is rescaled by the ratio of the range widths.
pub fn eta_equivalence_check(
    f_raw: &[f64],
    kappa: usize,
    range1: (f64, f64),
    range2: (f64, f64),
    eta1: f64,
) -> Result<EtaEquivalence> {
    let kappa = kappa as f64;
    check_symmetric_range(range1, kappa)?;
    check_symmetric_range(range2, kappa)?;
    let alpha = (range1.1 - range1.0) / (range2.1 - range2.0);
    let eta2 = alpha * eta1;
    let k1 = blend_k(&rescale(f_raw, range1.0, range1.1), kappa, eta1);
    let k2 = blend_k(&rescale(f_raw, range2.0, range2.1), kappa, eta2);
    let max_abs_diff = k1.iter().zip(&k2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(EtaEquivalence {
        eta2,
        max_abs_diff,
        k1,
        k2,
    })
}

/// Rounds a real-valued K vector the same way [`compute_k`] does.
pub fn round_k_vector(raw: &[f64], kappa: usize, eta: f64) -> Result<KVector> {
    let n = raw.len();
    if kappa == 0 || kappa >= n {
        return Err(Error::KappaOutOfRange { kappa, n });
    }
    Ok(KVector {
        values: raw.iter().map(|&r| round_k(r, n)).collect(),
        eta,
        kappa,
        seed: 0,
        sigma: 0.0,
        noise: false,
    })
}

/// Knobs for the inner eta search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    pub variant: GraphVariant,
    pub noise: bool,
    pub repeats: usize,
    pub holdout: f64,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions {
            variant: GraphVariant::Plain,
            noise: true,
            repeats: 3,
            holdout: 0.2,
        }
    }
}

/// The inner eta grid `0.0, 0.1, ..., 1.0`.
pub fn default_eta_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Picks eta by held-out majority-vote accuracy on stratified splits of
/// `train`. Returns `(eta, mean accuracy)`; ties go to the smaller eta.
pub fn select_eta(
    train: &Dataset,
    f: &FitnessKernel,
    kappa: usize,
    grid: &[f64],
    seed: u64,
    options: &SelectOptions,
) -> Result<(f64, f64)> {
    f.require(FitnessState::Scaled)?;
    if grid.is_empty() {
        return Err(Error::config("eta grid is empty"));
    }
    for &eta in grid {
        check_eta(eta)?;
    }
    if f.len() != train.n() {
        return Err(Error::LengthMismatch {
            expected: train.n(),
            found: f.len(),
        });
    }
    if options.repeats == 0 {
        return Err(Error::config("at least one inner repeat is required"));
    }
    let present: Vec<usize> = (0..train.m()).filter(|&c| train.class_counts()[c] > 0).collect();

    struct Split {
        index: DistanceIndex,
        train_labels: Vec<usize>,
        fitness: FitnessKernel,
        test: Dataset,
        noise_seed: u64,
    }
    let mut splits = Vec::new();
    for r in 0..options.repeats {
        let split_seed = derive_seed(seed, &[r as u64]);
        let (inner_train, inner_test) = stratified_holdout(train.labels(), options.holdout, split_seed);
        let sub = train.subset(&inner_train);
        let missing = present.iter().any(|&c| sub.class_counts()[c] == 0);
        if inner_test.is_empty() || missing || kappa >= sub.n() {
            log::warn!("inner split {r} is degenerate (class absent or too small); skipping");
            continue;
        }
        splits.push(Split {
            index: build_index(sub.features(), Metric::Euclidean)?,
            train_labels: sub.labels().to_vec(),
            fitness: f.subset(&inner_train),
            test: train.subset(&inner_test),
            noise_seed: derive_seed(split_seed, &[u64::MAX]),
        });
    }
    if splits.is_empty() {
        return Err(Error::NoUsableSplit);
    }

    let scores = grid
        .par_iter()
        .map(|&eta| {
            let mut total = 0.0;
            for s in &splits {
                let k = compute_k(&s.fitness, kappa, eta, s.noise_seed, options.noise)?;
                let graph = build_graph(&s.index, &k, options.variant, &s.train_labels)?;
                let clf = GraphClassifier::new(graph, s.index.clone(), kappa)?;
                let pred = clf.predict_batch(s.test.features())?;
                let hits = pred.iter().zip(s.test.labels()).filter(|(p, y)| p == y).count();
                total += hits as f64 / s.test.n() as f64;
            }
            Ok(total / splits.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut best = (grid[0], scores[0]);
    for (&eta, &score) in grid.iter().zip(&scores).skip(1) {
        if score > best.1 || (score == best.1 && eta < best.0) {
            best = (eta, score);
        }
    }
    Ok(best)
}

/// Writes `src \t dst \t variant` lines. Symmetric variants list each
/// undirected edge once with `src < dst`.
pub fn write_edge_list(graph: &NeighborGraph, mut out: impl Write) -> std::io::Result<()> {
    for (i, j) in graph.adjacency.edges() {
        if graph.variant.is_symmetric() && j < i {
            continue;
        }
        writeln!(out, "{i}\t{j}\t{}", graph.variant)?;
    }
    Ok(())
}

/// Reads an edge list back into an `n`-node adjacency matrix.
pub fn read_edge_list(input: impl BufRead, n: usize) -> Result<(BinaryMatrix, Option<GraphVariant>)> {
    let mut adjacency = BinaryMatrix::zeros(n);
    let mut variant = None;
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::config(format!("edge list line {}: {e}", lineno + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::config(format!("edge list line {}: expected `src\\tdst\\tvariant`", lineno + 1));
        let mut parts = line.split('\t');
        let (Some(a), Some(b), Some(v), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let i: usize = a.trim().parse().map_err(|_| bad())?;
        let j: usize = b.trim().parse().map_err(|_| bad())?;
        let v: GraphVariant = v.trim().parse()?;
        if i >= n || j >= n || i == j {
            return Err(bad());
        }
        if variant.is_some_and(|prev| prev != v) {
            return Err(Error::config("edge list mixes graph variants"));
        }
        variant = Some(v);
        adjacency.set(i, j, true);
        if v.is_symmetric() {
            adjacency.set(j, i, true);
        }
    }
    Ok((adjacency, variant))
}

/// JSON sidecar written next to an exported edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub schema_version: u32,
    pub n: usize,
    pub kappa: usize,
    pub eta: f64,
    pub seed: u64,
    pub noise: bool,
    pub variant: GraphVariant,
    /// Per-node neighbor count.
    pub k: Vec<usize>,
}

impl GraphExport {
    pub fn new(graph: &NeighborGraph, k: &KVector) -> Self {
        GraphExport {
            schema_version: 1,
            n: graph.n(),
            kappa: k.kappa(),
            eta: k.eta(),
            seed: k.seed(),
            noise: k.noise(),
            variant: graph.variant,
            k: k.values().to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::scale_fitness;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scaled(values: Vec<f64>, kappa: usize) -> FitnessKernel {
        scale_fitness(&FitnessKernel::initialized(values), kappa)
    }

    fn random_points(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn eta_zero_gives_kappa() {
        let f = scaled((0..30).map(|i| (i as f64).sin()).collect(), 10);
        let k = compute_k(&f, 10, 0.0, 1, false).unwrap();
        assert!(k.values().iter().all(|&v| v == 10));
    }

    #[test]
    fn eta_one_gives_rounded_kernel() {
        let raw: Vec<f64> = (0..=20).map(|i| i as f64).collect();
        let f = scaled(raw, 10);
        let k = compute_k(&f, 10, 1.0, 1, false).unwrap();
        let want: Vec<usize> = f.values().iter().map(|v| v.round_ties_even() as usize).collect();
        assert_eq!(k.values(), &want[..]);
        assert_eq!(*k.values().iter().min().unwrap(), 5);
        assert_eq!(*k.values().iter().max().unwrap(), 15);
    }

    #[test]
    fn half_blend() {
        // raw 9 of [0, 10] lands on 14 in [5, 15]; 0.5 * 10 + 0.5 * 14 = 12
        let mut raw = vec![0.0, 9.0, 10.0];
        raw.extend(std::iter::repeat_n(5.0, 20));
        let f = scaled(raw, 10);
        assert!((f.values()[1] - 14.0).abs() < 1e-12);
        let k = compute_k(&f, 10, 0.5, 0, false).unwrap();
        assert_eq!(k.values()[1], 12);
    }

    #[test]
    fn kappa_must_be_below_n() {
        let f = scaled(vec![0.0, 1.0, 2.0], 3);
        assert!(matches!(compute_k(&f, 3, 0.5, 0, false), Err(Error::KappaOutOfRange { .. })));
    }

    #[test]
    fn compute_k_requires_scaled_kernel() {
        let f = FitnessKernel::initialized(vec![1.0; 20]);
        assert!(matches!(compute_k(&f, 5, 0.5, 0, false), Err(Error::WrongFitnessState { .. })));
    }

    #[test]
    fn noise_is_seeded_and_bounded() {
        let f = scaled((0..200).map(|i| i as f64).collect(), 10);
        let a = compute_k(&f, 10, 0.3, 7, true).unwrap();
        let b = compute_k(&f, 10, 0.3, 7, true).unwrap();
        assert_eq!(a, b);
        let quiet = compute_k(&f, 10, 0.3, 7, false).unwrap();
        assert_ne!(a.values(), quiet.values());
        for (x, y) in a.values().iter().zip(quiet.values()) {
            assert!(x.abs_diff(*y) <= 1);
        }
        assert!(draw_noise(10_000, 3).iter().all(|e| e.abs() <= 1.0));
    }

    #[test]
    fn full_graph_when_k_is_n_minus_one() {
        let x = random_points(6, 2, 1);
        let idx = build_index(x.view(), Metric::Euclidean).unwrap();
        let k = round_k_vector(&[5.0; 6], 5, 0.0).unwrap();
        let w = build_w(&idx, &k).unwrap();
        assert_eq!(w, BinaryMatrix::from_fn(6, |i, j| i != j));
    }

    #[test]
    fn line_with_unit_k() {
        let x = array![[0.0], [1.0], [3.0]];
        let idx = build_index(x.view(), Metric::Euclidean).unwrap();
        let k = round_k_vector(&[1.0; 3], 1, 0.0).unwrap();
        let w = build_w(&idx, &k).unwrap();
        assert_eq!(w.row(1).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn heterogeneous_w_matches_brute_force() {
        let x = random_points(20, 3, 4);
        let idx = build_index(x.view(), Metric::Euclidean).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let raw: Vec<f64> = (0..20).map(|_| rng.random_range(1..19) as f64).collect();
        let k = round_k_vector(&raw, 5, 0.0).unwrap();
        let w = build_w(&idx, &k).unwrap();
        for i in 0..20 {
            let mut d: Vec<(f64, usize)> = (0..20)
                .filter(|&j| j != i)
                .map(|j| ((&x.row(i) - &x.row(j)).mapv(|v| v * v).sum().sqrt(), j))
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut want: Vec<usize> = d[..k.values()[i]].iter().map(|p| p.1).collect();
            want.sort();
            assert_eq!(w.row(i).collect::<Vec<_>>(), want);
        }
    }

    #[test]
    fn symmetric_w_realizes_identically() {
        let w = BinaryMatrix::from_fn(5, |i, j| i != j && (i + j) % 2 == 1);
        for v in [GraphVariant::Plain, GraphVariant::Mutual, GraphVariant::Directed] {
            assert_eq!(realize(w.clone(), v, vec![0; 5]).unwrap().adjacency, w);
        }
    }

    #[test]
    fn one_way_edge() {
        let mut w = BinaryMatrix::zeros(3);
        w.set(0, 1, true);
        let plain = realize(w.clone(), GraphVariant::Plain, vec![0; 3]).unwrap();
        let mutual = realize(w.clone(), GraphVariant::Mutual, vec![0; 3]).unwrap();
        let directed = realize(w, GraphVariant::Directed, vec![0; 3]).unwrap();
        assert!(plain.adjacency.get(0, 1) && plain.adjacency.get(1, 0));
        assert!(!mutual.adjacency.get(0, 1) && !mutual.adjacency.get(1, 0));
        assert!(directed.adjacency.get(0, 1) && !directed.adjacency.get(1, 0));
    }

    #[test]
    fn equivalence_examples() {
        let f: Vec<f64> = vec![0.3, -1.2, 4.0, 2.2, 0.0];
        let same = eta_equivalence_check(&f, 10, (5.0, 15.0), (5.0, 15.0), 0.7).unwrap();
        assert_eq!(same.eta2, 0.7);
        assert_eq!(same.max_abs_diff, 0.0);
        let wide = eta_equivalence_check(&f, 10, (5.0, 15.0), (0.0, 20.0), 0.4).unwrap();
        assert!((wide.eta2 - 0.2).abs() < 1e-15);
        assert!(wide.max_abs_diff < 1e-9);
        assert!(matches!(
            eta_equivalence_check(&f, 10, (5.0, 15.0), (0.0, 15.0), 0.4),
            Err(Error::InvalidRange { .. })
        ));
        assert!(matches!(
            eta_equivalence_check(&f, 10, (10.0, 10.0), (0.0, 20.0), 0.4),
            Err(Error::InvalidRange { .. })
        ));
    }

    #[test]
    fn edge_list_round_trip() {
        let x = random_points(15, 2, 2);
        let idx = build_index(x.view(), Metric::Euclidean).unwrap();
        let k = round_k_vector(&[3.0; 15], 3, 0.0).unwrap();
        for v in [GraphVariant::Plain, GraphVariant::Mutual, GraphVariant::Directed] {
            let g = build_graph(&idx, &k, v, &[0; 15]).unwrap();
            let mut buf = Vec::new();
            write_edge_list(&g, &mut buf).unwrap();
            let (adj, variant) = read_edge_list(buf.as_slice(), 15).unwrap();
            assert_eq!(adj, g.adjacency);
            assert_eq!(variant, Some(v));
        }
        assert!(read_edge_list("0\t1\n".as_bytes(), 3).is_err());
        assert!(read_edge_list("0\t9\tplain\n".as_bytes(), 3).is_err());
    }

    #[test]
    fn single_candidate_grid() {
        let x = random_points(60, 2, 5);
        let labels: Vec<usize> = (0..60).map(|i| usize::from(x[[i, 0]] > 0.0)).collect();
        let ds = Dataset::from_parts(x, labels).unwrap();
        let f = scaled((0..60).map(|i| i as f64).collect(), 5);
        let opts = SelectOptions {
            noise: false,
            ..Default::default()
        };
        let (eta, score) = select_eta(&ds, &f, 5, &[0.0], 3, &opts).unwrap();
        assert_eq!(eta, 0.0);
        assert!((0.0..=1.0).contains(&score));
        assert!(select_eta(&ds, &f, 5, &[], 3, &opts).is_err());
    }

    proptest! {
        #[test]
        fn graph_invariants(seed in 0u64..10_000, n in 4usize..30) {
            let x = random_points(n, 2, seed);
            let idx = build_index(x.view(), Metric::Euclidean).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(1..n) as f64).collect();
            let k = round_k_vector(&raw, 1, 0.0).unwrap();
            let w = build_w(&idx, &k).unwrap();
            let plain = realize(w.clone(), GraphVariant::Plain, vec![0; n]).unwrap().adjacency;
            let mutual = realize(w.clone(), GraphVariant::Mutual, vec![0; n]).unwrap().adjacency;
            let directed = realize(w.clone(), GraphVariant::Directed, vec![0; n]).unwrap().adjacency;
            for i in 0..n {
                prop_assert_eq!(w.row_sum(i), k.values()[i]);
                prop_assert_eq!(directed.row_sum(i), k.values()[i]);
            }
            prop_assert!(w.has_zero_diagonal());
            prop_assert!(plain.is_symmetric() && mutual.is_symmetric());
            prop_assert!(mutual.is_subset_of(&plain));
            prop_assert!(plain.is_subset_of(&directed.or(&directed.transpose())));
        }
    }
}
