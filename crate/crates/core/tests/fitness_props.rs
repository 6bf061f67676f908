use ndarray::Array2;
use panng::dataset::{preprocess, Normalization, PreprocessConfig, RawTable};
use panng::density::kde;
use panng::fitness::{descend, fitness_loss, scale_fitness, FitnessKernel, LearnConfig};
use panng::graph::compute_k;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn symmetric_line(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, 1), |(i, _)| -3.0 + 6.0 * i as f64 / (n - 1) as f64)
}

fn tight() -> LearnConfig {
    LearnConfig {
        threshold: 1e-9,
        max_iterations: 300,
        ..LearnConfig::default()
    }
}

#[test]
fn total_neighbor_count_is_not_pinned() {
    let (x, _) = panng::synthetic::two_gaussians(40, 25, 2, 1.5, 9);
    let px = kde(x.view(), 0.5, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sums: Vec<usize> = (0..6)
        .map(|_| {
            let start: Vec<f64> = (0..65).map(|_| rng.random_range(0.0..2.0)).collect();
            let learned = descend(FitnessKernel::initialized(start), &px, &tight()).unwrap();
            let k = compute_k(&scale_fitness(&learned, 10), 10, 1.0, 0, false).unwrap();
            k.values().iter().sum()
        })
        .collect();
    assert!(sums.iter().any(|&s| s != sums[0]), "{sums:?}");
}

#[test]
fn tail_perturbation_descends_in_either_direction() {
    let x = symmetric_line(41);
    let px = kde(x.view(), 0.5, true).unwrap();
    let base: Vec<f64> = (0..41).map(|i| (i as f64 / 40.0 * std::f64::consts::PI).sin()).collect();
    let tail = |i: usize| !(6..=34).contains(&i);
    for sign in [1.0, -1.0] {
        let start: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(i, &b)| if tail(i) { b + sign * 0.8 } else { b })
            .collect();
        let before = fitness_loss(&start, &px, 0.5).unwrap();
        let learned = descend(FitnessKernel::initialized(start), &px, &tight()).unwrap();
        assert!(learned.final_loss().unwrap() < before, "sign {sign}");
        assert!(learned.iterations_used() > 0);
    }
}

fn redo(data: &Array2<f64>, labels: &[usize], normalization: Normalization) -> Array2<f64> {
    let cfg = PreprocessConfig {
        normalization,
        ..PreprocessConfig::default()
    };
    let table = RawTable::from_numeric(data.view(), labels).unwrap();
    preprocess(&table, &cfg).unwrap().features().to_owned()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn preprocessing_is_idempotent(
        n in 3usize..30,
        d in 1usize..5,
        seed in any::<u64>(),
        which in 0usize..3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-50.0..50.0));
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let norm = [Normalization::UnitNorm, Normalization::ZScore, Normalization::MinMax][which];
        let once = redo(&x, &labels, norm);
        let twice = redo(&once, &labels, norm);
        for (a, b) in once.iter().zip(twice.iter()) {
            prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
