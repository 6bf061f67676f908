//! The fitness kernel: a per-sample scalar whose 1-D density is fitted to
//! the density of the data.
//!
//! The kernel starts at `ln N_y` (the log size of each sample's class) and is
//! moved by gradient descent on
//!
//! ```text
//! loss(F) = sum_i px_i * ln(px_i / pf_i)
//! ```
//!
//! where `px` is the normalized KDE of the features (held fixed) and `pf` the
//! normalized 1-D KDE of `F`. The learned values are finally mapped onto
//! `[kappa / 2, 3 kappa / 2]` so they can be blended with `kappa`.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::density::{kde_1d, DensityEstimate, DENSITY_FLOOR};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessState {
    Initialized,
    Learned,
    Scaled,
}

impl FitnessState {
    fn name(self) -> &'static str {
        match self {
            FitnessState::Initialized => "initialized",
            FitnessState::Learned => "learned",
            FitnessState::Scaled => "scaled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessKernel {
    values: Vec<f64>,
    state: FitnessState,
    scale_range: Option<(f64, f64)>,
    iterations_used: usize,
    final_loss: Option<f64>,
    /// Loss before the first update followed by the loss after every
    /// accepted update.
    loss_history: Vec<f64>,
}

impl FitnessKernel {
    /// Wraps arbitrary starting values, e.g. a perturbed initialisation.
    pub fn initialized(values: Vec<f64>) -> Self {
        FitnessKernel {
            values,
            state: FitnessState::Initialized,
            scale_range: None,
            iterations_used: 0,
            final_loss: None,
            loss_history: Vec::new(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn state(&self) -> FitnessState {
        self.state
    }

    pub fn scale_range(&self) -> Option<(f64, f64)> {
        self.scale_range
    }

    pub fn iterations_used(&self) -> usize {
        self.iterations_used
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.final_loss
    }

    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    /// Values at `ids`, keeping state and scale range.
    pub fn subset(&self, ids: &[usize]) -> FitnessKernel {
        FitnessKernel {
            values: ids.iter().map(|&i| self.values[i]).collect(),
            ..self.clone()
        }
    }

    pub(crate) fn require(&self, state: FitnessState) -> Result<()> {
        if self.state == state {
            Ok(())
        } else {
            Err(Error::WrongFitnessState {
                expected: state.name(),
                found: self.state.name(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    #[default]
    Analytic,
    /// Central differences of the loss; O(n^3) per step, for checking only.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub threshold: f64,
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub bandwidth: f64,
    pub gradient_mode: GradientMode,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            threshold: 1e-2,
            learning_rate: 0.05,
            max_iterations: 1000,
            bandwidth: 0.5,
            gradient_mode: GradientMode::Analytic,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.threshold) {
            return Err(Error::config("threshold must be positive"));
        }
        if !positive(self.learning_rate) {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        if !positive(self.bandwidth) {
            return Err(Error::config("bandwidth must be positive"));
        }
        Ok(())
    }
}

/// Consecutive near-flat steps tolerated before stopping.
const PLATEAU_WINDOW: usize = 10;
const PLATEAU_TOLERANCE: f64 = 1e-6;
const MAX_HALVINGS: usize = 40;

/// `F_init[i] = ln(class_counts[labels[i]])`.
pub fn init_fitness(dataset: &Dataset) -> Result<FitnessKernel> {
    if dataset.n() == 0 {
        return Err(Error::TooFewPoints { needed: 1, found: 0 });
    }
    let counts = dataset.class_counts();
    let values = dataset.labels().iter().map(|&y| (counts[y] as f64).ln()).collect();
    Ok(FitnessKernel::initialized(values))
}

/// `sum_i px_i * ln(px_i / pf_i)` over two normalized estimates.
pub fn kl_loss(px: &DensityEstimate, pf: &DensityEstimate) -> Result<f64> {
    if px.len() != pf.len() {
        return Err(Error::LengthMismatch {
            expected: px.len(),
            found: pf.len(),
        });
    }
    if !px.normalized || !pf.normalized {
        return Err(Error::Unnormalized);
    }
    Ok(kl_terms(&px.values, &pf.values))
}

fn kl_terms(px: &[f64], pf: &[f64]) -> f64 {
    px.iter()
        .zip(pf)
        .map(|(&p, &q)| {
            let p = p.max(DENSITY_FLOOR);
            p * (p / q.max(DENSITY_FLOOR)).ln()
        })
        .sum()
}

fn check_px(px: &DensityEstimate, n: usize) -> Result<()> {
    if px.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: px.len(),
        });
    }
    if !px.normalized {
        return Err(Error::Unnormalized);
    }
    Ok(())
}

fn check_finite(f: &[f64]) -> Result<()> {
    match f.iter().position(|v| !v.is_finite()) {
        Some(col) => Err(Error::NonFinite { row: 0, col }),
        None => Ok(()),
    }
}

/// Loss of raw fitness values against a fixed feature density.
pub fn fitness_loss(f: &[f64], px: &DensityEstimate, bandwidth: f64) -> Result<f64> {
    check_px(px, f.len())?;
    let pf = kde_1d(f, bandwidth, true)?;
    Ok(kl_terms(&px.values, &pf.values))
}

/// Exact derivative of [`fitness_loss`] with respect to every `f_m`.
///
/// With `r_mi = exp(-(f_m - f_i)^2 / 2h^2)`, `rho_m = sum_i r_mi`,
/// `S = sum_m rho_m` and `t_m = sum_i r_mi (f_m - f_i)`:
///
/// ```text
/// dloss/df_m = 1/h^2 * ( sum_i (px_i / rho_i) r_mi (f_m - f_i)
///                        + (px_m / rho_m) t_m
///                        - 2 (sum_i px_i) t_m / S )
/// ```
///
/// The first two terms come from `-sum_i px_i ln rho_i`; the last from the
/// normalizer `ln S` shared by every `pf_i`.
pub fn loss_gradient(f: &[f64], px: &DensityEstimate, bandwidth: f64) -> Result<Vec<f64>> {
    check_px(px, f.len())?;
    check_finite(f)?;
    if bandwidth.is_nan() || bandwidth <= 0.0 {
        return Err(Error::config("bandwidth must be positive"));
    }
    Ok(loss_and_gradient(f, &px.values, bandwidth).1)
}

/// Loss and gradient from one pass over the kernel matrix.
fn loss_and_gradient(f: &[f64], px: &[f64], bandwidth: f64) -> (f64, Vec<f64>) {
    let n = f.len();
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);

    // Upper triangle of r_mi, filled once and read symmetrically.
    let mut r = vec![0.0; n * n];
    let mut rho = vec![1.0; n];
    let mut t = vec![0.0; n];
    for m in 0..n {
        for i in m + 1..n {
            let diff = f[m] - f[i];
            let v = (-diff * diff * inv).exp();
            r[m * n + i] = v;
            rho[m] += v;
            rho[i] += v;
            t[m] += v * diff;
            t[i] -= v * diff;
        }
    }
    let total: f64 = rho.iter().sum();
    let px_sum: f64 = px.iter().sum();
    let w: Vec<f64> = px.iter().zip(&rho).map(|(p, r)| p / r).collect();
    let pf: Vec<f64> = rho.iter().map(|r| r / total).collect();
    let loss = kl_terms(px, &pf);

    let mut cross = vec![0.0; n];
    for m in 0..n {
        for i in m + 1..n {
            let v = r[m * n + i] * (f[m] - f[i]);
            cross[m] += w[i] * v;
            cross[i] -= w[m] * v;
        }
    }
    let h2 = bandwidth * bandwidth;
    let grad = (0..n)
        .map(|m| (cross[m] + w[m] * t[m] - 2.0 * px_sum * t[m] / total) / h2)
        .collect();
    (loss, grad)
}

/// Central finite differences of [`fitness_loss`].
pub fn finite_difference_gradient(
    f: &[f64],
    px: &DensityEstimate,
    bandwidth: f64,
    step: f64,
) -> Result<Vec<f64>> {
    check_px(px, f.len())?;
    check_finite(f)?;
    let mut probe = f.to_vec();
    let mut grad = Vec::with_capacity(f.len());
    for m in 0..f.len() {
        probe[m] = f[m] + step;
        let up = fitness_loss(&probe, px, bandwidth)?;
        probe[m] = f[m] - step;
        let down = fitness_loss(&probe, px, bandwidth)?;
        probe[m] = f[m];
        grad.push((up - down) / (2.0 * step));
    }
    Ok(grad)
}

/// Loss at `f`, plus the gradient when it comes for free.
fn trial(f: &[f64], px: &DensityEstimate, config: &LearnConfig) -> Result<(f64, Option<Vec<f64>>)> {
    match config.gradient_mode {
        GradientMode::Analytic => {
            let (loss, grad) = loss_and_gradient(f, &px.values, config.bandwidth);
            Ok((loss, Some(grad)))
        }
        GradientMode::FiniteDifference => Ok((fitness_loss(f, px, config.bandwidth)?, None)),
    }
}

fn gradient(f: &[f64], px: &DensityEstimate, config: &LearnConfig, known: Option<Vec<f64>>) -> Result<Vec<f64>> {
    match known {
        Some(grad) => Ok(grad),
        None => finite_difference_gradient(f, px, config.bandwidth, 1e-5),
    }
}

/// Initialises the kernel from class counts and descends the loss.
pub fn learn_fitness(dataset: &Dataset, px: &DensityEstimate, config: &LearnConfig) -> Result<FitnessKernel> {
    config.validate()?;
    descend(init_fitness(dataset)?, px, config)
}

/// Gradient descent from an arbitrary starting kernel.
///
/// Each iteration tries `F - lr * grad`, halving the step until the loss
/// strictly decreases, so the recorded loss history is strictly decreasing.
/// Stops when the loss drops below the threshold, after `max_iterations`
/// accepted updates, after a run of negligible improvements, or when no
/// step size decreases the loss.
pub fn descend(start: FitnessKernel, px: &DensityEstimate, config: &LearnConfig) -> Result<FitnessKernel> {
    config.validate()?;
    let mut f = start.values;
    check_px(px, f.len())?;
    check_finite(&f)?;

    let (mut loss, mut known) = trial(&f, px, config)?;
    if !loss.is_finite() {
        return Err(Error::Diverged { iteration: 0 });
    }
    let mut history = vec![loss];
    let mut iterations = 0;
    let mut flat_steps = 0;

    while iterations < config.max_iterations && loss >= config.threshold {
        let grad = gradient(&f, px, config, known.take())?;
        if grad.iter().all(|&g| g == 0.0) {
            break;
        }
        let mut step = config.learning_rate;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate: Vec<f64> = f.iter().zip(&grad).map(|(v, g)| v - step * g).collect();
            let (candidate_loss, candidate_grad) = trial(&candidate, px, config)?;
            if !candidate_loss.is_finite() {
                return Err(Error::Diverged {
                    iteration: iterations + 1,
                });
            }
            if candidate_loss < loss {
                accepted = Some((candidate, candidate_loss, candidate_grad));
                break;
            }
            step *= 0.5;
        }
        let Some((next, next_loss, next_grad)) = accepted else {
            break;
        };
        let improvement = (loss - next_loss) / loss;
        f = next;
        loss = next_loss;
        known = next_grad;
        history.push(loss);
        iterations += 1;
        if improvement < PLATEAU_TOLERANCE {
            flat_steps += 1;
            if flat_steps >= PLATEAU_WINDOW {
                break;
            }
        } else {
            flat_steps = 0;
        }
    }

    Ok(FitnessKernel {
        values: f,
        state: FitnessState::Learned,
        scale_range: None,
        iterations_used: iterations,
        final_loss: Some(loss),
        loss_history: history,
    })
}

/// Affine map of `values` onto `[min, max]`: the smallest value goes to
/// `min`, the largest to `max`. Constant input maps to the midpoint.
pub fn rescale(values: &[f64], min: f64, max: f64) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi.is_nan() || hi <= lo {
        return vec![0.5 * (min + max); values.len()];
    }
    let span = hi - lo;
    values
        .iter()
        .map(|&v| (min + (v - lo) / span * (max - min)).clamp(min, max))
        .collect()
}

/// Maps the kernel onto `[kappa / 2, 3 kappa / 2]`.
pub fn scale_fitness(f: &FitnessKernel, kappa: usize) -> FitnessKernel {
    let k = kappa as f64;
    let range = (0.5 * k, 1.5 * k);
    FitnessKernel {
        values: rescale(&f.values, range.0, range.1),
        state: FitnessState::Scaled,
        scale_range: Some(range),
        ..f.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn density(values: Vec<f64>) -> DensityEstimate {
        DensityEstimate {
            values,
            bandwidth: 0.5,
            normalized: true,
        }
    }

    fn random_px(n: usize, rng: &mut impl Rng) -> DensityEstimate {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        density(raw.into_iter().map(|v| v / total).collect())
    }

    /// Loss written out from scratch, independent of `kde_1d`/`kl_terms`.
    fn reference_loss(f: &[f64], px: &[f64], h: f64) -> f64 {
        let rho: Vec<f64> = f
            .iter()
            .map(|a| f.iter().map(|b| (-(a - b).powi(2) / (2.0 * h * h)).exp()).sum())
            .collect();
        let s: f64 = rho.iter().sum();
        px.iter().zip(&rho).map(|(p, r)| p * (p / (r / s)).ln()).sum()
    }

    #[test]
    fn init_from_class_counts() {
        let ds = Dataset::from_parts(Array2::zeros((8, 1)), vec![0, 1, 1, 0, 1, 0, 1, 1]).unwrap();
        let f = init_fitness(&ds).unwrap();
        assert_eq!(f.state(), FitnessState::Initialized);
        for (v, y) in f.values().iter().zip(ds.labels()) {
            let want = if *y == 0 { 1.0986122886681098 } else { 1.6094379124341003 };
            assert!((v - want).abs() < 1e-15);
        }
        let single = Dataset::from_parts(Array2::zeros((3, 1)), vec![0, 1, 1]).unwrap();
        assert_eq!(init_fitness(&single).unwrap().values()[0], 0.0);
        let one_class = Dataset::from_parts(Array2::zeros((7, 1)), vec![0; 7]).unwrap();
        assert!(init_fitness(&one_class).unwrap().values().iter().all(|&v| v == 7f64.ln()));
    }

    #[test]
    fn init_rejects_empty() {
        let ds = Dataset::from_parts(Array2::zeros((0, 1)), vec![]).unwrap();
        assert!(init_fitness(&ds).is_err());
    }

    #[test]
    fn kl_examples() {
        let px = density(vec![0.5, 0.5]);
        assert_eq!(kl_loss(&px, &px).unwrap(), 0.0);
        let pf = density(vec![0.25, 0.75]);
        assert!((kl_loss(&px, &pf).unwrap() - 0.14384103622589042).abs() < 1e-15);
    }

    #[test]
    fn kl_contract_errors() {
        let px = density(vec![0.5, 0.5]);
        assert!(matches!(kl_loss(&px, &density(vec![1.0])), Err(Error::LengthMismatch { .. })));
        let raw = DensityEstimate {
            normalized: false,
            ..px.clone()
        };
        assert!(matches!(kl_loss(&px, &raw), Err(Error::Unnormalized)));
    }

    #[test]
    fn constant_kernel_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let px = random_px(6, &mut rng);
        let g = loss_gradient(&[2.0; 6], &px, 0.5).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let f: Vec<f64> = (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let px = random_px(5, &mut rng);
        let g = loss_gradient(&f, &px, 0.5).unwrap();
        let eps = 1e-5;
        for m in 0..5 {
            let mut up = f.clone();
            up[m] += eps;
            let mut down = f.clone();
            down[m] -= eps;
            let fd = (reference_loss(&up, &px.values, 0.5) - reference_loss(&down, &px.values, 0.5)) / (2.0 * eps);
            assert!((g[m] - fd).abs() <= 1e-4 * fd.abs().max(1e-4), "component {m}: {} vs {fd}", g[m]);
        }
    }

    #[test]
    fn two_point_gradient_is_antisymmetric() {
        // With two samples pf is (1/2, 1/2) whatever F is, so the loss is
        // flat and both components vanish.
        let px = density(vec![0.5, 0.5]);
        let g = loss_gradient(&[0.0, 1.0], &px, 0.5).unwrap();
        assert_eq!(g[0], -g[1]);
        assert!(g[0].abs() < 1e-15);
    }

    #[test]
    fn gradient_rejects_non_finite() {
        let px = density(vec![0.5, 0.5]);
        assert!(loss_gradient(&[0.0, f64::NAN], &px, 0.5).is_err());
    }

    #[test]
    fn finite_difference_mode_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..2.0)).collect();
        let px = random_px(8, &mut rng);
        let a = loss_gradient(&f, &px, 0.5).unwrap();
        let b = finite_difference_gradient(&f, &px, 0.5, 1e-5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-4 * y.abs().max(1e-4));
        }
    }

    #[test]
    fn early_exit_when_already_below_threshold() {
        // One class: F is constant, pf uniform; isolated points: px uniform.
        let x = Array2::from_shape_fn((5, 1), |(i, _)| 10.0 * i as f64);
        let ds = Dataset::from_parts(x.clone(), vec![0; 5]).unwrap();
        let px = crate::density::kde(x.view(), 0.5, true).unwrap();
        let f = learn_fitness(&ds, &px, &LearnConfig::default()).unwrap();
        assert_eq!(f.iterations_used(), 0);
        assert_eq!(f.values(), init_fitness(&ds).unwrap().values());
        assert_eq!(f.state(), FitnessState::Learned);
        assert!(f.final_loss().unwrap() < 1e-2);
    }

    #[test]
    fn descent_on_two_gaussians_decreases_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 60;
        let mut x = Array2::zeros((n, 1));
        let mut labels = Vec::new();
        for i in 0..n {
            let class = usize::from(i >= 40);
            let z: f64 = rng.sample(StandardNormal);
            x[[i, 0]] = z * 0.4 + if class == 0 { 0.0 } else { 1.5 };
            labels.push(class);
        }
        let ds = Dataset::from_parts(x.clone(), labels).unwrap();
        let px = crate::density::kde(x.view(), 0.5, true).unwrap();
        let f = learn_fitness(&ds, &px, &LearnConfig::default()).unwrap();
        let hist = f.loss_history();
        assert!(f.iterations_used() > 0);
        assert!(hist.last().unwrap() < &hist[0]);
        assert!(hist.windows(2).all(|w| w[1] < w[0]));
        assert!(f.iterations_used() <= 1000);
        assert_eq!(hist.len(), f.iterations_used() + 1);
    }

    #[test]
    fn config_validation() {
        let bad = LearnConfig {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let ds = Dataset::from_parts(Array2::zeros((3, 1)), vec![0, 1, 1]).unwrap();
        let px = density(vec![1.0 / 3.0; 3]);
        assert!(learn_fitness(&ds, &px, &bad).is_err());
        for cfg in [
            LearnConfig { threshold: 0.0, ..Default::default() },
            LearnConfig { learning_rate: -1.0, ..Default::default() },
            LearnConfig { bandwidth: 0.0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn scaling_examples() {
        let s = scale_fitness(&FitnessKernel::initialized(vec![0.0, 1.0, 2.0]), 10);
        assert_eq!(s.values(), &[5.0, 10.0, 15.0]);
        assert_eq!(s.scale_range(), Some((5.0, 15.0)));
        assert_eq!(s.state(), FitnessState::Scaled);
        let c = scale_fitness(&FitnessKernel::initialized(vec![3.3; 4]), 10);
        assert_eq!(c.values(), &[10.0; 4]);
        let h = scale_fitness(&FitnessKernel::initialized(vec![-3.0, 0.0, 9.0]), 4);
        assert_eq!(h.values(), &[2.0, 3.0, 6.0]);
    }

    proptest! {
        #[test]
        fn kl_is_non_negative(a in prop::collection::vec(0.01f64..1.0, 1..30), seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = a.len();
            let sa: f64 = a.iter().sum();
            let px = density(a.iter().map(|v| v / sa).collect());
            let pf = random_px(n, &mut rng);
            prop_assert!(kl_loss(&px, &pf).unwrap() >= -1e-12);
            prop_assert!(kl_loss(&px, &px).unwrap().abs() < 1e-15);
        }

        #[test]
        fn scaling_preserves_order(values in prop::collection::vec(-100.0f64..100.0, 2..40), kappa in 1usize..50) {
            let s = scale_fitness(&FitnessKernel::initialized(values.clone()), kappa);
            let k = kappa as f64;
            let lo = s.values().iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(s.values().iter().all(|&v| v >= 0.5 * k && v <= 1.5 * k));
            let distinct = values.iter().any(|&v| v != values[0]);
            if distinct {
                prop_assert_eq!(lo, 0.5 * k);
                prop_assert!((hi - 1.5 * k).abs() <= 1e-12 * k);
            }
            for i in 0..values.len() {
                for j in 0..values.len() {
                    if values[i] < values[j] {
                        prop_assert!(s.values()[i] <= s.values()[j]);
                    }
                }
            }
        }
    }
}
