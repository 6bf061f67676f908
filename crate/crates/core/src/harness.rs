//! Experiment orchestration: stratified cross-validation of paNNG against
//! the plain kNN graph, eta sweeps, borderline-sample accuracies, and the
//! JSON artifacts the CLI writes.
//!
//! Every fold fits its own preprocessing statistics, fitness kernel and eta
//! on training rows only. All randomness is derived from `CVConfig::seed`,
//! so reports are reproducible byte for byte regardless of thread count.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classify::GraphClassifier;
use crate::dataset::{apply_rows, preprocess_rows, Dataset, LabeledRows, PreprocessConfig, Preprocessor, RawTable};
use crate::density::{build_index, kde, DistanceIndex, Metric};
use crate::error::{Error, Result};
use crate::fitness::{learn_fitness, scale_fitness, FitnessKernel, LearnConfig};
use crate::graph::{
    build_graph, compute_k, default_eta_grid, read_edge_list, select_eta, write_edge_list, GraphExport,
    GraphVariant, KVector, NeighborGraph, SelectOptions,
};
use crate::split::{derive_seed, stratified_folds};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVConfig {
    pub folds: usize,
    pub seed: u64,
    pub kappa: usize,
    pub eta: EtaMode,
    /// Candidates for `EtaMode::Auto`.
    pub eta_grid: Vec<f64>,
    pub variant: GraphVariant,
    pub noise: bool,
    pub inner_repeats: usize,
    pub learn: LearnConfig,
    pub preprocess: PreprocessConfig,
    /// Borderline quantiles (percent) reported by `cross_validate`.
    pub quantiles: Vec<f64>,
}

impl Default for CVConfig {
    fn default() -> Self {
        CVConfig {
            folds: 10,
            seed: 0,
            kappa: 10,
            eta: EtaMode::Auto,
            eta_grid: default_eta_grid(),
            variant: GraphVariant::Plain,
            noise: true,
            inner_repeats: 3,
            learn: LearnConfig::default(),
            preprocess: PreprocessConfig::default(),
            quantiles: (1..=20).map(f64::from).collect(),
        }
    }
}

impl CVConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.folds < 2 || self.folds > n {
            return Err(Error::config(format!("folds must lie in 2..={n}, got {}", self.folds)));
        }
        if self.kappa == 0 {
            return Err(Error::config("kappa must be positive"));
        }
        if let EtaMode::Fixed(eta) = self.eta {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::config(format!("eta must lie in [0, 1], got {eta}")));
            }
        }
        if self.eta == EtaMode::Auto && self.eta_grid.is_empty() {
            return Err(Error::config("eta grid is empty"));
        }
        check_quantiles(&self.quantiles)?;
        self.learn.validate()
    }

    fn select_options(&self) -> SelectOptions {
        SelectOptions {
            variant: self.variant,
            noise: self.noise,
            repeats: self.inner_repeats,
            holdout: 0.2,
        }
    }
}

fn check_quantiles(quantiles: &[f64]) -> Result<()> {
    match quantiles.iter().find(|&&q| !(q > 0.0 && q <= 100.0)) {
        Some(q) => Err(Error::config(format!("quantile {q} outside (0, 100]"))),
        None => Ok(()),
    }
}

/// Everything learned from one training split.
#[derive(Debug, Clone)]
pub struct FoldModel {
    pub preprocessor: Preprocessor,
    pub train: Dataset,
    pub index: DistanceIndex,
    /// Scaled onto `[kappa / 2, 3 kappa / 2]`.
    pub fitness: FitnessKernel,
    pub eta: f64,
    /// Inner held-out accuracy of the chosen eta (auto mode only).
    pub inner_score: Option<f64>,
    pub noise_seed: u64,
}

impl FoldModel {
    /// Fits preprocessing, fitness kernel and (in auto mode) eta on the
    /// labeled rows `train_ids`. Nothing outside `train_ids` is read.
    pub fn fit(
        table: &RawTable,
        labeled: &LabeledRows,
        train_ids: &[usize],
        config: &CVConfig,
        fold_seed: u64,
    ) -> Result<FoldModel> {
        let (preprocessor, train) = preprocess_rows(table, labeled, train_ids, &config.preprocess)?;
        if config.kappa >= train.n() {
            return Err(Error::KappaOutOfRange {
                kappa: config.kappa,
                n: train.n(),
            });
        }
        let index = build_index(train.features(), Metric::Euclidean)?;
        let px = kde(train.features(), config.learn.bandwidth, true)?;
        let learned = learn_fitness(&train, &px, &config.learn)?;
        let fitness = scale_fitness(&learned, config.kappa);
        let (eta, inner_score) = match config.eta {
            EtaMode::Fixed(eta) => (eta, None),
            EtaMode::Auto => {
                let (eta, score) = select_eta(
                    &train,
                    &fitness,
                    config.kappa,
                    &config.eta_grid,
                    derive_seed(fold_seed, &[1]),
                    &config.select_options(),
                )?;
                (eta, Some(score))
            }
        };
        Ok(FoldModel {
            preprocessor,
            train,
            index,
            fitness,
            eta,
            inner_score,
            noise_seed: derive_seed(fold_seed, &[2]),
        })
    }

    pub fn k_vector(&self, eta: f64, noise: bool, kappa: usize) -> Result<KVector> {
        compute_k(&self.fitness, kappa, eta, self.noise_seed, noise)
    }

    pub fn classifier(&self, k: &KVector, variant: GraphVariant) -> Result<GraphClassifier> {
        let graph = build_graph(&self.index, k, variant, self.train.labels())?;
        GraphClassifier::new(graph, self.index.clone(), k.kappa())
    }

    /// Unified-k plain kNN graph on the same training split.
    pub fn baseline(&self, kappa: usize) -> Result<GraphClassifier> {
        self.classifier(&KVector::uniform(self.train.n(), kappa)?, GraphVariant::Plain)
    }
}

struct FoldRun {
    test_ids: Vec<usize>,
    panng: Vec<usize>,
    knng: Vec<usize>,
    eta: f64,
    final_loss: f64,
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(p, y)| p == y).count();
    hits as f64 / truth.len() as f64
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `(panng - knng) / knng`, undefined for a zero baseline.
pub fn gain(panng: f64, knng: f64) -> Option<f64> {
    (knng > 0.0).then(|| (panng - knng) / knng)
}

struct Plan {
    labeled: LabeledRows,
    folds: Vec<Vec<usize>>,
}

fn plan(table: &RawTable, config: &CVConfig) -> Result<Plan> {
    let labeled = LabeledRows::from_table(table, &config.preprocess)?;
    config.validate(labeled.len())?;
    let folds = stratified_folds(&labeled.labels, config.folds, config.seed);
    if let Some(f) = folds.iter().position(Vec::is_empty) {
        return Err(Error::EmptyFold(f));
    }
    Ok(Plan { labeled, folds })
}

fn train_ids(plan: &Plan, fold: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = plan
        .folds
        .iter()
        .enumerate()
        .filter(|&(f, _)| f != fold)
        .flat_map(|(_, ids)| ids.iter().copied())
        .collect();
    ids.sort_unstable();
    ids
}

fn fit_fold(table: &RawTable, plan: &Plan, fold: usize, config: &CVConfig) -> Result<(FoldModel, Dataset)> {
    let model = FoldModel::fit(
        table,
        &plan.labeled,
        &train_ids(plan, fold),
        config,
        derive_seed(config.seed, &[fold as u64]),
    )?;
    let test = apply_rows(&model.preprocessor, table, &plan.labeled, &plan.folds[fold])?;
    Ok((model, test))
}

fn run_folds(table: &RawTable, plan: &Plan, config: &CVConfig) -> Result<Vec<FoldRun>> {
    (0..config.folds)
        .into_par_iter()
        .map(|fold| {
            let (model, test) = fit_fold(table, plan, fold, config)?;
            let k = model.k_vector(model.eta, config.noise, config.kappa)?;
            let panng = model.classifier(&k, config.variant)?.predict_batch(test.features())?;
            let knng = model.baseline(config.kappa)?.predict_batch(test.features())?;
            Ok(FoldRun {
                test_ids: plan.folds[fold].clone(),
                panng,
                knng,
                eta: model.eta,
                final_loss: model.fitness.final_loss().unwrap_or(f64::NAN),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub class_names: Vec<String>,
    pub config: CVConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorderlineEntry {
    pub quantile: f64,
    /// Number of samples in the quantile subset.
    pub size: usize,
    pub panng_accuracy: Option<f64>,
    pub knng_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub metadata: ReportMetadata,
    pub per_fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub chosen_eta_per_fold: Vec<f64>,
    pub baseline_per_fold_accuracy: Vec<f64>,
    pub baseline_accuracy: f64,
    pub gain: Option<f64>,
    pub fitness_loss_per_fold: Vec<f64>,
    pub borderline: Vec<BorderlineEntry>,
}

/// The whole labeled table encoded with statistics fitted on all rows.
/// Used for label-free density ranking and for metadata.
fn full_dataset(table: &RawTable, labeled: &LabeledRows, config: &PreprocessConfig) -> Result<Dataset> {
    let all: Vec<usize> = (0..labeled.len()).collect();
    Ok(preprocess_rows(table, labeled, &all, config)?.1)
}

/// Ids of the `ceil(n * quantile / 100)` samples with the lowest
/// normalized feature density; ties go to the smaller id.
pub fn borderline_subset(dataset: &Dataset, quantile: f64, bandwidth: f64) -> Result<Vec<usize>> {
    check_quantiles(&[quantile])?;
    let density = kde(dataset.features(), bandwidth, true)?;
    Ok(lowest_density(&density.values, quantile))
}

fn lowest_density(density: &[f64], quantile: f64) -> Vec<usize> {
    let n = density.len();
    let size = ((n as f64 * quantile / 100.0) - 1e-9).ceil().clamp(0.0, n as f64) as usize;
    let mut ids: Vec<usize> = (0..n).collect();
    ids.sort_by(|&a, &b| density[a].total_cmp(&density[b]).then(a.cmp(&b)));
    ids.truncate(size);
    ids
}

fn borderline_entries(
    density: &[f64],
    quantiles: &[f64],
    truth: &[usize],
    panng: &[usize],
    knng: &[usize],
) -> Vec<BorderlineEntry> {
    quantiles
        .iter()
        .map(|&q| {
            let ids = lowest_density(density, q);
            let acc = |pred: &[usize]| {
                (!ids.is_empty())
                    .then(|| ids.iter().filter(|&&i| pred[i] == truth[i]).count() as f64 / ids.len() as f64)
            };
            BorderlineEntry {
                quantile: q,
                size: ids.len(),
                panng_accuracy: acc(panng),
                knng_accuracy: acc(knng),
            }
        })
        .collect()
}

/// Stratified k-fold evaluation of paNNG and the plain kNNG baseline.
pub fn cross_validate(table: &RawTable, config: &CVConfig) -> Result<EvalReport> {
    let plan = plan(table, config)?;
    let runs = run_folds(table, &plan, config)?;

    let n = plan.labeled.len();
    let truth = &plan.labeled.labels;
    let mut panng = vec![0; n];
    let mut knng = vec![0; n];
    let mut per_fold = Vec::new();
    let mut baseline_per_fold = Vec::new();
    for run in &runs {
        let fold_truth: Vec<usize> = run.test_ids.iter().map(|&i| truth[i]).collect();
        per_fold.push(accuracy(&run.panng, &fold_truth));
        baseline_per_fold.push(accuracy(&run.knng, &fold_truth));
        for (t, &i) in run.test_ids.iter().enumerate() {
            panng[i] = run.panng[t];
            knng[i] = run.knng[t];
        }
    }

    let full = full_dataset(table, &plan.labeled, &config.preprocess)?;
    let density = kde(full.features(), config.learn.bandwidth, true)?;
    let borderline = borderline_entries(&density.values, &config.quantiles, truth, &panng, &knng);

    let mean_accuracy = mean(&per_fold);
    let baseline_accuracy = mean(&baseline_per_fold);
    Ok(EvalReport {
        schema_version: SCHEMA_VERSION,
        metadata: metadata(table, &full, config),
        per_fold_accuracy: per_fold,
        mean_accuracy,
        chosen_eta_per_fold: runs.iter().map(|r| r.eta).collect(),
        baseline_per_fold_accuracy: baseline_per_fold,
        baseline_accuracy,
        gain: gain(mean_accuracy, baseline_accuracy),
        fitness_loss_per_fold: runs.iter().map(|r| r.final_loss).collect(),
        borderline,
    })
}

fn metadata(table: &RawTable, full: &Dataset, config: &CVConfig) -> ReportMetadata {
    ReportMetadata {
        dataset: table.name().to_string(),
        n: full.n(),
        d: full.d(),
        m: full.m(),
        class_names: full.class_names().to_vec(),
        config: config.clone(),
    }
}

/// Paired paNNG / kNNG accuracies restricted to each borderline quantile,
/// pooled over the test predictions of all folds.
pub fn borderline_accuracy(table: &RawTable, config: &CVConfig, quantiles: &[f64]) -> Result<Vec<BorderlineEntry>> {
    check_quantiles(quantiles)?;
    let config = CVConfig {
        quantiles: quantiles.to_vec(),
        ..config.clone()
    };
    Ok(cross_validate(table, &config)?.borderline)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub eta: f64,
    pub mean_accuracy: f64,
    pub per_fold_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub metadata: ReportMetadata,
    pub baseline_accuracy: f64,
    pub points: Vec<SweepPoint>,
}

/// Full cross-validation at each fixed eta. The fitness kernel of a fold
/// does not depend on eta, so it is learned once per fold.
pub fn eta_sweep(table: &RawTable, config: &CVConfig, grid: &[f64]) -> Result<SweepReport> {
    if grid.is_empty() {
        return Err(Error::config("eta grid is empty"));
    }
    if let Some(eta) = grid.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::config(format!("eta must lie in [0, 1], got {eta}")));
    }
    let fixed = CVConfig {
        eta: EtaMode::Fixed(grid[0]),
        ..config.clone()
    };
    let plan = plan(table, &fixed)?;
    let truth = &plan.labeled.labels;

    // per_fold[fold] = (accuracy per eta, baseline accuracy)
    let per_fold = (0..fixed.folds)
        .into_par_iter()
        .map(|fold| {
            let (model, test) = fit_fold(table, &plan, fold, &fixed)?;
            let fold_truth: Vec<usize> = plan.folds[fold].iter().map(|&i| truth[i]).collect();
            let accs = grid
                .iter()
                .map(|&eta| {
                    let k = model.k_vector(eta, fixed.noise, fixed.kappa)?;
                    let pred = model.classifier(&k, fixed.variant)?.predict_batch(test.features())?;
                    Ok(accuracy(&pred, &fold_truth))
                })
                .collect::<Result<Vec<f64>>>()?;
            let base = model.baseline(fixed.kappa)?.predict_batch(test.features())?;
            Ok((accs, accuracy(&base, &fold_truth)))
        })
        .collect::<Result<Vec<_>>>()?;

    let points = grid
        .iter()
        .enumerate()
        .map(|(g, &eta)| {
            let per_fold_accuracy: Vec<f64> = per_fold.iter().map(|(a, _)| a[g]).collect();
            SweepPoint {
                eta,
                mean_accuracy: mean(&per_fold_accuracy),
                per_fold_accuracy,
            }
        })
        .collect();
    let baseline: Vec<f64> = per_fold.iter().map(|(_, b)| *b).collect();
    let full = full_dataset(table, &plan.labeled, &config.preprocess)?;
    Ok(SweepReport {
        schema_version: SCHEMA_VERSION,
        metadata: metadata(table, &full, config),
        baseline_accuracy: mean(&baseline),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorderlineReport {
    pub schema_version: u32,
    pub metadata: ReportMetadata,
    pub entries: Vec<BorderlineEntry>,
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::io(path, e.into()))?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Model {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn emit_report(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    write_json(report, path)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    read_json(path)
}

/// A graph fitted on every labeled row, ready for export.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub preprocessor: Preprocessor,
    pub dataset: Dataset,
    pub index: DistanceIndex,
    pub fitness: FitnessKernel,
    pub k: KVector,
    pub graph: NeighborGraph,
    pub inner_score: Option<f64>,
}

pub fn train_model(table: &RawTable, config: &CVConfig) -> Result<TrainedModel> {
    let labeled = LabeledRows::from_table(table, &config.preprocess)?;
    config.learn.validate()?;
    let all: Vec<usize> = (0..labeled.len()).collect();
    let fold = FoldModel::fit(table, &labeled, &all, config, config.seed)?;
    let k = fold.k_vector(fold.eta, config.noise, config.kappa)?;
    let graph = build_graph(&fold.index, &k, config.variant, fold.train.labels())?;
    Ok(TrainedModel {
        preprocessor: fold.preprocessor,
        dataset: fold.train,
        index: fold.index,
        fitness: fold.fitness,
        k,
        graph,
        inner_score: fold.inner_score,
    })
}

/// Sidecar written next to the edge list: the graph description plus what
/// `predict` needs to place new samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub graph: GraphExport,
    pub class_names: Vec<String>,
    pub labels: Vec<usize>,
    pub features: Vec<Vec<f64>>,
    pub preprocessor: Preprocessor,
}

/// `graph.tsv` -> `graph.json`.
pub fn sidecar_path(edge_list: &Path) -> PathBuf {
    edge_list.with_extension("json")
}

pub fn export_model(model: &TrainedModel, edge_list: impl AsRef<Path>) -> Result<PathBuf> {
    let path = edge_list.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_edge_list(&model.graph, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))?;

    let sidecar = ModelFile {
        graph: GraphExport::new(&model.graph, &model.k),
        class_names: model.dataset.class_names().to_vec(),
        labels: model.dataset.labels().to_vec(),
        features: model.dataset.features().rows().into_iter().map(|r| r.to_vec()).collect(),
        preprocessor: model.preprocessor.clone(),
    };
    let side = sidecar_path(path);
    write_json(&sidecar, &side)?;
    Ok(side)
}

/// Rebuilds a classifier from an exported edge list and its sidecar.
pub fn load_model(edge_list: impl AsRef<Path>) -> Result<(GraphClassifier, ModelFile)> {
    let path = edge_list.as_ref();
    let model: ModelFile = read_json(sidecar_path(path))?;
    let bad = |message: String| Error::Model {
        path: path.to_path_buf(),
        message,
    };
    let n = model.graph.n;
    if model.labels.len() != n || model.features.len() != n {
        return Err(bad("sidecar row counts disagree with n".into()));
    }
    let d = model.features.first().map_or(0, Vec::len);
    let flat: Vec<f64> = model.features.iter().flatten().copied().collect();
    let features = ndarray::Array2::from_shape_vec((n, d), flat).map_err(|e| bad(e.to_string()))?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (adjacency, variant) = read_edge_list(BufReader::new(file), n)?;
    if variant.is_some_and(|v| v != model.graph.variant) {
        return Err(bad("edge list variant disagrees with sidecar".into()));
    }
    let index = build_index(features.view(), Metric::Euclidean)?;
    let graph = NeighborGraph {
        w: adjacency.clone(),
        adjacency,
        variant: model.graph.variant,
        node_labels: model.labels.clone(),
    };
    let clf = GraphClassifier::new(graph, index, model.graph.kappa.min(n - 1))?;
    Ok((clf, model))
}
