//! CSV ingestion and preprocessing.
//!
//! Loading produces a [`RawTable`] of string cells. Preprocessing drops rows
//! without a label, imputes missing numeric cells with the column mean,
//! one-hot encodes categorical columns and normalizes the result. The fitted
//! statistics live in a [`Preprocessor`], so cross-validation can fit on a
//! training fold and apply the same transform to the held-out rows.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which column holds the prediction target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl LabelColumn {
    /// Header names win; a bare integer falls back to a column index.
    fn resolve(&self, header: &[String]) -> Result<usize> {
        match self {
            LabelColumn::Index(i) if *i < header.len() => Ok(*i),
            LabelColumn::Index(i) => Err(Error::LabelColumnMissing(i.to_string())),
            LabelColumn::Name(name) => {
                if let Some(i) = header.iter().position(|h| h == name) {
                    return Ok(i);
                }
                match name.parse::<usize>() {
                    Ok(i) if i < header.len() => Ok(i),
                    _ => Err(Error::LabelColumnMissing(name.clone())),
                }
            }
        }
    }
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(LabelColumn::Name(s.to_string()))
    }
}

/// String cells as read from disk, with a resolved label column.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    label_index: usize,
}

impl RawTable {
    pub fn from_rows(header: Vec<String>, rows: Vec<Vec<String>>, label: &LabelColumn) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            if row.len() != header.len() {
                return Err(Error::RaggedRow {
                    row: r,
                    found: row.len(),
                    expected: header.len(),
                });
            }
        }
        let label_index = label.resolve(&header)?;
        Ok(RawTable {
            name: "table".to_string(),
            header,
            rows,
            label_index,
        })
    }

    /// Builds a table from an already numeric matrix; the label becomes a
    /// trailing column named `label`.
    pub fn from_numeric<L: ToString>(features: ArrayView2<'_, f64>, labels: &[L]) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        let d = features.ncols();
        let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
        header.push("label".to_string());
        let rows = features
            .rows()
            .into_iter()
            .zip(labels)
            .map(|(row, y)| {
                let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                cells.push(y.to_string());
                cells
            })
            .collect();
        Ok(RawTable {
            name: "table".to_string(),
            header,
            rows,
            label_index: d,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Used in report metadata; the file stem for tables read from disk.
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn label_index(&self) -> usize {
        self.label_index
    }

    pub fn label_name(&self) -> &str {
        &self.header[self.label_index]
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_columns(&self) -> usize {
        self.header.len()
    }
}

fn read_records(path: &Path, has_header: bool) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        // Blank lines show up as a single empty field.
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    if has_header {
        if records.is_empty() {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                message: "missing header row".into(),
            });
        }
        let header = records.remove(0);
        Ok((header, records))
    } else {
        let width = records.first().map_or(0, Vec::len);
        Ok(((0..width).map(|j| j.to_string()).collect(), records))
    }
}

/// Reads a comma-separated file. Without a header, columns are named by
/// their zero-based position.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn, has_header: bool) -> Result<RawTable> {
    let path = path.as_ref();
    let (header, rows) = read_records(path, has_header)?;
    let name = path.file_stem().map_or_else(|| "table".into(), |s| s.to_string_lossy().into_owned());
    Ok(RawTable::from_rows(header, rows, label)?.with_name(name))
}

/// Reads feature-only rows (no label column) for prediction.
pub fn load_unlabeled_csv(path: impl AsRef<Path>, has_header: bool) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let (header, rows) = read_records(path.as_ref(), has_header)?;
    for (r, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::RaggedRow {
                row: r,
                found: row.len(),
                expected: header.len(),
            });
        }
    }
    Ok((header, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Each encoded sample is scaled to unit Euclidean length.
    #[default]
    UnitNorm,
    /// Per numeric column: subtract the mean, divide by the population std.
    ZScore,
    /// Per numeric column: map [min, max] onto [0, 1].
    MinMax,
    None,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::UnitNorm => "unit-norm",
            Normalization::ZScore => "z-score",
            Normalization::MinMax => "min-max",
            Normalization::None => "none",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit-norm" | "l2" => Ok(Normalization::UnitNorm),
            "z-score" | "zscore" => Ok(Normalization::ZScore),
            "min-max" | "minmax" => Ok(Normalization::MinMax),
            "none" => Ok(Normalization::None),
            other => Err(Error::config(format!("unknown normalization {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Cell values treated as missing, compared after trimming.
    pub na_values: Vec<String>,
    pub normalization: Normalization,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            na_values: vec![String::new(), "NA".into(), "?".into()],
            normalization: Normalization::default(),
        }
    }
}

impl PreprocessConfig {
    fn is_missing(&self, cell: &str) -> bool {
        self.na_values.iter().any(|na| na == cell)
    }
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Rows that carry a label, with labels coded by first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRows {
    /// Indices into [`RawTable::rows`].
    pub rows: Vec<usize>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl LabeledRows {
    pub fn from_table(table: &RawTable, config: &PreprocessConfig) -> Result<Self> {
        let mut class_names: Vec<String> = Vec::new();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (r, row) in table.rows.iter().enumerate() {
            let cell = row[table.label_index].as_str();
            if config.is_missing(cell) {
                continue;
            }
            let code = match class_names.iter().position(|c| c == cell) {
                Some(c) => c,
                None => {
                    class_names.push(cell.to_string());
                    class_names.len() - 1
                }
            };
            rows.push(r);
            labels.push(code);
        }
        if rows.is_empty() {
            return Err(Error::NoLabeledSamples);
        }
        Ok(LabeledRows {
            rows,
            labels,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ColumnPlan {
    Numeric {
        column: String,
        mean: f64,
        /// Subtracted before dividing by `scale` (per-column schemes only).
        center: f64,
        scale: f64,
    },
    Categorical {
        column: String,
        levels: Vec<String>,
        /// Training frequency of each level; imputed for missing cells.
        frequencies: Vec<f64>,
    },
}

/// Fitted preprocessing statistics. Fit on training rows, apply anywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    plans: Vec<ColumnPlan>,
    normalization: Normalization,
    na_values: Vec<String>,
    feature_names: Vec<String>,
}

impl Preprocessor {
    /// Fits column plans over `rows` (indices into `table.rows()`).
    pub fn fit(table: &RawTable, rows: &[usize], config: &PreprocessConfig) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::NoLabeledSamples);
        }
        let mut plans = Vec::new();
        let mut feature_names = Vec::new();
        for (c, name) in table.header.iter().enumerate() {
            if c == table.label_index {
                continue;
            }
            let present: Vec<&str> = rows
                .iter()
                .map(|&r| table.rows[r][c].as_str())
                .filter(|cell| !config.is_missing(cell))
                .collect();
            let numeric: Option<Vec<f64>> = present.iter().map(|cell| parse_number(cell)).collect();
            match numeric {
                Some(values) => {
                    let mean = if values.is_empty() {
                        0.0
                    } else {
                        values.iter().sum::<f64>() / values.len() as f64
                    };
                    // Imputed cells sit at the mean, so they are included in
                    // the scale statistics.
                    let n_missing = rows.len() - values.len();
                    let (center, scale) = column_scale(&values, n_missing, mean, config.normalization);
                    plans.push(ColumnPlan::Numeric {
                        column: name.clone(),
                        mean,
                        center,
                        scale,
                    });
                    feature_names.push(name.clone());
                }
                None => {
                    let mut levels: Vec<String> = Vec::new();
                    let mut counts: Vec<usize> = Vec::new();
                    for cell in &present {
                        match levels.iter().position(|l| l == cell) {
                            Some(i) => counts[i] += 1,
                            None => {
                                levels.push(cell.to_string());
                                counts.push(1);
                            }
                        }
                    }
                    let total = present.len().max(1) as f64;
                    let frequencies = counts.iter().map(|&c| c as f64 / total).collect();
                    feature_names.extend(levels.iter().map(|l| format!("{name}={l}")));
                    plans.push(ColumnPlan::Categorical {
                        column: name.clone(),
                        levels,
                        frequencies,
                    });
                }
            }
        }
        Ok(Preprocessor {
            plans,
            normalization: config.normalization,
            na_values: config.na_values.clone(),
            feature_names,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Encodes rows whose cells are laid out according to `header`. Columns
    /// are matched by name, so the label column may be absent.
    pub fn transform<'a, I>(&self, header: &[String], rows: I) -> Result<Array2<f64>>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let positions = self
            .plans
            .iter()
            .map(|plan| {
                let column = match plan {
                    ColumnPlan::Numeric { column, .. } | ColumnPlan::Categorical { column, .. } => column,
                };
                header
                    .iter()
                    .position(|h| h == column)
                    .ok_or_else(|| Error::config(format!("input lacks feature column {column:?}")))
            })
            .collect::<Result<Vec<_>>>()?;

        let d = self.feature_names.len();
        let mut data = Vec::new();
        let mut n = 0;
        for row in rows {
            let start = data.len();
            for (plan, &pos) in self.plans.iter().zip(&positions) {
                let cell = row.get(pos).map(String::as_str).unwrap_or("");
                let missing = self.na_values.iter().any(|na| na == cell);
                match plan {
                    ColumnPlan::Numeric {
                        mean, center, scale, ..
                    } => {
                        let raw = if missing {
                            *mean
                        } else {
                            parse_number(cell).ok_or_else(|| {
                                Error::config(format!("non-numeric cell {cell:?} in a numeric column"))
                            })?
                        };
                        data.push(if *scale > 0.0 { (raw - center) / scale } else { 0.0 });
                    }
                    ColumnPlan::Categorical {
                        levels, frequencies, ..
                    } => {
                        if missing {
                            data.extend_from_slice(frequencies);
                        } else {
                            data.extend(levels.iter().map(|l| if l == cell { 1.0 } else { 0.0 }));
                        }
                    }
                }
            }
            if self.normalization == Normalization::UnitNorm {
                let row = &mut data[start..];
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|v| *v /= norm);
                }
            }
            n += 1;
        }
        Ok(Array2::from_shape_vec((n, d), data).expect("row width matches feature count"))
    }

    fn transform_table(&self, table: &RawTable, rows: &[usize]) -> Result<Array2<f64>> {
        self.transform(&table.header, rows.iter().map(|&r| table.rows[r].as_slice()))
    }
}

fn column_scale(values: &[f64], n_missing: usize, mean: f64, normalization: Normalization) -> (f64, f64) {
    match normalization {
        Normalization::ZScore => {
            let n = (values.len() + n_missing) as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            // Constant columns collapse to zero.
            if sd > f64::EPSILON * mean.abs().max(1.0) {
                (mean, sd)
            } else {
                (mean, 0.0)
            }
        }
        Normalization::MinMax => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if values.is_empty() || hi <= lo {
                (0.0, 0.0)
            } else {
                (lo, hi - lo)
            }
        }
        Normalization::UnitNorm | Normalization::None => (0.0, 1.0),
    }
}

/// Numeric design matrix with integer-coded labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    class_counts: Vec<usize>,
    class_names: Vec<String>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Classes are `0..class_names.len()`. A class may have zero members
    /// (e.g. in a fold subset), but every label must be in range.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::LengthMismatch {
                expected: features.ncols(),
                found: feature_names.len(),
            });
        }
        if let Some(((row, col), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        let m = class_names.len();
        let mut class_counts = vec![0; m];
        for &y in &labels {
            if y >= m {
                return Err(Error::config(format!("label {y} outside 0..{m}")));
            }
            class_counts[y] += 1;
        }
        Ok(Dataset {
            features,
            labels,
            class_counts,
            class_names,
            feature_names,
        })
    }

    /// Convenience for numeric inputs; classes are `0..=max(labels)`.
    pub fn from_parts(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let m = labels.iter().max().map_or(0, |&y| y + 1);
        let d = features.ncols();
        Dataset::new(
            features,
            labels,
            (0..m).map(|c| c.to_string()).collect(),
            (0..d).map(|j| format!("x{j}")).collect(),
        )
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn m(&self) -> usize {
        self.class_names.len()
    }

    /// Rows `ids` in the given order; the class vocabulary is kept.
    pub fn subset(&self, ids: &[usize]) -> Dataset {
        let features = self.features.select(ndarray::Axis(0), ids);
        let labels: Vec<usize> = ids.iter().map(|&i| self.labels[i]).collect();
        let mut class_counts = vec![0; self.m()];
        for &y in &labels {
            class_counts[y] += 1;
        }
        Dataset {
            features,
            labels,
            class_counts,
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Fits a preprocessor on the labeled rows `subset` and encodes them.
pub fn preprocess_rows(
    table: &RawTable,
    labeled: &LabeledRows,
    subset: &[usize],
    config: &PreprocessConfig,
) -> Result<(Preprocessor, Dataset)> {
    let rows: Vec<usize> = subset.iter().map(|&i| labeled.rows[i]).collect();
    let pre = Preprocessor::fit(table, &rows, config)?;
    let features = pre.transform_table(table, &rows)?;
    let labels = subset.iter().map(|&i| labeled.labels[i]).collect();
    let ds = Dataset::new(features, labels, labeled.class_names.clone(), pre.feature_names.clone())?;
    Ok((pre, ds))
}

/// Encodes labeled rows `subset` with an already fitted preprocessor.
pub fn apply_rows(
    pre: &Preprocessor,
    table: &RawTable,
    labeled: &LabeledRows,
    subset: &[usize],
) -> Result<Dataset> {
    let rows: Vec<usize> = subset.iter().map(|&i| labeled.rows[i]).collect();
    let features = pre.transform_table(table, &rows)?;
    let labels = subset.iter().map(|&i| labeled.labels[i]).collect();
    Dataset::new(features, labels, labeled.class_names.clone(), pre.feature_names.clone())
}

/// Full-table preprocessing, also returning the fitted statistics.
pub fn preprocess_with(raw: &RawTable, config: &PreprocessConfig) -> Result<(Preprocessor, Dataset)> {
    let labeled = LabeledRows::from_table(raw, config)?;
    let all: Vec<usize> = (0..labeled.len()).collect();
    let (pre, ds) = preprocess_rows(raw, &labeled, &all, config)?;
    if let Some(c) = ds.class_counts().iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass(ds.class_names()[c].clone()));
    }
    Ok((pre, ds))
}

pub fn preprocess(raw: &RawTable, config: &PreprocessConfig) -> Result<Dataset> {
    preprocess_with(raw, config).map(|(_, ds)| ds)
}
