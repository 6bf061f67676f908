#![allow(dead_code)]

use std::path::PathBuf;

use panng::dataset::{load_csv, LabelColumn, RawTable};

pub fn data_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(file)
}

/// `(file, label column)` for every bundled dataset.
pub const BUNDLED: [(&str, &str); 2] = [("wdbc.csv", "diagnosis"), ("wine.csv", "class")];

pub fn bundled(file: &str) -> RawTable {
    let label = BUNDLED.iter().find(|(f, _)| *f == file).expect("bundled file").1;
    load_csv(data_path(file), &LabelColumn::Name(label.into()), true).expect("bundled data loads")
}

/// The acceptance construction: 260 vs 140 samples, 2-D, means 2 apart.
pub fn synthetic_table(seed: u64) -> RawTable {
    panng::synthetic::two_gaussians_table(260, 140, 2, 2.0, seed).unwrap()
}

/// 17 points on a line: seven blue (0) then ten red (1). Node 7 is the
/// red sample that sits next to the dense blue cluster.
pub fn fig1_points() -> (Vec<f64>, Vec<usize>) {
    let blue = [4.0, 7.5, 8.6, 8.7, 8.8, 8.9, 9.0];
    let red = [10.0, 10.5, 10.9, 11.6, 11.8, 13.0, 13.2, 13.3, 13.4, 13.5];
    let x: Vec<f64> = blue.iter().chain(&red).copied().collect();
    let y: Vec<usize> = (0..17).map(|i| usize::from(i >= 7)).collect();
    (x, y)
}

pub const FIG1_BORDER: usize = 7;
