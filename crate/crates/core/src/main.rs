use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use panng::dataset::{load_csv, load_unlabeled_csv, LabelColumn, Normalization, PreprocessConfig};
use panng::fitness::LearnConfig;
use panng::harness::{
    self, cross_validate, emit_report, eta_sweep, export_model, load_model, train_model, write_json,
    BorderlineReport, CVConfig, EtaMode,
};
use panng::{Error, GraphVariant, Result};

#[derive(Parser)]
#[command(name = "panng", version, about = "Density-aware adaptive-k neighbor graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stratified cross-validation of paNNG against the plain kNN graph.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
    /// Cross-validated accuracy at each fixed eta.
    SweepEta {
        #[command(flatten)]
        common: Common,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, default_value = "0:1:0.1")]
        grid: String,
        #[arg(long, default_value = "sweep.json")]
        out: PathBuf,
    },
    /// Accuracy on the lowest-density samples.
    Borderline {
        #[command(flatten)]
        common: Common,
        /// Percent quantiles, `1..20` or a comma-separated list.
        #[arg(long, default_value = "1..20")]
        quantiles: String,
        #[arg(long, default_value = "borderline.json")]
        out: PathBuf,
    },
    /// Fits a graph on every labeled row and writes an edge list plus a
    /// JSON sidecar with the same stem.
    BuildGraph {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "graph.tsv")]
        out: PathBuf,
    },
    /// Classifies rows of a CSV with a graph written by `build-graph`.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        no_header: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    data: PathBuf,
    /// Label column name or zero-based index.
    #[arg(long, default_value = "label")]
    label: String,
    #[arg(long)]
    no_header: bool,
    /// Comma-separated cell values treated as missing.
    #[arg(long, default_value = ",NA,?")]
    na_values: String,
    #[arg(long, default_value_t = Normalization::UnitNorm)]
    normalize: Normalization,
    #[arg(long, default_value_t = 10)]
    kappa: usize,
    /// `auto` or a value in [0, 1].
    #[arg(long, default_value = "auto")]
    eta: String,
    #[arg(long, default_value_t = GraphVariant::Plain)]
    variant: GraphVariant,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_noise: bool,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-2)]
    threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    bandwidth: f64,
    #[arg(long, default_value_t = 10)]
    folds: usize,
}

impl Common {
    fn config(&self) -> Result<CVConfig> {
        let eta = match self.eta.as_str() {
            "auto" => EtaMode::Auto,
            v => EtaMode::Fixed(v.parse().map_err(|_| Error::InvalidConfig(format!("bad eta {v:?}")))?),
        };
        Ok(CVConfig {
            folds: self.folds,
            seed: self.seed,
            kappa: self.kappa,
            eta,
            variant: self.variant,
            noise: !self.no_noise,
            learn: LearnConfig {
                threshold: self.threshold,
                learning_rate: self.learning_rate,
                max_iterations: self.max_iters,
                bandwidth: self.bandwidth,
                ..LearnConfig::default()
            },
            preprocess: PreprocessConfig {
                na_values: self.na_values.split(',').map(|s| s.trim().to_string()).collect(),
                normalization: self.normalize,
            },
            ..CVConfig::default()
        })
    }

    fn table(&self) -> Result<panng::RawTable> {
        load_csv(&self.data, &LabelColumn::Name(self.label.clone()), !self.no_header)
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad number {v:?}")))
        })
        .collect()
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return parse_list(s);
    }
    let [start, stop, step] = [parts[0], parts[1], parts[2]].map(|p| p.trim().parse::<f64>());
    let (Ok(start), Ok(stop), Ok(step)) = (start, stop, step) else {
        return Err(Error::InvalidConfig(format!("bad grid {s:?}")));
    };
    if step <= 0.0 || stop < start {
        return Err(Error::InvalidConfig(format!("bad grid {s:?}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    // Rounded so 0.1 * 3 prints as 0.3.
    Ok((0..=count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn parse_quantiles(s: &str) -> Result<Vec<f64>> {
    if let Some((lo, hi)) = s.split_once("..") {
        let bad = || Error::InvalidConfig(format!("bad quantile range {s:?}"));
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
        return Ok((lo..=hi).map(f64::from).collect());
    }
    parse_list(s)
}

fn print_written(path: &Path) {
    println!("wrote {}", path.display());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eval { common, out } => {
            let report = cross_validate(&common.table()?, &common.config()?)?;
            emit_report(&report, &out)?;
            println!(
                "panng {:.4}  knng {:.4}  gain {}",
                report.mean_accuracy,
                report.baseline_accuracy,
                report.gain.map_or("n/a".into(), |g| format!("{g:+.4}"))
            );
            print_written(&out);
        }
        Command::SweepEta { common, grid, out } => {
            let report = eta_sweep(&common.table()?, &common.config()?, &parse_grid(&grid)?)?;
            write_json(&report, &out)?;
            for p in &report.points {
                println!("eta {:.2}  accuracy {:.4}", p.eta, p.mean_accuracy);
            }
            print_written(&out);
        }
        Command::Borderline { common, quantiles, out } => {
            let table = common.table()?;
            let config = CVConfig {
                quantiles: parse_quantiles(&quantiles)?,
                ..common.config()?
            };
            let report = cross_validate(&table, &config)?;
            for e in &report.borderline {
                let fmt = |a: Option<f64>| a.map_or("n/a".into(), |a| format!("{a:.4}"));
                println!(
                    "{:>5}%  n={:<4}  panng {}  knng {}",
                    e.quantile,
                    e.size,
                    fmt(e.panng_accuracy),
                    fmt(e.knng_accuracy)
                );
            }
            let out_report = BorderlineReport {
                schema_version: harness::SCHEMA_VERSION,
                metadata: report.metadata,
                entries: report.borderline,
            };
            write_json(&out_report, &out)?;
            print_written(&out);
        }
        Command::BuildGraph { common, out } => {
            let model = train_model(&common.table()?, &common.config()?)?;
            let sidecar = export_model(&model, &out)?;
            println!(
                "nodes {}  edges {}  eta {}",
                model.graph.n(),
                model.graph.adjacency.count_ones(),
                model.k.eta()
            );
            print_written(&out);
            print_written(&sidecar);
        }
        Command::Predict { model, input, no_header } => {
            let (clf, file) = load_model(&model)?;
            let (header, rows) = load_unlabeled_csv(&input, !no_header)?;
            let x = file.preprocessor.transform(&header, rows.iter().map(Vec::as_slice))?;
            for y in clf.predict_batch(x.view())? {
                println!("{}", file.class_names[y]);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
