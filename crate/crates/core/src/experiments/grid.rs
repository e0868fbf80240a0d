use std::fmt::Write as _;
use std::time::Instant;

use ndarray::{s, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::split::{split_dataset, Split, SplitSpec};
use crate::latent::fit_pca;
use crate::neural::{train_mlp_head, train_stacked_ae, AeKind, ArchId, StackedAeSpec, Task, TrainConfig};
use crate::{Error, Result};

pub const COMPONENT_COUNTS: [usize; 5] = [4, 8, 16, 32, 64];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reducer {
    PcaLin,
    AeLin,
    AeNon,
}

impl Reducer {
    pub const ALL: [Reducer; 3] = [Reducer::PcaLin, Reducer::AeLin, Reducer::AeNon];

    pub fn name(&self) -> &'static str {
        match self {
            Reducer::PcaLin => "pca_lin",
            Reducer::AeLin => "ae_lin",
            Reducer::AeNon => "ae_non",
        }
    }
}

impl std::fmt::Display for Reducer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub head_id: ArchId,
    pub task: Task,
    pub seed: u64,
    pub split: SplitSpec,
    pub head: TrainConfig,
    pub autoencoder: TrainConfig,
    pub components: Vec<usize>,
    /// Run grid cells on the rayon pool; every cell is deterministic either way.
    pub parallel: bool,
}

impl GridConfig {
    pub fn new(head_id: ArchId, task: Task, seed: u64) -> Self {
        let head = TrainConfig {
            seed,
            epochs: 200,
            ..TrainConfig::default()
        };
        let autoencoder = TrainConfig {
            seed,
            learning_rate: 1e-2,
            epochs: 100,
            patience: None,
            ..TrainConfig::default()
        };
        GridConfig {
            head_id,
            task,
            seed,
            split: SplitSpec::with_seed(seed),
            head,
            autoencoder,
            components: COMPONENT_COUNTS.to_vec(),
            parallel: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub reduce_seconds: f64,
    pub head_seconds: f64,
}

/// One cell of the reducer × component-count grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub reducer: Reducer,
    pub n_components: usize,
    pub task: Task,
    /// PCA: discarded variance on the training rows (standardized scale).
    /// Autoencoders: final training reconstruction loss.
    pub reduction_loss: f64,
    pub head_train_loss: f64,
    pub epochs_run: usize,
    pub train: Option<Metrics>,
    pub val: Option<Metrics>,
    pub test: Metrics,
    pub seed: u64,
    pub timings: Timings,
}

impl ExperimentResult {
    /// Test R² (regression) or test accuracy (classification).
    pub fn score(&self) -> f64 {
        self.test.score()
    }

    /// Copy with timings zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        ExperimentResult {
            timings: Timings::default(),
            ..self.clone()
        }
    }
}

/// Reduces `z` with every reducer at every component count, trains a head on
/// the reduced features and scores it on the test rows.
pub fn run_grid(z: ArrayView2<f64>, targets: &[f64], config: &GridConfig) -> Result<Vec<ExperimentResult>> {
    let split = split_dataset(z.nrows(), &config.split)?;
    run_grid_with_split(z, targets, &split, config)
}

pub fn run_grid_with_split(
    z: ArrayView2<f64>,
    targets: &[f64],
    split: &Split,
    config: &GridConfig,
) -> Result<Vec<ExperimentResult>> {
    let (n, d) = z.dim();
    if targets.len() != n {
        return Err(Error::shape(format!("{n} targets"), targets.len()));
    }
    split.check(n)?;
    if split.test.is_empty() {
        return Err(Error::invalid("grid needs a non-empty test split"));
    }
    let mut comps = config.components.clone();
    comps.sort_unstable();
    comps.dedup();
    if let Some(&bad) = comps.iter().find(|&&c| c == 0 || c > d) {
        return Err(Error::invalid(format!("component count {bad} outside 1..={d}")));
    }
    let train_z = z.select(Axis(0), &split.train);

    // PCA is fitted once; each count is a truncation of the same rotation.
    let start = Instant::now();
    let pca = fit_pca(train_z.view())?;
    let pca_v = pca.project(z)?;
    let pca_seconds = start.elapsed().as_secs_f64();
    let total_var: f64 = pca.eigenvalues.sum();

    let cells: Vec<(Reducer, usize)> = Reducer::ALL
        .iter()
        .flat_map(|&r| comps.iter().map(move |&c| (r, c)))
        .collect();

    let run_cell = |&(reducer, k): &(Reducer, usize)| -> Result<ExperimentResult> {
        let start = Instant::now();
        let (features, reduction_loss): (Array2<f64>, f64) = match reducer {
            Reducer::PcaLin => {
                let kept: f64 = pca.eigenvalues.slice(s![..k]).sum();
                (pca_v.slice(s![.., ..k]).to_owned(), (total_var - kept).max(0.0))
            }
            Reducer::AeLin | Reducer::AeNon => {
                let kind = if reducer == Reducer::AeLin { AeKind::Linear } else { AeKind::Nonlinear };
                let spec = StackedAeSpec::for_head(kind, k, config.head_id);
                let (ae, history) = train_stacked_ae(train_z.view(), spec, &config.autoencoder)?;
                (ae.encode(z)?, history.last().copied().unwrap_or(f64::NAN))
            }
        };
        let reduce_seconds = start.elapsed().as_secs_f64()
            + if reducer == Reducer::PcaLin { pca_seconds } else { 0.0 };
        let start = Instant::now();
        let (_, metrics) = train_mlp_head(
            features.view(),
            targets,
            config.task,
            config.head_id,
            split,
            &config.head,
        )?;
        let test = metrics.test.ok_or_else(|| {
            Error::invalid(format!("{reducer} N={k}: test metrics undefined"))
        })?;
        Ok(ExperimentResult {
            reducer,
            n_components: k,
            task: config.task,
            reduction_loss,
            head_train_loss: metrics.loss_history.last().copied().unwrap_or(f64::NAN),
            epochs_run: metrics.epochs_run,
            train: metrics.train,
            val: metrics.val,
            test,
            seed: config.seed,
            timings: Timings {
                reduce_seconds,
                head_seconds: start.elapsed().as_secs_f64(),
            },
        })
    };

    if config.parallel {
        cells.par_iter().map(run_cell).collect()
    } else {
        cells.iter().map(run_cell).collect()
    }
}

fn score_label(task: Task) -> &'static str {
    match task {
        Task::Regression => "test R2",
        Task::Classification { .. } => "test accuracy",
    }
}

/// Text table: one row per component count, one column per reducer.
pub fn render_table(results: &[ExperimentResult]) -> String {
    let mut counts: Vec<usize> = results.iter().map(|r| r.n_components).collect();
    counts.sort_unstable();
    counts.dedup();
    let label = results.first().map(|r| score_label(r.task)).unwrap_or("score");
    let mut out = String::new();
    let _ = writeln!(out, "{label}");
    let _ = write!(out, "{:>6}", "N");
    for r in Reducer::ALL {
        let _ = write!(out, " {:>10}", r.name());
    }
    out.push('\n');
    for n in counts {
        let _ = write!(out, "{n:>6}");
        for red in Reducer::ALL {
            match results.iter().find(|r| r.reducer == red && r.n_components == n) {
                Some(r) => {
                    let _ = write!(out, " {:>9.2}%", r.score() * 100.0);
                }
                None => {
                    let _ = write!(out, " {:>10}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct CsvRow {
    reducer: Reducer,
    n_components: usize,
    task: String,
    test_loss: f64,
    test_score: f64,
    train_score: Option<f64>,
    val_score: Option<f64>,
    reduction_loss: f64,
    head_train_loss: f64,
    epochs_run: usize,
    seed: u64,
    reduce_seconds: f64,
    head_seconds: f64,
}

pub fn write_results_csv<W: std::io::Write>(results: &[ExperimentResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in results {
        w.serialize(CsvRow {
            reducer: r.reducer,
            n_components: r.n_components,
            task: match r.task {
                Task::Regression => "regression".into(),
                Task::Classification { num_classes } => format!("classification:{num_classes}"),
            },
            test_loss: r.test.loss(),
            test_score: r.test.score(),
            train_score: r.train.map(|m| m.score()),
            val_score: r.val.map(|m| m.score()),
            reduction_loss: r.reduction_loss,
            head_train_loss: r.head_train_loss,
            epochs_run: r.epochs_run,
            seed: r.seed,
            reduce_seconds: r.timings.reduce_seconds,
            head_seconds: r.timings.head_seconds,
        })?;
    }
    w.flush()?;
    Ok(())
}
