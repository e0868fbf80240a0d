//! Prediction heads mapping reduced latent components to urban statistics.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cae::ArchId;
use super::layers::LayerSpec;
use super::loss::{loss_and_grad, softmax, LossKind};
use super::network::{scale_grads, Sequential};
use super::tensor::{Shape, Tensor};
use super::train::{accumulate, sample_rng, Adam, EpochShuffler, TrainConfig};
use crate::experiments::{compute_metrics, Metrics, Split};
use crate::latent::{standardize_value, STD_FLOOR};
use crate::{Error, Result};

pub const HEAD_DROPOUT: f64 = 0.2;
pub const HEAD_L1: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification { num_classes: usize },
}

impl Task {
    pub fn outputs(&self) -> usize {
        match self {
            Task::Regression => 1,
            Task::Classification { num_classes } => *num_classes,
        }
    }

    fn loss_kind(&self) -> LossKind {
        match self {
            Task::Regression => LossKind::Mse,
            Task::Classification { .. } => LossKind::SoftmaxCrossEntropy,
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    /// Parses `regression` or `classification:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "regression" {
            return Ok(Task::Regression);
        }
        if let Some(k) = s.strip_prefix("classification:") {
            let num_classes = k
                .parse()
                .map_err(|_| Error::invalid(format!("bad class count in '{s}'")))?;
            if num_classes < 2 {
                return Err(Error::invalid("classification needs at least 2 classes"));
            }
            return Ok(Task::Classification { num_classes });
        }
        Err(Error::invalid(format!(
            "unknown task '{s}' (expected regression or classification:<k>)"
        )))
    }
}

/// Hidden widths of the head attached to each case study.
pub fn head_widths(head: ArchId) -> Vec<usize> {
    match head {
        ArchId::Streetview => vec![64, 32, 16],
        ArchId::Streetnet => vec![32, 16],
    }
}

/// Dense-ReLU stack, dropout before the final layer, linear output.
pub fn head_layers(inputs: usize, widths: &[usize], dropout: f64, outputs: usize) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    let mut prev = inputs;
    for &w in widths {
        specs.push(LayerSpec::Dense {
            inputs: prev,
            outputs: w,
        });
        specs.push(LayerSpec::Relu);
        prev = w;
    }
    if dropout > 0.0 {
        specs.push(LayerSpec::Dropout { rate: dropout });
    }
    specs.push(LayerSpec::Dense {
        inputs: prev,
        outputs,
    });
    specs
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub head_id: ArchId,
    pub layer_widths: Vec<usize>,
    pub task: Task,
    pub dropout_rate: f64,
    pub l1_coefficient: f64,
    pub net: Sequential,
    /// Feature standardisation fitted on the training rows.
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    /// Regression target standardisation (identity for classification).
    pub target_mean: f64,
    pub target_std: f64,
}

/// Metrics on each split; `None` where the split is empty or a metric is undefined.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub train: Option<Metrics>,
    pub val: Option<Metrics>,
    pub test: Option<Metrics>,
    pub epochs_run: usize,
    pub loss_history: Vec<f64>,
}

impl MlpModel {
    pub fn inputs(&self) -> usize {
        self.feature_mean.len()
    }

    fn standardize_row(&self, row: impl Iterator<Item = f64>) -> Tensor {
        Tensor::flat(
            row.zip(self.feature_mean.iter().zip(&self.feature_std))
                .map(|(v, (m, s))| standardize_value(v, *m, *s))
                .collect(),
        )
    }

    /// Regression: `n × 1` predictions in target units. Classification: `n × k` probabilities.
    pub fn predict(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.inputs() {
            return Err(Error::shape(
                format!("{} feature columns", self.inputs()),
                features.ncols(),
            ));
        }
        let k = self.task.outputs();
        let mut out = Array2::zeros((features.nrows(), k));
        for (i, row) in features.rows().into_iter().enumerate() {
            let y = self.net.forward(&self.standardize_row(row.iter().copied()));
            match self.task {
                Task::Regression => out[[i, 0]] = self.unstandardize_target(y.data[0]),
                Task::Classification { .. } => {
                    for (j, p) in softmax(&y.data).into_iter().enumerate() {
                        out[[i, j]] = p;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Inverse of the target standardisation; a constant training target is
    /// predicted as that constant.
    fn unstandardize_target(&self, v: f64) -> f64 {
        if self.target_std <= STD_FLOOR {
            self.target_mean
        } else {
            v * self.target_std + self.target_mean
        }
    }

    fn final_dense(&self) -> usize {
        self.net.layers.len() - 1
    }

    fn l1_penalty(&self) -> f64 {
        let last = &self.net.layers[self.final_dense()];
        let LayerSpec::Dense { inputs, outputs } = last.spec else {
            unreachable!("head ends with a dense layer")
        };
        self.l1_coefficient * last.params[..inputs * outputs].iter().map(|w| w.abs()).sum::<f64>()
    }

    /// Data loss on the standardized scale, eval mode.
    fn data_loss(&self, rows: &[usize], x: &[Tensor], t: &[f64]) -> f64 {
        let kind = self.task.loss_kind();
        rows.iter()
            .map(|&i| loss_and_grad(&self.net.forward(&x[i]), &[t[i]], kind).0)
            .sum::<f64>()
            / rows.len().max(1) as f64
    }
}

/// Subgradient of `|w|`, zero at the kink.
pub(crate) fn l1_subgradient(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn column_stats(features: ArrayView2<f64>, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let d = features.ncols();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for &r in rows {
        for (m, v) in mean.iter_mut().zip(features.row(r)) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; d];
    for &r in rows {
        for ((s, v), m) in std.iter_mut().zip(features.row(r)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut std {
        *s = if rows.len() > 1 {
            (*s / (n - 1.0)).sqrt().max(STD_FLOOR)
        } else {
            1.0
        };
    }
    (mean, std)
}

pub(crate) fn check_targets(targets: &[f64], task: Task) -> Result<()> {
    if let Some(bad) = targets.iter().find(|t| !t.is_finite()) {
        return Err(Error::invalid(format!("non-finite target {bad}")));
    }
    if let Task::Classification { num_classes } = task {
        if let Some(bad) = targets
            .iter()
            .find(|&&t| t < 0.0 || t.fract() != 0.0 || t as usize >= num_classes)
        {
            return Err(Error::invalid(format!(
                "class label {bad} outside [0, {num_classes})"
            )));
        }
    }
    Ok(())
}

/// Trains a prediction head on `split.train`, early-stopping on `split.val`,
/// and reports metrics on every split.
pub fn train_mlp_head(
    features: ArrayView2<f64>,
    targets: &[f64],
    task: Task,
    head_id: ArchId,
    split: &Split,
    config: &TrainConfig,
) -> Result<(MlpModel, SplitMetrics)> {
    config.validate()?;
    if features.nrows() != targets.len() {
        return Err(Error::shape(
            format!("{} targets", features.nrows()),
            targets.len(),
        ));
    }
    check_targets(targets, task)?;
    split.check(features.nrows())?;
    if split.train.is_empty() {
        return Err(Error::invalid("empty training split"));
    }

    let widths = head_widths(head_id);
    let (feature_mean, feature_std) = column_stats(features, &split.train);
    let (target_mean, target_std) = match task {
        Task::Regression => {
            let n = split.train.len() as f64;
            let m = split.train.iter().map(|&i| targets[i]).sum::<f64>() / n;
            let var = split
                .train
                .iter()
                .map(|&i| (targets[i] - m).powi(2))
                .sum::<f64>()
                / (n - 1.0).max(1.0);
            (m, var.sqrt().max(STD_FLOOR))
        }
        Task::Classification { .. } => (0.0, 1.0),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let net = Sequential::new(
        Shape::flat(features.ncols()),
        head_layers(features.ncols(), &widths, HEAD_DROPOUT, task.outputs()),
        &mut rng,
    )?;
    let mut model = MlpModel {
        head_id,
        layer_widths: widths,
        task,
        dropout_rate: HEAD_DROPOUT,
        l1_coefficient: HEAD_L1,
        net,
        feature_mean,
        feature_std,
        target_mean,
        target_std,
    };

    let x: Vec<Tensor> = features
        .rows()
        .into_iter()
        .map(|r| model.standardize_row(r.iter().copied()))
        .collect();
    let t: Vec<f64> = match task {
        Task::Regression => targets
            .iter()
            .map(|&v| standardize_value(v, model.target_mean, model.target_std))
            .collect(),
        Task::Classification { .. } => targets.to_vec(),
    };

    let kind = task.loss_kind();
    let template = model.net.zero_grads();
    let mut adam = Adam::new(config, &template);
    let mut shuffler = EpochShuffler::new(split.train.len(), config.seed);
    let final_layer = model.final_dense();
    let mut best: Option<(f64, Sequential)> = None;
    let mut since_best = 0;
    let mut history = Vec::new();
    let mut epochs_run = 0;

    for epoch in 0..config.epochs {
        epochs_run = epoch + 1;
        let order: Vec<usize> = shuffler.next_epoch().iter().map(|&j| split.train[j]).collect();
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (mut grads, losses) = accumulate(batch, config.deterministic, &template, |i, g| {
                let mut r = sample_rng(config.seed, epoch, i);
                let trace = model.net.forward_trace(&x[i], Some(&mut r));
                let (loss, gy) = loss_and_grad(trace.output(), &[t[i]], kind);
                model.net.backward(&trace, gy, g, false);
                loss
            });
            epoch_loss += losses.iter().map(|(_, l)| l).sum::<f64>();
            scale_grads(&mut grads, 1.0 / batch.len() as f64);
            if let LayerSpec::Dense { inputs, outputs } = model.net.layers[final_layer].spec {
                let w = &model.net.layers[final_layer].params[..inputs * outputs];
                for (g, w) in grads[final_layer].iter_mut().zip(w) {
                    *g += model.l1_coefficient * l1_subgradient(*w);
                }
            }
            adam.step(model.net.params_mut(), &grads);
        }
        let mean = epoch_loss / split.train.len() as f64 + model.l1_penalty();
        if !mean.is_finite() || !model.net.all_finite() {
            return Err(Error::Divergence { epoch, loss: mean });
        }
        history.push(mean);

        if let (Some(patience), false) = (config.patience, split.val.is_empty()) {
            let val = model.data_loss(&split.val, &x, &t);
            match &best {
                Some((b, _)) if val >= *b => {
                    since_best += 1;
                    if since_best >= patience {
                        break;
                    }
                }
                _ => {
                    best = Some((val, model.net.clone()));
                    since_best = 0;
                }
            }
        }
    }
    if let Some((_, net)) = best {
        model.net = net;
    }

    let eval = |rows: &[usize]| -> Option<Metrics> {
        if rows.is_empty() {
            return None;
        }
        let sub = features.select(ndarray::Axis(0), rows);
        let pred = model.predict(sub.view()).ok()?;
        let tgt: Vec<f64> = rows.iter().map(|&i| targets[i]).collect();
        compute_metrics(pred.view(), &tgt, task).ok()
    };
    let metrics = SplitMetrics {
        train: eval(&split.train),
        val: eval(&split.val),
        test: eval(&split.test),
        epochs_run,
        loss_history: history,
    };
    Ok((model, metrics))
}
