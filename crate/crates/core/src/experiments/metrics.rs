use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::neural::Task;
use crate::{Error, Result};

/// Probabilities are clamped here before taking the log.
const PROB_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Metrics {
    Regression { mse: f64, r2: f64 },
    Classification { cross_entropy: f64, accuracy: f64 },
}

impl Metrics {
    /// R² for regression, accuracy for classification.
    pub fn score(&self) -> f64 {
        match self {
            Metrics::Regression { r2, .. } => *r2,
            Metrics::Classification { accuracy, .. } => *accuracy,
        }
    }

    /// MSE for regression, cross-entropy for classification.
    pub fn loss(&self) -> f64 {
        match self {
            Metrics::Regression { mse, .. } => *mse,
            Metrics::Classification { cross_entropy, .. } => *cross_entropy,
        }
    }
}

/// Regression: `predictions` is `n × 1`. Classification: `n × k` class
/// probabilities, targets are class indices.
pub fn compute_metrics(predictions: ArrayView2<f64>, targets: &[f64], task: Task) -> Result<Metrics> {
    let n = targets.len();
    if n == 0 {
        return Err(Error::invalid("no samples to evaluate"));
    }
    if predictions.nrows() != n {
        return Err(Error::shape(format!("{n} prediction rows"), predictions.nrows()));
    }
    if predictions.ncols() != task.outputs() {
        return Err(Error::shape(
            format!("{} prediction columns", task.outputs()),
            predictions.ncols(),
        ));
    }
    match task {
        Task::Regression => {
            let mean = targets.iter().sum::<f64>() / n as f64;
            let ss_tot: f64 = targets.iter().map(|t| (t - mean).powi(2)).sum();
            let ss_res: f64 = predictions
                .column(0)
                .iter()
                .zip(targets)
                .map(|(p, t)| (p - t).powi(2))
                .sum();
            if ss_tot == 0.0 {
                return Err(Error::ZeroVariance("R² is undefined for constant targets".into()));
            }
            Ok(Metrics::Regression {
                mse: ss_res / n as f64,
                r2: 1.0 - ss_res / ss_tot,
            })
        }
        Task::Classification { num_classes } => {
            let mut ce = 0.0;
            let mut correct = 0usize;
            for (row, &t) in predictions.rows().into_iter().zip(targets) {
                if t < 0.0 || t.fract() != 0.0 || t as usize >= num_classes {
                    return Err(Error::invalid(format!("class label {t} outside [0, {num_classes})")));
                }
                let label = t as usize;
                ce -= row[label].max(PROB_FLOOR).ln();
                let argmax = (0..num_classes)
                    .fold(0, |best, j| if row[j] > row[best] { j } else { best });
                correct += usize::from(argmax == label);
            }
            Ok(Metrics::Classification {
                cross_entropy: ce / n as f64,
                accuracy: correct as f64 / n as f64,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn perfect_and_mean_predictions() {
        let t = [1.0, 2.0, 4.0];
        let p = Array2::from_shape_vec((3, 1), t.to_vec()).unwrap();
        assert_eq!(
            compute_metrics(p.view(), &t, Task::Regression).unwrap(),
            Metrics::Regression { mse: 0.0, r2: 1.0 }
        );
        let mean = Array2::from_elem((3, 1), 7.0 / 3.0);
        let m = compute_metrics(mean.view(), &t, Task::Regression).unwrap();
        assert!(m.score().abs() < 1e-15);
    }

    #[test]
    fn hand_computed_five_samples() {
        // targets 1..5, mean 3, SS_tot 10; residuals .5 -.5 0 1 -1, SS_res 2.5
        let t = [1.0, 2.0, 3.0, 4.0, 5.0];
        let p = array![[0.5], [2.5], [3.0], [3.0], [6.0]];
        let m = compute_metrics(p.view(), &t, Task::Regression).unwrap();
        assert_eq!(m, Metrics::Regression { mse: 0.5, r2: 0.75 });
    }

    #[test]
    fn classification_accuracy_and_ce() {
        let p = array![[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.5, 0.25, 0.25], [1.0, 0.0, 0.0]];
        let t = [0.0, 1.0, 2.0, 0.0];
        let m = compute_metrics(p.view(), &t, Task::Classification { num_classes: 3 }).unwrap();
        let Metrics::Classification { cross_entropy, accuracy } = m else { panic!() };
        assert_eq!(accuracy, 0.75);
        let expect = (2.0 * 0.5f64.ln().abs() + 0.25f64.ln().abs()) / 4.0;
        assert!((cross_entropy - expect).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let p = Array2::zeros((3, 1));
        assert!(matches!(
            compute_metrics(p.view(), &[2.0; 3], Task::Regression),
            Err(Error::ZeroVariance(_))
        ));
        assert!(compute_metrics(p.view(), &[1.0, 2.0], Task::Regression).is_err());
        assert!(compute_metrics(p.view(), &[], Task::Regression).is_err());
    }
}
