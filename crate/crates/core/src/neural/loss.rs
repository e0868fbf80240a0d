use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossKind {
    /// Mean squared error averaged over output elements.
    Mse,
    /// Softmax followed by categorical cross-entropy against a class index.
    SoftmaxCrossEntropy,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Loss value and gradient with respect to the network output.
///
/// For [`LossKind::SoftmaxCrossEntropy`] `target` holds a single class index.
pub fn loss_and_grad(output: &Tensor, target: &[f64], kind: LossKind) -> (f64, Tensor) {
    match kind {
        LossKind::Mse => {
            let n = output.data.len() as f64;
            let mut loss = 0.0;
            let grad = output
                .data
                .iter()
                .zip(target)
                .map(|(y, t)| {
                    loss += (y - t) * (y - t);
                    2.0 * (y - t) / n
                })
                .collect();
            (
                loss / n,
                Tensor {
                    shape: output.shape,
                    data: grad,
                },
            )
        }
        LossKind::SoftmaxCrossEntropy => {
            let class = target[0] as usize;
            let mut p = softmax(&output.data);
            let loss = -p[class].max(f64::MIN_POSITIVE).ln();
            p[class] -= 1.0;
            (
                loss,
                Tensor {
                    shape: output.shape,
                    data: p,
                },
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_k() {
        let (l, g) = loss_and_grad(&Tensor::flat(vec![0.0; 4]), &[2.0], LossKind::SoftmaxCrossEntropy);
        assert!((l - 4f64.ln()).abs() < 1e-12);
        assert!((g.data[2] + 0.75).abs() < 1e-12);
        assert!((g.data.iter().sum::<f64>()).abs() < 1e-12);
    }
}
