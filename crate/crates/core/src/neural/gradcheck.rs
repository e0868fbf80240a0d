//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::cae::CaeModel;
use super::layers::LayerSpec;
use super::loss::{loss_and_grad, LossKind};
use super::mlp::l1_subgradient;
use super::network::Sequential;
use super::tensor::Tensor;

/// A scalar loss over a flat parameter vector with an analytic gradient.
pub trait Objective {
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]);
    fn loss(&self) -> f64;
    fn loss_and_grad(&self) -> (f64, Vec<f64>);
}

/// Floor on the relative-error denominator so near-zero gradients compare
/// in absolute terms.
const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(REL_FLOOR)
}

/// Compares the analytic gradient against `(L(θ+ε) − L(θ−ε)) / 2ε` for every
/// parameter and returns the largest relative error.
pub fn gradient_check<O: Objective + ?Sized>(objective: &mut O, epsilon: f64) -> f64 {
    let n = objective.params().len();
    check_indices(objective, epsilon, 0..n)
}

/// Like [`gradient_check`] but on at most `max_params` randomly chosen parameters.
pub fn gradient_check_sampled<O: Objective + ?Sized>(
    objective: &mut O,
    epsilon: f64,
    max_params: usize,
    seed: u64,
) -> f64 {
    let n = objective.params().len();
    if n <= max_params {
        return gradient_check(objective, epsilon);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, n, max_params).into_vec();
    idx.sort_unstable();
    check_indices(objective, epsilon, idx.into_iter())
}

fn check_indices<O: Objective + ?Sized>(
    objective: &mut O,
    epsilon: f64,
    indices: impl Iterator<Item = usize>,
) -> f64 {
    let base = objective.params();
    let (_, analytic) = objective.loss_and_grad();
    let mut worst: f64 = 0.0;
    let mut p = base.clone();
    for i in indices {
        p[i] = base[i] + epsilon;
        objective.set_params(&p);
        let up = objective.loss();
        p[i] = base[i] - epsilon;
        objective.set_params(&p);
        let down = objective.loss();
        p[i] = base[i];
        let numeric = (up - down) / (2.0 * epsilon);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    objective.set_params(&base);
    worst
}

fn flatten<'a>(blocks: impl Iterator<Item = &'a Vec<f64>>) -> Vec<f64> {
    blocks.flat_map(|b| b.iter().copied()).collect()
}

fn unflatten<'a>(blocks: impl Iterator<Item = &'a mut Vec<f64>>, flat: &[f64]) {
    let mut off = 0;
    for b in blocks {
        let n = b.len();
        b.copy_from_slice(&flat[off..off + n]);
        off += n;
    }
}

/// One network, one input, one target. Dropout masks are redrawn from the
/// same seed on every evaluation so they stay fixed across perturbations.
pub struct NetObjective {
    pub net: Sequential,
    pub input: Tensor,
    pub target: Vec<f64>,
    pub loss: LossKind,
    /// L1 penalty on the weights of the given dense layer: `(layer index, coefficient)`.
    pub l1: Option<(usize, f64)>,
    pub dropout_seed: Option<u64>,
}

impl NetObjective {
    fn l1_weights(&self) -> Option<(usize, usize, f64)> {
        let (layer, coef) = self.l1?;
        match self.net.layers[layer].spec {
            LayerSpec::Dense { inputs, outputs } => Some((layer, inputs * outputs, coef)),
            _ => None,
        }
    }

    fn eval(&self, want_grad: bool) -> (f64, Vec<f64>) {
        let mut rng = self.dropout_seed.map(ChaCha8Rng::seed_from_u64);
        let trace = self.net.forward_trace(&self.input, rng.as_mut());
        let (mut loss, gy) = loss_and_grad(trace.output(), &self.target, self.loss);
        let mut grads = self.net.zero_grads();
        if want_grad {
            self.net.backward(&trace, gy, &mut grads, false);
        }
        if let Some((layer, nw, coef)) = self.l1_weights() {
            let w = &self.net.layers[layer].params[..nw];
            loss += coef * w.iter().map(|v| v.abs()).sum::<f64>();
            for (g, v) in grads[layer].iter_mut().zip(w) {
                *g += coef * l1_subgradient(*v);
            }
        }
        (loss, flatten(grads.iter()))
    }
}

impl Objective for NetObjective {
    fn params(&self) -> Vec<f64> {
        flatten(self.net.params())
    }

    fn set_params(&mut self, params: &[f64]) {
        unflatten(self.net.params_mut(), params);
    }

    fn loss(&self) -> f64 {
        self.eval(false).0
    }

    fn loss_and_grad(&self) -> (f64, Vec<f64>) {
        self.eval(true)
    }
}

/// Mean reconstruction loss of a CAE over a small batch.
pub struct CaeObjective {
    pub model: CaeModel,
    pub batch: Vec<Tensor>,
}

impl Objective for CaeObjective {
    fn params(&self) -> Vec<f64> {
        flatten(self.model.encoder.params().chain(self.model.decoder.params()))
    }

    fn set_params(&mut self, params: &[f64]) {
        let m = &mut self.model;
        unflatten(m.encoder.params_mut().chain(m.decoder.params_mut()), params);
    }

    fn loss(&self) -> f64 {
        self.batch
            .iter()
            .map(|x| {
                let y = self.model.decoder.forward(&self.model.encoder.forward(x));
                super::cae::mse(&y.data, &x.data)
            })
            .sum::<f64>()
            / self.batch.len() as f64
    }

    fn loss_and_grad(&self) -> (f64, Vec<f64>) {
        let mut grads = self.model.zero_grads();
        let mut loss = 0.0;
        for x in &self.batch {
            loss += self.model.sample_loss_grad(x, &mut grads);
        }
        let n = self.batch.len() as f64;
        let flat = flatten(grads.iter()).into_iter().map(|g| g / n).collect();
        (loss / n, flat)
    }
}

/// `y = w·x` with squared error against `t`; the gradient is `2(wx − t)x`.
pub struct ScalarLinear {
    pub w: f64,
    pub x: f64,
    pub t: f64,
}

impl Objective for ScalarLinear {
    fn params(&self) -> Vec<f64> {
        vec![self.w]
    }

    fn set_params(&mut self, params: &[f64]) {
        self.w = params[0];
    }

    fn loss(&self) -> f64 {
        (self.w * self.x - self.t).powi(2)
    }

    fn loss_and_grad(&self) -> (f64, Vec<f64>) {
        // route through the shared MSE kernel rather than the closed form
        let (l, g) = loss_and_grad(&Tensor::flat(vec![self.w * self.x]), &[self.t], LossKind::Mse);
        (l, vec![g.data[0] * self.x])
    }
}
