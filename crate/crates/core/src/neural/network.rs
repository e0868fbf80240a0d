use rand_chacha::ChaCha8Rng;

use super::layers::{Aux, Layer, LayerSpec, Mode};
use super::tensor::{Shape, Tensor};
use crate::Result;

/// Activations recorded by [`Sequential::forward_trace`]; `acts[0]` is the input.
pub struct Trace {
    pub acts: Vec<Tensor>,
    pub aux: Vec<Aux>,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.acts.last().expect("trace always holds the input")
    }
}

/// Per-layer parameter gradients, shaped like the layer parameter vectors.
pub type Grads = Vec<Vec<f64>>;

#[derive(Clone, Debug, PartialEq)]
pub struct Sequential {
    pub input_shape: Shape,
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(input_shape: Shape, specs: Vec<LayerSpec>, rng: &mut ChaCha8Rng) -> Result<Self> {
        Self::output_shape_of(input_shape, &specs)?;
        Ok(Sequential {
            input_shape,
            layers: specs.into_iter().map(|s| Layer::init(s, rng)).collect(),
        })
    }

    pub fn from_layers(input_shape: Shape, layers: Vec<Layer>) -> Result<Self> {
        let specs: Vec<_> = layers.iter().map(|l| l.spec.clone()).collect();
        Self::output_shape_of(input_shape, &specs)?;
        Ok(Sequential {
            input_shape,
            layers,
        })
    }

    /// Shape inference without allocating parameters.
    pub fn output_shape_of(input: Shape, specs: &[LayerSpec]) -> Result<Shape> {
        specs.iter().try_fold(input, |s, spec| spec.output_shape(s))
    }

    pub fn output_shape(&self) -> Shape {
        let specs: Vec<_> = self.layers.iter().map(|l| l.spec.clone()).collect();
        Self::output_shape_of(self.input_shape, &specs).expect("validated at construction")
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.params.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads {
        self.layers.iter().map(|l| vec![0.0; l.params.len()]).collect()
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur, &mut Mode::Eval).0;
        }
        cur
    }

    pub fn forward_trace(&self, x: &Tensor, rng: Option<&mut ChaCha8Rng>) -> Trace {
        let mut mode = match rng {
            Some(r) => Mode::Train(r),
            None => Mode::Eval,
        };
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut aux = Vec::with_capacity(self.layers.len());
        acts.push(x.clone());
        for layer in &self.layers {
            let (y, a) = layer.forward(acts.last().unwrap(), &mut mode);
            acts.push(y);
            aux.push(a);
        }
        Trace { acts, aux }
    }

    /// Backpropagates `grad_out` through the trace, accumulating into `grads`.
    pub fn backward(
        &self,
        trace: &Trace,
        grad_out: Tensor,
        grads: &mut [Vec<f64>],
        need_input_grad: bool,
    ) -> Option<Tensor> {
        let mut g = grad_out;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let need = i > 0 || need_input_grad;
            match layer.backward(
                &trace.acts[i],
                &trace.acts[i + 1],
                &trace.aux[i],
                &g,
                &mut grads[i],
                need,
            ) {
                Some(next) => g = next,
                None => return None,
            }
        }
        Some(g)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.layers.iter_mut().map(|l| &mut l.params)
    }

    pub fn params(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.layers.iter().map(|l| &l.params)
    }

    pub fn all_finite(&self) -> bool {
        self.params().flatten().all(|v| v.is_finite())
    }
}

pub(crate) fn add_grads(acc: &mut Grads, other: &Grads) {
    for (a, b) in acc.iter_mut().zip(other) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

pub(crate) fn scale_grads(g: &mut Grads, s: f64) {
    g.iter_mut().flatten().for_each(|v| *v *= s);
}
