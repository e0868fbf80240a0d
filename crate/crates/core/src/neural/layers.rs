//! Layer kernels with hand-written backward passes.
//!
//! Parameters of a layer live in one flat `Vec<f64>`: weights first, bias
//! after. Layouts are `[out][in][k][k]` for convolutions, `[in][out][k][k]`
//! for transposed convolutions and `[out][in]` for dense layers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{Shape, Tensor};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    ConvTranspose2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
    },
    /// 2×2 max pooling with stride 2 (odd trailing rows/columns are dropped).
    MaxPool2d,
    /// Nearest-neighbour ×2 upsampling.
    Upsample2d,
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Relu,
    Sigmoid,
    Dropout {
        rate: f64,
    },
}

impl LayerSpec {
    pub fn conv3x3(in_channels: usize, out_channels: usize, stride: usize) -> Self {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel: 3,
            stride,
            padding: 1,
        }
    }

    /// 3×3 transposed convolution that exactly doubles the spatial size.
    pub fn tconv3x3_up(in_channels: usize, out_channels: usize) -> Self {
        LayerSpec::ConvTranspose2d {
            in_channels,
            out_channels,
            kernel: 3,
            stride: 2,
            padding: 1,
            output_padding: 1,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            }
            | LayerSpec::ConvTranspose2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => in_channels * out_channels * kernel * kernel + out_channels,
            LayerSpec::Dense { inputs, outputs } => inputs * outputs + outputs,
            _ => 0,
        }
    }

    /// Named parameter tensors and their shapes, in storage order.
    pub fn tensor_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![
                ("weight", vec![out_channels, in_channels, kernel, kernel]),
                ("bias", vec![out_channels]),
            ],
            LayerSpec::ConvTranspose2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![
                ("weight", vec![in_channels, out_channels, kernel, kernel]),
                ("bias", vec![out_channels]),
            ],
            LayerSpec::Dense { inputs, outputs } => {
                vec![("weight", vec![outputs, inputs]), ("bias", vec![outputs])]
            }
            _ => Vec::new(),
        }
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                check_channels(in_channels, input)?;
                let h = input.height + 2 * padding;
                let w = input.width + 2 * padding;
                if h < kernel || w < kernel || stride == 0 {
                    return Err(Error::shape(
                        format!("spatial size >= kernel {kernel}"),
                        input,
                    ));
                }
                Ok(Shape::new(
                    out_channels,
                    (h - kernel) / stride + 1,
                    (w - kernel) / stride + 1,
                ))
            }
            LayerSpec::ConvTranspose2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                output_padding,
            } => {
                check_channels(in_channels, input)?;
                let grow = |n: usize| {
                    ((n.saturating_sub(1)) * stride + kernel + output_padding)
                        .checked_sub(2 * padding)
                };
                match (grow(input.height), grow(input.width)) {
                    (Some(h), Some(w)) if input.height > 0 && input.width > 0 => {
                        Ok(Shape::new(out_channels, h, w))
                    }
                    _ => Err(Error::shape("non-empty transposed-conv input", input)),
                }
            }
            LayerSpec::MaxPool2d => {
                if input.height < 2 || input.width < 2 {
                    return Err(Error::shape("spatial size >= 2 for pooling", input));
                }
                Ok(Shape::new(input.channels, input.height / 2, input.width / 2))
            }
            LayerSpec::Upsample2d => Ok(Shape::new(
                input.channels,
                input.height * 2,
                input.width * 2,
            )),
            LayerSpec::Dense { inputs, outputs } => {
                if input.len() != inputs {
                    return Err(Error::shape(format!("{inputs} dense inputs"), input.len()));
                }
                Ok(Shape::flat(outputs))
            }
            LayerSpec::Relu | LayerSpec::Sigmoid | LayerSpec::Dropout { .. } => Ok(input),
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                kernel,
                ..
            }
            | LayerSpec::ConvTranspose2d {
                in_channels,
                kernel,
                ..
            } => in_channels * kernel * kernel,
            LayerSpec::Dense { inputs, .. } => inputs,
            _ => 1,
        }
    }
}

fn check_channels(expected: usize, input: Shape) -> Result<()> {
    if input.channels != expected {
        return Err(Error::shape(format!("{expected} input channels"), input));
    }
    Ok(())
}

/// Forward-pass mode. Training mode carries the RNG that draws dropout masks.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// Per-layer values kept from the forward pass beyond input and output.
#[derive(Clone, Debug)]
pub enum Aux {
    None,
    Argmax(Vec<usize>),
    Mask(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub params: Vec<f64>,
}

impl Layer {
    /// Uniform fan-in scaled initialisation, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero bias.
    pub fn init(spec: LayerSpec, rng: &mut ChaCha8Rng) -> Self {
        let count = spec.param_count();
        let mut params = vec![0.0; count];
        if count > 0 {
            let bias = match spec {
                LayerSpec::Conv2d { out_channels, .. }
                | LayerSpec::ConvTranspose2d { out_channels, .. } => out_channels,
                LayerSpec::Dense { outputs, .. } => outputs,
                _ => 0,
            };
            let bound = (6.0 / spec.fan_in() as f64).sqrt();
            for w in &mut params[..count - bias] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Layer { spec, params }
    }

    pub fn zeros(spec: LayerSpec) -> Self {
        let params = vec![0.0; spec.param_count()];
        Layer { spec, params }
    }

    pub fn forward(&self, x: &Tensor, mode: &mut Mode<'_>) -> (Tensor, Aux) {
        match self.spec {
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => (
                conv_forward(x, &self.params, out_channels, kernel, stride, padding),
                Aux::None,
            ),
            LayerSpec::ConvTranspose2d {
                out_channels,
                kernel,
                stride,
                padding,
                output_padding,
                ..
            } => (
                tconv_forward(
                    x,
                    &self.params,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    output_padding,
                ),
                Aux::None,
            ),
            LayerSpec::MaxPool2d => {
                let (y, idx) = maxpool_forward(x);
                (y, Aux::Argmax(idx))
            }
            LayerSpec::Upsample2d => (upsample_forward(x), Aux::None),
            LayerSpec::Dense { inputs, outputs } => {
                let (w, b) = self.params.split_at(inputs * outputs);
                let mut y = b.to_vec();
                for (o, yo) in y.iter_mut().enumerate() {
                    let row = &w[o * inputs..(o + 1) * inputs];
                    *yo += row.iter().zip(&x.data).map(|(a, b)| a * b).sum::<f64>();
                }
                (Tensor::flat(y), Aux::None)
            }
            LayerSpec::Relu => (
                Tensor {
                    shape: x.shape,
                    data: x.data.iter().map(|v| v.max(0.0)).collect(),
                },
                Aux::None,
            ),
            LayerSpec::Sigmoid => (
                Tensor {
                    shape: x.shape,
                    data: x.data.iter().map(|&v| sigmoid(v)).collect(),
                },
                Aux::None,
            ),
            LayerSpec::Dropout { rate } => match mode {
                Mode::Eval => (x.clone(), Aux::None),
                Mode::Train(rng) => {
                    let keep = 1.0 - rate;
                    let mask: Vec<f64> = (0..x.data.len())
                        .map(|_| {
                            if rng.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let data = x.data.iter().zip(&mask).map(|(v, m)| v * m).collect();
                    (
                        Tensor {
                            shape: x.shape,
                            data,
                        },
                        Aux::Mask(mask),
                    )
                }
            },
        }
    }

    /// Accumulates parameter gradients into `grad_params` and returns the
    /// gradient with respect to the layer input when `need_input_grad` is set.
    pub fn backward(
        &self,
        input: &Tensor,
        output: &Tensor,
        aux: &Aux,
        grad_out: &Tensor,
        grad_params: &mut [f64],
        need_input_grad: bool,
    ) -> Option<Tensor> {
        match self.spec {
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => conv_backward(
                input,
                &self.params,
                grad_out,
                grad_params,
                out_channels,
                kernel,
                stride,
                padding,
                need_input_grad,
            ),
            LayerSpec::ConvTranspose2d {
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => tconv_backward(
                input,
                &self.params,
                grad_out,
                grad_params,
                out_channels,
                kernel,
                stride,
                padding,
                need_input_grad,
            ),
            LayerSpec::MaxPool2d => {
                let Aux::Argmax(idx) = aux else {
                    unreachable!("max-pool trace without argmax")
                };
                need_input_grad.then(|| {
                    let mut gx = Tensor::zeros(input.shape);
                    for (g, &i) in grad_out.data.iter().zip(idx) {
                        gx.data[i] += g;
                    }
                    gx
                })
            }
            LayerSpec::Upsample2d => need_input_grad.then(|| upsample_backward(input.shape, grad_out)),
            LayerSpec::Dense { inputs, outputs } => {
                let (gw, gb) = grad_params.split_at_mut(inputs * outputs);
                for o in 0..outputs {
                    let g = grad_out.data[o];
                    gb[o] += g;
                    if g == 0.0 {
                        continue;
                    }
                    for (gwi, xi) in gw[o * inputs..(o + 1) * inputs].iter_mut().zip(&input.data) {
                        *gwi += g * xi;
                    }
                }
                need_input_grad.then(|| {
                    let w = &self.params[..inputs * outputs];
                    let mut gx = vec![0.0; inputs];
                    for o in 0..outputs {
                        let g = grad_out.data[o];
                        for (gxi, wi) in gx.iter_mut().zip(&w[o * inputs..(o + 1) * inputs]) {
                            *gxi += g * wi;
                        }
                    }
                    Tensor {
                        shape: input.shape,
                        data: gx,
                    }
                })
            }
            LayerSpec::Relu => need_input_grad.then(|| Tensor {
                shape: input.shape,
                data: input
                    .data
                    .iter()
                    .zip(&grad_out.data)
                    .map(|(x, g)| if *x > 0.0 { *g } else { 0.0 })
                    .collect(),
            }),
            LayerSpec::Sigmoid => need_input_grad.then(|| Tensor {
                shape: input.shape,
                data: output
                    .data
                    .iter()
                    .zip(&grad_out.data)
                    .map(|(y, g)| g * y * (1.0 - y))
                    .collect(),
            }),
            LayerSpec::Dropout { .. } => need_input_grad.then(|| match aux {
                Aux::Mask(mask) => Tensor {
                    shape: input.shape,
                    data: grad_out.data.iter().zip(mask).map(|(g, m)| g * m).collect(),
                },
                _ => grad_out.clone(),
            }),
        }
    }
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn conv_forward(
    x: &Tensor,
    params: &[f64],
    out_c: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> Tensor {
    let Shape {
        channels: in_c,
        height: h,
        width: w,
    } = x.shape;
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let (weights, bias) = params.split_at(out_c * in_c * k * k);
    let mut out = Tensor::zeros(Shape::new(out_c, oh, ow));
    for oc in 0..out_c {
        let plane = &mut out.data[oc * oh * ow..(oc + 1) * oh * ow];
        plane.fill(bias[oc]);
        for ic in 0..in_c {
            let xin = &x.data[ic * h * w..(ic + 1) * h * w];
            let kern = &weights[(oc * in_c + ic) * k * k..(oc * in_c + ic + 1) * k * k];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = kern[ky * k + kx];
                    for oy in 0..oh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let row = &xin[iy as usize * w..(iy as usize + 1) * w];
                        let orow = &mut plane[oy * ow..(oy + 1) * ow];
                        for (ox, o) in orow.iter_mut().enumerate() {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix >= 0 && ix < w as isize {
                                *o += wv * row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &Tensor,
    params: &[f64],
    g: &Tensor,
    grad_params: &mut [f64],
    out_c: usize,
    k: usize,
    stride: usize,
    pad: usize,
    need_input_grad: bool,
) -> Option<Tensor> {
    let Shape {
        channels: in_c,
        height: h,
        width: w,
    } = x.shape;
    let (oh, ow) = (g.shape.height, g.shape.width);
    let nw = out_c * in_c * k * k;
    let (weights, _) = params.split_at(nw);
    let (gw, gb) = grad_params.split_at_mut(nw);
    let mut gx = need_input_grad.then(|| Tensor::zeros(x.shape));
    for oc in 0..out_c {
        let gplane = &g.data[oc * oh * ow..(oc + 1) * oh * ow];
        gb[oc] += gplane.iter().sum::<f64>();
        for ic in 0..in_c {
            let xin = &x.data[ic * h * w..(ic + 1) * h * w];
            let base = (oc * in_c + ic) * k * k;
            for ky in 0..k {
                for kx in 0..k {
                    let wv = weights[base + ky * k + kx];
                    let mut acc = 0.0;
                    for oy in 0..oh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let iy = iy as usize;
                        for ox in 0..ow {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let go = gplane[oy * ow + ox];
                            acc += go * xin[iy * w + ix as usize];
                            if let Some(gx) = gx.as_mut() {
                                gx.data[(ic * h + iy) * w + ix as usize] += go * wv;
                            }
                        }
                    }
                    gw[base + ky * k + kx] += acc;
                }
            }
        }
    }
    gx
}

fn tconv_forward(
    x: &Tensor,
    params: &[f64],
    out_c: usize,
    k: usize,
    stride: usize,
    pad: usize,
    out_pad: usize,
) -> Tensor {
    let Shape {
        channels: in_c,
        height: h,
        width: w,
    } = x.shape;
    let oh = (h - 1) * stride + k + out_pad - 2 * pad;
    let ow = (w - 1) * stride + k + out_pad - 2 * pad;
    let (weights, bias) = params.split_at(in_c * out_c * k * k);
    let mut out = Tensor::zeros(Shape::new(out_c, oh, ow));
    for oc in 0..out_c {
        out.data[oc * oh * ow..(oc + 1) * oh * ow].fill(bias[oc]);
    }
    for ic in 0..in_c {
        for iy in 0..h {
            for ix in 0..w {
                let xv = x.data[(ic * h + iy) * w + ix];
                if xv == 0.0 {
                    continue;
                }
                for oc in 0..out_c {
                    let base = (ic * out_c + oc) * k * k;
                    for ky in 0..k {
                        let oy = (iy * stride + ky) as isize - pad as isize;
                        if oy < 0 || oy >= oh as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ox = (ix * stride + kx) as isize - pad as isize;
                            if ox < 0 || ox >= ow as isize {
                                continue;
                            }
                            out.data[(oc * oh + oy as usize) * ow + ox as usize] +=
                                xv * weights[base + ky * k + kx];
                        }
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn tconv_backward(
    x: &Tensor,
    params: &[f64],
    g: &Tensor,
    grad_params: &mut [f64],
    out_c: usize,
    k: usize,
    stride: usize,
    pad: usize,
    need_input_grad: bool,
) -> Option<Tensor> {
    let Shape {
        channels: in_c,
        height: h,
        width: w,
    } = x.shape;
    let (oh, ow) = (g.shape.height, g.shape.width);
    let nw = in_c * out_c * k * k;
    let (weights, _) = params.split_at(nw);
    let (gw, gb) = grad_params.split_at_mut(nw);
    for oc in 0..out_c {
        gb[oc] += g.data[oc * oh * ow..(oc + 1) * oh * ow].iter().sum::<f64>();
    }
    let mut gx = need_input_grad.then(|| Tensor::zeros(x.shape));
    for ic in 0..in_c {
        for iy in 0..h {
            for ix in 0..w {
                let xv = x.data[(ic * h + iy) * w + ix];
                let mut acc = 0.0;
                for oc in 0..out_c {
                    let base = (ic * out_c + oc) * k * k;
                    for ky in 0..k {
                        let oy = (iy * stride + ky) as isize - pad as isize;
                        if oy < 0 || oy >= oh as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ox = (ix * stride + kx) as isize - pad as isize;
                            if ox < 0 || ox >= ow as isize {
                                continue;
                            }
                            let go = g.data[(oc * oh + oy as usize) * ow + ox as usize];
                            gw[base + ky * k + kx] += xv * go;
                            acc += weights[base + ky * k + kx] * go;
                        }
                    }
                }
                if let Some(gx) = gx.as_mut() {
                    gx.data[(ic * h + iy) * w + ix] = acc;
                }
            }
        }
    }
    gx
}

fn maxpool_forward(x: &Tensor) -> (Tensor, Vec<usize>) {
    let Shape {
        channels: c,
        height: h,
        width: w,
    } = x.shape;
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(Shape::new(c, oh, ow));
    let mut idx = vec![0; c * oh * ow];
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = usize::MAX;
                let mut best_v = f64::NEG_INFINITY;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let i = (ch * h + 2 * oy + dy) * w + 2 * ox + dx;
                    if x.data[i] > best_v || best == usize::MAX {
                        best_v = x.data[i];
                        best = i;
                    }
                }
                let o = (ch * oh + oy) * ow + ox;
                out.data[o] = best_v;
                idx[o] = best;
            }
        }
    }
    (out, idx)
}

fn upsample_forward(x: &Tensor) -> Tensor {
    let Shape {
        channels: c,
        height: h,
        width: w,
    } = x.shape;
    let mut out = Tensor::zeros(Shape::new(c, 2 * h, 2 * w));
    for ch in 0..c {
        for y in 0..2 * h {
            for xx in 0..2 * w {
                out.data[(ch * 2 * h + y) * 2 * w + xx] = x.data[(ch * h + y / 2) * w + xx / 2];
            }
        }
    }
    out
}

fn upsample_backward(in_shape: Shape, g: &Tensor) -> Tensor {
    let Shape {
        channels: c,
        height: h,
        width: w,
    } = in_shape;
    let mut gx = Tensor::zeros(in_shape);
    for ch in 0..c {
        for y in 0..2 * h {
            for xx in 0..2 * w {
                gx.data[(ch * h + y / 2) * w + xx / 2] += g.data[(ch * 2 * h + y) * 2 * w + xx];
            }
        }
    }
    gx
}
