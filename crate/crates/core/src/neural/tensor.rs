use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Channel-first activation shape `(channels, height, width)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape {
            channels,
            height,
            width,
        }
    }

    /// A flat vector of `len` features, stored as `len × 1 × 1`.
    pub const fn flat(len: usize) -> Self {
        Shape::new(len, 1, 1)
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// Dense activation tensor in channel-major (CHW) order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Shape,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::shape(
                format!("{} values for {shape}", shape.len()),
                data.len(),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn flat(data: Vec<f64>) -> Self {
        Tensor {
            shape: Shape::flat(data.len()),
            data,
        }
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.shape.height + y) * self.shape.width + x
    }
}

/// Image with values in `[0, 1]`, stored row-major as `height × width × channels`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "images must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::shape(
                format!("{height}x{width}x{channels} = {}", height * width * channels),
                data.len(),
            ));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::invalid(format!(
                "image value {bad} outside [0, 1]"
            )));
        }
        Ok(ImageTensor {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        ImageTensor {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.channels, self.height, self.width)
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Sets a pixel channel, clamping the value into `[0, 1]`.
    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + c] = value.clamp(0.0, 1.0);
    }

    /// Fraction of pixels whose mean channel value exceeds `threshold`.
    pub fn lit_fraction(&self, threshold: f64) -> f64 {
        let pixels = self.height * self.width;
        if pixels == 0 {
            return 0.0;
        }
        let lit = self
            .data
            .chunks(self.channels)
            .filter(|px| px.iter().sum::<f64>() / self.channels as f64 > threshold)
            .count();
        lit as f64 / pixels as f64
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Quantizes to 8-bit samples (row-major, interleaved channels).
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn from_bytes(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| b as f64 / 255.0).collect();
        ImageTensor::new(height, width, channels, data)
    }

    pub fn to_tensor(&self) -> Tensor {
        let shape = self.shape();
        let mut out = Tensor::zeros(shape);
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    let i = out.index(c, y, x);
                    out.data[i] = self.get(y, x, c);
                }
            }
        }
        out
    }

    /// Converts a CHW tensor back into an image; values are clamped into `[0, 1]`.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let Shape {
            channels,
            height,
            width,
        } = t.shape;
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "cannot build an image from {channels} channels"
            )));
        }
        let mut img = ImageTensor::zeros(height, width, channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    let v = t.data[t.index(c, y, x)];
                    if !v.is_finite() {
                        return Err(Error::invalid("non-finite activation in image output"));
                    }
                    img.set(y, x, c, v);
                }
            }
        }
        Ok(img)
    }
}
