use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A feature map stored channel-major: `data[(c · h + y) · w + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn flat(data: Vec<f64>) -> Self {
        Self {
            channels: data.len(),
            height: 1,
            width: 1,
            data,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Identity => v,
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
        }
    }

    /// Derivative expressed through the activation's output.
    fn grad_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if out > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => out * (1.0 - out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerKind {
    /// Strided convolution, weights `[out][in][k][k]`.
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    /// Transposed convolution, weights `[in][out][k][k]`. Output side is
    /// `(in − 1)·stride − 2·padding + kernel + output_padding`.
    ConvTranspose {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
    },
    /// Fully connected, weights `[out][in]`; output reshaped to `out_shape`.
    Dense {
        inputs: usize,
        outputs: usize,
        out_shape: (usize, usize, usize),
    },
}

/// One layer: weights, biases and its activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub kind: LayerKind,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn new(kind: LayerKind, activation: Activation) -> Self {
        let (w, b) = match kind {
            LayerKind::Conv {
                in_channels,
                out_channels,
                kernel,
                ..
            }
            | LayerKind::ConvTranspose {
                in_channels,
                out_channels,
                kernel,
                ..
            } => (in_channels * out_channels * kernel * kernel, out_channels),
            LayerKind::Dense {
                inputs, outputs, ..
            } => (inputs * outputs, outputs),
        };
        Self {
            kind,
            activation,
            weights: vec![0.0; w],
            biases: vec![0.0; b],
        }
    }

    /// Weight fan-in used for He-uniform initialisation.
    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Conv {
                in_channels,
                kernel,
                ..
            }
            | LayerKind::ConvTranspose {
                in_channels,
                kernel,
                ..
            } => in_channels * kernel * kernel,
            LayerKind::Dense { inputs, .. } => inputs,
        }
    }

    /// He-uniform weights `U(−√(6/fan_in), √(6/fan_in))`, zero biases.
    pub fn init_he_uniform(&mut self, rng: &mut ChaCha8Rng) {
        let limit = (6.0 / self.fan_in() as f64).sqrt();
        for w in &mut self.weights {
            *w = rng.random_range(-limit..limit);
        }
        self.biases.iter_mut().for_each(|b| *b = 0.0);
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn output_shape(&self, input: (usize, usize, usize)) -> (usize, usize, usize) {
        let (_, h, w) = input;
        match self.kind {
            LayerKind::Conv {
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => (
                out_channels,
                (h + 2 * padding - kernel) / stride + 1,
                (w + 2 * padding - kernel) / stride + 1,
            ),
            LayerKind::ConvTranspose {
                out_channels,
                kernel,
                stride,
                padding,
                output_padding,
                ..
            } => (
                out_channels,
                (h - 1) * stride + kernel + output_padding - 2 * padding,
                (w - 1) * stride + kernel + output_padding - 2 * padding,
            ),
            LayerKind::Dense { out_shape, .. } => out_shape,
        }
    }

    /// Pre-activation followed by the activation.
    pub fn forward(&self, input: &Tensor) -> Tensor {
        let (oc, oh, ow) = self.output_shape(input.shape());
        let mut out = Tensor::zeros(oc, oh, ow);
        if !matches!(self.kind, LayerKind::Dense { .. }) {
            for o in 0..oc {
                out.data[o * oh * ow..(o + 1) * oh * ow].fill(self.biases[o]);
            }
        }
        match self.kind {
            LayerKind::Conv {
                in_channels,
                kernel,
                stride,
                padding,
                ..
            } => {
                let (ih, iw) = (input.height, input.width);
                for o in 0..oc {
                    for i in 0..in_channels {
                        for ky in 0..kernel {
                            let ry = tap_range(oh, ih, ky, stride, padding);
                            for kx in 0..kernel {
                                let rx = tap_range(ow, iw, kx, stride, padding);
                                let w = self.weights
                                    [((o * in_channels + i) * kernel + ky) * kernel + kx];
                                for oy in ry.clone() {
                                    let iy = oy * stride + ky - padding;
                                    let orow = (o * oh + oy) * ow;
                                    let irow = (i * ih + iy) * iw;
                                    for ox in rx.clone() {
                                        out.data[orow + ox] +=
                                            w * input.data[irow + ox * stride + kx - padding];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LayerKind::ConvTranspose {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => {
                let (ih, iw) = (input.height, input.width);
                for i in 0..in_channels {
                    for o in 0..out_channels {
                        for ky in 0..kernel {
                            let ry = tap_range(ih, oh, ky, stride, padding);
                            for kx in 0..kernel {
                                let rx = tap_range(iw, ow, kx, stride, padding);
                                let w = self.weights
                                    [((i * out_channels + o) * kernel + ky) * kernel + kx];
                                for iy in ry.clone() {
                                    let oy = iy * stride + ky - padding;
                                    let orow = (o * oh + oy) * ow;
                                    let irow = (i * ih + iy) * iw;
                                    for ix in rx.clone() {
                                        out.data[orow + ix * stride + kx - padding] +=
                                            w * input.data[irow + ix];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LayerKind::Dense {
                inputs, outputs, ..
            } => {
                for o in 0..outputs {
                    let row = &self.weights[o * inputs..(o + 1) * inputs];
                    out.data[o] = self.biases[o]
                        + row.iter().zip(&input.data).map(|(w, x)| w * x).sum::<f64>();
                }
            }
        }
        for v in &mut out.data {
            *v = self.activation.apply(*v);
        }
        out
    }

    /// Given the layer input, its output and `∂L/∂output`, accumulates the
    /// weight and bias gradients and returns `∂L/∂input`.
    pub fn backward(
        &self,
        input: &Tensor,
        output: &Tensor,
        grad_out: &[f64],
        grad_w: &mut [f64],
        grad_b: &mut [f64],
    ) -> Vec<f64> {
        let delta: Vec<f64> = output
            .data
            .iter()
            .zip(grad_out)
            .map(|(o, g)| g * self.activation.grad_from_output(*o))
            .collect();
        let mut grad_in = vec![0.0; input.len()];
        let (oc, oh, ow) = output.shape();
        let (ih, iw) = (input.height, input.width);
        if !matches!(self.kind, LayerKind::Dense { .. }) {
            for o in 0..oc {
                grad_b[o] += delta[o * oh * ow..(o + 1) * oh * ow].iter().sum::<f64>();
            }
        }
        match self.kind {
            LayerKind::Conv {
                in_channels,
                kernel,
                stride,
                padding,
                ..
            } => {
                for o in 0..oc {
                    for i in 0..in_channels {
                        for ky in 0..kernel {
                            let ry = tap_range(oh, ih, ky, stride, padding);
                            for kx in 0..kernel {
                                let rx = tap_range(ow, iw, kx, stride, padding);
                                let wi = ((o * in_channels + i) * kernel + ky) * kernel + kx;
                                let w = self.weights[wi];
                                let mut acc = 0.0;
                                for oy in ry.clone() {
                                    let iy = oy * stride + ky - padding;
                                    let orow = (o * oh + oy) * ow;
                                    let irow = (i * ih + iy) * iw;
                                    for ox in rx.clone() {
                                        let d = delta[orow + ox];
                                        let xi = irow + ox * stride + kx - padding;
                                        acc += d * input.data[xi];
                                        grad_in[xi] += w * d;
                                    }
                                }
                                grad_w[wi] += acc;
                            }
                        }
                    }
                }
            }
            LayerKind::ConvTranspose {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => {
                for i in 0..in_channels {
                    for o in 0..out_channels {
                        for ky in 0..kernel {
                            let ry = tap_range(ih, oh, ky, stride, padding);
                            for kx in 0..kernel {
                                let rx = tap_range(iw, ow, kx, stride, padding);
                                let wi = ((i * out_channels + o) * kernel + ky) * kernel + kx;
                                let w = self.weights[wi];
                                let mut acc = 0.0;
                                for iy in ry.clone() {
                                    let oy = iy * stride + ky - padding;
                                    let orow = (o * oh + oy) * ow;
                                    let irow = (i * ih + iy) * iw;
                                    for ix in rx.clone() {
                                        let d = delta[orow + ix * stride + kx - padding];
                                        acc += d * input.data[irow + ix];
                                        grad_in[irow + ix] += w * d;
                                    }
                                }
                                grad_w[wi] += acc;
                            }
                        }
                    }
                }
            }
            LayerKind::Dense {
                inputs, outputs, ..
            } => {
                for o in 0..outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    grad_b[o] += d;
                    let row = &self.weights[o * inputs..(o + 1) * inputs];
                    let grow = &mut grad_w[o * inputs..(o + 1) * inputs];
                    for k in 0..inputs {
                        grow[k] += d * input.data[k];
                        grad_in[k] += d * row[k];
                    }
                }
            }
        }
        grad_in
    }
}

/// Positions `a < small` whose tap `a·stride + k − padding` lands in `[0, big)`.
fn tap_range(small: usize, big: usize, k: usize, stride: usize, padding: usize) -> Range<usize> {
    let lo = if padding > k {
        (padding - k).div_ceil(stride)
    } else {
        0
    };
    if big + padding < k + 1 {
        return lo..lo;
    }
    let hi = ((big + padding - k - 1) / stride + 1).min(small);
    lo..hi.max(lo)
}
