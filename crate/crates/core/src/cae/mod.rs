//! Convolutional autoencoder that compresses square grayscale images into a
//! small latent vector.
//!
//! Encoder: two stride-2 `3×3` convolutions with ReLU and a dense bottleneck.
//! Decoder: dense expansion with ReLU, then two stride-2 transposed
//! convolutions, the last ending in a sigmoid.

mod layers;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use layers::{Activation, Layer, LayerKind, Tensor};

use crate::optim::{OptimError, OptimizerState};
use crate::qnn::LabeledFeatures;
use crate::rng::{rng, rng_for};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaeError {
    #[error("latent dimension must be at least 1")]
    ZeroLatent,
    #[error("invalid architecture: {0}")]
    BadConfig(String),
    #[error("shape mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    ShapeMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("pixel value {0} outside [0, 1]")]
    PixelRange(f64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{0} images but {1} labels")]
    LabelCount(usize, usize),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("weight file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Grayscale image with pixels in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, CaeError> {
        if pixels.len() != width * height {
            return Err(CaeError::BadConfig(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(&p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(CaeError::PixelRange(p));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(side: usize, value: f64) -> Result<Self, CaeError> {
        Self::new(side, side, vec![value; side * side])
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    fn tensor(&self) -> Tensor {
        Tensor {
            channels: 1,
            height: self.height,
            width: self.width,
            data: self.pixels.clone(),
        }
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaeConfig {
    /// Input side length; must be a multiple of 4.
    pub side: usize,
    pub c1: usize,
    pub c2: usize,
    pub latent: usize,
}

impl Default for CaeConfig {
    fn default() -> Self {
        Self {
            side: 32,
            c1: 8,
            c2: 16,
            latent: 4,
        }
    }
}

impl CaeConfig {
    pub fn with_latent(latent: usize) -> Self {
        Self {
            latent,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), CaeError> {
        if self.latent == 0 {
            return Err(CaeError::ZeroLatent);
        }
        if self.side < 4 || !self.side.is_multiple_of(4) {
            return Err(CaeError::BadConfig(format!(
                "side {} is not a positive multiple of 4",
                self.side
            )));
        }
        if self.c1 == 0 || self.c2 == 0 {
            return Err(CaeError::BadConfig("filter counts must be positive".into()));
        }
        Ok(())
    }

    fn flat(&self) -> usize {
        self.c2 * (self.side / 4) * (self.side / 4)
    }

    fn layers(&self) -> Vec<Layer> {
        let q = self.side / 4;
        vec![
            Layer::new(
                LayerKind::Conv {
                    in_channels: 1,
                    out_channels: self.c1,
                    kernel: 3,
                    stride: 2,
                    padding: 1,
                },
                Activation::Relu,
            ),
            Layer::new(
                LayerKind::Conv {
                    in_channels: self.c1,
                    out_channels: self.c2,
                    kernel: 3,
                    stride: 2,
                    padding: 1,
                },
                Activation::Relu,
            ),
            Layer::new(
                LayerKind::Dense {
                    inputs: self.flat(),
                    outputs: self.latent,
                    out_shape: (self.latent, 1, 1),
                },
                Activation::Identity,
            ),
            Layer::new(
                LayerKind::Dense {
                    inputs: self.latent,
                    outputs: self.flat(),
                    out_shape: (self.c2, q, q),
                },
                Activation::Relu,
            ),
            Layer::new(
                LayerKind::ConvTranspose {
                    in_channels: self.c2,
                    out_channels: self.c1,
                    kernel: 3,
                    stride: 2,
                    padding: 1,
                    output_padding: 1,
                },
                Activation::Relu,
            ),
            Layer::new(
                LayerKind::ConvTranspose {
                    in_channels: self.c1,
                    out_channels: 1,
                    kernel: 3,
                    stride: 2,
                    padding: 1,
                    output_padding: 1,
                },
                Activation::Sigmoid,
            ),
        ]
    }
}

/// Index of the bottleneck layer; layers up to and including it form the encoder.
const LATENT_LAYER: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct CaeModel {
    pub config: CaeConfig,
    pub layers: Vec<Layer>,
}

/// Builds the architecture with He-uniform weights drawn from `seed`.
pub fn cae_init(config: CaeConfig, seed: u64) -> Result<CaeModel, CaeError> {
    config.validate()?;
    let mut layers = config.layers();
    let mut r = rng(seed);
    for l in &mut layers {
        l.init_he_uniform(&mut r);
    }
    Ok(CaeModel { config, layers })
}

impl CaeModel {
    /// Same architecture with every weight and bias at zero.
    pub fn zeros(config: CaeConfig) -> Result<Self, CaeError> {
        config.validate()?;
        Ok(Self {
            config,
            layers: config.layers(),
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    /// All weights then biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), CaeError> {
        if params.len() != self.num_params() {
            return Err(CaeError::BadConfig(format!(
                "{} parameters for a model with {}",
                params.len(),
                self.num_params()
            )));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    fn check(&self, image: &Image) -> Result<(), CaeError> {
        let s = self.config.side;
        if image.width != s || image.height != s {
            return Err(CaeError::ShapeMismatch {
                expected_w: s,
                expected_h: s,
                got_w: image.width,
                got_h: image.height,
            });
        }
        Ok(())
    }

    /// Every layer output, starting with the input itself.
    fn activations(&self, image: &Image) -> Vec<Tensor> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(image.tensor());
        for l in &self.layers {
            let next = l.forward(acts.last().expect("non-empty"));
            acts.push(next);
        }
        acts
    }

    pub fn encode(&self, image: &Image) -> Result<Vec<f64>, CaeError> {
        self.check(image)?;
        let mut t = image.tensor();
        for l in &self.layers[..=LATENT_LAYER] {
            t = l.forward(&t);
        }
        Ok(t.data)
    }

    /// Mean squared reconstruction error of one image.
    pub fn reconstruction_error(&self, image: &Image) -> Result<f64, CaeError> {
        let (rec, _) = cae_forward(self, image)?;
        Ok(mse(&rec.pixels, &image.pixels))
    }

    /// Mean of the per-image reconstruction errors.
    pub fn dataset_error(&self, images: &[Image]) -> Result<f64, CaeError> {
        if images.is_empty() {
            return Err(CaeError::EmptyDataset);
        }
        let errs = images
            .par_iter()
            .map(|im| self.reconstruction_error(im))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(errs.iter().sum::<f64>() / images.len() as f64)
    }

    /// Text weight file: a header line, then per layer a shape line followed
    /// by a `w` line and a `b` line of row-major values.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = format!(
            "cae side={} c1={} c2={} latent={} layers={}\n",
            c.side,
            c.c1,
            c.c2,
            c.latent,
            self.layers.len()
        );
        for (i, l) in self.layers.iter().enumerate() {
            let _ = writeln!(
                s,
                "layer {i} {} {}",
                layer_shape(l),
                activation_name(l.activation)
            );
            s.push('w');
            for w in &l.weights {
                let _ = write!(s, " {w:?}");
            }
            s.push_str("\nb");
            for b in &l.biases {
                let _ = write!(s, " {b:?}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, CaeError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, msg: String| CaeError::Parse {
            line: line + 1,
            msg,
        };
        let (n, header) = lines.next().ok_or_else(|| err(0, "empty file".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("cae") {
            return Err(err(n, "expected `cae` header".into()));
        }
        let mut get = |key: &str| -> Result<usize, CaeError> {
            let f = fields
                .next()
                .ok_or_else(|| err(n, format!("missing `{key}`")))?;
            f.strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err(n, format!("bad field `{f}`")))
        };
        let config = CaeConfig {
            side: get("side")?,
            c1: get("c1")?,
            c2: get("c2")?,
            latent: get("latent")?,
        };
        let count = get("layers")?;
        let mut model = CaeModel::zeros(config).map_err(|e| err(n, e.to_string()))?;
        if count != model.layers.len() {
            return Err(err(n, format!("expected {} layers", model.layers.len())));
        }
        for (i, layer) in model.layers.iter_mut().enumerate() {
            let (n, shape) = lines
                .next()
                .ok_or_else(|| err(n, format!("missing layer {i}")))?;
            let want = format!(
                "layer {i} {} {}",
                layer_shape(layer),
                activation_name(layer.activation)
            );
            if shape.trim() != want {
                return Err(err(n, format!("expected `{want}`")));
            }
            for (tag, dst) in [("w", &mut layer.weights), ("b", &mut layer.biases)] {
                let (n, line) = lines
                    .next()
                    .ok_or_else(|| err(n, format!("missing `{tag}` row")))?;
                let mut parts = line.split_whitespace();
                if parts.next() != Some(tag) {
                    return Err(err(n, format!("expected `{tag}` row")));
                }
                let values = parts
                    .map(|v| {
                        v.parse::<f64>()
                            .map_err(|_| err(n, format!("bad number `{v}`")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if values.len() != dst.len() {
                    return Err(err(
                        n,
                        format!("expected {} values, got {}", dst.len(), values.len()),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(err(n, "non-finite value".into()));
                }
                *dst = values;
            }
        }
        if let Some((n, _)) = lines.next() {
            return Err(err(n, "trailing content".into()));
        }
        Ok(model)
    }
}

fn layer_shape(l: &Layer) -> String {
    match l.kind {
        LayerKind::Conv {
            in_channels,
            out_channels,
            kernel,
            ..
        } => format!("conv {out_channels}x{in_channels}x{kernel}x{kernel}"),
        LayerKind::ConvTranspose {
            in_channels,
            out_channels,
            kernel,
            ..
        } => format!("tconv {in_channels}x{out_channels}x{kernel}x{kernel}"),
        LayerKind::Dense {
            inputs, outputs, ..
        } => format!("dense {outputs}x{inputs}"),
    }
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Identity => "identity",
        Activation::Relu => "relu",
        Activation::Sigmoid => "sigmoid",
    }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

/// Reconstruction and latent code of one image.
pub fn cae_forward(model: &CaeModel, image: &Image) -> Result<(Image, Vec<f64>), CaeError> {
    model.check(image)?;
    let mut acts = model.activations(image);
    let rec = acts.pop().expect("non-empty");
    let latent = acts.swap_remove(LATENT_LAYER + 1).data;
    Ok((
        Image {
            width: rec.width,
            height: rec.height,
            pixels: rec.data,
        },
        latent,
    ))
}

/// Loss and flat parameter gradient for a single image, scaled by `scale`.
fn image_gradient(model: &CaeModel, image: &Image, scale: f64) -> (f64, Vec<f64>) {
    let acts = model.activations(image);
    let rec = &acts[acts.len() - 1].data;
    let p = rec.len() as f64;
    let loss = mse(rec, &image.pixels);
    let mut grad_out: Vec<f64> = rec
        .iter()
        .zip(&image.pixels)
        .map(|(r, x)| 2.0 * (r - x) * scale / p)
        .collect();
    let mut per_layer: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(model.layers.len());
    for (i, l) in model.layers.iter().enumerate().rev() {
        let mut gw = vec![0.0; l.weights.len()];
        let mut gb = vec![0.0; l.biases.len()];
        grad_out = l.backward(&acts[i], &acts[i + 1], &grad_out, &mut gw, &mut gb);
        per_layer.push((gw, gb));
    }
    let mut flat = Vec::with_capacity(model.num_params());
    for (gw, gb) in per_layer.into_iter().rev() {
        flat.extend(gw);
        flat.extend(gb);
    }
    (loss, flat)
}

/// Mean reconstruction loss and its exact gradient over `batch`.
///
/// Per-image gradients are computed in parallel and summed in batch order.
pub fn cae_gradient(model: &CaeModel, batch: &[&Image]) -> Result<(f64, Vec<f64>), CaeError> {
    if batch.is_empty() {
        return Err(CaeError::EmptyDataset);
    }
    for im in batch {
        model.check(im)?;
    }
    let scale = 1.0 / batch.len() as f64;
    let parts: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|im| image_gradient(model, im, scale))
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.num_params()];
    for (l, g) in parts {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    Ok((loss * scale, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaeTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for CaeTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 25,
            batch_size: 50,
            seed: 0,
        }
    }
}

/// Trains with Adam on shuffled mini-batches. The history holds the
/// dataset-wide reconstruction error after every epoch.
pub fn cae_train(
    model: &CaeModel,
    images: &[Image],
    config: &CaeTrainConfig,
) -> Result<(CaeModel, Vec<f64>), CaeError> {
    if images.is_empty() {
        return Err(CaeError::EmptyDataset);
    }
    if config.batch_size == 0 || config.learning_rate.is_nan() || config.learning_rate < 0.0 {
        return Err(CaeError::BadConfig(format!(
            "batch size {} / learning rate {}",
            config.batch_size, config.learning_rate
        )));
    }
    for im in images {
        model.check(im)?;
    }
    let mut model = model.clone();
    let mut params = model.params();
    let mut opt = OptimizerState::adam(config.learning_rate, params.len());
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng_for(config.seed, epoch as u64));
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Image> = chunk.iter().map(|&i| &images[i]).collect();
            let (_, grad) = cae_gradient(&model, &batch)?;
            opt.step(&mut params, &grad)?;
            model.set_params(&params)?;
        }
        history.push(model.dataset_error(images)?);
    }
    Ok((model, history))
}

/// Encoder-only pass over `images`, keeping order and labels.
pub fn cae_encode_dataset(
    model: &CaeModel,
    images: &[Image],
    labels: &[usize],
) -> Result<LabeledFeatures, CaeError> {
    if images.len() != labels.len() {
        return Err(CaeError::LabelCount(images.len(), labels.len()));
    }
    let features = images
        .par_iter()
        .map(|im| model.encode(im))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LabeledFeatures {
        features,
        labels: labels.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny() -> CaeConfig {
        CaeConfig {
            side: 8,
            c1: 2,
            c2: 3,
            latent: 2,
        }
    }

    fn random_image(side: usize, seed: u64) -> Image {
        let mut r = rng(seed);
        Image::new(
            side,
            side,
            (0..side * side).map(|_| r.random_range(0.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn default_parameter_count() {
        // conv 8·9+8, conv 16·8·9+16, dense 1024·4+4, dense 4·1024+1024,
        // tconv 16·8·9+8, tconv 8·9+1
        let m = cae_init(CaeConfig::default(), 0).unwrap();
        assert_eq!(m.num_params(), 11701);
        assert_eq!(m.latent_dim(), 4);
    }

    #[test]
    fn init_is_seeded() {
        let a = cae_init(tiny(), 3).unwrap();
        assert_eq!(a, cae_init(tiny(), 3).unwrap());
        assert_ne!(a, cae_init(tiny(), 4).unwrap());
        assert_eq!(
            cae_init(CaeConfig::with_latent(0), 0),
            Err(CaeError::ZeroLatent)
        );
    }

    #[test]
    fn forward_shapes_and_range() {
        let m = cae_init(CaeConfig::default(), 1).unwrap();
        let im = random_image(32, 2);
        let (rec, z) = cae_forward(&m, &im).unwrap();
        assert_eq!((rec.width, rec.height), (32, 32));
        assert_eq!(z.len(), 4);
        assert!(rec.pixels.iter().all(|&p| p > 0.0 && p < 1.0));
        assert_eq!(m.encode(&im).unwrap(), z);
        assert!(cae_forward(&m, &random_image(8, 0)).is_err());
    }

    #[test]
    fn zero_model_outputs_half() {
        let m = CaeModel::zeros(CaeConfig::default()).unwrap();
        let (rec, z) = cae_forward(&m, &random_image(32, 5)).unwrap();
        assert!(rec.pixels.iter().all(|&p| p == 0.5));
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backprop_matches_finite_differences() {
        // Nonzero biases keep ReLU inputs away from the kink at 0.
        let mut m = cae_init(tiny(), 11).unwrap();
        let mut r = rng(12);
        for l in &mut m.layers {
            l.biases
                .iter_mut()
                .for_each(|b| *b = r.random_range(-0.1..0.1));
        }
        assert!(m.num_params() <= 2000);
        let images: Vec<Image> = (0..3).map(|s| random_image(8, 100 + s)).collect();
        let batch: Vec<&Image> = images.iter().collect();
        let (_, grad) = cae_gradient(&m, &batch).unwrap();
        let base = m.params();
        let loss = |p: &[f64]| {
            let mut mm = m.clone();
            mm.set_params(p).unwrap();
            cae_gradient(&mm, &batch).unwrap().0
        };
        let fd = crate::optim::central_gradient(loss, &base, 1e-6).unwrap();
        let err = crate::qnn::relative_error(&grad, &fd);
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn duplicated_batch_same_gradient() {
        let m = cae_init(tiny(), 2).unwrap();
        let im = random_image(8, 7);
        let (_, a) = cae_gradient(&m, &[&im]).unwrap();
        let (_, b) = cae_gradient(&m, &[&im, &im]).unwrap();
        assert!(crate::qnn::relative_error(&a, &b) < 1e-14);
        assert!(cae_gradient(&m, &[]).is_err());
    }

    #[test]
    fn zero_learning_rate_constant_history() {
        let m = cae_init(tiny(), 2).unwrap();
        let images: Vec<Image> = (0..10).map(|s| random_image(8, s)).collect();
        let cfg = CaeTrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            batch_size: 4,
            seed: 0,
        };
        let (trained, h) = cae_train(&m, &images, &cfg).unwrap();
        assert_eq!(trained, m);
        assert_eq!(h.len(), 3);
        assert!(h.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn learns_constant_images() {
        let m = cae_init(tiny(), 6).unwrap();
        let images = vec![Image::filled(8, 0.3).unwrap(); 40];
        let cfg = CaeTrainConfig {
            learning_rate: 0.01,
            epochs: 25,
            batch_size: 10,
            seed: 1,
        };
        let (_, h) = cae_train(&m, &images, &cfg).unwrap();
        assert_eq!(h.len(), 25);
        assert!(*h.last().unwrap() < 1e-3, "{h:?}");
    }

    #[test]
    fn training_is_deterministic() {
        let m = cae_init(tiny(), 8).unwrap();
        let images: Vec<Image> = (0..12).map(|s| random_image(8, s)).collect();
        let cfg = CaeTrainConfig {
            epochs: 2,
            batch_size: 5,
            ..Default::default()
        };
        assert_eq!(
            cae_train(&m, &images, &cfg).unwrap(),
            cae_train(&m, &images, &cfg).unwrap()
        );
    }

    #[test]
    fn weight_file_round_trip() {
        let m = cae_init(tiny(), 9).unwrap();
        let text = m.to_text();
        assert!(
            text.starts_with("cae side=8 c1=2 c2=3 latent=2 layers=6\nlayer 0 conv 2x1x3x3 relu\n")
        );
        assert_eq!(CaeModel::from_text(&text).unwrap(), m);
        let broken = text.replacen("layer 1 conv 3x2x3x3", "layer 1 conv 4x2x3x3", 1);
        assert!(matches!(
            CaeModel::from_text(&broken),
            Err(CaeError::Parse { .. })
        ));
        assert!(CaeModel::from_text("").is_err());
    }

    #[test]
    fn encode_dataset_keeps_order() {
        let m = cae_init(tiny(), 1).unwrap();
        let images = vec![random_image(8, 1), random_image(8, 2), random_image(8, 1)];
        let out = cae_encode_dataset(&m, &images, &[4, 5, 4]).unwrap();
        assert_eq!(out.labels, vec![4, 5, 4]);
        assert_eq!(out.features.len(), 3);
        assert_eq!(out.features[0], out.features[2]);
        assert_eq!(out.features[1], m.encode(&images[1]).unwrap());
        assert!(cae_encode_dataset(&m, &images, &[0]).is_err());
    }
}
