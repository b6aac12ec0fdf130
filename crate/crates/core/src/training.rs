//! Supervised training of the generator on high-resolution maps.
//!
//! Each epoch is a fresh random permutation of the training set cut into
//! `N = floor(D / m)` full batches (the remainder is dropped); `E = floor(T / N)`
//! epochs run, so `E * N <= T` updates are made. Low-resolution inputs are
//! sampled on the fly from each high-resolution map at phase (0, 0). Loss is
//! the per-pixel mean squared error in normalized `[0, 1]` intensity.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::nn_resample;
use crate::codec::ChannelCodec;
use crate::error::{Error, Result};
use crate::grid::{CkmGrid, PixelImage};
use crate::model::SrResNet;
use crate::nn::{Scalar, Tensor};
use crate::optim::{Optimizer, OptimizerKind};
use crate::sampling::{downsample_values, SamplingSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub upscale_factor: usize,
    pub seed: u64,
    /// Emit a checkpoint every this many updates.
    pub checkpoint_interval: Option<usize>,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            iterations: 100_000,
            learning_rate: 1e-3,
            upscale_factor: 4,
            seed: 0,
            checkpoint_interval: None,
            optimizer: OptimizerKind::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iteration count must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.checkpoint_interval == Some(0) {
            return Err(Error::Config("checkpoint interval must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainSchedule {
    pub dataset_size: usize,
    pub batch_size: usize,
    pub iterations_per_epoch: usize,
    pub epochs: usize,
}

impl TrainSchedule {
    pub fn new(dataset_size: usize, batch_size: usize, iterations: usize) -> Result<Self> {
        if batch_size == 0 || iterations == 0 {
            return Err(Error::Config("batch size and iterations must be positive".into()));
        }
        let per_epoch = dataset_size / batch_size;
        if per_epoch == 0 {
            return Err(Error::Config(format!(
                "{dataset_size} training images cannot fill one batch of {batch_size}"
            )));
        }
        let epochs = iterations / per_epoch;
        if epochs == 0 {
            return Err(Error::Config(format!(
                "{iterations} iterations do not cover one epoch of {per_epoch}"
            )));
        }
        Ok(Self {
            dataset_size,
            batch_size,
            iterations_per_epoch: per_epoch,
            epochs,
        })
    }

    pub fn total_updates(&self) -> usize {
        self.epochs * self.iterations_per_epoch
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    /// 1-based update index.
    pub iteration: usize,
    /// 1-based epoch index.
    pub epoch: usize,
    pub loss: f64,
}

/// High-resolution training maps, normalized to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    width: usize,
    height: usize,
    images: Vec<Vec<f64>>,
}

impl TrainingSet {
    pub fn from_grids(grids: &[CkmGrid]) -> Result<Self> {
        Self::from_normalized(
            grids
                .iter()
                .map(|g| {
                    let codec = g.codec();
                    (g.width(), g.height(), g.values().iter().map(|&v| codec.normalize(v)).collect())
                })
                .collect(),
        )
    }

    pub fn from_images(images: &[PixelImage]) -> Result<Self> {
        Self::from_normalized(
            images
                .iter()
                .map(|im| {
                    let v = im.pixels().iter().map(|&p| p as f64 / 255.0).collect();
                    (im.width(), im.height(), v)
                })
                .collect(),
        )
    }

    fn from_normalized(items: Vec<(usize, usize, Vec<f64>)>) -> Result<Self> {
        let (width, height) = match items.first() {
            Some((w, h, _)) => (*w, *h),
            None => return Err(Error::Data("training set is empty".into())),
        };
        if let Some((i, (w, h, _))) = items
            .iter()
            .enumerate()
            .find(|(_, (w, h, _))| (*w, *h) != (width, height))
        {
            return Err(Error::Data(format!(
                "image {i} is {w}x{h}, expected {width}x{height}"
            )));
        }
        Ok(Self {
            width,
            height,
            images: items.into_iter().map(|(_, _, v)| v).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// `(low-res input, high-res target)` tensors for the given image indices.
    pub fn batch<T: Scalar>(&self, indices: &[usize], spec: &SamplingSpec) -> Result<(Tensor<T>, Tensor<T>)> {
        let (w, h) = (self.width, self.height);
        let (lw, lh) = spec.check_dims(w, h)?;
        let n = indices.len();
        let mut hr = Vec::with_capacity(n * w * h);
        let mut lr = Vec::with_capacity(n * lw * lh);
        for &i in indices {
            let img = &self.images[i];
            hr.extend(img.iter().map(|&v| T::lit(v)));
            lr.extend(downsample_values(img, w, h, spec)?.into_iter().map(T::lit));
        }
        Ok((
            Tensor::from_vec([n, 1, lh, lw], lr)?,
            Tensor::from_vec([n, 1, h, w], hr)?,
        ))
    }
}

/// Replicates a single-channel batch across `channels`.
pub fn expand_channels<T: Scalar>(x: &Tensor<T>, channels: usize) -> Tensor<T> {
    let [n, c, h, w] = x.shape();
    assert_eq!(c, 1, "expand_channels takes single-channel input");
    if channels == 1 {
        return x.clone();
    }
    let mut data = Vec::with_capacity(n * channels * h * w);
    for s in 0..n {
        for _ in 0..channels {
            data.extend_from_slice(x.sample(s));
        }
    }
    Tensor::from_vec([n, channels, h, w], data).expect("shape")
}

/// Channel mean, collapsing a multi-channel output to one channel.
pub fn collapse_channels<T: Scalar>(y: &Tensor<T>) -> Tensor<T> {
    let [n, c, h, w] = y.shape();
    if c == 1 {
        return y.clone();
    }
    let hw = h * w;
    let inv = T::one() / T::from_usize(c).expect("channel count");
    let mut out = Tensor::zeros([n, 1, h, w]);
    for s in 0..n {
        let src = y.sample(s);
        let dst = out.sample_mut(s);
        for plane in src.chunks_exact(hw) {
            dst.iter_mut().zip(plane).for_each(|(d, &v)| *d += v);
        }
        dst.iter_mut().for_each(|d| *d *= inv);
    }
    out
}

fn collapse_channels_backward<T: Scalar>(g: &Tensor<T>, channels: usize) -> Tensor<T> {
    if channels == 1 {
        return g.clone();
    }
    let inv = T::one() / T::from_usize(channels).expect("channel count");
    let scaled = Tensor::from_vec(g.shape(), g.data().iter().map(|&v| v * inv).collect()).expect("shape");
    expand_channels(&scaled, channels)
}

fn check_same(pred: &Tensor<impl Scalar>, target: &Tensor<impl Scalar>) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "loss operands differ: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    Ok(())
}

/// Mean squared error over every element of the batch.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    check_same(pred, target)?;
    let n = T::from_usize(pred.data().len()).expect("len");
    let sum: T = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(sum / n)
}

/// Loss and its gradient with respect to `pred`.
pub fn mse_loss_grad<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    let loss = mse_loss(pred, target)?;
    let scale = T::lit(2.0) / T::from_usize(pred.data().len()).expect("len");
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| scale * (a - b))
        .collect();
    Ok((loss, Tensor::from_vec(pred.shape(), grad)?))
}

/// One forward/backward pass on a single-channel batch. Returns the loss;
/// gradients are left accumulated in the model.
pub fn loss_and_backward<T: Scalar>(model: &mut SrResNet<T>, lr: &Tensor<T>, hr: &Tensor<T>) -> Result<T> {
    let c = model.config().in_channels;
    let out = model.forward_train(&expand_channels(lr, c))?;
    let (loss, g) = mse_loss_grad(&collapse_channels(&out), hr)?;
    model.backward(&collapse_channels_backward(&g, c))?;
    Ok(loss)
}

/// Training-loop hooks. Both run in iteration order.
pub trait TrainObserver<T> {
    fn on_step(&mut self, _record: &LossRecord) -> Result<()> {
        Ok(())
    }

    fn on_checkpoint(&mut self, _iteration: usize, _model: &SrResNet<T>) -> Result<()> {
        Ok(())
    }
}

impl<T> TrainObserver<T> for () {}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub schedule: TrainSchedule,
    pub history: Vec<LossRecord>,
}

pub fn train<T: Scalar>(
    model: &mut SrResNet<T>,
    data: &TrainingSet,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver<T>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if cfg.upscale_factor != model.upscale_factor() {
        return Err(Error::Config(format!(
            "training factor {} does not match model factor {}",
            cfg.upscale_factor,
            model.upscale_factor()
        )));
    }
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let spec = SamplingSpec::new(cfg.upscale_factor)?;
    let (w, h) = data.dims();
    spec.check_dims(w, h)?;
    let schedule = TrainSchedule::new(data.len(), cfg.batch_size, cfg.iterations)?;

    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(schedule.total_updates());
    let mut iteration = 0;

    for epoch in 1..=schedule.epochs {
        order.shuffle(&mut rng);
        for batch_idx in order.chunks_exact(cfg.batch_size).take(schedule.iterations_per_epoch) {
            iteration += 1;
            let (lr, hr) = data.batch::<T>(batch_idx, &spec)?;
            model.zero_grad();
            let loss = loss_and_backward(model, &lr, &hr)?.to_f64_lossy();
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss {loss} at iteration {iteration} (epoch {epoch})"
                )));
            }
            optimizer.step(model);
            let record = LossRecord { iteration, epoch, loss };
            observer.on_step(&record)?;
            history.push(record);
            if cfg.checkpoint_interval.is_some_and(|every| iteration % every == 0) {
                observer.on_checkpoint(iteration, model)?;
            }
        }
    }
    Ok(TrainReport { schedule, history })
}

/// Reconstructs a `k`-times larger map from sparse measurements.
///
/// Values are normalized with `codec`, passed through the generator (running
/// batch-norm statistics), clamped to `[0, 1]` and decoded back.
pub fn infer<T: Scalar>(model: &SrResNet<T>, sparse: &CkmGrid, codec: &ChannelCodec) -> Result<CkmGrid> {
    let (w, h) = (sparse.width(), sparse.height());
    let k = model.upscale_factor();
    let x = Tensor::from_vec(
        [1, 1, h, w],
        sparse.values().iter().map(|&v| T::lit(codec.normalize(v))).collect(),
    )?;
    let y = collapse_channels(&model.forward(&expand_channels(&x, model.config().in_channels))?);
    let values = y
        .data()
        .iter()
        .map(|&t| codec.denormalize(t.to_f64_lossy().clamp(0.0, 1.0)))
        .collect();
    CkmGrid::new(w * k, h * k, codec.clone(), values, nn_resample(sparse.mask(), w, h, k))
}
