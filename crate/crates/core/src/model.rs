//! SRResNet generator.
//!
//! Layout: 9x9 head conv + PReLU; `N` residual blocks
//! (conv3x3, BN, PReLU, conv3x3, BN, identity skip); conv3x3 + BN with a
//! global skip back to the head output; `log2(k)` upsampling stages
//! (conv3x3 to 4x channels, pixel shuffle by 2, PReLU); 9x9 tail conv.
//! There is no output activation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{pixel_shuffle, pixel_unshuffle, BatchNorm2d, Buffer, Conv2d, PRelu, Param, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrResNetConfig {
    pub in_channels: usize,
    pub feature_channels: usize,
    pub num_residual_blocks: usize,
    pub upscale_factor: usize,
    pub head_kernel: usize,
    pub body_kernel: usize,
}

impl Default for SrResNetConfig {
    /// The published reference configuration (1,549,462 parameters).
    fn default() -> Self {
        Self {
            in_channels: 3,
            feature_channels: 64,
            num_residual_blocks: 16,
            upscale_factor: 4,
            head_kernel: 9,
            body_kernel: 3,
        }
    }
}

impl SrResNetConfig {
    pub fn reference(upscale_factor: usize) -> Self {
        Self {
            upscale_factor,
            ..Self::default()
        }
    }

    /// Single-channel, five-block variant.
    pub fn economy(upscale_factor: usize) -> Self {
        Self {
            in_channels: 1,
            num_residual_blocks: 5,
            upscale_factor,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.upscale_factor;
        if k < 2 || !k.is_power_of_two() {
            return Err(Error::Config(format!(
                "upscale factor must be a power of two >= 2, got {k}"
            )));
        }
        if self.in_channels == 0 || self.feature_channels == 0 {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        if self.num_residual_blocks == 0 {
            return Err(Error::Config("at least one residual block is required".into()));
        }
        if self.head_kernel % 2 == 0 || self.body_kernel % 2 == 0 {
            return Err(Error::Config("kernel sizes must be odd".into()));
        }
        Ok(())
    }

    pub fn upsample_stages(&self) -> usize {
        self.upscale_factor.trailing_zeros() as usize
    }
}

#[derive(Debug, Clone)]
pub struct ResidualBlock<T> {
    pub conv1: Conv2d<T>,
    pub bn1: BatchNorm2d<T>,
    pub act: PRelu<T>,
    pub conv2: Conv2d<T>,
    pub bn2: BatchNorm2d<T>,
}

impl<T: Scalar> ResidualBlock<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let h = self.bn1.forward(&self.conv1.forward(x)?)?;
        let h = self.act.forward(&h);
        let mut h = self.bn2.forward(&self.conv2.forward(&h)?)?;
        h.add_assign(x);
        Ok(h)
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let h = self.conv1.forward_train(x)?;
        let h = self.bn1.forward_train(&h)?;
        let h = self.act.forward_train(&h);
        let h = self.conv2.forward_train(&h)?;
        let mut h = self.bn2.forward_train(&h)?;
        h.add_assign(x);
        Ok(h)
    }

    fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.bn2.backward(dy)?;
        let g = self.conv2.backward(&g, true)?.expect("input grad");
        let g = self.act.backward(&g)?;
        let g = self.bn1.backward(&g)?;
        let mut g = self.conv1.backward(&g, true)?.expect("input grad");
        g.add_assign(dy);
        Ok(g)
    }
}

#[derive(Debug, Clone)]
pub struct UpsampleBlock<T> {
    pub conv: Conv2d<T>,
    pub act: PRelu<T>,
}

impl<T: Scalar> UpsampleBlock<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let h = pixel_shuffle(&self.conv.forward(x)?, 2)?;
        Ok(self.act.forward(&h))
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let h = pixel_shuffle(&self.conv.forward_train(x)?, 2)?;
        Ok(self.act.forward_train(&h))
    }

    fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let g = pixel_unshuffle(&self.act.backward(dy)?, 2)?;
        Ok(self.conv.backward(&g, true)?.expect("input grad"))
    }
}

/// Generator parameters and batch-norm state.
///
/// `forward` is the inference path (running statistics, `&self`);
/// `forward_train`/`backward` cache activations and need exclusive access.
#[derive(Debug, Clone)]
pub struct SrResNet<T> {
    config: SrResNetConfig,
    seed: u64,
    pub head: Conv2d<T>,
    pub head_act: PRelu<T>,
    pub blocks: Vec<ResidualBlock<T>>,
    pub post_conv: Conv2d<T>,
    pub post_bn: BatchNorm2d<T>,
    pub upsample: Vec<UpsampleBlock<T>>,
    pub tail: Conv2d<T>,
    pending_backward: bool,
}

impl<T: Scalar> SrResNet<T> {
    /// Deterministic He-normal initialization from `seed`; BN scale 1, shift 0; PReLU slope 0.25.
    pub fn build(config: &SrResNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c_in, f) = (config.in_channels, config.feature_channels);
        let (hk, bk) = (config.head_kernel, config.body_kernel);
        let head = Conv2d::he_normal(c_in, f, hk, &mut rng);
        let blocks = (0..config.num_residual_blocks)
            .map(|_| ResidualBlock {
                conv1: Conv2d::he_normal(f, f, bk, &mut rng),
                bn1: BatchNorm2d::new(f),
                act: PRelu::new(),
                conv2: Conv2d::he_normal(f, f, bk, &mut rng),
                bn2: BatchNorm2d::new(f),
            })
            .collect();
        let post_conv = Conv2d::he_normal(f, f, bk, &mut rng);
        let upsample = (0..config.upsample_stages())
            .map(|_| UpsampleBlock {
                conv: Conv2d::he_normal(f, 4 * f, bk, &mut rng),
                act: PRelu::new(),
            })
            .collect();
        let tail = Conv2d::he_normal(f, c_in, hk, &mut rng);
        Ok(Self {
            config: config.clone(),
            seed,
            head,
            head_act: PRelu::new(),
            blocks,
            post_conv,
            post_bn: BatchNorm2d::new(f),
            upsample,
            tail,
            pending_backward: false,
        })
    }

    pub fn config(&self) -> &SrResNetConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn upscale_factor(&self) -> usize {
        self.config.upscale_factor
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let [n, c, h, w] = x.shape();
        if c != self.config.in_channels || n == 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!(
                "model expects a non-empty batch with {} channels, got shape {:?}",
                self.config.in_channels,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Inference forward pass; batch norm uses running statistics.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let h0 = self.head_act.forward(&self.head.forward(x)?);
        let mut r = h0.clone();
        for b in &self.blocks {
            r = b.forward(&r)?;
        }
        let mut p = self.post_bn.forward(&self.post_conv.forward(&r)?)?;
        p.add_assign(&h0);
        let mut u = p;
        for up in &self.upsample {
            u = up.forward(&u)?;
        }
        self.tail.forward(&u)
    }

    /// Training forward pass; batch statistics, activations cached for [`Self::backward`].
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let h0 = self.head.forward_train(x)?;
        let h0 = self.head_act.forward_train(&h0);
        let mut r = h0.clone();
        for b in &mut self.blocks {
            r = b.forward_train(&r)?;
        }
        let p = self.post_conv.forward_train(&r)?;
        let mut p = self.post_bn.forward_train(&p)?;
        p.add_assign(&h0);
        let mut u = p;
        for up in &mut self.upsample {
            u = up.forward_train(&u)?;
        }
        let y = self.tail.forward_train(&u)?;
        self.pending_backward = true;
        Ok(y)
    }

    /// Back-propagates `dy` (gradient of the loss w.r.t. the output), accumulating parameter gradients.
    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<()> {
        if !std::mem::take(&mut self.pending_backward) {
            return Err(Error::Shape("backward called without a training forward".into()));
        }
        let mut g = self.tail.backward(dy, true)?.expect("input grad");
        for up in self.upsample.iter_mut().rev() {
            g = up.backward(&g)?;
        }
        // g is now the gradient at the global-skip sum.
        let skip = g.clone();
        let g = self.post_bn.backward(&g)?;
        let mut g = self.post_conv.backward(&g, true)?.expect("input grad");
        for b in self.blocks.iter_mut().rev() {
            g = b.backward(&g)?;
        }
        g.add_assign(&skip);
        let g = self.head_act.backward(&g)?;
        self.head.backward(&g, false)?;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for (_, p) in self.named_params_mut() {
            p.zero_grad();
        }
    }

    /// Learnable tensors in a fixed order with stable names.
    pub fn named_params(&self) -> Vec<(String, &Param<T>)> {
        let mut out: Vec<(String, &Param<T>)> = Vec::new();
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        out.push(("head_act.slope".into(), &self.head_act.slope));
        for (i, b) in self.blocks.iter().enumerate() {
            let p = format!("blocks.{i}");
            out.push((format!("{p}.conv1.weight"), &b.conv1.weight));
            out.push((format!("{p}.conv1.bias"), &b.conv1.bias));
            out.push((format!("{p}.bn1.gamma"), &b.bn1.gamma));
            out.push((format!("{p}.bn1.beta"), &b.bn1.beta));
            out.push((format!("{p}.act.slope"), &b.act.slope));
            out.push((format!("{p}.conv2.weight"), &b.conv2.weight));
            out.push((format!("{p}.conv2.bias"), &b.conv2.bias));
            out.push((format!("{p}.bn2.gamma"), &b.bn2.gamma));
            out.push((format!("{p}.bn2.beta"), &b.bn2.beta));
        }
        out.push(("post_conv.weight".into(), &self.post_conv.weight));
        out.push(("post_conv.bias".into(), &self.post_conv.bias));
        out.push(("post_bn.gamma".into(), &self.post_bn.gamma));
        out.push(("post_bn.beta".into(), &self.post_bn.beta));
        for (i, u) in self.upsample.iter().enumerate() {
            out.push((format!("upsample.{i}.conv.weight"), &u.conv.weight));
            out.push((format!("upsample.{i}.conv.bias"), &u.conv.bias));
            out.push((format!("upsample.{i}.act.slope"), &u.act.slope));
        }
        out.push(("tail.weight".into(), &self.tail.weight));
        out.push(("tail.bias".into(), &self.tail.bias));
        out
    }

    /// Same order and names as [`Self::named_params`].
    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Param<T>)> {
        let mut out: Vec<(String, &mut Param<T>)> = Vec::new();
        out.push(("head.weight".into(), &mut self.head.weight));
        out.push(("head.bias".into(), &mut self.head.bias));
        out.push(("head_act.slope".into(), &mut self.head_act.slope));
        for (i, b) in self.blocks.iter_mut().enumerate() {
            let p = format!("blocks.{i}");
            out.push((format!("{p}.conv1.weight"), &mut b.conv1.weight));
            out.push((format!("{p}.conv1.bias"), &mut b.conv1.bias));
            out.push((format!("{p}.bn1.gamma"), &mut b.bn1.gamma));
            out.push((format!("{p}.bn1.beta"), &mut b.bn1.beta));
            out.push((format!("{p}.act.slope"), &mut b.act.slope));
            out.push((format!("{p}.conv2.weight"), &mut b.conv2.weight));
            out.push((format!("{p}.conv2.bias"), &mut b.conv2.bias));
            out.push((format!("{p}.bn2.gamma"), &mut b.bn2.gamma));
            out.push((format!("{p}.bn2.beta"), &mut b.bn2.beta));
        }
        out.push(("post_conv.weight".into(), &mut self.post_conv.weight));
        out.push(("post_conv.bias".into(), &mut self.post_conv.bias));
        out.push(("post_bn.gamma".into(), &mut self.post_bn.gamma));
        out.push(("post_bn.beta".into(), &mut self.post_bn.beta));
        for (i, u) in self.upsample.iter_mut().enumerate() {
            out.push((format!("upsample.{i}.conv.weight"), &mut u.conv.weight));
            out.push((format!("upsample.{i}.conv.bias"), &mut u.conv.bias));
            out.push((format!("upsample.{i}.act.slope"), &mut u.act.slope));
        }
        out.push(("tail.weight".into(), &mut self.tail.weight));
        out.push(("tail.bias".into(), &mut self.tail.bias));
        out
    }

    /// Batch-norm running statistics (not learnable, not counted).
    pub fn named_buffers(&self) -> Vec<(String, &Buffer<T>)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            for (tag, bn) in [("bn1", &b.bn1), ("bn2", &b.bn2)] {
                out.push((format!("blocks.{i}.{tag}.running_mean"), &bn.running_mean));
                out.push((format!("blocks.{i}.{tag}.running_var"), &bn.running_var));
            }
        }
        out.push(("post_bn.running_mean".into(), &self.post_bn.running_mean));
        out.push(("post_bn.running_var".into(), &self.post_bn.running_var));
        out
    }

    pub fn named_buffers_mut(&mut self) -> Vec<(String, &mut Buffer<T>)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter_mut().enumerate() {
            for (tag, bn) in [("bn1", &mut b.bn1), ("bn2", &mut b.bn2)] {
                out.push((format!("blocks.{i}.{tag}.running_mean"), &mut bn.running_mean));
                out.push((format!("blocks.{i}.{tag}.running_var"), &mut bn.running_var));
            }
        }
        out.push(("post_bn.running_mean".into(), &mut self.post_bn.running_mean));
        out.push(("post_bn.running_var".into(), &mut self.post_bn.running_var));
        out
    }

    /// Every learnable scalar: conv weights and biases, BN scale and shift, PReLU slopes.
    pub fn count_parameters(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(k: usize) -> SrResNetConfig {
        SrResNetConfig {
            in_channels: 1,
            feature_channels: 4,
            num_residual_blocks: 1,
            upscale_factor: k,
            head_kernel: 9,
            body_kernel: 3,
        }
    }

    #[test]
    fn reference_parameter_count() {
        let m = SrResNet::<f32>::build(&SrResNetConfig::default(), 0).unwrap();
        assert_eq!(m.count_parameters(), 1_549_462);
    }

    #[test]
    fn factor_must_be_power_of_two() {
        for k in [0, 1, 3, 6] {
            let cfg = SrResNetConfig::economy(k);
            assert!(matches!(SrResNet::<f32>::build(&cfg, 0), Err(Error::Config(_))), "k={k}");
        }
        let cfg = SrResNetConfig {
            num_residual_blocks: 0,
            ..SrResNetConfig::economy(2)
        };
        assert!(SrResNet::<f32>::build(&cfg, 0).is_err());
    }

    #[test]
    fn shape_law() {
        for k in [2, 4, 8] {
            let m = SrResNet::<f32>::build(&tiny(k), 1).unwrap();
            let x = Tensor::zeros([2, 1, 3, 5]);
            assert_eq!(m.forward(&x).unwrap().shape(), [2, 1, 3 * k, 5 * k]);
        }
        let m = SrResNet::<f32>::build(&tiny(2), 1).unwrap();
        assert!(m.forward(&Tensor::zeros([1, 3, 2, 2])).is_err());
    }

    #[test]
    fn minimal_spatial_extent() {
        let cfg = SrResNetConfig {
            in_channels: 3,
            upscale_factor: 2,
            ..tiny(2)
        };
        let m = SrResNet::<f32>::build(&cfg, 1).unwrap();
        let y = m.forward(&Tensor::zeros([1, 3, 1, 1])).unwrap();
        assert_eq!(y.shape(), [1, 3, 2, 2]);
        assert!(y.is_finite());
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = SrResNet::<f32>::build(&tiny(4), 42).unwrap();
        let b = SrResNet::<f32>::build(&tiny(4), 42).unwrap();
        let c = SrResNet::<f32>::build(&tiny(4), 43).unwrap();
        let bits = |m: &SrResNet<f32>| -> Vec<u32> {
            m.named_params()
                .iter()
                .flat_map(|(_, p)| p.value.iter().map(|v| v.to_bits()))
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn zero_tail_gives_constant_bias_output() {
        let mut m = SrResNet::<f64>::build(&tiny(2), 7).unwrap();
        m.tail.weight.value.fill(0.0);
        m.tail.bias.value[0] = 0.375;
        let x = Tensor::from_vec([1, 1, 2, 2], vec![0.1, 0.9, 0.4, 0.6]).unwrap();
        let y = m.forward(&x).unwrap();
        assert_eq!(y.shape(), [1, 1, 4, 4]);
        assert!(y.data().iter().all(|&v| v == 0.375));
    }

    #[test]
    fn backward_requires_forward() {
        let mut m = SrResNet::<f32>::build(&tiny(2), 0).unwrap();
        assert!(m.backward(&Tensor::zeros([1, 1, 4, 4])).is_err());
    }

    #[test]
    fn names_are_unique_and_aligned() {
        let mut m = SrResNet::<f32>::build(&tiny(4), 0).unwrap();
        let names: Vec<String> = m.named_params().into_iter().map(|(n, _)| n).collect();
        let names_mut: Vec<String> = m.named_params_mut().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, names_mut);
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
    }
}
