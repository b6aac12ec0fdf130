use super::{Buffer, Param, Scalar, Tensor};
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization over (N, H, W).
///
/// Training uses batch statistics and folds them into the running estimates
/// (unbiased variance, momentum 0.1); inference uses the running estimates.
#[derive(Debug, Clone)]
pub struct BatchNorm2d<T> {
    channels: usize,
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Buffer<T>,
    pub running_var: Buffer<T>,
    cache: Option<BnCache<T>>,
}

#[derive(Debug, Clone)]
struct BnCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::filled(vec![channels], T::one()),
            beta: Param::filled(vec![channels], T::zero()),
            running_mean: Buffer {
                value: vec![T::zero(); channels],
                shape: vec![channels],
            },
            running_var: Buffer {
                value: vec![T::one(); channels],
                shape: vec![channels],
            },
            cache: None,
        }
    }

    fn check(&self, x: &Tensor<T>) -> Result<()> {
        if x.channels() != self.channels {
            return Err(Error::Shape(format!(
                "batch norm expects {} channels, got {}",
                self.channels,
                x.channels()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(x)?;
        let eps = T::lit(BN_EPS);
        let hw = x.plane();
        let mut y = x.clone();
        for s in 0..x.batch() {
            for (c, plane) in y.sample_mut(s).chunks_exact_mut(hw).enumerate() {
                let scale = self.gamma.value[c] / (self.running_var.value[c] + eps).sqrt();
                let shift = self.beta.value[c] - self.running_mean.value[c] * scale;
                plane.iter_mut().for_each(|v| *v = *v * scale + shift);
            }
        }
        Ok(y)
    }

    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(x)?;
        let (n, hw) = (x.batch(), x.plane());
        let count = n * hw;
        let cnt = T::from_usize(count).expect("count fits");
        let eps = T::lit(BN_EPS);
        let mom = T::lit(BN_MOMENTUM);

        let mut mean = vec![T::zero(); self.channels];
        let mut var = vec![T::zero(); self.channels];
        for s in 0..n {
            for (c, plane) in x.sample(s).chunks_exact(hw).enumerate() {
                mean[c] += plane.iter().copied().sum::<T>();
            }
        }
        mean.iter_mut().for_each(|m| *m /= cnt);
        for s in 0..n {
            for (c, plane) in x.sample(s).chunks_exact(hw).enumerate() {
                let m = mean[c];
                var[c] += plane.iter().map(|&v| (v - m) * (v - m)).sum::<T>();
            }
        }
        var.iter_mut().for_each(|v| *v /= cnt);
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();

        let mut xhat = x.clone();
        let mut y = x.clone();
        for s in 0..n {
            let xs = xhat.sample_mut(s);
            let ys = y.sample_mut(s);
            for (c, (xp, yp)) in xs.chunks_exact_mut(hw).zip(ys.chunks_exact_mut(hw)).enumerate() {
                let (m, is, g, b) = (mean[c], inv_std[c], self.gamma.value[c], self.beta.value[c]);
                for (xv, yv) in xp.iter_mut().zip(yp.iter_mut()) {
                    *xv = (*xv - m) * is;
                    *yv = g * *xv + b;
                }
            }
        }

        let unbias = if count > 1 {
            cnt / (cnt - T::one())
        } else {
            T::one()
        };
        for c in 0..self.channels {
            let rm = &mut self.running_mean.value[c];
            *rm = (T::one() - mom) * *rm + mom * mean[c];
            let rv = &mut self.running_var.value[c];
            *rv = (T::one() - mom) * *rv + mom * var[c] * unbias;
        }
        self.cache = Some(BnCache { xhat, inv_std });
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let BnCache { xhat, inv_std } = self
            .cache
            .take()
            .ok_or_else(|| Error::Shape("batch norm backward without a training forward".into()))?;
        if dy.shape() != xhat.shape() {
            return Err(Error::Shape(format!(
                "batch norm gradient has shape {:?}, expected {:?}",
                dy.shape(),
                xhat.shape()
            )));
        }
        let (n, hw) = (dy.batch(), dy.plane());
        let cnt = T::from_usize(n * hw).expect("count fits");
        let mut dgamma = vec![T::zero(); self.channels];
        let mut dbeta = vec![T::zero(); self.channels];
        for s in 0..n {
            let gs = dy.sample(s).chunks_exact(hw);
            let xs = xhat.sample(s).chunks_exact(hw);
            for (c, (gp, xp)) in gs.zip(xs).enumerate() {
                for (&g, &xh) in gp.iter().zip(xp) {
                    dgamma[c] += g * xh;
                    dbeta[c] += g;
                }
            }
        }
        let mut dx = dy.clone();
        for s in 0..n {
            let xs = xhat.sample(s);
            for (c, (dp, xp)) in dx.sample_mut(s).chunks_exact_mut(hw).zip(xs.chunks_exact(hw)).enumerate() {
                let k = self.gamma.value[c] * inv_std[c] / cnt;
                for (d, &xh) in dp.iter_mut().zip(xp) {
                    *d = k * (cnt * *d - dbeta[c] - xh * dgamma[c]);
                }
            }
        }
        for c in 0..self.channels {
            self.gamma.grad[c] += dgamma[c];
            self.beta.grad[c] += dbeta[c];
        }
        Ok(dx)
    }

    pub fn zero_grad(&mut self) {
        self.gamma.zero_grad();
        self.beta.zero_grad();
    }
}
