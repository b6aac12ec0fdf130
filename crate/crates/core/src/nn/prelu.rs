use super::{Param, Scalar, Tensor};
use crate::error::{Error, Result};

pub const PRELU_INIT: f64 = 0.25;

/// PReLU with one slope shared across all channels.
#[derive(Debug, Clone)]
pub struct PRelu<T> {
    pub slope: Param<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Default for PRelu<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> PRelu<T> {
    pub fn new() -> Self {
        Self {
            slope: Param::filled(vec![1], T::lit(PRELU_INIT)),
            input: None,
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let a = self.slope.value[0];
        let mut y = x.clone();
        y.data_mut()
            .iter_mut()
            .for_each(|v| *v = if *v > T::zero() { *v } else { a * *v });
        y
    }

    pub fn forward_train(&mut self, x: &Tensor<T>) -> Tensor<T> {
        let y = self.forward(x);
        self.input = Some(x.clone());
        y
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .input
            .take()
            .ok_or_else(|| Error::Shape("PReLU backward without a training forward".into()))?;
        if x.shape() != dy.shape() {
            return Err(Error::Shape("PReLU gradient shape mismatch".into()));
        }
        let a = self.slope.value[0];
        let mut da = T::zero();
        let mut dx = dy.clone();
        for (d, &xv) in dx.data_mut().iter_mut().zip(x.data()) {
            if xv <= T::zero() {
                da += xv * *d;
                *d *= a;
            }
        }
        self.slope.grad[0] += da;
        Ok(dx)
    }

    pub fn zero_grad(&mut self) {
        self.slope.zero_grad();
    }
}
