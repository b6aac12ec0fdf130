use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{gemm, Param, Scalar, Tensor};
use crate::error::{Error, Result};

/// Stride-1 "same" convolution (zero padding `kernel / 2`), via im2col + GEMM.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    /// `[out, in, kernel, kernel]`
    pub weight: Param<T>,
    pub bias: Param<T>,
    input: Option<Tensor<T>>,
    col: Vec<T>,
    dcol: Vec<T>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        assert!(kernel % 2 == 1, "only odd kernels keep spatial size");
        Self {
            in_channels,
            out_channels,
            kernel,
            weight: Param::filled(vec![out_channels, in_channels, kernel, kernel], T::zero()),
            bias: Param::filled(vec![out_channels], T::zero()),
            input: None,
            col: Vec::new(),
            dcol: Vec::new(),
        }
    }

    /// He (fan-in) normal weights, zero bias.
    pub fn he_normal(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut impl Rng) -> Self {
        let mut conv = Self::zeros(in_channels, out_channels, kernel);
        let fan_in = (in_channels * kernel * kernel) as f64;
        let dist = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
        conv.weight
            .value
            .iter_mut()
            .for_each(|w| *w = T::lit(dist.sample(rng)));
        conv
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.channels() != self.in_channels {
            return Err(Error::Shape(format!(
                "convolution expects {} input channels, got {}",
                self.in_channels,
                x.channels()
            )));
        }
        Ok(())
    }

    /// Few output channels: accumulate shifted input planes instead of
    /// materialising the (large) unfolded matrix.
    fn direct(&self) -> bool {
        self.out_channels <= DIRECT_MAX_OUT
    }

    fn apply(&self, x: &Tensor<T>, col: &mut Vec<T>) -> Tensor<T> {
        let [n, _, h, w] = x.shape();
        let hw = h * w;
        let kk = self.patch_len();
        let mut out = Tensor::zeros([n, self.out_channels, h, w]);
        if !self.direct() {
            col.resize(kk * hw, T::zero());
        }
        for s in 0..n {
            let y = out.sample_mut(s);
            if self.direct() {
                direct_forward(&self.weight.value, x.sample(s), self.in_channels, h, w, self.kernel, y);
            } else {
                im2col(x.sample(s), self.in_channels, h, w, self.kernel, col);
                gemm(
                    self.out_channels,
                    kk,
                    hw,
                    T::one(),
                    (&self.weight.value, kk, 1),
                    (col, hw, 1),
                    T::zero(),
                    y,
                    hw,
                    1,
                );
            }
            for (plane, &b) in y.chunks_exact_mut(hw).zip(&self.bias.value) {
                plane.iter_mut().for_each(|v| *v += b);
            }
        }
        out
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        Ok(self.apply(x, &mut Vec::new()))
    }

    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut col = std::mem::take(&mut self.col);
        let y = self.apply(x, &mut col);
        self.col = col;
        self.input = Some(x.clone());
        Ok(y)
    }

    /// Accumulates weight/bias gradients; returns the input gradient when requested.
    pub fn backward(&mut self, dy: &Tensor<T>, need_input_grad: bool) -> Result<Option<Tensor<T>>> {
        let x = self
            .input
            .take()
            .ok_or_else(|| Error::Shape("convolution backward without a training forward".into()))?;
        let [n, _, h, w] = x.shape();
        if dy.shape() != [n, self.out_channels, h, w] {
            return Err(Error::Shape(format!(
                "convolution gradient has shape {:?}, expected {:?}",
                dy.shape(),
                [n, self.out_channels, h, w]
            )));
        }
        let hw = h * w;
        let kk = self.patch_len();
        let mut dx = need_input_grad.then(|| Tensor::zeros(x.shape()));
        if self.direct() {
            for s in 0..n {
                let g = dy.sample(s);
                for (plane, db) in g.chunks_exact(hw).zip(self.bias.grad.iter_mut()) {
                    *db += plane.iter().copied().sum::<T>();
                }
                let dxs = dx.as_mut().map(|d| d.sample_mut(s));
                direct_backward(
                    &self.weight.value,
                    &mut self.weight.grad,
                    x.sample(s),
                    g,
                    (self.in_channels, h, w, self.kernel),
                    dxs,
                );
            }
            return Ok(dx);
        }
        let mut col = std::mem::take(&mut self.col);
        let mut dcol = std::mem::take(&mut self.dcol);
        col.resize(kk * hw, T::zero());
        for s in 0..n {
            let g = dy.sample(s);
            im2col(x.sample(s), self.in_channels, h, w, self.kernel, &mut col);
            // dW += dy (out x hw) * col^T (hw x kk)
            gemm(
                self.out_channels,
                hw,
                kk,
                T::one(),
                (g, hw, 1),
                (&col, 1, hw),
                T::one(),
                &mut self.weight.grad,
                kk,
                1,
            );
            for (plane, db) in g.chunks_exact(hw).zip(self.bias.grad.iter_mut()) {
                *db += plane.iter().copied().sum::<T>();
            }
            if let Some(dx) = dx.as_mut() {
                dcol.resize(kk * hw, T::zero());
                // dcol = W^T (kk x out) * dy (out x hw)
                gemm(
                    kk,
                    self.out_channels,
                    hw,
                    T::one(),
                    (&self.weight.value, 1, kk),
                    (g, hw, 1),
                    T::zero(),
                    &mut dcol,
                    hw,
                    1,
                );
                col2im(&dcol, self.in_channels, h, w, self.kernel, dx.sample_mut(s));
            }
        }
        self.col = col;
        self.dcol = dcol;
        Ok(dx)
    }

    pub fn zero_grad(&mut self) {
        self.weight.zero_grad();
        self.bias.zero_grad();
    }
}

const DIRECT_MAX_OUT: usize = 3;

/// Calls `f(oy, iy, lo, hi, shift)` for every output row that tap `(ky, kx)` reads from.
fn for_tap_rows(h: usize, w: usize, k: usize, ky: usize, kx: usize, mut f: impl FnMut(usize, usize, usize, usize, usize)) {
    let pad = k / 2;
    let (lo, hi, shift) = valid_span(w, kx, pad);
    if lo == hi {
        return;
    }
    let s0 = (lo as isize + shift) as usize;
    for oy in 0..h {
        let iy = oy as isize + ky as isize - pad as isize;
        if (0..h as isize).contains(&iy) {
            f(oy, iy as usize, lo, hi, s0);
        }
    }
}

/// `y[o] = sum over taps of weight * shifted x` for a single sample.
fn direct_forward<T: Scalar>(weight: &[T], x: &[T], c: usize, h: usize, w: usize, k: usize, y: &mut [T]) {
    let hw = h * w;
    for (o, yp) in y.chunks_exact_mut(hw).enumerate() {
        for ci in 0..c {
            let xp = &x[ci * hw..][..hw];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = weight[((o * c + ci) * k + ky) * k + kx];
                    for_tap_rows(h, w, k, ky, kx, |oy, iy, lo, hi, s0| {
                        let src = &xp[iy * w + s0..][..hi - lo];
                        let dst = &mut yp[oy * w + lo..oy * w + hi];
                        dst.iter_mut().zip(src).for_each(|(d, &v)| *d += wv * v);
                    });
                }
            }
        }
    }
}

/// Weight gradient (accumulated) and optional input gradient for one sample.
fn direct_backward<T: Scalar>(
    weight: &[T],
    dweight: &mut [T],
    x: &[T],
    dy: &[T],
    (c, h, w, k): (usize, usize, usize, usize),
    mut dx: Option<&mut [T]>,
) {
    let hw = h * w;
    for (o, gp) in dy.chunks_exact(hw).enumerate() {
        for ci in 0..c {
            let xp = &x[ci * hw..][..hw];
            for ky in 0..k {
                for kx in 0..k {
                    let idx = ((o * c + ci) * k + ky) * k + kx;
                    let wv = weight[idx];
                    let mut acc = T::zero();
                    for_tap_rows(h, w, k, ky, kx, |oy, iy, lo, hi, s0| {
                        let g = &gp[oy * w + lo..oy * w + hi];
                        let src = &xp[iy * w + s0..][..hi - lo];
                        acc += g.iter().zip(src).map(|(&a, &b)| a * b).sum::<T>();
                        if let Some(dx) = dx.as_deref_mut() {
                            let d = &mut dx[ci * hw + iy * w + s0..][..hi - lo];
                            d.iter_mut().zip(g).for_each(|(d, &v)| *d += wv * v);
                        }
                    });
                    dweight[idx] += acc;
                }
            }
        }
    }
}

/// Valid output-column range `[lo, hi)` for kernel column `kx`, as (lo, hi, source shift).
fn valid_span(w: usize, kx: usize, pad: usize) -> (usize, usize, isize) {
    let shift = kx as isize - pad as isize;
    let lo = (-shift).max(0) as usize;
    let hi = (w as isize - shift).clamp(0, w as isize) as usize;
    (lo.min(hi), hi, shift)
}

/// Unfolds `x` (`c x h x w`) into `col` (`c*k*k x h*w`) with zero padding `k/2`.
pub(crate) fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, k: usize, col: &mut [T]) {
    let hw = h * w;
    let pad = k / 2;
    for ci in 0..c {
        let src_plane = &x[ci * hw..][..hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut col[row * hw..][..hw];
                let (lo, hi, shift) = valid_span(w, kx, pad);
                for oy in 0..h {
                    let d = &mut dst[oy * w..][..w];
                    let iy = oy as isize + ky as isize - pad as isize;
                    if iy < 0 || iy >= h as isize || lo == hi {
                        d.fill(T::zero());
                        continue;
                    }
                    let src = &src_plane[iy as usize * w..][..w];
                    d[..lo].fill(T::zero());
                    d[hi..].fill(T::zero());
                    let s0 = (lo as isize + shift) as usize;
                    d[lo..hi].copy_from_slice(&src[s0..s0 + (hi - lo)]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters `col` back, accumulating into `dx`.
pub(crate) fn col2im<T: Scalar>(col: &[T], c: usize, h: usize, w: usize, k: usize, dx: &mut [T]) {
    let hw = h * w;
    let pad = k / 2;
    for ci in 0..c {
        let dst_plane = &mut dx[ci * hw..][..hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &col[row * hw..][..hw];
                let (lo, hi, shift) = valid_span(w, kx, pad);
                if lo == hi {
                    continue;
                }
                for oy in 0..h {
                    let iy = oy as isize + ky as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let s = &src[oy * w..][lo..hi];
                    let d0 = (lo as isize + shift) as usize;
                    let d = &mut dst_plane[iy as usize * w + d0..][..hi - lo];
                    d.iter_mut().zip(s).for_each(|(a, &b)| *a += b);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct zero-padded convolution.
    fn naive(conv: &Conv2d<f64>, x: &Tensor<f64>) -> Tensor<f64> {
        let [n, ci, h, w] = x.shape();
        let (co, k) = (conv.out_channels, conv.kernel);
        let p = (k / 2) as isize;
        let mut y = Tensor::zeros([n, co, h, w]);
        for s in 0..n {
            for o in 0..co {
                for r in 0..h {
                    for c in 0..w {
                        let mut acc = conv.bias.value[o];
                        for i in 0..ci {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let (yy, xx) = (r as isize + ky as isize - p, c as isize + kx as isize - p);
                                    if yy < 0 || xx < 0 || yy >= h as isize || xx >= w as isize {
                                        continue;
                                    }
                                    acc += conv.weight.value[((o * ci + i) * k + ky) * k + kx]
                                        * x.get(s, i, yy as usize, xx as usize);
                                }
                            }
                        }
                        y.data_mut()[((s * co + o) * h + r) * w + c] = acc;
                    }
                }
            }
        }
        y
    }

    fn random_tensor(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (ci, co, k, h, w) in [(2, 3, 3, 5, 4), (1, 2, 9, 3, 6), (3, 1, 9, 1, 1), (2, 2, 1, 2, 3)] {
            let mut conv = Conv2d::<f64>::he_normal(ci, co, k, &mut rng);
            conv.bias.value.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
            let x = random_tensor([2, ci, h, w], &mut rng);
            let got = conv.forward(&x).unwrap();
            let want = naive(&conv, &x);
            for (a, b) in got.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (c, h, w, k) = (2, 4, 5, 3);
        let x: Vec<f64> = (0..c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..c * k * k * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut col = vec![0.0; y.len()];
        im2col(&x, c, h, w, k, &mut col);
        let mut back = vec![0.0; x.len()];
        col2im(&y, c, h, w, k, &mut back);
        let lhs: f64 = col.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        // L = <conv(x), r>; covers both the direct (co <= 3) and unfolded paths.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (ci, co, k) in [(3, 1, 5), (2, 5, 3)] {
            let mut conv = Conv2d::<f64>::he_normal(ci, co, k, &mut rng);
            let x = random_tensor([2, ci, 4, 5], &mut rng);
            let r = random_tensor([2, co, 4, 5], &mut rng);
            let loss = |c: &Conv2d<f64>, x: &Tensor<f64>| -> f64 {
                c.forward(x).unwrap().data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
            };
            conv.forward_train(&x).unwrap();
            let dx = conv.backward(&r, true).unwrap().unwrap();
            let eps = 1e-6;
            for i in (0..conv.weight.len()).step_by(7) {
                let mut p = conv.clone();
                p.weight.value[i] += eps;
                let mut m = conv.clone();
                m.weight.value[i] -= eps;
                let num = (loss(&p, &x) - loss(&m, &x)) / (2.0 * eps);
                assert!((num - conv.weight.grad[i]).abs() < 1e-6, "dW[{i}]: {num} vs {}", conv.weight.grad[i]);
            }
            for i in (0..x.data().len()).step_by(5) {
                let mut xp = x.clone();
                xp.data_mut()[i] += eps;
                let mut xm = x.clone();
                xm.data_mut()[i] -= eps;
                let num = (loss(&conv, &xp) - loss(&conv, &xm)) / (2.0 * eps);
                assert!((num - dx.data()[i]).abs() < 1e-6, "dx[{i}]: {num} vs {}", dx.data()[i]);
            }
        }
    }

    #[test]
    fn single_conv_parameter_count() {
        let conv = Conv2d::<f32>::zeros(1, 1, 3);
        assert_eq!(conv.weight.len() + conv.bias.len(), 10);
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let conv = Conv2d::<f32>::zeros(3, 4, 3);
        let x = Tensor::zeros([1, 2, 4, 4]);
        assert!(matches!(conv.forward(&x), Err(Error::Shape(_))));
    }
}
