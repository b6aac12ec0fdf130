use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Sub-pixel rearrangement `(N, C*r*r, H, W) -> (N, C, r*H, r*W)`:
/// `out[c][r*i + di][r*j + dj] = in[c*r*r + di*r + dj][i][j]`.
pub fn pixel_shuffle<T: Scalar>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let [n, cin, h, w] = x.shape();
    if r == 0 || cin % (r * r) != 0 {
        return Err(Error::Shape(format!(
            "pixel shuffle needs channels divisible by {}, got {cin}",
            r * r
        )));
    }
    let c = cin / (r * r);
    let (oh, ow) = (h * r, w * r);
    let mut out = Tensor::zeros([n, c, oh, ow]);
    for s in 0..n {
        let src = x.sample(s);
        let dst = out.sample_mut(s);
        for ci in 0..c {
            for di in 0..r {
                for dj in 0..r {
                    let plane = &src[((ci * r + di) * r + dj) * h * w..][..h * w];
                    for i in 0..h {
                        let row = &mut dst[(ci * oh + r * i + di) * ow..][..ow];
                        for j in 0..w {
                            row[r * j + dj] = plane[i * w + j];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`pixel_shuffle`]; also its backward pass.
pub fn pixel_unshuffle<T: Scalar>(y: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let [n, c, oh, ow] = y.shape();
    if r == 0 || oh % r != 0 || ow % r != 0 {
        return Err(Error::Shape(format!(
            "pixel unshuffle needs spatial dims divisible by {r}, got {oh}x{ow}"
        )));
    }
    let (h, w) = (oh / r, ow / r);
    let mut out = Tensor::zeros([n, c * r * r, h, w]);
    for s in 0..n {
        let src = y.sample(s);
        let dst = out.sample_mut(s);
        for ci in 0..c {
            for di in 0..r {
                for dj in 0..r {
                    let plane = &mut dst[((ci * r + di) * r + dj) * h * w..][..h * w];
                    for i in 0..h {
                        let row = &src[(ci * oh + r * i + di) * ow..][..ow];
                        for j in 0..w {
                            plane[i * w + j] = row[r * j + dj];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
