//! Interpolation baselines: nearest-neighbour and cubic-convolution upsampling.
//!
//! Bicubic uses the Keys cubic-convolution kernel with parameter `a`
//! (default -0.5), half-pixel-centre coordinates
//! `u = (i + 0.5) / k - 0.5`, and replicate-edge padding. Results are
//! clamped to the codec domain because the kernel overshoots at edges.
//! Masked cells are interpolated like any other cell.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::CkmGrid;

pub const DEFAULT_CUBIC_A: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpsampleMethod {
    Nearest,
    Bicubic { a: f64 },
}

impl Default for UpsampleMethod {
    fn default() -> Self {
        UpsampleMethod::Bicubic { a: DEFAULT_CUBIC_A }
    }
}

impl fmt::Display for UpsampleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpsampleMethod::Nearest => f.write_str("nearest"),
            UpsampleMethod::Bicubic { .. } => f.write_str("bicubic"),
        }
    }
}

impl UpsampleMethod {
    pub fn apply(&self, grid: &CkmGrid, k: usize) -> Result<CkmGrid> {
        match *self {
            UpsampleMethod::Nearest => nn_upsample(grid, k),
            UpsampleMethod::Bicubic { a } => bicubic_upsample(grid, k, a),
        }
    }
}

fn check_factor(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("upsampling factor must be at least 1".into()));
    }
    Ok(())
}

/// Block replication of a row-major buffer.
pub fn nn_resample<T: Copy>(values: &[T], w: usize, h: usize, k: usize) -> Vec<T> {
    let ow = w * k;
    let mut out = Vec::with_capacity(ow * h * k);
    for i in 0..h * k {
        let src = &values[(i / k) * w..][..w];
        out.extend((0..ow).map(|j| src[j / k]));
    }
    out
}

pub fn nn_upsample(grid: &CkmGrid, k: usize) -> Result<CkmGrid> {
    check_factor(k)?;
    let (w, h) = (grid.width(), grid.height());
    CkmGrid::new(
        w * k,
        h * k,
        grid.codec().clone(),
        nn_resample(grid.values(), w, h, k),
        nn_resample(grid.mask(), w, h, k),
    )
}

/// Keys cubic-convolution kernel.
pub fn cubic_kernel(x: f64, a: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Source taps and weights for every output index along one axis.
fn axis_taps(n: usize, k: usize, a: f64) -> Vec<([usize; 4], [f64; 4])> {
    let last = n as isize - 1;
    (0..n * k)
        .map(|i| {
            let u = (i as f64 + 0.5) / k as f64 - 0.5;
            let base = u.floor();
            let t = u - base;
            let base = base as isize;
            let mut idx = [0usize; 4];
            let mut wts = [0.0; 4];
            for m in 0..4 {
                let off = m as isize - 1;
                idx[m] = (base + off).clamp(0, last) as usize;
                wts[m] = cubic_kernel(t - off as f64, a);
            }
            (idx, wts)
        })
        .collect()
}

/// Unclamped separable cubic-convolution resampling of a row-major buffer.
pub fn cubic_resample(values: &[f64], w: usize, h: usize, k: usize, a: f64) -> Vec<f64> {
    let (ow, oh) = (w * k, h * k);
    let col_taps = axis_taps(w, k, a);
    let row_taps = axis_taps(h, k, a);

    // Horizontal pass: h x ow
    let mut tmp = vec![0.0; h * ow];
    for r in 0..h {
        let src = &values[r * w..][..w];
        let dst = &mut tmp[r * ow..][..ow];
        for (d, (idx, wts)) in dst.iter_mut().zip(&col_taps) {
            *d = (0..4).map(|m| wts[m] * src[idx[m]]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for (i, (idx, wts)) in row_taps.iter().enumerate() {
        let dst = &mut out[i * ow..][..ow];
        for m in 0..4 {
            let src = &tmp[idx[m] * ow..][..ow];
            let wt = wts[m];
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += wt * s);
        }
    }
    out
}

pub fn bicubic_upsample(grid: &CkmGrid, k: usize, a: f64) -> Result<CkmGrid> {
    check_factor(k)?;
    if !a.is_finite() {
        return Err(Error::Config(format!("cubic kernel parameter {a} is not finite")));
    }
    let (w, h) = (grid.width(), grid.height());
    let codec = grid.codec();
    let values = cubic_resample(grid.values(), w, h, k, a)
        .into_iter()
        .map(|v| codec.clamp(v))
        .collect();
    CkmGrid::new(
        w * k,
        h * k,
        codec.clone(),
        values,
        nn_resample(grid.mask(), w, h, k),
    )
}
