//! Reconstruction quality metrics: pixel MSE, PSNR, SSIM and physical RMSE.
//!
//! Image metrics work on the 8-bit encoding; RMSE works on physical values in
//! codec units. Aggregates are per-image means, so the reported PSNR is the
//! mean of per-image PSNRs, not the PSNR of the mean MSE.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::codec::ChannelCodec;
use crate::error::{Error, Result};
use crate::grid::{encode_grid, CkmGrid, PixelImage};

pub const PEAK: f64 = 255.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
pub const SSIM_C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);

fn same_dims(a: &PixelImage, b: &PixelImage) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Metric(format!(
            "dimension mismatch: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

pub fn mse_pixel(a: &PixelImage, b: &PixelImage) -> Result<f64> {
    same_dims(a, b)?;
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.pixels().len() as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

/// PSNR in dB; identical images give `f64::INFINITY`.
pub fn psnr(a: &PixelImage, b: &PixelImage) -> Result<f64> {
    Ok(psnr_from_mse(mse_pixel(a, b)?))
}

pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut g = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let x = i as f64 - c;
        *v = (-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    g
}

/// Separable valid-region Gaussian filter of a row-major image.
fn filter_valid(src: &[f64], w: usize, h: usize, g: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let n = SSIM_WINDOW;
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut tmp = vec![0.0; h * ow];
    for r in 0..h {
        let row = &src[r * w..][..w];
        for c in 0..ow {
            tmp[r * ow + c] = (0..n).map(|t| g[t] * row[c + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..n).map(|t| g[t] * tmp[(r + t) * ow + c]).sum();
        }
    }
    out
}

/// Mean SSIM over all fully-contained 11x11 Gaussian windows.
pub fn ssim(a: &PixelImage, b: &PixelImage) -> Result<f64> {
    same_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Metric(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let x: Vec<f64> = a.pixels().iter().map(|&p| p as f64).collect();
    let y: Vec<f64> = b.pixels().iter().map(|&p| p as f64).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();

    let g = gaussian_window();
    let mu_x = filter_valid(&x, w, h, &g);
    let mu_y = filter_valid(&y, w, h, &g);
    let e_xx = filter_valid(&xx, w, h, &g);
    let e_yy = filter_valid(&yy, w, h, &g);
    let e_xy = filter_valid(&xy, w, h, &g);

    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2))
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}

/// RMSE in codec units. With `mask_buildings`, cells masked in `truth` are excluded.
pub fn rmse_physical(reconstructed: &CkmGrid, truth: &CkmGrid, mask_buildings: bool) -> Result<f64> {
    if reconstructed.kind() != truth.kind() {
        return Err(Error::Metric(format!(
            "channel kind mismatch: {} vs {}",
            reconstructed.kind(),
            truth.kind()
        )));
    }
    if reconstructed.width() != truth.width() || reconstructed.height() != truth.height() {
        return Err(Error::Metric(format!(
            "dimension mismatch: {}x{} vs {}x{}",
            reconstructed.width(),
            reconstructed.height(),
            truth.width(),
            truth.height()
        )));
    }
    let (sum, count) = reconstructed
        .values()
        .iter()
        .zip(truth.values())
        .zip(truth.mask())
        .filter(|(_, &m)| !(mask_buildings && m))
        .fold((0.0, 0usize), |(s, n), ((a, b), _)| {
            let d = a - b;
            (s + d * d, n + 1)
        });
    if count == 0 {
        return Err(Error::Metric("no cells left after masking".into()));
    }
    Ok((sum / count as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub id: String,
    /// dB; infinite for an exact reconstruction.
    pub psnr: f64,
    pub ssim: f64,
    pub mse_pixel: f64,
    /// Codec units (dB or degrees).
    pub rmse_physical: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    /// Mean over finite per-image PSNRs; infinite if every record was exact.
    pub psnr: f64,
    pub psnr_infinite: usize,
    pub ssim: f64,
    pub mse_pixel: f64,
    pub rmse_physical: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub records: Vec<MetricsRecord>,
    pub aggregate: MetricsSummary,
}

#[derive(Debug, Clone)]
pub struct EvalPair {
    pub id: String,
    pub reconstructed: CkmGrid,
    pub truth: CkmGrid,
}

pub fn evaluate_pair(pair: &EvalPair, codec: &ChannelCodec, mask_buildings: bool) -> Result<MetricsRecord> {
    let a = encode_grid(&pair.reconstructed, codec)?;
    let b = encode_grid(&pair.truth, codec)?;
    let mse = mse_pixel(&a, &b)?;
    Ok(MetricsRecord {
        id: pair.id.clone(),
        psnr: psnr_from_mse(mse),
        ssim: ssim(&a, &b)?,
        mse_pixel: mse,
        rmse_physical: rmse_physical(&pair.reconstructed, &pair.truth, mask_buildings)?,
    })
}

pub fn summarize(records: &[MetricsRecord]) -> Result<MetricsSummary> {
    if records.is_empty() {
        return Err(Error::Metric("no records to aggregate".into()));
    }
    let n = records.len() as f64;
    let mean = |f: fn(&MetricsRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
    let finite: Vec<f64> = records.iter().map(|r| r.psnr).filter(|p| p.is_finite()).collect();
    let psnr = if finite.is_empty() {
        f64::INFINITY
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    Ok(MetricsSummary {
        psnr,
        psnr_infinite: records.len() - finite.len(),
        ssim: mean(|r| r.ssim),
        mse_pixel: mean(|r| r.mse_pixel),
        rmse_physical: mean(|r| r.rmse_physical),
        count: records.len(),
    })
}

/// Per-image metrics (computed in parallel, kept in input order) and their means.
pub fn evaluate(pairs: &[EvalPair], codec: &ChannelCodec, mask_buildings: bool) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::Metric("evaluation needs at least one pair".into()));
    }
    let records = pairs
        .par_iter()
        .map(|p| evaluate_pair(p, codec, mask_buildings))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = summarize(&records)?;
    Ok(MetricsReport { records, aggregate })
}

/// One row per method with the columns method, PSNR, SSIM, MSE(pixel), RMSE.
#[derive(Debug, Clone, Default)]
pub struct MetricsTable {
    pub title: String,
    pub unit: String,
    pub rows: Vec<(String, MetricsSummary)>,
}

impl MetricsTable {
    pub fn new(title: impl Into<String>, unit: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            unit: unit.into(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, method: impl Into<String>, summary: MetricsSummary) {
        self.rows.push((method.into(), summary));
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("method,psnr,ssim,mse_pixel,rmse_{}\n", self.unit);
        for (m, r) in &self.rows {
            let _ = writeln!(s, "{m},{},{},{},{}", r.psnr, r.ssim, r.mse_pixel, r.rmse_physical);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(s, "{}", self.title);
        }
        let rmse = format!("RMSE({})", self.unit);
        let _ = writeln!(
            s,
            "{:<10} {:>8} {:>8} {:>12} {:>10}",
            "method", "PSNR", "SSIM", "MSE(pixel)", rmse
        );
        for (m, r) in &self.rows {
            let _ = writeln!(
                s,
                "{:<10} {:>8.2} {:>8.4} {:>12.3} {:>10.3}",
                m, r.psnr, r.ssim, r.mse_pixel, r.rmse_physical
            );
        }
        s
    }
}
