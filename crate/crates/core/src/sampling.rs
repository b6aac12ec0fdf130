//! Uniform sparse-measurement operator and the SR-factor relation.
//!
//! Sampling keeps one cell out of every `k x k` block, at a fixed phase
//! inside the block. Sizes not divisible by `k` are rejected, never padded.

use crate::error::{Error, Result};
use crate::grid::CkmGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingSpec {
    factor: usize,
    row_offset: usize,
    col_offset: usize,
}

impl SamplingSpec {
    /// Factor `k` at the canonical phase (0, 0).
    pub fn new(factor: usize) -> Result<Self> {
        Self::with_phase(factor, 0, 0)
    }

    pub fn with_phase(factor: usize, row_offset: usize, col_offset: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Config("sampling factor must be at least 1".into()));
        }
        if row_offset >= factor || col_offset >= factor {
            return Err(Error::Config(format!(
                "phase ({row_offset}, {col_offset}) must lie in [0, {factor})"
            )));
        }
        Ok(Self {
            factor,
            row_offset,
            col_offset,
        })
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn phase(&self) -> (usize, usize) {
        (self.row_offset, self.col_offset)
    }

    /// Fraction of cells kept, `1 / k^2`, as (numerator, denominator).
    pub fn sampled_fraction(&self) -> (usize, usize) {
        (1, self.factor * self.factor)
    }

    pub fn check_dims(&self, w: usize, h: usize) -> Result<(usize, usize)> {
        let k = self.factor;
        if w == 0 || h == 0 || w % k != 0 || h % k != 0 {
            return Err(Error::Dimension { w, h, k });
        }
        Ok((w / k, h / k))
    }
}

/// Samples a row-major `w x h` buffer. Used for grids, masks, and raw training pixels.
pub fn downsample_values<T: Copy>(
    values: &[T],
    w: usize,
    h: usize,
    spec: &SamplingSpec,
) -> Result<Vec<T>> {
    let (lw, lh) = spec.check_dims(w, h)?;
    debug_assert_eq!(values.len(), w * h);
    let k = spec.factor;
    let (r0, c0) = spec.phase();
    let mut out = Vec::with_capacity(lw * lh);
    for i in 0..lh {
        let row = &values[(i * k + r0) * w..][..w];
        out.extend((0..lw).map(|j| row[j * k + c0]));
    }
    Ok(out)
}

pub fn downsample(grid: &CkmGrid, spec: &SamplingSpec) -> Result<CkmGrid> {
    let (w, h) = (grid.width(), grid.height());
    let (lw, lh) = spec.check_dims(w, h)?;
    let values = downsample_values(grid.values(), w, h, spec)?;
    let mask = downsample_values(grid.mask(), w, h, spec)?;
    CkmGrid::new(lw, lh, grid.codec().clone(), values, mask)
}

/// Row-major `w x h` selection mask; `true` exactly at sampled cells.
pub fn selection_mask(w: usize, h: usize, spec: &SamplingSpec) -> Result<Vec<bool>> {
    spec.check_dims(w, h)?;
    let k = spec.factor;
    let (r0, c0) = spec.phase();
    Ok((0..h)
        .flat_map(|r| (0..w).map(move |c| r % k == r0 && c % k == c0))
        .collect())
}

/// Linear upscaling factor `k = sqrt(wh / w'h')`, required to be an exact integer
/// with the same ratio along both axes.
pub fn sr_factor(w: usize, h: usize, w_prime: usize, h_prime: usize) -> Result<usize> {
    let incompatible = || {
        Error::IncompatibleShapes(format!(
            "{w}x{h} is not an integer isotropic upscaling of {w_prime}x{h_prime}"
        ))
    };
    if w_prime == 0 || h_prime == 0 || w % w_prime != 0 || h % h_prime != 0 {
        return Err(incompatible());
    }
    let (kw, kh) = (w / w_prime, h / h_prime);
    if kw != kh {
        return Err(incompatible());
    }
    let ratio = (w * h) / (w_prime * h_prime);
    let k = (ratio as f64).sqrt().round() as usize;
    if k * k != ratio || (w * h) % (w_prime * h_prime) != 0 {
        return Err(incompatible());
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{lookup_codec, RADIOMAPSEER_PATHLOSS};

    fn grid(w: usize, h: usize, values: Vec<f64>) -> CkmGrid {
        let c = lookup_codec(RADIOMAPSEER_PATHLOSS).unwrap();
        CkmGrid::from_values(w, h, c, values).unwrap()
    }

    #[test]
    fn downsample_selects_block_corners() {
        let g = grid(4, 4, (1..=16).map(f64::from).collect());
        let s = downsample(&g, &SamplingSpec::new(2).unwrap()).unwrap();
        assert_eq!((s.width(), s.height()), (2, 2));
        assert_eq!(s.values(), &[1.0, 3.0, 9.0, 11.0]);
    }

    #[test]
    fn phase_shifts_selection() {
        let g = grid(4, 4, (1..=16).map(f64::from).collect());
        let s = downsample(&g, &SamplingSpec::with_phase(2, 1, 0).unwrap()).unwrap();
        assert_eq!(s.values(), &[5.0, 7.0, 13.0, 15.0]);
        assert!(SamplingSpec::with_phase(2, 2, 0).is_err());
    }

    #[test]
    fn shape_examples() {
        let g = grid(256, 256, vec![-100.0; 256 * 256]);
        let s = downsample(&g, &SamplingSpec::new(4).unwrap()).unwrap();
        assert_eq!((s.width(), s.height()), (64, 64));
        let id = downsample(&g, &SamplingSpec::new(1).unwrap()).unwrap();
        assert_eq!(id, g);
    }

    #[test]
    fn selection_mask_examples() {
        let m = selection_mask(4, 4, &SamplingSpec::new(2).unwrap()).unwrap();
        let hits: Vec<usize> = (0..16).filter(|&i| m[i]).collect();
        assert_eq!(hits, vec![0, 2, 8, 10]);
        let m = selection_mask(128, 128, &SamplingSpec::new(16).unwrap()).unwrap();
        assert_eq!(m.iter().filter(|&&b| b).count(), 64);
        match selection_mask(4, 4, &SamplingSpec::new(3).unwrap()) {
            Err(Error::Dimension { w: 4, h: 4, k: 3 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sr_factor_examples() {
        assert_eq!(sr_factor(256, 256, 64, 64).unwrap(), 4);
        assert_eq!(sr_factor(128, 128, 8, 8).unwrap(), 16);
        assert!(sr_factor(256, 256, 64, 32).is_err());
        assert!(sr_factor(10, 10, 3, 3).is_err());
        assert!(sr_factor(10, 10, 0, 3).is_err());
    }
}
