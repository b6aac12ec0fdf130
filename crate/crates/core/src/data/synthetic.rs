//! Non-physical synthetic maps: log-distance path loss with a fixed loss per
//! wall crossed on the straight line to the transmitter, and the bearing
//! from the transmitter as angle of arrival. No ray tracing or diffraction.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codec::{lookup_codec, ChannelCodec, CKMIMAGENET_AOA, RADIOMAPSEER_PATHLOSS};
use crate::error::{Error, Result};
use crate::grid::{encode_grid, CkmGrid};

use super::manifest::{DatasetManifest, ManifestEntry};

const RAY_STEP: f64 = 0.25;

/// Axis-aligned block of cells, `row..row + height` by `col..col + width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row..self.row + self.height).contains(&row) && (self.col..self.col + self.width).contains(&col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSceneSpec {
    pub width: usize,
    pub height: usize,
    /// Fixed buildings.
    pub buildings: Vec<Rect>,
    /// Extra buildings placed at random, never covering the transmitter.
    pub random_buildings: usize,
    /// `(row, col)`.
    pub transmitter: (usize, usize),
    pub exponent: f64,
    /// Path loss in dB at distance 1 cell (a negative number, like the data).
    pub reference_loss: f64,
    /// Extra loss in dB per building edge crossed.
    pub wall_loss: f64,
    pub pathloss_codec: ChannelCodec,
    pub seed: u64,
}

impl SyntheticSceneSpec {
    pub fn new(width: usize, height: usize, transmitter: (usize, usize)) -> Result<Self> {
        Ok(Self {
            width,
            height,
            buildings: Vec::new(),
            random_buildings: 0,
            transmitter,
            exponent: 3.0,
            reference_loss: -50.0,
            wall_loss: 10.0,
            pathloss_codec: lookup_codec(RADIOMAPSEER_PATHLOSS)?,
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("grid must be non-empty, got {}x{}", self.width, self.height));
        }
        let (tr, tc) = self.transmitter;
        if tr >= self.height || tc >= self.width {
            return bad(format!("transmitter ({tr}, {tc}) outside the grid"));
        }
        if !(self.exponent.is_finite() && self.exponent >= 0.0) {
            return bad(format!("path-loss exponent must be >= 0, got {}", self.exponent));
        }
        if !(self.wall_loss.is_finite() && self.wall_loss >= 0.0) {
            return bad(format!("wall loss must be >= 0, got {}", self.wall_loss));
        }
        if !self.reference_loss.is_finite() {
            return bad("reference loss must be finite".into());
        }
        for b in &self.buildings {
            if b.width == 0 || b.height == 0 || b.row + b.height > self.height || b.col + b.width > self.width {
                return bad(format!("building {b:?} does not fit the grid"));
            }
            if b.contains(tr, tc) {
                return bad(format!("transmitter ({tr}, {tc}) is inside building {b:?}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMap {
    pub pathloss: CkmGrid,
    pub aoa: CkmGrid,
    pub buildings: Vec<Rect>,
    pub transmitter: (usize, usize),
}

fn random_rect(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Rect {
    let size = |n: usize, rng: &mut ChaCha8Rng| {
        let lo = (n / 16).max(1);
        let hi = (n / 6).max(lo);
        rng.random_range(lo..=hi)
    };
    let (height, width) = (size(h, rng), size(w, rng));
    Rect {
        row: rng.random_range(0..=h - height),
        col: rng.random_range(0..=w - width),
        height,
        width,
    }
}

fn random_buildings(
    w: usize,
    h: usize,
    count: usize,
    avoid: Option<(usize, usize)>,
    rng: &mut ChaCha8Rng,
) -> Vec<Rect> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        // A handful of retries; a building that keeps hitting the transmitter is dropped.
        for _ in 0..32 {
            let r = random_rect(w, h, rng);
            if avoid.is_none_or(|(tr, tc)| !r.contains(tr, tc)) {
                out.push(r);
                break;
            }
        }
    }
    out
}

fn building_mask(w: usize, h: usize, buildings: &[Rect]) -> Vec<bool> {
    let mut mask = vec![false; w * h];
    for b in buildings {
        for r in b.row..b.row + b.height {
            mask[r * w + b.col..r * w + b.col + b.width].fill(true);
        }
    }
    mask
}

/// Number of inside/outside transitions along the segment from the
/// transmitter to `(r, c)`, sampled every quarter cell.
fn wall_crossings(mask: &[bool], w: usize, from: (usize, usize), to: (usize, usize)) -> usize {
    let (r0, c0) = (from.0 as f64, from.1 as f64);
    let (dr, dc) = (to.0 as f64 - r0, to.1 as f64 - c0);
    let steps = ((dr.hypot(dc) / RAY_STEP).ceil() as usize).max(1);
    let mut prev = mask[from.0 * w + from.1];
    let mut crossings = 0;
    for s in 1..=steps {
        let t = s as f64 / steps as f64;
        let r = (r0 + t * dr + 0.5).floor() as usize;
        let c = (c0 + t * dc + 0.5).floor() as usize;
        let inside = mask[r * w + c];
        crossings += usize::from(inside != prev);
        prev = inside;
    }
    crossings
}

/// Bearing of `(r, c)` seen from the transmitter: 0° east, counterclockwise
/// positive (rows grow southwards), in (-180°, 180°].
pub fn bearing_deg(from: (usize, usize), to: (usize, usize)) -> f64 {
    let dy = from.0 as f64 - to.0 as f64;
    let dx = to.1 as f64 - from.1 as f64;
    let deg = dy.atan2(dx).to_degrees();
    if deg <= -180.0 {
        deg + 360.0
    } else {
        deg
    }
}

pub fn generate_synthetic(spec: &SyntheticSceneSpec) -> Result<SyntheticMap> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let tx = spec.transmitter;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut buildings = spec.buildings.clone();
    buildings.extend(random_buildings(w, h, spec.random_buildings, Some(tx), &mut rng));
    let mask = building_mask(w, h, &buildings);

    let pl_codec = spec.pathloss_codec.clone();
    let aoa_codec = lookup_codec(CKMIMAGENET_AOA)?;
    let aoa_sentinel = aoa_codec.sentinel.unwrap_or(aoa_codec.v_min);
    let mut pathloss = vec![0.0; w * h];
    let mut aoa = vec![0.0; w * h];
    pathloss
        .par_chunks_mut(w)
        .zip(aoa.par_chunks_mut(w))
        .enumerate()
        .for_each(|(r, (pl_row, aoa_row))| {
            for c in 0..w {
                if mask[r * w + c] {
                    pl_row[c] = pl_codec.v_min;
                    aoa_row[c] = aoa_sentinel;
                    continue;
                }
                let d = (r as f64 - tx.0 as f64).hypot(c as f64 - tx.1 as f64);
                let walls = wall_crossings(&mask, w, tx, (r, c)) as f64;
                let loss = spec.reference_loss - 10.0 * spec.exponent * d.max(1.0).log10() - walls * spec.wall_loss;
                pl_row[c] = pl_codec.clamp(loss);
                aoa_row[c] = bearing_deg(tx, (r, c));
            }
        });
    Ok(SyntheticMap {
        pathloss: CkmGrid::new(w, h, pl_codec, pathloss, mask.clone())?,
        aoa: CkmGrid::new(w, h, aoa_codec, aoa, mask)?,
        buildings,
        transmitter: tx,
    })
}

/// Scenes share buildings; each scene hosts several transmitter sites.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDatasetSpec {
    pub scenes: usize,
    pub transmitters_per_scene: usize,
    pub width: usize,
    pub height: usize,
    pub buildings_per_scene: usize,
    pub exponent: f64,
    pub reference_loss: f64,
    pub wall_loss: f64,
    pub seed: u64,
}

impl Default for SyntheticDatasetSpec {
    fn default() -> Self {
        Self {
            scenes: 24,
            transmitters_per_scene: 10,
            width: 64,
            height: 64,
            buildings_per_scene: 8,
            exponent: 3.0,
            reference_loss: -50.0,
            wall_loss: 10.0,
            seed: 0,
        }
    }
}

/// A generated map with its scene and transmitter ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMap {
    pub scene: String,
    pub transmitter: String,
    pub map: SyntheticMap,
}

/// Maps ordered scene by scene, transmitter by transmitter.
pub fn generate_dataset(spec: &SyntheticDatasetSpec) -> Result<Vec<LabeledMap>> {
    if spec.scenes == 0 || spec.transmitters_per_scene == 0 {
        return Err(Error::Config("synthetic dataset needs at least one scene and transmitter".into()));
    }
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 {
        return Err(Error::Config(format!("grid must be non-empty, got {w}x{h}")));
    }
    let pathloss_codec = lookup_codec(RADIOMAPSEER_PATHLOSS)?;
    let mut jobs = Vec::with_capacity(spec.scenes * spec.transmitters_per_scene);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for s in 0..spec.scenes {
        let buildings = random_buildings(w, h, spec.buildings_per_scene, None, &mut rng);
        let mask = building_mask(w, h, &buildings);
        let free: Vec<usize> = (0..w * h).filter(|&i| !mask[i]).collect();
        if free.is_empty() {
            return Err(Error::Config(format!("scene {s} is entirely covered by buildings")));
        }
        for t in 0..spec.transmitters_per_scene {
            let cell = free[rng.random_range(0..free.len())];
            jobs.push((
                format!("{s:03}"),
                format!("{s:03}_{t:02}"),
                SyntheticSceneSpec {
                    width: w,
                    height: h,
                    buildings: buildings.clone(),
                    random_buildings: 0,
                    transmitter: (cell / w, cell % w),
                    exponent: spec.exponent,
                    reference_loss: spec.reference_loss,
                    wall_loss: spec.wall_loss,
                    pathloss_codec: pathloss_codec.clone(),
                    seed: 0,
                },
            ));
        }
    }
    jobs.into_par_iter()
        .map(|(scene, transmitter, scene_spec)| {
            Ok(LabeledMap {
                scene,
                transmitter,
                map: generate_synthetic(&scene_spec)?,
            })
        })
        .collect()
}

/// Writes `pathloss/<tx>.png` and `aoa/<tx>.png` under `dir` together with
/// `pathloss.manifest` and `aoa.manifest` (relative paths, no split assigned).
/// Returns the two manifests as loaded back from disk.
pub fn write_dataset(maps: &[LabeledMap], dir: &Path) -> Result<(DatasetManifest, DatasetManifest)> {
    let first = maps
        .first()
        .ok_or_else(|| Error::Data("no synthetic maps to write".into()))?;
    let (w, h) = (first.map.pathloss.width(), first.map.pathloss.height());
    let mut loaded = Vec::with_capacity(2);
    for channel in ["pathloss", "aoa"] {
        let sub = dir.join(channel);
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let mut entries = Vec::with_capacity(maps.len());
        for m in maps {
            let grid = if channel == "pathloss" { &m.map.pathloss } else { &m.map.aoa };
            let file = format!("{}.png", m.transmitter);
            encode_grid(grid, grid.codec())?.save_png(sub.join(&file))?;
            entries.push(ManifestEntry {
                path: Path::new(channel).join(file),
                split: None,
                scene: m.scene.clone(),
                transmitter: m.transmitter.clone(),
            });
        }
        let grid = if channel == "pathloss" { &first.map.pathloss } else { &first.map.aoa };
        let manifest = DatasetManifest {
            name: format!("synthetic-{channel}"),
            codec: grid.codec().name.clone(),
            width: w,
            height: h,
            entries,
        };
        let path = dir.join(format!("{channel}.manifest"));
        manifest.save(&path)?;
        loaded.push(DatasetManifest::load(&path)?);
    }
    let aoa = loaded.pop().expect("two manifests");
    let pathloss = loaded.pop().expect("two manifests");
    Ok((pathloss, aoa))
}
