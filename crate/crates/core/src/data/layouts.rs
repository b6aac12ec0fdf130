//! One adapter per public dataset layout.
//!
//! * RadioMapSeer DPM: `<root>/gain/DPM/<map>_<tx>.png` (or the same names
//!   directly under `<root>`). Scene is the map number; a transmitter site is
//!   identified by `<map>_<tx>` since transmitter indices restart per map.
//! * CKMImageNet path loss / AoA: `<root>/pathloss/*.png` or `<root>/aoa/*.png`
//!   (or directly under `<root>`), named `<scene>_<tx>.png` where `<tx>` is
//!   numeric and `<scene>` may contain further underscores.

use std::fs;
use std::path::{Path, PathBuf};

use crate::codec::{CKMIMAGENET_AOA, CKMIMAGENET_PATHLOSS, RADIOMAPSEER_PATHLOSS};
use crate::error::{Error, Result};

use super::manifest::{DatasetManifest, ManifestEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    RadioMapSeerDpm,
    CkmImageNetPathLoss,
    CkmImageNetAoA,
}

impl Layout {
    pub fn codec_name(self) -> &'static str {
        match self {
            Layout::RadioMapSeerDpm => RADIOMAPSEER_PATHLOSS,
            Layout::CkmImageNetPathLoss => CKMIMAGENET_PATHLOSS,
            Layout::CkmImageNetAoA => CKMIMAGENET_AOA,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Layout::RadioMapSeerDpm => "radiomapseer-dpm",
            Layout::CkmImageNetPathLoss => "ckmimagenet-pathloss",
            Layout::CkmImageNetAoA => "ckmimagenet-aoa",
        }
    }

    fn subdir(self) -> &'static str {
        match self {
            Layout::RadioMapSeerDpm => "gain/DPM",
            Layout::CkmImageNetPathLoss => "pathloss",
            Layout::CkmImageNetAoA => "aoa",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        [Layout::RadioMapSeerDpm, Layout::CkmImageNetPathLoss, Layout::CkmImageNetAoA]
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::Data(format!("unknown layout `{s}`")))
    }
}

/// `(scene, transmitter)` from a file stem under the layout's naming rule.
pub fn parse_file_name(layout: Layout, stem: &str) -> Result<(String, String)> {
    let bad = || Error::Data(format!("cannot parse `{stem}` as a {} file name", layout.name()));
    let (scene, tx) = stem.rsplit_once('_').ok_or_else(bad)?;
    if scene.is_empty() || tx.is_empty() || !tx.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    match layout {
        Layout::RadioMapSeerDpm => {
            if !scene.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            Ok((scene.to_string(), format!("{scene}_{tx}")))
        }
        Layout::CkmImageNetPathLoss | Layout::CkmImageNetAoA => {
            Ok((scene.to_string(), format!("{scene}_{tx}")))
        }
    }
}

/// Scans a dataset directory into a manifest (all entries unassigned, sorted by path).
pub fn ingest(root: impl AsRef<Path>, layout: Layout) -> Result<DatasetManifest> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::Data(format!("{} is not a directory", root.display())));
    }
    let nested = root.join(layout.subdir());
    let dir = if nested.is_dir() { nested } else { root.to_path_buf() };
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data(format!("no PNG images in {}", dir.display())));
    }
    let mut size = None;
    let mut entries = Vec::with_capacity(paths.len());
    for path in paths {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let (scene, transmitter) = parse_file_name(layout, stem)?;
        let dims = image::image_dimensions(&path).map_err(|source| Error::Image {
            path: path.clone(),
            source,
        })?;
        match size {
            None => size = Some(dims),
            Some(s) if s != dims => {
                return Err(Error::Data(format!(
                    "mixed image sizes: {} is {}x{}, earlier images are {}x{}",
                    path.display(),
                    dims.0,
                    dims.1,
                    s.0,
                    s.1
                )))
            }
            _ => {}
        }
        entries.push(ManifestEntry {
            path,
            split: None,
            scene,
            transmitter,
        });
    }
    let (w, h) = size.expect("non-empty");
    let manifest = DatasetManifest {
        name: layout.name().to_string(),
        codec: layout.codec_name().to_string(),
        width: w as usize,
        height: h as usize,
        entries,
    };
    manifest.validate()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PixelImage;

    #[test]
    fn name_rules() {
        assert_eq!(
            parse_file_name(Layout::RadioMapSeerDpm, "12_7").unwrap(),
            ("12".into(), "12_7".into())
        );
        assert!(parse_file_name(Layout::RadioMapSeerDpm, "city_7").is_err());
        assert!(parse_file_name(Layout::RadioMapSeerDpm, "12").is_err());
        assert_eq!(
            parse_file_name(Layout::CkmImageNetAoA, "beijing_a_03").unwrap(),
            ("beijing_a".into(), "beijing_a_03".into())
        );
        assert!(parse_file_name(Layout::CkmImageNetPathLoss, "x_y").is_err());
    }

    #[test]
    fn ingest_nested_radiomapseer() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("gain/DPM");
        fs::create_dir_all(&sub).unwrap();
        for name in ["1_0", "0_1", "0_0"] {
            PixelImage::filled(8, 8, 3).unwrap().save_png(sub.join(format!("{name}.png"))).unwrap();
        }
        fs::write(sub.join("readme.txt"), "ignored").unwrap();
        let m = ingest(dir.path(), Layout::RadioMapSeerDpm).unwrap();
        assert_eq!(m.codec, RADIOMAPSEER_PATHLOSS);
        assert_eq!((m.width, m.height), (8, 8));
        let tx: Vec<&str> = m.entries.iter().map(|e| e.transmitter.as_str()).collect();
        assert_eq!(tx, ["0_0", "0_1", "1_0"]);
    }

    #[test]
    fn ingest_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(ingest(dir.path(), Layout::CkmImageNetPathLoss).is_err());
        assert!(ingest(dir.path().join("missing"), Layout::CkmImageNetPathLoss).is_err());
        PixelImage::filled(8, 8, 0).unwrap().save_png(dir.path().join("a_1.png")).unwrap();
        PixelImage::filled(4, 8, 0).unwrap().save_png(dir.path().join("a_2.png")).unwrap();
        assert!(ingest(dir.path(), Layout::CkmImageNetPathLoss).is_err());
    }
}
