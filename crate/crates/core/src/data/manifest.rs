//! Dataset manifest: a tab-separated text file.
//!
//! ```text
//! #ckm-manifest 1
//! #name <dataset name>
//! #codec <codec name>
//! #size <width>x<height>
//! path<TAB>split<TAB>scene<TAB>transmitter
//! ```
//!
//! `split` is `train`, `test`, or `-` (unassigned). Relative paths resolve
//! against the manifest's directory; loaded manifests hold absolute paths.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::codec::{lookup_codec, ChannelCodec};
use crate::error::{Error, Result};
use crate::grid::{decode_image, CkmGrid, PixelImage};

const MAGIC_LINE: &str = "#ckm-manifest 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split tag `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub split: Option<Split>,
    pub scene: String,
    pub transmitter: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub name: String,
    pub codec: String,
    pub width: usize,
    pub height: usize,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn codec(&self) -> Result<ChannelCodec> {
        lookup_codec(&self.codec)
    }

    /// Checks for duplicate paths.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(&e.path) {
                return Err(Error::Data(format!("duplicate path {}", e.path.display())));
            }
        }
        Ok(())
    }

    pub fn entries_in(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == Some(split))
    }

    pub fn count(&self, split: Split) -> usize {
        self.entries_in(split).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{MAGIC_LINE}\n#name {}\n#codec {}\n#size {}x{}\n",
            self.name, self.codec, self.width, self.height
        );
        for e in &self.entries {
            let split = e.split.map_or_else(|| "-".to_string(), |s| s.to_string());
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.path.display(),
                split,
                e.scene,
                e.transmitter
            ));
        }
        s
    }

    /// Parses manifest text; relative entry paths are joined onto `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == MAGIC_LINE => {}
            _ => return Err(Error::Data(format!("manifest must start with `{MAGIC_LINE}`"))),
        }
        let (mut name, mut codec, mut size) = (None, None, None);
        let mut entries = Vec::new();
        for (no, line) in lines {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (key, value) = rest.split_once(' ').unwrap_or((rest, ""));
                match key {
                    "name" => name = Some(value.to_string()),
                    "codec" => codec = Some(value.to_string()),
                    "size" => size = Some(parse_size(value)?),
                    _ => {}
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [path, split, scene, tx] = fields[..] else {
                return Err(Error::Data(format!("manifest line {}: expected 4 fields", no + 1)));
            };
            let path = PathBuf::from(path);
            let path = match base {
                Some(b) if path.is_relative() => b.join(path),
                _ => path,
            };
            entries.push(ManifestEntry {
                path,
                split: if split == "-" { None } else { Some(split.parse()?) },
                scene: scene.to_string(),
                transmitter: tx.to_string(),
            });
        }
        let missing = |k: &str| Error::Data(format!("manifest header lacks `#{k}`"));
        let (width, height) = size.ok_or_else(|| missing("size"))?;
        let m = Self {
            name: name.ok_or_else(|| missing("name"))?,
            codec: codec.ok_or_else(|| missing("codec"))?,
            width,
            height,
            entries,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let absolute = std::path::absolute(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, absolute.parent())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::atomic::write_bytes(path.as_ref(), self.to_text().as_bytes())
    }

    /// Loads and decodes one entry, checking its size against the header.
    pub fn load_grid(&self, entry: &ManifestEntry, codec: &ChannelCodec) -> Result<CkmGrid> {
        let img = PixelImage::load_png(&entry.path)?;
        if (img.width(), img.height()) != (self.width, self.height) {
            return Err(Error::Data(format!(
                "{} is {}x{}, manifest says {}x{}",
                entry.path.display(),
                img.width(),
                img.height(),
                self.width,
                self.height
            )));
        }
        Ok(decode_image(&img, codec))
    }
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Data(format!("bad size `{s}`, expected WxH"));
    let (w, h) = s.split_once('x').ok_or_else(bad)?;
    Ok((w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?))
}
