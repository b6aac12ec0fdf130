//! Dataset handling: manifests, public-layout ingestion, train/test splits,
//! and a synthetic map generator for self-contained experiments.

mod layouts;
mod manifest;
mod split;
mod synthetic;

pub use layouts::{ingest, parse_file_name, Layout};
pub use manifest::{DatasetManifest, ManifestEntry, Split};
pub use split::{split, Disjointness};
pub use synthetic::{
    bearing_deg, generate_dataset, generate_synthetic, write_dataset, LabeledMap, Rect,
    SyntheticDatasetSpec, SyntheticMap, SyntheticSceneSpec,
};
