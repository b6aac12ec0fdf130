//! Channel knowledge map (CKM) reconstruction from uniformly sparse
//! measurements, treated as single-image super-resolution.
//!
//! The crate covers the whole pipeline: pixel/physical codecs, the uniform
//! sampling operator, interpolation baselines, an SRResNet generator with
//! its training loop, quality metrics, dataset ingestion and a synthetic map
//! generator.

pub mod atomic;
pub mod baselines;
pub mod checkpoint;
pub mod codec;
pub mod data;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod model;
pub mod montage;
pub mod nn;
pub mod optim;
pub mod sampling;
pub mod training;

pub use codec::{lookup_codec, standard_codecs, ChannelCodec, ChannelKind};
pub use error::{Error, Result};
pub use grid::{decode_image, encode_grid, CkmGrid, PixelImage};
pub use model::{SrResNet, SrResNetConfig};
pub use sampling::SamplingSpec;
