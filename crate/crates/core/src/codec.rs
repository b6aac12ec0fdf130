//! Affine mappings between physical channel-knowledge values and 8-bit pixels.
//!
//! A codec maps `[v_min, v_max]` linearly onto `[0, 255]`. Encoding rounds
//! half-up to the nearest integer and clamps, so every pixel decodes and
//! re-encodes to itself.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The kind of channel knowledge carried by a map. One kind per grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelKind {
    PathLoss,
    AoA,
}

impl ChannelKind {
    pub fn unit(self) -> &'static str {
        match self {
            ChannelKind::PathLoss => "dB",
            ChannelKind::AoA => "deg",
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelKind::PathLoss => f.write_str("path-loss"),
            ChannelKind::AoA => f.write_str("aoa"),
        }
    }
}

pub const RADIOMAPSEER_PATHLOSS: &str = "radiomapseer_pathloss";
pub const CKMIMAGENET_PATHLOSS: &str = "ckmimagenet_pathloss";
pub const CKMIMAGENET_AOA: &str = "ckmimagenet_aoa";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCodec {
    pub name: String,
    pub kind: ChannelKind,
    /// Physical value stored as pixel 0.
    pub v_min: f64,
    /// Physical value stored as pixel 255.
    pub v_max: f64,
    /// Physical value reserved for building cells, if the layout has one.
    pub sentinel: Option<f64>,
}

impl ChannelCodec {
    pub fn new(
        name: impl Into<String>,
        kind: ChannelKind,
        v_min: f64,
        v_max: f64,
        sentinel: Option<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if !(v_min.is_finite() && v_max.is_finite()) || v_min >= v_max {
            return Err(Error::InvalidCodec(format!(
                "{name}: need finite v_min < v_max, got ({v_min}, {v_max})"
            )));
        }
        if let Some(s) = sentinel {
            if !(v_min..=v_max).contains(&s) {
                return Err(Error::InvalidCodec(format!(
                    "{name}: sentinel {s} outside [{v_min}, {v_max}]"
                )));
            }
        }
        Ok(Self {
            name,
            kind,
            v_min,
            v_max,
            sentinel,
        })
    }

    pub fn span(&self) -> f64 {
        self.v_max - self.v_min
    }

    /// Width of one pixel step in physical units.
    pub fn step(&self) -> f64 {
        self.span() / 255.0
    }

    /// Largest decode(encode(v)) error for in-domain values, ignoring rounding noise.
    pub fn quantization_bound(&self) -> f64 {
        self.span() / 510.0
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.v_min, self.v_max)
    }

    /// Round-half-up quantization of a finite value; out-of-domain values clamp.
    pub fn encode_value(&self, v: f64) -> u8 {
        let scaled = (v - self.v_min) / self.span() * 255.0;
        (scaled + 0.5).floor().clamp(0.0, 255.0) as u8
    }

    pub fn decode_pixel(&self, p: u8) -> f64 {
        self.v_min + (p as f64 / 255.0) * self.span()
    }

    /// Continuous image intensity in `[0, 1]` (clamped).
    pub fn normalize(&self, v: f64) -> f64 {
        ((v - self.v_min) / self.span()).clamp(0.0, 1.0)
    }

    pub fn denormalize(&self, t: f64) -> f64 {
        self.v_min + t * self.span()
    }

    pub fn sentinel_pixel(&self) -> Option<u8> {
        self.sentinel.map(|s| self.encode_value(s))
    }
}

/// The three mappings used by the public datasets.
pub fn standard_codecs() -> Vec<ChannelCodec> {
    vec![
        ChannelCodec {
            name: RADIOMAPSEER_PATHLOSS.into(),
            kind: ChannelKind::PathLoss,
            v_min: -147.0,
            v_max: -47.0,
            sentinel: None,
        },
        ChannelCodec {
            name: CKMIMAGENET_PATHLOSS.into(),
            kind: ChannelKind::PathLoss,
            v_min: -250.0,
            v_max: -50.0,
            sentinel: None,
        },
        // Extended down to -200 so the building sentinel owns pixel 0.
        ChannelCodec {
            name: CKMIMAGENET_AOA.into(),
            kind: ChannelKind::AoA,
            v_min: -200.0,
            v_max: 180.0,
            sentinel: Some(-200.0),
        },
    ]
}

pub fn lookup_codec(name: &str) -> Result<ChannelCodec> {
    standard_codecs()
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| Error::UnknownCodec(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rms() -> ChannelCodec {
        lookup_codec(RADIOMAPSEER_PATHLOSS).unwrap()
    }

    #[test]
    fn radiomapseer_endpoints_and_midpoint() {
        let c = rms();
        assert_eq!(c.encode_value(-47.0), 255);
        assert_eq!(c.encode_value(-147.0), 0);
        // 127.5 rounds half-up
        assert_eq!(c.encode_value(-97.0), 128);
    }

    #[test]
    fn decode_examples() {
        let pl = lookup_codec(CKMIMAGENET_PATHLOSS).unwrap();
        assert_eq!(pl.decode_pixel(255), -50.0);
        let aoa = lookup_codec(CKMIMAGENET_AOA).unwrap();
        assert_eq!(aoa.decode_pixel(0), -200.0);
        assert_eq!(aoa.sentinel_pixel(), Some(0));
        let v = rms().decode_pixel(128);
        assert!((v - (-147.0 + 128.0 / 255.0 * 100.0)).abs() < 1e-12);
        assert!((v + 96.8).abs() <= 0.2);
    }

    #[test]
    fn standard_table_has_three_entries() {
        let t = standard_codecs();
        assert_eq!(t.len(), 3);
        let c = lookup_codec(CKMIMAGENET_PATHLOSS).unwrap();
        assert_eq!((c.v_min, c.v_max), (-250.0, -50.0));
        assert!(matches!(lookup_codec("unknown"), Err(Error::UnknownCodec(_))));
    }

    #[test]
    fn invalid_codecs_rejected() {
        assert!(ChannelCodec::new("x", ChannelKind::PathLoss, 1.0, 1.0, None).is_err());
        assert!(ChannelCodec::new("x", ChannelKind::PathLoss, 0.0, f64::NAN, None).is_err());
        assert!(ChannelCodec::new("x", ChannelKind::AoA, 0.0, 1.0, Some(2.0)).is_err());
    }

    #[test]
    fn out_of_domain_values_clamp() {
        let c = rms();
        assert_eq!(c.encode_value(0.0), 255);
        assert_eq!(c.encode_value(-500.0), 0);
    }
}
