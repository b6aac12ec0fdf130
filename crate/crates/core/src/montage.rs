//! Side-by-side comparison strips with burned-in labels.

use crate::error::{Error, Result};
use crate::grid::PixelImage;

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;

#[rustfmt::skip]
fn glyph(ch: char) -> [u8; GLYPH_H] {
    match ch.to_ascii_uppercase() {
        'A' => [0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001],
        'B' => [0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110],
        'C' => [0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110],
        'D' => [0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110],
        'E' => [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111],
        'F' => [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000],
        'G' => [0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111],
        'H' => [0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001],
        'I' => [0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
        'J' => [0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100],
        'K' => [0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001],
        'L' => [0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111],
        'M' => [0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001],
        'N' => [0b10001, 0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001],
        'O' => [0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110],
        'P' => [0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000],
        'Q' => [0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101],
        'R' => [0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001],
        'S' => [0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110],
        'T' => [0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100],
        'U' => [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110],
        'V' => [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100],
        'W' => [0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010],
        'X' => [0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001],
        'Y' => [0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100],
        'Z' => [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111],
        '0' => [0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110],
        '1' => [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
        '2' => [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111],
        '3' => [0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110],
        '4' => [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010],
        '5' => [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110],
        '6' => [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110],
        '7' => [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000],
        '8' => [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110],
        '9' => [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100],
        '-' => [0b00000, 0b00000, 0b00000, 0b11111, 0b00000, 0b00000, 0b00000],
        '_' => [0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b11111],
        '.' => [0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b01100, 0b01100],
        ':' => [0b00000, 0b01100, 0b01100, 0b00000, 0b01100, 0b01100, 0b00000],
        '/' => [0b00001, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b10000],
        '(' => [0b00010, 0b00100, 0b01000, 0b01000, 0b01000, 0b00100, 0b00010],
        ')' => [0b01000, 0b00100, 0b00010, 0b00010, 0b00010, 0b00100, 0b01000],
        ' ' => [0; GLYPH_H],
        _ => [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b00000, 0b00100],
    }
}

/// Region of a row-major image: `stride` is the full image width.
#[derive(Debug, Clone, Copy)]
pub struct Region {
    pub stride: usize,
    pub top: usize,
    pub left: usize,
    pub width: usize,
    pub height: usize,
}

/// Draws `text` in white on a black box at the region's top-left corner, clipped to the region.
pub fn draw_label(pixels: &mut [u8], region: Region, text: &str, scale: usize) {
    let Region { stride, top, left, width, height } = region;
    let mut put = |r: usize, c: usize, v: u8| {
        if r < height && c < width {
            pixels[(top + r) * stride + left + c] = v;
        }
    };
    let advance = (GLYPH_W + 1) * scale;
    let box_w = text.chars().count() * advance + scale;
    let box_h = (GLYPH_H + 2) * scale;
    for r in 0..box_h {
        for c in 0..box_w {
            put(r, c, 0);
        }
    }
    for (i, ch) in text.chars().enumerate() {
        let (x0, y0) = (scale + i * advance, scale);
        for (gy, bits) in glyph(ch).iter().enumerate() {
            for gx in (0..GLYPH_W).filter(|gx| bits & (1 << (GLYPH_W - 1 - gx)) != 0) {
                for dy in 0..scale {
                    for dx in 0..scale {
                        put(y0 + gy * scale + dy, x0 + gx * scale + dx, 255);
                    }
                }
            }
        }
    }
}

/// Concatenates equally sized panels left to right, labelling each in its top-left corner.
pub fn montage(panels: &[(String, PixelImage)]) -> Result<PixelImage> {
    let (_, first) = panels
        .first()
        .ok_or_else(|| Error::Shape("montage needs at least one panel".into()))?;
    let (w, h) = (first.width(), first.height());
    if let Some((label, p)) = panels.iter().find(|(_, p)| (p.width(), p.height()) != (w, h)) {
        return Err(Error::Shape(format!(
            "panel `{label}` is {}x{}, expected {w}x{h}",
            p.width(),
            p.height()
        )));
    }
    let total_w = w * panels.len();
    let mut out = vec![0u8; total_w * h];
    for (i, (_, p)) in panels.iter().enumerate() {
        for r in 0..h {
            out[r * total_w + i * w..][..w].copy_from_slice(&p.pixels()[r * w..][..w]);
        }
    }
    let scale = if w >= 256 { 2 } else { 1 };
    let margin = usize::from(w > 2 && h > 2);
    for (i, (label, _)) in panels.iter().enumerate() {
        let region = Region {
            stride: total_w,
            top: margin,
            left: i * w + margin,
            width: w - margin,
            height: h - margin,
        };
        draw_label(&mut out, region, label, scale);
    }
    PixelImage::new(total_w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_panels_in_one_strip() {
        let panels: Vec<(String, PixelImage)> = ["nearest", "bicubic", "truth"]
            .iter()
            .map(|l| (l.to_string(), PixelImage::filled(128, 128, 128).unwrap()))
            .collect();
        let m = montage(&panels).unwrap();
        assert_eq!((m.width(), m.height()), (384, 128));
        // Each panel carries a label: white text pixels near its top-left corner.
        for i in 0..3 {
            let has_text = (0..12).any(|r| (0..60).any(|c| m.get(r, i * 128 + c) == 255));
            assert!(has_text, "panel {i} unlabeled");
        }
        // Panel content untouched away from the label.
        assert_eq!(m.get(100, 200), 128);
    }

    #[test]
    fn empty_and_mismatched_rejected() {
        assert!(montage(&[]).is_err());
        let a = ("a".to_string(), PixelImage::filled(4, 4, 0).unwrap());
        let b = ("b".to_string(), PixelImage::filled(4, 5, 0).unwrap());
        assert!(montage(&[a, b]).is_err());
    }

    #[test]
    fn label_clipped_to_small_images() {
        let mut px = vec![9u8; 12 * 4];
        let region = Region { stride: 12, top: 0, left: 0, width: 6, height: 4 };
        draw_label(&mut px, region, "LONG LABEL", 1);
        // Nothing written outside the 6-wide region.
        assert!((0..4).all(|r| px[r * 12 + 6..r * 12 + 12].iter().all(|&v| v == 9)));
    }
}
