//! Grid montages of normalized images with metal painted red.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid_arg, Result};

/// Pixels between tiles.
pub const GUTTER: usize = 2;
pub const METAL_RGB: [u8; 3] = [255, 0, 0];
const GUTTER_RGB: [u8; 3] = [0, 0, 0];

/// One montage row: images in `[-1, 1]` sharing an optional metal mask.
#[derive(Debug, Clone)]
pub struct MontageRow<'a> {
    pub tiles: Vec<&'a [f32]>,
    pub mask: Option<&'a [bool]>,
}

/// Interleaved 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Maps `[-1, 1]` linearly onto `0..=255`.
pub fn to_gray(v: f32) -> u8 {
    let t = ((v as f64 + 1.0) * 0.5).clamp(0.0, 1.0);
    libm::round(t * 255.0) as u8
}

/// Lays rows of `height`×`width` tiles on a grid separated by [`GUTTER`].
pub fn render_montage(rows: &[MontageRow<'_>], height: usize, width: usize) -> Result<RgbImage> {
    let cols = rows.first().map_or(0, |r| r.tiles.len());
    if rows.is_empty() || cols == 0 {
        return Err(invalid_arg!("montage needs at least one tile"));
    }
    let n = height * width;
    for r in rows {
        if r.tiles.len() != cols {
            return Err(invalid_arg!("montage rows have differing column counts"));
        }
        if r.tiles.iter().any(|t| t.len() != n) || r.mask.is_some_and(|m| m.len() != n) {
            return Err(invalid_arg!("montage tiles must all be {height}x{width}"));
        }
    }
    let out_w = cols * width + (cols - 1) * GUTTER;
    let out_h = rows.len() * height + (rows.len() - 1) * GUTTER;
    let mut data = vec![0u8; out_w * out_h * 3];
    for px in data.chunks_exact_mut(3) {
        px.copy_from_slice(&GUTTER_RGB);
    }
    for (ri, row) in rows.iter().enumerate() {
        let y0 = ri * (height + GUTTER);
        for (ci, tile) in row.tiles.iter().enumerate() {
            let x0 = ci * (width + GUTTER);
            for y in 0..height {
                for x in 0..width {
                    let k = y * width + x;
                    let rgb = if row.mask.is_some_and(|m| m[k]) {
                        METAL_RGB
                    } else {
                        let g = to_gray(tile[k]);
                        [g, g, g]
                    };
                    let o = 3 * ((y0 + y) * out_w + x0 + x);
                    data[o..o + 3].copy_from_slice(&rgb);
                }
            }
        }
    }
    Ok(RgbImage { width: out_w, height: out_h, data })
}
