use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::error::{invalid_arg, Result};
use crate::image::CtImage;

/// Reconstruction field of view; pixel spacing is `DEFAULT_FOV_MM / size`.
pub const DEFAULT_FOV_MM: f64 = 320.0;

const MIN_SIZE: usize = 64;
const MIN_INSERT_PIXELS: usize = 40;
const AIR_HU: f32 = -1000.0;

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    fn new(cx: f64, cy: f64, a: f64, b: f64, angle: f64) -> Self {
        let (sin, cos) = libm::sincos(angle);
        Self { cx, cy, a, b, cos, sin }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (dx * self.cos + dy * self.sin) / self.a;
        let v = (-dx * self.sin + dy * self.cos) / self.b;
        u * u + v * v <= 1.0
    }
}

/// Random soft-tissue phantom: a body ellipse at 0..100 HU holding 2..6
/// structures between -800 and 1500 HU, air (-1000 HU) outside.
///
/// Coordinates are centred on the image; each pixel averages a 2×2 grid of
/// sub-samples, so pixels wholly outside the body are exactly -1000.
pub fn make_phantom<R: Rng + ?Sized>(rng: &mut R, size: usize) -> Result<CtImage> {
    if size < MIN_SIZE {
        return Err(invalid_arg!("phantom size {size} is below {MIN_SIZE}"));
    }
    let r = size as f64 / 2.0;
    let body = Ellipse::new(
        rng.random_range(-0.05..0.05) * r,
        rng.random_range(-0.05..0.05) * r,
        rng.random_range(0.65..0.85) * r,
        rng.random_range(0.5..0.7) * r,
        rng.random_range(0.0..PI),
    );
    let body_hu = rng.random_range(0.0..100.0);
    let n_inner = rng.random_range(2..=6);
    let inner: Vec<(Ellipse, f64)> = (0..n_inner)
        .map(|_| {
            let rho = libm::sqrt(rng.random::<f64>()) * 0.6;
            let phi = rng.random_range(0.0..2.0 * PI);
            let (s, c) = libm::sincos(phi);
            let (lx, ly) = (rho * body.a * c, rho * body.b * s);
            let e = Ellipse::new(
                body.cx + lx * body.cos - ly * body.sin,
                body.cy + lx * body.sin + ly * body.cos,
                rng.random_range(0.06..0.22) * r,
                rng.random_range(0.06..0.22) * r,
                rng.random_range(0.0..PI),
            );
            (e, rng.random_range(-800.0..1500.0))
        })
        .collect();

    let c = (size as f64 - 1.0) / 2.0;
    let mut pixels = vec![AIR_HU; size * size];
    for row in 0..size {
        for col in 0..size {
            let mut acc = 0.0;
            let mut inside = false;
            for (dy, dx) in [(-0.25, -0.25), (-0.25, 0.25), (0.25, -0.25), (0.25, 0.25)] {
                let x = col as f64 + dx - c;
                let y = c - (row as f64 + dy);
                if !body.contains(x, y) {
                    acc += AIR_HU as f64;
                    continue;
                }
                inside = true;
                let mut hu = body_hu;
                for (e, v) in &inner {
                    if e.contains(x, y) {
                        hu = *v;
                    }
                }
                acc += hu;
            }
            if inside {
                pixels[row * size + col] = (acc / 4.0) as f32;
            }
        }
    }
    CtImage::synthetic_clamped(pixels, size, (DEFAULT_FOV_MM / size as f64) as f32)
}

/// Binary metal region with the HU value written into it after reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct MetalMask {
    pixels: Vec<bool>,
    height: usize,
    width: usize,
    metal_hu: f32,
}

impl MetalMask {
    pub fn new(pixels: Vec<bool>, height: usize, width: usize, metal_hu: f32) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(invalid_arg!("{} mask pixels do not fill {height}x{width}", pixels.len()));
        }
        if !(metal_hu.is_finite() && metal_hu >= 2500.0) {
            return Err(invalid_arg!("metal HU must be at least 2500, got {metal_hu}"));
        }
        Ok(Self { pixels, height, width, metal_hu })
    }

    /// Metal where `image` exceeds `threshold_hu`.
    pub fn from_threshold(image: &CtImage, threshold_hu: f32) -> Self {
        let pixels = image.pixels().iter().map(|&v| v > threshold_hu).collect();
        let metal_hu = image.max_hu().max(2500.0);
        Self { pixels, height: image.height(), width: image.width(), metal_hu }
    }

    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn metal_hu(&self) -> f32 {
        self.metal_hu
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.pixels.iter().any(|&m| m)
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.pixels[row * self.width + col]
    }
}

/// Shape of the random metal inserts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskConfig {
    pub min_inserts: usize,
    pub max_inserts: usize,
    /// Semi-axis range in pixels.
    pub min_radius: f64,
    pub max_radius: f64,
    pub metal_hu: f32,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self { min_inserts: 1, max_inserts: 3, min_radius: 4.0, max_radius: 16.0, metal_hu: 3000.0 }
    }
}

/// Inserts are kept within this fraction of the inscribed circle.
const PLACEMENT_FRACTION: f64 = 0.55;

impl MaskConfig {
    /// Default ranges with the largest semi-axis scaled to `size / 9`, kept in `[4, 16]`.
    pub fn for_size(size: usize) -> Self {
        Self { max_radius: (size as f64 / 9.0).clamp(4.0, 16.0), ..Self::default() }
    }

    fn validate(&self, size: usize) -> Result<()> {
        if size < MIN_SIZE {
            return Err(invalid_arg!("mask size {size} is below {MIN_SIZE}"));
        }
        if !(1..=3).contains(&self.min_inserts) || !(self.min_inserts..=3).contains(&self.max_inserts) {
            return Err(invalid_arg!("insert count range {}..={} must lie in 1..=3", self.min_inserts, self.max_inserts));
        }
        let limit = PLACEMENT_FRACTION * size as f64 / 2.0;
        if !(self.min_radius >= 4.0 && self.max_radius >= self.min_radius && self.max_radius <= limit.min(16.0)) {
            return Err(invalid_arg!(
                "radius range [{}, {}] must lie in [4, {}] for size {size}",
                self.min_radius,
                self.max_radius,
                limit.min(16.0)
            ));
        }
        if !(self.metal_hu.is_finite() && self.metal_hu >= 2500.0) {
            return Err(invalid_arg!("metal HU must be at least 2500, got {}", self.metal_hu));
        }
        Ok(())
    }
}

/// Union of random ellipses inside the central part of the inscribed circle,
/// each covering at least 40 pixels.
pub fn make_metal_mask<R: Rng + ?Sized>(size: usize, rng: &mut R, config: &MaskConfig) -> Result<MetalMask> {
    config.validate(size)?;
    let c = (size as f64 - 1.0) / 2.0;
    let reach = PLACEMENT_FRACTION * size as f64 / 2.0;
    let n = rng.random_range(config.min_inserts..=config.max_inserts);
    let mut pixels = vec![false; size * size];
    let mut inserted = 0;
    while inserted < n {
        let a = rng.random_range(config.min_radius..=config.max_radius);
        let b = rng.random_range(config.min_radius..=config.max_radius);
        let rho = libm::sqrt(rng.random::<f64>()) * (reach - a.max(b)).max(0.0);
        let (s, co) = libm::sincos(rng.random_range(0.0..2.0 * PI));
        let e = Ellipse::new(rho * co, rho * s, a, b, rng.random_range(0.0..PI));
        let hits: Vec<usize> = (0..size * size)
            .filter(|&i| e.contains((i % size) as f64 - c, c - (i / size) as f64))
            .collect();
        if hits.len() < MIN_INSERT_PIXELS {
            continue;
        }
        for i in hits {
            pixels[i] = true;
        }
        inserted += 1;
    }
    MetalMask::new(pixels, size, size, config.metal_hu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn phantom_bounds() {
        for seed in 0..8 {
            let p = make_phantom(&mut ChaCha8Rng::seed_from_u64(seed), 64).unwrap();
            assert!(p.max_hu() < 2000.0);
            assert_eq!(p.get(0, 0), -1000.0);
            assert_eq!(p.get(63, 63), -1000.0);
            assert!(p.get(32, 32) > -900.0);
            assert!((p.pixel_spacing_mm() - 5.0).abs() < 1e-6);
        }
        assert!(make_phantom(&mut ChaCha8Rng::seed_from_u64(0), 32).is_err());
    }

    #[test]
    fn mask_inserts_have_minimum_size() {
        let cfg = MaskConfig { min_inserts: 1, max_inserts: 1, ..MaskConfig::default() };
        for seed in 0..16 {
            let m = make_metal_mask(64, &mut ChaCha8Rng::seed_from_u64(seed), &cfg).unwrap();
            assert!(m.count() >= MIN_INSERT_PIXELS);
        }
    }

    #[test]
    fn mask_config_rejects_out_of_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bad = [
            MaskConfig { min_radius: 2.0, ..MaskConfig::default() },
            MaskConfig { max_inserts: 4, ..MaskConfig::default() },
            MaskConfig { metal_hu: 2000.0, ..MaskConfig::default() },
        ];
        for cfg in bad {
            assert!(make_metal_mask(64, &mut rng, &cfg).is_err());
        }
        assert!(make_metal_mask(48, &mut rng, &MaskConfig::default()).is_err());
    }
}
