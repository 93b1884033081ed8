//! CT images in Hounsfield units and their windowed `[-1, 1]` network form.

use alloc::vec::Vec;

use crate::error::{invalid_arg, Result};
use crate::tensor::Tensor;

/// Lowest HU kept on ingestion.
pub const HU_MIN: f32 = -1024.0;
/// Highest HU kept on ingestion.
pub const HU_MAX: f32 = 32767.0;
/// Smallest accepted image side.
pub const MIN_SIDE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Synthetic,
    Ingested,
}

/// HU interval mapped linearly onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuWindow {
    lo: f32,
    hi: f32,
}

impl Default for HuWindow {
    /// Air to dense bone; metal saturates at +1.
    fn default() -> Self {
        Self { lo: -1000.0, hi: 2000.0 }
    }
}

impl HuWindow {
    pub fn new(lo: f32, hi: f32) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid_arg!("degenerate HU window [{lo}, {hi}]"));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f32 {
        self.lo
    }

    pub fn hi(&self) -> f32 {
        self.hi
    }

    pub fn width(&self) -> f32 {
        self.hi - self.lo
    }

    #[inline]
    pub fn normalize(&self, hu: f32) -> f32 {
        let (lo, hi) = (self.lo as f64, self.hi as f64);
        (2.0 * (hu as f64 - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0) as f32
    }

    #[inline]
    pub fn denormalize(&self, v: f32) -> f32 {
        let (lo, hi) = (self.lo as f64, self.hi as f64);
        (lo + (v as f64 + 1.0) * 0.5 * (hi - lo)) as f32
    }
}

/// A 2-D CT slice in HU, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CtImage {
    pixels: Vec<f32>,
    height: usize,
    width: usize,
    pixel_spacing_mm: f32,
    provenance: Provenance,
}

fn check_geometry(len: usize, height: usize, width: usize, spacing: f32) -> Result<()> {
    if height < MIN_SIDE || width < MIN_SIDE {
        return Err(invalid_arg!("image {height}x{width} is smaller than {MIN_SIDE}x{MIN_SIDE}"));
    }
    if len != height * width {
        return Err(invalid_arg!("{len} pixels do not fill a {height}x{width} image"));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(invalid_arg!("pixel spacing must be positive, got {spacing}"));
    }
    Ok(())
}

impl CtImage {
    /// Validates an image whose values already lie in `[HU_MIN, HU_MAX]`.
    pub fn new(pixels: Vec<f32>, height: usize, width: usize, pixel_spacing_mm: f32, provenance: Provenance) -> Result<Self> {
        check_geometry(pixels.len(), height, width, pixel_spacing_mm)?;
        if let Some(v) = pixels.iter().find(|v| !(v.is_finite() && (HU_MIN..=HU_MAX).contains(*v))) {
            return Err(invalid_arg!("pixel value {v} outside [{HU_MIN}, {HU_MAX}]"));
        }
        Ok(Self { pixels, height, width, pixel_spacing_mm, provenance })
    }

    /// Accepts raw HU data, clamping into `[HU_MIN, HU_MAX]`. NaN is rejected.
    pub fn ingest(mut pixels: Vec<f32>, height: usize, width: usize, pixel_spacing_mm: f32) -> Result<Self> {
        check_geometry(pixels.len(), height, width, pixel_spacing_mm)?;
        if pixels.iter().any(|v| v.is_nan()) {
            return Err(invalid_arg!("image contains NaN"));
        }
        for v in &mut pixels {
            *v = v.clamp(HU_MIN, HU_MAX);
        }
        Ok(Self { pixels, height, width, pixel_spacing_mm, provenance: Provenance::Ingested })
    }

    /// Clamping constructor for simulator output.
    pub(crate) fn synthetic_clamped(mut pixels: Vec<f32>, size: usize, pixel_spacing_mm: f32) -> Result<Self> {
        for v in &mut pixels {
            *v = if v.is_nan() { HU_MIN } else { v.clamp(HU_MIN, HU_MAX) };
        }
        Self::new(pixels, size, size, pixel_spacing_mm, Provenance::Synthetic)
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel_spacing_mm(&self) -> f32 {
        self.pixel_spacing_mm
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    pub fn max_hu(&self) -> f32 {
        self.pixels.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }
}

/// Network-domain image: HU windowed onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    pixels: Vec<f32>,
    height: usize,
    width: usize,
    window: HuWindow,
    pixel_spacing_mm: f32,
    provenance: Provenance,
}

impl NormalizedImage {
    /// Wraps values already in `[-1, 1]`; out-of-range values are clamped.
    pub fn from_values(mut pixels: Vec<f32>, height: usize, width: usize, window: HuWindow) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(invalid_arg!("{} values do not fill a {height}x{width} image", pixels.len()));
        }
        if pixels.iter().any(|v| v.is_nan()) {
            return Err(invalid_arg!("normalized image contains NaN"));
        }
        for v in &mut pixels {
            *v = v.clamp(-1.0, 1.0);
        }
        Ok(Self { pixels, height, width, window, pixel_spacing_mm: 1.0, provenance: Provenance::Synthetic })
    }

    /// Takes sample `n` of a single-channel tensor.
    pub fn from_tensor(t: &Tensor<f32>, n: usize, window: HuWindow) -> Result<Self> {
        if t.channels() != 1 {
            return Err(invalid_arg!("expected one channel, got {}", t.channels()));
        }
        Self::from_values(t.sample(n).to_vec(), t.height(), t.width(), window)
    }

    pub fn with_metadata(mut self, pixel_spacing_mm: f32, provenance: Provenance) -> Self {
        self.pixel_spacing_mm = pixel_spacing_mm;
        self.provenance = provenance;
        self
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn window(&self) -> HuWindow {
        self.window
    }

    pub fn pixel_spacing_mm(&self) -> f32 {
        self.pixel_spacing_mm
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::from_vec([1, 1, self.height, self.width], self.pixels.clone())
    }
}

/// Windows an image onto `[-1, 1]`, clamping values outside the window.
pub fn normalize_hu(image: &CtImage, window: HuWindow) -> NormalizedImage {
    NormalizedImage {
        pixels: image.pixels.iter().map(|&v| window.normalize(v)).collect(),
        height: image.height,
        width: image.width,
        window,
        pixel_spacing_mm: image.pixel_spacing_mm,
        provenance: image.provenance,
    }
}

/// Inverse of [`normalize_hu`] on the unclamped range.
pub fn denormalize_hu(image: &NormalizedImage) -> CtImage {
    CtImage {
        pixels: image.pixels.iter().map(|&v| image.window.denormalize(v).clamp(HU_MIN, HU_MAX)).collect(),
        height: image.height,
        width: image.width,
        pixel_spacing_mm: image.pixel_spacing_mm,
        provenance: image.provenance,
    }
}

/// Stacks single-channel images into an `[n, 1, h, w]` tensor.
pub fn stack(images: &[&NormalizedImage]) -> Result<Tensor<f32>> {
    let first = images.first().ok_or_else(|| invalid_arg!("cannot stack zero images"))?;
    let (h, w) = (first.height, first.width);
    let mut data = Vec::with_capacity(images.len() * h * w);
    for img in images {
        if (img.height, img.width) != (h, w) {
            return Err(invalid_arg!("cannot stack {}x{} with {h}x{w}", img.height, img.width));
        }
        data.extend_from_slice(&img.pixels);
    }
    Ok(Tensor::from_vec([images.len(), 1, h, w], data))
}
