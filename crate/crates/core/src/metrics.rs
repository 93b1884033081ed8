//! PSNR and SSIM with an optional region (usually metal) left out.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid_arg, Result};

/// Peak for images normalized to `[-1, 1]`.
pub const NORMALIZED_PEAK: f64 = 2.0;

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn check_pair(a: &[f32], b: &[f32], exclude: Option<&[bool]>) -> Result<()> {
    if a.len() != b.len() {
        return Err(invalid_arg!("images differ in size: {} vs {}", a.len(), b.len()));
    }
    if let Some(m) = exclude {
        if m.len() != a.len() {
            return Err(invalid_arg!("exclusion mask has {} pixels, images have {}", m.len(), a.len()));
        }
    }
    Ok(())
}

/// `10 log10(peak² / MSE)` over pixels not in `exclude`.
///
/// Identical images give `f64::INFINITY`, which callers treat as a flag.
pub fn psnr(a: &[f32], b: &[f32], peak: f64, exclude: Option<&[bool]>) -> Result<f64> {
    check_pair(a, b, exclude)?;
    if !(peak.is_finite() && peak > 0.0) {
        return Err(invalid_arg!("peak must be positive, got {peak}"));
    }
    let (mut sum, mut n) = (0.0f64, 0usize);
    for i in 0..a.len() {
        if exclude.is_some_and(|m| m[i]) {
            continue;
        }
        let d = a[i] as f64 - b[i] as f64;
        sum += d * d;
        n += 1;
    }
    if n == 0 {
        return Err(invalid_arg!("every pixel is excluded"));
    }
    let mse = sum / n as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * libm::log10(peak * peak / mse))
}

fn gaussian_window() -> [f64; WINDOW * WINDOW] {
    let r = (WINDOW / 2) as f64;
    let g: Vec<f64> = (0..WINDOW).map(|i| libm::exp(-((i as f64 - r) * (i as f64 - r)) / (2.0 * SIGMA * SIGMA))).collect();
    let s: f64 = g.iter().sum();
    let mut w = [0.0; WINDOW * WINDOW];
    for i in 0..WINDOW {
        for j in 0..WINDOW {
            w[i * WINDOW + j] = g[i] * g[j] / (s * s);
        }
    }
    w
}

/// Single-scale SSIM with an 11×11 Gaussian window (σ = 1.5) over valid
/// window positions. Windows touching an excluded pixel are dropped.
pub fn ssim(a: &[f32], b: &[f32], height: usize, width: usize, data_range: f64, exclude: Option<&[bool]>) -> Result<f64> {
    check_pair(a, b, exclude)?;
    if a.len() != height * width {
        return Err(invalid_arg!("{} pixels do not fill {height}x{width}", a.len()));
    }
    if height < WINDOW || width < WINDOW {
        return Err(invalid_arg!("image {height}x{width} is smaller than the {WINDOW}x{WINDOW} window"));
    }
    if !(data_range.is_finite() && data_range > 0.0) {
        return Err(invalid_arg!("data range must be positive, got {data_range}"));
    }
    // Windows whose top-left corner is (r, c) touch an excluded pixel iff the
    // summed-area count over the window is non-zero.
    let blocked = exclude.map(|m| {
        let mut sat = alloc::vec![0u32; (height + 1) * (width + 1)];
        for r in 0..height {
            for c in 0..width {
                sat[(r + 1) * (width + 1) + c + 1] =
                    m[r * width + c] as u32 + sat[r * (width + 1) + c + 1] + sat[(r + 1) * (width + 1) + c] - sat[r * (width + 1) + c];
            }
        }
        sat
    });
    let win = gaussian_window();
    let c1 = (K1 * data_range) * (K1 * data_range);
    let c2 = (K2 * data_range) * (K2 * data_range);
    let (mut total, mut count) = (0.0f64, 0usize);
    for r in 0..=height - WINDOW {
        for c in 0..=width - WINDOW {
            if let Some(sat) = &blocked {
                let w1 = width + 1;
                let hits = sat[(r + WINDOW) * w1 + c + WINDOW] + sat[r * w1 + c] - sat[r * w1 + c + WINDOW] - sat[(r + WINDOW) * w1 + c];
                if hits > 0 {
                    continue;
                }
            }
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..WINDOW {
                for j in 0..WINDOW {
                    let k = (r + i) * width + c + j;
                    let wt = win[i * WINDOW + j];
                    let (x, y) = (a[k] as f64, b[k] as f64);
                    ma += wt * x;
                    mb += wt * y;
                    saa += wt * x * x;
                    sbb += wt * y * y;
                    sab += wt * x * y;
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    if count == 0 {
        return Err(invalid_arg!("every SSIM window overlaps the excluded region"));
    }
    Ok(total / count as f64)
}

/// One row of a quality table: mean PSNR and SSIM (×100) over a set of images.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub method: String,
    /// Mean over images with finite PSNR; infinite when every image was identical.
    pub psnr_db: f64,
    pub ssim_percent: f64,
    pub n_images: usize,
    /// Images whose PSNR was infinite and left out of `psnr_db`.
    pub n_identical: usize,
}

/// Running means for a [`MetricsRow`].
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    psnr_sum: f64,
    psnr_n: usize,
    ssim_sum: f64,
    n: usize,
    identical: usize,
}

impl MetricsAccumulator {
    pub fn push(&mut self, psnr_db: f64, ssim: f64) {
        if psnr_db.is_finite() {
            self.psnr_sum += psnr_db;
            self.psnr_n += 1;
        } else {
            self.identical += 1;
        }
        self.ssim_sum += ssim;
        self.n += 1;
    }

    pub fn finish(&self, method: impl Into<String>) -> MetricsRow {
        let psnr_db = if self.psnr_n > 0 { self.psnr_sum / self.psnr_n as f64 } else { f64::INFINITY };
        let ssim_percent = if self.n > 0 { 100.0 * self.ssim_sum / self.n as f64 } else { f64::NAN };
        MetricsRow { method: method.into(), psnr_db, ssim_percent, n_images: self.n, n_identical: self.identical }
    }
}
