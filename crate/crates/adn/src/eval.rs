//! Dataset evaluation, artifact transfer and PNG output.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use adn_core::image::{HuWindow, NormalizedImage};
use adn_core::losses::l1_mean;
use adn_core::metrics::{psnr, ssim, MetricsAccumulator, MetricsRow, NORMALIZED_PEAK};
use adn_core::montage::RgbImage;
use adn_core::networks::Adn;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::LoadedPair;
use crate::error::{Error, Result};

/// Metrics of one test image before and after correction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageMetrics {
    pub id: usize,
    /// `None` when the images are identical.
    pub input_psnr_db: Option<f64>,
    pub input_ssim: f64,
    pub adn_psnr_db: Option<f64>,
    pub adn_ssim: f64,
}

/// A [`MetricsRow`] in JSON form; infinite PSNR becomes `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowJson {
    pub method: String,
    pub psnr_db: Option<f64>,
    pub ssim_percent: f64,
    pub n_images: usize,
    pub n_identical: usize,
}

impl From<&MetricsRow> for RowJson {
    fn from(r: &MetricsRow) -> Self {
        Self {
            method: r.method.clone(),
            psnr_db: r.psnr_db.is_finite().then_some(r.psnr_db),
            ssim_percent: r.ssim_percent,
            n_images: r.n_images,
            n_identical: r.n_identical,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Uncorrected artifact images against the clean references.
    pub input: MetricsRow,
    /// Corrected outputs against the clean references.
    pub adn: MetricsRow,
    pub per_image: Vec<ImageMetrics>,
    /// Corrected outputs in test-pair order.
    pub outputs: Vec<NormalizedImage>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Corrects every pair and scores input and output against the clean image.
///
/// Metrics are computed on the normalized images with peak 2; with
/// `exclude_metal` the ground-truth metal pixels are left out.
pub fn evaluate_dataset(adn: &Adn<f32>, window: HuWindow, pairs: &[LoadedPair], exclude_metal: bool) -> Result<Evaluation> {
    let scored: Vec<(ImageMetrics, NormalizedImage, [f64; 4])> = pairs
        .par_iter()
        .map(|p| {
            let (x_a, y) = p.normalized(window);
            let out = adn.infer_correction(&x_a.to_tensor())?;
            let out = NormalizedImage::from_tensor(&out, 0, window)?.with_metadata(x_a.pixel_spacing_mm(), x_a.provenance());
            let ex = exclude_metal.then(|| p.mask.pixels());
            let (h, w) = (y.height(), y.width());
            let in_p = psnr(x_a.pixels(), y.pixels(), NORMALIZED_PEAK, ex)?;
            let in_s = ssim(x_a.pixels(), y.pixels(), h, w, NORMALIZED_PEAK, ex)?;
            let out_p = psnr(out.pixels(), y.pixels(), NORMALIZED_PEAK, ex)?;
            let out_s = ssim(out.pixels(), y.pixels(), h, w, NORMALIZED_PEAK, ex)?;
            let m = ImageMetrics { id: p.id, input_psnr_db: finite(in_p), input_ssim: in_s, adn_psnr_db: finite(out_p), adn_ssim: out_s };
            Ok((m, out, [in_p, in_s, out_p, out_s]))
        })
        .collect::<Result<_>>()?;

    let mut input = MetricsAccumulator::default();
    let mut corrected = MetricsAccumulator::default();
    let mut per_image = Vec::with_capacity(scored.len());
    let mut outputs = Vec::with_capacity(scored.len());
    for (m, out, [in_p, in_s, out_p, out_s]) in scored {
        input.push(in_p, in_s);
        corrected.push(out_p, out_s);
        per_image.push(m);
        outputs.push(out);
    }
    let (input, adn) = (input.finish("input"), corrected.finish("adn"));
    for row in [&input, &adn] {
        if row.n_identical > 0 {
            log::warn!("{}: {} identical image(s) left out of the PSNR mean", row.method, row.n_identical);
        }
    }
    Ok(Evaluation { input, adn, per_image, outputs })
}

#[derive(Debug, Clone)]
pub struct TransferResult {
    /// `y` with the artifact of `x_a` added.
    pub transferred: NormalizedImage,
    /// The transfer output corrected again.
    pub recorrected: NormalizedImage,
    /// Mean absolute change the transfer made to `y`.
    pub transfer_l1: f64,
    /// Mean absolute distance between the re-corrected output and `y`.
    pub cycle_l1: f64,
}

/// Moves the artifact of `x_a` onto `y`, then removes it again.
pub fn artifact_transfer(adn: &Adn<f32>, x_a: &NormalizedImage, y: &NormalizedImage) -> Result<TransferResult> {
    let window = y.window();
    let t = adn.transfer_artifact(&x_a.to_tensor(), &y.to_tensor())?;
    let back = adn.infer_correction(&t)?;
    let transferred = NormalizedImage::from_tensor(&t, 0, window)?.with_metadata(y.pixel_spacing_mm(), y.provenance());
    let recorrected = NormalizedImage::from_tensor(&back, 0, window)?.with_metadata(y.pixel_spacing_mm(), y.provenance());
    Ok(TransferResult {
        transfer_l1: l1_mean(transferred.pixels(), y.pixels()),
        cycle_l1: l1_mean(recorrected.pixels(), y.pixels()),
        transferred,
        recorrected,
    })
}

/// Writes an 8-bit RGB PNG.
pub fn write_png(path: &Path, img: &RgbImage) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(f), img.width as u32, img.height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let png_err = |e: png::EncodingError| Error::Other(format!("{}: {e}", path.display()));
    let mut w = enc.write_header().map_err(png_err)?;
    w.write_image_data(&img.data).map_err(png_err)?;
    w.finish().map_err(png_err)
}

/// CSV table of metric rows.
pub fn metrics_csv(rows: &[&MetricsRow]) -> String {
    let mut s = String::from("method,psnr_db,ssim_percent,n_images,n_identical\n");
    for r in rows {
        s.push_str(&format!("{},{:.4},{:.4},{},{}\n", r.method, r.psnr_db, r.ssim_percent, r.n_images, r.n_identical));
    }
    s
}
