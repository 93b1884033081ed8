use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::phantom::MetalMask;
use super::physics::{AttenuationModel, Spectrum, WaterScaled};
use super::radon::{fbp, radon, ProjectionGeometry, Sinogram};
use crate::error::{invalid_arg, Error, Result};
use crate::image::CtImage;

/// Clean images must stay at or below this HU to be used as ground truth.
pub const CLEAN_MAX_HU: f32 = 2000.0;

/// Knobs for artifact synthesis. Noise is off unless `photons` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub spectrum: Spectrum,
    pub attenuation: WaterScaled,
    /// Incident photons per ray for Poisson noise.
    pub photons: Option<f64>,
    /// Linearise the water beam-hardening curve before reconstruction.
    pub water_correction: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { spectrum: Spectrum::default(), attenuation: WaterScaled::default(), photons: None, water_correction: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedPair {
    pub artifact: CtImage,
    pub clean: CtImage,
    pub mask: MetalMask,
}

fn spacing_cm(image: &CtImage) -> f64 {
    image.pixel_spacing_mm() as f64 / 10.0
}

fn check_shapes(clean: &CtImage, mask: &MetalMask, geometry: &ProjectionGeometry) -> Result<()> {
    if clean.height() != clean.width() || clean.height() != geometry.image_size {
        return Err(invalid_arg!(
            "image {}x{} does not match geometry size {}",
            clean.height(),
            clean.width(),
            geometry.image_size
        ));
    }
    if mask.height() != clean.height() || mask.width() != clean.width() {
        return Err(invalid_arg!("mask {}x{} does not match image", mask.height(), mask.width()));
    }
    Ok(())
}

/// `-ln Σ w_k exp(-l_k)` without underflow.
fn neg_log_mean_exp(weights: &[f64], l: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = l.clone().fold(f64::INFINITY, f64::min);
    let s: f64 = weights.iter().zip(l).map(|(w, v)| w * libm::exp(-(v - m))).sum();
    m - libm::log(s)
}

/// Per-energy monochromatic line integrals of tissue plus optional metal.
fn energy_sinograms(
    clean: &CtImage,
    mask: Option<&MetalMask>,
    spectrum: &Spectrum,
    model: &dyn AttenuationModel,
    geometry: &ProjectionGeometry,
) -> Result<Vec<Sinogram>> {
    let dx = spacing_cm(clean);
    spectrum
        .energies_kev()
        .iter()
        .map(|&e| {
            let metal = model.metal_mu(e) * dx;
            let map: Vec<f64> = clean
                .pixels()
                .iter()
                .enumerate()
                .map(|(i, &hu)| {
                    let t = model.tissue_mu(hu as f64, e) * dx;
                    if mask.is_some_and(|m| m.pixels()[i]) {
                        t + metal
                    } else {
                        t
                    }
                })
                .collect();
            radon(&map, geometry)
        })
        .collect()
}

fn combine(
    per_energy: &[Sinogram],
    spectrum: &Spectrum,
    geometry: &ProjectionGeometry,
    noise: Option<(f64, u64)>,
) -> Result<Sinogram> {
    let mut out = Sinogram::zeros(*geometry);
    let w = spectrum.weights();
    let mut rng = noise.map(|(_, seed)| ChaCha8Rng::seed_from_u64(seed));
    for (i, p) in out.values.iter_mut().enumerate() {
        let ideal = neg_log_mean_exp(w, per_energy.iter().map(|s| s.values[i]));
        *p = match (noise, rng.as_mut()) {
            (Some((photons, _)), Some(rng)) => {
                let lambda = photons * libm::exp(-ideal);
                let counts = if lambda > 0.0 {
                    Poisson::new(lambda).map_err(|e| Error::Numeric(alloc::format!("poisson: {e}")))?.sample(rng)
                } else {
                    0.0
                };
                -libm::log(counts.max(1.0) / photons)
            }
            _ => ideal,
        };
    }
    Ok(out)
}

/// Polychromatic line integrals `-ln Σ_k w_k exp(-L_k)` through tissue and metal.
///
/// `L_k` is the projection of the energy-`k` attenuation map (per pixel:
/// cm⁻¹ times pixel spacing). With `noise = Some((photons, seed))` the
/// transmitted intensity is Poisson-sampled in angle-then-bin order.
pub fn polychromatic_project(
    clean: &CtImage,
    mask: &MetalMask,
    spectrum: &Spectrum,
    model: &dyn AttenuationModel,
    geometry: &ProjectionGeometry,
    noise: Option<(f64, u64)>,
) -> Result<Sinogram> {
    check_shapes(clean, mask, geometry)?;
    if mask.is_empty() {
        return Err(invalid_arg!("metal mask is empty; use radon for a metal-free projection"));
    }
    if let Some((photons, _)) = noise {
        if !(photons.is_finite() && photons >= 1.0) {
            return Err(invalid_arg!("photon count must be at least 1, got {photons}"));
        }
    }
    let per_energy = energy_sinograms(clean, Some(mask), spectrum, model, geometry)?;
    combine(&per_energy, spectrum, geometry, noise)
}

/// Maps each polychromatic value to the monochromatic projection of the
/// water path that would produce it, using the spectrum-weighted water
/// attenuation as the reference.
pub fn water_precorrect(sinogram: &Sinogram, spectrum: &Spectrum, model: &dyn AttenuationModel, spacing_cm: f64) -> Sinogram {
    let mu: Vec<f64> = spectrum.energies_kev().iter().map(|&e| model.tissue_mu(0.0, e) * spacing_cm).collect();
    let w = spectrum.weights();
    let mu_ref: f64 = mu.iter().zip(w).map(|(m, w)| m * w).sum();
    let mut out = sinogram.clone();
    for p in &mut out.values {
        let target = *p;
        // The water curve is concave and increasing, and lies below its
        // chord through the origin, so Newton from p / mu_ref climbs
        // monotonically to the root.
        let mut len = target / mu_ref;
        for _ in 0..100 {
            let f = neg_log_mean_exp(w, mu.iter().map(|m| m * len));
            let m0 = mu.iter().map(|m| m * len).fold(f64::INFINITY, f64::min);
            let (mut num, mut den) = (0.0, 0.0);
            for (m, wk) in mu.iter().zip(w) {
                let e = wk * libm::exp(-(m * len - m0));
                num += m * e;
                den += e;
            }
            let delta = (target - f) / (num / den);
            len += delta;
            if delta.abs() <= 1e-13 * (1.0 + len.abs()) {
                break;
            }
        }
        *p = mu_ref * len;
    }
    out
}

/// Simulates the metal-corrupted reconstruction of `clean`.
///
/// Returns the artifact image (metal region set to `mask.metal_hu()`), the
/// untouched clean image and the mask. Deterministic in `noise_seed`.
pub fn synthesize_pair(
    clean: &CtImage,
    mask: &MetalMask,
    options: &SynthOptions,
    geometry: &ProjectionGeometry,
    noise_seed: u64,
) -> Result<SynthesizedPair> {
    check_shapes(clean, mask, geometry)?;
    let max = clean.max_hu();
    if max > CLEAN_MAX_HU {
        return Err(invalid_arg!("clean image peaks at {max} HU, above {CLEAN_MAX_HU}"));
    }
    let model = &options.attenuation;
    let noise = options.photons.map(|p| (p, noise_seed));
    let mut sino = polychromatic_project(clean, mask, &options.spectrum, model, geometry, noise)?;
    let dx = spacing_cm(clean);
    if options.water_correction {
        sino = water_precorrect(&sino, &options.spectrum, model, dx);
    }
    let mu = fbp(&sino, geometry)?;
    let mu_ref = model.effective_water_mu(&options.spectrum) * dx;
    let metal_hu = mask.metal_hu();
    let hu: Vec<f32> = mu
        .iter()
        .zip(mask.pixels())
        .map(|(&m, &is_metal)| if is_metal { metal_hu } else { (1000.0 * (m / mu_ref - 1.0)) as f32 })
        .collect();
    if hu.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("reconstruction produced non-finite values".into()));
    }
    let artifact = CtImage::synthetic_clamped(hu, clean.height(), clean.pixel_spacing_mm())?;
    Ok(SynthesizedPair { artifact, clean: clean.clone(), mask: mask.clone() })
}
