use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid_arg, Result};

/// Discrete X-ray spectrum: energies in keV with normalised weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    energies_kev: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for Spectrum {
    /// Three-point spectrum at 50, 80 and 120 keV.
    fn default() -> Self {
        Self { energies_kev: vec![50.0, 80.0, 120.0], weights: vec![0.3, 0.45, 0.25] }
    }
}

impl Spectrum {
    pub fn new(energies_kev: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if energies_kev.is_empty() || energies_kev.len() != weights.len() {
            return Err(invalid_arg!("spectrum needs matching non-empty energies and weights"));
        }
        if energies_kev.iter().any(|e| !(e.is_finite() && *e > 0.0)) || energies_kev.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid_arg!("spectrum energies must be positive and strictly increasing"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid_arg!("spectrum weights must be non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(invalid_arg!("spectrum weights sum to {sum}, expected 1"));
        }
        Ok(Self { energies_kev, weights })
    }

    pub fn monochromatic(energy_kev: f64) -> Result<Self> {
        Self::new(vec![energy_kev], vec![1.0])
    }

    pub fn energies_kev(&self) -> &[f64] {
        &self.energies_kev
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted mean energy in keV.
    pub fn mean_energy_kev(&self) -> f64 {
        self.energies_kev.iter().zip(&self.weights).map(|(e, w)| e * w).sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Linear attenuation, in cm⁻¹, of tissue at a given HU and of metal.
pub trait AttenuationModel {
    fn tissue_mu(&self, hu: f64, energy_kev: f64) -> f64;
    fn metal_mu(&self, energy_kev: f64) -> f64;

    /// Spectrum-weighted water attenuation; the reference for HU conversion.
    fn effective_water_mu(&self, spectrum: &Spectrum) -> f64 {
        spectrum.energies_kev().iter().zip(spectrum.weights()).map(|(&e, &w)| w * self.tissue_mu(0.0, e)).sum()
    }
}

// Water mass attenuation (cm²/g, density 1) with coherent scattering.
const WATER_TABLE: [(f64, f64); 9] = [
    (20.0, 0.8096),
    (30.0, 0.3756),
    (40.0, 0.2683),
    (50.0, 0.2269),
    (60.0, 0.2059),
    (80.0, 0.1837),
    (100.0, 0.1707),
    (150.0, 0.1505),
    (200.0, 0.1370),
];

/// Water attenuation by log-log interpolation, extrapolated from the end segments.
pub fn water_mu(energy_kev: f64) -> f64 {
    let i = WATER_TABLE.iter().position(|&(e, _)| e >= energy_kev).unwrap_or(WATER_TABLE.len() - 1).clamp(1, WATER_TABLE.len() - 1);
    let (e0, m0) = WATER_TABLE[i - 1];
    let (e1, m1) = WATER_TABLE[i];
    let f = libm::log(energy_kev / e0) / libm::log(e1 / e0);
    libm::exp(libm::log(m0) + f * libm::log(m1 / m0))
}

/// Tissue scales water linearly in HU; metal falls off as `E⁻³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterScaled {
    /// Metal attenuation at `metal_ref_kev`, cm⁻¹.
    pub metal_mu_ref: f64,
    pub metal_ref_kev: f64,
}

impl Default for WaterScaled {
    /// Between titanium and steel at 50 keV.
    fn default() -> Self {
        Self { metal_mu_ref: 8.0, metal_ref_kev: 50.0 }
    }
}

impl AttenuationModel for WaterScaled {
    fn tissue_mu(&self, hu: f64, energy_kev: f64) -> f64 {
        (water_mu(energy_kev) * (1.0 + hu / 1000.0)).max(0.0)
    }

    fn metal_mu(&self, energy_kev: f64) -> f64 {
        let r = self.metal_ref_kev / energy_kev;
        self.metal_mu_ref * r * r * r
    }
}
