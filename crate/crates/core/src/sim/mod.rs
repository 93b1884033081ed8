//! Paired training data from a parallel-beam CT simulation.
//!
//! A clean phantom is converted to energy-dependent attenuation, metal is
//! added, each energy is projected, the spectrum-weighted transmissions are
//! combined into a polychromatic sinogram, and filtered back-projection
//! turns it back into HU. Beam hardening through the metal then shows up as
//! streaks and shading in the reconstruction.

mod phantom;
mod physics;
mod radon;
mod synth;

pub use phantom::{make_metal_mask, make_phantom, MaskConfig, MetalMask, DEFAULT_FOV_MM};
pub use physics::{water_mu, AttenuationModel, Spectrum, WaterScaled};
pub use radon::{fbp, radon, ProjectionGeometry, Sinogram, DEFAULT_BIN_WIDTH};
pub use synth::{polychromatic_project, synthesize_pair, water_precorrect, SynthOptions, CLEAN_MAX_HU, SynthesizedPair};
