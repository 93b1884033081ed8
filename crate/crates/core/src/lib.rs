//! Artifact disentanglement network for unsupervised CT metal artifact
//! reduction, together with the pieces needed to exercise it without
//! clinical data: a parallel-beam CT simulator with polychromatic beam
//! hardening, dataset curation rules, and PSNR/SSIM metrics.
//!
//! The crate is `no_std` with `alloc`. File formats, the training driver
//! and the command line live in the companion `adn` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod curation;
pub mod error;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod montage;
pub mod networks;
pub mod nn;
pub mod optim;
pub mod sim;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use image::{CtImage, HuWindow, NormalizedImage, Provenance};
pub use tensor::{Scalar, Tensor};
