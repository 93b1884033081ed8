//! Flat JSON configuration for each subcommand.
//!
//! Values are layered as defaults < config file < `--seed` < `--set key=value`.
//! Every key must name an existing field.

use std::path::Path;

use adn_core::losses::{GanMode, LossWeights};
use adn_core::networks::NetworkConfig;
use adn_core::nn::Padding;
use adn_core::sim::{MaskConfig, ProjectionGeometry, Spectrum, SynthOptions, WaterScaled, DEFAULT_BIN_WIDTH};
use adn_core::trainer::TrainConfig;
use adn_core::HuWindow;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanModeTag {
    NonSaturating,
    LeastSquares,
}

impl From<GanModeTag> for GanMode {
    fn from(t: GanModeTag) -> Self {
        match t {
            GanModeTag::NonSaturating => GanMode::NonSaturating,
            GanModeTag::LeastSquares => GanMode::LeastSquares,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaddingTag {
    Reflect,
    Zero,
}

impl From<PaddingTag> for Padding {
    fn from(t: PaddingTag) -> Self {
        match t {
            PaddingTag::Reflect => Padding::Reflect,
            PaddingTag::Zero => Padding::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSettings {
    /// Training pairs.
    pub n: usize,
    /// Withheld test pairs.
    pub n_test: usize,
    pub size: usize,
    pub seed: u64,
    pub n_angles: usize,
    pub ray_step: f64,
    /// Detector bin spacing in pixels.
    pub bin_width: f64,
    pub energies_kev: Vec<f64>,
    pub spectrum_weights: Vec<f64>,
    pub metal_mu_ref: f64,
    pub metal_ref_kev: f64,
    /// Incident photons per ray; `null` disables noise.
    pub photons: Option<f64>,
    pub water_correction: bool,
    pub min_inserts: usize,
    pub max_inserts: usize,
    pub min_radius: f64,
    /// `null` scales with the image size.
    pub max_radius: Option<f64>,
    pub metal_hu: f32,
}

impl Default for SynthSettings {
    fn default() -> Self {
        let spectrum = Spectrum::default();
        let metal = WaterScaled::default();
        let mask = MaskConfig::default();
        Self {
            n: 200,
            n_test: 20,
            size: 64,
            seed: 0,
            n_angles: 180,
            ray_step: 0.5,
            bin_width: DEFAULT_BIN_WIDTH,
            energies_kev: spectrum.energies_kev().to_vec(),
            spectrum_weights: spectrum.weights().to_vec(),
            metal_mu_ref: metal.metal_mu_ref,
            metal_ref_kev: metal.metal_ref_kev,
            photons: Some(2e5),
            water_correction: true,
            min_inserts: mask.min_inserts,
            max_inserts: mask.max_inserts,
            min_radius: mask.min_radius,
            max_radius: None,
            metal_hu: mask.metal_hu,
        }
    }
}

impl SynthSettings {
    pub fn options(&self) -> Result<SynthOptions> {
        Ok(SynthOptions {
            spectrum: Spectrum::new(self.energies_kev.clone(), self.spectrum_weights.clone())?,
            attenuation: WaterScaled { metal_mu_ref: self.metal_mu_ref, metal_ref_kev: self.metal_ref_kev },
            photons: self.photons,
            water_correction: self.water_correction,
        })
    }

    pub fn geometry(&self) -> Result<ProjectionGeometry> {
        let mut g = ProjectionGeometry::with_bins(self.size, self.n_angles, self.bin_width);
        g.step = self.ray_step;
        g.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(g)
    }

    pub fn mask_config(&self) -> MaskConfig {
        MaskConfig {
            min_inserts: self.min_inserts,
            max_inserts: self.max_inserts,
            min_radius: self.min_radius,
            max_radius: self.max_radius.unwrap_or_else(|| MaskConfig::for_size(self.size).max_radius),
            metal_hu: self.metal_hu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurateSettings {
    /// Directory of ADNARR1 HU images to classify.
    pub input_dir: String,
    pub seed: u64,
}

impl Default for CurateSettings {
    fn default() -> Self {
        Self { input_dir: String::new(), seed: 0 }
    }
}

/// Flat training configuration mirroring the trainer's fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    /// Output directory of `synth`.
    pub data_dir: String,
    pub learning_rate: f64,
    #[serde(rename = "lambda_adv_I")]
    pub lambda_adv_clean: f64,
    #[serde(rename = "lambda_adv_Ia")]
    pub lambda_adv_artifact: f64,
    pub lambda_recon: f64,
    pub lambda_cycle: f64,
    pub lambda_art: f64,
    pub iterations: u64,
    pub batch_size: usize,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub image_size: usize,
    pub gan_mode: GanModeTag,
    pub base_channels: usize,
    pub n_res_blocks: usize,
    pub disc_layers: usize,
    pub padding: PaddingTag,
    pub window_lo: f32,
    pub window_hi: f32,
    /// Checkpoint to continue from.
    pub resume: Option<String>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        let n = NetworkConfig::default();
        let w = HuWindow::default();
        Self {
            data_dir: String::new(),
            learning_rate: t.learning_rate,
            lambda_adv_clean: t.weights.adv_clean,
            lambda_adv_artifact: t.weights.adv_artifact,
            lambda_recon: t.weights.recon,
            lambda_cycle: t.weights.cycle,
            lambda_art: t.weights.art,
            iterations: t.iterations,
            batch_size: t.batch_size,
            seed: t.seed,
            checkpoint_every: t.checkpoint_every,
            image_size: t.image_size,
            gan_mode: GanModeTag::NonSaturating,
            base_channels: n.base_channels,
            n_res_blocks: n.n_res_blocks,
            disc_layers: n.disc_layers,
            padding: PaddingTag::Reflect,
            window_lo: w.lo(),
            window_hi: w.hi(),
            resume: None,
        }
    }
}

impl TrainSettings {
    pub fn network(&self) -> NetworkConfig {
        NetworkConfig {
            base_channels: self.base_channels,
            n_res_blocks: self.n_res_blocks,
            disc_layers: self.disc_layers,
            padding: self.padding.into(),
            ..NetworkConfig::default()
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            learning_rate: self.learning_rate,
            weights: LossWeights {
                adv_clean: self.lambda_adv_clean,
                adv_artifact: self.lambda_adv_artifact,
                recon: self.lambda_recon,
                cycle: self.lambda_cycle,
                art: self.lambda_art,
            },
            iterations: self.iterations,
            batch_size: self.batch_size,
            seed: self.seed,
            checkpoint_every: self.checkpoint_every,
            image_size: self.image_size,
            gan_mode: self.gan_mode.into(),
            network: self.network(),
        };
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn window(&self) -> Result<HuWindow> {
        HuWindow::new(self.window_lo, self.window_hi).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub checkpoint: String,
    /// Output directory of `synth`; its withheld test pairs are evaluated.
    pub data_dir: String,
    pub exclude_metal: bool,
    pub write_csv: bool,
    /// Test pairs shown in the montage.
    pub montage_rows: usize,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { checkpoint: String::new(), data_dir: String::new(), exclude_metal: true, write_csv: true, montage_rows: 4, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferSettings {
    pub checkpoint: String,
    /// Directory of ADNARR1 artifact-affected HU images.
    pub input_dir: String,
    pub seed: u64,
}

impl Default for InferSettings {
    fn default() -> Self {
        Self { checkpoint: String::new(), input_dir: String::new(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferSettings {
    pub checkpoint: String,
    pub data_dir: String,
    /// Test pair whose artifact image donates the artifact.
    pub artifact_index: usize,
    /// Test pair whose clean image receives it.
    pub clean_index: usize,
    pub seed: u64,
}

impl Default for TransferSettings {
    fn default() -> Self {
        Self { checkpoint: String::new(), data_dir: String::new(), artifact_index: 0, clean_index: 1, seed: 0 }
    }
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn set_key(map: &mut Map<String, Value>, key: &str, value: Value) -> Result<()> {
    match map.get_mut(key) {
        Some(slot) => {
            *slot = value;
            Ok(())
        }
        None => Err(Error::UnknownKey(key.to_string())),
    }
}

/// Builds a config from defaults, an optional JSON file, an optional seed and `key=value` overrides.
pub fn resolve<C>(file: Option<&Path>, seed: Option<u64>, overrides: &[String]) -> Result<C>
where
    C: Serialize + DeserializeOwned + Default,
{
    let Value::Object(mut map) = serde_json::to_value(C::default()).map_err(|e| Error::Other(e.to_string()))? else {
        unreachable!("settings serialize to objects")
    };
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let Value::Object(obj) = parsed else {
            return Err(Error::Config(format!("{}: expected a JSON object", path.display())));
        };
        for (k, v) in obj {
            set_key(&mut map, &k, v)?;
        }
    }
    if let Some(seed) = seed {
        set_key(&mut map, "seed", Value::from(seed))?;
    }
    for item in overrides {
        let (k, v) = item.split_once('=').ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
        set_key(&mut map, k.trim(), parse_value(v.trim()))?;
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| Error::Config(e.to_string()))
}
