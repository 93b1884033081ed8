//! Synthesized paired datasets on disk.
//!
//! A dataset directory holds `manifest.json` plus one `clean`, `artifact` and
//! `mask` ADNARR1 file per pair, split into `train/` and `test/`.

use std::path::{Path, PathBuf};

use adn_core::curation::Pair;
use adn_core::image::{normalize_hu, CtImage, HuWindow, NormalizedImage};
use adn_core::sim::{make_metal_mask, make_phantom, synthesize_pair, MetalMask};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_io::{read_image, read_mask, write_atomic, write_image, write_mask};
use crate::config::SynthSettings;
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT: &str = "adn-dataset-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub id: usize,
    /// Seeds the phantom, the mask and the projection noise of this pair.
    pub seed: u64,
    pub clean: String,
    pub artifact: String,
    pub mask: String,
    pub metal_pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub size: usize,
    pub spacing_mm: f32,
    pub metal_hu: f32,
    pub settings: SynthSettings,
    pub pairs: Vec<PairRecord>,
    pub test: Vec<PairRecord>,
}

/// A pair read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPair {
    pub id: usize,
    pub artifact: CtImage,
    pub clean: CtImage,
    pub mask: MetalMask,
}

impl LoadedPair {
    pub fn normalized(&self, window: HuWindow) -> (NormalizedImage, NormalizedImage) {
        (normalize_hu(&self.artifact, window), normalize_hu(&self.clean, window))
    }
}

fn pair_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| master.next_u64()).collect()
}

/// Simulates `n + n_test` pairs into `out` and writes the manifest.
pub fn synthesize_dataset(settings: &SynthSettings, out: &Path) -> Result<DatasetManifest> {
    let options = settings.options()?;
    let mask_cfg = settings.mask_config();
    let geometry = settings.geometry()?;
    let total = settings.n + settings.n_test;
    if settings.n < 2 {
        return Err(Error::Config(format!("n must be at least 2 to form both groups, got {}", settings.n)));
    }
    let seeds = pair_seeds(settings.seed, total);

    let records: Vec<(PairRecord, f32)> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let clean = make_phantom(&mut rng, settings.size)?;
            let mask = make_metal_mask(settings.size, &mut rng, &mask_cfg)?;
            let pair = synthesize_pair(&clean, &mask, &options, &geometry, seed)?;
            let (split, id) = if i < settings.n { ("train", i) } else { ("test", i - settings.n) };
            let stem = format!("{split}/{id:06}");
            let rec = PairRecord {
                id,
                seed,
                clean: format!("{stem}_clean.adnarr"),
                artifact: format!("{stem}_artifact.adnarr"),
                mask: format!("{stem}_mask.adnarr"),
                metal_pixels: mask.count(),
            };
            write_image(&out.join(&rec.clean), &pair.clean)?;
            write_image(&out.join(&rec.artifact), &pair.artifact)?;
            write_mask(&out.join(&rec.mask), &pair.mask, clean.pixel_spacing_mm())?;
            Ok((rec, clean.pixel_spacing_mm()))
        })
        .collect::<Result<_>>()?;

    let spacing_mm = records.first().map_or(0.0, |r| r.1);
    let mut records: Vec<PairRecord> = records.into_iter().map(|r| r.0).collect();
    let test = records.split_off(settings.n);
    let manifest = DatasetManifest {
        format: FORMAT.into(),
        size: settings.size,
        spacing_mm,
        metal_hu: settings.metal_hu,
        settings: settings.clone(),
        pairs: records,
        test,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Other(e.to_string()))?;
    write_atomic(&out.join(MANIFEST), text.as_bytes())?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Format { path: path.clone(), msg: e.to_string() })?;
    if m.format != FORMAT {
        return Err(Error::Format { path, msg: format!("format is {:?}, expected {FORMAT}", m.format) });
    }
    Ok(m)
}

fn load_records(dir: &Path, records: &[PairRecord], metal_hu: f32) -> Result<Vec<LoadedPair>> {
    records
        .par_iter()
        .map(|r| {
            Ok(LoadedPair {
                id: r.id,
                artifact: read_image(&dir.join(&r.artifact))?,
                clean: read_image(&dir.join(&r.clean))?,
                mask: read_mask(&dir.join(&r.mask), metal_hu)?,
            })
        })
        .collect()
}

/// Training pairs and withheld test pairs of a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<LoadedPair>, Vec<LoadedPair>)> {
    let m = read_manifest(dir)?;
    let train = load_records(dir, &m.pairs, m.metal_hu)?;
    let test = load_records(dir, &m.test, m.metal_hu)?;
    Ok((m, train, test))
}

/// Normalized training pairs keyed by pair id.
pub fn normalized_pairs(pairs: &[LoadedPair], window: HuWindow) -> Vec<Pair<NormalizedImage>> {
    pairs
        .iter()
        .map(|p| {
            let (artifact, clean) = p.normalized(window);
            Pair { id: p.id, artifact, clean }
        })
        .collect()
}

/// Every `.adnarr` file directly inside `dir`, sorted by name.
pub fn list_arrays(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == "adnarr") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}
