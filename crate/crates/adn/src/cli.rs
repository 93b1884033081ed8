//! Command-line definitions and the per-subcommand runners.

use std::path::{Path, PathBuf};

use adn_core::curation::{classify_clinical, ClinicalClass, METAL_HU};
use adn_core::image::{denormalize_hu, normalize_hu};
use adn_core::montage::{render_montage, MontageRow};
use adn_core::sim::MetalMask;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::array_io::{read_image, write_atomic, write_image};
use crate::checkpoint::{self, Checkpoint};
use crate::config::{resolve, CurateSettings, EvalSettings, InferSettings, SynthSettings, TrainSettings, TransferSettings};
use crate::dataset::{list_arrays, load_dataset, normalized_pairs, synthesize_dataset};
use crate::error::{Error, Result};
use crate::eval::{artifact_transfer, evaluate_dataset, metrics_csv, write_png, RowJson};
use crate::train::{group_pairs, train, TrainPaths};

pub const RESOLVED_CONFIG: &str = "resolved_config.json";

#[derive(Debug, Parser)]
#[command(name = "adn", version, about = "Unsupervised CT metal artifact reduction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Config override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate paired phantom data.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Training pairs.
        #[arg(long)]
        n: Option<usize>,
        /// Image side length.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Sort clinical images into artifact and clean groups.
    Curate {
        #[command(flatten)]
        common: Common,
    },
    /// Train a model on a synthesized dataset.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Score a checkpoint on withheld test pairs.
    Eval {
        #[command(flatten)]
        common: Common,
    },
    /// Correct a directory of artifact-affected images.
    Infer {
        #[command(flatten)]
        common: Common,
    },
    /// Move the artifact of one image onto another.
    Transfer {
        #[command(flatten)]
        common: Common,
    },
}

fn settings<C: Serialize + DeserializeOwned + Default>(common: &Common, extra: Vec<String>) -> Result<C> {
    let mut overrides = extra;
    overrides.extend(common.set.iter().cloned());
    let cfg: C = resolve(common.config.as_deref(), common.seed, &overrides)?;
    let text = serde_json::to_string_pretty(&cfg).map_err(|e| Error::Other(e.to_string()))?;
    write_atomic(&common.out.join(RESOLVED_CONFIG), text.as_bytes())?;
    Ok(cfg)
}

fn required(value: &str, key: &str) -> Result<PathBuf> {
    if value.is_empty() {
        return Err(Error::Config(format!("`{key}` must be set")));
    }
    Ok(PathBuf::from(value))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Other(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { common, n, size } => {
            let mut extra = Vec::new();
            extra.extend(n.map(|n| format!("n={n}")));
            extra.extend(size.map(|s| format!("size={s}")));
            run_synth(&settings(&common, extra)?, &common.out)
        }
        Command::Curate { common } => run_curate(&settings(&common, Vec::new())?, &common.out),
        Command::Train { common } => run_train(&settings(&common, Vec::new())?, &common.out).map(|_| ()),
        Command::Eval { common } => run_eval(&settings(&common, Vec::new())?, &common.out),
        Command::Infer { common } => run_infer(&settings(&common, Vec::new())?, &common.out),
        Command::Transfer { common } => run_transfer(&settings(&common, Vec::new())?, &common.out),
    }
}

pub fn run_synth(s: &SynthSettings, out: &Path) -> Result<()> {
    let m = synthesize_dataset(s, out)?;
    log::info!("wrote {} training and {} test pairs to {}", m.pairs.len(), m.test.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct Grouping {
    artifact: Vec<String>,
    clean: Vec<String>,
    discarded: Vec<String>,
}

pub fn run_curate(s: &CurateSettings, out: &Path) -> Result<()> {
    let dir = required(&s.input_dir, "input_dir")?;
    let files = list_arrays(&dir)?;
    let classes: Vec<(String, ClinicalClass)> = files
        .par_iter()
        .map(|p| {
            let img = read_image(p)?;
            Ok((p.file_name().unwrap_or_default().to_string_lossy().into_owned(), classify_clinical(&img)))
        })
        .collect::<Result<_>>()?;
    let mut g = Grouping { artifact: Vec::new(), clean: Vec::new(), discarded: Vec::new() };
    for (name, class) in classes {
        match class {
            ClinicalClass::ArtifactAffected => g.artifact.push(name),
            ClinicalClass::ArtifactFree => g.clean.push(name),
            ClinicalClass::Discard => g.discarded.push(name),
        }
    }
    log::info!("{} artifact, {} clean, {} discarded", g.artifact.len(), g.clean.len(), g.discarded.len());
    write_json(&out.join("grouping.json"), &g)
}

pub fn run_train(s: &TrainSettings, out: &Path) -> Result<Checkpoint> {
    let data = required(&s.data_dir, "data_dir")?;
    let window = s.window()?;
    s.train_config()?;
    let resume = match &s.resume {
        Some(p) => Some(checkpoint::load(Path::new(p))?),
        None => None,
    };
    let (m, train_pairs, _) = load_dataset(&data)?;
    if m.size != s.image_size {
        return Err(Error::Config(format!("image_size is {} but the dataset holds {}x{} images", s.image_size, m.size, m.size)));
    }
    let grouped = group_pairs(normalized_pairs(&train_pairs, window), s.seed)?;
    let every = (s.iterations / 20).max(1);
    train(s, &grouped, &TrainPaths::in_dir(out), resume, |r| {
        if r.step % every == 0 {
            log::info!("step {} total {:.4} recon {:.4} d_I {:.4} d_Ia {:.4}", r.step, r.total, r.recon, r.d_I, r.d_Ia);
        }
    })
}

#[derive(Debug, Serialize)]
struct MetricsReport<'a> {
    checkpoint_step: u64,
    exclude_metal: bool,
    rows: Vec<RowJson>,
    per_image: &'a [crate::eval::ImageMetrics],
}

pub fn run_eval(s: &EvalSettings, out: &Path) -> Result<()> {
    let ck = checkpoint::load(&required(&s.checkpoint, "checkpoint")?)?;
    let (_, _, test) = load_dataset(&required(&s.data_dir, "data_dir")?)?;
    if test.is_empty() {
        return Err(Error::Config("dataset has no withheld test pairs".into()));
    }
    let window = ck.config.window()?;
    let ev = evaluate_dataset(&ck.state.adn, window, &test, s.exclude_metal)?;
    let report = MetricsReport {
        checkpoint_step: ck.state.step,
        exclude_metal: s.exclude_metal,
        rows: vec![RowJson::from(&ev.input), RowJson::from(&ev.adn)],
        per_image: &ev.per_image,
    };
    write_json(&out.join("metrics.json"), &report)?;
    if s.write_csv {
        write_atomic(&out.join("metrics.csv"), metrics_csv(&[&ev.input, &ev.adn]).as_bytes())?;
    }
    let n = s.montage_rows.min(test.len());
    if n > 0 {
        let side = test[0].clean.height();
        let normed: Vec<_> = test[..n].iter().map(|p| p.normalized(window)).collect();
        let rows: Vec<MontageRow> = normed
            .iter()
            .zip(&ev.outputs)
            .zip(&test)
            .map(|(((x_a, y), o), p)| MontageRow { tiles: vec![x_a.pixels(), o.pixels(), y.pixels()], mask: Some(p.mask.pixels()) })
            .collect();
        write_png(&out.join("montage.png"), &render_montage(&rows, side, side)?)?;
    }
    log::info!(
        "input {:.2} dB / {:.1}, adn {:.2} dB / {:.1}",
        ev.input.psnr_db,
        ev.input.ssim_percent,
        ev.adn.psnr_db,
        ev.adn.ssim_percent
    );
    Ok(())
}

pub fn run_infer(s: &InferSettings, out: &Path) -> Result<()> {
    let ck = checkpoint::load(&required(&s.checkpoint, "checkpoint")?)?;
    let window = ck.config.window()?;
    let files = list_arrays(&required(&s.input_dir, "input_dir")?)?;
    let adn = &ck.state.adn;
    let done: Vec<()> = files
        .par_iter()
        .map(|p| {
            let img = read_image(p)?;
            let x = normalize_hu(&img, window);
            let y = adn.infer_correction(&x.to_tensor())?;
            let y = adn_core::NormalizedImage::from_tensor(&y, 0, window)?.with_metadata(img.pixel_spacing_mm(), img.provenance());
            let name = p.file_name().unwrap_or_default();
            write_image(&out.join("corrected").join(name), &denormalize_hu(&y))?;
            let mask = MetalMask::from_threshold(&img, METAL_HU);
            let row = MontageRow { tiles: vec![x.pixels(), y.pixels()], mask: Some(mask.pixels()) };
            let png = out.join("montages").join(Path::new(name).with_extension("png"));
            write_png(&png, &render_montage(&[row], img.height(), img.width())?)
        })
        .collect::<Result<_>>()?;
    log::info!("corrected {} image(s)", done.len());
    Ok(())
}

#[derive(Debug, Serialize)]
struct TransferReport {
    artifact_index: usize,
    clean_index: usize,
    transfer_l1: f64,
    cycle_l1: f64,
}

pub fn run_transfer(s: &TransferSettings, out: &Path) -> Result<()> {
    let ck = checkpoint::load(&required(&s.checkpoint, "checkpoint")?)?;
    let window = ck.config.window()?;
    let (_, _, test) = load_dataset(&required(&s.data_dir, "data_dir")?)?;
    let pick = |i: usize, key: &str| {
        test.get(i).ok_or_else(|| Error::Config(format!("`{key}` = {i} but there are {} test pairs", test.len())))
    };
    let donor = pick(s.artifact_index, "artifact_index")?;
    let target = pick(s.clean_index, "clean_index")?;
    let x_a = normalize_hu(&donor.artifact, window);
    let y = normalize_hu(&target.clean, window);
    let t = artifact_transfer(&ck.state.adn, &x_a, &y)?;
    write_image(&out.join("transferred.adnarr"), &denormalize_hu(&t.transferred))?;
    write_image(&out.join("recorrected.adnarr"), &denormalize_hu(&t.recorrected))?;
    let row = MontageRow { tiles: vec![x_a.pixels(), y.pixels(), t.transferred.pixels()], mask: None };
    write_png(&out.join("transfer.png"), &render_montage(&[row], y.height(), y.width())?)?;
    let report = TransferReport { artifact_index: s.artifact_index, clean_index: s.clean_index, transfer_l1: t.transfer_l1, cycle_l1: t.cycle_l1 };
    write_json(&out.join("transfer.json"), &report)
}
