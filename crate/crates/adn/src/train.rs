//! The training driver: unpaired sampling, checkpoints and the loss log.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use adn_core::curation::{sample_unpaired, split_unsupervised, GroupedDataset, Pair};
use adn_core::image::{stack, NormalizedImage};
use adn_core::losses::LossReport;
use adn_core::networks::ModelState;
use adn_core::trainer::train_step;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, Checkpoint, SamplerState};
use crate::config::TrainSettings;
use crate::error::{Error, Result};

pub const CHECKPOINT_FILE: &str = "checkpoint.adnckpt";
pub const LOG_FILE: &str = "train_log.jsonl";
/// ChaCha stream used to shuffle pairs into the two groups.
pub const SPLIT_STREAM: u64 = 8;
/// ChaCha stream used to draw training batches.
pub const SAMPLER_STREAM: u64 = 9;

/// One line of the loss log.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: u64,
    pub adv_I: f64,
    pub adv_Ia: f64,
    pub recon: f64,
    pub cycle: f64,
    pub art: f64,
    pub total: f64,
    pub d_I: f64,
    pub d_Ia: f64,
    /// Seconds since this process started training.
    pub wall_time: f64,
}

impl LogRecord {
    pub fn new(step: u64, r: &LossReport, wall_time: f64) -> Self {
        Self {
            step,
            adv_I: r.adv_clean,
            adv_Ia: r.adv_artifact,
            recon: r.recon,
            cycle: r.cycle,
            art: r.art,
            total: r.total,
            d_I: r.disc_clean,
            d_Ia: r.disc_artifact,
            wall_time,
        }
    }
}

/// Splits training pairs into the artifact and clean groups.
pub fn group_pairs(pairs: Vec<Pair<NormalizedImage>>, seed: u64) -> Result<GroupedDataset<NormalizedImage>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SPLIT_STREAM);
    Ok(split_unsupervised(pairs, &mut rng)?)
}

fn sampler(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SAMPLER_STREAM);
    rng
}

/// Rejects resuming under settings that would change the model or the data stream.
fn check_resume(saved: &TrainSettings, now: &TrainSettings) -> Result<()> {
    let mut a = saved.clone();
    let mut b = now.clone();
    a.iterations = 0;
    b.iterations = 0;
    a.checkpoint_every = 0;
    b.checkpoint_every = 0;
    a.resume = None;
    b.resume = None;
    if a != b {
        return Err(Error::Config("checkpoint was trained with different settings; only iterations and checkpoint_every may change on resume".into()));
    }
    Ok(())
}

/// Keeps the first `keep` lines of an existing log.
fn truncate_log(path: &Path, keep: u64) -> Result<()> {
    let lines: Vec<String> = match File::open(path) {
        Ok(f) => BufReader::new(f).lines().take(keep as usize).collect::<std::io::Result<_>>().map_err(|e| Error::io(path, e))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Where a training run writes.
#[derive(Debug, Clone)]
pub struct TrainPaths {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
}

impl TrainPaths {
    pub fn in_dir(out: &Path) -> Self {
        Self { checkpoint: out.join(CHECKPOINT_FILE), log: out.join(LOG_FILE) }
    }
}

/// Runs training up to `settings.iterations` total steps.
///
/// With `resume` the step counter, optimizer state and sampler stream continue
/// from the checkpoint and the log is cut back to the checkpoint's step. On a
/// numeric failure the checkpoint file on disk is left as it was.
pub fn train(
    settings: &TrainSettings,
    dataset: &GroupedDataset<NormalizedImage>,
    paths: &TrainPaths,
    resume: Option<Checkpoint>,
    mut on_step: impl FnMut(&LogRecord),
) -> Result<Checkpoint> {
    let config = settings.train_config()?;
    let mut stored = settings.clone();
    stored.resume = None;

    let (mut state, mut rng) = match resume {
        Some(ck) => {
            check_resume(&ck.config, &stored)?;
            let rng = ck.sampler.restore()?;
            (ck.state, rng)
        }
        None => (ModelState::<f32>::new(config.network.clone(), config.seed, config.learning_rate)?, sampler(config.seed)),
    };
    if state.step > config.iterations {
        return Err(Error::Config(format!("checkpoint is at step {} beyond iterations = {}", state.step, config.iterations)));
    }

    if let Some(dir) = paths.log.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    truncate_log(&paths.log, state.step)?;
    let file = OpenOptions::new().append(true).create(true).open(&paths.log).map_err(|e| Error::io(&paths.log, e))?;
    let mut log = BufWriter::new(file);

    let start = Instant::now();
    let mut last: Option<LossReport> = None;
    while state.step < config.iterations {
        let mut xs = Vec::with_capacity(config.batch_size);
        let mut ys = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            let b = sample_unpaired(dataset, &mut rng)?;
            xs.push(b.x_a);
            ys.push(b.y);
        }
        let x_a = stack(&xs.iter().collect::<Vec<_>>())?;
        let y = stack(&ys.iter().collect::<Vec<_>>())?;
        let step = state.step + 1;
        let report = match train_step(&mut state, &x_a, &y, &config) {
            Ok(r) if r.is_finite() => r,
            Ok(r) => return Err(numeric(step, &format!("non-finite losses {r:?}"), last.as_ref())),
            Err(adn_core::Error::Numeric(msg)) => return Err(numeric(step, &msg, last.as_ref())),
            Err(e) => return Err(e.into()),
        };
        last = Some(report);
        let rec = LogRecord::new(step, &report, start.elapsed().as_secs_f64());
        serde_json::to_writer(&mut log, &rec).map_err(|e| Error::Other(e.to_string()))?;
        log.write_all(b"\n").map_err(|e| Error::io(&paths.log, e))?;
        on_step(&rec);

        if config.checkpoint_every > 0 && step % config.checkpoint_every == 0 && step < config.iterations {
            log.flush().map_err(|e| Error::io(&paths.log, e))?;
            let ck = Checkpoint { state: state.clone(), config: stored.clone(), sampler: SamplerState::capture(config.seed, &rng) };
            checkpoint::save(&paths.checkpoint, &ck)?;
        }
    }
    log.flush().map_err(|e| Error::io(&paths.log, e))?;
    let ck = Checkpoint { state, config: stored, sampler: SamplerState::capture(config.seed, &rng) };
    checkpoint::save(&paths.checkpoint, &ck)?;
    Ok(ck)
}

fn numeric(step: u64, msg: &str, last: Option<&LossReport>) -> Error {
    let tail = match last {
        Some(r) => format!("; last finite losses {r:?}"),
        None => String::new(),
    };
    Error::Numeric { step, msg: format!("{msg}{tail}") }
}

/// Reads the loss log back.
pub fn read_log(path: &Path) -> Result<Vec<LogRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(f)
        .lines()
        .map(|line| {
            let line = line.map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&line).map_err(|e| Error::Format { path: path.to_path_buf(), msg: e.to_string() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_keeps_leading_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.jsonl");
        fs::write(&p, "a\nb\nc\n").unwrap();
        truncate_log(&p, 2).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "a\nb\n");
        truncate_log(&p, 0).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "");
        truncate_log(&dir.path().join("absent"), 3).unwrap();
    }

    #[test]
    fn resume_rejects_changed_model() {
        let a = TrainSettings::default();
        let mut b = a.clone();
        b.iterations += 10;
        assert!(check_resume(&a, &b).is_ok());
        b.base_channels += 1;
        assert!(matches!(check_resume(&a, &b), Err(Error::Config(_))));
    }
}
