//! The `adn-ckpt-1` checkpoint file.
//!
//! One JSON manifest line, then the little-endian `f32` payloads of every
//! entry in manifest order: all network parameters, then the Adam first and
//! second moments of the generator group and of the discriminator group.
//! Nothing time-dependent is stored, so equal states give equal bytes.

use std::path::Path;

use adn_core::networks::{ModelState, NETWORK_NAMES};
use adn_core::nn::ParamSet;
use adn_core::optim::Adam;
use adn_core::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::array_io::write_atomic;
use crate::config::TrainSettings;
use crate::error::{Error, Result};

pub const FORMAT: &str = "adn-ckpt-1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerState {
    pub seed: u64,
    pub stream: u64,
    /// ChaCha word position, as a decimal string because it is 128-bit.
    pub word_pos: String,
}

impl SamplerState {
    /// Records `rng`, which must have been created by `seed_from_u64(seed)`.
    pub fn capture(seed: u64, rng: &ChaCha8Rng) -> Self {
        Self { seed, stream: rng.get_stream(), word_pos: rng.get_word_pos().to_string() }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let pos: u128 = self.word_pos.parse().map_err(|e| Error::Other(format!("bad sampler position: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdamRecord {
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl AdamRecord {
    fn of(a: &Adam<f32>) -> Self {
        Self { t: a.t, lr: a.lr, beta1: a.beta1, beta2: a.beta2, eps: a.eps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    byte_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    step: u64,
    seed: u64,
    config: TrainSettings,
    sampler: SamplerState,
    adam_gen: AdamRecord,
    adam_disc: AdamRecord,
    entries: Vec<Entry>,
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub state: ModelState<f32>,
    pub config: TrainSettings,
    pub sampler: SamplerState,
}

fn sets_with_names<'a>(state: &'a ModelState<f32>) -> Vec<(String, &'a ParamSet<f32>)> {
    let mut out: Vec<(String, &ParamSet<f32>)> = NETWORK_NAMES.iter().zip(state.adn.param_sets()).map(|(n, s)| (format!("param/{n}"), s)).collect();
    for (i, (m, v)) in state.opt_gen.m.iter().zip(&state.opt_gen.v).enumerate() {
        out.push((format!("adam_m/{}", NETWORK_NAMES[i]), m));
        out.push((format!("adam_v/{}", NETWORK_NAMES[i]), v));
    }
    for (i, (m, v)) in state.opt_disc.m.iter().zip(&state.opt_disc.v).enumerate() {
        out.push((format!("adam_m/{}", NETWORK_NAMES[5 + i]), m));
        out.push((format!("adam_v/{}", NETWORK_NAMES[5 + i]), v));
    }
    out
}

pub fn encode(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let mut entries = Vec::new();
    let mut payload = Vec::new();
    for (prefix, set) in sets_with_names(&ckpt.state) {
        for (name, t) in set.iter() {
            let dims = t.dims().to_vec();
            entries.push(Entry { name: format!("{prefix}.{name}"), shape: dims, byte_len: t.len() * 4 });
            for v in t.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        step: ckpt.state.step,
        seed: ckpt.state.seed,
        config: ckpt.config.clone(),
        sampler: ckpt.sampler.clone(),
        adam_gen: AdamRecord::of(&ckpt.state.opt_gen),
        adam_disc: AdamRecord::of(&ckpt.state.opt_disc),
        entries,
    };
    let mut out = serde_json::to_vec(&manifest).map_err(|e| Error::Other(e.to_string()))?;
    out.push(b'\n');
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let format = |msg: String| Error::Format { path: path.to_path_buf(), msg };
    let corrupt = |msg: String| Error::Corruption { path: path.to_path_buf(), msg };
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| format("no manifest line".into()))?;
    let manifest: Manifest = serde_json::from_slice(&bytes[..nl]).map_err(|e| format(format!("bad manifest: {e}")))?;
    if manifest.format != FORMAT {
        return Err(format(format!("format is {:?}, expected {FORMAT}", manifest.format)));
    }
    let cfg = manifest.config.train_config()?;
    let mut state = ModelState::<f32>::new(cfg.network, manifest.seed, manifest.adam_gen.lr)?;
    state.step = manifest.step;

    let mut payload = &bytes[nl + 1..];
    let declared: usize = manifest.entries.iter().map(|e| e.byte_len).sum();
    if declared != payload.len() {
        return Err(corrupt(format!("manifest declares {declared} payload bytes, found {}", payload.len())));
    }
    let mut entries = manifest.entries.iter();
    let mut fill = |set: &mut ParamSet<f32>, prefix: &str| -> Result<()> {
        for i in 0..set.len() {
            let e = entries.next().ok_or_else(|| corrupt("fewer entries than parameters".into()))?;
            let want = format!("{prefix}.{}", set.names()[i]);
            if e.name != want {
                return Err(corrupt(format!("entry {} where {want} was expected", e.name)));
            }
            let n: usize = e.shape.iter().product();
            if e.shape.len() != 4 || e.byte_len != n * 4 {
                return Err(corrupt(format!("entry {} has inconsistent shape/length", e.name)));
            }
            let (chunk, rest) = payload.split_at(e.byte_len);
            payload = rest;
            let data = chunk.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            let dims = [e.shape[0], e.shape[1], e.shape[2], e.shape[3]];
            set.replace(i, Tensor::from_vec(dims, data)).map_err(|err| corrupt(format!("entry {}: {err}", e.name)))?;
        }
        Ok(())
    };
    for (i, set) in state.adn.param_sets_mut().into_iter().enumerate() {
        fill(set, &format!("param/{}", NETWORK_NAMES[i]))?;
    }
    for (i, (m, v)) in state.opt_gen.m.iter_mut().zip(state.opt_gen.v.iter_mut()).enumerate() {
        fill(m, &format!("adam_m/{}", NETWORK_NAMES[i]))?;
        fill(v, &format!("adam_v/{}", NETWORK_NAMES[i]))?;
    }
    for (i, (m, v)) in state.opt_disc.m.iter_mut().zip(state.opt_disc.v.iter_mut()).enumerate() {
        fill(m, &format!("adam_m/{}", NETWORK_NAMES[5 + i]))?;
        fill(v, &format!("adam_v/{}", NETWORK_NAMES[5 + i]))?;
    }
    if entries.next().is_some() {
        return Err(corrupt("more entries than parameters".into()));
    }
    for (opt, rec) in [(&mut state.opt_gen, &manifest.adam_gen), (&mut state.opt_disc, &manifest.adam_disc)] {
        opt.t = rec.t;
        opt.lr = rec.lr;
        opt.beta1 = rec.beta1;
        opt.beta2 = rec.beta2;
        opt.eps = rec.eps;
    }
    Ok(Checkpoint { state, config: manifest.config, sampler: manifest.sampler })
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_atomic(path, &encode(ckpt)?)
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
