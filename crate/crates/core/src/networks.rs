//! The disentanglement architecture.
//!
//! Two content encoders (`E_I` for artifact-free images, `E_Ia` for
//! artifact-affected ones) map into a shared content space; an artifact
//! encoder `E_a` extracts a three-level artifact pyramid; `G_I` decodes a
//! content code into an artifact-free image and `G_Ia` decodes a content code
//! plus an artifact pyramid into an artifact-affected image. Two patch
//! discriminators `D_I`/`D_Ia` score realism in each domain.
//!
//! All networks operate on NCHW tensors with one channel, values in
//! `[-1, 1]`, and spatial sizes divisible by four.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid_arg, Result};
use crate::nn::{
    Act, ConvBlock, ConvBlockCache, MergeBlock, MergeCache, Norm, Padding, ParamSet, ResBlock, ResCache, UpBlock,
};
use crate::optim::Adam;
use crate::tensor::{Scalar, Tensor};

/// Architecture hyper-parameters shared by all seven networks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub base_channels: usize,
    pub n_res_blocks: usize,
    /// Number of stride-2 stages in the encoders; the pyramid contract fixes it at 2.
    pub n_downsamples: usize,
    /// Number of stride-2 layers in each discriminator.
    pub disc_layers: usize,
    pub padding: Padding,
    pub norm: Norm,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { base_channels: 64, n_res_blocks: 4, n_downsamples: 2, disc_layers: 3, padding: Padding::Reflect, norm: Norm::Instance }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_channels == 0 || self.n_res_blocks == 0 || self.disc_layers == 0 {
            return Err(invalid_arg!("base_channels, n_res_blocks and disc_layers must be positive: {self:?}"));
        }
        if self.n_downsamples != 2 {
            return Err(invalid_arg!("n_downsamples is fixed at 2, got {}", self.n_downsamples));
        }
        Ok(())
    }

    /// Channel width of the content code.
    pub fn content_channels(&self) -> usize {
        self.base_channels << self.n_downsamples
    }

    /// Channel widths of the artifact pyramid, finest level first.
    pub fn artifact_channels(&self) -> Vec<usize> {
        (0..=self.n_downsamples).map(|i| self.base_channels << i).collect()
    }

    fn scale(&self) -> usize {
        1 << self.n_downsamples
    }

    /// Checks that an `h x w` image passes through every network.
    pub fn check_input(&self, h: usize, w: usize) -> Result<()> {
        let s = self.scale();
        if h % s != 0 || w % s != 0 {
            return Err(invalid_arg!("image size {h}x{w} is not divisible by {s}"));
        }
        let min = (2 * s).max(1 << self.disc_layers);
        if h < min || w < min {
            return Err(invalid_arg!("image size {h}x{w} is below the minimum {min}x{min}"));
        }
        Ok(())
    }
}

fn check_image<T: Scalar>(config: &NetworkConfig, x: &Tensor<T>) -> Result<()> {
    if x.channels() != 1 {
        return Err(invalid_arg!("expected single-channel images, got {} channels", x.channels()));
    }
    config.check_input(x.height(), x.width())
}

/// Content code `z` in the shared content space.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentCode<T>(pub Tensor<T>);

/// Artifact code: feature maps at scales 1, 1/2 and 1/4 of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactCode<T> {
    pub levels: Vec<Tensor<T>>,
}

impl<T: Scalar> ArtifactCode<T> {
    pub fn zeros_like(&self) -> Self {
        Self { levels: self.levels.iter().map(Tensor::zeros_like).collect() }
    }
}

/// Content encoder (`E_I` or `E_Ia`): 7x7 stem, two stride-2 stages, residual blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentEncoder<T> {
    pub params: ParamSet<T>,
    stem: ConvBlock,
    downs: Vec<ConvBlock>,
    res: Vec<ResBlock>,
}

#[derive(Debug, Clone)]
pub struct ContentEncoderCache<T> {
    stem: ConvBlockCache<T>,
    downs: Vec<ConvBlockCache<T>>,
    res: Vec<ResCache<T>>,
}

impl<T: Scalar> ContentEncoder<T> {
    pub fn new(config: &NetworkConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut params = ParamSet::new();
        let b = config.base_channels;
        let pad = config.padding;
        let stem = ConvBlock::new(&mut params, "stem", 1, b, 7, 1, 3, pad, config.norm, Act::Relu, rng);
        let downs = (0..config.n_downsamples)
            .map(|i| {
                let c = b << i;
                ConvBlock::new(&mut params, &format!("down{i}"), c, 2 * c, 4, 2, 1, pad, config.norm, Act::Relu, rng)
            })
            .collect();
        let ch = config.content_channels();
        let res = (0..config.n_res_blocks).map(|i| ResBlock::new(&mut params, &format!("res{i}"), ch, config.norm, pad, rng)).collect();
        Self { params, stem, downs, res }
    }

    pub fn forward(&self, x: &Tensor<T>) -> (ContentCode<T>, ContentEncoderCache<T>) {
        let (mut h, stem) = self.stem.forward(&self.params, x);
        let mut downs = Vec::with_capacity(self.downs.len());
        for d in &self.downs {
            let (y, c) = d.forward(&self.params, &h);
            downs.push(c);
            h = y;
        }
        let mut res = Vec::with_capacity(self.res.len());
        for r in &self.res {
            let (y, c) = r.forward(&self.params, &h);
            res.push(c);
            h = y;
        }
        (ContentCode(h), ContentEncoderCache { stem, downs, res })
    }

    pub fn backward(&self, grads: &mut ParamSet<T>, cache: &ContentEncoderCache<T>, grad: &Tensor<T>, need_input: bool) -> Option<Tensor<T>> {
        let mut g = grad.clone();
        for (r, c) in self.res.iter().zip(&cache.res).rev() {
            g = r.backward(&self.params, grads, c, &g);
        }
        for (d, c) in self.downs.iter().zip(&cache.downs).rev() {
            g = d.backward(&self.params, grads, c, &g, true).expect("input gradient requested");
        }
        self.stem.backward(&self.params, grads, &cache.stem, &g, need_input)
    }
}

/// Artifact encoder `E_a`: same stem and stride-2 stages as the content
/// encoders but without normalization, emitting every stage's output.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactEncoder<T> {
    pub params: ParamSet<T>,
    stages: Vec<ConvBlock>,
}

#[derive(Debug, Clone)]
pub struct ArtifactEncoderCache<T> {
    stages: Vec<ConvBlockCache<T>>,
}

impl<T: Scalar> ArtifactEncoder<T> {
    pub fn new(config: &NetworkConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut params = ParamSet::new();
        let b = config.base_channels;
        let pad = config.padding;
        let mut stages = alloc::vec![ConvBlock::new(&mut params, "stem", 1, b, 7, 1, 3, pad, Norm::None, Act::Relu, rng)];
        for i in 0..config.n_downsamples {
            let c = b << i;
            stages.push(ConvBlock::new(&mut params, &format!("down{i}"), c, 2 * c, 4, 2, 1, pad, Norm::None, Act::Relu, rng));
        }
        Self { params, stages }
    }

    pub fn forward(&self, x: &Tensor<T>) -> (ArtifactCode<T>, ArtifactEncoderCache<T>) {
        let mut levels: Vec<Tensor<T>> = Vec::with_capacity(self.stages.len());
        let mut caches = Vec::with_capacity(self.stages.len());
        for s in &self.stages {
            let (y, c) = s.forward(&self.params, levels.last().unwrap_or(x));
            levels.push(y);
            caches.push(c);
        }
        (ArtifactCode { levels }, ArtifactEncoderCache { stages: caches })
    }

    pub fn backward(&self, grads: &mut ParamSet<T>, cache: &ArtifactEncoderCache<T>, grad: &ArtifactCode<T>, need_input: bool) -> Option<Tensor<T>> {
        let mut carry: Option<Tensor<T>> = None;
        for (i, (s, c)) in self.stages.iter().zip(&cache.stages).enumerate().rev() {
            let mut g = grad.levels[i].clone();
            if let Some(from_next) = &carry {
                g.add_assign(from_next);
            }
            carry = s.backward(&self.params, grads, c, &g, i > 0 || need_input);
        }
        carry
    }
}

fn head<T: Scalar>(params: &mut ParamSet<T>, config: &NetworkConfig, rng: &mut ChaCha8Rng) -> ConvBlock {
    ConvBlock::new(params, "final", config.base_channels, 1, 7, 1, 3, config.padding, Norm::None, Act::Tanh, rng)
}

fn ups<T: Scalar>(params: &mut ParamSet<T>, config: &NetworkConfig, rng: &mut ChaCha8Rng) -> Vec<UpBlock> {
    (0..config.n_downsamples)
        .map(|i| {
            let c = config.content_channels() >> i;
            UpBlock::new(params, &format!("up{i}"), c, c / 2, config.norm, config.padding, rng)
        })
        .collect()
}

/// Artifact-free generator `G_I`: residual blocks, two upsampling stages, tanh head.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanGenerator<T> {
    pub params: ParamSet<T>,
    res: Vec<ResBlock>,
    ups: Vec<UpBlock>,
    head: ConvBlock,
}

#[derive(Debug, Clone)]
pub struct CleanGeneratorCache<T> {
    res: Vec<ResCache<T>>,
    ups: Vec<ConvBlockCache<T>>,
    head: ConvBlockCache<T>,
}

impl<T: Scalar> CleanGenerator<T> {
    pub fn new(config: &NetworkConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut params = ParamSet::new();
        let ch = config.content_channels();
        let res = (0..config.n_res_blocks).map(|i| ResBlock::new(&mut params, &format!("res{i}"), ch, config.norm, config.padding, rng)).collect();
        let ups = ups(&mut params, config, rng);
        let head = head(&mut params, config, rng);
        Self { params, res, ups, head }
    }

    pub fn forward(&self, z: &ContentCode<T>) -> (Tensor<T>, CleanGeneratorCache<T>) {
        let mut h = z.0.clone();
        let mut res = Vec::with_capacity(self.res.len());
        for r in &self.res {
            let (y, c) = r.forward(&self.params, &h);
            res.push(c);
            h = y;
        }
        let mut ups = Vec::with_capacity(self.ups.len());
        for u in &self.ups {
            let (y, c) = u.forward(&self.params, &h);
            ups.push(c);
            h = y;
        }
        let (out, head) = self.head.forward(&self.params, &h);
        (out, CleanGeneratorCache { res, ups, head })
    }

    pub fn backward(&self, grads: &mut ParamSet<T>, cache: &CleanGeneratorCache<T>, grad: &Tensor<T>) -> Tensor<T> {
        let mut g = self.head.backward(&self.params, grads, &cache.head, grad, true).expect("input gradient requested");
        for (u, c) in self.ups.iter().zip(&cache.ups).rev() {
            g = u.backward(&self.params, grads, c, &g);
        }
        for (r, c) in self.res.iter().zip(&cache.res).rev() {
            g = r.backward(&self.params, grads, c, &g);
        }
        g
    }
}

/// Artifact-affected generator `G_Ia`: like `G_I`, with a merge block at
/// each scale that folds in the matching artifact pyramid level.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactGenerator<T> {
    pub params: ParamSet<T>,
    /// `merges[0]` acts at the coarsest scale, before the residual blocks.
    merges: Vec<MergeBlock>,
    res: Vec<ResBlock>,
    ups: Vec<UpBlock>,
    head: ConvBlock,
}

#[derive(Debug, Clone)]
pub struct ArtifactGeneratorCache<T> {
    merges: Vec<MergeCache<T>>,
    res: Vec<ResCache<T>>,
    ups: Vec<ConvBlockCache<T>>,
    head: ConvBlockCache<T>,
}

impl<T: Scalar> ArtifactGenerator<T> {
    pub fn new(config: &NetworkConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut params = ParamSet::new();
        let ch = config.content_channels();
        let art = config.artifact_channels();
        let nd = config.n_downsamples;
        let mut merges = alloc::vec![MergeBlock::new(&mut params, "merge0", ch, art[nd], rng)];
        let res = (0..config.n_res_blocks).map(|i| ResBlock::new(&mut params, &format!("res{i}"), ch, config.norm, config.padding, rng)).collect();
        let ups = ups(&mut params, config, rng);
        for i in 0..nd {
            let c = ch >> (i + 1);
            merges.push(MergeBlock::new(&mut params, &format!("merge{}", i + 1), c, art[nd - 1 - i], rng));
        }
        let head = head(&mut params, config, rng);
        Self { params, merges, res, ups, head }
    }

    fn check_code(&self, z: &ContentCode<T>, a: &ArtifactCode<T>) -> Result<()> {
        let nd = self.ups.len();
        if a.levels.len() != nd + 1 {
            return Err(invalid_arg!("artifact code has {} levels, expected {}", a.levels.len(), nd + 1));
        }
        let [n, _, h, w] = z.0.dims();
        for (i, level) in a.levels.iter().enumerate() {
            let want = [n, self.merges[nd - i].side_ch(), h << (nd - i), w << (nd - i)];
            if level.dims() != want {
                return Err(invalid_arg!("artifact level {i} has dims {:?}, expected {:?}", level.dims(), want));
            }
        }
        Ok(())
    }

    pub fn forward(&self, z: &ContentCode<T>, a: &ArtifactCode<T>) -> (Tensor<T>, ArtifactGeneratorCache<T>) {
        let nd = self.ups.len();
        let mut merges = Vec::with_capacity(self.merges.len());
        let (mut h, mc) = self.merges[0].forward(&self.params, &z.0, &a.levels[nd]);
        merges.push(mc);
        let mut res = Vec::with_capacity(self.res.len());
        for r in &self.res {
            let (y, c) = r.forward(&self.params, &h);
            res.push(c);
            h = y;
        }
        let mut ups = Vec::with_capacity(nd);
        for (i, u) in self.ups.iter().enumerate() {
            let (y, c) = u.forward(&self.params, &h);
            ups.push(c);
            let (y, mc) = self.merges[i + 1].forward(&self.params, &y, &a.levels[nd - 1 - i]);
            merges.push(mc);
            h = y;
        }
        let (out, head) = self.head.forward(&self.params, &h);
        (out, ArtifactGeneratorCache { merges, res, ups, head })
    }

    /// Returns gradients for the content code and the artifact pyramid.
    pub fn backward(&self, grads: &mut ParamSet<T>, cache: &ArtifactGeneratorCache<T>, grad: &Tensor<T>) -> (Tensor<T>, ArtifactCode<T>) {
        let nd = self.ups.len();
        let mut levels: Vec<Option<Tensor<T>>> = (0..=nd).map(|_| None).collect();
        let mut g = self.head.backward(&self.params, grads, &cache.head, grad, true).expect("input gradient requested");
        for i in (0..nd).rev() {
            let (gm, gs) = self.merges[i + 1].backward(&self.params, grads, &cache.merges[i + 1], &g);
            levels[nd - 1 - i] = Some(gs);
            g = self.ups[i].backward(&self.params, grads, &cache.ups[i], &gm);
        }
        for (r, c) in self.res.iter().zip(&cache.res).rev() {
            g = r.backward(&self.params, grads, c, &g);
        }
        let (gz, gs) = self.merges[0].backward(&self.params, grads, &cache.merges[0], &g);
        levels[nd] = Some(gs);
        (gz, ArtifactCode { levels: levels.into_iter().map(|l| l.expect("every level visited")).collect() })
    }
}

/// Patch discriminator: stride-2 4x4 convolutions with leaky ReLU, then a
/// 3x3 convolution to one logit per patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator<T> {
    pub params: ParamSet<T>,
    layers: Vec<ConvBlock>,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorCache<T> {
    layers: Vec<ConvBlockCache<T>>,
}

impl<T: Scalar> Discriminator<T> {
    pub fn new(config: &NetworkConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut params = ParamSet::new();
        let b = config.base_channels;
        let mut layers = Vec::with_capacity(config.disc_layers + 1);
        let mut in_ch = 1;
        for i in 0..config.disc_layers {
            let out = b << i.min(3);
            layers.push(ConvBlock::new(&mut params, &format!("conv{i}"), in_ch, out, 4, 2, 1, Padding::Zero, Norm::None, Act::LeakyRelu(0.2), rng));
            in_ch = out;
        }
        layers.push(ConvBlock::new(&mut params, "score", in_ch, 1, 3, 1, 1, Padding::Zero, Norm::None, Act::None, rng));
        Self { params, layers }
    }

    pub fn forward(&self, x: &Tensor<T>) -> (Tensor<T>, DiscriminatorCache<T>) {
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (y, c) = l.forward(&self.params, &h);
            caches.push(c);
            h = y;
        }
        (h, DiscriminatorCache { layers: caches })
    }

    /// Accumulates parameter gradients into `grads` (pass a scratch set to
    /// discard them) and returns the input gradient.
    pub fn backward(&self, grads: &mut ParamSet<T>, cache: &DiscriminatorCache<T>, grad: &Tensor<T>, need_input: bool) -> Option<Tensor<T>> {
        let mut g = grad.clone();
        for (i, (l, c)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            g = l.backward(&self.params, grads, c, &g, i > 0 || need_input)?;
        }
        Some(g)
    }
}

/// Which image domain a discriminator judges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Artifact-free images, judged by `D_I`.
    Clean,
    /// Artifact-affected images, judged by `D_Ia`.
    Artifact,
}

/// Names of the seven networks in storage order.
pub const NETWORK_NAMES: [&str; 7] = ["E_I", "E_Ia", "E_a", "G_I", "G_Ia", "D_I", "D_Ia"];

/// The full set of encoders, generators and discriminators.
#[derive(Debug, Clone, PartialEq)]
pub struct Adn<T> {
    pub config: NetworkConfig,
    /// `E_I`
    pub enc_clean: ContentEncoder<T>,
    /// `E_Ia`
    pub enc_artifact_content: ContentEncoder<T>,
    /// `E_a`
    pub enc_artifact: ArtifactEncoder<T>,
    /// `G_I`
    pub gen_clean: CleanGenerator<T>,
    /// `G_Ia`
    pub gen_artifact: ArtifactGenerator<T>,
    /// `D_I`
    pub disc_clean: Discriminator<T>,
    /// `D_Ia`
    pub disc_artifact: Discriminator<T>,
}

/// Gradient buffers with the layout of [`Adn`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdnGrads<T> {
    pub sets: [ParamSet<T>; 7],
}

impl<T: Scalar> AdnGrads<T> {
    pub fn max_abs(&self) -> T {
        self.sets.iter().flat_map(|s| s.tensors()).fold(T::zero(), |m, t| m.max(t.max_abs()))
    }
}

impl<T: Scalar> Adn<T> {
    /// Builds all networks with weights drawn from independent streams of a
    /// generator seeded by `seed`.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let rng = |stream: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(stream);
            r
        };
        Ok(Self {
            config,
            enc_clean: ContentEncoder::new(&config, &mut rng(0)),
            enc_artifact_content: ContentEncoder::new(&config, &mut rng(1)),
            enc_artifact: ArtifactEncoder::new(&config, &mut rng(2)),
            gen_clean: CleanGenerator::new(&config, &mut rng(3)),
            gen_artifact: ArtifactGenerator::new(&config, &mut rng(4)),
            disc_clean: Discriminator::new(&config, &mut rng(5)),
            disc_artifact: Discriminator::new(&config, &mut rng(6)),
        })
    }

    /// Parameter sets in [`NETWORK_NAMES`] order.
    pub fn param_sets(&self) -> [&ParamSet<T>; 7] {
        [
            &self.enc_clean.params,
            &self.enc_artifact_content.params,
            &self.enc_artifact.params,
            &self.gen_clean.params,
            &self.gen_artifact.params,
            &self.disc_clean.params,
            &self.disc_artifact.params,
        ]
    }

    pub fn param_sets_mut(&mut self) -> [&mut ParamSet<T>; 7] {
        [
            &mut self.enc_clean.params,
            &mut self.enc_artifact_content.params,
            &mut self.enc_artifact.params,
            &mut self.gen_clean.params,
            &mut self.gen_artifact.params,
            &mut self.disc_clean.params,
            &mut self.disc_artifact.params,
        ]
    }

    pub fn zero_grads(&self) -> AdnGrads<T> {
        AdnGrads { sets: self.param_sets().map(ParamSet::zeros_like) }
    }

    /// Scalar parameter count per network, in [`NETWORK_NAMES`] order.
    pub fn param_counts(&self) -> [usize; 7] {
        self.param_sets().map(ParamSet::count)
    }

    pub fn param_count(&self) -> usize {
        self.param_counts().iter().sum()
    }

    /// `E_Ia`
    pub fn encode_content_artifact(&self, x_a: &Tensor<T>) -> Result<ContentCode<T>> {
        check_image(&self.config, x_a)?;
        Ok(self.enc_artifact_content.forward(x_a).0)
    }

    /// `E_I`
    pub fn encode_content_clean(&self, y: &Tensor<T>) -> Result<ContentCode<T>> {
        check_image(&self.config, y)?;
        Ok(self.enc_clean.forward(y).0)
    }

    /// `E_a`
    pub fn encode_artifact(&self, x_a: &Tensor<T>) -> Result<ArtifactCode<T>> {
        check_image(&self.config, x_a)?;
        Ok(self.enc_artifact.forward(x_a).0)
    }

    fn check_code(&self, z: &ContentCode<T>) -> Result<()> {
        let want = self.config.content_channels();
        if z.0.channels() != want {
            return Err(invalid_arg!("content code has {} channels, expected {want}", z.0.channels()));
        }
        let s = 1 << self.config.n_downsamples;
        self.config.check_input(z.0.height() * s, z.0.width() * s)
    }

    /// `G_I`
    pub fn decode_clean(&self, z: &ContentCode<T>) -> Result<Tensor<T>> {
        self.check_code(z)?;
        Ok(self.gen_clean.forward(z).0)
    }

    /// `G_Ia`
    pub fn decode_artifact(&self, z: &ContentCode<T>, a: &ArtifactCode<T>) -> Result<Tensor<T>> {
        self.check_code(z)?;
        self.gen_artifact.check_code(z, a)?;
        Ok(self.gen_artifact.forward(z, a).0)
    }

    /// Patch logits from `D_I` or `D_Ia`.
    pub fn discriminate(&self, img: &Tensor<T>, which: Domain) -> Result<Tensor<T>> {
        check_image(&self.config, img)?;
        let d = match which {
            Domain::Clean => &self.disc_clean,
            Domain::Artifact => &self.disc_artifact,
        };
        Ok(d.forward(img).0)
    }

    /// Artifact correction `G_I(E_Ia(x_a))`.
    pub fn infer_correction(&self, x_a: &Tensor<T>) -> Result<Tensor<T>> {
        let z = self.encode_content_artifact(x_a)?;
        self.decode_clean(&z)
    }

    /// Transfers the artifact of `x_a` onto `y`: `G_Ia(E_I(y), E_a(x_a))`.
    pub fn transfer_artifact(&self, x_a: &Tensor<T>, y: &Tensor<T>) -> Result<Tensor<T>> {
        if x_a.dims() != y.dims() {
            return Err(invalid_arg!("artifact and clean images differ in shape: {:?} vs {:?}", x_a.dims(), y.dims()));
        }
        let z_y = self.encode_content_clean(y)?;
        let z_a = self.encode_artifact(x_a)?;
        self.decode_artifact(&z_y, &z_a)
    }

    pub fn all_finite(&self) -> bool {
        self.param_sets().iter().all(|p| p.all_finite())
    }
}

/// Network parameters plus optimizer state and bookkeeping for training.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<T> {
    pub adn: Adn<T>,
    /// Adam state for the five encoder/generator networks.
    pub opt_gen: Adam<T>,
    /// Adam state for the two discriminators.
    pub opt_disc: Adam<T>,
    pub step: u64,
    /// Seed the parameters were initialized from.
    pub seed: u64,
}

impl<T: Scalar> ModelState<T> {
    pub fn new(config: NetworkConfig, seed: u64, learning_rate: f64) -> Result<Self> {
        let adn = Adn::new(config, seed)?;
        let sets = adn.param_sets();
        let opt_gen = Adam::new(&sets[..5], learning_rate)?;
        let opt_disc = Adam::new(&sets[5..], learning_rate)?;
        Ok(Self { adn, opt_gen, opt_disc, step: 0, seed })
    }

    /// Names of every parameter tensor, prefixed by its network.
    pub fn param_names(&self) -> Vec<String> {
        NETWORK_NAMES
            .iter()
            .zip(self.adn.param_sets())
            .flat_map(|(net, set)| set.names().iter().map(move |n| format!("{net}.{n}")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> NetworkConfig {
        NetworkConfig { base_channels: 4, n_res_blocks: 1, ..NetworkConfig::default() }
    }

    fn image(h: usize, w: usize, seed: u64) -> Tensor<f32> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_vec([1, 1, h, w], (0..h * w).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn rejects_sizes_not_divisible_by_four() {
        let adn = Adn::<f32>::new(small(), 0).unwrap();
        assert!(adn.encode_content_clean(&image(18, 16, 0)).is_err());
        assert!(adn.encode_content_clean(&image(4, 4, 0)).is_err());
        assert!(adn.encode_content_clean(&image(16, 16, 0)).is_ok());
    }

    #[test]
    fn non_square_inputs_compose() {
        let adn = Adn::<f32>::new(small(), 1).unwrap();
        let x = image(16, 24, 2);
        let z = adn.encode_content_artifact(&x).unwrap();
        assert_eq!(z.0.dims(), [1, 16, 4, 6]);
        let a = adn.encode_artifact(&x).unwrap();
        assert_eq!(adn.decode_artifact(&z, &a).unwrap().dims(), x.dims());
        assert_eq!(adn.infer_correction(&x).unwrap().dims(), x.dims());
    }

    #[test]
    fn decode_artifact_rejects_scale_mismatch() {
        let adn = Adn::<f32>::new(small(), 1).unwrap();
        let z = adn.encode_content_clean(&image(16, 16, 3)).unwrap();
        let a = adn.encode_artifact(&image(32, 32, 4)).unwrap();
        assert!(matches!(adn.decode_artifact(&z, &a), Err(crate::Error::InvalidArgument(_))));
    }

    #[test]
    fn rejects_zero_width_config() {
        let cfg = NetworkConfig { base_channels: 0, ..NetworkConfig::default() };
        assert!(Adn::<f32>::new(cfg, 0).is_err());
        let cfg = NetworkConfig { n_downsamples: 3, ..NetworkConfig::default() };
        assert!(Adn::<f32>::new(cfg, 0).is_err());
    }
}
