//! One unsupervised training iteration: the full forward graph, a
//! discriminator update on detached fakes, then an encoder/generator update
//! against the refreshed discriminators.

use alloc::vec::Vec;

use crate::error::{invalid_arg, Error, Result};
use crate::losses::{self, GanMode, LossReport, LossWeights, Role};
use crate::networks::{
    Adn, AdnGrads, ArtifactCode, ArtifactEncoderCache, ArtifactGeneratorCache, CleanGeneratorCache, ContentCode,
    ContentEncoderCache, ModelState, NetworkConfig,
};
use crate::nn::ParamSet;
use crate::tensor::{Scalar, Tensor};

/// Index of the first discriminator in [`crate::networks::NETWORK_NAMES`] order.
pub const FIRST_DISCRIMINATOR: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weights: LossWeights,
    /// Total number of iterations, counted across resumes.
    pub iterations: u64,
    pub batch_size: usize,
    pub seed: u64,
    /// Save a checkpoint every this many steps; 0 saves only at the end.
    pub checkpoint_every: u64,
    pub image_size: usize,
    pub gan_mode: GanMode,
    pub network: NetworkConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            weights: LossWeights::default(),
            iterations: 2000,
            batch_size: 1,
            seed: 0,
            checkpoint_every: 0,
            image_size: 64,
            gan_mode: GanMode::default(),
            network: NetworkConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(invalid_arg!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.iterations == 0 {
            return Err(invalid_arg!("iterations must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid_arg!("batch_size must be at least 1"));
        }
        self.weights.validate()?;
        self.network.validate()?;
        self.network.check_input(self.image_size, self.image_size)
    }
}

/// How many times each encoder and generator ran while building a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CallCounts {
    pub enc_clean: usize,
    pub enc_artifact_content: usize,
    pub enc_artifact: usize,
    pub gen_clean: usize,
    pub gen_artifact: usize,
}

/// Images and codes produced from one unpaired batch.
#[derive(Debug, Clone)]
pub struct ForwardOutputs<T> {
    /// `G_I(E_Ia(x_a))`: the artifact-corrected input.
    pub x_hat: Tensor<T>,
    /// `G_Ia(E_Ia(x_a), E_a(x_a))`: self-reconstruction of `x_a`.
    pub x_hat_a: Tensor<T>,
    /// `G_I(E_I(y))`: self-reconstruction of `y`.
    pub y_hat: Tensor<T>,
    /// `G_Ia(E_I(y), E_a(x_a))`: `y` with the artifact of `x_a`.
    pub y_hat_a: Tensor<T>,
    /// `G_I(E_Ia(ŷ_a))`: `ŷ_a` corrected again.
    pub y_cycled: Tensor<T>,
    pub z_x: ContentCode<T>,
    pub z_y: ContentCode<T>,
    pub z_a: ArtifactCode<T>,
}

/// A forward pass together with what backpropagation needs.
#[derive(Debug, Clone)]
pub struct ForwardGraph<T> {
    pub outputs: ForwardOutputs<T>,
    pub counts: CallCounts,
    x_a: Tensor<T>,
    y: Tensor<T>,
    enc_x: ContentEncoderCache<T>,
    enc_y: ContentEncoderCache<T>,
    enc_a: ArtifactEncoderCache<T>,
    gen_x_hat: CleanGeneratorCache<T>,
    gen_x_hat_a: ArtifactGeneratorCache<T>,
    gen_y_hat: CleanGeneratorCache<T>,
    gen_y_hat_a: ArtifactGeneratorCache<T>,
    enc_cycle: ContentEncoderCache<T>,
    gen_cycle: CleanGeneratorCache<T>,
}

/// Runs every encoder and generator on an unpaired batch.
pub fn forward_graph<T: Scalar>(adn: &Adn<T>, x_a: &Tensor<T>, y: &Tensor<T>) -> Result<ForwardGraph<T>> {
    if x_a.dims() != y.dims() {
        return Err(invalid_arg!("batch halves differ in shape: {:?} vs {:?}", x_a.dims(), y.dims()));
    }
    if x_a.channels() != 1 {
        return Err(invalid_arg!("expected single-channel images, got {} channels", x_a.channels()));
    }
    adn.config.check_input(x_a.height(), x_a.width())?;
    let mut counts = CallCounts::default();

    let (z_x, enc_x) = adn.enc_artifact_content.forward(x_a);
    let (z_y, enc_y) = adn.enc_clean.forward(y);
    let (z_a, enc_a) = adn.enc_artifact.forward(x_a);
    counts.enc_artifact_content += 1;
    counts.enc_clean += 1;
    counts.enc_artifact += 1;

    let (x_hat, gen_x_hat) = adn.gen_clean.forward(&z_x);
    let (x_hat_a, gen_x_hat_a) = adn.gen_artifact.forward(&z_x, &z_a);
    let (y_hat, gen_y_hat) = adn.gen_clean.forward(&z_y);
    let (y_hat_a, gen_y_hat_a) = adn.gen_artifact.forward(&z_y, &z_a);
    counts.gen_clean += 2;
    counts.gen_artifact += 2;

    let (z_c, enc_cycle) = adn.enc_artifact_content.forward(&y_hat_a);
    let (y_cycled, gen_cycle) = adn.gen_clean.forward(&z_c);
    counts.enc_artifact_content += 1;
    counts.gen_clean += 1;

    Ok(ForwardGraph {
        outputs: ForwardOutputs { x_hat, x_hat_a, y_hat, y_hat_a, y_cycled, z_x, z_y, z_a },
        counts,
        x_a: x_a.clone(),
        y: y.clone(),
        enc_x,
        enc_y,
        enc_a,
        gen_x_hat,
        gen_x_hat_a,
        gen_y_hat,
        gen_y_hat_a,
        enc_cycle,
        gen_cycle,
    })
}

fn scaled<T: Scalar>(g: Vec<T>, dims: [usize; 4], s: f64) -> Tensor<T> {
    let mut t = Tensor::from_vec(dims, g);
    t.scale(T::from_f64(s));
    t
}

fn numeric_check(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(alloc::format!("{what} loss is not finite ({v})")))
    }
}

/// Discriminator losses on real inputs and the detached fakes of `graph`,
/// with gradients accumulated into the two discriminator entries of `grads`.
///
/// Each loss is weighted by the matching adversarial weight.
pub fn discriminator_loss_and_grads<T: Scalar>(
    adn: &Adn<T>,
    graph: &ForwardGraph<T>,
    weights: &LossWeights,
    mode: GanMode,
    grads: &mut AdnGrads<T>,
) -> Result<(f64, f64)> {
    let out = &graph.outputs;
    let [g_clean, g_artifact] = &mut grads.sets[FIRST_DISCRIMINATOR..] else { unreachable!() };
    let one = |d: &crate::networks::Discriminator<T>, real: &Tensor<T>, fake: &Tensor<T>, w: f64, g: &mut ParamSet<T>, what| {
        let (sr, cr) = d.forward(real);
        let (sf, cf) = d.forward(fake);
        let loss = numeric_check(what, losses::adv_loss(sr.data(), sf.data(), Role::Discriminator, mode)?)?;
        let (gr, gf) = losses::adv_loss_grad(sr.data(), sf.data(), Role::Discriminator, mode);
        d.backward(g, &cr, &scaled(gr, sr.dims(), w), false);
        d.backward(g, &cf, &scaled(gf, sf.dims(), w), false);
        Ok::<f64, Error>(loss)
    };
    let d_clean = one(&adn.disc_clean, &graph.y, &out.x_hat, weights.adv_clean, g_clean, "D_I")?;
    let d_artifact = one(&adn.disc_artifact, &graph.x_a, &out.y_hat_a, weights.adv_artifact, g_artifact, "D_Ia")?;
    Ok((d_clean, d_artifact))
}

fn add_code<T: Scalar>(a: &mut ArtifactCode<T>, b: &ArtifactCode<T>) {
    for (x, y) in a.levels.iter_mut().zip(&b.levels) {
        x.add_assign(y);
    }
}

type Scored<T> = (Tensor<T>, crate::networks::DiscriminatorCache<T>);

/// Generator-side loss terms and the discriminator passes they were scored with.
fn generator_report<T: Scalar>(
    adn: &Adn<T>,
    graph: &ForwardGraph<T>,
    weights: &LossWeights,
    mode: GanMode,
) -> Result<(LossReport, Scored<T>, Scored<T>)> {
    let out = &graph.outputs;
    let (x_a, y) = (&graph.x_a, &graph.y);
    let (s_clean, c_clean) = adn.disc_clean.forward(&out.x_hat);
    let (s_art, c_art) = adn.disc_artifact.forward(&out.y_hat_a);
    let mut report = LossReport {
        adv_clean: numeric_check("generator D_I", losses::adv_loss(&[], s_clean.data(), Role::Generator, mode)?)?,
        adv_artifact: numeric_check("generator D_Ia", losses::adv_loss(&[], s_art.data(), Role::Generator, mode)?)?,
        recon: losses::recon_loss(out.x_hat_a.data(), x_a.data(), out.y_hat.data(), y.data()),
        cycle: losses::cycle_loss(out.y_cycled.data(), y.data()),
        art: losses::artifact_consistency_loss(x_a.data(), out.x_hat.data(), out.y_hat_a.data(), y.data()),
        ..LossReport::default()
    };
    report.total = numeric_check("generator", losses::total_loss(&report, weights))?;
    Ok((report, (s_clean, c_clean), (s_art, c_art)))
}

/// Generator-side loss terms on `graph`, scored by the current
/// discriminators, with gradients accumulated into the five
/// encoder/generator entries of `grads`. Discriminator parameters receive
/// nothing.
pub fn generator_loss_and_grads<T: Scalar>(
    adn: &Adn<T>,
    graph: &ForwardGraph<T>,
    weights: &LossWeights,
    mode: GanMode,
    grads: &mut AdnGrads<T>,
) -> Result<LossReport> {
    let out = &graph.outputs;
    let (x_a, y) = (&graph.x_a, &graph.y);
    let mut scratch = [adn.disc_clean.params.zeros_like(), adn.disc_artifact.params.zeros_like()];
    let (report, (s_clean, c_clean), (s_art, c_art)) = generator_report(adn, graph, weights, mode)?;

    let (_, g) = losses::adv_loss_grad(&[], s_clean.data(), Role::Generator, mode);
    let mut g_x_hat = adn.disc_clean.backward(&mut scratch[0], &c_clean, &scaled(g, s_clean.dims(), weights.adv_clean), true).expect("input gradient requested");
    let (_, g) = losses::adv_loss_grad(&[], s_art.data(), Role::Generator, mode);
    let mut g_y_hat_a = adn.disc_artifact.backward(&mut scratch[1], &c_art, &scaled(g, s_art.dims(), weights.adv_artifact), true).expect("input gradient requested");

    // The residual enters with a minus sign for both x̂ and ŷ_a.
    let residual = losses::artifact_residual(x_a, &out.x_hat, &out.y_hat_a, y);
    let g_art = losses::l1_mean_grad(&residual.zeros_like(), &residual, weights.art);
    g_x_hat.add_assign(&g_art);
    g_y_hat_a.add_assign(&g_art);
    let g_x_hat_a = losses::l1_mean_grad(&out.x_hat_a, x_a, weights.recon);
    let g_y_hat = losses::l1_mean_grad(&out.y_hat, y, weights.recon);
    let g_cycled = losses::l1_mean_grad(&out.y_cycled, y, weights.cycle);

    let [g_enc_clean, g_enc_content, g_enc_art, g_gen_clean, g_gen_art, ..] = &mut grads.sets;

    let g_zc = adn.gen_clean.backward(g_gen_clean, &graph.gen_cycle, &g_cycled);
    let g_through = adn.enc_artifact_content.backward(g_enc_content, &graph.enc_cycle, &g_zc, true).expect("input gradient requested");
    g_y_hat_a.add_assign(&g_through);

    let (mut g_zy, mut g_za) = adn.gen_artifact.backward(g_gen_art, &graph.gen_y_hat_a, &g_y_hat_a);
    g_zy.add_assign(&adn.gen_clean.backward(g_gen_clean, &graph.gen_y_hat, &g_y_hat));
    let (mut g_zx, g_za2) = adn.gen_artifact.backward(g_gen_art, &graph.gen_x_hat_a, &g_x_hat_a);
    add_code(&mut g_za, &g_za2);
    g_zx.add_assign(&adn.gen_clean.backward(g_gen_clean, &graph.gen_x_hat, &g_x_hat));

    adn.enc_clean.backward(g_enc_clean, &graph.enc_y, &g_zy, false);
    adn.enc_artifact_content.backward(g_enc_content, &graph.enc_x, &g_zx, false);
    adn.enc_artifact.backward(g_enc_art, &graph.enc_a, &g_za, false);
    Ok(report)
}

/// Updates `D_I` and `D_Ia` only. Returns their losses before the update.
pub fn discriminator_step<T: Scalar>(state: &mut ModelState<T>, graph: &ForwardGraph<T>, config: &TrainConfig) -> Result<(f64, f64)> {
    let mut grads = state.adn.zero_grads();
    let losses = discriminator_loss_and_grads(&state.adn, graph, &config.weights, config.gan_mode, &mut grads)?;
    let [.., p_clean, p_art] = state.adn.param_sets_mut();
    let [.., g_clean, g_art] = &grads.sets;
    state.opt_disc.step(&mut [p_clean, p_art], &[g_clean, g_art]);
    Ok(losses)
}

/// Updates the three encoders and two generators only.
pub fn generator_step<T: Scalar>(state: &mut ModelState<T>, graph: &ForwardGraph<T>, config: &TrainConfig) -> Result<LossReport> {
    let mut grads = state.adn.zero_grads();
    let report = generator_loss_and_grads(&state.adn, graph, &config.weights, config.gan_mode, &mut grads)?;
    let [p0, p1, p2, p3, p4, ..] = state.adn.param_sets_mut();
    let [g0, g1, g2, g3, g4, ..] = &grads.sets;
    state.opt_gen.step(&mut [p0, p1, p2, p3, p4], &[g0, g1, g2, g3, g4]);
    Ok(report)
}

/// One full iteration on a batch: discriminators first, then the rest.
///
/// On a numeric error the state may be partly updated and should be
/// discarded in favour of the last checkpoint.
pub fn train_step<T: Scalar>(state: &mut ModelState<T>, x_a: &Tensor<T>, y: &Tensor<T>, config: &TrainConfig) -> Result<LossReport> {
    let graph = forward_graph(&state.adn, x_a, y)?;
    let (disc_clean, disc_artifact) = discriminator_step(state, &graph, config)?;
    let mut report = generator_step(state, &graph, config)?;
    report.disc_clean = disc_clean;
    report.disc_artifact = disc_artifact;
    state.step += 1;
    if !state.adn.all_finite() {
        return Err(Error::Numeric(alloc::format!("parameters became non-finite at step {}", state.step)));
    }
    Ok(report)
}

/// Weighted generator objective, without gradients.
pub fn generator_objective<T: Scalar>(adn: &Adn<T>, x_a: &Tensor<T>, y: &Tensor<T>, weights: &LossWeights, mode: GanMode) -> Result<f64> {
    let graph = forward_graph(adn, x_a, y)?;
    Ok(generator_report(adn, &graph, weights, mode)?.0.total)
}

/// Sum of both weighted discriminator losses, without gradients.
pub fn discriminator_objective<T: Scalar>(adn: &Adn<T>, x_a: &Tensor<T>, y: &Tensor<T>, weights: &LossWeights, mode: GanMode) -> Result<f64> {
    let graph = forward_graph(adn, x_a, y)?;
    let one = |d: &crate::networks::Discriminator<T>, real: &Tensor<T>, fake: &Tensor<T>, what| {
        numeric_check(what, losses::adv_loss(d.forward(real).0.data(), d.forward(fake).0.data(), Role::Discriminator, mode)?)
    };
    let a = one(&adn.disc_clean, &graph.y, &graph.outputs.x_hat, "D_I")?;
    let b = one(&adn.disc_artifact, &graph.x_a, &graph.outputs.y_hat_a, "D_Ia")?;
    Ok(weights.adv_clean * a + weights.adv_artifact * b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> TrainConfig {
        TrainConfig {
            network: NetworkConfig { base_channels: 4, n_res_blocks: 1, disc_layers: 2, ..NetworkConfig::default() },
            image_size: 16,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        }
    }

    fn batch(seed: u64) -> (Tensor<f32>, Tensor<f32>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = || Tensor::from_vec([1, 1, 16, 16], (0..256).map(|_| rng.random_range(-1.0..1.0)).collect());
        (t(), t())
    }

    #[test]
    fn graph_shapes_and_call_counts() {
        let cfg = tiny();
        let adn = Adn::<f32>::new(cfg.network, 0).unwrap();
        let (x, y) = batch(1);
        let g = forward_graph(&adn, &x, &y).unwrap();
        let o = &g.outputs;
        for t in [&o.x_hat, &o.x_hat_a, &o.y_hat, &o.y_hat_a, &o.y_cycled] {
            assert_eq!(t.dims(), x.dims());
        }
        assert_eq!(g.counts.enc_artifact_content, 2);
        assert_eq!(g.counts.gen_clean, 3);
        assert_eq!((g.counts.enc_clean, g.counts.enc_artifact, g.counts.gen_artifact), (1, 1, 2));
        assert!(forward_graph(&adn, &x, &Tensor::zeros([1, 1, 20, 20])).is_err());
    }

    #[test]
    fn half_steps_touch_only_their_networks() {
        let cfg = tiny();
        let mut state = ModelState::<f32>::new(cfg.network, 3, cfg.learning_rate).unwrap();
        let (x, y) = batch(2);
        let before = state.adn.clone();
        let graph = forward_graph(&state.adn, &x, &y).unwrap();
        discriminator_step(&mut state, &graph, &cfg).unwrap();
        let mid = state.adn.clone();
        for i in 0..7 {
            assert_eq!(before.param_sets()[i] == mid.param_sets()[i], i < FIRST_DISCRIMINATOR, "net {i}");
        }
        generator_step(&mut state, &graph, &cfg).unwrap();
        for i in 0..7 {
            assert_eq!(mid.param_sets()[i] == state.adn.param_sets()[i], i >= FIRST_DISCRIMINATOR, "net {i}");
        }
    }

    #[test]
    fn zero_weights_freeze_generators() {
        let cfg = TrainConfig { weights: LossWeights::zero(), ..tiny() };
        let mut state = ModelState::<f32>::new(cfg.network, 4, cfg.learning_rate).unwrap();
        let before = state.adn.clone();
        let (x, y) = batch(3);
        train_step(&mut state, &x, &y, &cfg).unwrap();
        for i in 0..FIRST_DISCRIMINATOR {
            assert_eq!(before.param_sets()[i], state.adn.param_sets()[i]);
        }
        assert_eq!(state.step, 1);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { iterations: 0, ..tiny() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..tiny() }.validate().is_err());
        assert!(TrainConfig { image_size: 18, ..tiny() }.validate().is_err());
        assert!(tiny().validate().is_ok());
    }
}
