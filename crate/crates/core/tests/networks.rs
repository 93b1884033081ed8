use adn_core::losses::{GanMode, LossWeights};
use adn_core::networks::{Adn, Domain, NetworkConfig, NETWORK_NAMES};
use adn_core::trainer::{
    discriminator_loss_and_grads, discriminator_objective, forward_graph, generator_loss_and_grads, generator_objective,
    FIRST_DISCRIMINATOR,
};
use adn_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(b: usize, r: usize, d: usize) -> NetworkConfig {
    NetworkConfig { base_channels: b, n_res_blocks: r, disc_layers: d, ..NetworkConfig::default() }
}

fn image<T: adn_core::Scalar>(h: usize, w: usize, seed: u64) -> Tensor<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_vec([1, 1, h, w], (0..h * w).map(|_| T::from_f64(rng.random_range(-0.9..0.9))).collect())
}

/// Parameter counts rebuilt layer by layer. Convolutions feeding instance
/// norm carry no bias; every other convolution does.
fn expected_counts(b: usize, r: usize, d: usize) -> [usize; 7] {
    let conv = |i: usize, o: usize, k: usize, bias: bool| i * o * k * k + if bias { o } else { 0 };
    let res = r * 2 * conv(4 * b, 4 * b, 3, false);
    let content = conv(1, b, 7, false) + conv(b, 2 * b, 4, false) + conv(2 * b, 4 * b, 4, false) + res;
    let artifact = conv(1, b, 7, true) + conv(b, 2 * b, 4, true) + conv(2 * b, 4 * b, 4, true);
    let clean_gen = res + conv(4 * b, 2 * b, 5, false) + conv(2 * b, b, 5, false) + conv(b, 1, 7, true);
    let merges = conv(8 * b, 4 * b, 1, true) + conv(4 * b, 2 * b, 1, true) + conv(2 * b, b, 1, true);
    let mut disc = 0;
    let mut c = 1;
    for i in 0..d {
        let o = b << i.min(3);
        disc += conv(c, o, 4, true);
        c = o;
    }
    disc += conv(c, 1, 3, true);
    [content, content, artifact, clean_gen, clean_gen + merges, disc, disc]
}

#[test]
fn parameter_counts_follow_the_layer_list() {
    for (b, r, d) in [(4, 1, 2), (8, 2, 3), (16, 4, 5), (64, 4, 3)] {
        let adn = Adn::<f32>::new(config(b, r, d), 0).unwrap();
        assert_eq!(adn.param_counts(), expected_counts(b, r, d), "b {b} r {r} d {d}");
    }
}

#[test]
fn shape_contracts() {
    let cfg = config(4, 1, 2);
    let adn = Adn::<f32>::new(cfg, 1).unwrap();
    for (h, w) in [(16, 16), (24, 32)] {
        let x = image::<f32>(h, w, 2);
        let z = adn.encode_content_artifact(&x).unwrap();
        assert_eq!(z.0.dims(), [1, 16, h / 4, w / 4]);
        assert_eq!(adn.encode_content_clean(&x).unwrap().0.dims(), z.0.dims());
        let a = adn.encode_artifact(&x).unwrap();
        let dims: Vec<_> = a.levels.iter().map(Tensor::dims).collect();
        assert_eq!(dims, vec![[1, 4, h, w], [1, 8, h / 2, w / 2], [1, 16, h / 4, w / 4]]);
        let out = adn.decode_artifact(&z, &a).unwrap();
        assert_eq!(out.dims(), x.dims());
        assert!(out.data().iter().all(|v| v.abs() <= 1.0));
        assert_eq!(adn.discriminate(&x, Domain::Clean).unwrap().dims(), [1, 1, h / 4, w / 4]);
    }
    assert!(adn.infer_correction(&image::<f32>(18, 16, 0)).is_err());
    assert!(adn.infer_correction(&Tensor::zeros([1, 2, 16, 16])).is_err());
    assert!(adn.transfer_artifact(&image::<f32>(16, 16, 0), &image::<f32>(20, 16, 0)).is_err());
}

#[test]
fn inference_is_the_composition_of_encoder_and_generator() {
    let adn = Adn::<f32>::new(config(4, 1, 2), 5).unwrap();
    let x = image::<f32>(16, 16, 6);
    let y = image::<f32>(16, 16, 7);
    let direct = adn.decode_clean(&adn.encode_content_artifact(&x).unwrap()).unwrap();
    assert_eq!(adn.infer_correction(&x).unwrap(), direct);
    assert_eq!(adn.infer_correction(&x).unwrap(), direct);
    let moved = adn.decode_artifact(&adn.encode_content_clean(&y).unwrap(), &adn.encode_artifact(&x).unwrap()).unwrap();
    assert_eq!(adn.transfer_artifact(&x, &y).unwrap(), moved);
    let g = forward_graph(&adn, &x, &y).unwrap();
    assert_eq!(g.outputs.x_hat, direct);
    assert_eq!(g.outputs.y_hat_a, moved);
}

#[test]
fn initialization_is_seeded() {
    let cfg = config(4, 1, 2);
    assert_eq!(Adn::<f32>::new(cfg, 3).unwrap(), Adn::<f32>::new(cfg, 3).unwrap());
    assert_ne!(Adn::<f32>::new(cfg, 3).unwrap(), Adn::<f32>::new(cfg, 4).unwrap());
}

#[test]
fn every_block_receives_gradient() {
    let adn = Adn::<f32>::new(config(4, 1, 2), 8).unwrap();
    let (x, y) = (image::<f32>(16, 16, 1), image::<f32>(16, 16, 2));
    let g = forward_graph(&adn, &x, &y).unwrap();
    let mut grads = adn.zero_grads();
    let w = LossWeights::default();
    generator_loss_and_grads(&adn, &g, &w, GanMode::NonSaturating, &mut grads).unwrap();
    discriminator_loss_and_grads(&adn, &g, &w, GanMode::NonSaturating, &mut grads).unwrap();
    for (net, set) in NETWORK_NAMES.iter().zip(&grads.sets) {
        for (name, t) in set.iter() {
            assert!(t.max_abs() > 0.0, "{net}.{name} has no gradient");
        }
    }
}

/// Sampled central-difference check in double precision; the acceptance
/// suite runs the exhaustive version.
#[test]
fn gradients_match_finite_differences_on_a_sample() {
    let adn = Adn::<f64>::new(config(4, 1, 3), 11).unwrap();
    let (x, y) = (image::<f64>(8, 8, 12), image::<f64>(8, 8, 13));
    let w = LossWeights::default();
    let mode = GanMode::NonSaturating;
    let g = forward_graph(&adn, &x, &y).unwrap();
    let mut grads = adn.zero_grads();
    generator_loss_and_grads(&adn, &g, &w, mode, &mut grads).unwrap();
    discriminator_loss_and_grads(&adn, &g, &w, mode, &mut grads).unwrap();

    let h = 1e-7;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for net in 0..7 {
        let objective = |m: &Adn<f64>| {
            if net < FIRST_DISCRIMINATOR {
                generator_objective(m, &x, &y, &w, mode).unwrap()
            } else {
                discriminator_objective(m, &x, &y, &w, mode).unwrap()
            }
        };
        for ti in 0..adn.param_sets()[net].len() {
            let len = adn.param_sets()[net].tensors()[ti].len();
            let (mut num, mut den) = (0.0f64, 0.0f64);
            for _ in 0..4 {
                let k = rng.random_range(0..len);
                let mut m = adn.clone();
                m.param_sets_mut()[net].tensors_mut()[ti].data_mut()[k] += h;
                let up = objective(&m);
                m.param_sets_mut()[net].tensors_mut()[ti].data_mut()[k] -= 2.0 * h;
                let down = objective(&m);
                let fd = (up - down) / (2.0 * h);
                let an = grads.sets[net].tensors()[ti].data()[k];
                num += (fd - an).powi(2);
                den += fd.powi(2).max(an.powi(2));
            }
            let rel = (num / den.max(1e-30)).sqrt();
            let name = &adn.param_sets()[net].names()[ti];
            assert!(den < 1e-24 || rel < 1e-4, "{}.{name}: relative error {rel}", NETWORK_NAMES[net]);
        }
    }
}
