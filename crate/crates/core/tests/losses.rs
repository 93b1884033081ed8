use adn_core::losses::*;
use proptest::prelude::*;

const TOL: f64 = 1e-6;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

#[test]
fn zero_scores() {
    let z = [0.0f32; 9];
    let ln2 = std::f64::consts::LN_2;
    for f in [adv_loss_clean::<f32>, adv_loss_artifact::<f32>] {
        assert!(close(f(&z, &z, Role::Discriminator, GanMode::NonSaturating).unwrap(), 2.0 * ln2));
        assert!(close(f(&z, &z, Role::Generator, GanMode::NonSaturating).unwrap(), ln2));
    }
}

#[test]
fn one_real_one_fake_by_hand() {
    // softplus(-1) twice, written out
    let expect = 2.0 * (1.0 + (-1.0f64).exp()).ln();
    assert!((expect - 0.6265).abs() < 5e-5);
    for f in [adv_loss_clean::<f64>, adv_loss_artifact::<f64>] {
        assert!(close(f(&[1.0], &[-1.0], Role::Discriminator, GanMode::NonSaturating).unwrap(), expect));
    }
}

#[test]
fn perfect_discriminator_limit() {
    let v = adv_loss(&[60.0f64], &[-60.0], Role::Discriminator, GanMode::NonSaturating).unwrap();
    assert!(v < 1e-20);
}

#[test]
fn non_finite_scores_are_numeric_errors() {
    let r = adv_loss_clean(&[0.0f32], &[f32::INFINITY], Role::Generator, GanMode::NonSaturating);
    assert!(matches!(r, Err(adn_core::Error::Numeric(_))));
}

#[test]
fn l1_hand_cases() {
    let zero = [0.0f32; 4];
    assert!(close(recon_loss(&[0.5f32; 4], &zero, &[0.25f32; 4], &zero), 0.75));
    assert!(close(recon_loss(&zero, &zero, &zero, &zero), 0.0));
    assert!(close(cycle_loss(&[0.1f64; 4], &[0.0; 4]), 0.1));
    assert!(close(cycle_loss(&[0.2f64, -0.2, 0.0, 0.4], &[0.0; 4]), 0.2));
    assert!(close(cycle_loss(&zero, &zero), 0.0));
}

#[test]
fn artifact_consistency_hand_cases() {
    let x_a = [0.3f64; 4];
    let x_hat = [0.0f64; 4];
    let y = [0.0f64; 4];
    assert!(close(artifact_consistency_loss(&x_a, &x_hat, &[0.1; 4], &y), 0.2));
    assert!(close(artifact_consistency_loss(&x_a, &x_hat, &x_a, &y), 0.0));
    assert!(close(artifact_consistency_loss(&x_a, &x_a, &y, &y), 0.0));
}

#[test]
fn weighted_total() {
    let ones = LossReport { adv_clean: 1.0, adv_artifact: 1.0, recon: 1.0, cycle: 1.0, art: 1.0, ..LossReport::default() };
    let w = LossWeights::default();
    assert_eq!((w.adv_clean, w.adv_artifact, w.recon, w.cycle, w.art), (1.0, 1.0, 20.0, 20.0, 20.0));
    assert!(close(total_loss(&ones, &w), 62.0));
    assert_eq!(total_loss(&LossReport::default(), &w), 0.0);
    assert_eq!(total_loss(&ones, &LossWeights::zero()), 0.0);
}

#[test]
fn generator_and_discriminator_pull_fake_scores_apart() {
    let real = [0.4f64, -0.3];
    let fake = [0.2f64, -1.1, 0.7];
    let (_, g) = adv_loss_grad(&real, &fake, Role::Generator, GanMode::NonSaturating);
    let (gr, d) = adv_loss_grad(&real, &fake, Role::Discriminator, GanMode::NonSaturating);
    // the generator wants fake scores up, the discriminator wants them down
    assert!(g.iter().all(|&v| v < 0.0));
    assert!(d.iter().all(|&v| v > 0.0));
    assert!(gr.iter().all(|&v| v < 0.0));
}

fn vecs(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-2.0f64..2.0, n), prop::collection::vec(-2.0f64..2.0, n))
}

proptest! {
    #[test]
    fn l1_is_non_negative_symmetric_and_zero_on_equal((a, b) in vecs(16)) {
        let v = l1_mean(&a, &b);
        prop_assert!(v >= 0.0);
        prop_assert!((v - l1_mean(&b, &a)).abs() < 1e-12);
        prop_assert_eq!(l1_mean(&a, &a), 0.0);
        prop_assert!((recon_loss(&a, &b, &b, &a) - 2.0 * v).abs() < 1e-12);
    }

    #[test]
    fn l1_is_lipschitz((a, b) in vecs(16), (p, _) in vecs(16)) {
        let moved: Vec<f64> = a.iter().zip(&p).map(|(x, d)| x + d).collect();
        let shift = l1_mean(&moved, &a);
        prop_assert!((l1_mean(&moved, &b) - l1_mean(&a, &b)).abs() <= shift + 1e-12);
    }

    #[test]
    fn total_is_linear_in_weights(t in prop::array::uniform5(0.0f64..5.0), w in prop::array::uniform5(0.0f64..30.0), s in 0.0f64..4.0) {
        let r = LossReport { adv_clean: t[0], adv_artifact: t[1], recon: t[2], cycle: t[3], art: t[4], ..LossReport::default() };
        let w = LossWeights { adv_clean: w[0], adv_artifact: w[1], recon: w[2], cycle: w[3], art: w[4] };
        let base = total_loss(&r, &w);
        prop_assert!((total_loss(&r, &w.scaled(s)) - s * base).abs() <= 1e-9 * (1.0 + base));
        prop_assert!(base >= 0.0);
    }

    #[test]
    fn adversarial_losses_are_non_negative((r, f) in vecs(6)) {
        for mode in [GanMode::NonSaturating, GanMode::LeastSquares] {
            for role in [Role::Generator, Role::Discriminator] {
                prop_assert!(adv_loss(&r, &f, role, mode).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn softplus_matches_naive_form(x in -30.0f64..30.0) {
        prop_assert!((softplus(x) - (1.0 + x.exp()).ln()).abs() < 1e-12);
    }
}
