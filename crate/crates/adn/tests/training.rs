use std::fs;
use std::path::Path;

use adn::checkpoint::{self, Checkpoint};
use adn::config::TrainSettings;
use adn::train::{group_pairs, read_log, train, TrainPaths};
use adn::Error;
use adn_core::curation::{GroupedDataset, Pair};
use adn_core::image::{normalize_hu, CtImage, HuWindow, NormalizedImage, Provenance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset(n: usize, size: usize) -> GroupedDataset<NormalizedImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let pairs = (0..n)
        .map(|id| {
            let clean: Vec<f32> = (0..size * size).map(|_| rng.random_range(-200.0..300.0)).collect();
            let artifact: Vec<f32> = clean.iter().map(|v| v + rng.random_range(-150.0..150.0)).collect();
            let img = |px| CtImage::new(px, size, size, 1.0, Provenance::Synthetic).unwrap();
            Pair { id, artifact: normalize_hu(&img(artifact), HuWindow::default()), clean: normalize_hu(&img(clean), HuWindow::default()) }
        })
        .collect();
    group_pairs(pairs, 0).unwrap()
}

fn settings(iterations: u64) -> TrainSettings {
    TrainSettings {
        iterations,
        image_size: 16,
        base_channels: 4,
        n_res_blocks: 1,
        disc_layers: 2,
        checkpoint_every: 0,
        seed: 5,
        ..TrainSettings::default()
    }
}

fn run(dir: &Path, s: &TrainSettings, ds: &GroupedDataset<NormalizedImage>, resume: Option<Checkpoint>) -> Checkpoint {
    train(s, ds, &TrainPaths::in_dir(dir), resume, |_| {}).unwrap()
}

fn bytes(dir: &Path) -> Vec<u8> {
    fs::read(TrainPaths::in_dir(dir).checkpoint).unwrap()
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let ds = dataset(8, 16);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(a.path(), &settings(6), &ds, None);
    run(b.path(), &settings(6), &ds, None);
    assert_eq!(bytes(a.path()), bytes(b.path()));

    let c = tempfile::tempdir().unwrap();
    run(c.path(), &TrainSettings { seed: 6, ..settings(6) }, &ds, None);
    assert_ne!(bytes(a.path()), bytes(c.path()));
}

#[test]
fn resuming_matches_an_uninterrupted_run() {
    let ds = dataset(8, 16);
    let whole = tempfile::tempdir().unwrap();
    run(whole.path(), &settings(10), &ds, None);

    let split = tempfile::tempdir().unwrap();
    let half = run(split.path(), &settings(5), &ds, None);
    assert_eq!(half.state.step, 5);
    let loaded = checkpoint::load(&TrainPaths::in_dir(split.path()).checkpoint).unwrap();
    assert_eq!(loaded, half);
    run(split.path(), &settings(10), &ds, Some(loaded));

    assert_eq!(bytes(whole.path()), bytes(split.path()));
    let (la, lb) = (read_log(&TrainPaths::in_dir(whole.path()).log).unwrap(), read_log(&TrainPaths::in_dir(split.path()).log).unwrap());
    assert_eq!(la.len(), 10);
    assert_eq!(lb.len(), 10);
    for (a, b) in la.iter().zip(&lb) {
        assert_eq!((a.step, a.total, a.d_I, a.d_Ia), (b.step, b.total, b.d_I, b.d_Ia));
    }
}

#[test]
fn log_holds_one_record_per_step() {
    let ds = dataset(6, 16);
    let dir = tempfile::tempdir().unwrap();
    let mut seen = Vec::new();
    train(&settings(7), &ds, &TrainPaths::in_dir(dir.path()), None, |r| seen.push(r.step)).unwrap();
    let log = read_log(&TrainPaths::in_dir(dir.path()).log).unwrap();
    assert_eq!(log.iter().map(|r| r.step).collect::<Vec<_>>(), (1..=7).collect::<Vec<_>>());
    assert_eq!(seen, (1..=7).collect::<Vec<_>>());
    assert!(log.iter().all(|r| r.total.is_finite() && r.d_I.is_finite()));
}

#[test]
fn resume_drops_log_lines_past_the_checkpoint() {
    let ds = dataset(6, 16);
    let dir = tempfile::tempdir().unwrap();
    let paths = TrainPaths::in_dir(dir.path());
    let ck = run(dir.path(), &settings(3), &ds, None);
    // a crashed later run left extra lines behind
    run(dir.path(), &settings(6), &ds, Some(ck.clone()));
    run(dir.path(), &settings(4), &ds, Some(ck));
    assert_eq!(read_log(&paths.log).unwrap().len(), 4);
}

#[test]
fn resume_rejects_a_different_model() {
    let ds = dataset(6, 16);
    let dir = tempfile::tempdir().unwrap();
    let ck = run(dir.path(), &settings(2), &ds, None);
    let other = TrainSettings { base_channels: 8, ..settings(4) };
    assert!(matches!(train(&other, &ds, &TrainPaths::in_dir(dir.path()), Some(ck), |_| {}), Err(Error::Config(_))));
}

#[test]
fn divergence_is_reported_and_keeps_the_last_checkpoint() {
    let ds = dataset(6, 16);
    let dir = tempfile::tempdir().unwrap();
    let paths = TrainPaths::in_dir(dir.path());
    let s = TrainSettings { learning_rate: 1e6, checkpoint_every: 1, ..settings(50) };
    let err = train(&s, &ds, &paths, None, |_| {}).unwrap_err();
    let Error::Numeric { step, .. } = err else { panic!("expected a numeric error, got {err:?}") };
    assert_eq!(err.exit_code(), 4);
    assert!(step > 1);
    let kept = checkpoint::load(&paths.checkpoint).unwrap();
    assert_eq!(kept.state.step, step - 1);
    assert!(kept.state.adn.param_sets().iter().all(|s| s.tensors().iter().all(|t| t.data().iter().all(|v| v.is_finite()))));
}

#[test]
fn checkpoint_bytes_roundtrip() {
    let ds = dataset(6, 16);
    let dir = tempfile::tempdir().unwrap();
    let ck = run(dir.path(), &settings(2), &ds, None);
    let enc = checkpoint::encode(&ck).unwrap();
    assert_eq!(checkpoint::decode(&enc, Path::new("mem")).unwrap(), ck);
    assert!(matches!(checkpoint::decode(&enc[..enc.len() - 1], Path::new("mem")), Err(Error::Corruption { .. })));
    assert!(matches!(checkpoint::decode(b"{}\n", Path::new("mem")), Err(Error::Format { .. })));
}
