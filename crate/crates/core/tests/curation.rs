use std::collections::HashSet;

use adn_core::curation::*;
use adn_core::image::{CtImage, Provenance};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N: usize = 64;

/// Soft tissue with `count` metal pixels filled row by row from (8, 8),
/// 40 pixels per row, so the region is one 4-connected blob.
fn with_blob(count: usize, metal: f32) -> CtImage {
    let mut px = vec![40.0f32; N * N];
    for k in 0..count {
        px[(8 + k / 40) * N + 8 + k % 40] = metal;
    }
    CtImage::new(px, N, N, 0.8, Provenance::Ingested).unwrap()
}

fn with_peak(hu: f32) -> CtImage {
    let mut px = vec![0.0f32; N * N];
    px[N * 30 + 30] = hu;
    CtImage::new(px, N, N, 0.8, Provenance::Ingested).unwrap()
}

#[test]
fn metal_component_size_threshold() {
    assert_eq!(classify_clinical(&with_blob(401, 3000.0)), ClinicalClass::ArtifactAffected);
    // 400 metal pixels are not enough, and 3000 HU rules out the clean group
    assert_eq!(classify_clinical(&with_blob(400, 3000.0)), ClinicalClass::Discard);
}

#[test]
fn metal_means_strictly_above_2500() {
    assert_eq!(classify_clinical(&with_blob(1000, 2500.0)), ClinicalClass::Discard);
    assert_eq!(classify_clinical(&with_blob(1000, 2500.5)), ClinicalClass::ArtifactAffected);
}

#[test]
fn clean_means_strictly_below_2000() {
    assert_eq!(classify_clinical(&with_peak(1999.0)), ClinicalClass::ArtifactFree);
    assert_eq!(classify_clinical(&with_peak(2000.0)), ClinicalClass::Discard);
    assert_eq!(classify_clinical(&with_peak(2600.0)), ClinicalClass::Discard);
}

#[test]
fn separate_regions_are_not_added_up() {
    let mut px = vec![0.0f32; N * N];
    // two 300-pixel bars, far apart
    for k in 0..300 {
        px[(2 + k / 30) * N + 2 + k % 30] = 3000.0;
        px[(40 + k / 30) * N + 2 + k % 30] = 3000.0;
    }
    let img = CtImage::new(px, N, N, 0.8, Provenance::Ingested).unwrap();
    assert_eq!(classify_clinical(&img), ClinicalClass::Discard);
}

#[test]
fn diagonal_neighbours_are_separate_regions() {
    // a checkerboard has no two metal pixels sharing an edge
    let px: Vec<f32> = (0..N * N).map(|i| if (i / N + i % N) % 2 == 0 { 3000.0 } else { 0.0 }).collect();
    let img = CtImage::new(px, N, N, 0.8, Provenance::Ingested).unwrap();
    assert_eq!(classify_clinical(&img), ClinicalClass::Discard);
    let m: Vec<bool> = img.pixels().iter().map(|&v| v > METAL_HU).collect();
    assert_eq!(largest_connected_component(&m, N, N), 1);
}

fn pairs(n: usize) -> Vec<Pair<(usize, char)>> {
    (0..n).map(|i| Pair { id: i, artifact: (i, 'a'), clean: (i, 'c') }).collect()
}

#[test]
fn split_never_leaks_a_pair() {
    for n in 2..60 {
        for seed in 0..8 {
            let ds = split_unsupervised(pairs(n), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let a: HashSet<usize> = ds.artifact_group.iter().map(|m| m.pair_id).collect();
            let c: HashSet<usize> = ds.clean_group.iter().map(|m| m.pair_id).collect();
            assert!(a.is_disjoint(&c), "n {n} seed {seed}");
            assert_eq!(a.len() + c.len(), n);
            assert_eq!(a.len(), n / 2);
            assert!(ds.artifact_group.iter().all(|m| m.image == (m.pair_id, 'a')));
            assert!(ds.clean_group.iter().all(|m| m.image == (m.pair_id, 'c')));
        }
    }
}

#[test]
fn split_depends_on_the_seed() {
    let a = split_unsupervised(pairs(40), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let b = split_unsupervised(pairs(40), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let c = split_unsupervised(pairs(40), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn sampling_draws_from_both_groups_independently() {
    let ds = split_unsupervised(pairs(10), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut seen = HashSet::new();
    for _ in 0..500 {
        let b = sample_unpaired(&ds, &mut rng).unwrap();
        assert_eq!(b.x_a.1, 'a');
        assert_eq!(b.y.1, 'c');
        assert_eq!(ds.artifact_group[b.x_a_index].image, b.x_a);
        seen.insert((b.x_a_index, b.y_index));
    }
    assert_eq!(seen.len(), 25);
}

proptest! {
    #[test]
    fn split_partitions_ids(n in 2usize..200, seed in any::<u64>()) {
        let ds = split_unsupervised(pairs(n), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let mut ids: Vec<usize> = ds.artifact_group.iter().chain(&ds.clean_group).map(|m| m.pair_id).collect();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn component_size_is_bounded_by_metal_count(bits in prop::collection::vec(any::<bool>(), 16 * 16)) {
        let big = largest_connected_component(&bits, 16, 16);
        prop_assert!(big <= bits.iter().filter(|&&b| b).count());
        prop_assert_eq!(big == 0, !bits.contains(&true));
    }
}
