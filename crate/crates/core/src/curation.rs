//! Grouping rules for clinical slices and the unpaired split used for training.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid_arg, Error, Result};
use crate::image::CtImage;

/// Pixels above this HU count as metal.
pub const METAL_HU: f32 = 2500.0;
/// A slice is artifact-affected when its largest metal region exceeds this many pixels.
pub const MIN_METAL_PIXELS: usize = 400;
/// A slice is artifact-free when every pixel is below this HU.
pub const CLEAN_HU: f32 = 2000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClinicalClass {
    ArtifactAffected,
    ArtifactFree,
    Discard,
}

/// Size of the largest 4-connected `true` region; 0 for an empty mask.
pub fn largest_connected_component(mask: &[bool], height: usize, width: usize) -> usize {
    assert_eq!(mask.len(), height * width, "mask does not match {height}x{width}");
    let mut seen = vec![false; mask.len()];
    let mut stack = Vec::new();
    let mut best = 0;
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            let (r, c) = (i / width, i % width);
            let mut visit = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if r > 0 {
                visit(i - width);
            }
            if r + 1 < height {
                visit(i + width);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < width {
                visit(i + 1);
            }
        }
        best = best.max(size);
    }
    best
}

/// Metal is HU > 2500. Large metal wins over the clean rule; slices that
/// satisfy neither rule are discarded.
pub fn classify_clinical(image: &CtImage) -> ClinicalClass {
    let metal: Vec<bool> = image.pixels().iter().map(|&v| v > METAL_HU).collect();
    if largest_connected_component(&metal, image.height(), image.width()) > MIN_METAL_PIXELS {
        ClinicalClass::ArtifactAffected
    } else if image.max_hu() < CLEAN_HU {
        ClinicalClass::ArtifactFree
    } else {
        ClinicalClass::Discard
    }
}

/// A synthesized (artifact, clean) pair with a stable id.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair<T> {
    pub id: usize,
    pub artifact: T,
    pub clean: T,
}

/// An image tagged with the id of the pair it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Member<T> {
    pub pair_id: usize,
    pub image: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset<T> {
    pub artifact_group: Vec<Member<T>>,
    pub clean_group: Vec<Member<T>>,
    pub withheld_test: Vec<Pair<T>>,
}

impl<T> GroupedDataset<T> {
    pub fn new(artifact_group: Vec<Member<T>>, clean_group: Vec<Member<T>>) -> Self {
        Self { artifact_group, clean_group, withheld_test: Vec::new() }
    }

    pub fn with_test(mut self, test: Vec<Pair<T>>) -> Self {
        self.withheld_test = test;
        self
    }
}

/// Shuffles the pairs and keeps only artifact images from the first half and
/// only clean images from the second, so no pair contributes to both groups.
pub fn split_unsupervised<T, R: Rng + ?Sized>(mut pairs: Vec<Pair<T>>, rng: &mut R) -> Result<GroupedDataset<T>> {
    if pairs.len() < 2 {
        return Err(invalid_arg!("need at least 2 pairs to split, got {}", pairs.len()));
    }
    pairs.shuffle(rng);
    let half = pairs.len() / 2;
    let second = pairs.split_off(half);
    let artifact_group = pairs.into_iter().map(|p| Member { pair_id: p.id, image: p.artifact }).collect();
    let clean_group = second.into_iter().map(|p| Member { pair_id: p.id, image: p.clean }).collect();
    Ok(GroupedDataset::new(artifact_group, clean_group))
}

/// One artifact-affected and one artifact-free image, drawn independently.
#[derive(Debug, Clone, PartialEq)]
pub struct UnpairedBatch<T> {
    pub x_a: T,
    pub y: T,
    pub x_a_index: usize,
    pub y_index: usize,
}

/// Uniform independent draws from each group.
pub fn sample_unpaired<T: Clone, R: Rng + ?Sized>(ds: &GroupedDataset<T>, rng: &mut R) -> Result<UnpairedBatch<T>> {
    if ds.artifact_group.is_empty() || ds.clean_group.is_empty() {
        return Err(Error::InvalidState("cannot sample from an empty group".into()));
    }
    let x_a_index = rng.random_range(0..ds.artifact_group.len());
    let y_index = rng.random_range(0..ds.clean_group.len());
    Ok(UnpairedBatch {
        x_a: ds.artifact_group[x_a_index].image.clone(),
        y: ds.clean_group[y_index].image.clone(),
        x_a_index,
        y_index,
    })
}
