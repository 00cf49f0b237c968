//! Rotation augmentation and group-aware, label-stratified partitioning.
//!
//! Partitioning works on groups, never on individual items, so rotated
//! copies of an image always land on the same side. Results depend only on
//! the input order and the seed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use super::image::rotate90;
use super::sample::{Class, Grouped, Rotation, Sample};
use crate::error::{Error, Result};
use crate::rng::{Prng, Stream};

/// Each original followed by its 90, 180 and 270 degree clockwise rotations.
pub fn augment_rotations(samples: &[Sample]) -> Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(samples.len() * 4);
    for s in samples {
        if s.rotation != Rotation::R0 {
            return Err(Error::DoubleAugmentation(s.group_id.clone()));
        }
        for rot in Rotation::ALL {
            out.push(Sample {
                image: rotate90(&s.image, rot.quarter_turns())?,
                rotation: rot,
                ..s.clone()
            });
        }
    }
    Ok(out)
}

/// Distinct group ids per class in order of first appearance.
fn groups_by_class<G: Grouped>(items: &[G]) -> BTreeMap<Class, Vec<&str>> {
    let mut seen = BTreeSet::new();
    let mut by_class: BTreeMap<Class, Vec<&str>> = BTreeMap::new();
    for it in items {
        if seen.insert(it.group_id()) {
            by_class.entry(it.label()).or_default().push(it.group_id());
        }
    }
    by_class
}

/// Splits `items` into `(train, val)` by group. Every class present gets
/// `round(val_fraction * groups)` validation groups, at least one and at most
/// all but one.
pub fn group_split<G: Grouped + Clone>(
    items: &[G],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<G>, Vec<G>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Stratification(format!(
            "validation fraction {val_fraction} not in (0, 1)"
        )));
    }
    let mut val_groups = BTreeSet::new();
    for (class, mut groups) in groups_by_class(items) {
        let n = groups.len();
        if n < 2 {
            return Err(Error::Stratification(format!(
                "class {class} has {n} group(s), need at least 2"
            )));
        }
        let n_val = (libm::round(val_fraction * n as f64) as usize).clamp(1, n - 1);
        Prng::substream(seed, Stream::Split, class.index() as u64).shuffle(&mut groups);
        val_groups.extend(groups.into_iter().take(n_val));
    }
    let (val, train): (Vec<&G>, Vec<&G>) = items
        .iter()
        .partition(|it| val_groups.contains(it.group_id()));
    Ok((
        train.into_iter().cloned().collect(),
        val.into_iter().cloned().collect(),
    ))
}

/// Holds out exactly `per_class` groups of every class, returning
/// `(rest, held_out)`. Classes need more than `per_class` groups.
pub fn group_holdout<G: Grouped + Clone>(
    items: &[G],
    per_class: usize,
    seed: u64,
) -> Result<(Vec<G>, Vec<G>)> {
    if per_class == 0 {
        return Err(Error::Stratification(
            "hold-out size must be at least 1".into(),
        ));
    }
    let mut held = BTreeSet::new();
    for (class, mut groups) in groups_by_class(items) {
        if groups.len() <= per_class {
            return Err(Error::Stratification(format!(
                "class {class} has {} group(s), cannot hold out {per_class}",
                groups.len()
            )));
        }
        Prng::substream(seed, Stream::Split, 16 + class.index() as u64).shuffle(&mut groups);
        held.extend(groups.into_iter().take(per_class));
    }
    let (out, rest): (Vec<&G>, Vec<&G>) = items.iter().partition(|it| held.contains(it.group_id()));
    Ok((
        rest.into_iter().cloned().collect(),
        out.into_iter().cloned().collect(),
    ))
}

/// Partitions `items` into `k` folds by group, stratified by label. Within
/// each class, fold sizes differ by at most one group.
pub fn kfold<G: Grouped + Clone>(items: &[G], k: usize, seed: u64) -> Result<Vec<Vec<G>>> {
    if k < 2 {
        return Err(Error::Fold(format!("need at least 2 folds, got {k}")));
    }
    let mut fold_of: BTreeMap<&str, usize> = BTreeMap::new();
    let mut offset = 0;
    for (class, mut groups) in groups_by_class(items) {
        if groups.len() < k {
            return Err(Error::Fold(format!(
                "class {class} has {} groups for {k} folds",
                groups.len()
            )));
        }
        Prng::substream(seed, Stream::Fold, class.index() as u64).shuffle(&mut groups);
        // continue the round-robin where the previous class stopped so overall
        // fold sizes stay balanced too
        for (j, g) in groups.iter().enumerate() {
            fold_of.insert(g, (offset + j) % k);
        }
        offset = (offset + groups.len()) % k;
    }
    let mut folds = alloc::vec![Vec::new(); k];
    for it in items {
        folds[fold_of[it.group_id()]].push(it.clone());
    }
    Ok(folds)
}
