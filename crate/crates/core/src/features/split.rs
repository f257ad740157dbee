use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::paths::Label;

/// How far minority classes in the training portion are repeated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Oversample {
    #[default]
    None,
    /// Every class reaches the size of the largest one.
    Parity,
    /// Every class reaches at least this fraction of the largest one.
    Fraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub format_version: u32,
    pub seed: u64,
    pub ratio: f64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    /// Total multiplicity of each repeated training id; absent ids count once.
    pub oversample_counts: BTreeMap<String, usize>,
}

impl Split {
    /// Training ids with oversampled ids repeated.
    pub fn train_multiset(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for id in &self.train_ids {
            let copies = self.oversample_counts.get(id).copied().unwrap_or(1);
            out.extend(std::iter::repeat_n(id.as_str(), copies));
        }
        out
    }
}

/// Per-class training quotas summing to `round(ratio * total)`, handing the
/// leftover units to the largest fractional parts.
fn quotas(sizes: &[usize], ratio: f64) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let target = ((total as f64) * ratio).round() as usize;
    let exact: Vec<f64> = sizes.iter().map(|&n| n as f64 * ratio).collect();
    let mut out: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut left = target.saturating_sub(out.iter().sum());
    for k in order {
        if left == 0 {
            break;
        }
        if out[k] < sizes[k] {
            out[k] += 1;
            left -= 1;
        }
    }
    out
}

/// Splits labelled ids class by class. `items` is in corpus order, and both
/// id lists keep that order.
pub fn stratified_split(
    items: &[(String, Label)],
    ratio: f64,
    seed: u64,
    mode: Oversample,
) -> Result<Split, FeatureError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(FeatureError::BadRatio(ratio));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (n, (_, label)) in items.iter().enumerate() {
        groups.entry(*label).or_default().push(n);
    }
    for members in groups.values_mut() {
        members.shuffle(&mut rng);
    }
    let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    let quota = quotas(&sizes, ratio);

    let mut train = HashSet::new();
    let mut train_groups: BTreeMap<Label, Vec<&str>> = BTreeMap::new();
    for ((label, members), q) in groups.iter().zip(quota) {
        for &n in &members[..q] {
            train.insert(n);
            train_groups.entry(*label).or_default().push(&items[n].0);
        }
    }
    let (mut train_ids, mut test_ids) = (Vec::new(), Vec::new());
    for (n, (id, _)) in items.iter().enumerate() {
        if train.contains(&n) {
            train_ids.push(id.clone());
        } else {
            test_ids.push(id.clone());
        }
    }
    Ok(Split {
        format_version: super::FORMAT_VERSION,
        seed,
        ratio,
        train_ids,
        test_ids,
        oversample_counts: oversample(&train_groups, mode),
    })
}

/// Multiplicities that lift each class to its target size. Within a class,
/// leftover copies go to the earliest ids of the given order.
pub fn oversample(groups: &BTreeMap<Label, Vec<&str>>, mode: Oversample) -> BTreeMap<String, usize> {
    let largest = groups.values().map(Vec::len).max().unwrap_or(0);
    let target = |n: usize| match mode {
        Oversample::None => n,
        Oversample::Parity => largest,
        Oversample::Fraction(f) => n.max((f * largest as f64).ceil() as usize),
    };
    let mut out = BTreeMap::new();
    for members in groups.values() {
        let n = members.len();
        if n == 0 {
            continue;
        }
        let want = target(n);
        let (base, extra) = (want / n, want % n);
        for (k, id) in members.iter().enumerate() {
            let copies = base + usize::from(k < extra);
            if copies > 1 {
                out.insert(id.to_string(), copies);
            }
        }
    }
    out
}
