//! Dataset handling: synthetic blobs, long-tail subsampling, the held-out
//! evaluation split and the Dirichlet client partition.
//!
//! Everything works on index lists into one immutable [`Dataset`], so
//! disjointness of shards and isolation of the evaluation set are properties
//! of the index sets and can be checked directly.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("imbalance factor {0} outside (0, 1]")]
    InvalidImbalance(f64),
    #[error("evaluation fraction {0} outside (0, 1)")]
    InvalidFraction(f64),
    #[error("dataset is empty or has no classes")]
    EmptyDataset,
    #[error("cannot split {examples} examples among {clients} clients")]
    UnsatisfiablePartition { examples: usize, clients: usize },
    #[error("Dirichlet partition left a client empty after {0} redraws")]
    PartitionRetriesExceeded(usize),
    #[error("need at least 2 examples to carve out an evaluation set, got {0}")]
    TooFewForSplit(usize),
}

/// A flat feature matrix with integer class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<usize>, classes: usize) -> Result<Self, DataError> {
        if labels.is_empty() || classes == 0 || dim == 0 {
            return Err(DataError::EmptyDataset);
        }
        assert_eq!(features.len(), labels.len() * dim, "feature matrix shape mismatch");
        assert!(labels.iter().all(|&y| y < classes), "label out of class range");
        Ok(Self { features, dim, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn features_of(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Class histogram over the given indices.
    pub fn class_counts(&self, indices: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.classes];
        for &i in indices {
            counts[self.labels[i]] += 1;
        }
        counts
    }
}

/// Gaussian blob dataset: one spherical cluster per class, unit variance,
/// means drawn at the given separation scale. Class sizes are as equal as
/// the example count allows.
pub fn synthetic_blobs(
    examples: usize,
    classes: usize,
    dim: usize,
    separation: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset, DataError> {
    if examples == 0 || classes == 0 || dim == 0 {
        return Err(DataError::EmptyDataset);
    }
    let normal = StandardNormal;
    let means: Vec<f64> = (0..classes * dim)
        .map(|_| {
            let x: f64 = normal.sample(rng);
            separation * x
        })
        .collect();
    let mut features = Vec::with_capacity(examples * dim);
    let mut labels = Vec::with_capacity(examples);
    for i in 0..examples {
        let class = i % classes;
        for d in 0..dim {
            let noise: f64 = normal.sample(rng);
            features.push(means[class * dim + d] + noise);
        }
        labels.push(class);
    }
    Dataset::new(features, dim, labels, classes)
}

/// Long-tail targets: class `c` keeps `round(n_max · imb^(c/(C−1)))`
/// examples, capped by availability. `imb = 1` keeps everything.
pub fn longtail_class_targets(class_counts: &[usize], imbalance: f64) -> Result<Vec<usize>, DataError> {
    if !(imbalance > 0.0 && imbalance <= 1.0) {
        return Err(DataError::InvalidImbalance(imbalance));
    }
    let c = class_counts.len();
    if c == 0 {
        return Err(DataError::EmptyDataset);
    }
    let n_max = *class_counts.iter().max().expect("non-empty") as f64;
    Ok(class_counts
        .iter()
        .enumerate()
        .map(|(class, &count)| {
            let exponent = if c == 1 { 0.0 } else { class as f64 / (c - 1) as f64 };
            let target = (n_max * imbalance.powf(exponent)).round() as usize;
            target.min(count)
        })
        .collect())
}

/// Applies the long-tail transform to a pool of examples, returning the
/// kept indices (uniform subsample without replacement per class).
pub fn longtail_subsample(
    data: &Dataset,
    pool: &[usize],
    imbalance: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>, DataError> {
    let counts = data.class_counts(pool);
    let targets = longtail_class_targets(&counts, imbalance)?;
    let mut kept = Vec::new();
    for (class, &target) in targets.iter().enumerate() {
        let mut members: Vec<usize> =
            pool.iter().copied().filter(|&i| data.label(i) == class).collect();
        members.shuffle(rng);
        members.truncate(target);
        kept.extend(members);
    }
    kept.sort_unstable();
    Ok(kept)
}

/// Largest-remainder apportionment of `total` units by the proportions `p`.
/// Ties go to the lower index, which keeps the result deterministic.
fn largest_remainder(p: &[f64], total: usize) -> Vec<usize> {
    let quotas: Vec<f64> = p.iter().map(|x| x * total as f64).collect();
    let mut out: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}

/// Stratified split of `pool` into (train, eval). The evaluation share of
/// each class is proportional with largest-remainder rounding, so the total
/// hits `round(|pool| · fraction)` exactly (clamped to keep both sides
/// non-empty).
pub fn split_eval_set(
    data: &Dataset,
    pool: &[usize],
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::InvalidFraction(fraction));
    }
    if pool.len() < 2 {
        return Err(DataError::TooFewForSplit(pool.len()));
    }
    let target = ((pool.len() as f64 * fraction).round() as usize).clamp(1, pool.len() - 1);
    let counts = data.class_counts(pool);
    let proportions: Vec<f64> =
        counts.iter().map(|&c| c as f64 / pool.len() as f64).collect();
    let mut quotas = largest_remainder(&proportions, target);
    // A remainder unit can land on a class without enough examples when the
    // pool is tiny; push the surplus onto classes with spare capacity.
    let mut surplus = 0usize;
    for (q, &c) in quotas.iter_mut().zip(&counts) {
        if *q > c {
            surplus += *q - c;
            *q = c;
        }
    }
    if surplus > 0 {
        for (q, &c) in quotas.iter_mut().zip(&counts) {
            let room = c - *q;
            let take = room.min(surplus);
            *q += take;
            surplus -= take;
            if surplus == 0 {
                break;
            }
        }
    }

    let mut eval = Vec::with_capacity(target);
    let mut train = Vec::with_capacity(pool.len() - target);
    for (class, &quota) in quotas.iter().enumerate() {
        let mut members: Vec<usize> =
            pool.iter().copied().filter(|&i| data.label(i) == class).collect();
        members.shuffle(rng);
        let (for_eval, for_train) = members.split_at(quota.min(members.len()));
        eval.extend_from_slice(for_eval);
        train.extend_from_slice(for_train);
    }
    eval.sort_unstable();
    train.sort_unstable();
    Ok((train, eval))
}

/// Dirichlet client partition: for each class, a proportion vector drawn
/// from `Dir(α, …, α)` over clients allocates that class's examples with
/// largest-remainder rounding. Draws leaving any client empty are redone,
/// up to a bounded number of attempts.
///
/// At extreme skew (α ≪ 1 with few classes) an empty-client-free draw may
/// be practically unreachable, so after the redraw budget the last draw is
/// repaired instead: each empty client takes one example from whichever
/// shard is currently largest. The transfer is deterministic and keeps the
/// shards disjoint.
pub fn dirichlet_partition(
    data: &Dataset,
    pool: &[usize],
    n_clients: usize,
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>, DataError> {
    const MAX_ATTEMPTS: usize = 100;
    if n_clients == 0 || pool.len() < n_clients {
        return Err(DataError::UnsatisfiablePartition { examples: pool.len(), clients: n_clients });
    }
    if n_clients == 1 {
        return Ok(vec![pool.to_vec()]);
    }
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|_| DataError::InvalidFraction(alpha))?;

    let mut last_attempt: Option<Vec<Vec<usize>>> = None;
    for _ in 0..MAX_ATTEMPTS {
        let mut shards: Vec<Vec<usize>> = vec![Vec::new(); n_clients];
        for class in 0..data.classes() {
            let mut members: Vec<usize> =
                pool.iter().copied().filter(|&i| data.label(i) == class).collect();
            if members.is_empty() {
                continue;
            }
            members.shuffle(rng);
            let proportions = loop {
                let draws: Vec<f64> = (0..n_clients).map(|_| gamma.sample(rng)).collect();
                let total: f64 = draws.iter().sum();
                // α ≪ 1 can underflow every draw to zero; redraw.
                if total > 0.0 && total.is_finite() {
                    break draws.into_iter().map(|d| d / total).collect::<Vec<f64>>();
                }
            };
            let quotas = largest_remainder(&proportions, members.len());
            let mut offset = 0;
            for (client, &quota) in quotas.iter().enumerate() {
                shards[client].extend_from_slice(&members[offset..offset + quota]);
                offset += quota;
            }
        }
        if shards.iter().all(|s| !s.is_empty()) {
            for shard in &mut shards {
                shard.sort_unstable();
            }
            return Ok(shards);
        }
        last_attempt = Some(shards);
    }

    // Redraws exhausted: repair the final draw.
    let mut shards = last_attempt.expect("at least one attempt ran");
    while let Some(empty) = shards.iter().position(Vec::is_empty) {
        let donor = shards
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("clients exist");
        if shards[donor].len() < 2 {
            return Err(DataError::PartitionRetriesExceeded(MAX_ATTEMPTS));
        }
        let moved = shards[donor].pop().expect("donor non-empty");
        shards[empty].push(moved);
    }
    for shard in &mut shards {
        shard.sort_unstable();
    }
    Ok(shards)
}
