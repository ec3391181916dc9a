//! Contribution-weighted model aggregation.
//!
//! Contribution scores become simplex weights through a softmax
//! (max-subtracted for overflow safety; the result is unchanged by the
//! shift), and the new global model is the convex combination of the
//! participants' full local weights. Plain uniform averaging and
//! cosine-similarity weighting are provided as baseline aggregators.
//!
//! Registry ids: `"softmax-contrib"`, `"fedavg"`, `"shapfed-wa"`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AggregationError {
    #[error("aggregation over an empty model list")]
    EmptyInput,
    #[error("model layouts differ at position {position}")]
    LayoutMismatch { position: usize },
    #[error("weight count {weights} does not match model count {models}")]
    CountMismatch { weights: usize, models: usize },
    #[error("unknown aggregator {0:?}; known ids: softmax-contrib, fedavg, shapfed-wa")]
    UnknownAggregator(String),
}

/// Named contiguous segments of a flat parameter vector, e.g. one per
/// layer. Aggregation requires identical layouts on all participants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    segments: Vec<(String, usize)>,
}

impl Layout {
    pub fn new(segments: Vec<(String, usize)>) -> Self {
        Self { segments }
    }

    pub fn total_len(&self) -> usize {
        self.segments.iter().map(|(_, len)| len).sum()
    }

    /// Byte range of a named segment within the flat vector.
    pub fn segment_range(&self, name: &str) -> Option<std::ops::Range<usize>> {
        let mut offset = 0;
        for (seg, len) in &self.segments {
            if seg == name {
                return Some(offset..offset + len);
            }
            offset += len;
        }
        None
    }

    pub fn segment_names(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().map(|(name, _)| name.as_str())
    }
}

/// A flat numeric parameter vector, closed under convex combination.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    layout: Arc<Layout>,
    values: Vec<f64>,
}

impl ModelParams {
    pub fn new(layout: Arc<Layout>, values: Vec<f64>) -> Self {
        assert_eq!(layout.total_len(), values.len(), "layout/value length mismatch");
        Self { layout, values }
    }

    pub fn zeros(layout: Arc<Layout>) -> Self {
        let len = layout.total_len();
        Self::new(layout, vec![0.0; len])
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.layout.segment_range(name).map(|r| &self.values[r])
    }
}

/// Simplex-valued aggregation weights.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregationWeights {
    alpha: Vec<f64>,
}

impl AggregationWeights {
    /// Wraps weights that must already be non-negative and sum to 1.
    pub fn new(alpha: Vec<f64>) -> Result<Self, AggregationError> {
        if alpha.is_empty() {
            return Err(AggregationError::EmptyInput);
        }
        debug_assert!(alpha.iter().all(|a| *a >= 0.0));
        debug_assert!((alpha.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        Ok(Self { alpha })
    }

    pub fn uniform(k: usize) -> Result<Self, AggregationError> {
        if k == 0 {
            return Err(AggregationError::EmptyInput);
        }
        Ok(Self { alpha: vec![1.0 / k as f64; k] })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// `α_i = exp(φ_i)/Σ_j exp(φ_j)`, computed with max-subtraction.
pub fn softmax_weights(phi: &[f64]) -> Result<AggregationWeights, AggregationError> {
    if phi.is_empty() {
        return Err(AggregationError::EmptyInput);
    }
    let max = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = phi.iter().map(|p| (p - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    AggregationWeights::new(exps.iter().map(|e| e / total).collect())
}

/// Convex combination `Σ α_i W_i` of models sharing one layout.
pub fn aggregate(
    models: &[ModelParams],
    alpha: &AggregationWeights,
) -> Result<ModelParams, AggregationError> {
    if models.is_empty() {
        return Err(AggregationError::EmptyInput);
    }
    if models.len() != alpha.len() {
        return Err(AggregationError::CountMismatch {
            weights: alpha.len(),
            models: models.len(),
        });
    }
    let layout = models[0].layout();
    for (position, model) in models.iter().enumerate().skip(1) {
        if model.layout().as_ref() != layout.as_ref() {
            return Err(AggregationError::LayoutMismatch { position });
        }
    }
    // Identical inputs are a fixed point of any convex combination; skip
    // the arithmetic so the fixed point is exact.
    if models.iter().skip(1).all(|m| m.values() == models[0].values()) {
        return Ok(models[0].clone());
    }
    let mut out = vec![0.0f64; layout.total_len()];
    for (model, &a) in models.iter().zip(alpha.as_slice()) {
        for (o, v) in out.iter_mut().zip(model.values()) {
            *o += a * v;
        }
    }
    Ok(ModelParams::new(Arc::clone(layout), out))
}

/// Uniform averaging over the participants.
pub fn fedavg_uniform(models: &[ModelParams]) -> Result<ModelParams, AggregationError> {
    aggregate(models, &AggregationWeights::uniform(models.len())?)
}

/// Cosine-similarity weights against a reference direction, clipped below
/// at zero and normalized; falls back to uniform when everything clips.
/// Zero-norm gradients get weight zero.
pub fn shapfed_wa_weights(
    client_grads: &[Vec<f64>],
    reference: &[f64],
) -> Result<Vec<f64>, AggregationError> {
    if client_grads.is_empty() {
        return Err(AggregationError::EmptyInput);
    }
    let ref_norm = norm(reference);
    let gammas: Vec<f64> = client_grads
        .iter()
        .map(|g| {
            let g_norm = norm(g);
            if g_norm == 0.0 || ref_norm == 0.0 {
                return 0.0;
            }
            let cos = dot(g, reference) / (g_norm * ref_norm);
            cos.max(0.0)
        })
        .collect();
    let total: f64 = gammas.iter().sum();
    if total <= 0.0 {
        return Ok(vec![1.0 / client_grads.len() as f64; client_grads.len()]);
    }
    Ok(gammas.iter().map(|g| g / total).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// The aggregation strategies addressable from configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggregatorKind {
    SoftmaxContrib,
    FedAvg,
    ShapFedWa,
}

impl AggregatorKind {
    pub const ALL: [AggregatorKind; 3] =
        [AggregatorKind::SoftmaxContrib, AggregatorKind::FedAvg, AggregatorKind::ShapFedWa];

    pub fn id(self) -> &'static str {
        match self {
            AggregatorKind::SoftmaxContrib => "softmax-contrib",
            AggregatorKind::FedAvg => "fedavg",
            AggregatorKind::ShapFedWa => "shapfed-wa",
        }
    }
}

impl fmt::Display for AggregatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for AggregatorKind {
    type Err = AggregationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| AggregationError::UnknownAggregator(s.to_string()))
    }
}
