//! ε-greedy hybrid client selection.
//!
//! With probability ε the round explores: k distinct clients uniformly at
//! random. Otherwise each client is scored by its floored contribution gain
//! plus an optimism bonus `c·sqrt(ln(t+1)/(σ+1))`, the scores are shifted
//! to be non-negative and normalized into sampling weights, and k clients
//! are drawn without replacement. Clients below the contribution floor τ
//! lose their gain and keep only a tenth of the bonus.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectionError {
    #[error("cannot select {k} clients out of {n}")]
    KExceedsN { k: usize, n: usize },
    #[error("weighted sampling needs at least {k} positive weights, found {positive}")]
    InsufficientPositiveWeights { k: usize, positive: usize },
}

/// Damping applied to the confidence bonus of clients below the floor.
pub const LOW_GAIN_SCALE: f64 = 0.1;

/// Per-client selection counters and the round clock.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BanditState {
    sigma: Vec<u64>,
    t: u64,
}

impl BanditState {
    pub fn new(n: usize) -> Self {
        Self { sigma: vec![0; n], t: 0 }
    }

    /// Rebuilds state from explicit counters (resume or testing).
    pub fn from_parts(sigma: Vec<u64>, t: u64) -> Self {
        Self { sigma, t }
    }

    pub fn selections(&self, client: usize) -> u64 {
        self.sigma[client]
    }

    pub fn sigma(&self) -> &[u64] {
        &self.sigma
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    /// Called once per round by the server loop, after selection.
    pub fn advance_round(&mut self) {
        self.t += 1;
    }

    fn record(&mut self, selected: &[usize]) {
        for &i in selected {
            self.sigma[i] += 1;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Exploration rate ε ∈ [0, 1].
    pub epsilon: f64,
    /// Confidence weight c > 0.
    pub confidence_c: f64,
    /// Contribution floor τ ≥ 0.
    pub tau: f64,
    /// Clients selected per round.
    pub clients_per_round: usize,
    /// Fixed at 0.1; kept visible because it is part of the scoring rule.
    pub low_gain_scale: f64,
}

impl SelectionConfig {
    pub fn new(epsilon: f64, confidence_c: f64, tau: f64, clients_per_round: usize) -> Self {
        Self { epsilon, confidence_c, tau, clients_per_round, low_gain_scale: LOW_GAIN_SCALE }
    }
}

/// The exploitation score of one client: floored gain plus optimism bonus.
pub fn score(phi_i: f64, sigma_i: u64, t: u64, cfg: &SelectionConfig) -> f64 {
    let below_floor = phi_i < cfg.tau;
    let gain = if below_floor { 0.0 } else { phi_i };
    let mut bonus =
        cfg.confidence_c * (((t + 1) as f64).ln() / (sigma_i + 1) as f64).sqrt();
    if below_floor {
        bonus *= cfg.low_gain_scale;
    }
    gain + bonus
}

/// Sampling weights of the exploitation branch: scores shifted by their
/// minimum and normalized, with a uniform fallback when everything is zero.
pub fn selection_weights(phi: &[f64], sigma: &[u64], t: u64, cfg: &SelectionConfig) -> Vec<f64> {
    let n = phi.len();
    let scores: Vec<f64> =
        (0..n).map(|i| score(phi[i], sigma[i], t, cfg)).collect();
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = scores.iter().map(|s| s - min).collect();
    let total: f64 = shifted.iter().sum();
    if total <= 0.0 {
        vec![1.0 / n as f64; n]
    } else {
        shifted.iter().map(|s| s / total).collect()
    }
}

/// Draws k distinct indices with probability proportional to `weights`,
/// sequentially: draw, remove, renormalize.
pub fn weighted_sample_without_replacement<R: Rng>(
    weights: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>, SelectionError> {
    let n = weights.len();
    if k > n {
        return Err(SelectionError::KExceedsN { k, n });
    }
    let positive = weights.iter().filter(|w| **w > 0.0).count();
    if positive < k {
        return Err(SelectionError::InsufficientPositiveWeights { k, positive });
    }
    let mut remaining: Vec<f64> = weights.to_vec();
    let mut total: f64 = remaining.iter().sum();
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let mut target = rng.random::<f64>() * total;
        let mut choice = None;
        for (i, w) in remaining.iter().enumerate() {
            if *w <= 0.0 {
                continue;
            }
            if target < *w {
                choice = Some(i);
                break;
            }
            target -= *w;
        }
        // Rounding can push the cursor past the last positive weight.
        let i = choice.unwrap_or_else(|| {
            remaining
                .iter()
                .rposition(|w| *w > 0.0)
                .expect("at least k positive weights")
        });
        picked.push(i);
        total -= remaining[i];
        remaining[i] = 0.0;
    }
    Ok(picked)
}

/// One round of hybrid selection. Increments the selection counters of the
/// chosen clients; advancing the round clock is the caller's job.
pub fn select_clients<R: Rng>(
    phi: &[f64],
    state: &mut BanditState,
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<Vec<usize>, SelectionError> {
    let n = phi.len();
    let k = cfg.clients_per_round;
    if k > n {
        return Err(SelectionError::KExceedsN { k, n });
    }

    let selected = if rng.random::<f64>() < cfg.epsilon {
        uniform_subset(n, k, rng)
    } else {
        let weights = selection_weights(phi, state.sigma(), state.round(), cfg);
        let positive = weights.iter().filter(|w| **w > 0.0).count();
        if positive >= k {
            weighted_sample_without_replacement(&weights, k, rng)?
        } else {
            // Fewer than k clients carry weight after the min-shift: take
            // all of them and fill the rest uniformly from the zeros.
            let mut picked: Vec<usize> =
                (0..n).filter(|&i| weights[i] > 0.0).collect();
            let zeros: Vec<usize> = (0..n).filter(|&i| weights[i] <= 0.0).collect();
            let fill = uniform_subset(zeros.len(), k - picked.len(), rng);
            picked.extend(fill.into_iter().map(|i| zeros[i]));
            picked
        }
    };

    state.record(&selected);
    Ok(selected)
}

fn uniform_subset<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    rand::seq::index::sample(rng, n, k).into_vec()
}
