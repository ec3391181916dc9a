//! Coalitional games, utility normalization and exact oracles.
//!
//! A game is a deterministic utility `ν: Coalition → f64` over `n` players
//! plus a call counter. The exact Shapley and Banzhaf oracles enumerate all
//! `2^n` coalitions once (memoized) and then weigh marginal contributions,
//! so `2^n` is the hard cost rather than `n!`. They exist to validate the
//! sampled estimators, not to run inside the training loop.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coalition::{Coalition, CoalitionError};

/// Largest player count the exact oracles will enumerate.
pub const MAX_EXACT_PLAYERS: usize = 20;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("game must have at least one player")]
    NoPlayers,
    #[error("{n} players is too large for exact enumeration (max {MAX_EXACT_PLAYERS})")]
    EnumerationTooLarge { n: usize },
    #[error("degenerate game: utility of the grand coalition equals the empty coalition ({value})")]
    DegenerateGame { value: f64 },
    #[error("unknown game {name:?}; catalog: additive, majority, glove, random_monotone")]
    UnknownGame { name: String },
    #[error("game {name:?} needs at least {min} players, got {n}")]
    TooFewPlayers { name: &'static str, min: usize, n: usize },
    #[error(transparent)]
    Coalition(#[from] CoalitionError),
}

/// Anything that can price a coalition.
///
/// Implementations must be deterministic: the same coalition always maps to
/// the same value for a fixed game instance.
pub trait Game: Send + Sync {
    fn player_count(&self) -> usize;
    fn value(&self, coalition: Coalition) -> f64;
}

/// A coalitional game backed by a utility closure, with an evaluation
/// counter that is safe to bump from concurrent evaluators.
pub struct CoalitionalGame {
    n: usize,
    utility: Box<dyn Fn(Coalition) -> f64 + Send + Sync>,
    evals: AtomicU64,
}

impl CoalitionalGame {
    pub fn new<F>(n: usize, utility: F) -> Self
    where
        F: Fn(Coalition) -> f64 + Send + Sync + 'static,
    {
        Self { n, utility: Box::new(utility), evals: AtomicU64::new(0) }
    }

    /// Total utility calls made against this instance.
    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Acquire)
    }
}

impl Game for CoalitionalGame {
    fn player_count(&self) -> usize {
        self.n
    }

    fn value(&self, coalition: Coalition) -> f64 {
        self.evals.fetch_add(1, Ordering::AcqRel);
        (self.utility)(coalition)
    }
}

/// A game rescaled so that `ν′(∅) = 0` and `ν′(N) = 1` exactly.
///
/// Normalization is always explicit: the truncation bound of the Owen walk
/// is only meaningful on normalized utilities, so nothing in this crate
/// rescales silently.
pub struct NormalizedGame {
    inner: CoalitionalGame,
    v_empty: f64,
    v_full: f64,
    denom: f64,
}

impl NormalizedGame {
    /// Normalizes `game`, refusing degenerate games where `ν(N) = ν(∅)`.
    ///
    /// Costs two evaluations of the inner utility (the two anchors).
    pub fn new(game: CoalitionalGame) -> Result<Self, GameError> {
        let (v_empty, v_full) = Self::anchors(&game)?;
        if v_full == v_empty {
            return Err(GameError::DegenerateGame { value: v_full });
        }
        Ok(Self { inner: game, v_empty, v_full, denom: v_full - v_empty })
    }

    /// Like [`NormalizedGame::new`] but tolerates degenerate games by
    /// shifting only (`denominator = 1`), so `ν′ ≡ ν − ν(∅)` and the grand
    /// coalition maps to 0 instead of 1. Used by the round loop, where a
    /// quantized accuracy metric can make `ν(N) = ν(∅)` legitimately.
    pub fn tolerant(game: CoalitionalGame) -> Result<Self, GameError> {
        let (v_empty, v_full) = Self::anchors(&game)?;
        let denom = if v_full == v_empty { 1.0 } else { v_full - v_empty };
        Ok(Self { inner: game, v_empty, v_full, denom })
    }

    fn anchors(game: &CoalitionalGame) -> Result<(f64, f64), GameError> {
        let n = game.player_count();
        if n == 0 {
            return Err(GameError::NoPlayers);
        }
        let v_empty = game.value(Coalition::empty(n)?);
        let v_full = game.value(Coalition::full(n)?);
        Ok((v_empty, v_full))
    }

    /// Raw utility of the empty coalition.
    pub fn raw_empty(&self) -> f64 {
        self.v_empty
    }

    /// Raw utility of the grand coalition.
    pub fn raw_full(&self) -> f64 {
        self.v_full
    }

    /// Normalized value of the grand coalition: 1 normally, 0 when the game
    /// was degenerate and only shifted.
    pub fn grand_value(&self) -> f64 {
        (self.v_full - self.v_empty) / self.denom
    }

    pub fn inner(&self) -> &CoalitionalGame {
        &self.inner
    }
}

impl Game for NormalizedGame {
    fn player_count(&self) -> usize {
        self.inner.player_count()
    }

    fn value(&self, coalition: Coalition) -> f64 {
        (self.inner.value(coalition) - self.v_empty) / self.denom
    }
}

/// Normalizes a game so `ν′(∅) = 0` and `ν′(N) = 1`.
pub fn normalize(game: CoalitionalGame) -> Result<NormalizedGame, GameError> {
    NormalizedGame::new(game)
}

/// Per-player contribution scores with bookkeeping about how they were made.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContributionVector {
    pub values: Vec<f64>,
    pub estimator_id: String,
    pub evals_used: u64,
}

impl ContributionVector {
    pub fn new(values: Vec<f64>, estimator_id: impl Into<String>, evals_used: u64) -> Self {
        Self { values, estimator_id: estimator_id.into(), evals_used }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

/// Utility table over all `2^n` coalitions, one game call per entry.
fn memoize(game: &dyn Game) -> Result<Vec<f64>, GameError> {
    let n = game.player_count();
    if n == 0 {
        return Err(GameError::NoPlayers);
    }
    if n > MAX_EXACT_PLAYERS {
        return Err(GameError::EnumerationTooLarge { n });
    }
    let mut table = Vec::with_capacity(1 << n);
    for mask in 0..(1u64 << n) {
        table.push(game.value(Coalition::from_mask(n, mask)?));
    }
    Ok(table)
}

/// Exact Shapley values by weighted subset enumeration.
///
/// The returned values satisfy efficiency: `Σφᵢ = ν(N) − ν(∅)`.
pub fn exact_shapley(game: &dyn Game) -> Result<ContributionVector, GameError> {
    let n = game.player_count();
    let table = memoize(game)?;
    // w(s) = s!(n-s-1)!/n!, the probability that a uniformly random
    // permutation places exactly the members of S before player i.
    let n_fact = factorial(n) as f64;
    let weights: Vec<f64> = (0..n)
        .map(|s| (factorial(s) as f64) * (factorial(n - 1 - s) as f64) / n_fact)
        .collect();
    let mut values = vec![0.0; n];
    for (i, value) in values.iter_mut().enumerate() {
        let bit = 1u64 << i;
        for mask in 0..(1u64 << n) {
            if mask & bit == 0 {
                let s = mask.count_ones() as usize;
                *value += weights[s] * (table[(mask | bit) as usize] - table[mask as usize]);
            }
        }
    }
    Ok(ContributionVector::new(values, "exact-shapley", 1 << n))
}

/// Exact Banzhaf values: `βᵢ = 2^{-(n-1)} Σ_{S ⊆ N∖{i}} [ν(S∪{i}) − ν(S)]`.
pub fn exact_banzhaf(game: &dyn Game) -> Result<ContributionVector, GameError> {
    let n = game.player_count();
    let table = memoize(game)?;
    let scale = (0.5f64).powi(n as i32 - 1);
    let mut values = vec![0.0; n];
    for (i, value) in values.iter_mut().enumerate() {
        let bit = 1u64 << i;
        let mut sum = 0.0;
        for mask in 0..(1u64 << n) {
            if mask & bit == 0 {
                sum += table[(mask | bit) as usize] - table[mask as usize];
            }
        }
        *value = scale * sum;
    }
    Ok(ContributionVector::new(values, "exact-banzhaf", 1 << n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{additive_game, glove_game, majority_game, random_monotone_game};
    use approx::assert_abs_diff_eq;

    /// Independent oracle: average marginal contributions over all n!
    /// permutations. Deliberately shares no code with `exact_shapley`.
    fn shapley_by_permutations(game: &dyn Game) -> Vec<f64> {
        fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
            if items.len() <= 1 {
                return vec![items.to_vec()];
            }
            let mut out = Vec::new();
            for (i, &head) in items.iter().enumerate() {
                let mut rest = items.to_vec();
                rest.remove(i);
                for mut tail in permutations(&rest) {
                    tail.insert(0, head);
                    out.push(tail);
                }
            }
            out
        }
        let n = game.player_count();
        let players: Vec<usize> = (0..n).collect();
        let perms = permutations(&players);
        let mut totals = vec![0.0; n];
        for perm in &perms {
            let mut coalition = Coalition::empty(n).unwrap();
            let mut prev = game.value(coalition);
            for &j in perm {
                coalition = coalition.insert(j).unwrap();
                let next = game.value(coalition);
                totals[j] += next - prev;
                prev = next;
            }
        }
        totals.iter().map(|t| t / perms.len() as f64).collect()
    }

    #[test]
    fn games_and_meters_cross_thread_boundaries() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<CoalitionalGame>();
        assert_send_sync::<NormalizedGame>();
        assert_send_sync::<crate::budget::BudgetMeter>();
    }

    #[test]
    fn shapley_of_majority_game_is_symmetric() {
        let game = majority_game(3).unwrap();
        let phi = exact_shapley(&game).unwrap();
        for v in &phi.values {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn shapley_of_additive_game_returns_the_weights() {
        let game = additive_game(vec![0.5, 0.3, 0.2]);
        let phi = exact_shapley(&game).unwrap();
        assert_abs_diff_eq!(phi.values[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(phi.values[1], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(phi.values[2], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn shapley_of_glove_game_matches_permutation_oracle() {
        // Frozen from the permutation oracle: averaging marginals over all
        // 3! orders gives (1/6, 1/6, 2/3).
        let game = glove_game(3).unwrap();
        let phi = exact_shapley(&game).unwrap();
        assert_abs_diff_eq!(phi.values[0], 1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phi.values[1], 1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phi.values[2], 2.0 / 3.0, epsilon = 1e-12);

        let brute = shapley_by_permutations(&glove_game(3).unwrap());
        for (a, b) in phi.values.iter().zip(&brute) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn subset_enumeration_agrees_with_permutation_oracle_on_random_games() {
        for seed in [1, 7, 23] {
            let game = random_monotone_game(5, seed).unwrap();
            let phi = exact_shapley(&game).unwrap();
            let brute = shapley_by_permutations(&random_monotone_game(5, seed).unwrap());
            for (a, b) in phi.values.iter().zip(&brute) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn oracle_rejects_large_player_counts() {
        let game = CoalitionalGame::new(21, |c| c.len() as f64);
        assert!(matches!(
            exact_shapley(&game),
            Err(GameError::EnumerationTooLarge { n: 21 })
        ));
    }

    #[test]
    fn oracle_spends_at_most_two_to_the_n_evaluations() {
        let game = random_monotone_game(8, 3).unwrap();
        let phi = exact_shapley(&game).unwrap();
        assert_eq!(game.eval_count(), 1 << 8);
        assert_eq!(phi.evals_used, 1 << 8);
    }

    #[test]
    fn banzhaf_of_additive_game_returns_the_weights() {
        let game = additive_game(vec![0.5, 0.3, 0.2]);
        let beta = exact_banzhaf(&game).unwrap();
        for (b, w) in beta.values.iter().zip([0.5, 0.3, 0.2]) {
            assert_abs_diff_eq!(*b, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn banzhaf_of_majority_game_counts_swings() {
        // Each player swings in 2 of the 4 subsets of the other two.
        let game = majority_game(3).unwrap();
        let beta = exact_banzhaf(&game).unwrap();
        for b in &beta.values {
            assert_abs_diff_eq!(*b, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn dummy_player_gets_zero_from_both_oracles() {
        // Player 2 never changes the value.
        let game = CoalitionalGame::new(3, |c| {
            let mut v = 0.0;
            if c.contains(0) {
                v += 0.4;
            }
            if c.contains(1) {
                v += 0.6;
            }
            v
        });
        let phi = exact_shapley(&game).unwrap();
        let beta = exact_banzhaf(&game).unwrap();
        assert_abs_diff_eq!(phi.values[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(beta.values[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn efficiency_holds_on_random_games() {
        for seed in 0..10 {
            let game = random_monotone_game(8, seed).unwrap();
            let phi = exact_shapley(&game).unwrap();
            let total: f64 = phi.values.iter().sum();
            let span = game.value(Coalition::full(8).unwrap())
                - game.value(Coalition::empty(8).unwrap());
            assert_abs_diff_eq!(total, span, epsilon = 1e-9);
        }
    }

    #[test]
    fn additivity_of_the_exact_oracle() {
        for seed in 0..5 {
            let a = random_monotone_game(6, seed).unwrap();
            let b = random_monotone_game(6, seed + 100).unwrap();
            let combined = CoalitionalGame::new(6, move |c| a.value(c) + b.value(c));
            let phi_sum = exact_shapley(&combined).unwrap();
            let phi_a = exact_shapley(&random_monotone_game(6, seed).unwrap()).unwrap();
            let phi_b = exact_shapley(&random_monotone_game(6, seed + 100).unwrap()).unwrap();
            for i in 0..6 {
                assert_abs_diff_eq!(
                    phi_sum.values[i],
                    phi_a.values[i] + phi_b.values[i],
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn normalize_maps_midpoints_to_midpoints() {
        let game = CoalitionalGame::new(2, |c| match c.len() {
            0 => 0.1,
            2 => 0.9,
            _ => 0.5,
        });
        let norm = normalize(game).unwrap();
        assert_abs_diff_eq!(norm.value(Coalition::empty(2).unwrap()), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(norm.value(Coalition::full(2).unwrap()), 1.0, epsilon = 1e-15);
        let single = Coalition::from_members(2, &[0]).unwrap();
        assert_abs_diff_eq!(norm.value(single), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn normalize_is_identity_on_already_normalized_games() {
        let norm = normalize(majority_game(3).unwrap()).unwrap();
        let fresh = majority_game(3).unwrap();
        for mask in 0..8u64 {
            let c = Coalition::from_mask(3, mask).unwrap();
            assert_abs_diff_eq!(norm.value(c), fresh.value(c), epsilon = 1e-15);
        }
    }

    #[test]
    fn normalize_rejects_constant_games() {
        let game = CoalitionalGame::new(3, |_| 0.7);
        assert!(matches!(normalize(game), Err(GameError::DegenerateGame { .. })));
    }

    #[test]
    fn tolerant_normalization_shifts_constant_games_to_zero() {
        let game = CoalitionalGame::new(3, |_| 0.7);
        let norm = NormalizedGame::tolerant(game).unwrap();
        assert_eq!(norm.grand_value(), 0.0);
        assert_eq!(norm.value(Coalition::from_mask(3, 0b101).unwrap()), 0.0);
    }

    #[test]
    fn shapley_of_normalized_game_is_rescaled_shapley() {
        let seed = 11;
        let raw = || {
            let inner = random_monotone_game(6, seed).unwrap();
            // shift and stretch so the raw game is not normalized
            CoalitionalGame::new(6, move |c| 0.25 + 3.0 * inner.value(c))
        };
        let phi_raw = exact_shapley(&raw()).unwrap();
        let norm = normalize(raw()).unwrap();
        let phi_norm = exact_shapley(&norm).unwrap();
        let span = norm.raw_full() - norm.raw_empty();
        for i in 0..6 {
            assert_abs_diff_eq!(phi_norm.values[i], phi_raw.values[i] / span, epsilon = 1e-10);
        }
    }
}
