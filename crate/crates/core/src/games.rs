//! Catalog of analytic test games.
//!
//! These games have known structure (and mostly known Shapley values), so
//! they anchor the estimator tests. All of them are normalized by
//! construction: `ν(∅) = 0` and `ν(N) = 1`.

use rand::Rng;

use crate::game::{CoalitionalGame, GameError};
use crate::rng::substream;

/// Builds a game from the fixed catalog. `seed` only matters for
/// `random_monotone` and the seeded-weight `additive` variant.
pub fn standard_game(name: &str, n: usize, seed: u64) -> Result<CoalitionalGame, GameError> {
    if n > crate::coalition::MAX_PLAYERS {
        return Err(GameError::Coalition(crate::coalition::CoalitionError::TooManyPlayers { n }));
    }
    match name {
        "additive" => Ok(additive_game(seeded_weights(n, seed)?)),
        "majority" => majority_game(n),
        "glove" => glove_game(n),
        "random_monotone" => random_monotone_game(n, seed),
        other => Err(GameError::UnknownGame { name: other.to_string() }),
    }
}

fn seeded_weights(n: usize, seed: u64) -> Result<Vec<f64>, GameError> {
    if n == 0 {
        return Err(GameError::NoPlayers);
    }
    let mut rng = substream(seed, 0x41_44_44);
    let mut weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

/// `ν(S) = Σ_{i∈S} w_i`. Every marginal contribution equals the weight.
pub fn additive_game(weights: Vec<f64>) -> CoalitionalGame {
    let n = weights.len();
    CoalitionalGame::new(n, move |c| c.members().map(|j| weights[j]).sum())
}

/// `ν(S) = 1` iff `S` holds a strict majority of the players.
pub fn majority_game(n: usize) -> Result<CoalitionalGame, GameError> {
    if n == 0 {
        return Err(GameError::NoPlayers);
    }
    let threshold = n / 2 + 1;
    Ok(CoalitionalGame::new(n, move |c| if c.len() >= threshold { 1.0 } else { 0.0 }))
}

/// Left gloves for players `0..n-1`, a single right glove for player `n-1`;
/// `ν(S) = min(|S ∩ left|, |S ∩ right|)`, i.e. the number of matched pairs.
pub fn glove_game(n: usize) -> Result<CoalitionalGame, GameError> {
    if n < 2 {
        return Err(GameError::TooFewPlayers { name: "glove", min: 2, n });
    }
    let right = n - 1;
    Ok(CoalitionalGame::new(n, move |c| {
        let left_count = c.members().filter(|&j| j != right).count();
        let right_count = usize::from(c.contains(right));
        left_count.min(right_count) as f64
    }))
}

/// A strictly monotone random game: positive per-player weights plus
/// non-negative pairwise synergies, rescaled so `ν(N) = 1`.
pub fn random_monotone_game(n: usize, seed: u64) -> Result<CoalitionalGame, GameError> {
    if n == 0 {
        return Err(GameError::NoPlayers);
    }
    let mut rng = substream(seed, 0x4d_4f_4e_4f);
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let mut synergies: Vec<(u64, f64)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < 0.3 {
                let pair = (1u64 << i) | (1u64 << j);
                synergies.push((pair, rng.random_range(0.0..0.6)));
            }
        }
    }
    let raw = move |mask: u64| -> f64 {
        let mut v: f64 = (0..n).filter(|j| (mask >> j) & 1 == 1).map(|j| weights[j]).sum();
        for &(pair, bonus) in &synergies {
            if mask & pair == pair {
                v += bonus;
            }
        }
        v
    };
    let full_mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let grand = raw(full_mask);
    Ok(CoalitionalGame::new(n, move |c| raw(c.mask()) / grand))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coalition::Coalition;
    use crate::game::Game;
    use approx::assert_abs_diff_eq;

    #[test]
    fn additive_value_is_the_weight_sum() {
        let game = additive_game(vec![0.5, 0.3, 0.2]);
        let c = Coalition::from_members(3, &[0, 2]).unwrap();
        assert_abs_diff_eq!(game.value(c), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn majority_five_needs_three_players() {
        let game = majority_game(5).unwrap();
        for mask in 0..32u64 {
            let c = Coalition::from_mask(5, mask).unwrap();
            let expected = if c.len() >= 3 { 1.0 } else { 0.0 };
            assert_eq!(game.value(c), expected);
        }
    }

    #[test]
    fn random_monotone_is_monotone_by_exhaustive_scan() {
        // Check every covering relation S ⊂ S ∪ {j} over all 2^8 masks.
        let game = random_monotone_game(8, 42).unwrap();
        for mask in 0..(1u64 << 8) {
            let base = game.value(Coalition::from_mask(8, mask).unwrap());
            for j in 0..8 {
                if (mask >> j) & 1 == 0 {
                    let bigger = game.value(Coalition::from_mask(8, mask | (1 << j)).unwrap());
                    assert!(
                        base <= bigger + 1e-15,
                        "seed 42 not monotone at mask {mask:#b} + player {j}"
                    );
                }
            }
        }
    }

    #[test]
    fn catalog_games_are_normalized() {
        for (name, n) in [("additive", 6), ("majority", 7), ("glove", 4), ("random_monotone", 6)] {
            let game = standard_game(name, n, 9).unwrap();
            assert_abs_diff_eq!(game.value(Coalition::empty(n).unwrap()), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(game.value(Coalition::full(n).unwrap()), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn catalog_is_deterministic_per_seed() {
        let a = standard_game("random_monotone", 6, 4).unwrap();
        let b = standard_game("random_monotone", 6, 4).unwrap();
        for mask in 0..(1u64 << 6) {
            let c = Coalition::from_mask(6, mask).unwrap();
            assert_eq!(a.value(c), b.value(c));
        }
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(matches!(
            standard_game("airport", 4, 0),
            Err(GameError::UnknownGame { .. })
        ));
    }
}
