//! Monte-Carlo Banzhaf estimation over uniform random subsets.

use rand::Rng;

use crate::budget::BudgetMeter;
use crate::coalition::Coalition;
use crate::estimators::{invalid, single_player, EstimatorError};
use crate::game::{ContributionVector, Game};
use crate::rng::{substream, walk_stream, Lane};

/// Samples `subset_draws` uniform subsets; for every player outside a
/// subset it accumulates the marginal gain of joining it.
///
/// The sums are divided by the number of subset draws even though each
/// player is absent from only about half of them, so the estimate converges
/// to half the Banzhaf value (`β_i / 2`). Callers comparing against
/// [`crate::game::exact_banzhaf`] must account for that factor.
pub fn data_banzhaf(
    game: &dyn Game,
    subset_draws: usize,
    budget: &BudgetMeter,
    seed: u64,
) -> Result<ContributionVector, EstimatorError> {
    if subset_draws == 0 {
        return Err(invalid("subset_draws", "must be at least 1"));
    }
    let n = game.player_count();
    super::check_players(n)?;
    if n == 1 {
        return single_player(game, Some(budget), "banzhaf");
    }
    let start = budget.used();
    let mut acc = vec![0.0f64; n];

    'outer: for m in 0..subset_draws {
        let mut rng = substream(seed, walk_stream(0, m as u64, Lane::Mask));
        let mut subset = Coalition::empty(n).expect("player count validated");
        for j in 0..n {
            if rng.random::<f64>() < 0.5 {
                subset = subset.insert(j).expect("index in range");
            }
        }
        if budget.charge(1).is_err() {
            break 'outer;
        }
        let v_subset = game.value(subset);
        let mut gains = Vec::with_capacity(n - subset.len());
        for j in 0..n {
            if subset.contains(j) {
                continue;
            }
            if budget.charge(1).is_err() {
                break 'outer; // drop the partially priced subset
            }
            let v_joined = game.value(subset.insert(j).expect("index in range"));
            gains.push((j, v_joined - v_subset));
        }
        for (j, d) in gains {
            acc[j] += d;
        }
    }

    let div = subset_draws as f64;
    let values = acc.iter().map(|a| a / div).collect();
    Ok(ContributionVector::new(values, "banzhaf", budget.used() - start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{exact_banzhaf, CoalitionalGame};
    use crate::games::{additive_game, random_monotone_game};
    use approx::assert_abs_diff_eq;

    #[test]
    fn additive_game_converges_to_half_the_weights() {
        // P(i ∉ S) = 1/2 under uniform subsets, so the estimate is w_i/2.
        let weights = [0.5, 0.3, 0.2];
        let game = additive_game(weights.to_vec());
        let budget = BudgetMeter::new(u64::MAX);
        let cv = data_banzhaf(&game, 50_000, &budget, 9).unwrap();
        for (est, w) in cv.values.iter().zip(weights) {
            assert_abs_diff_eq!(*est, w / 2.0, epsilon = 0.01);
        }
    }

    #[test]
    fn dummy_players_get_exactly_zero() {
        let game = CoalitionalGame::new(3, |c| {
            0.6 * f64::from(c.contains(0)) + 0.4 * f64::from(c.contains(1))
        });
        let budget = BudgetMeter::new(u64::MAX);
        let cv = data_banzhaf(&game, 500, &budget, 1).unwrap();
        assert_eq!(cv.values[2], 0.0);
    }

    #[test]
    fn tracks_half_of_the_exact_banzhaf_value() {
        for seed in [1, 2, 3] {
            let game = random_monotone_game(6, 17).unwrap();
            let oracle = exact_banzhaf(&game).unwrap();
            let game = random_monotone_game(6, 17).unwrap();
            let budget = BudgetMeter::new(u64::MAX);
            let cv = data_banzhaf(&game, 20_000, &budget, seed).unwrap();
            for (est, beta) in cv.values.iter().zip(&oracle.values) {
                assert_abs_diff_eq!(*est, beta / 2.0, epsilon = 0.02);
            }
        }
    }
}
