//! Permutation-order estimators: plain Monte-Carlo sampling, truncation-
//! guided sampling, and Beta-weighted positions.
//!
//! All three walk full random permutations and share the same permutation
//! streams, so under one seed they see identical visit orders. That is a
//! contract, not a coincidence: the truncation-guided estimator with a zero
//! threshold and the Beta estimator with uniform weights must reproduce
//! plain Monte-Carlo bit for bit.

use rand::seq::SliceRandom;
use statrs::distribution::{Beta, Continuous};

use crate::budget::BudgetMeter;
use crate::coalition::Coalition;
use crate::estimators::{invalid, single_player, EstimatorError};
use crate::game::{ContributionVector, Game};
use crate::rng::{substream, walk_stream, Lane};

fn permutation(seed: u64, walk: u64, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, walk_stream(0, walk, Lane::Order)));
    order
}

/// Monte-Carlo Shapley: average marginal gains over `permutations` uniform
/// random orders. Spends exactly `n` evaluations per permutation; if the
/// meter runs dry mid-permutation the partial results are dropped.
pub fn mc_shapley(
    game: &dyn Game,
    permutations: usize,
    budget: &BudgetMeter,
    seed: u64,
) -> Result<ContributionVector, EstimatorError> {
    if permutations == 0 {
        return Err(invalid("permutations", "must be at least 1"));
    }
    let n = game.player_count();
    super::check_players(n)?;
    if n == 1 {
        return single_player(game, Some(budget), "mc");
    }
    let start = budget.used();
    let mut acc = vec![0.0f64; n];
    let mut completed: u64 = 0;

    'outer: for m in 0..permutations {
        let order = permutation(seed, m as u64, n);
        let mut coalition = Coalition::empty(n).expect("player count validated");
        let mut prev = 0.0;
        let mut marginals = Vec::with_capacity(n);
        for &j in &order {
            if budget.charge(1).is_err() {
                break 'outer; // permutation discarded
            }
            coalition = coalition.insert(j).expect("index in range");
            let v = game.value(coalition);
            marginals.push((j, v - prev));
            prev = v;
        }
        for (j, d) in marginals {
            acc[j] += d;
        }
        completed += 1;
    }

    let div = completed.max(1) as f64;
    let values = acc.iter().map(|a| a / div).collect();
    Ok(ContributionVector::new(values, "mc", budget.used() - start))
}

/// Truncation-guided Shapley: evaluates `ν(S∪{i})` only while the gap to
/// the grand value stays at least `eps_trunc`, otherwise freezes the
/// running value. Evaluates `ν(N)` itself once up front, so it spends at
/// most `n·M + 1` calls.
pub fn gtg_shapley(
    game: &dyn Game,
    eps_trunc: f64,
    permutations: usize,
    budget: &BudgetMeter,
    seed: u64,
) -> Result<ContributionVector, EstimatorError> {
    gtg_shapley_with_grand(game, eps_trunc, permutations, budget, seed, None)
}

/// [`gtg_shapley`] with the grand value supplied by the caller (it is known
/// to be 1 on a freshly normalized game), saving the up-front evaluation
/// and keeping the spend within `n·M`.
pub fn gtg_shapley_with_grand(
    game: &dyn Game,
    eps_trunc: f64,
    permutations: usize,
    budget: &BudgetMeter,
    seed: u64,
    grand: Option<f64>,
) -> Result<ContributionVector, EstimatorError> {
    if eps_trunc < 0.0 {
        return Err(invalid("eps_trunc", "must be non-negative"));
    }
    if permutations == 0 {
        return Err(invalid("permutations", "must be at least 1"));
    }
    let n = game.player_count();
    super::check_players(n)?;
    if n == 1 {
        return single_player(game, Some(budget), "gtg");
    }
    let start = budget.used();
    let v_grand = match grand {
        Some(v) => v,
        None => {
            budget.charge(1)?;
            game.value(Coalition::full(n).expect("player count validated"))
        }
    };

    let mut acc = vec![0.0f64; n];
    let mut completed: u64 = 0;

    'outer: for m in 0..permutations {
        let order = permutation(seed, m as u64, n);
        let mut coalition = Coalition::empty(n).expect("player count validated");
        let mut prev = 0.0;
        let mut marginals = Vec::with_capacity(n);
        for &j in &order {
            coalition = coalition.insert(j).expect("index in range");
            let v = if (v_grand - prev).abs() >= eps_trunc {
                if budget.charge(1).is_err() {
                    break 'outer;
                }
                game.value(coalition)
            } else {
                prev // frozen: nothing left worth evaluating
            };
            marginals.push((j, v - prev));
            prev = v;
        }
        for (j, d) in marginals {
            acc[j] += d;
        }
        completed += 1;
    }

    let div = completed.max(1) as f64;
    let values = acc.iter().map(|a| a / div).collect();
    Ok(ContributionVector::new(values, "gtg", budget.used() - start))
}

/// Position weights for the Beta-weighted estimator: the Beta(α, β) density
/// at the position midpoints `(j − ½)/n`, rescaled to mean 1. Midpoints
/// keep the density finite for α < 1 or β < 1.
pub fn position_weights(n: usize, alpha: f64, beta: f64) -> Result<Vec<f64>, EstimatorError> {
    if alpha <= 0.0 || beta <= 0.0 {
        return Err(invalid("alpha/beta", "Beta shape parameters must be positive"));
    }
    if alpha == 1.0 && beta == 1.0 {
        // Beta(1,1) is the uniform density; exact ones keep this estimator
        // bit-compatible with plain Monte-Carlo.
        return Ok(vec![1.0; n]);
    }
    let dist = Beta::new(alpha, beta)
        .map_err(|e| invalid("alpha/beta", e.to_string()))?;
    let raw: Vec<f64> = (0..n).map(|j| dist.pdf((j as f64 + 0.5) / n as f64)).collect();
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        return Err(invalid("alpha/beta", "degenerate position weights"));
    }
    Ok(raw.iter().map(|w| w * n as f64 / sum).collect())
}

/// Beta-weighted permutation Shapley: marginal gains are weighted by the
/// position weight of the slot they occur in.
pub fn weighted_shap(
    game: &dyn Game,
    alpha: f64,
    beta: f64,
    permutations: usize,
    budget: &BudgetMeter,
    seed: u64,
) -> Result<ContributionVector, EstimatorError> {
    if permutations == 0 {
        return Err(invalid("permutations", "must be at least 1"));
    }
    let n = game.player_count();
    super::check_players(n)?;
    let weights = position_weights(n, alpha, beta)?;
    if n == 1 {
        return single_player(game, Some(budget), "wshap");
    }
    let start = budget.used();
    let mut acc = vec![0.0f64; n];
    let mut completed: u64 = 0;

    'outer: for m in 0..permutations {
        let order = permutation(seed, m as u64, n);
        let mut coalition = Coalition::empty(n).expect("player count validated");
        let mut prev = 0.0;
        let mut marginals = Vec::with_capacity(n);
        for (pos, &j) in order.iter().enumerate() {
            if budget.charge(1).is_err() {
                break 'outer;
            }
            coalition = coalition.insert(j).expect("index in range");
            let v = game.value(coalition);
            marginals.push((j, weights[pos] * (v - prev)));
            prev = v;
        }
        for (j, d) in marginals {
            acc[j] += d;
        }
        completed += 1;
    }

    let div = completed.max(1) as f64;
    let values = acc.iter().map(|a| a / div).collect();
    Ok(ContributionVector::new(values, "wshap", budget.used() - start))
}
