//! Owen inclusion-level sampling.
//!
//! Two readings of the same integral live here.
//!
//! [`owen_walk`] draws a Bernoulli(q) mask per inclusion level, walks the
//! selected players in random order accumulating incremental utilities, and
//! stops a walk once the optimistic remainder `Δ_left` drops below `η` —
//! nothing after that point can matter by more than `η` on a monotone
//! normalized game. Evaluations saved by truncation are recycled into fresh
//! walks, cycling the levels round-robin, until the shared meter is full,
//! so a valuation round always spends its exact `n·M` budget.
//!
//! [`owen_strict`] instead evaluates an antithetic present/absent twin pair
//! for *every* player of each sampled mask. It is unbiased (inclusion
//! probabilities are sampled uniformly within each of the `Q` level strata,
//! so no grid discretization bias remains) and serves as the analysis-grade
//! reference; it is not where the truncation savings come from.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::budget::BudgetMeter;
use crate::coalition::Coalition;
use crate::estimators::{invalid, single_player, EstimatorError};
use crate::game::{ContributionVector, Game, NormalizedGame};
use crate::rng::{substream, walk_stream, Lane};

/// How walk sums are turned into per-player estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WalkNormalization {
    /// Divide each level's sums by that level's walk count and average the
    /// levels. Verbatim pseudocode behaviour: players absent from a mask
    /// contribute zero, so an additive game comes out scaled by the mean
    /// inclusion probability.
    Paper,
    /// Divide player j's total by the number of walks that actually visited
    /// j. Debiases the inclusion factor; default for ranking experiments.
    Visited,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OwenConfig {
    /// Number of inclusion levels `Q`; the grid is exactly {1/Q, …, 1}.
    pub q_levels: usize,
    /// Nominal draws per level `M`; actual walk counts are budget-driven.
    pub draws_per_level: usize,
    /// Truncation tolerance `η ∈ [0, 1]` (utilities are normalized).
    pub eta: f64,
    pub normalization: WalkNormalization,
    pub seed: u64,
}

impl OwenConfig {
    fn validate(&self) -> Result<(), EstimatorError> {
        if self.q_levels == 0 {
            return Err(invalid("q_levels", "must be at least 1"));
        }
        if self.draws_per_level == 0 {
            return Err(invalid("draws_per_level", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(invalid("eta", format!("{} outside [0, 1]", self.eta)));
        }
        Ok(())
    }

    /// The meter limit this configuration is sized for: `n · Q · M`.
    pub fn nominal_budget(&self, n: usize) -> u64 {
        (n * self.q_levels * self.draws_per_level) as u64
    }
}

/// One truncated walk at a fixed inclusion level.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkRecord {
    /// Inclusion probability of this walk's mask.
    pub q: f64,
    /// Players actually visited, in visit order.
    pub visited: Vec<usize>,
    /// Incremental utility per visited player, aligned with `visited`.
    /// The increments telescope: their sum is the utility of the last
    /// evaluated coalition.
    pub increments: Vec<f64>,
    /// η rule fired while selected players were still unvisited.
    pub truncated: bool,
    /// The shared meter ran out mid-walk.
    pub cut_by_budget: bool,
    /// Utility of the coalition after the last evaluated insertion.
    pub final_value: f64,
}

/// Runs a single walk, charging the meter one evaluation per visited player.
fn run_walk(
    game: &dyn Game,
    q: f64,
    eta: f64,
    budget: &BudgetMeter,
    mask_rng: &mut ChaCha8Rng,
    order_rng: &mut ChaCha8Rng,
) -> WalkRecord {
    let n = game.player_count();
    let mut selected: Vec<usize> = (0..n).filter(|_| mask_rng.random::<f64>() < q).collect();
    selected.shuffle(order_rng);

    let mut coalition = Coalition::empty(n).expect("player count validated");
    let mut delta_left = 1.0;
    let mut v_prev = 0.0;
    let mut visited = Vec::with_capacity(selected.len());
    let mut increments = Vec::with_capacity(selected.len());
    let mut truncated = false;
    let mut cut_by_budget = false;
    let mut final_value = 0.0;

    for (pos, &j) in selected.iter().enumerate() {
        if budget.charge(1).is_err() {
            cut_by_budget = true;
            break;
        }
        coalition = coalition.insert(j).expect("selected index in range");
        let v = game.value(coalition);
        let h = v - v_prev;
        visited.push(j);
        increments.push(h);
        final_value = v;
        delta_left -= h;
        if delta_left < eta {
            truncated = pos + 1 < selected.len();
            break;
        }
        v_prev = v;
    }

    WalkRecord { q, visited, increments, truncated, cut_by_budget, final_value }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OwenWalkStats {
    pub walks_per_level: Vec<u64>,
    pub total_walks: u64,
    /// Walks that stopped on the η rule with selected players remaining.
    pub truncated_walks: u64,
    /// Walks cut because the meter ran dry mid-walk.
    pub budget_cut_walks: u64,
    /// Walks whose Bernoulli mask selected nobody.
    pub empty_walks: u64,
}

/// Owen sampling with η-truncation and budget recycling.
///
/// Requires a normalized game (the `Δ_left ← 1` bound assumes `ν(N) = 1`)
/// and spends the meter exactly: `budget.used() == budget.limit()` on
/// return. Walk randomness is addressed by `(seed, level, walk)`, which is
/// what makes the single-level case bit-identical to [`super::mc_shapley`]
/// under a shared seed.
pub fn owen_walk(
    game: &NormalizedGame,
    cfg: &OwenConfig,
    budget: &BudgetMeter,
) -> Result<ContributionVector, EstimatorError> {
    owen_walk_detailed(game, cfg, budget).map(|(cv, _)| cv)
}

/// [`owen_walk`] plus walk-level diagnostics.
pub fn owen_walk_detailed(
    game: &NormalizedGame,
    cfg: &OwenConfig,
    budget: &BudgetMeter,
) -> Result<(ContributionVector, OwenWalkStats), EstimatorError> {
    cfg.validate()?;
    if budget.remaining() == 0 {
        return Err(EstimatorError::ZeroBudget);
    }
    let n = game.player_count();
    super::check_players(n)?;
    if n == 1 {
        let cv = single_player(game, Some(budget), "owen")?;
        return Ok((cv, OwenWalkStats { walks_per_level: vec![0], ..Default::default() }));
    }

    let levels = cfg.q_levels;
    let mut sums = vec![vec![0.0f64; n]; levels];
    let mut visits = vec![vec![0u64; n]; levels];
    let mut walk_index = vec![0u64; levels];
    let mut stats = OwenWalkStats { walks_per_level: vec![0; levels], ..Default::default() };
    let start_used = budget.used();

    // Cycle the levels round-robin until the meter is full. The grid always
    // contains q = 1, whose mask selects everyone, so every cycle consumes
    // budget and the loop terminates.
    'spend: loop {
        for level in 0..levels {
            if budget.is_exhausted() {
                break 'spend;
            }
            let q = (level + 1) as f64 / levels as f64;
            let idx = walk_index[level];
            walk_index[level] += 1;
            let mut mask_rng = substream(cfg.seed, walk_stream(level, idx, Lane::Mask));
            let mut order_rng = substream(cfg.seed, walk_stream(level, idx, Lane::Order));
            let record = run_walk(game, q, cfg.eta, budget, &mut mask_rng, &mut order_rng);

            stats.walks_per_level[level] += 1;
            stats.total_walks += 1;
            if record.truncated {
                stats.truncated_walks += 1;
            }
            if record.cut_by_budget {
                stats.budget_cut_walks += 1;
            }
            if record.visited.is_empty() && !record.cut_by_budget {
                stats.empty_walks += 1;
            }
            for (&j, &h) in record.visited.iter().zip(&record.increments) {
                sums[level][j] += h;
                visits[level][j] += 1;
            }
        }
    }

    let values: Vec<f64> = match cfg.normalization {
        WalkNormalization::Paper => (0..n)
            .map(|j| {
                let mut acc = 0.0;
                for (level_sums, &walks) in sums.iter().zip(&stats.walks_per_level) {
                    if walks > 0 {
                        acc += level_sums[j] / walks as f64;
                    }
                }
                acc / levels as f64
            })
            .collect(),
        WalkNormalization::Visited => (0..n)
            .map(|j| {
                let total: f64 = (0..levels).map(|l| sums[l][j]).sum();
                let count: u64 = (0..levels).map(|l| visits[l][j]).sum();
                if count == 0 {
                    0.0
                } else {
                    total / count as f64
                }
            })
            .collect(),
    };

    let evals_used = budget.used() - start_used;
    Ok((ContributionVector::new(values, "owen", evals_used), stats))
}

/// Strict Owen estimator over antithetic present/absent twins.
///
/// For each of `draws_per_level` masks at each of `q_levels` strata it
/// evaluates the twin pair `ν(S∪{j})` / `ν(S∖{j})` for every player, at a
/// cost of `n+1` evaluations per mask (the base coalition is shared). The
/// inclusion probability of each mask is drawn uniformly within its level
/// stratum, so the estimate is unbiased for the Shapley value of the game.
pub fn owen_strict(
    game: &dyn Game,
    q_levels: usize,
    draws_per_level: usize,
    seed: u64,
) -> Result<ContributionVector, EstimatorError> {
    owen_strict_metered(game, q_levels, draws_per_level, seed, None)
}

/// [`owen_strict`] with an optional meter; masks that cannot be fully paid
/// for are dropped and the average is taken over completed masks.
pub fn owen_strict_metered(
    game: &dyn Game,
    q_levels: usize,
    draws_per_level: usize,
    seed: u64,
    budget: Option<&BudgetMeter>,
) -> Result<ContributionVector, EstimatorError> {
    if q_levels == 0 {
        return Err(invalid("q_levels", "must be at least 1"));
    }
    if draws_per_level == 0 {
        return Err(invalid("draws_per_level", "must be at least 1"));
    }
    let n = game.player_count();
    super::check_players(n)?;
    if n == 1 {
        return single_player(game, budget, "owen-strict");
    }

    let charge = |k: u64| -> bool {
        match budget {
            Some(meter) => meter.charge(k).is_ok(),
            None => true,
        }
    };

    let mut acc = vec![0.0f64; n];
    let mut completed: u64 = 0;
    let mut evals: u64 = 0;
    let mut diffs = vec![0.0f64; n];

    'levels: for level in 0..q_levels {
        let mut rng = substream(seed, walk_stream(level, 0, Lane::Mask));
        for _ in 0..draws_per_level {
            let q = (level as f64 + rng.random::<f64>()) / q_levels as f64;
            let mut mask = Coalition::empty(n).expect("player count validated");
            for j in 0..n {
                if rng.random::<f64>() < q {
                    mask = mask.insert(j).expect("index in range");
                }
            }
            if !charge(1) {
                break 'levels;
            }
            let v_base = game.value(mask);
            evals += 1;
            let mut paid = true;
            for (j, diff) in diffs.iter_mut().enumerate() {
                if !charge(1) {
                    paid = false;
                    break;
                }
                evals += 1;
                *diff = if mask.contains(j) {
                    v_base - game.value(mask.remove(j).expect("index in range"))
                } else {
                    game.value(mask.insert(j).expect("index in range")) - v_base
                };
            }
            if !paid {
                break 'levels;
            }
            for (a, d) in acc.iter_mut().zip(&diffs) {
                *a += d;
            }
            completed += 1;
        }
    }

    let div = completed.max(1) as f64;
    let values = acc.iter().map(|a| a / div).collect();
    Ok(ContributionVector::new(values, "owen-strict", evals))
}
