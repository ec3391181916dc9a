//! Sampled contribution estimators under a shared evaluation budget.
//!
//! All estimators price players of a *zero-grounded* game: the empty
//! coalition is taken to be worth 0 and is never evaluated, which is what
//! keeps the per-round call count at `n·M` exactly. Games produced by
//! [`crate::game::normalize`] satisfy this by construction; the analytic
//! catalog in [`crate::games`] does too. Normalize first if yours does not.
//!
//! The registry ids are `"owen"`, `"owen-strict"`, `"mc"`, `"gtg"`,
//! `"banzhaf"` and `"wshap"`.

mod banzhaf;
mod owen;
mod permutation;

pub use banzhaf::data_banzhaf;
pub use owen::{
    owen_strict, owen_strict_metered, owen_walk, owen_walk_detailed, OwenConfig, OwenWalkStats,
    WalkNormalization, WalkRecord,
};
pub use permutation::{
    gtg_shapley, gtg_shapley_with_grand, mc_shapley, position_weights, weighted_shap,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::{BudgetError, BudgetMeter};
use crate::coalition::Coalition;
use crate::game::{ContributionVector, Game, NormalizedGame};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("estimator given a meter with zero remaining budget")]
    ZeroBudget,
    #[error("estimators price 1..={max} players, got {n}", max = crate::coalition::MAX_PLAYERS)]
    PlayerCount { n: usize },
    #[error("invalid estimator parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("unknown estimator {0:?}; known ids: owen, owen-strict, mc, gtg, banzhaf, wshap")]
    UnknownEstimator(String),
    #[error(transparent)]
    Budget(#[from] BudgetError),
}

fn invalid(name: &'static str, reason: impl Into<String>) -> EstimatorError {
    EstimatorError::InvalidParameter { name, reason: reason.into() }
}

fn check_players(n: usize) -> Result<(), EstimatorError> {
    if n == 0 || n > crate::coalition::MAX_PLAYERS {
        return Err(EstimatorError::PlayerCount { n });
    }
    Ok(())
}

/// A single-player game needs no sampling: the player is owed the whole
/// normalized surplus `ν(N) − ν(∅) = ν(N)`, read off with one evaluation.
fn single_player(
    game: &dyn Game,
    budget: Option<&BudgetMeter>,
    id: &str,
) -> Result<ContributionVector, EstimatorError> {
    if let Some(b) = budget {
        b.charge(1)?;
    }
    let v = game.value(Coalition::full(1).expect("one player fits"));
    Ok(ContributionVector::new(vec![v], id, 1))
}

/// The sampled estimators, addressable by string id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    OwenWalk,
    OwenStrict,
    MonteCarlo,
    Gtg,
    Banzhaf,
    WeightedShap,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::OwenWalk,
        EstimatorKind::OwenStrict,
        EstimatorKind::MonteCarlo,
        EstimatorKind::Gtg,
        EstimatorKind::Banzhaf,
        EstimatorKind::WeightedShap,
    ];

    pub fn id(self) -> &'static str {
        match self {
            EstimatorKind::OwenWalk => "owen",
            EstimatorKind::OwenStrict => "owen-strict",
            EstimatorKind::MonteCarlo => "mc",
            EstimatorKind::Gtg => "gtg",
            EstimatorKind::Banzhaf => "banzhaf",
            EstimatorKind::WeightedShap => "wshap",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for EstimatorKind {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| EstimatorError::UnknownEstimator(s.to_string()))
    }
}

/// One bundle of knobs covering every estimator in the registry.
///
/// `sample_budget` is the per-player call budget `M` of the budget-parity
/// protocol: a valuation round allows `n·M` utility calls in total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    /// Inclusion levels `Q` for the Owen estimators.
    pub q_levels: usize,
    /// Per-player utility-call budget `M`.
    pub sample_budget: usize,
    /// Truncation tolerance for the Owen walk.
    pub eta: f64,
    pub normalization: WalkNormalization,
    /// Skip threshold for the truncation-guided permutation estimator.
    pub gtg_eps: f64,
    pub wshap_alpha: f64,
    pub wshap_beta: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kind: EstimatorKind::OwenWalk,
            q_levels: 2,
            sample_budget: 4,
            eta: 0.05,
            normalization: WalkNormalization::Visited,
            gtg_eps: 0.05,
            wshap_alpha: 1.0,
            wshap_beta: 1.0,
        }
    }
}

impl EstimatorConfig {
    /// Utility-call budget for one valuation round over `n` players.
    pub fn round_budget(&self, n: usize) -> u64 {
        (n * self.sample_budget) as u64
    }

    fn draws_per_level(&self) -> usize {
        (self.sample_budget / self.q_levels.max(1)).max(1)
    }
}

/// Runs the configured estimator on a normalized game under the meter.
pub fn evaluate_contributions(
    cfg: &EstimatorConfig,
    game: &NormalizedGame,
    budget: &BudgetMeter,
    seed: u64,
) -> Result<ContributionVector, EstimatorError> {
    let n = game.player_count();
    match cfg.kind {
        EstimatorKind::OwenWalk => {
            let walk_cfg = OwenConfig {
                q_levels: cfg.q_levels,
                draws_per_level: cfg.draws_per_level(),
                eta: cfg.eta,
                normalization: cfg.normalization,
                seed,
            };
            owen_walk(game, &walk_cfg, budget)
        }
        EstimatorKind::OwenStrict => {
            // Each mask costs n+1 evaluations; fit within the n·M parity cap.
            let per_level =
                (n * cfg.sample_budget / (cfg.q_levels.max(1) * (n + 1))).max(1);
            owen_strict_metered(game, cfg.q_levels, per_level, seed, Some(budget))
        }
        EstimatorKind::MonteCarlo => mc_shapley(game, cfg.sample_budget, budget, seed),
        EstimatorKind::Gtg => {
            // ν(N) of a normalized game is known without an evaluation.
            gtg_shapley_with_grand(
                game,
                cfg.gtg_eps,
                cfg.sample_budget,
                budget,
                seed,
                Some(game.grand_value()),
            )
        }
        EstimatorKind::Banzhaf => data_banzhaf(game, cfg.sample_budget, budget, seed),
        EstimatorKind::WeightedShap => {
            weighted_shap(game, cfg.wshap_alpha, cfg.wshap_beta, cfg.sample_budget, budget, seed)
        }
    }
}
