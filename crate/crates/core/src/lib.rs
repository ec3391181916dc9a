//! Contribution valuation for cooperative games plus a desk-scale federated
//! learning simulator built on top of it.
//!
//! The crate has two halves:
//!
//! * **Valuation.** [`game`] defines coalitional games with exact Shapley
//!   and Banzhaf oracles (≤ 20 players); [`estimators`] holds the sampled
//!   estimators — an Owen inclusion-level walk with η-truncation and budget
//!   recycling, a strict antithetic-pair Owen estimator, Monte-Carlo
//!   permutation Shapley, truncation-guided Shapley, Monte-Carlo Banzhaf
//!   and Beta-weighted permutation Shapley — all metered by a shared
//!   [`budget::BudgetMeter`].
//! * **Simulation.** [`sim`] partitions data across synthetic clients
//!   (long-tail + Dirichlet), trains small models locally, prices client
//!   coalitions on a server-held evaluation set, and runs the full round
//!   loop with ε-greedy bandit selection ([`selection`]) and
//!   contribution-weighted aggregation ([`aggregation`]).
//!
//! Everything stochastic draws from counter-based ChaCha streams ([`rng`]),
//! so results are reproducible from `(config, seed)` alone.

pub mod aggregation;
pub mod budget;
pub mod coalition;
pub mod estimators;
pub mod game;
pub mod games;
pub mod rng;
pub mod selection;
pub mod sim;

pub use budget::{BudgetError, BudgetMeter};
pub use coalition::Coalition;
pub use game::{
    exact_banzhaf, exact_shapley, normalize, CoalitionalGame, ContributionVector, Game,
    NormalizedGame,
};
