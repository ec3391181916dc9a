//! The server round loop: select clients, train locally, value the
//! participants under a fixed utility budget, aggregate by contribution,
//! repeat.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{
    aggregate, shapfed_wa_weights, softmax_weights, AggregationError,
    AggregationWeights, AggregatorKind, ModelParams,
};
use crate::budget::BudgetMeter;
use crate::coalition::Coalition;
use crate::estimators::{evaluate_contributions, EstimatorConfig, EstimatorError};
use crate::game::{CoalitionalGame, GameError, NormalizedGame};
use crate::rng::{derive_seed, substream};
use crate::selection::{select_clients, BanditState, SelectionConfig, SelectionError};
use crate::sim::data::{
    dirichlet_partition, longtail_subsample, split_eval_set, synthetic_blobs, DataError, Dataset,
};
use crate::sim::model::{local_train, LocalFit, ModelArch};

/// Weight kept on the stored contribution score when a fresh estimate
/// arrives; non-participants keep their stale score untouched.
pub const PHI_EMA_KEEP: f64 = 0.7;

const DOM_DATA: u64 = 1;
const DOM_LONGTAIL: u64 = 2;
const DOM_SPLIT: u64 = 3;
const DOM_PARTITION: u64 = 4;
const DOM_INIT: u64 = 5;
const DOM_SELECT: u64 = 6;
const DOM_TRAIN: u64 = 7;
const DOM_VALUE: u64 = 8;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("configuration invalid: {0}")]
    InvalidConfig(String),
}

/// Where the training corpus comes from.
#[derive(Clone, Debug)]
pub enum DataSpec {
    Synthetic { examples: usize, classes: usize, dim: usize, separation: f64 },
    /// A corpus loaded elsewhere (e.g. from IDX files).
    Provided(Arc<Dataset>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelSpec {
    Logistic,
    Mlp { hidden: usize },
}

/// Full simulation configuration for one experiment.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub data: DataSpec,
    pub n_clients: usize,
    pub rounds: u64,
    pub dirichlet_alpha: f64,
    pub imbalance_factor: f64,
    pub eval_fraction: f64,
    pub model: ModelSpec,
    pub lr: f64,
    pub batch: usize,
    pub local_epochs: usize,
    pub estimator: EstimatorConfig,
    pub selection: SelectionConfig,
    pub aggregator: AggregatorKind,
    /// Replace adaptive selection with uniform random selection.
    pub ablation: bool,
}

impl SimConfig {
    /// Whether any phase of a round consumes contribution estimates.
    fn needs_valuation(&self) -> bool {
        !self.ablation || self.aggregator == AggregatorKind::SoftmaxContrib
    }
}

/// Immutable per-seed context shared by every round.
pub struct RoundContext {
    pub data: Arc<Dataset>,
    pub shards: Arc<Vec<Vec<usize>>>,
    pub eval_indices: Arc<Vec<usize>>,
    pub arch: ModelArch,
}

/// Mutable server-side state carried across rounds.
pub struct ServerState {
    pub global: ModelParams,
    pub bandit: BanditState,
    /// Stored contribution scores, one per client, EMA-updated.
    pub phi: Vec<f64>,
    pub round: u64,
}

impl ServerState {
    pub fn new(global: ModelParams, n_clients: usize) -> Self {
        Self { global, bandit: BanditState::new(n_clients), phi: vec![0.0; n_clients], round: 0 }
    }
}

/// One line of the experiment log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    /// Participants, ascending.
    pub selected: Vec<usize>,
    /// Stored scores of all clients after this round's EMA update.
    pub phi: Vec<f64>,
    /// Aggregation weights of the participants, aligned with `selected`.
    pub alpha: Vec<f64>,
    /// Accuracy of the new global model on the held-out evaluation set.
    pub eval_accuracy: f64,
    /// Metered utility calls spent on valuation this round.
    pub utility_calls: u64,
}

/// The coalition utility: a coalition of participants is priced by the
/// evaluation-set accuracy of the uniform average of its members' local
/// models; the empty coalition is priced at the base model's accuracy.
fn round_game(
    ctx: &RoundContext,
    base: &ModelParams,
    updates: &[ModelParams],
) -> CoalitionalGame {
    let arch = ctx.arch;
    let data = Arc::clone(&ctx.data);
    let eval = Arc::clone(&ctx.eval_indices);
    let base = base.clone();
    let updates = updates.to_vec();
    CoalitionalGame::new(updates.len(), move |coalition: Coalition| {
        if coalition.is_empty() {
            return arch.accuracy(&base, &data, &eval);
        }
        let members: Vec<&ModelParams> = coalition.members().map(|i| &updates[i]).collect();
        let mut avg = vec![0.0f64; base.values().len()];
        let scale = 1.0 / members.len() as f64;
        for member in &members {
            for (a, v) in avg.iter_mut().zip(member.values()) {
                *a += scale * v;
            }
        }
        let model = ModelParams::new(Arc::clone(base.layout()), avg);
        arch.accuracy(&model, &data, &eval)
    })
}

/// Runs one communication round, mutating the server state and returning
/// the log record.
pub fn run_round(
    cfg: &SimConfig,
    ctx: &RoundContext,
    state: &mut ServerState,
    experiment_seed: u64,
) -> Result<RoundRecord, SimError> {
    let round = state.round;
    let k = cfg.selection.clients_per_round;

    // 1. Selection.
    let mut select_rng = substream(derive_seed(experiment_seed, DOM_SELECT, round), 0);
    let mut selected = if cfg.ablation {
        rand::seq::index::sample(&mut select_rng, cfg.n_clients, k).into_vec()
    } else {
        let picked = select_clients(&state.phi, &mut state.bandit, &cfg.selection, &mut select_rng)?;
        state.bandit.advance_round();
        picked
    };
    selected.sort_unstable();

    // 2. Local training from the current global model.
    let updates: Vec<ModelParams> = selected
        .iter()
        .map(|&client| {
            let seed = derive_seed(
                experiment_seed,
                DOM_TRAIN,
                round * cfg.n_clients as u64 + client as u64,
            );
            let LocalFit { params, .. } = local_train(
                ctx.arch,
                &state.global,
                &ctx.data,
                &ctx.shards[client],
                cfg.local_epochs,
                cfg.lr,
                cfg.batch,
                seed,
            );
            params
        })
        .collect();

    // 3–4. Valuation of the participants under the round budget, on the
    // normalized utility.
    let mut utility_calls = 0u64;
    let mut round_phi: Option<Vec<f64>> = None;
    if cfg.needs_valuation() {
        let game = round_game(ctx, &state.global, &updates);
        let normalized = NormalizedGame::tolerant(game)?;
        let budget = BudgetMeter::new(cfg.estimator.round_budget(k));
        let value_seed = derive_seed(experiment_seed, DOM_VALUE, round);
        let contributions =
            evaluate_contributions(&cfg.estimator, &normalized, &budget, value_seed)?;
        utility_calls = budget.used();
        // 6a. EMA update of the stored scores for participants only.
        for (slot, &client) in selected.iter().enumerate() {
            state.phi[client] =
                PHI_EMA_KEEP * state.phi[client] + (1.0 - PHI_EMA_KEEP) * contributions.values[slot];
        }
        round_phi = Some(contributions.values);
    }

    // 5. Aggregation over the participants.
    let alpha = match cfg.aggregator {
        AggregatorKind::SoftmaxContrib => {
            let phi = round_phi.as_ref().expect("softmax aggregation requires valuation");
            softmax_weights(phi)?
        }
        AggregatorKind::FedAvg => AggregationWeights::uniform(updates.len())?,
        AggregatorKind::ShapFedWa => cosine_head_weights(ctx, &state.global, &updates)?,
    };
    state.global = aggregate(&updates, &alpha)?;

    // 7. Log.
    let eval_accuracy = ctx.arch.accuracy(&state.global, &ctx.data, &ctx.eval_indices);
    let record = RoundRecord {
        round,
        selected,
        phi: state.phi.clone(),
        alpha: alpha.as_slice().to_vec(),
        eval_accuracy,
        utility_calls,
    };
    state.round += 1;
    Ok(record)
}

/// Per-class cosine weights on the classifier-head update directions,
/// averaged over classes.
fn cosine_head_weights(
    ctx: &RoundContext,
    base: &ModelParams,
    updates: &[ModelParams],
) -> Result<AggregationWeights, SimError> {
    let segment = ctx.arch.head_segment();
    let classes = ctx.arch.classes();
    let width = ctx.arch.head_width();
    let base_head = base.segment(segment).expect("layout has the head segment");
    let deltas: Vec<Vec<f64>> = updates
        .iter()
        .map(|u| {
            u.segment(segment)
                .expect("layout has the head segment")
                .iter()
                .zip(base_head)
                .map(|(a, b)| a - b)
                .collect()
        })
        .collect();

    let k = updates.len();
    let mut mean_weights = vec![0.0f64; k];
    for class in 0..classes {
        let rows: Vec<Vec<f64>> =
            deltas.iter().map(|d| d[class * width..(class + 1) * width].to_vec()).collect();
        let reference: Vec<f64> = (0..width)
            .map(|d| rows.iter().map(|r| r[d]).sum::<f64>() / k as f64)
            .collect();
        let class_weights = shapfed_wa_weights(&rows, &reference)?;
        for (m, w) in mean_weights.iter_mut().zip(&class_weights) {
            *m += w / classes as f64;
        }
    }
    // Mean of per-class simplex vectors; renormalize away float drift.
    let total: f64 = mean_weights.iter().sum();
    for w in &mut mean_weights {
        *w /= total;
    }
    Ok(AggregationWeights::new(mean_weights)?)
}

/// Everything produced by one seed's run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub initial_accuracy: f64,
    pub final_accuracy: f64,
    pub records: Vec<RoundRecord>,
}

/// An experiment across seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub runs: Vec<SeedRun>,
    pub mean_final_accuracy: f64,
    pub std_final_accuracy: f64,
}

fn validate(cfg: &SimConfig) -> Result<(), SimError> {
    let mut problems = Vec::new();
    if cfg.n_clients == 0 {
        problems.push("n_clients must be positive".to_string());
    }
    if cfg.selection.clients_per_round == 0 || cfg.selection.clients_per_round > cfg.n_clients {
        problems.push(format!(
            "clients_per_round {} outside [1, n_clients = {}]",
            cfg.selection.clients_per_round, cfg.n_clients
        ));
    }
    if !(0.0..=1.0).contains(&cfg.selection.epsilon) {
        problems.push(format!("epsilon {} outside [0, 1]", cfg.selection.epsilon));
    }
    if cfg.selection.confidence_c <= 0.0 {
        problems.push(format!("confidence_c {} must be positive", cfg.selection.confidence_c));
    }
    if cfg.selection.tau < 0.0 {
        problems.push(format!("tau {} must be non-negative", cfg.selection.tau));
    }
    if cfg.dirichlet_alpha <= 0.0 {
        problems.push(format!("dirichlet_alpha {} must be positive", cfg.dirichlet_alpha));
    }
    if !(cfg.imbalance_factor > 0.0 && cfg.imbalance_factor <= 1.0) {
        problems.push(format!("imbalance_factor {} outside (0, 1]", cfg.imbalance_factor));
    }
    if !(cfg.eval_fraction > 0.0 && cfg.eval_fraction < 1.0) {
        problems.push(format!("eval_fraction {} outside (0, 1)", cfg.eval_fraction));
    }
    if cfg.lr < 0.0 {
        problems.push(format!("lr {} must be non-negative", cfg.lr));
    }
    if cfg.batch == 0 {
        problems.push("batch must be positive".to_string());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(SimError::InvalidConfig(problems.join("; ")))
    }
}

/// Builds the per-seed data pipeline: eval split off the original corpus,
/// long-tail transform of the training side, then Dirichlet shards.
///
/// The evaluation set is carved out of the corpus *before* the long-tail
/// transform, so it keeps the original class balance and stays completely
/// isolated from everything the clients train on.
pub fn prepare_context(cfg: &SimConfig, seed: u64) -> Result<RoundContext, SimError> {
    let data: Arc<Dataset> = match &cfg.data {
        DataSpec::Synthetic { examples, classes, dim, separation } => {
            let mut rng = substream(derive_seed(seed, DOM_DATA, 0), 0);
            Arc::new(synthetic_blobs(*examples, *classes, *dim, *separation, &mut rng)?)
        }
        DataSpec::Provided(data) => Arc::clone(data),
    };
    let all: Vec<usize> = (0..data.len()).collect();
    let (train_pool, eval) = split_eval_set(
        &data,
        &all,
        cfg.eval_fraction,
        &mut substream(derive_seed(seed, DOM_SPLIT, 0), 0),
    )?;
    let kept = longtail_subsample(
        &data,
        &train_pool,
        cfg.imbalance_factor,
        &mut substream(derive_seed(seed, DOM_LONGTAIL, 0), 0),
    )?;
    let shards = dirichlet_partition(
        &data,
        &kept,
        cfg.n_clients,
        cfg.dirichlet_alpha,
        &mut substream(derive_seed(seed, DOM_PARTITION, 0), 0),
    )?;
    let arch = match cfg.model {
        ModelSpec::Logistic => ModelArch::Logistic { dim: data.dim(), classes: data.classes() },
        ModelSpec::Mlp { hidden } => {
            ModelArch::Mlp { dim: data.dim(), hidden, classes: data.classes() }
        }
    };
    Ok(RoundContext { data, shards: Arc::new(shards), eval_indices: Arc::new(eval), arch })
}

/// Runs all rounds for one seed.
pub fn run_single_seed(cfg: &SimConfig, seed: u64) -> Result<SeedRun, SimError> {
    validate(cfg)?;
    let ctx = prepare_context(cfg, seed)?;
    let global = ctx.arch.init_params(derive_seed(seed, DOM_INIT, 0));
    let initial_accuracy = ctx.arch.accuracy(&global, &ctx.data, &ctx.eval_indices);
    let mut state = ServerState::new(global, cfg.n_clients);
    let mut records = Vec::with_capacity(cfg.rounds as usize);
    for _ in 0..cfg.rounds {
        records.push(run_round(cfg, &ctx, &mut state, seed)?);
    }
    let final_accuracy = records.last().map_or(initial_accuracy, |r| r.eval_accuracy);
    Ok(SeedRun { seed, initial_accuracy, final_accuracy, records })
}

/// Runs the experiment across seeds and summarizes final accuracies.
pub fn run_experiment(cfg: &SimConfig, seeds: &[u64]) -> Result<ExperimentReport, SimError> {
    if seeds.is_empty() {
        return Err(SimError::InvalidConfig("at least one seed is required".to_string()));
    }
    let runs: Vec<SeedRun> =
        seeds.iter().map(|&s| run_single_seed(cfg, s)).collect::<Result<_, _>>()?;
    let finals: Vec<f64> = runs.iter().map(|r| r.final_accuracy).collect();
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let std = if finals.len() < 2 {
        0.0
    } else {
        let var = finals.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (finals.len() - 1) as f64;
        var.sqrt()
    };
    Ok(ExperimentReport { runs, mean_final_accuracy: mean, std_final_accuracy: std })
}
