//! Implementations behind the CLI subcommands, callable as a library.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use fedowen_core::budget::BudgetMeter;
use fedowen_core::estimators::{
    evaluate_contributions, owen_strict, EstimatorConfig, EstimatorKind, WalkNormalization,
};
use fedowen_core::game::{exact_shapley, normalize, ContributionVector};
use fedowen_core::games::standard_game;
use fedowen_core::selection::SelectionConfig;
use fedowen_core::sim::{run_experiment, DataSpec, ExperimentReport, ModelSpec, SimConfig};

use crate::config::{parse_config, DatasetKind, ExperimentConfig, ModelKind};
use crate::idx::load_idx_dataset;
use crate::output::write_results;

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    parse_config(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Maps the file-level configuration onto the simulator configuration,
/// loading external data if necessary.
pub fn build_sim_config(cfg: &ExperimentConfig) -> Result<SimConfig> {
    let data = match cfg.dataset {
        DatasetKind::Synthetic => DataSpec::Synthetic {
            examples: cfg.synthetic_examples,
            classes: cfg.synthetic_classes,
            dim: cfg.synthetic_dim,
            separation: cfg.synthetic_sep,
        },
        DatasetKind::Idx => {
            let images = cfg.idx_images.as_ref().expect("validated");
            let labels = cfg.idx_labels.as_ref().expect("validated");
            DataSpec::Provided(Arc::new(load_idx_dataset(images, labels)?))
        }
    };
    Ok(SimConfig {
        data,
        n_clients: cfg.n_clients,
        rounds: cfg.rounds,
        dirichlet_alpha: cfg.dirichlet_alpha,
        imbalance_factor: cfg.imbalance_factor,
        eval_fraction: cfg.eval_fraction,
        model: match cfg.model {
            ModelKind::Logreg => ModelSpec::Logistic,
            ModelKind::Mlp => ModelSpec::Mlp { hidden: cfg.hidden },
        },
        lr: cfg.lr,
        batch: cfg.batch,
        local_epochs: cfg.local_epochs,
        estimator: EstimatorConfig {
            kind: cfg.estimator,
            q_levels: cfg.q_levels,
            sample_budget: cfg.sample_budget,
            eta: cfg.eta,
            normalization: cfg.normalization_mode,
            gtg_eps: cfg.gtg_eps,
            wshap_alpha: cfg.wshap_alpha,
            wshap_beta: cfg.wshap_beta,
        },
        selection: SelectionConfig::new(
            cfg.epsilon,
            cfg.confidence_c,
            cfg.tau,
            cfg.clients_per_round,
        ),
        aggregator: cfg.aggregator,
        ablation: cfg.ablation,
    })
}

/// Runs the experiment described by a config file and writes the results.
pub fn run_from_file(path: &Path) -> Result<(ExperimentReport, Vec<PathBuf>)> {
    let cfg = load_config(path)?;
    run_with_config(&cfg)
}

pub fn run_with_config(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Vec<PathBuf>)> {
    let sim = build_sim_config(cfg)?;
    let report = run_experiment(&sim, &cfg.seeds)?;
    let written = write_results(&report, &cfg.to_key_values(), cfg.n_clients, &cfg.output_dir)?;
    Ok((report, written))
}

pub fn print_report(report: &ExperimentReport, written: &[PathBuf]) {
    for run in &report.runs {
        println!(
            "seed {:>4}: eval accuracy {:.4} -> {:.4} over {} rounds",
            run.seed,
            run.initial_accuracy,
            run.final_accuracy,
            run.records.len()
        );
    }
    println!(
        "mean final accuracy {:.4} (std {:.4})",
        report.mean_final_accuracy, report.std_final_accuracy
    );
    for path in written {
        println!("wrote {}", path.display());
    }
}

pub struct ValueArgs {
    pub game: String,
    pub n: usize,
    pub seed: u64,
    pub estimator: String,
    pub q_levels: usize,
    pub samples: usize,
    pub eta: f64,
    pub mode: String,
    pub gtg_eps: f64,
    pub wshap_alpha: f64,
    pub wshap_beta: f64,
}

/// Runs a standalone estimator on a catalog game and prints the estimates
/// next to the exact Shapley values (when the oracle is affordable).
pub fn value_command(args: &ValueArgs) -> Result<String> {
    let kind = EstimatorKind::from_str(&args.estimator)?;
    let normalization = match args.mode.as_str() {
        "paper" => WalkNormalization::Paper,
        "visited" => WalkNormalization::Visited,
        other => bail!("normalization mode must be paper or visited, got {other:?}"),
    };

    let estimate: ContributionVector = match kind {
        EstimatorKind::OwenStrict => {
            let game = standard_game(&args.game, args.n, args.seed)?;
            owen_strict(&game, args.q_levels, args.samples, args.seed)?
        }
        _ => {
            let game = normalize(standard_game(&args.game, args.n, args.seed)?)?;
            let est_cfg = EstimatorConfig {
                kind,
                q_levels: args.q_levels,
                sample_budget: args.samples,
                eta: args.eta,
                normalization,
                gtg_eps: args.gtg_eps,
                wshap_alpha: args.wshap_alpha,
                wshap_beta: args.wshap_beta,
            };
            let budget = BudgetMeter::new(est_cfg.round_budget(args.n));
            evaluate_contributions(&est_cfg, &game, &budget, args.seed)?
        }
    };

    let exact = if args.n <= fedowen_core::game::MAX_EXACT_PLAYERS {
        Some(exact_shapley(&standard_game(&args.game, args.n, args.seed)?)?)
    } else {
        None
    };

    let mut out = String::new();
    out.push_str(&format!(
        "game {} (n = {}), estimator {} ({} utility calls)\n",
        args.game, args.n, kind, estimate.evals_used
    ));
    match &exact {
        Some(oracle) => {
            out.push_str("player   estimate      exact        |err|\n");
            for i in 0..args.n {
                out.push_str(&format!(
                    "{:>6}  {:>10.6}  {:>10.6}  {:>10.6}\n",
                    i,
                    estimate.values[i],
                    oracle.values[i],
                    (estimate.values[i] - oracle.values[i]).abs()
                ));
            }
        }
        None => {
            out.push_str("player   estimate  (exact oracle skipped: n > 20)\n");
            for i in 0..args.n {
                out.push_str(&format!("{:>6}  {:>10.6}\n", i, estimate.values[i]));
            }
        }
    }
    Ok(out)
}

/// Re-runs a base config once per value of the swept parameter, writing one
/// summary per value into its own subdirectory.
pub fn sweep_command(
    config_path: &Path,
    param: &str,
    values: &[String],
) -> Result<Vec<(String, ExperimentReport)>> {
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    let base = load_config(config_path)?;
    let mut results = Vec::new();
    for value in values {
        let mut cfg = base.clone();
        match param {
            "epsilon" => {
                cfg.epsilon = value
                    .parse::<f64>()
                    .with_context(|| format!("epsilon value {value:?} is not a number"))?;
                if !(0.0..=1.0).contains(&cfg.epsilon) {
                    bail!("epsilon value {value} outside [0, 1]");
                }
            }
            "Q" => {
                cfg.q_levels = value
                    .parse::<usize>()
                    .with_context(|| format!("Q value {value:?} is not an integer"))?;
                if cfg.q_levels == 0 {
                    bail!("Q must be at least 1");
                }
            }
            other => bail!("sweep supports --param epsilon or Q, got {other:?}"),
        }
        cfg.output_dir = base.output_dir.join(format!("sweep_{param}_{value}"));
        let (report, _) = run_with_config(&cfg)?;
        println!(
            "{param} = {value}: mean final accuracy {:.4} (std {:.4})",
            report.mean_final_accuracy, report.std_final_accuracy
        );
        results.push((value.clone(), report));
    }
    Ok(results)
}
