//! Experiment configuration: a flat `key = value` document with an explicit
//! schema. Unknown keys are rejected and every violation is reported with
//! its line number — a silently ignored typo in a hyperparameter would
//! corrupt an experiment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use fedowen_core::aggregation::AggregatorKind;
use fedowen_core::estimators::{EstimatorKind, WalkNormalization};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigIssue {
    /// 1-based line number; 0 marks a cross-field or default-value issue.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

/// Every problem found in a config document, not just the first.
#[derive(Debug, Error, PartialEq, Eq)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.issues.len())?;
        for issue in &self.issues {
            writeln!(f, "  {issue}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Synthetic,
    Idx,
}

impl DatasetKind {
    pub fn id(self) -> &'static str {
        match self {
            DatasetKind::Synthetic => "synthetic",
            DatasetKind::Idx => "idx",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Logreg,
    Mlp,
}

impl ModelKind {
    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Logreg => "logreg",
            ModelKind::Mlp => "mlp",
        }
    }
}

/// The resolved experiment configuration with defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    pub idx_images: Option<PathBuf>,
    pub idx_labels: Option<PathBuf>,
    pub synthetic_examples: usize,
    pub synthetic_classes: usize,
    pub synthetic_dim: usize,
    pub synthetic_sep: f64,
    pub n_clients: usize,
    pub clients_per_round: usize,
    pub rounds: u64,
    pub dirichlet_alpha: f64,
    pub imbalance_factor: f64,
    pub eval_fraction: f64,
    pub model: ModelKind,
    pub hidden: usize,
    pub lr: f64,
    pub batch: usize,
    pub local_epochs: usize,
    pub estimator: EstimatorKind,
    pub q_levels: usize,
    pub sample_budget: usize,
    pub eta: f64,
    pub normalization_mode: WalkNormalization,
    pub gtg_eps: f64,
    pub wshap_alpha: f64,
    pub wshap_beta: f64,
    pub epsilon: f64,
    pub confidence_c: f64,
    pub tau: f64,
    pub aggregator: AggregatorKind,
    pub seeds: Vec<u64>,
    pub ablation: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Synthetic,
            idx_images: None,
            idx_labels: None,
            synthetic_examples: 6000,
            synthetic_classes: 5,
            synthetic_dim: 20,
            synthetic_sep: 2.0,
            n_clients: 100,
            clients_per_round: 10,
            rounds: 100,
            dirichlet_alpha: 0.1,
            imbalance_factor: 1.0,
            eval_fraction: 0.01,
            model: ModelKind::Logreg,
            hidden: 32,
            lr: 0.05,
            batch: 32,
            local_epochs: 1,
            estimator: EstimatorKind::OwenWalk,
            q_levels: 2,
            sample_budget: 4,
            eta: 0.05,
            normalization_mode: WalkNormalization::Visited,
            gtg_eps: 0.05,
            wshap_alpha: 1.0,
            wshap_beta: 1.0,
            epsilon: 0.1,
            confidence_c: 0.2,
            tau: 0.0,
            aggregator: AggregatorKind::SoftmaxContrib,
            seeds: vec![42],
            ablation: false,
            output_dir: PathBuf::from("results"),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "dataset",
    "idx_images",
    "idx_labels",
    "synthetic_examples",
    "synthetic_classes",
    "synthetic_dim",
    "synthetic_sep",
    "n_clients",
    "clients_per_round",
    "rounds",
    "dirichlet_alpha",
    "imbalance_factor",
    "eval_fraction",
    "model",
    "hidden",
    "lr",
    "batch",
    "local_epochs",
    "estimator",
    "Q",
    "M",
    "eta",
    "normalization_mode",
    "gtg_eps",
    "wshap_alpha",
    "wshap_beta",
    "epsilon",
    "confidence_c",
    "tau",
    "aggregator",
    "seeds",
    "ablation",
    "output_dir",
];

fn unquote(value: &str) -> &str {
    let v = value.trim();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

/// Parses and validates a flat config document; on failure every violated
/// key is reported with its line number.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut issues: Vec<ConfigIssue> = Vec::new();
    let mut key_lines: BTreeMap<String, usize> = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key_part, value_part)) = trimmed.split_once('=') else {
            issues.push(ConfigIssue {
                line,
                message: format!("expected `key = value`, got {trimmed:?}"),
            });
            continue;
        };
        let key = key_part.trim();
        let value = unquote(value_part);
        if !KNOWN_KEYS.contains(&key) {
            issues.push(ConfigIssue { line, message: format!("unknown key {key:?}") });
            continue;
        }
        if let Some(first) = key_lines.insert(key.to_string(), line) {
            issues.push(ConfigIssue {
                line,
                message: format!("duplicate key {key:?} (first set on line {first})"),
            });
            continue;
        }

        let mut fail = |message: String| issues.push(ConfigIssue { line, message });
        match key {
            "dataset" => match value {
                "synthetic" => cfg.dataset = DatasetKind::Synthetic,
                "idx" => cfg.dataset = DatasetKind::Idx,
                other => fail(format!("dataset must be synthetic or idx, got {other:?}")),
            },
            "idx_images" => cfg.idx_images = Some(PathBuf::from(value)),
            "idx_labels" => cfg.idx_labels = Some(PathBuf::from(value)),
            "synthetic_examples" => parse_into(value, key, &mut cfg.synthetic_examples, &mut fail),
            "synthetic_classes" => parse_into(value, key, &mut cfg.synthetic_classes, &mut fail),
            "synthetic_dim" => parse_into(value, key, &mut cfg.synthetic_dim, &mut fail),
            "synthetic_sep" => parse_into(value, key, &mut cfg.synthetic_sep, &mut fail),
            "n_clients" => parse_into(value, key, &mut cfg.n_clients, &mut fail),
            "clients_per_round" => parse_into(value, key, &mut cfg.clients_per_round, &mut fail),
            "rounds" => parse_into(value, key, &mut cfg.rounds, &mut fail),
            "dirichlet_alpha" => parse_into(value, key, &mut cfg.dirichlet_alpha, &mut fail),
            "imbalance_factor" => parse_into(value, key, &mut cfg.imbalance_factor, &mut fail),
            "eval_fraction" => parse_into(value, key, &mut cfg.eval_fraction, &mut fail),
            "model" => match value {
                "logreg" => cfg.model = ModelKind::Logreg,
                "mlp" => cfg.model = ModelKind::Mlp,
                other => fail(format!("model must be logreg or mlp, got {other:?}")),
            },
            "hidden" => parse_into(value, key, &mut cfg.hidden, &mut fail),
            "lr" => parse_into(value, key, &mut cfg.lr, &mut fail),
            "batch" => parse_into(value, key, &mut cfg.batch, &mut fail),
            "local_epochs" => parse_into(value, key, &mut cfg.local_epochs, &mut fail),
            "estimator" => match EstimatorKind::from_str(value) {
                Ok(kind) => cfg.estimator = kind,
                Err(e) => fail(e.to_string()),
            },
            "Q" => parse_into(value, key, &mut cfg.q_levels, &mut fail),
            "M" => parse_into(value, key, &mut cfg.sample_budget, &mut fail),
            "eta" => parse_into(value, key, &mut cfg.eta, &mut fail),
            "normalization_mode" => match value {
                "paper" => cfg.normalization_mode = WalkNormalization::Paper,
                "visited" => cfg.normalization_mode = WalkNormalization::Visited,
                other => {
                    fail(format!("normalization_mode must be paper or visited, got {other:?}"))
                }
            },
            "gtg_eps" => parse_into(value, key, &mut cfg.gtg_eps, &mut fail),
            "wshap_alpha" => parse_into(value, key, &mut cfg.wshap_alpha, &mut fail),
            "wshap_beta" => parse_into(value, key, &mut cfg.wshap_beta, &mut fail),
            "epsilon" => parse_into(value, key, &mut cfg.epsilon, &mut fail),
            "confidence_c" => parse_into(value, key, &mut cfg.confidence_c, &mut fail),
            "tau" => parse_into(value, key, &mut cfg.tau, &mut fail),
            "aggregator" => match AggregatorKind::from_str(value) {
                Ok(kind) => cfg.aggregator = kind,
                Err(e) => fail(e.to_string()),
            },
            "seeds" => match parse_seeds(value) {
                Ok(seeds) => cfg.seeds = seeds,
                Err(message) => fail(message),
            },
            "ablation" => match value {
                "true" => cfg.ablation = true,
                "false" => cfg.ablation = false,
                other => fail(format!("ablation must be true or false, got {other:?}")),
            },
            "output_dir" => cfg.output_dir = PathBuf::from(value),
            _ => unreachable!("key membership checked above"),
        }
    }

    validate(&cfg, &key_lines, &mut issues);
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { issues })
    }
}

fn parse_into<T: FromStr>(value: &str, key: &str, slot: &mut T, fail: &mut impl FnMut(String)) {
    match value.parse::<T>() {
        Ok(parsed) => *slot = parsed,
        Err(_) => fail(format!(
            "{key}: cannot parse {value:?} as {}",
            std::any::type_name::<T>()
        )),
    }
}

fn parse_seeds(value: &str) -> Result<Vec<u64>, String> {
    let seeds: Result<Vec<u64>, _> =
        value.split(',').map(|s| s.trim().parse::<u64>()).collect();
    match seeds {
        Ok(seeds) if !seeds.is_empty() => Ok(seeds),
        Ok(_) => Err("seeds must contain at least one value".to_string()),
        Err(_) => Err(format!("seeds: cannot parse {value:?} as a comma-separated u64 list")),
    }
}

fn validate(
    cfg: &ExperimentConfig,
    key_lines: &BTreeMap<String, usize>,
    issues: &mut Vec<ConfigIssue>,
) {
    let line_of = |key: &str| key_lines.get(key).copied().unwrap_or(0);
    let mut check = |ok: bool, key: &str, message: String| {
        if !ok {
            issues.push(ConfigIssue { line: line_of(key), message });
        }
    };

    check(
        (0.0..=1.0).contains(&cfg.epsilon),
        "epsilon",
        format!("epsilon {} outside [0, 1]", cfg.epsilon),
    );
    check(
        cfg.confidence_c > 0.0,
        "confidence_c",
        format!("confidence_c {} must be positive", cfg.confidence_c),
    );
    check(cfg.tau >= 0.0, "tau", format!("tau {} must be non-negative", cfg.tau));
    check(
        (0.0..=1.0).contains(&cfg.eta),
        "eta",
        format!("eta {} outside [0, 1]", cfg.eta),
    );
    check(cfg.q_levels >= 1, "Q", format!("Q {} must be at least 1", cfg.q_levels));
    check(cfg.sample_budget >= 1, "M", format!("M {} must be at least 1", cfg.sample_budget));
    check(cfg.gtg_eps >= 0.0, "gtg_eps", format!("gtg_eps {} must be non-negative", cfg.gtg_eps));
    check(
        cfg.wshap_alpha > 0.0 && cfg.wshap_beta > 0.0,
        "wshap_alpha",
        format!("wshap shapes ({}, {}) must be positive", cfg.wshap_alpha, cfg.wshap_beta),
    );
    check(cfg.n_clients >= 1, "n_clients", "n_clients must be at least 1".to_string());
    check(
        cfg.clients_per_round >= 1 && cfg.clients_per_round <= cfg.n_clients,
        "clients_per_round",
        format!(
            "clients_per_round {} outside [1, n_clients = {}]",
            cfg.clients_per_round, cfg.n_clients
        ),
    );
    check(
        cfg.dirichlet_alpha > 0.0,
        "dirichlet_alpha",
        format!("dirichlet_alpha {} must be positive", cfg.dirichlet_alpha),
    );
    check(
        cfg.imbalance_factor > 0.0 && cfg.imbalance_factor <= 1.0,
        "imbalance_factor",
        format!("imbalance_factor {} outside (0, 1]", cfg.imbalance_factor),
    );
    check(
        cfg.eval_fraction > 0.0 && cfg.eval_fraction < 1.0,
        "eval_fraction",
        format!("eval_fraction {} outside (0, 1)", cfg.eval_fraction),
    );
    check(cfg.lr >= 0.0, "lr", format!("lr {} must be non-negative", cfg.lr));
    check(cfg.batch >= 1, "batch", "batch must be at least 1".to_string());
    check(cfg.hidden >= 1, "hidden", "hidden must be at least 1".to_string());
    check(
        cfg.local_epochs >= 1,
        "local_epochs",
        "local_epochs must be at least 1".to_string(),
    );
    check(
        cfg.synthetic_examples >= 2 && cfg.synthetic_classes >= 1 && cfg.synthetic_dim >= 1,
        "synthetic_examples",
        "synthetic dataset needs at least 2 examples, 1 class and 1 dimension".to_string(),
    );
    if cfg.dataset == DatasetKind::Idx {
        check(
            cfg.idx_images.is_some(),
            "dataset",
            "dataset = idx requires idx_images".to_string(),
        );
        check(
            cfg.idx_labels.is_some(),
            "dataset",
            "dataset = idx requires idx_labels".to_string(),
        );
    }
}

impl ExperimentConfig {
    /// The resolved configuration as ordered key/value pairs; this is both
    /// the serialization format and the summary's config echo.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = vec![
            ("dataset".into(), format!("\"{}\"", self.dataset.id())),
            ("synthetic_examples".into(), self.synthetic_examples.to_string()),
            ("synthetic_classes".into(), self.synthetic_classes.to_string()),
            ("synthetic_dim".into(), self.synthetic_dim.to_string()),
            ("synthetic_sep".into(), self.synthetic_sep.to_string()),
            ("n_clients".into(), self.n_clients.to_string()),
            ("clients_per_round".into(), self.clients_per_round.to_string()),
            ("rounds".into(), self.rounds.to_string()),
            ("dirichlet_alpha".into(), self.dirichlet_alpha.to_string()),
            ("imbalance_factor".into(), self.imbalance_factor.to_string()),
            ("eval_fraction".into(), self.eval_fraction.to_string()),
            ("model".into(), format!("\"{}\"", self.model.id())),
            ("hidden".into(), self.hidden.to_string()),
            ("lr".into(), self.lr.to_string()),
            ("batch".into(), self.batch.to_string()),
            ("local_epochs".into(), self.local_epochs.to_string()),
            ("estimator".into(), format!("\"{}\"", self.estimator.id())),
            ("Q".into(), self.q_levels.to_string()),
            ("M".into(), self.sample_budget.to_string()),
            ("eta".into(), self.eta.to_string()),
            (
                "normalization_mode".into(),
                format!(
                    "\"{}\"",
                    match self.normalization_mode {
                        WalkNormalization::Paper => "paper",
                        WalkNormalization::Visited => "visited",
                    }
                ),
            ),
            ("gtg_eps".into(), self.gtg_eps.to_string()),
            ("wshap_alpha".into(), self.wshap_alpha.to_string()),
            ("wshap_beta".into(), self.wshap_beta.to_string()),
            ("epsilon".into(), self.epsilon.to_string()),
            ("confidence_c".into(), self.confidence_c.to_string()),
            ("tau".into(), self.tau.to_string()),
            ("aggregator".into(), format!("\"{}\"", self.aggregator.id())),
            (
                "seeds".into(),
                format!(
                    "\"{}\"",
                    self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
                ),
            ),
            ("ablation".into(), self.ablation.to_string()),
            ("output_dir".into(), format!("\"{}\"", self.output_dir.display())),
        ];
        if let Some(images) = &self.idx_images {
            out.insert(1, ("idx_images".into(), format!("\"{}\"", images.display())));
        }
        if let Some(labels) = &self.idx_labels {
            let at = if self.idx_images.is_some() { 2 } else { 1 };
            out.insert(at, ("idx_labels".into(), format!("\"{}\"", labels.display())));
        }
        out
    }

    /// Serializes back into the flat document format; `parse_config` on the
    /// output yields an equal config.
    pub fn to_flat_string(&self) -> String {
        let mut s = String::new();
        for (key, value) in self.to_key_values() {
            s.push_str(&key);
            s.push_str(" = ");
            s.push_str(&value);
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_document_yields_all_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.estimator, EstimatorKind::OwenWalk);
        assert_eq!(cfg.sample_budget, 4);
        assert_eq!(cfg.q_levels, 2);
        assert_eq!(cfg.epsilon, 0.1);
    }

    #[test]
    fn out_of_range_epsilon_is_reported_with_its_line() {
        let err = parse_config("rounds = 10\nepsilon = 1.5\n").unwrap_err();
        assert_eq!(err.issues.len(), 1);
        assert_eq!(err.issues[0].line, 2);
        assert!(err.issues[0].message.contains("epsilon"));
    }

    #[test]
    fn hundred_client_settings_parse_verbatim() {
        let cfg = parse_config("rounds = 100\nn_clients = 100\nclients_per_round = 10\n").unwrap();
        assert_eq!(cfg.rounds, 100);
        assert_eq!(cfg.n_clients, 100);
        assert_eq!(cfg.clients_per_round, 10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config("epsilonn = 0.2\n").unwrap_err();
        assert_eq!(err.issues[0].line, 1);
        assert!(err.issues[0].message.contains("unknown key"));
    }

    #[test]
    fn every_violation_is_listed() {
        let err = parse_config("epsilon = 2.0\nlr = -1\nbatch = 0\n").unwrap_err();
        assert_eq!(err.issues.len(), 3);
        let lines: Vec<usize> = err.issues.iter().map(|i| i.line).collect();
        assert_eq!(lines, vec![1, 2, 3]);
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err = parse_config("rounds = 5\nrounds = 6\n").unwrap_err();
        assert!(err.issues[0].message.contains("duplicate"));
        assert_eq!(err.issues[0].line, 2);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = parse_config("# a comment\n\nrounds = 7\n").unwrap();
        assert_eq!(cfg.rounds, 7);
    }

    #[test]
    fn cross_field_violations_point_at_the_culprit_line() {
        let err = parse_config("n_clients = 5\nclients_per_round = 9\n").unwrap_err();
        assert_eq!(err.issues[0].line, 2);
        assert!(err.issues[0].message.contains("clients_per_round"));
    }

    #[test]
    fn idx_dataset_requires_paths() {
        let err = parse_config("dataset = idx\n").unwrap_err();
        assert_eq!(err.issues.len(), 2);
        assert!(err.issues.iter().all(|i| i.message.contains("idx_")));
    }

    #[test]
    fn serialization_round_trips() {
        let text = "estimator = \"gtg\"\nM = 7\nseeds = \"1,2,9\"\nablation = true\nmodel = mlp\n";
        let cfg = parse_config(text).unwrap();
        let reparsed = parse_config(&cfg.to_flat_string()).unwrap();
        assert_eq!(cfg, reparsed);
    }

    proptest! {
        #[test]
        fn random_valid_configs_round_trip(
            rounds in 0u64..500,
            epsilon in 0.0f64..=1.0,
            lr in 0.0f64..2.0,
            q in 1usize..16,
            m in 1usize..64,
            tau in 0.0f64..0.2,
            seeds in proptest::collection::vec(any::<u64>(), 1..5),
            ablation in any::<bool>(),
        ) {
            let cfg = ExperimentConfig {
                rounds,
                epsilon,
                lr,
                q_levels: q,
                sample_budget: m,
                tau,
                seeds,
                ablation,
                ..ExperimentConfig::default()
            };
            let reparsed = parse_config(&cfg.to_flat_string()).unwrap();
            prop_assert_eq!(cfg, reparsed);
        }
    }
}
