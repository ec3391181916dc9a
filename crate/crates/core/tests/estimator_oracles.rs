//! Estimator behaviour against the exact oracles on catalog games.

use fedowen_core::budget::BudgetMeter;
use fedowen_core::estimators::{
    data_banzhaf, evaluate_contributions, gtg_shapley, mc_shapley, owen_strict, owen_walk,
    owen_walk_detailed, weighted_shap, EstimatorConfig, EstimatorKind, OwenConfig,
    WalkNormalization,
};
use fedowen_core::game::{exact_banzhaf, exact_shapley, normalize, NormalizedGame};
use fedowen_core::games::random_monotone_game;

fn max_abs_err(estimate: &[f64], exact: &[f64]) -> f64 {
    estimate
        .iter()
        .zip(exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[test]
fn strict_owen_tracks_the_exact_oracle_within_a_percent() {
    // 6-player random monotone game, Q = 20, M = 20000 draws per level.
    let oracle = exact_shapley(&random_monotone_game(6, 7).unwrap()).unwrap();
    let game = random_monotone_game(6, 7).unwrap();
    let estimate = owen_strict(&game, 20, 20_000, 1).unwrap();
    assert!(
        max_abs_err(&estimate.values, &oracle.values) <= 0.01,
        "strict Owen error {} above 0.01",
        max_abs_err(&estimate.values, &oracle.values)
    );
}

#[test]
fn strict_owen_is_mean_preserving_on_eight_player_games() {
    // Averaging independent runs must land within sampling noise of the
    // exact values; the 1e-12 absorbs float residue on near-exact games.
    let n = 8;
    let runs = 30u64;
    for game_seed in [61, 62] {
        let oracle = exact_shapley(&random_monotone_game(n, game_seed).unwrap()).unwrap();
        let mut sums = vec![0.0f64; n];
        let mut squares = vec![0.0f64; n];
        for run_seed in 0..runs {
            let game = random_monotone_game(n, game_seed).unwrap();
            let estimate = owen_strict(&game, 10, 500, 9_000 + run_seed).unwrap();
            for (i, v) in estimate.values.iter().enumerate() {
                sums[i] += v;
                squares[i] += v * v;
            }
        }
        for i in 0..n {
            let mean = sums[i] / runs as f64;
            let variance = (squares[i] / runs as f64 - mean * mean).max(0.0);
            let sem = (variance / runs as f64).sqrt();
            assert!(
                (mean - oracle.values[i]).abs() <= 3.0 * sem + 1e-12,
                "game {game_seed} player {i} drifted beyond 3 standard errors"
            );
        }
    }
}

#[test]
fn mc_shapley_tracks_the_exact_oracle() {
    let oracle = exact_shapley(&random_monotone_game(6, 7).unwrap()).unwrap();
    for seed in [1, 2, 3] {
        let game = random_monotone_game(6, 7).unwrap();
        let budget = BudgetMeter::new(6 * 5_000);
        let estimate = mc_shapley(&game, 5_000, &budget, seed).unwrap();
        assert!(
            max_abs_err(&estimate.values, &oracle.values) <= 0.02,
            "mc error above 0.02 at seed {seed}"
        );
    }
}

#[test]
fn data_banzhaf_tracks_half_the_banzhaf_oracle() {
    let oracle = exact_banzhaf(&random_monotone_game(6, 7).unwrap()).unwrap();
    let half: Vec<f64> = oracle.values.iter().map(|b| b / 2.0).collect();
    for seed in [1, 2, 3] {
        let game = random_monotone_game(6, 7).unwrap();
        let budget = BudgetMeter::new(u64::MAX);
        let estimate = data_banzhaf(&game, 20_000, &budget, seed).unwrap();
        assert!(
            max_abs_err(&estimate.values, &half) <= 0.02,
            "banzhaf error above 0.02 at seed {seed}"
        );
    }
}

#[test]
fn strict_owen_error_shrinks_as_draws_double() {
    // Mean absolute error over 20 seeds at M ∈ {100, 400, 1600}, Q = 10.
    let oracle = exact_shapley(&random_monotone_game(6, 3).unwrap()).unwrap();
    let mut errors = Vec::new();
    for draws in [100usize, 400, 1600] {
        let mut total = 0.0;
        for seed in 0..20u64 {
            let game = random_monotone_game(6, 3).unwrap();
            let estimate = owen_strict(&game, 10, draws, seed).unwrap();
            total += estimate
                .values
                .iter()
                .zip(&oracle.values)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / 6.0;
        }
        errors.push(total / 20.0);
    }
    assert!(
        errors[0] > errors[1] && errors[1] > errors[2],
        "errors should fall as draws double: {errors:?}"
    );
}

#[test]
fn truncated_walk_stays_within_eta_of_the_oracle_in_expectation() {
    // Visited-mode estimates on monotone normalized games: averaging many
    // independent runs must land within η plus sampling noise of the exact
    // values.
    let eta = 0.05;
    for game_seed in [5, 6] {
        let oracle = exact_shapley(&random_monotone_game(6, game_seed).unwrap()).unwrap();
        let runs = 40;
        let mut means = [0.0f64; 6];
        let mut sq = [0.0f64; 6];
        for seed in 0..runs {
            let game = normalize(random_monotone_game(6, game_seed).unwrap()).unwrap();
            let cfg = OwenConfig {
                q_levels: 2,
                draws_per_level: 256,
                eta,
                normalization: WalkNormalization::Visited,
                seed,
            };
            let budget = BudgetMeter::new(cfg.nominal_budget(6));
            let cv = owen_walk(&game, &cfg, &budget).unwrap();
            for (i, v) in cv.values.iter().enumerate() {
                means[i] += v;
                sq[i] += v * v;
            }
        }
        for i in 0..6 {
            let mean = means[i] / runs as f64;
            let var = (sq[i] / runs as f64 - mean * mean).max(0.0);
            let sem = (var / runs as f64).sqrt();
            let gap = (mean - oracle.values[i]).abs();
            assert!(
                gap <= eta + 3.0 * sem,
                "player {i} of game {game_seed}: gap {gap} > η + 3σ = {}",
                eta + 3.0 * sem
            );
        }
    }
}

#[test]
fn all_estimators_are_bit_deterministic() {
    let cfgs: Vec<EstimatorConfig> = EstimatorKind::ALL
        .into_iter()
        .map(|kind| EstimatorConfig { kind, sample_budget: 8, ..EstimatorConfig::default() })
        .collect();
    for cfg in cfgs {
        let run = || {
            let game = NormalizedGame::new(random_monotone_game(7, 19).unwrap()).unwrap();
            let budget = BudgetMeter::new(cfg.round_budget(7));
            evaluate_contributions(&cfg, &game, &budget, 123).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b, "{} not deterministic", cfg.kind);
    }
}

#[test]
fn budget_parity_holds_for_every_registry_estimator() {
    // Parity protocol: n = 10 players, M = 4 calls per player. The walk
    // recycles to land exactly on n·M; everything else stays at or under
    // it.
    let n = 10;
    let m = 4;
    for kind in EstimatorKind::ALL {
        let cfg = EstimatorConfig { kind, sample_budget: m, ..EstimatorConfig::default() };
        let game = NormalizedGame::new(random_monotone_game(n, 31).unwrap()).unwrap();
        let budget = BudgetMeter::new(cfg.round_budget(n));
        let cv = evaluate_contributions(&cfg, &game, &budget, 5).unwrap();
        assert!(budget.used() <= budget.limit());
        assert_eq!(budget.used(), cv.evals_used);
        match kind {
            EstimatorKind::OwenWalk => {
                assert_eq!(budget.used(), (n * m) as u64, "owen walk must fill the meter")
            }
            _ => assert!(
                budget.used() <= (n * m) as u64,
                "{kind} exceeded the parity budget"
            ),
        }
    }
}

#[test]
fn walk_truncation_recycles_into_extra_walks() {
    // On a majority game with a meaningful η, truncation fires a lot, so
    // the recycled budget buys clearly more walks than the nominal plan.
    let game = normalize(fedowen_core::games::majority_game(10).unwrap()).unwrap();
    let cfg = OwenConfig {
        q_levels: 2,
        draws_per_level: 32,
        eta: 0.05,
        normalization: WalkNormalization::Visited,
        seed: 2,
    };
    let budget = BudgetMeter::new(cfg.nominal_budget(10));
    let (_, stats) = owen_walk_detailed(&game, &cfg, &budget).unwrap();
    assert_eq!(budget.used(), budget.limit());
    assert!(stats.truncated_walks as f64 >= 0.1 * stats.total_walks as f64);
    assert!(stats.total_walks > 64, "recycling should buy extra walks, got {}", stats.total_walks);
}

#[test]
fn walk_rank_order_matches_the_oracle_on_random_games() {
    // Spearman rank correlation between visited-mode walk estimates and
    // the exact values, averaged over seeds.
    let mut rho_total = 0.0;
    let mut count = 0.0;
    for game_seed in [5, 6, 7, 8] {
        let oracle = exact_shapley(&random_monotone_game(6, game_seed).unwrap()).unwrap();
        for seed in 0..5u64 {
            let game = normalize(random_monotone_game(6, game_seed).unwrap()).unwrap();
            let cfg = OwenConfig {
                q_levels: 2,
                draws_per_level: 32,
                eta: 0.05,
                normalization: WalkNormalization::Visited,
                seed,
            };
            let budget = BudgetMeter::new((6 * 64) as u64);
            let cv = owen_walk(&game, &cfg, &budget).unwrap();
            rho_total += spearman(&cv.values, &oracle.values);
            count += 1.0;
        }
    }
    let mean_rho = rho_total / count;
    assert!(mean_rho >= 0.9, "mean Spearman ρ {mean_rho} below 0.9");
}

#[test]
fn shared_streams_couple_the_permutation_estimators() {
    for seed in 0..20u64 {
        let n = 5;
        let m = 30;
        let game = random_monotone_game(n, seed).unwrap();
        let budget = BudgetMeter::new((n * m) as u64);
        let mc = mc_shapley(&game, m, &budget, seed).unwrap();

        let game = random_monotone_game(n, seed).unwrap();
        let budget = BudgetMeter::new((n * m) as u64 + 1);
        let gtg = gtg_shapley(&game, 0.0, m, &budget, seed).unwrap();
        assert_eq!(mc.values, gtg.values);

        let game = random_monotone_game(n, seed).unwrap();
        let budget = BudgetMeter::new((n * m) as u64);
        let ws = weighted_shap(&game, 1.0, 1.0, m, &budget, seed).unwrap();
        assert_eq!(mc.values, ws.values);
    }
}

#[test]
fn single_level_walk_is_mc_under_a_shared_seed() {
    let n = 6;
    let m = 50;
    let seed = 77;
    let game = normalize(random_monotone_game(n, 9).unwrap()).unwrap();
    let cfg = OwenConfig {
        q_levels: 1,
        draws_per_level: m,
        eta: 0.0,
        normalization: WalkNormalization::Paper,
        seed,
    };
    let budget = BudgetMeter::new((n * m) as u64);
    let walk = owen_walk(&game, &cfg, &budget).unwrap();

    let game = normalize(random_monotone_game(n, 9).unwrap()).unwrap();
    let budget = BudgetMeter::new((n * m) as u64);
    let mc = mc_shapley(&game, m, &budget, seed).unwrap();
    assert_eq!(walk.values, mc.values);
    assert_eq!(walk.evals_used, mc.evals_used);
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut out = vec![0.0; xs.len()];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = rank as f64;
    }
    out
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for i in 0..a.len() {
        cov += (ra[i] - mean) * (rb[i] - mean);
        var_a += (ra[i] - mean).powi(2);
        var_b += (rb[i] - mean).powi(2);
    }
    cov / (var_a.sqrt() * var_b.sqrt())
}
