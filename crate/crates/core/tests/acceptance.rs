//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use fedval::baselines::{afl_round, fedavg_round, qfedavg_round, qfedsgd_round, AflState, QConfig};
use fedval::data::{Behavior, ClientProfile, TabularDataset};
use fedval::fedval::{ascending_order, fedval_round, rank_update, FedValConfig, RankState, RankingConfig};
use fedval::harness::{run_experiment, run_sweep, ExperimentConfig, SweepSpec, SweepSummary, SweepVariant};
use fedval::metrics::{accuracy, eod, spd, ClientScore, ObjectiveKind, ObjectiveSpec, ScoreVector};
use fedval::model::{client_update, gradient, loss, ModelParams, TrainConfig};
use fedval::seed::client_seed;
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scenario(r: &mut rand_chacha::ChaCha8Rng, k: usize, dim: usize) -> (Vec<ClientProfile<f64>>, TabularDataset<f64>) {
    let shards = (0..k)
        .map(|_| {
            let n = r.random_range(20..80);
            random_dataset(r, n, dim)
        })
        .collect();
    (cooperative_clients(shards), random_dataset(r, 150, dim))
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    for case in 0..100 {
        let n = r.random_range(4..=500);
        let dim = r.random_range(1..6);
        let scale = r.random_range(0.1..4.0);
        let d = random_dataset(&mut r, n, dim);
        let p = random_params(&mut r, dim, scale);
        let pred = oracle_predictions(&p, &d);
        let pairs = [
            (accuracy(&p, &d).unwrap(), oracle_accuracy(&pred, &d)),
            (spd(&p, &d).unwrap(), oracle_spd(&pred, &d)),
            (eod(&p, &d).unwrap(), oracle_eod(&pred, &d)),
        ];
        if pairs.iter().any(|(a, b)| a.to_bits() != b.to_bits()) {
            return Err(format!("case {case}: {pairs:?}"));
        }
    }
    let t = start.elapsed();
    check(t < Duration::from_secs(5), format!("100 cases bit-exact in {t:.2?}"))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let h = 1e-6;
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = r.random_range(4..200);
        let dim = r.random_range(1..8);
        let d = random_dataset(&mut r, n, dim);
        let p = random_params(&mut r, dim, 1.0);
        let g: Vec<f64> = gradient(&p, &d).unwrap().as_params().coords().collect();
        let coords: Vec<f64> = p.coords().collect();
        let at = |c: &[f64]| loss(&ModelParams::new(c[..dim].to_vec(), c[dim]), &d).unwrap();
        let fd: Vec<f64> = (0..coords.len())
            .map(|i| {
                let (mut up, mut down) = (coords.clone(), coords.clone());
                up[i] += h;
                down[i] -= h;
                (at(&up) - at(&down)) / (2.0 * h)
            })
            .collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&diff) / norm(&g).max(norm(&fd)));
    }
    let t = start.elapsed();
    check(
        worst < 1e-5 && t < Duration::from_secs(5),
        format!("worst relative error {worst:.2e} in {t:.2?}"),
    )
}

fn fedavg_reduction() -> Outcome {
    let mut r = rng(3);
    let data = random_dataset(&mut r, 120, 4);
    let val = random_dataset(&mut r, 200, 4);
    let clients: Vec<ClientProfile<f64>> = (0..5)
        .map(|id| {
            let mut c = ClientProfile::new(id, Behavior::Cooperative, data.clone());
            c.rng_stream = 0;
            c
        })
        .collect();
    let cfg = FedValConfig::new(ObjectiveSpec::all_unit(), RankingConfig::disabled());
    let (mut a, mut b) = (ModelParams::zeros(4), ModelParams::zeros(4));
    let mut worst = 0.0f64;
    for round in 1..=10u64 {
        let train = TrainConfig::new(1, 16, 0.1, round);
        a = fedval_round(&a, &clients, &val, &cfg, &train, &RankState::new()).unwrap().params;
        b = fedavg_round(&b, &clients, &train).unwrap().params;
        worst = worst.max(max_abs_diff(&a, &b));
    }
    check(worst <= 1e-12, format!("max coordinate gap {worst:.1e} over 10 rounds"))
}

fn ranking_arithmetic() -> Outcome {
    let mut r = rng(4);
    let mut worst_inc = 0.0f64;
    let mut worst_mass = 0.0f64;
    for k in [3usize, 10] {
        for (mu, rho) in [(2.0, 1.5), (0.001, 10.0)] {
            let cfg = RankingConfig::new(mu, rho);
            for _ in 0..50 {
                let sv = ScoreVector {
                    entries: (0..k)
                        .map(|c| {
                            let s = r.random::<f64>();
                            ClientScore { client: c, composite: s, objectives: vec![(ObjectiveKind::Accuracy, s)] }
                        })
                        .collect(),
                };
                let fresh = RankState::new();
                let next = rank_update(&sv, &fresh, &cfg).unwrap();
                for (i, c) in ascending_order(&sv).into_iter().enumerate() {
                    worst_inc = worst_inc.max((next.get(c) - mu * rho.powi(i as i32)).abs());
                }
                let closed = mu * (rho.powi(k as i32) - 1.0) / (rho - 1.0);
                worst_mass = worst_mass.max((next.total() - closed).abs());
            }
        }
    }
    check(
        worst_inc <= 1e-9 && worst_mass <= 1e-9,
        format!("max increment error {worst_inc:.1e}, max mass error {worst_mass:.1e}"),
    )
}

fn weight_simplex() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    let mut rounds = 0;
    let mut check_round = |weights: Vec<Option<f64>>| -> Result<(), String> {
        let w: Vec<f64> = weights.into_iter().map(|p| p.ok_or("missing p_k")).collect::<Result<_, _>>()?;
        if w.iter().any(|&p| p < 0.0) {
            return Err(format!("negative weight in {w:?}"));
        }
        worst = worst.max((w.iter().sum::<f64>() - 1.0).abs());
        rounds += 1;
        Ok(())
    };
    let q = QConfig::new(2.0, 1.0, 0.1);
    for strategy in 0..6 {
        // 20 random scenarios of 10 chained rounds each.
        for _ in 0..20 {
            let k = r.random_range(2..8);
            let (clients, val) = scenario(&mut r, k, 3);
            let mut global = ModelParams::zeros(3);
            let mut rank = RankState::new();
            let mut afl = AflState::uniform(k, 0.1);
            for round in 0..10 {
                let train = TrainConfig::new(1, 8, 0.1, r.random::<u64>() ^ round);
                let (params, report) = match strategy {
                    0 | 1 => {
                        let ranking = if strategy == 0 { RankingConfig::new(2.0, 1.5) } else { RankingConfig::disabled() };
                        let cfg = FedValConfig::new(ObjectiveSpec::all_unit(), ranking);
                        let out = fedval_round(&global, &clients, &val, &cfg, &train, &rank).map_err(|e| e.to_string())?;
                        rank = out.state;
                        (out.params, out.report)
                    }
                    2 => {
                        let out = fedavg_round(&global, &clients, &train).map_err(|e| e.to_string())?;
                        (out.params, out.report)
                    }
                    3 => {
                        let out = qfedsgd_round(&global, &clients, &q).map_err(|e| e.to_string())?;
                        (out.params, out.report)
                    }
                    4 => {
                        let out = qfedavg_round(&global, &clients, &q, &train).map_err(|e| e.to_string())?;
                        (out.params, out.report)
                    }
                    _ => {
                        let (out, next) = afl_round(&global, &clients, &afl, &train).map_err(|e| e.to_string())?;
                        afl = next;
                        (out.params, out.report)
                    }
                };
                check_round(report.weights())?;
                global = params;
            }
        }
    }
    check(worst <= 1e-12, format!("{rounds} rounds over 6 strategies, max |sum - 1| {worst:.1e}"))
}

fn q_zero() -> Outcome {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = r.random_range(1..8);
        let l = r.random_range(0.5..4.0);
        let (clients, _) = scenario(&mut r, k, 3);
        let w = random_params(&mut r, 3, 0.5);
        let sgd = qfedsgd_round(&w, &clients, &QConfig::new(0.0, l, 0.1)).unwrap();
        let mut sum = ModelParams::zeros(3);
        for c in &clients {
            sum = sum.zip_with(&gradient(&w, &c.data).unwrap().as_params(), |a, b| a + b).unwrap();
        }
        let expect = w.zip_with(&sum, |a, g| a - g / (k as f64 * l)).unwrap();
        worst = worst.max(max_abs_diff(&sgd.params, &expect));

        let train = TrainConfig::new(1, 8, 0.1, r.random());
        let avg = qfedavg_round(&w, &clients, &QConfig::new(0.0, l, 0.1), &train).unwrap();
        let mut mean = ModelParams::zeros(3);
        for c in &clients {
            let local = client_update(&w, &c.data, &train.with_seed(client_seed(train.seed, c.rng_stream))).unwrap();
            mean = mean.zip_with(&local, |a, b| a + b / k as f64).unwrap();
        }
        worst = worst.max(max_abs_diff(&avg.params, &mean));
    }
    check(worst <= 1e-10, format!("100 cases, max coordinate gap {worst:.1e}"))
}

fn objective_scaling() -> Outcome {
    let mut r = rng(7);
    let (clients, val) = scenario(&mut r, 6, 3);
    let spec = ObjectiveSpec::new([(ObjectiveKind::Accuracy, 1.0), (ObjectiveKind::Spd, 0.7), (ObjectiveKind::Eod, 1.3)]).unwrap();
    let mut worst = 0.0f64;
    for alpha in [0.1, 3.0, 100.0] {
        let scaled = spec.scaled(alpha).unwrap();
        for ranked in [false, true] {
            let ranking = if ranked { RankingConfig::new(2.0, 1.5) } else { RankingConfig::disabled() };
            let base_cfg = FedValConfig::new(spec.clone(), ranking);
            let scaled_cfg = FedValConfig::new(scaled.clone(), ranking);
            let mut global = ModelParams::zeros(3);
            let (mut sa, mut sb) = (RankState::new(), RankState::new());
            for round in 0..20 {
                let train = TrainConfig::new(1, 8, 0.1, round);
                let a = fedval_round(&global, &clients, &val, &base_cfg, &train, &sa).unwrap();
                let b = fedval_round(&global, &clients, &val, &scaled_cfg, &train, &sb).unwrap();
                if ascending_order(&a.scores) != ascending_order(&b.scores) {
                    return Err(format!("order changed at alpha {alpha}, round {round}"));
                }
                if !ranked {
                    for (p, q) in a.weights.as_slice().iter().zip(b.weights.as_slice()) {
                        worst = worst.max((p - q).abs());
                    }
                } else if a.weights != b.weights {
                    return Err(format!("ranked weights changed at alpha {alpha}, round {round}"));
                }
                global = a.params;
                sa = a.state;
                sb = b.state;
            }
        }
    }
    check(worst <= 1e-12, format!("orders identical, max p_k gap {worst:.1e}"))
}

const TREND_BASE: &str = r#"{
    "data": {"kind": "synthetic", "n": 4000, "dim": 8, "group_positive_rates": [0.5, 0.5], "seed": 2022},
    "clients": [{"behavior": "uncooperative", "count": 10, "skew": {"ratio": 0.2}}],
    "strategy": "fedval",
    "objectives": [{"kind": "accuracy", "weight": 1.0}, {"kind": "spd", "weight": 1.0}, {"kind": "eod", "weight": 1.0}],
    "ranking": {"enabled": true, "initial_step": 2.0, "step_size": 1.5},
    "train": {"local_epochs": 1, "batch_size": 32, "learning_rate": 0.1},
    "rounds": 60,
    "seed": 0
}"#;

const COUNTS: [usize; 5] = [0, 3, 5, 8, 10];
const SEEDS: [u64; 3] = [1, 2, 3];

fn trend_sweep(out: &Path) -> (SweepSummary, Duration) {
    let base = ExperimentConfig::from_json(TREND_BASE).unwrap();
    let spec = SweepSpec {
        cooperative_counts: COUNTS.to_vec(),
        variants: vec![
            SweepVariant { name: "ranking".into(), ranking: true },
            SweepVariant { name: "no-ranking".into(), ranking: false },
        ],
        replicate_seeds: SEEDS.to_vec(),
        uncooperative_skew: None,
    };
    let start = Instant::now();
    let summary = run_sweep(&spec, &base, Some(out)).unwrap();
    (summary, start.elapsed())
}

fn final_spd(s: &SweepSummary, count: usize, variant: &str, seed: u64) -> f64 {
    let cell = s.cells_for(count, variant).find(|c| c.seed == seed).expect("cell exists");
    cell.result.as_ref().expect("cell ran").spd
}

fn bias_trend(s: &SweepSummary, elapsed: Duration) -> Outcome {
    if let Some(c) = s.cells.iter().find(|c| c.result.is_err()) {
        return Err(format!("cell failed: {:?}", c.result));
    }
    let means: Vec<f64> = COUNTS.iter().map(|&c| s.row(c, "ranking").unwrap().spd.0).collect();
    let monotone = means.windows(2).all(|w| w[1] <= w[0] + 0.02);
    let drops = SEEDS
        .iter()
        .filter(|&&seed| final_spd(s, 0, "ranking", seed) - final_spd(s, 10, "ranking", seed) >= 0.05)
        .count();
    let (ranked3, plain3) = (s.row(3, "ranking").unwrap().spd.0, s.row(3, "no-ranking").unwrap().spd.0);
    check(
        monotone && drops >= 2 && ranked3 <= plain3 && elapsed < Duration::from_secs(180),
        format!(
            "ranking SPD means {:?}, endpoint drop in {drops}/3, count-3 ranking {ranked3:.3} vs no-ranking {plain3:.3}, {elapsed:.1?}",
            means.iter().map(|m| (m * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn adversary_weights(s: &SweepSummary) -> Outcome {
    let k = s.clients as f64;
    let mut detail = Vec::new();
    let mut ok = true;
    for cell in s.cells_for(8, "ranking") {
        let (coop, unco) = (cell.tail_weight_cooperative.unwrap_or(f64::NAN), cell.tail_weight_uncooperative.unwrap_or(f64::NAN));
        ok &= unco < 1.0 / k && coop > 1.0 / k;
        detail.push(format!("seed {}: cooperative {coop:.4} skewed {unco:.4}", cell.seed));
    }
    check(ok && detail.len() == SEEDS.len(), detail.join("; "))
}

fn determinism(sweep_dir: &Path) -> Outcome {
    let replay_root = tempfile::tempdir().unwrap();
    let mut compared = 0;
    for entry in std::fs::read_dir(sweep_dir.join("cells")).unwrap() {
        let cell = entry.unwrap().path();
        let mut cfg = ExperimentConfig::from_file(cell.join("resolved_config.json")).unwrap();
        let target = replay_root.path().join(cell.file_name().unwrap());
        cfg.out_dir = Some(target.clone());
        run_experiment(&cfg).map_err(|e| e.to_string())?;
        let a = std::fs::read(cell.join("rounds.csv")).unwrap();
        let b = std::fs::read(target.join("rounds.csv")).unwrap();
        if a != b {
            return Err(format!("{} differs on replay", cell.display()));
        }
        compared += 1;
    }
    // The baselines go through the same replay.
    for strategy in ["fedavg", "qfedsgd", "qfedavg", "afl"] {
        let mut v: serde_json::Value = serde_json::from_str(TREND_BASE).unwrap();
        v["strategy"] = strategy.into();
        v["rounds"] = 15.into();
        v["q"] = serde_json::json!({"q": 5.0, "lipschitz": 1.0, "learning_rate": 0.01});
        let mut cfg: ExperimentConfig = serde_json::from_value(v).unwrap();
        let first = replay_root.path().join(format!("{strategy}-a"));
        cfg.out_dir = Some(first.clone());
        run_experiment(&cfg).map_err(|e| e.to_string())?;
        let mut again = ExperimentConfig::from_file(first.join("resolved_config.json")).unwrap();
        let second = replay_root.path().join(format!("{strategy}-b"));
        again.out_dir = Some(second.clone());
        run_experiment(&again).map_err(|e| e.to_string())?;
        if std::fs::read(first.join("rounds.csv")).unwrap() != std::fs::read(second.join("rounds.csv")).unwrap() {
            return Err(format!("{strategy} differs on replay"));
        }
        compared += 1;
    }
    check(compared == COUNTS.len() * 2 * SEEDS.len() + 4, format!("{compared} runs replayed byte-identically"))
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("metric oracle equivalence", metric_oracle()),
        ("gradient check", gradient_check()),
        ("fedval to fedavg reduction", fedavg_reduction()),
        ("ranking arithmetic", ranking_arithmetic()),
        ("weight simplex", weight_simplex()),
        ("q = 0 reductions", q_zero()),
        ("objective scale invariance", objective_scaling()),
    ];
    let sweep_dir = tempfile::tempdir().unwrap();
    let (summary, elapsed) = trend_sweep(sweep_dir.path());
    results.push(("bias-mitigation trend", bias_trend(&summary, elapsed)));
    results.push(("adversary down-weighting", adversary_weights(&summary)));
    results.push(("determinism", determinism(sweep_dir.path())));

    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
