//! Acceptance criteria. Each test prints one PASS/FAIL line; run with
//! `cargo test -p ssaas-core --test acceptance -- --nocapture` to see them.

use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use ssaas_core::consensus::{consensus_step, run_consensus, ConsensusParams, Decision};
use ssaas_core::scenario::{self, presets, run_repetition, DEFAULT_P_AV_GRID};
use ssaas_core::sensing::EnergyMeasurement;
use ssaas_core::topology::Topology;
use ssaas_core::trust::{TrustParams, TrustScheme, TrustState};
use ssaas_core::{rng_from_seed, AttackProfile, ScenarioConfig};

fn verdict(id: &str, ok: bool, detail: &str) {
    println!("[{}] {id}: {detail}", if ok { "PASS" } else { "FAIL" });
}

#[test]
fn ac1_one_attacker_decision_holds() {
    let config = presets::one_attacker();
    let start = Instant::now();
    let report = scenario::run_scenario(&config).unwrap();
    let elapsed = start.elapsed();

    let reps = report.repetitions.len();
    let present = report.summaries().filter(|s| s.decision == Decision::Present).count();
    let max_spread = report
        .repetitions
        .iter()
        .map(|r| r.run.honest_spread(r.run.iterations_used))
        .fold(0.0, f64::max);
    let max_attacker_trust = report
        .repetitions
        .iter()
        .flat_map(|r| {
            let trust = r.run.final_trust().clone();
            r.run.honest_nodes().into_iter().map(move |i| trust.trust(i, 5))
        })
        .fold(0.0, f64::max);

    let ok = reps == 100
        && present == reps
        && max_spread <= 0.01
        && max_attacker_trust < 0.1
        && elapsed < Duration::from_secs(1);
    verdict(
        "AC1 one-attacker reproduction",
        ok,
        &format!(
            "present {present}/{reps}, max honest spread {max_spread:.3e} dB, \
             max trust toward attacker {max_attacker_trust:.3}, {elapsed:?}"
        ),
    );
    assert!(ok);
}

#[test]
fn ac2_second_attacker_slows_convergence() {
    let one = scenario::run_scenario(&presets::one_attacker()).unwrap();
    let two = scenario::run_scenario(&presets::two_attackers()).unwrap();
    let mean_one = one.iterations.unwrap().mean;
    let mean_two = two.iterations.unwrap().mean;
    let unconverged_two = two.summaries().filter(|s| !s.converged).count();
    let ok = mean_two > mean_one;
    verdict(
        "AC2 second attacker slows convergence",
        ok,
        &format!(
            "mean iterations one attacker {mean_one:.2}, two attackers {mean_two:.2} \
             ({unconverged_two} unconverged with two)"
        ),
    );
    assert!(ok, "two-attacker mean {mean_two} does not exceed one-attacker mean {mean_one}");
}

#[test]
fn ac3_trust_is_necessary() {
    let mut with_trust = presets::one_attacker();
    with_trust.scenario.attackers = vec![AttackProfile::constant(5, -50.0)];
    let without_trust = presets::without_trust(with_trust.clone());

    let on = scenario::run_scenario(&with_trust).unwrap();
    let off = scenario::run_scenario(&without_trust).unwrap();
    let reps = on.repetitions.len();
    let on_present = on.summaries().filter(|s| s.decision == Decision::Present).count();
    let off_wrong = off
        .summaries()
        .filter(|s| s.decision == Decision::Absent || !s.converged)
        .count();
    let ok = on_present == reps && off_wrong as f64 >= 0.9 * off.repetitions.len() as f64;
    verdict(
        "AC3 trust necessity",
        ok,
        &format!("trust on: present {on_present}/{reps}; trust off: absent or unconverged {off_wrong}/{reps}"),
    );
    assert!(ok);
}

#[test]
fn ac4_ssaas_dominates_traditional_availability() {
    let config = presets::one_attacker();
    let sweep = &config.scenario.sweep.availability;
    let exponent = (config.node_count() * sweep.rounds) as i32;
    let start = Instant::now();
    let report = scenario::sweep_availability(&config, &DEFAULT_P_AV_GRID, 10_000).unwrap();
    let elapsed = start.elapsed();

    let mut ok = elapsed < Duration::from_secs(5) && report.availability.len() == DEFAULT_P_AV_GRID.len();
    let mut worst_error: f64 = 0.0;
    for point in &report.availability {
        let analytic = point.p_av.powi(exponent);
        worst_error = worst_error.max((point.traditional - analytic).abs());
        ok &= point.ssaas >= point.traditional;
    }
    ok &= worst_error <= 0.02;
    let curve: Vec<String> = report
        .availability
        .iter()
        .map(|p| format!("{:.2}:{:.4}/{:.4}", p.p_av, p.traditional, p.ssaas))
        .collect();
    verdict(
        "AC4 probability of success",
        ok,
        &format!(
            "p_av:traditional/ssaas {}, worst traditional error {worst_error:.4}, {elapsed:?}",
            curve.join(" ")
        ),
    );
    assert!(ok);
}

#[test]
fn ac5_latency_trend_and_ratio() {
    let config = presets::one_attacker();
    let counts: Vec<usize> = (1..=16).collect();
    let report = scenario::sweep_latency(&config, &counts).unwrap();
    let increasing = report
        .latency
        .windows(2)
        .all(|w| w[1].local_ms > w[0].local_ms && w[1].conventional_ms > w[0].conventional_ms);
    let (lo, hi) = report
        .latency
        .iter()
        .map(|p| p.ratio())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)));
    let ok = increasing && lo >= 1.8 && hi <= 2.2;
    verdict(
        "AC5 latency",
        ok,
        &format!("strictly increasing: {increasing}, conventional/local ratio in [{lo:.3}, {hi:.3}]"),
    );
    assert!(ok);
}

/// Direct evaluation of the weighted-average consensus update from the
/// adjacency matrix, independent of the library's neighbor lists and weights.
fn naive_step(adjacency: &[Vec<u8>], trust: &[Vec<f64>], x: &[f64], reported: &[f64], eps: f64) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut trust_sum = 0.0;
        for j in 0..n {
            if adjacency[i][j] == 1 {
                trust_sum += trust[i][j];
            }
        }
        let mut acc = 0.0;
        for j in 0..n {
            if adjacency[i][j] == 1 {
                let w = trust[i][j] / (1.0 + trust_sum);
                acc += w * (reported[j] - x[i]);
            }
        }
        out[i] = x[i] + eps * acc;
    }
    out
}

fn labeled_connected_graphs(n: usize) -> Vec<Topology> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    (0u32..1 << pairs.len())
        .filter_map(|mask| {
            let edges: Vec<_> = pairs
                .iter()
                .enumerate()
                .filter(|(b, _)| mask & (1 << b) != 0)
                .map(|(_, &e)| e)
                .collect();
            Topology::with_vehicles(n, &edges).ok()
        })
        .collect()
}

#[test]
fn ac6_step_matches_naive_evaluation() {
    use rand::Rng;
    let mut rng = rng_from_seed(6);
    let mut graphs = 0;
    let mut worst: f64 = 0.0;
    for n in 2..=5 {
        for topology in labeled_connected_graphs(n) {
            graphs += 1;
            let adjacency = topology.adjacency_matrix();
            let mut ts = TrustState::init(&topology, TrustParams::default()).unwrap();
            let mut trust = vec![vec![0.0; n]; n];
            for i in 0..n {
                for &j in topology.neighbors(i).unwrap() {
                    let t: f64 = rng.random();
                    ts.set_trust(&topology, i, j, t).unwrap();
                    trust[i][j] = t;
                }
            }
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-20.0..40.0)).collect();
            let reported: Vec<f64> = (0..n).map(|_| rng.random_range(-60.0..40.0)).collect();
            let eps = topology.epsilon_upper_bound() * rng.random_range(0.01..0.99);
            let fast = consensus_step(&topology, &x, &reported, &ts, eps).unwrap();
            let slow = naive_step(&adjacency, &trust, &x, &reported, eps);
            for (a, b) in fast.iter().zip(&slow) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    // 1 + 4 + 38 + 728 labeled connected graphs on 2..=5 nodes
    let ok = graphs == 771 && worst <= 1e-12;
    verdict(
        "AC6 consensus oracle equivalence",
        ok,
        &format!("{graphs} labeled connected graphs, worst |difference| {worst:.3e} dB"),
    );
    assert!(ok);
}

fn graph_strategy(max_nodes: usize) -> impl Strategy<Value = Topology> {
    (2..=max_nodes, 0.0f64..0.7, any::<u64>())
        .prop_map(|(n, p, seed)| Topology::random_connected(n, p, seed).unwrap())
}

fn trusted_graph(max_nodes: usize) -> impl Strategy<Value = (Topology, TrustState, Vec<f64>, Vec<f64>, f64)> {
    graph_strategy(max_nodes).prop_flat_map(|t| {
        let n = t.node_count();
        let pairs = t.edges().len() * 2;
        (
            Just(t),
            proptest::collection::vec(0.0f64..=1.0, pairs),
            proptest::collection::vec(-30.0f64..40.0, n),
            proptest::collection::vec(-60.0f64..40.0, n),
            0.01f64..0.99,
        )
            .prop_map(|(t, trusts, x, reported, frac)| {
                let mut ts = TrustState::init(&t, TrustParams::default()).unwrap();
                let mut k = 0;
                for i in 0..t.node_count() {
                    for &j in t.neighbors(i).unwrap() {
                        ts.set_trust(&t, i, j, trusts[k]).unwrap();
                        k += 1;
                    }
                }
                let eps = frac * t.epsilon_upper_bound();
                (t, ts, x, reported, eps)
            })
    })
}

#[test]
fn ac7_invariant_suite() {
    let cases = 1000;
    let start = Instant::now();
    let mut results: Vec<(&str, Result<(), String>)> = Vec::new();

    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };

    let mut runner = TestRunner::new(config.clone());
    let clamp = runner
        .run(
            &(graph_strategy(10), proptest::collection::vec(-60.0f64..60.0, 1..30), any::<u64>()),
            |(t, offsets, seed)| {
                use rand::Rng;
                let mut rng = rng_from_seed(seed);
                let mut ts = TrustState::init(&t, TrustParams::default()).unwrap();
                for offset in offsets {
                    for i in 0..t.node_count() {
                        let reports = t
                            .neighbors(i)
                            .unwrap()
                            .iter()
                            .map(|&j| (j, offset + rng.random_range(-5.0..5.0)))
                            .collect();
                        ts.update_trust(&t, i, 0.0, &reports).unwrap();
                    }
                }
                for i in 0..t.node_count() {
                    for &j in t.neighbors(i).unwrap() {
                        prop_assert!((0.0..=1.0).contains(&ts.trust(i, j)));
                    }
                }
                Ok(())
            },
        )
        .map_err(|e| e.to_string());
    results.push(("trust clamped to [0, 1]", clamp));

    let mut runner = TestRunner::new(config.clone());
    let weight_sum = runner
        .run(&trusted_graph(12), |(t, ts, _, _, _)| {
            for i in 0..t.node_count() {
                let sum: f64 = ts.weights(&t, i).unwrap().iter().sum();
                prop_assert!(sum < 1.0, "node {i} weight sum {sum}");
            }
            Ok(())
        })
        .map_err(|e| e.to_string());
    results.push(("weight sum below one", weight_sum));

    let mut runner = TestRunner::new(config.clone());
    let hull = runner
        .run(&trusted_graph(12), |(t, ts, x, reported, eps)| {
            let next = consensus_step(&t, &x, &reported, &ts, eps).unwrap();
            for i in 0..t.node_count() {
                let seen = t.neighbors(i).unwrap().iter().map(|&j| reported[j]).chain([x[i]]);
                let (lo, hi) = seen.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                prop_assert!(lo - 1e-12 <= next[i] && next[i] <= hi + 1e-12, "node {i}: {} not in [{lo}, {hi}]", next[i]);
            }
            Ok(())
        })
        .map_err(|e| e.to_string());
    results.push(("hull containment", hull));

    let mut runner = TestRunner::new(config.clone());
    let fixed = runner
        .run(&(trusted_graph(12), -40.0f64..40.0), |((t, ts, _, _, eps), c)| {
            let x = vec![c; t.node_count()];
            prop_assert_eq!(consensus_step(&t, &x, &x, &ts, eps).unwrap(), x);
            Ok(())
        })
        .map_err(|e| e.to_string());
    results.push(("fixed point", fixed));

    let mut runner = TestRunner::new(config.clone());
    let monotone = runner
        .run(
            &(graph_strategy(12), 0.1f64..=1.0, 0.1f64..0.99, any::<u64>()),
            |(t, trust, frac, seed)| {
                use rand::Rng;
                let n = t.node_count();
                let ts = TrustState::with_scheme(
                    &t,
                    TrustParams {
                        initial_trust: trust,
                        ..TrustParams::default()
                    },
                    TrustScheme::Static,
                )
                .unwrap();
                let params = ConsensusParams {
                    epsilon: frac * t.epsilon_upper_bound(),
                    tolerance_db: 0.01,
                    max_iterations: 10_000,
                    threshold_db: 11.4,
                };
                let mut rng = rng_from_seed(seed);
                let initial: Vec<_> = (0..n)
                    .map(|node| EnergyMeasurement {
                        node,
                        value_db: rng.random_range(0.0..20.0),
                    })
                    .collect();
                let run = run_consensus(&t, &initial, ts, &params, &[], &mut rng).unwrap();
                prop_assert!(run.converged, "not converged after {} iterations", run.iterations_used);
                for k in 1..=run.iterations_used {
                    prop_assert!(run.honest_spread(k) <= run.honest_spread(k - 1) + 1e-12);
                }
                Ok(())
            },
        )
        .map_err(|e| e.to_string());
    results.push(("no-attacker spread non-increasing", monotone));

    let mut runner = TestRunner::new(config);
    let base = presets::two_attackers();
    let rerun = runner
        .run(&any::<u64>(), |seed| {
            let a = run_repetition(&base, 0, seed).unwrap();
            let b = run_repetition(&base, 0, seed).unwrap();
            prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            Ok(())
        })
        .map_err(|e| e.to_string());
    results.push(("bit-identical reruns", rerun));

    let elapsed = start.elapsed();
    let mut ok = elapsed < Duration::from_secs(30);
    for (name, outcome) in &results {
        match outcome {
            Ok(()) => println!("    {name}: {cases} cases ok"),
            Err(e) => {
                ok = false;
                println!("    {name}: {e}");
            }
        }
    }
    verdict(
        "AC7 invariant suite",
        ok,
        &format!("{} properties x {cases} cases in {elapsed:?}", results.len()),
    );
    assert!(ok);
}

#[test]
fn bundled_configs_match_presets() {
    for (raw, expected) in [
        (include_str!("../../../configs/one_attacker.json"), presets::one_attacker()),
        (include_str!("../../../configs/two_attackers.json"), presets::two_attackers()),
    ] {
        let parsed = ScenarioConfig::from_json(raw).unwrap();
        assert_eq!(parsed, expected);
    }
}
