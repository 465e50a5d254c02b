use proptest::prelude::*;
use ssaas_core::cloud::{probability_of_success, AvailabilityModel, SensingMode};
use ssaas_core::consensus::{run_consensus, ConsensusParams};
use ssaas_core::scenario::{self, presets};
use ssaas_core::sensing::EnergyMeasurement;
use ssaas_core::topology::Topology;
use ssaas_core::trust::{TrustParams, TrustScheme, TrustState};
use ssaas_core::{rng_from_seed, AttackProfile};

fn static_trust(t: &Topology, value: f64) -> TrustState {
    TrustState::with_scheme(
        t,
        TrustParams {
            initial_trust: value,
            ..TrustParams::default()
        },
        TrustScheme::Static,
    )
    .unwrap()
}

/// Honest-only induced subgraph, with the index map from sub to full graph.
fn honest_subgraph(t: &Topology, attackers: &[usize]) -> Option<(Topology, Vec<usize>)> {
    let keep: Vec<usize> = (0..t.node_count()).filter(|i| !attackers.contains(i)).collect();
    let pos = |v: usize| keep.iter().position(|&k| k == v);
    let edges: Vec<_> = t
        .edges()
        .into_iter()
        .filter_map(|(a, b)| Some((pos(a)?, pos(b)?)))
        .collect();
    Topology::with_vehicles(keep.len(), &edges).ok().map(|sub| (sub, keep))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn zero_trust_attackers_are_invisible(
        n in 4usize..10,
        p in 0.3f64..0.9,
        graph_seed: u64,
        trust in 0.2f64..=1.0,
        run_seed: u64,
        attacker_values in proptest::collection::vec(-80.0f64..80.0, 1..3),
    ) {
        let t = Topology::random_connected(n, p, graph_seed).unwrap();
        let attackers: Vec<usize> = (0..attacker_values.len()).map(|k| n - 1 - k).collect();
        let Some((sub, keep)) = honest_subgraph(&t, &attackers) else {
            return Ok(());
        };

        let mut full_trust = static_trust(&t, trust);
        for i in 0..n {
            for &a in &attackers {
                if t.is_adjacent(i, a) && !attackers.contains(&i) {
                    full_trust.set_trust(&t, i, a, 0.0).unwrap();
                }
            }
        }
        let eps = 0.9 * t.epsilon_upper_bound();
        let params = ConsensusParams { epsilon: eps, tolerance_db: 1e-3, max_iterations: 2000, threshold_db: 11.4 };
        let sub_params = ConsensusParams { epsilon: eps.min(0.9 * sub.epsilon_upper_bound()), ..params };
        prop_assume!(sub_params.epsilon == eps);

        let mut rng = rng_from_seed(run_seed);
        use rand::Rng;
        let initial: Vec<f64> = (0..n).map(|_| rng.random_range(5.0..20.0)).collect();
        let profiles: Vec<_> = attackers.iter().zip(&attacker_values).map(|(&a, &v)| AttackProfile::constant(a, v)).collect();
        let measurements: Vec<_> = initial.iter().enumerate().map(|(node, &value_db)| EnergyMeasurement { node, value_db }).collect();
        let full = run_consensus(&t, &measurements, full_trust, &params, &profiles, &mut rng_from_seed(1)).unwrap();

        let sub_measurements: Vec<_> = keep.iter().enumerate().map(|(node, &orig)| EnergyMeasurement { node, value_db: initial[orig] }).collect();
        let honest = run_consensus(&sub, &sub_measurements, static_trust(&sub, trust), &sub_params, &[], &mut rng_from_seed(1)).unwrap();

        prop_assert_eq!(full.iterations_used, honest.iterations_used);
        for (k, (xf, xs)) in full.trace.iter().zip(&honest.trace).enumerate() {
            for (s, &orig) in keep.iter().enumerate() {
                prop_assert!((xf[orig] - xs[s]).abs() <= 1e-12, "iteration {k} node {orig}: {} vs {}", xf[orig], xs[s]);
            }
        }
        prop_assert_eq!(full.decision, honest.decision);
    }

    #[test]
    fn constant_offender_loses_trust_within_bound(
        initial in 0.0f64..=1.0,
        offset in 2.5f64..40.0,
    ) {
        let t = Topology::path(2).unwrap();
        let params = TrustParams { initial_trust: initial, ..TrustParams::default() };
        let mut ts = TrustState::init(&t, params).unwrap();
        let bound = (initial * params.deviation_tolerance_db
            / (params.learning_rate * (offset - params.deviation_tolerance_db)))
            .ceil() as usize;
        let reports = std::collections::BTreeMap::from([(1, offset)]);
        let mut prev = ts.trust(0, 1);
        for _ in 0..bound {
            ts.update_trust(&t, 0, 0.0, &reports).unwrap();
            prop_assert!(ts.trust(0, 1) <= prev);
            prev = ts.trust(0, 1);
        }
        prop_assert_eq!(ts.trust(0, 1), 0.0);
    }
}

fn closed_form(m: &AvailabilityModel, mode: SensingMode) -> f64 {
    let vm_ok = 1.0 - (1.0 - m.p_av).powi(m.n_hosts as i32);
    match mode {
        SensingMode::Traditional => m.p_av.powi((m.n_nodes * m.rounds) as i32),
        SensingMode::Ssaas if m.migration_enabled => vm_ok.powi((m.n_nodes * m.rounds) as i32),
        SensingMode::Ssaas => (vm_ok * m.p_av.powi(m.rounds as i32 - 1)).powi(m.n_nodes as i32),
    }
}

// 96 comparisons, so a per-comparison 3 sigma band would trip by chance;
// 4 sigma keeps the family-wise false alarm rate below 1%.
#[test]
fn monte_carlo_matches_closed_forms() {
    let trials = 20_000;
    let mut seed = 100;
    for p_av in [0.5, 0.7, 0.9, 0.97] {
        for (n_nodes, rounds) in [(2, 1), (4, 3), (6, 10)] {
            for n_hosts in [1, 3] {
                for migration_enabled in [true, false] {
                    let m = AvailabilityModel {
                        p_av,
                        n_nodes,
                        rounds,
                        migration_enabled,
                        n_hosts,
                    };
                    for mode in [SensingMode::Traditional, SensingMode::Ssaas] {
                        seed += 1;
                        let exact = closed_form(&m, mode);
                        let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
                        let est = probability_of_success(&m, mode, trials, &mut rng_from_seed(seed)).unwrap();
                        assert!(
                            (est - exact).abs() <= 4.0 * sigma + 1e-9,
                            "{m:?} {mode:?}: estimate {est}, exact {exact}, sigma {sigma}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn closed_forms_are_monotone() {
    let base = AvailabilityModel::new(0.75, 6);
    for mode in [SensingMode::Traditional, SensingMode::Ssaas] {
        for migration_enabled in [true, false] {
            let m = AvailabilityModel {
                migration_enabled,
                ..base
            };
            let along = |f: &dyn Fn(usize) -> AvailabilityModel| -> Vec<f64> {
                (1..8).map(|k| closed_form(&f(k), mode)).collect()
            };
            let by_p = along(&|k| AvailabilityModel {
                p_av: 0.5 + 0.07 * k as f64,
                ..m
            });
            let by_hosts = along(&|k| AvailabilityModel { n_hosts: k, ..m });
            let by_nodes = along(&|k| AvailabilityModel { n_nodes: k, ..m });
            let by_rounds = along(&|k| AvailabilityModel { rounds: k, ..m });
            assert!(by_p.windows(2).all(|w| w[1] >= w[0]));
            assert!(by_hosts.windows(2).all(|w| w[1] >= w[0]));
            assert!(by_nodes.windows(2).all(|w| w[1] <= w[0]));
            assert!(by_rounds.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}

#[test]
fn default_sweep_within_three_sigma() {
    let config = presets::one_attacker();
    let trials = 10_000;
    let report = scenario::sweep_availability(&config, &scenario::DEFAULT_P_AV_GRID, trials).unwrap();
    for point in &report.availability {
        let m = AvailabilityModel::new(point.p_av, 6);
        for mode in [SensingMode::Traditional, SensingMode::Ssaas] {
            let exact = closed_form(&m, mode);
            let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
            let est = point.value(mode);
            assert!((est - exact).abs() <= 3.0 * sigma + 1e-9, "{point:?} {mode:?}: exact {exact}");
        }
    }
}

#[test]
fn traditional_sweep_point_matches_analytic() {
    let config = presets::one_attacker();
    let report = scenario::sweep_availability(&config, &[0.9], 10_000).unwrap();
    let exact = 0.9f64.powi(60);
    assert!((report.availability[0].traditional - exact).abs() <= 0.02);
}

#[test]
fn report_serialization_is_deterministic() {
    let mut config = presets::two_attackers();
    config.scenario.repetitions = 30;
    let a = scenario::run_scenario(&config).unwrap().to_json();
    let b = scenario::run_scenario(&config).unwrap().to_json();
    assert_eq!(a, b);
}

#[test]
fn latency_is_linear() {
    let config = presets::one_attacker();
    let report = scenario::sweep_latency(&config, &[1, 2, 3, 7]).unwrap();
    let unit = report.latency[0];
    for p in &report.latency {
        assert_eq!(p.local_ms, unit.local_ms * p.n_vms as f64);
        assert_eq!(p.conventional_ms, unit.conventional_ms * p.n_vms as f64);
    }
}
