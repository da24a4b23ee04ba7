use coopverify::engine::Scheme;
use coopverify::sim::channel::{place_nodes, BeaconSchedule};
use coopverify::sim::MetricsScope;
use coopverify::threat::AdversaryConfig;
use coopverify::{run_scenario, NodeId, ScenarioConfig, SimRng, SimTime};
use rand::SeedableRng;

fn config(n: usize, duration: f64) -> ScenarioConfig {
    ScenarioConfig {
        n_nodes: n,
        duration,
        seed: 42,
        ..ScenarioConfig::default()
    }
}

fn deciles(values: impl Iterator<Item = f64>, scale: f64) -> [u32; 10] {
    let mut bins = [0u32; 10];
    for v in values {
        bins[((v / scale * 10.0) as usize).min(9)] += 1;
    }
    bins
}

#[test]
fn placement_uniform_by_decile() {
    let mut rng = SimRng::seed_from_u64(8);
    let pts = place_nodes(100_001, 200.0, &mut rng);
    assert_eq!(pts[0], (100.0, 100.0));
    for axis in [0, 1] {
        let bins = deciles(
            pts[1..].iter().map(|p| if axis == 0 { p.0 } else { p.1 }),
            200.0,
        );
        for b in bins {
            assert!((b as f64 / 100_000.0 - 0.1).abs() < 0.005, "{bins:?}");
        }
    }
}

#[test]
fn beacon_phases_uniform_and_independent() {
    let mut rng = SimRng::seed_from_u64(9);
    let phases: Vec<f64> = (0..100_000)
        .map(|_| BeaconSchedule::random(10.0, &mut rng).phase.as_secs_f64())
        .collect();
    for b in deciles(phases.iter().copied(), 0.1) {
        assert!((b as f64 / 100_000.0 - 0.1).abs() < 0.005);
    }
    let mean = phases.iter().sum::<f64>() / phases.len() as f64;
    let var = phases.iter().map(|p| (p - mean).powi(2)).sum::<f64>();
    let cov = phases
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum::<f64>();
    assert!((cov / var).abs() < 0.02, "lag-1 correlation {}", cov / var);
}

#[test]
fn schedule_stays_strictly_before_end() {
    let s = BeaconSchedule {
        phase: SimTime::from_millis(37),
        period: SimTime::from_millis(100),
    };
    let t: Vec<SimTime> = s.times(SimTime::from_secs_f64(1.0)).collect();
    assert_eq!(t.len(), 10);
    assert_eq!(t[9], SimTime::from_millis(937));
}

#[test]
fn cooperative_without_cache_matches_baseline_work() {
    for n in [10, 20, 25] {
        let base = ScenarioConfig {
            scheme: Scheme::Baseline,
            alpha: 0,
            ..config(n, 20.0)
        };
        let coop = ScenarioConfig {
            scheme: Scheme::Cooperative,
            ..base.clone()
        };
        let (b, c) = (run_scenario(&base).unwrap(), run_scenario(&coop).unwrap());
        assert_eq!(c.global.cooperatively_accepted, 0);
        assert_eq!(b.global.received, c.global.received);
        assert_eq!(
            b.global.signature_verifications,
            c.global.signature_verifications
        );
        assert_eq!(b.final_queue_len, c.final_queue_len);
    }
}

#[test]
fn runs_are_deterministic() {
    let cfg = config(20, 10.0);
    assert_eq!(run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
    let other = ScenarioConfig {
        seed: 43,
        ..cfg.clone()
    };
    assert_ne!(
        run_scenario(&cfg).unwrap().dispositions,
        run_scenario(&other).unwrap().dispositions
    );
}

#[test]
fn conservation_and_throughput_bound() {
    for scheme in [Scheme::Baseline, Scheme::Cooperative] {
        // audited below saturation, counters only above it
        for (n, audit) in [(18, true), (30, false)] {
            let cfg = ScenarioConfig {
                scheme,
                audit,
                metrics_scope: MetricsScope::AllBenign,
                ..config(n, 20.0)
            };
            let m = run_scenario(&cfg).unwrap();
            assert!(m.violations.is_empty(), "{:?}", m.violations);
            assert_eq!(m.global.received, m.global.dispositions());
            assert_eq!(m.dispositions.len() as u64, m.global.received);
            let per_node_bound = (cfg.duration / cfg.tau).ceil() as u64 + 1;
            assert!(m.global.signature_verifications <= per_node_bound * cfg.n_nodes as u64);
            assert!(m.busy_time <= SimTime::from_secs_f64(cfg.duration * cfg.n_nodes as f64));
        }
    }
}

#[test]
fn total_loss_delivers_nothing() {
    let m = run_scenario(&ScenarioConfig {
        loss_prob: 1.0,
        ..config(15, 10.0)
    })
    .unwrap();
    assert_eq!(m.global.received, 0);
    assert_eq!(m.global.signature_verifications, 0);
}

#[test]
fn two_nodes_one_second() {
    let cfg = ScenarioConfig {
        metrics_scope: MetricsScope::AllBenign,
        ..config(2, 1.0)
    };
    let m = run_scenario(&cfg).unwrap();
    for node in 0..2 {
        let got = m
            .dispositions
            .iter()
            .filter(|d| d.receiver == NodeId(node))
            .count();
        assert!((9..=10).contains(&got), "node {node} received {got}");
    }
    assert!(m.global.received <= 20);
    // two senders never overload a 5 ms verifier
    assert_eq!(m.global.unprocessed_at_end, m.global.verifying_at_end);
}

#[test]
fn only_the_adversary_is_ever_reported() {
    for seed in 0..5 {
        let cfg = ScenarioConfig {
            seed,
            audit: true,
            adversary: Some(AdversaryConfig::default()),
            ..config(30, 30.0)
        };
        let m = run_scenario(&cfg).unwrap();
        let adv = m.adversary.as_ref().unwrap().id;
        assert!(m.reports.iter().all(|r| r.accused == adv));
        assert!(m.revocations.iter().all(|r| r.accused == adv));
        assert!(m.violations.is_empty(), "{:?}", m.violations);
        if let Some(t) = m.adversary.as_ref().unwrap().revocation_time {
            assert!(m
                .dispositions
                .iter()
                .filter(|d| d.sender == adv && d.outcome.is_accepted())
                .all(|d| d.leave_queue_time <= t));
        }
    }
}
