use edge_aoi::analysis::analyze;
use edge_aoi::simulator::{self, ks_two_sample, SimulationConfig};
use edge_aoi::sync_analysis::SyncSystem;
use edge_aoi::{renewal, Policy, RawScenario, Scenario};

#[test]
fn single_frame_with_ln2_budget_succeeds_half_the_time() {
    let s = Scenario::synchronized(1, 2f64.ln(), 1.0).unwrap();
    let r = simulator::run(&SimulationConfig::new(s, Policy::Gps, 100_000, 3)).unwrap();
    let c = r.client(0);
    let se = (0.25 / c.frames() as f64).sqrt();
    assert!((c.success_rate() - 0.5).abs() < 4.0 * se, "{}", c.success_rate());
}

#[test]
fn policies_coincide_for_one_batch() {
    let s = Scenario::synchronized(4, 3.0, 1.0).unwrap();
    let gps = simulator::run(&SimulationConfig::new(s.clone(), Policy::Gps, 100_000, 11)).unwrap();
    let fifo = simulator::run(&SimulationConfig::new(s, Policy::Fifo, 100_000, 12)).unwrap();
    let (_, p) = ks_two_sample(&gps.client(0).latency, &fifo.client(0).latency).unwrap();
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn synchronized_success_matches_closed_form() {
    let s = Scenario::synchronized(5, 4.0, 1.0).unwrap();
    let exact = SyncSystem::from_scenario(&s).unwrap().success_probability();
    for policy in Policy::ALL {
        let r = simulator::run(&SimulationConfig::new(s.clone(), policy, 50_000, 5)).unwrap();
        let est = r.success_rate(None);
        assert!((est - exact).abs() < 4.0 * r.success_rate_se(None), "{policy}: {est} vs {exact}");
    }
}

#[test]
fn gap_distribution_matches_renewal_law() {
    let s = Scenario::uniform(6, 4.0, 1.5, 6).unwrap();
    for policy in Policy::ALL {
        let a = analyze(&s, policy).unwrap();
        let r = simulator::run(&SimulationConfig::new(s.clone(), policy, 100_000, 21)).unwrap();
        for c in &r.clients {
            let n: u64 = c.gap_counts.iter().sum();
            for m in 1..=4 {
                let p = renewal::inter_success_pmf(&a, c.batch, m).unwrap();
                let se = (p * (1.0 - p) / n as f64).sqrt();
                let est = c.gap_pmf(m);
                // Gaps of one client are weakly dependent; allow a wide band.
                assert!((est - p).abs() < 5.0 * se + 1e-4, "{policy} client {} m={m}: {est} vs {p}", c.client);
            }
        }
        let aoi = renewal::expected_aoi(&a).unwrap();
        let est = r.expected_aoi(None);
        assert!((est - aoi).abs() < 4.0 * r.expected_aoi_se(None), "{policy}: {est} vs {aoi}");
    }
}

#[test]
fn latency_matches_analysis_under_offsets() {
    let s = Scenario::try_from(RawScenario {
        n_clients: 5,
        service_rate: 4.0,
        period: 1.0,
        batch_sizes: vec![2, 1, 2],
        offsets_from_2: vec![0.25, 0.4],
    })
    .unwrap();
    for policy in Policy::ALL {
        let a = analyze(&s, policy).unwrap();
        let r = simulator::run(&SimulationConfig::new(s.clone(), policy, 50_000, 8)).unwrap();
        for b in 0..3 {
            let sim = r.pooled_latency(Some(b)).unwrap();
            let d = sim.ks_distance(|t| a.latency_cdf(b, t)).unwrap();
            let band = simulator::dkw_band(sim.len() as u64, 0.999).unwrap();
            assert!(d < band, "{policy} batch {b}: {d} vs {band}");
            let sigma = a.batch_success(b).unwrap();
            assert!((r.success_rate(Some(b)) - sigma).abs() < 4.0 * r.success_rate_se(Some(b)));
        }
    }
}
