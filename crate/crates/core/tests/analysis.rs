use std::collections::{BTreeMap, BTreeSet, VecDeque};

use edge_aoi::analysis::{self, fifo, gps, PolicyAnalysis};
use edge_aoi::numerics::{matrix_power, stationary_distribution, StochasticMatrix};
use edge_aoi::sync_analysis::SyncSystem;
use edge_aoi::{renewal, Policy, RawScenario, Scenario};
use nalgebra::DMatrix;

fn scenario(mu: f64, tau: f64, sizes: Vec<usize>, offsets: Vec<f64>) -> Scenario {
    Scenario::try_from(RawScenario {
        n_clients: sizes.iter().sum(),
        service_rate: mu,
        period: tau,
        batch_sizes: sizes,
        offsets_from_2: offsets,
    })
    .unwrap()
}

/// Completion-count PMF written out from scratch.
fn completions(x: usize, mean: f64) -> Vec<f64> {
    let mut pmf = Vec::new();
    let mut term = (-mean).exp();
    for c in 0..x {
        pmf.push(term);
        term *= mean / (c + 1) as f64;
    }
    let rest = 1.0 - pmf.iter().sum::<f64>();
    pmf.push(rest.max(0.0));
    pmf
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// All ordered completion sequences of `c` distinct frames out of `active`,
/// each with probability `Π 1/(X - i)`.
fn ordered_removals(active: &[usize], c: usize, prob: f64, out: &mut BTreeMap<Vec<usize>, f64>) {
    if c == 0 {
        let mut left = active.to_vec();
        left.sort();
        *out.entry(left).or_insert(0.0) += prob;
        return;
    }
    for i in 0..active.len() {
        let mut rest = active.to_vec();
        rest.remove(i);
        ordered_removals(&rest, c - 1, prob / active.len() as f64, out);
    }
}

/// GPS chain over explicit sets of active clients, projected onto counts per
/// batch; every reachable set must give the row of its count label.
#[test]
fn gps_matches_frame_level_enumeration() {
    let s = scenario(1.3, 1.0, vec![2, 1], vec![0.4]);
    let a = analysis::analyze(&s, Policy::Gps).unwrap();
    let space = a.state_space();
    let batch_of = s.client_batches();
    let mut frontier: Vec<(usize, Vec<usize>)> = vec![(0, vec![])];
    let mut seen = BTreeSet::new();
    while let Some((b, set)) = frontier.pop() {
        if !seen.insert((b, set.clone())) {
            continue;
        }
        let mut active: Vec<usize> = set.iter().copied().filter(|&c| batch_of[c] != b).collect();
        active.extend((0..s.n_clients()).filter(|&c| batch_of[c] == b));
        let pmf = completions(active.len(), s.service_rate() * s.offset(b + 1));
        let mut next_sets = BTreeMap::new();
        for (c, p) in pmf.iter().enumerate() {
            ordered_removals(&active, c, *p, &mut next_sets);
        }
        let counts = |set: &[usize]| -> Vec<usize> {
            (0..s.batch_count()).map(|i| set.iter().filter(|&&c| batch_of[c] == i).count()).collect()
        };
        let from = space.index(b, &counts(&set)).unwrap() % space.block_size();
        let nb = (b + 1) % s.batch_count();
        let mut projected = vec![0.0; space.block_size()];
        for (next, p) in &next_sets {
            projected[space.index(nb, &counts(next)).unwrap() % space.block_size()] += p;
            frontier.push((nb, next.clone()));
        }
        for (to, p) in projected.iter().enumerate() {
            assert!((a.transition_block(b)[(from, to)] - p).abs() < 1e-12, "b={b} set={set:?} to={to}");
        }
    }
    assert!(seen.len() > 6);
}

/// FIFO chain over explicit queues, checked on the six-state example with
/// `μν = ln 2` per gap.
#[test]
fn fifo_matches_queue_level_enumeration() {
    let nu = 2f64.ln();
    let s = scenario(1.0, 2.0 * nu, vec![1, 1], vec![nu]);
    let a = analysis::analyze(&s, Policy::Fifo).unwrap();
    assert_eq!(a.state_space().len(), 6);
    let mut frontier: Vec<(usize, VecDeque<usize>)> = vec![(0, VecDeque::new())];
    let mut seen = BTreeSet::new();
    while let Some((b, queue)) = frontier.pop() {
        if !seen.insert((b, queue.clone())) {
            continue;
        }
        let mut q: VecDeque<usize> = queue.iter().copied().filter(|&c| c != b).collect();
        q.push_back(b);
        let pmf = completions(q.len(), nu);
        let from = queue.len();
        let mut projected = [0.0; 3];
        for (c, p) in pmf.iter().enumerate() {
            let rest: VecDeque<usize> = q.iter().skip(c).copied().collect();
            projected[rest.len()] += p;
            frontier.push(((b + 1) % 2, rest));
        }
        for (to, p) in projected.iter().enumerate() {
            assert!((a.transition_block(b)[(from, to)] - p).abs() < 1e-12);
        }
    }
    // With one frame per gap: P(0 completions) = 1/2 exactly.
    assert!((a.transition_block(0)[(0, 1)] - 0.5).abs() < 1e-15);
}

fn check_invariants(a: &PolicyAnalysis) {
    let s = a.scenario();
    let b_count = s.batch_count();
    let full = a.transition_matrix().unwrap();
    for m in [1, b_count as u32, 2 * b_count as u32] {
        for sum in matrix_power(&full, m).row_sums() {
            assert!((sum - 1.0).abs() < 1e-8);
        }
    }
    // Independent route to π: solve the periodic full chain directly.
    let pi = stationary_distribution(&full, None).unwrap();
    assert!((pi - a.stationary_full()).amax() < 1e-9);
    let pb = matrix_power(&full, b_count as u32);
    let m = a.state_space().block_size();
    for b in 0..b_count {
        assert!((a.stationary(b).unwrap().sum() - 1.0 / b_count as f64).abs() < 1e-10);
        let block = pb.matrix().view((b * m, b * m), (m, m)).into_owned();
        assert!((&block - a.b_step_matrix(b).unwrap()).amax() < 1e-10);
        let sigma = a.state_success(b).unwrap();
        let given = a.given_success(b).unwrap();
        let failure = a.failure_matrix(b).unwrap();
        let given_failure = a.given_failure(b).unwrap();
        for s_idx in 0..m {
            let sg = sigma[s_idx];
            assert!((0.0..=1.0).contains(&sg));
            assert!((given.row(s_idx).sum() - 1.0).abs() < 1e-9);
            assert!((failure.row(s_idx).sum() - (1.0 - sg)).abs() < 1e-9);
            for t in 0..m {
                let rebuilt = sg * given[(s_idx, t)] + (1.0 - sg) * given_failure[(s_idx, t)];
                assert!((rebuilt - block[(s_idx, t)]).abs() < 1e-10);
            }
        }
        assert!((a.latency_cdf(b, s.period()).unwrap() - 1.0).abs() < 1e-8);
        assert_eq!(a.latency_cdf(b, 0.0).unwrap(), 0.0);
        let bound = a.tail_bound(b).unwrap();
        // The bound covers Y; PAoI adds at most one more period of latency.
        assert!(a.paoi_cdf(b, (bound + 1) as f64 * s.period()).unwrap() >= 1.0 - 1e-9);
        assert!(a.paoi_horizon(b).unwrap() <= bound + 2);
    }
}

#[test]
fn structural_invariants() {
    let cases = [
        scenario(5.0, 1.0, vec![2, 2], vec![0.3]),
        scenario(3.0, 1.0, vec![1, 2, 1], vec![0.2, 0.5]),
        Scenario::uniform(6, 4.0, 1.5, 6).unwrap(),
        Scenario::synchronized(5, 2.0, 1.0).unwrap(),
    ];
    for s in &cases {
        for policy in Policy::ALL {
            check_invariants(&analysis::analyze(s, policy).unwrap());
        }
    }
}

#[test]
fn expected_latency_matches_quadrature() {
    let s = Scenario::uniform(4, 5.0, 1.0, 2).unwrap();
    for policy in Policy::ALL {
        let a = analysis::analyze(&s, policy).unwrap();
        for b in 0..2 {
            let expected = a.expected_latency_given_state(b).unwrap();
            for local in 0..a.state_space().block_size() {
                // Piecewise smooth: integrate gap by gap.
                let quad: f64 = a
                    .segments(b)
                    .unwrap()
                    .iter()
                    .map(|&(start, len)| {
                        simpson(|t| 1.0 - a.state_latency_cdf(b, local, t.min(1.0)).unwrap(), start, start + len, 2000)
                    })
                    .sum();
                assert!((quad - expected[local]).abs() < 1e-6, "{policy} b={b} s={local}: {quad} vs {}", expected[local]);
                assert!(expected[local] > 0.0 && expected[local] < 1.0);
            }
        }
    }
}

#[test]
fn single_batch_reduces_to_closed_forms() {
    for n in 1..=8 {
        for mu in [0.7, 3.0, 12.0] {
            let s = Scenario::synchronized(n, mu, 1.0).unwrap();
            let sync = SyncSystem::from_scenario(&s).unwrap();
            let gps = analysis::analyze(&s, Policy::Gps).unwrap();
            let fifo = analysis::analyze(&s, Policy::Fifo).unwrap();
            for a in [&gps, &fifo] {
                assert!((a.batch_success(0).unwrap() - sync.success_probability()).abs() < 1e-9);
                assert!((a.batch_expected_latency(0).unwrap() - sync.expected_latency()).abs() < 1e-9);
                assert!((renewal::expected_aoi(a).unwrap() - sync.expected_aoi()).abs() < 1e-8);
                let lat = a.latency_curve(Some(0), 1000).unwrap();
                assert!(lat.max_abs_difference(&sync.latency_curve(1000).unwrap()).unwrap() < 1e-9);
                for i in 0..400 {
                    let psi = i as f64 * 0.05;
                    assert!((a.paoi_cdf(0, psi).unwrap() - sync.paoi_cdf(psi).unwrap()).abs() < 1e-8);
                }
            }
        }
    }
}

#[test]
fn single_frame_success() {
    let s = Scenario::synchronized(1, 2.5, 1.0).unwrap();
    let a = analysis::analyze(&s, Policy::Gps).unwrap();
    assert!((a.batch_success(0).unwrap() - (1.0 - (-2.5f64).exp())).abs() < 1e-12);
}

/// Projecting GPS onto (next batch, total backlog) gives the FIFO chain for
/// one batch only.
#[test]
fn fifo_is_not_a_lumping_of_gps_with_several_batches() {
    fn lumped_gap(s: &Scenario) -> f64 {
        let g = analysis::analyze(s, Policy::Gps).unwrap();
        let f = analysis::analyze(s, Policy::Fifo).unwrap();
        let labels = g.state_space().labels().to_vec();
        let mut worst = 0.0_f64;
        for b in 0..s.batch_count() {
            for (from, label) in labels.iter().enumerate() {
                let total: usize = label.iter().sum();
                let mut row = vec![0.0; s.n_clients() + 1];
                for (to, l) in labels.iter().enumerate() {
                    row[l.iter().sum::<usize>()] += g.transition_block(b)[(from, to)];
                }
                for (k, p) in row.iter().enumerate() {
                    worst = worst.max((p - f.transition_block(b)[(total, k)]).abs());
                }
            }
        }
        worst
    }
    assert!(lumped_gap(&Scenario::synchronized(5, 3.0, 1.0).unwrap()) < 1e-12);
    assert!(lumped_gap(&Scenario::uniform(4, 3.0, 1.0, 2).unwrap()) > 1e-3);
}

#[test]
fn fifo_latency_lags_gps() {
    let s = Scenario::uniform(8, 5.0, 1.0, 8).unwrap();
    let g = analysis::analyze(&s, Policy::Gps).unwrap();
    let f = analysis::analyze(&s, Policy::Fifo).unwrap();
    for b in 0..8 {
        assert!(f.latency_cdf(b, 0.2).unwrap() <= g.latency_cdf(b, 0.2).unwrap());
    }
}

#[test]
fn success_grows_with_rate() {
    let base = Scenario::uniform(5, 1.0, 1.0, 3).unwrap();
    for policy in Policy::ALL {
        let mut prev = vec![0.0; 3];
        for mu in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let a = analysis::analyze(&base.with_service_rate(mu).unwrap(), policy).unwrap();
            for (b, p) in prev.iter_mut().enumerate() {
                let sigma = a.batch_success(b).unwrap();
                assert!(sigma + 1e-12 >= *p);
                *p = sigma;
            }
        }
    }
}

#[test]
fn inter_success_first_term_by_enumeration() {
    let nu = 2f64.ln();
    let s = scenario(1.0, 2.0 * nu, vec![1, 1], vec![nu]);
    for policy in Policy::ALL {
        let a = analysis::analyze(&s, policy).unwrap();
        let full = a.transition_matrix().unwrap();
        let pi = stationary_distribution(&full, None).unwrap();
        let m = a.state_space().block_size();
        let pb = matrix_power(&full, 2);
        // Fraction of the tagged frame delivered when the chain returns to
        // S_b in local state `to`: both clients alone in their batch.
        let delivered = |b: usize, to: usize| -> f64 {
            let label = &a.state_space().labels()[to];
            match policy {
                Policy::Gps => 1.0 - label[b] as f64,
                Policy::Fifo => (2.0 - label[0] as f64).min(1.0),
            }
        };
        for b in 0..2 {
            let mut num = 0.0;
            let mut den = 0.0;
            for s0 in 0..m {
                for s1 in 0..m {
                    let p1 = pb.get(b * m + s0, b * m + s1) * delivered(b, s1);
                    den += pi[b * m + s0] * p1;
                    for s2 in 0..m {
                        num += pi[b * m + s0] * p1 * pb.get(b * m + s1, b * m + s2) * delivered(b, s2);
                    }
                }
            }
            let pmf = renewal::inter_success_pmf(&a, b, 1).unwrap();
            assert!((pmf - num / den).abs() < 1e-12, "{policy} b={b}");
        }
    }
}

#[test]
fn state_cap_is_enforced() {
    let s = Scenario::uniform(14, 1.0, 1.0, 14).unwrap();
    assert!(matches!(gps::enumerate_states(&s), Err(edge_aoi::Error::StateSpaceTooLarge { .. })));
    assert!(fifo::enumerate_states(&s).is_ok());
}

#[test]
fn analysis_is_reproducible() {
    let s = Scenario::uniform(6, 4.0, 1.0, 3).unwrap();
    for policy in Policy::ALL {
        let a = analysis::analyze(&s, policy).unwrap();
        let b = analysis::analyze(&s, policy).unwrap();
        assert_eq!(a.transition_matrix().unwrap(), b.transition_matrix().unwrap());
        assert_eq!(a.stationary_full(), b.stationary_full());
        assert_eq!(a.state_space().describe(), b.state_space().describe());
    }
}

#[test]
fn dense_export_matches_blocks() {
    let s = Scenario::uniform(4, 2.0, 1.0, 2).unwrap();
    let direct = gps::transition_matrix(&s).unwrap();
    let a = analysis::analyze(&s, Policy::Gps).unwrap();
    assert_eq!(&direct, &a.transition_matrix().unwrap());
    let m = a.state_space().block_size();
    let block: DMatrix<f64> = direct.matrix().view((0, m), (m, m)).into_owned();
    assert_eq!(&block, a.transition_block(0));
    let _: &StochasticMatrix = &direct;
}
