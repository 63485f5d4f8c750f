use edge_aoi::analysis::analyze;
use edge_aoi::renewal;
use edge_aoi::{Policy, Scenario};

#[test]
fn truncated_series_agree_with_closed_forms() {
    let s = Scenario::uniform(6, 4.0, 1.0, 6).unwrap();
    for policy in Policy::ALL {
        let a = analyze(&s, policy).unwrap();
        for b in 0..6 {
            let exact = renewal::moments(&a, b).unwrap();
            let t = renewal::truncated_moments(&a, b, 100_000).unwrap();
            assert!(t.tail < 1e-12);
            assert!((exact.mean_gap - t.moments.mean_gap).abs() < 1e-7);
            assert!((exact.second_moment - t.moments.second_moment).abs() < 1e-7);
            assert!((exact.cross_moment - t.moments.cross_moment).abs() < 1e-7);
            assert!((exact.expected_aoi - t.moments.expected_aoi).abs() < 1e-7);
        }
    }
}

#[test]
fn mean_gap_is_reciprocal_success_rate() {
    let s = Scenario::uniform(5, 3.0, 1.0, 5).unwrap();
    for policy in Policy::ALL {
        let a = analyze(&s, policy).unwrap();
        for b in 0..5 {
            let m = renewal::moments(&a, b).unwrap();
            assert!((m.mean_gap * a.batch_success(b).unwrap() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn aggregate_weights_batches_by_size() {
    let s = Scenario::uniform(5, 3.0, 1.0, 2).unwrap();
    let a = analyze(&s, Policy::Gps).unwrap();
    let per_batch = renewal::batch_aoi(&a).unwrap();
    let weighted = (3.0 * per_batch[0] + 2.0 * per_batch[1]) / 5.0;
    assert_eq!(s.batch_size(0), 3);
    assert!((renewal::expected_aoi(&a).unwrap() - weighted).abs() < 1e-12);
}
