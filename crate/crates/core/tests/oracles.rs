//! Data types, QRAM store and estimators checked against independent
//! oracles.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use qssl::cost::phases;
use qssl::{
    estimate_distance_sq, estimate_inner_product, estimate_matrix_product, generate_blobs, inner_product, load_dataset,
    save_dataset, squared_euclidean, Backend, BlobSpec, CostKind, CostLedger, Dataset, EstimationParams, FeatureVector,
    Label, LabelColumn, QramStore,
};

fn fv(v: Vec<f64>) -> FeatureVector {
    FeatureVector::new(v).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect()
}

#[test]
fn squared_euclidean_matches_naive_accumulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let (a, b) = (random_vec(&mut rng, 8), random_vec(&mut rng, 8));
        let mut naive = 0.0;
        for t in 0..8 {
            let diff = a[t] - b[t];
            naive += diff * diff;
        }
        let got = squared_euclidean(&fv(a), &fv(b)).unwrap();
        assert!((got - naive).abs() <= 1e-12 * naive.abs().max(1.0));
    }
}

proptest! {
    #[test]
    fn polarization_identity(pair in (1usize..=16).prop_flat_map(|d| (
        proptest::collection::vec(-100.0f64..100.0, d),
        proptest::collection::vec(-100.0f64..100.0, d),
    ))) {
        let (a, b) = (fv(pair.0), fv(pair.1));
        let lhs = squared_euclidean(&a, &b).unwrap();
        let rhs = inner_product(&a, &a).unwrap() + inner_product(&b, &b).unwrap() - 2.0 * inner_product(&a, &b).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs() + a.norm_sq() + b.norm_sq()));
    }

    #[test]
    fn distance_is_nonnegative_symmetric_and_separating(pair in (1usize..=8).prop_flat_map(|d| (
        proptest::collection::vec(-10.0f64..10.0, d),
        proptest::collection::vec(-10.0f64..10.0, d),
    ))) {
        let (a, b) = (fv(pair.0.clone()), fv(pair.1.clone()));
        let ab = squared_euclidean(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, squared_euclidean(&b, &a).unwrap());
        prop_assert_eq!(ab == 0.0, pair.0 == pair.1);
        prop_assert_eq!(squared_euclidean(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn norm_tree_tracks_random_mutations(
        ops in proptest::collection::vec((0u8..4, 0usize..64, 0usize..3, -4.0f64..4.0), 1..60)
    ) {
        let ledger = CostLedger::new();
        let meter = || ledger.meter(phases::QRAM_MUTATE);
        let mut store = QramStore::new(3).unwrap();
        for (op, i, j, x) in ops {
            let len = store.len();
            match op {
                0 => { store.insert_row(fv(vec![x, 1.0, -x]), meter()).unwrap(); }
                1 if len > 0 => store.update_entry(i % len, j, x, meter()).unwrap(),
                2 if len > 0 => store.replace_row(i % len, &fv(vec![x; 3]), meter()).unwrap(),
                3 if len > 0 => { store.delete_row(i % len, meter()).unwrap(); }
                _ => {}
            }
            let scratch: f64 = store.rows().iter().map(|r| r.as_slice().iter().map(|v| v * v).sum::<f64>()).sum();
            prop_assert!((store.tree_nodes().get(1).copied().unwrap_or(0.0) - scratch).abs() <= 1e-9 * (1.0 + scratch));
            prop_assert!((store.total_norm_sq() - scratch).abs() <= 1e-9 * (1.0 + scratch));
        }
    }

    #[test]
    fn csv_round_trip_arbitrary(rows in proptest::collection::vec(
        (proptest::collection::vec(-1e6f64..1e6, 3), proptest::option::of(1u32..5)), 1..30
    )) {
        let labeled: Vec<_> = rows.iter().filter_map(|(v, z)| z.map(|z| (fv(v.clone()), Label::new(z).unwrap()))).collect();
        let unlabeled: Vec<_> = rows.iter().filter(|(_, z)| z.is_none()).map(|(v, _)| fv(v.clone())).collect();
        let ds = Dataset::new(labeled, unlabeled).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        save_dataset(&ds, &path).unwrap();
        prop_assert_eq!(load_dataset(&path, &LabelColumn::Last).unwrap(), ds);
    }

    #[test]
    fn noisy_errors_stay_within_three_epsilon(seed in any::<u64>(), eps in 0.01f64..1.0, delta in 0.01f64..0.4) {
        let ledger = CostLedger::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = QramStore::from_rows(2, &[fv(vec![0.3, -0.2])], ledger.meter(phases::QRAM_MUTATE)).unwrap();
        let y = QramStore::from_rows(2, &[fv(vec![0.1, 0.4])], ledger.meter(phases::QRAM_MUTATE)).unwrap();
        let params = EstimationParams::noisy(eps, delta);
        for _ in 0..50 {
            let d = estimate_distance_sq(&x, 0, &y, 0, &params, &mut rng, ledger.meter(phases::ESTIMATE_DISTANCE)).unwrap();
            prop_assert!(d.value >= 0.0);
            prop_assert!((d.value - 0.4).abs() <= 3.0 * eps + 1e-12);
            let ip = estimate_inner_product(&x, 0, &y, 0, &params, &mut rng, ledger.meter(phases::ESTIMATE_INNER_PRODUCT)).unwrap();
            prop_assert!((ip.value - (-0.05)).abs() <= 3.0 * eps + 1e-12);
            prop_assert_eq!(ip.truth_within_epsilon, (ip.value + 0.05).abs() <= eps);
        }
    }
}

#[test]
fn generate_blobs_is_pure() {
    let spec = BlobSpec::new(42, 4, 25, 5, 0.7, 0.3);
    let (a, b) = (generate_blobs(&spec).unwrap(), generate_blobs(&spec).unwrap());
    assert_eq!(a.dataset, b.dataset);
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    save_dataset(&a.dataset, &pa).unwrap();
    save_dataset(&b.dataset, &pb).unwrap();
    assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
}

#[test]
fn fifty_row_fixture_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let labeled: Vec<_> = (0..20)
        .map(|i| (fv(random_vec(&mut rng, 4)), Label::new(1 + i % 3).unwrap()))
        .collect();
    let unlabeled: Vec<_> = (0..30).map(|_| fv(random_vec(&mut rng, 4))).collect();
    let ds = Dataset::new(labeled, unlabeled).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fixture.csv");
    save_dataset(&ds, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 51);
    let back = load_dataset(&path, &LabelColumn::Last).unwrap();
    assert_eq!(back, ds);
    for i in 0..ds.len() {
        assert_eq!(back.point(i).as_slice(), ds.point(i).as_slice());
    }
}

#[test]
fn norm_tree_root_after_hundred_updates() {
    let ledger = CostLedger::new();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows: Vec<_> = (0..10).map(|_| fv(random_vec(&mut rng, 6))).collect();
    let mut store = QramStore::from_rows(6, &rows, ledger.meter(phases::QRAM_MUTATE)).unwrap();
    for _ in 0..100 {
        let (i, j) = (rng.gen_range(0..10), rng.gen_range(0..6));
        store
            .update_entry(i, j, rng.gen_range(-3.0..3.0), ledger.meter(phases::QRAM_MUTATE))
            .unwrap();
    }
    let scratch: f64 = store
        .rows()
        .iter()
        .map(|r| r.as_slice().iter().map(|v| v * v).sum::<f64>())
        .sum();
    assert!((store.tree_nodes()[1] - scratch).abs() <= 1e-9);
}

#[test]
fn sampling_follows_squared_norms() {
    let ledger = CostLedger::new();
    let rows = [fv(vec![1.0, 0.0]), fv(vec![0.0, 2.0]), fv(vec![2.0, 0.0])];
    let store = QramStore::from_rows(2, &rows, ledger.meter(phases::QRAM_MUTATE)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 100_000;
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        counts[store
            .sample_row_index(&mut rng, ledger.meter(phases::QRAM_SAMPLE))
            .unwrap()] += 1;
    }
    let exact = [1.0 / 9.0, 4.0 / 9.0, 4.0 / 9.0];
    let tv: f64 = 0.5
        * counts
            .iter()
            .zip(exact)
            .map(|(&c, p)| (c as f64 / draws as f64 - p).abs())
            .sum::<f64>();
    assert!(tv <= 0.01, "tv {tv}");
    let chi2: f64 = counts
        .iter()
        .zip(exact)
        .map(|(&c, p)| {
            let e = p * draws as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new(2.0).unwrap().cdf(chi2);
    assert!(p_value > 1e-3, "chi2 {chi2}, p {p_value}");
}

#[test]
fn thousand_queries_cost_thousand_lambda() {
    let ledger = CostLedger::new();
    let rows: Vec<_> = (0..8).map(|i| fv(vec![i as f64 + 1.0; 8])).collect();
    let mut store = QramStore::from_rows(8, &rows, ledger.meter(phases::QRAM_MUTATE)).unwrap();
    store.set_lambda(Some(2.5)).unwrap();
    for q in 0..1000 {
        store.query_row(q % 8, ledger.meter(phases::QRAM_QUERY)).unwrap();
    }
    // Λ = 2.5 is booked as ceil(2.5) = 3 per query
    assert_eq!(
        ledger.get(Backend::Quantum, CostKind::Algorithmic, phases::QRAM_QUERY),
        3000
    );
}

fn pair_stores(d: usize, ledger: &CostLedger) -> (QramStore, QramStore) {
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    a[0] = 1.0;
    b[d - 1] = 1.0;
    (
        QramStore::from_rows(d, &[fv(a)], ledger.meter(phases::QRAM_MUTATE)).unwrap(),
        QramStore::from_rows(d, &[fv(b)], ledger.meter(phases::QRAM_MUTATE)).unwrap(),
    )
}

#[test]
fn estimate_cost_matches_formula_and_ignores_dimension() {
    let params = EstimationParams::noisy(0.1, 0.05).with_lambda(6.0);
    let expected = (6.0 * 20f64.ln() / 0.1).ceil() as u64;
    assert_eq!(expected, 180);
    let mut costs = Vec::new();
    for d in [4, 4096] {
        let ledger = CostLedger::new();
        let (x, y) = pair_stores(d, &ledger);
        let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
        let e = estimate_distance_sq(&x, 0, &y, 0, &params, &mut rng, ledger.meter(phases::ESTIMATE_DISTANCE)).unwrap();
        costs.push(e.cost_charged);
        assert_eq!(
            ledger.get(Backend::Quantum, CostKind::Algorithmic, phases::ESTIMATE_DISTANCE),
            180
        );
        assert_eq!(
            ledger.get(Backend::Classical, CostKind::Algorithmic, phases::ESTIMATE_DISTANCE),
            d as u64
        );
    }
    assert_eq!(costs, [180, 180]);
}

#[test]
fn coverage_and_mean_error_at_point_zero_five() {
    let ledger = CostLedger::new();
    let (x, y) = pair_stores(4, &ledger);
    let params = EstimationParams::noisy(0.05, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut inside_d, mut inside_ip, mut err_sum) = (0, 0, 0.0);
    for _ in 0..10_000 {
        let d = estimate_distance_sq(&x, 0, &y, 0, &params, &mut rng, ledger.meter(phases::ESTIMATE_DISTANCE)).unwrap();
        inside_d += usize::from((d.value - 2.0).abs() <= 0.05);
        err_sum += d.value - 2.0;
        let ip = estimate_inner_product(
            &x,
            0,
            &y,
            0,
            &params,
            &mut rng,
            ledger.meter(phases::ESTIMATE_INNER_PRODUCT),
        )
        .unwrap();
        inside_ip += usize::from(ip.value.abs() <= 0.05);
    }
    assert!(inside_d as f64 / 1e4 >= 0.8 - 0.012, "{inside_d}");
    assert!(inside_ip as f64 / 1e4 >= 0.8 - 0.012, "{inside_ip}");
    // symmetric error law: mean error is centred on zero
    assert!((err_sum / 1e4).abs() < 0.005, "mean error {}", err_sum / 1e4);
}

fn naive_product(x: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut z = vec![vec![0.0; y.len()]; x.len()];
    for i in 0..x.len() {
        for j in 0..y.len() {
            for t in 0..x[0].len() {
                z[i][j] += x[i][t] * y[j][t];
            }
        }
    }
    z
}

#[test]
fn exact_matrix_product_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let xs: Vec<Vec<f64>> = (0..5).map(|_| random_vec(&mut rng, 3)).collect();
    let ys: Vec<Vec<f64>> = (0..7).map(|_| random_vec(&mut rng, 3)).collect();
    let ledger = CostLedger::new();
    let load = |rows: &[Vec<f64>]| {
        let fvs: Vec<_> = rows.iter().cloned().map(fv).collect();
        QramStore::from_rows(3, &fvs, ledger.meter(phases::QRAM_MUTATE)).unwrap()
    };
    let (x, y) = (load(&xs), load(&ys));
    let z = estimate_matrix_product(
        &x,
        &y,
        &EstimationParams::exact(0.1, 0.05),
        &mut rng,
        ledger.meter(phases::ESTIMATE_MATMUL),
    )
    .unwrap();
    let oracle = naive_product(&xs, &ys);
    for (row, want) in z.values().iter().zip(&oracle) {
        for (a, b) in row.iter().zip(want) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
    assert_eq!(
        ledger.events(Backend::Quantum, CostKind::Algorithmic, phases::ESTIMATE_MATMUL),
        35
    );
    assert_eq!(
        ledger.get(Backend::Classical, CostKind::Algorithmic, phases::ESTIMATE_MATMUL),
        105
    );
}

#[test]
fn matrix_entries_cover_over_repeated_runs() {
    let ledger = CostLedger::new();
    let rows_x = QramStore::from_rows(
        3,
        &[fv(vec![0.5, 0.5, 0.0]), fv(vec![0.0, 1.0, 0.0])],
        ledger.meter(phases::QRAM_MUTATE),
    )
    .unwrap();
    let params = EstimationParams::noisy(0.1, 0.05);
    let exact = [[0.5, 0.5], [0.5, 1.0]];
    let mut inside = [[0usize; 2]; 2];
    let runs = 2000;
    for seed in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = estimate_matrix_product(
            &rows_x,
            &rows_x,
            &params,
            &mut rng,
            ledger.meter(phases::ESTIMATE_MATMUL),
        )
        .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                inside[i][j] += usize::from((z.get(i, j).value - exact[i][j]).abs() <= 0.1);
            }
        }
    }
    let bound = 0.9 - 3.0 * (0.1f64 * 0.9 / runs as f64).sqrt();
    for row in inside {
        for c in row {
            assert!(c as f64 / runs as f64 >= bound, "{c}");
        }
    }
}
