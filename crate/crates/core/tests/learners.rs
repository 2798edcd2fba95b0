//! Learners against independent oracles and ledger identities.

use qssl::cost::phases;
use qssl::learners::{
    kmeans_classical, kmeans_quantum, pnn_classical, pnn_quantum, self_train, KMeansConfig, NearestNeighbor,
    PromotionPolicy, TieBreak,
};
use qssl::rng::{stream, streams};
use qssl::{
    generate_blobs, squared_euclidean, Backend, BlobSpec, CostKind, CostLedger, Dataset, EstimationParams,
    FeatureVector, Label,
};

fn fv(v: &[f64]) -> FeatureVector {
    FeatureVector::new(v.to_vec()).unwrap()
}

fn lab(z: u32) -> Label {
    Label::new(z).unwrap()
}

#[test]
fn tight_blobs_are_labeled_by_generating_cluster() {
    let blobs = generate_blobs(&BlobSpec::new(7, 3, 20, 2, 0.01, 0.1)).unwrap();
    let out = pnn_classical(&blobs.dataset, TieBreak::LowestIndex, 0, &CostLedger::new()).unwrap();
    assert_eq!(out.labels, blobs.truth);
}

#[test]
fn two_point_propagation_by_hand() {
    let ds = Dataset::new(
        vec![(fv(&[0.0, 0.0]), lab(1)), (fv(&[10.0, 0.0]), lab(2))],
        vec![fv(&[1.0, 0.0]), fv(&[9.0, 0.0])],
    )
    .unwrap();
    for out in [
        pnn_classical(&ds, TieBreak::LowestIndex, 0, &CostLedger::new()).unwrap(),
        pnn_quantum(
            &ds,
            &EstimationParams::exact(0.1, 0.05),
            TieBreak::LowestIndex,
            0,
            &mut stream(0, streams::ORACLE),
            &CostLedger::new(),
        )
        .unwrap(),
    ] {
        assert_eq!(out.labels, [lab(1), lab(2), lab(1), lab(2)]);
        let steps: Vec<(usize, usize)> = out.steps().map(|s| (s.promoted, s.neighbor)).collect();
        // both candidates sit at distance 1; the lower labeled index wins first
        assert_eq!(steps, [(2, 0), (3, 1)]);
    }
}

/// Every point is reachable from a seed through a chain of promotions, and
/// each promoted point's neighbour was labeled before it.
#[test]
fn propagation_chains_reach_seeds() {
    for seed in 0..10 {
        let ds = generate_blobs(&BlobSpec::new(seed, 3, 15, 3, 1.0, 0.1))
            .unwrap()
            .dataset;
        let out = pnn_classical(&ds, TieBreak::Random, seed, &CostLedger::new()).unwrap();
        let mut labeled_at: Vec<Option<usize>> = (0..ds.len()).map(|i| (i < ds.num_labeled()).then_some(0)).collect();
        for s in out.steps() {
            assert!(labeled_at[s.neighbor].is_some());
            assert!(labeled_at[s.promoted].is_none());
            assert_eq!(out.labels[s.promoted], out.labels[s.neighbor]);
            labeled_at[s.promoted] = Some(s.iteration);
        }
        assert!(labeled_at.iter().all(Option::is_some));
    }
}

/// Plain Lloyd with labeled points clamped, written without any of the
/// library's helpers.
#[allow(clippy::needless_range_loop)]
fn naive_lloyd(ds: &Dataset, k: usize) -> Vec<usize> {
    let d = ds.dim();
    let n = ds.len();
    let mut assign: Vec<usize> = (0..n)
        .map(|i| ds.label(i).map_or(0, |z| z.get() as usize - 1))
        .collect();
    let mut centroids = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for i in 0..ds.num_labeled() {
        for t in 0..d {
            centroids[assign[i]][t] += ds.point(i).as_slice()[t];
        }
        counts[assign[i]] += 1;
    }
    for m in 0..k {
        assert!(counts[m] > 0, "oracle needs a labeled seed per cluster");
        for t in 0..d {
            centroids[m][t] /= counts[m] as f64;
        }
    }
    for _ in 0..100 {
        for i in ds.num_labeled()..n {
            let p = ds.point(i).as_slice();
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (m, c) in centroids.iter().enumerate() {
                let dist: f64 = p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist < best_d {
                    best_d = dist;
                    best = m;
                }
            }
            assign[i] = best;
        }
        let mut next = centroids.clone();
        for m in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| assign[i] == m).collect();
            if members.is_empty() {
                continue;
            }
            next[m] = vec![0.0; d];
            for &i in &members {
                for t in 0..d {
                    next[m][t] += ds.point(i).as_slice()[t];
                }
            }
            for v in next[m].iter_mut() {
                *v /= members.len() as f64;
            }
        }
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            .fold(0.0, f64::max);
        centroids = next;
        if shift <= 1e-8 {
            break;
        }
    }
    assign
}

#[test]
fn kmeans_matches_naive_lloyd_oracle() {
    for seed in 0..5 {
        let ds = generate_blobs(&BlobSpec::new(seed, 3, 20, 2, 2.0, 0.1))
            .unwrap()
            .dataset;
        assert_eq!(ds.len(), 60);
        let oracle = naive_lloyd(&ds, 3);
        let out = kmeans_classical(&ds, &KMeansConfig::new(3, seed), &CostLedger::new()).unwrap();
        let got: Vec<usize> = out.state.assignments.iter().map(|z| z.index()).collect();
        assert_eq!(got, oracle, "seed {seed}");
    }
}

#[test]
fn ledger_phase_sums_equal_totals() {
    let ds = generate_blobs(&BlobSpec::new(2, 2, 25, 3, 1.0, 0.2)).unwrap().dataset;
    assert_eq!(ds.len(), 50);
    let ledger = CostLedger::new();
    let mut rng = stream(2, streams::ORACLE);
    pnn_quantum(
        &ds,
        &EstimationParams::noisy(0.1, 0.05),
        TieBreak::LowestIndex,
        0,
        &mut rng,
        &ledger,
    )
    .unwrap();
    let config = KMeansConfig::new(2, 2);
    kmeans_quantum(&ds, &config, &EstimationParams::noisy(0.1, 0.05), &mut rng, &ledger).unwrap();
    let rows = ledger.rows();
    for backend in [Backend::Classical, Backend::Quantum] {
        for kind in [CostKind::MemoryAccess, CostKind::Algorithmic] {
            let sum: u64 = rows
                .iter()
                .filter(|r| r.backend == backend && r.kind == kind)
                .map(|r| r.units)
                .sum();
            assert_eq!(sum, ledger.total(backend, kind), "{backend} {kind}");
            assert!(sum > 0);
        }
    }
    // algorithmic and memory-access work never share a counter
    assert!(rows
        .iter()
        .filter(|r| r.phase == phases::QRAM_MUTATE)
        .all(|r| r.kind == CostKind::MemoryAccess));
}

#[test]
fn noisy_pnn_tracks_classical_on_separated_blobs() {
    let mut matches = 0;
    for seed in 0..20 {
        let blobs = generate_blobs(&BlobSpec::new(100 + seed, 3, 20, 3, 0.1, 0.1)).unwrap();
        let eps = 0.01 * blobs.min_center_gap_sq().unwrap();
        let ds = &blobs.dataset;
        let q = pnn_quantum(
            ds,
            &EstimationParams::noisy(eps, 0.01),
            TieBreak::LowestIndex,
            0,
            &mut stream(seed, streams::ORACLE),
            &CostLedger::new(),
        )
        .unwrap();
        let c = pnn_classical(ds, TieBreak::LowestIndex, 0, &CostLedger::new()).unwrap();
        matches += usize::from(q.labels == c.labels);
    }
    assert!(matches >= 19, "{matches} of 20 runs matched");
}

#[test]
fn self_training_stops_with_unchanged_u_when_nothing_is_promotable() {
    let ds = Dataset::new(vec![(fv(&[0.0]), lab(1))], vec![fv(&[5.0]), fv(&[6.0])]).unwrap();
    let out = self_train(
        &ds,
        NearestNeighbor::new(),
        PromotionPolicy::Threshold(-1.0),
        &CostLedger::new(),
    )
    .unwrap();
    assert!(out.stagnated);
    assert_eq!(out.labels, [Some(lab(1)), None, None]);
    let nearest = out.model.predict_point(&ds, &fv(&[0.5])).unwrap().unwrap();
    assert_eq!(nearest, (lab(1), squared_euclidean(&fv(&[0.5]), &fv(&[0.0])).unwrap()));
}
