//! Scaling sweeps and the estimator coverage check. Sweep points run in
//! parallel; each gets its own ledger and a seed derived from its position,
//! so results do not depend on scheduling.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{BenchAlgorithm, BenchPlan, EstimatorChoice, VerifyPlan};
use super::workloads::{unit_norm_blobs, unit_sphere_dataset, unit_sphere_points};
use crate::cost::{fit_scaling, phases, Backend, CostKind, CostLedger, ScalingReport};
use crate::data::{inner_product, squared_euclidean, BlobSpec};
use crate::error::Result;
use crate::estimators::{estimate_distance_sq, estimate_inner_product, estimate_matrix_product, EstimationParams};
use crate::learners::{kmeans_classical, kmeans_quantum, pnn_classical, pnn_quantum, KMeansConfig, TieBreak};
use crate::qram::QramStore;
use crate::rng::{child_seed, stream, streams};

/// One sweep point. Charges are algorithmic units; for the iterative
/// learners they are averaged per iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub value: usize,
    pub quantum_charge: f64,
    pub classical_charge: f64,
    /// Number of separate quantum charges (oracle calls for matmul).
    pub quantum_events: u64,
    pub iterations: usize,
    /// Share of estimates inside the tolerance (matmul) or of labels that
    /// agree with the classical run (pnn, kmeans).
    pub agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub algorithm: BenchAlgorithm,
    pub variable: String,
    pub rows: Vec<BenchRow>,
    pub quantum_fit: ScalingReport,
    pub classical_fit: ScalingReport,
}

pub fn run_bench(plan: &BenchPlan) -> Result<BenchResult> {
    let rows = plan
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| bench_point(plan, value, child_seed(plan.seed, streams::SWEEP_BASE + i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let pts = |f: fn(&BenchRow) -> f64| rows.iter().map(|r| (r.value as f64, f(r))).collect::<Vec<_>>();
    let quantum_fit = fit_scaling(&plan.variable, &pts(|r| r.quantum_charge))?;
    let classical_fit = fit_scaling(&plan.variable, &pts(|r| r.classical_charge))?;
    Ok(BenchResult {
        algorithm: plan.algorithm,
        variable: plan.variable.clone(),
        rows,
        quantum_fit,
        classical_fit,
    })
}

fn agreement<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    same as f64 / a.len().max(1) as f64
}

/// Measure one sweep point.
pub fn bench_point(plan: &BenchPlan, value: usize, seed: u64) -> Result<BenchRow> {
    let pick = |name: &str, default: usize| if plan.variable == name { value } else { default };
    match plan.algorithm {
        BenchAlgorithm::Pnn => {
            let (l, u, d) = (pick("l", plan.l), pick("u", plan.u), pick("d", plan.dim));
            let ds = unit_sphere_dataset(seed, l, u, d, 2)?;
            let (q, c) = (CostLedger::new(), CostLedger::new());
            let mut rng = stream(seed, streams::ORACLE);
            let quantum = pnn_quantum(&ds, &plan.params, TieBreak::LowestIndex, 0, &mut rng, &q)?;
            let classical = pnn_classical(&ds, TieBreak::LowestIndex, 0, &c)?;
            let iters = u.max(1) as f64;
            Ok(BenchRow {
                value,
                quantum_charge: q.get(Backend::Quantum, CostKind::Algorithmic, phases::PNN_DISTANCE) as f64 / iters,
                classical_charge: c.get(Backend::Classical, CostKind::Algorithmic, phases::PNN_DISTANCE) as f64 / iters,
                quantum_events: q.events(Backend::Quantum, CostKind::Algorithmic, phases::PNN_DISTANCE),
                iterations: u,
                agreement: agreement(&quantum.labels, &classical.labels),
            })
        }
        BenchAlgorithm::Kmeans => {
            let (n, k, d) = (pick("n", plan.points), pick("k", plan.k), pick("d", plan.dim));
            let spec = BlobSpec::new(seed, k, n.div_ceil(k), d, 0.5, 0.1);
            let ds = unit_norm_blobs(&spec)?;
            let mut config = KMeansConfig::new(k, child_seed(seed, streams::INIT));
            config.max_iter = plan.max_iter;
            let (q, c) = (CostLedger::new(), CostLedger::new());
            let mut rng = stream(seed, streams::ORACLE);
            let quantum = kmeans_quantum(&ds, &config, &plan.params, &mut rng, &q)?;
            let classical = kmeans_classical(&ds, &config, &c)?;
            let qi = quantum.trace.len().max(1) as f64;
            let ci = classical.trace.len().max(1) as f64;
            Ok(BenchRow {
                value,
                quantum_charge: q.get(Backend::Quantum, CostKind::Algorithmic, phases::KMEANS_DISTANCE) as f64 / qi,
                classical_charge: c.get(Backend::Classical, CostKind::Algorithmic, phases::KMEANS_DISTANCE) as f64 / ci,
                quantum_events: q.events(Backend::Quantum, CostKind::Algorithmic, phases::KMEANS_DISTANCE),
                iterations: quantum.trace.len(),
                agreement: agreement(&quantum.state.assignments, &classical.state.assignments),
            })
        }
        BenchAlgorithm::Matmul => {
            let m = matmul_trial(value, &plan.params, seed, &CostLedger::new())?;
            Ok(BenchRow {
                value,
                quantum_charge: m.quantum_units as f64,
                classical_charge: m.classical_units as f64,
                quantum_events: m.estimates,
                iterations: 1,
                agreement: m.within_epsilon,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatmulTrial {
    pub n: usize,
    pub estimates: u64,
    pub quantum_units: u64,
    pub classical_units: u64,
    pub within_epsilon: f64,
    pub max_abs_error: f64,
}

/// Estimate `X Y^T` for two random `n x n` matrices with unit-norm rows.
pub fn matmul_trial(n: usize, params: &EstimationParams, seed: u64, ledger: &CostLedger) -> Result<MatmulTrial> {
    let mut data = stream(seed, streams::DATA);
    let xs = unit_sphere_points(&mut data, n, n)?;
    let ys = unit_sphere_points(&mut data, n, n)?;
    let mut x = QramStore::from_rows(n, &xs, ledger.meter(phases::QRAM_MUTATE))?;
    let mut y = QramStore::from_rows(n, &ys, ledger.meter(phases::QRAM_MUTATE))?;
    x.set_lambda(params.lambda)?;
    y.set_lambda(params.lambda)?;
    let mut rng = stream(seed, streams::ORACLE);
    let z = estimate_matrix_product(&x, &y, params, &mut rng, ledger.meter(phases::ESTIMATE_MATMUL))?;
    let mut inside = 0usize;
    let mut worst = 0.0f64;
    for (i, a) in xs.iter().enumerate() {
        for (j, b) in ys.iter().enumerate() {
            let err = (z.get(i, j).value - inner_product(a, b)?).abs();
            worst = worst.max(err);
            if err <= params.epsilon {
                inside += 1;
            }
        }
    }
    let phase = phases::ESTIMATE_MATMUL;
    Ok(MatmulTrial {
        n,
        estimates: ledger.events(Backend::Quantum, CostKind::Algorithmic, phase),
        quantum_units: ledger.get(Backend::Quantum, CostKind::Algorithmic, phase),
        classical_units: ledger.get(Backend::Classical, CostKind::Algorithmic, phase),
        within_epsilon: inside as f64 / (n * n) as f64,
        max_abs_error: worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub estimator: EstimatorChoice,
    pub epsilon: f64,
    pub delta: f64,
    pub draws: usize,
    pub truth: f64,
    pub coverage: f64,
    /// `(1 - 2 delta) - 3 sigma` for a binomial with `draws` trials.
    pub lower_bound: f64,
    pub mean_error: f64,
    pub cost_per_estimate: u64,
    pub pass: bool,
}

/// Lowest acceptable empirical coverage at `delta` over `draws` trials.
pub fn coverage_lower_bound(delta: f64, draws: usize) -> f64 {
    let p = 1.0 - 2.0 * delta;
    p - 3.0 * (2.0 * delta * p / draws as f64).sqrt()
}

pub fn run_verify(plan: &VerifyPlan) -> Result<Vec<CoverageRow>> {
    let mut grid = Vec::new();
    for &est in &plan.estimators {
        for &eps in &plan.epsilons {
            for &delta in &plan.deltas {
                grid.push((est, eps, delta));
            }
        }
    }
    grid.par_iter()
        .enumerate()
        .map(|(i, &(est, eps, delta))| {
            coverage_point(
                est,
                eps,
                delta,
                plan.draws,
                plan.dim,
                child_seed(plan.seed, streams::SWEEP_BASE + i as u64),
            )
        })
        .collect()
}

/// Empirical coverage of one estimator at one `(epsilon, delta)`.
pub fn coverage_point(
    estimator: EstimatorChoice,
    epsilon: f64,
    delta: f64,
    draws: usize,
    dim: usize,
    seed: u64,
) -> Result<CoverageRow> {
    let ledger = CostLedger::new();
    let mut data = stream(seed, streams::DATA);
    let pts = unit_sphere_points(&mut data, 2, dim)?;
    let x = QramStore::from_rows(dim, &pts[..1], ledger.meter(phases::QRAM_MUTATE))?;
    let y = QramStore::from_rows(dim, &pts[1..], ledger.meter(phases::QRAM_MUTATE))?;
    let params = EstimationParams::noisy(epsilon, delta);
    let (truth, phase) = match estimator {
        EstimatorChoice::InnerProduct => (inner_product(&pts[0], &pts[1])?, phases::ESTIMATE_INNER_PRODUCT),
        _ => (squared_euclidean(&pts[0], &pts[1])?, phases::ESTIMATE_DISTANCE),
    };
    let mut rng = stream(seed, streams::ORACLE);
    let mut inside = 0usize;
    let mut err_sum = 0.0;
    let mut cost = 0;
    for _ in 0..draws {
        let e = match estimator {
            EstimatorChoice::InnerProduct => {
                estimate_inner_product(&x, 0, &y, 0, &params, &mut rng, ledger.meter(phase))?
            }
            _ => estimate_distance_sq(&x, 0, &y, 0, &params, &mut rng, ledger.meter(phase))?,
        };
        cost = e.cost_charged;
        let err = e.value - truth;
        err_sum += err;
        if err.abs() <= epsilon {
            inside += 1;
        }
    }
    let coverage = inside as f64 / draws as f64;
    let lower_bound = coverage_lower_bound(delta, draws);
    Ok(CoverageRow {
        estimator,
        epsilon,
        delta,
        draws,
        truth,
        coverage,
        lower_bound,
        mean_error: err_sum / draws as f64,
        cost_per_estimate: cost,
        pass: coverage >= lower_bound,
    })
}
