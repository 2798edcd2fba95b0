//! `gen` and `run`.

use serde::Serialize;
use serde_json::{json, Value};

use super::bench::matmul_trial;
use super::config::{Algorithm, BackendChoice, DatasetSource, GenPlan, RunPlan};
use super::CliError;
use crate::cost::{phases, CostLedger, LedgerRow};
use crate::data::{generate_blobs, load_dataset, save_dataset, Dataset, Label};
use crate::error::Error;
use crate::learners::{
    kmeans_classical, kmeans_quantum, pnn_classical, pnn_quantum, self_train, KMeansConfig, NearestNeighbor,
    PromotionPolicy,
};
use crate::rng::{child_seed, stream, streams};

pub fn run_gen(plan: &GenPlan) -> Result<Dataset, CliError> {
    let blobs = generate_blobs(&plan.spec).map_err(CliError::Runtime)?;
    save_dataset(&blobs.dataset, &plan.out).map_err(CliError::Runtime)?;
    Ok(blobs.dataset)
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetSummary {
    pub points: usize,
    pub labeled: usize,
    pub unlabeled: usize,
    pub dim: usize,
}

/// Body of a `run` report.
#[derive(Debug, Clone, Serialize)]
pub struct RunBody {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSummary>,
    pub notes: Vec<String>,
    pub result: Value,
    pub ledger: Vec<LedgerRow>,
}

fn load(plan: &RunPlan) -> Result<Dataset, CliError> {
    match &plan.source {
        DatasetSource::File { path, label_column } => load_dataset(path, label_column).map_err(CliError::Data),
        DatasetSource::Generate(spec) => generate_blobs(spec).map(|b| b.dataset).map_err(CliError::Runtime),
    }
}

/// Input problems discovered only once the data is in hand.
fn data_err(e: Error) -> CliError {
    match e {
        Error::NoLabeledSeed | Error::DimensionMismatch { .. } => CliError::Data(e),
        other => CliError::Runtime(other),
    }
}

fn labels_json(labels: &[Label]) -> Vec<u32> {
    labels.iter().map(|z| z.get()).collect()
}

pub fn run_run(plan: &RunPlan) -> Result<RunBody, CliError> {
    let ledger = CostLedger::new();
    let mut notes = Vec::new();
    let mut oracle = stream(plan.seed, streams::ORACLE);
    let tie_seed = child_seed(plan.seed, streams::TIE_BREAK);

    if plan.algorithm == Algorithm::MatmulBench {
        let result = match plan.backend {
            BackendChoice::Classical => {
                let n = plan.n as u64;
                ledger
                    .meter(phases::ESTIMATE_MATMUL)
                    .classical(n * n * n)
                    .map_err(CliError::Runtime)?;
                json!({ "n": plan.n, "classical_units": n * n * n })
            }
            _ => {
                let t = matmul_trial(plan.n, &plan.params, child_seed(plan.seed, streams::DATA), &ledger)
                    .map_err(CliError::Runtime)?;
                serde_json::to_value(t).map_err(|e| CliError::Runtime(e.into()))?
            }
        };
        return Ok(RunBody {
            dataset: None,
            notes,
            result,
            ledger: ledger.rows(),
        });
    }

    let ds = load(plan)?;
    if ds.num_unlabeled() == 0 {
        notes.push("no unlabeled points: supervised limit, labels returned unchanged".into());
    }
    let quantum = plan.backend != BackendChoice::Classical;
    let result = match plan.algorithm {
        Algorithm::Pnn => {
            let out = if quantum {
                pnn_quantum(&ds, &plan.params, plan.tie_break, tie_seed, &mut oracle, &ledger)
            } else {
                pnn_classical(&ds, plan.tie_break, tie_seed, &ledger)
            }
            .map_err(data_err)?;
            json!({ "labels": labels_json(&out.labels), "trace": out.trace })
        }
        Algorithm::Kmeans => {
            let k = match plan.k.or_else(|| ds.max_label().map(|z| z.get() as usize)) {
                Some(k) => k,
                None => {
                    return Err(CliError::Config(vec![
                        "k: required when the dataset has no labels".into()
                    ]))
                }
            };
            let config = KMeansConfig {
                k,
                init_seed: child_seed(plan.seed, streams::INIT),
                tol: plan.tol,
                max_iter: plan.max_iter,
                update: plan.update,
            };
            let out = if quantum {
                kmeans_quantum(&ds, &config, &plan.params, &mut oracle, &ledger)
            } else {
                kmeans_classical(&ds, &config, &ledger)
            }
            .map_err(|e| match e {
                Error::InvalidArgument(m) => CliError::Config(vec![format!("k: {m}")]),
                e => data_err(e),
            })?;
            let centroids: Vec<&[f64]> = out.state.centroids.iter().map(|c| c.as_slice()).collect();
            json!({
                "k": k,
                "converged": out.converged,
                "iterations": out.trace.len(),
                "objective": out.state.objective,
                "assignments": labels_json(&out.state.assignments),
                "centroids": centroids,
                "trace": out.trace,
            })
        }
        Algorithm::SelfTrain => {
            let out = self_train(&ds, NearestNeighbor::new(), PromotionPolicy::Top(1), &ledger).map_err(data_err)?;
            if out.stagnated {
                notes.push("self-training stopped with points it could not label".into());
            }
            let labels: Vec<Option<u32>> = out.labels.iter().map(|z| z.map(Label::get)).collect();
            let promoted: Vec<(usize, u32)> = out.promoted.iter().map(|(j, z)| (*j, z.get())).collect();
            json!({
                "labels": labels,
                "promoted": promoted,
                "rounds": out.rounds,
                "stagnated": out.stagnated,
            })
        }
        Algorithm::MatmulBench => unreachable!("handled above"),
    };
    Ok(RunBody {
        dataset: Some(DatasetSummary {
            points: ds.len(),
            labeled: ds.num_labeled(),
            unlabeled: ds.num_unlabeled(),
            dim: ds.dim(),
        }),
        notes,
        result,
        ledger: ledger.rows(),
    })
}
