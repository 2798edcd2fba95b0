//! Experiment configuration: a flat set of optional settings that can come
//! from a JSON file and from flags (flags win), resolved per command into a
//! typed plan. Resolution collects every problem before failing.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::data::{BlobSpec, LabelColumn};
use crate::estimators::{EstimationParams, OracleMode};
use crate::learners::{CentroidUpdate, TieBreak};

pub const SCHEMA_VERSION: u32 = 1;

/// Every knob the commands understand. Unset fields take command defaults;
/// reports embed the resolved values so a report can be fed back through
/// `--config`.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every random stream is derived from it.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Dataset CSV (`f1,...,fd,label`, `?` for unlabeled).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Label column: `last`, a zero-based index, or a header name.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,

    /// Number of clusters (generator and K-means).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_cluster: Option<usize>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spread: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labeled_fraction: Option<f64>,

    /// `pnn`, `kmeans`, `self-train` or `matmul-bench` (run); `pnn`,
    /// `kmeans` or `matmul` (bench).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<String>,
    /// `classical`, `quantum-exact` or `quantum-noisy`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,

    #[arg(long, allow_negative_numbers = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    /// `full` or `sampled`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update: Option<String>,
    /// `lowest-index` or `random`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_break: Option<String>,

    /// Matrix size for `matmul-bench`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,

    /// Sweep spec `VAR=V1,V2,...`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
    /// Labeled count for PNN sweeps.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    /// Unlabeled count for PNN sweeps.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<usize>,

    /// `distance`, `inner-product` or `both`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<String>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,

    /// Output path; reports go to stdout when omitted. Not echoed into
    /// reports.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl ExperimentConfig {
    /// `self` with every field set in `top` replaced.
    pub fn overlay(mut self, top: ExperimentConfig) -> Self {
        overlay_fields!(self, top; seed, data, label_column, k, per_cluster, dim, spread,
            labeled_fraction, algorithm, backend, epsilon, delta, lambda, tol, max_iter, update,
            tie_break, n, sweep, l, u, estimator, epsilons, deltas, draws, out);
        self
    }

    /// Read a config file. A previously written report is accepted too: its
    /// embedded `config` object is used.
    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("config: cannot read {}: {e}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| format!("config: {} is not valid JSON: {e}", path.display()))?;
        let inner = match value.get("config") {
            Some(c) if value.get("schema_version").is_some() => c.clone(),
            _ => value,
        };
        serde_json::from_value(inner).map_err(|e| format!("config: {}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Pnn,
    Kmeans,
    SelfTrain,
    MatmulBench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendChoice {
    Classical,
    QuantumExact,
    QuantumNoisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchAlgorithm {
    Pnn,
    Kmeans,
    Matmul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorChoice {
    Distance,
    InnerProduct,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    File { path: PathBuf, label_column: LabelColumn },
    Generate(BlobSpec),
}

/// Accumulates validation problems, one per violated field.
#[derive(Debug, Default)]
pub(crate) struct Problems(pub Vec<String>);

impl Problems {
    fn push(&mut self, field: &str, msg: impl std::fmt::Display) {
        self.0.push(format!("{field}: {msg}"));
    }

    fn positive_f64(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.push(field, format!("must be positive, got {v}"));
        }
    }

    fn at_least(&mut self, field: &str, v: usize, min: usize) {
        if v < min {
            self.push(field, format!("must be at least {min}, got {v}"));
        }
    }

    pub(crate) fn finish(self) -> Result<(), Vec<String>> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(self.0)
        }
    }
}

fn parse_choice<T: Copy>(p: &mut Problems, field: &str, raw: Option<&str>, default: T, options: &[(&str, T)]) -> T {
    match raw {
        None => default,
        Some(s) => match options.iter().find(|(name, _)| *name == s) {
            Some((_, v)) => *v,
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                p.push(
                    field,
                    format!("unknown value `{s}` (expected one of {})", names.join(", ")),
                );
                default
            }
        },
    }
}

fn parse_label_column(raw: &str) -> LabelColumn {
    if raw == "last" {
        LabelColumn::Last
    } else if let Ok(i) = raw.parse::<usize>() {
        LabelColumn::Index(i)
    } else {
        LabelColumn::Name(raw.to_string())
    }
}

pub(crate) const DEFAULT_EPSILON: f64 = 0.1;
pub(crate) const DEFAULT_DELTA: f64 = 0.05;

fn estimation(p: &mut Problems, c: &ExperimentConfig, mode: OracleMode) -> EstimationParams {
    let params = EstimationParams {
        epsilon: c.epsilon.unwrap_or(DEFAULT_EPSILON),
        delta: c.delta.unwrap_or(DEFAULT_DELTA),
        lambda: c.lambda,
        mode,
    };
    p.positive_f64("epsilon", params.epsilon);
    if !(params.delta > 0.0 && params.delta < 0.5) {
        p.push("delta", format!("must lie in (0, 1/2), got {}", params.delta));
    }
    if let Some(l) = params.lambda {
        p.positive_f64("lambda", l);
    }
    params
}

/// Generator settings with their defaults filled in.
fn blob_spec(p: &mut Problems, c: &ExperimentConfig, seed: u64) -> BlobSpec {
    let spec = BlobSpec::new(
        seed,
        c.k.unwrap_or(3),
        c.per_cluster.unwrap_or(20),
        c.dim.unwrap_or(2),
        c.spread.unwrap_or(0.5),
        c.labeled_fraction.unwrap_or(0.1),
    );
    p.at_least("k", spec.k, 1);
    p.at_least("per_cluster", spec.per_cluster, 1);
    p.at_least("dim", spec.dim, 1);
    p.positive_f64("spread", spec.spread);
    if !(0.0..=1.0).contains(&spec.labeled_fraction) {
        p.push(
            "labeled_fraction",
            format!("must lie in [0, 1], got {}", spec.labeled_fraction),
        );
    }
    spec
}

fn echo_blob(echo: &mut ExperimentConfig, spec: &BlobSpec) {
    echo.k = Some(spec.k);
    echo.per_cluster = Some(spec.per_cluster);
    echo.dim = Some(spec.dim);
    echo.spread = Some(spec.spread);
    echo.labeled_fraction = Some(spec.labeled_fraction);
}

pub struct GenPlan {
    pub spec: BlobSpec,
    pub out: PathBuf,
    pub echo: ExperimentConfig,
}

pub fn resolve_gen(c: &ExperimentConfig) -> Result<GenPlan, Vec<String>> {
    let mut p = Problems::default();
    let seed = c.seed.unwrap_or(0);
    let spec = blob_spec(&mut p, c, seed);
    if c.out.is_none() {
        p.push("out", "gen needs an output path");
    }
    p.finish()?;
    let mut echo = ExperimentConfig {
        seed: Some(seed),
        ..Default::default()
    };
    echo_blob(&mut echo, &spec);
    Ok(GenPlan {
        spec,
        out: c.out.clone().expect("checked"),
        echo,
    })
}

pub struct RunPlan {
    pub seed: u64,
    pub source: DatasetSource,
    pub algorithm: Algorithm,
    pub backend: BackendChoice,
    pub params: EstimationParams,
    pub k: Option<usize>,
    pub tol: f64,
    pub max_iter: usize,
    pub update: CentroidUpdate,
    pub tie_break: TieBreak,
    pub n: usize,
    pub out: Option<PathBuf>,
    pub echo: ExperimentConfig,
}

pub fn resolve_run(c: &ExperimentConfig) -> Result<RunPlan, Vec<String>> {
    let mut p = Problems::default();
    let seed = c.seed.unwrap_or(0);
    let mut echo = ExperimentConfig {
        seed: Some(seed),
        ..Default::default()
    };

    let algorithm = parse_choice(
        &mut p,
        "algorithm",
        c.algorithm.as_deref(),
        Algorithm::Pnn,
        &[
            ("pnn", Algorithm::Pnn),
            ("kmeans", Algorithm::Kmeans),
            ("self-train", Algorithm::SelfTrain),
            ("matmul-bench", Algorithm::MatmulBench),
        ],
    );
    let backend = parse_choice(
        &mut p,
        "backend",
        c.backend.as_deref(),
        BackendChoice::Classical,
        &[
            ("classical", BackendChoice::Classical),
            ("quantum-exact", BackendChoice::QuantumExact),
            ("quantum-noisy", BackendChoice::QuantumNoisy),
        ],
    );
    if algorithm == Algorithm::SelfTrain && backend != BackendChoice::Classical {
        p.push(
            "backend",
            "self-train runs a classical 1-NN base learner; use pnn for the quantum variant",
        );
    }
    let mode = if backend == BackendChoice::QuantumNoisy {
        OracleMode::Noisy
    } else {
        OracleMode::Exact
    };
    let params = estimation(&mut p, c, mode);

    let source = match &c.data {
        Some(path) => {
            let raw = c.label_column.clone().unwrap_or_else(|| "last".into());
            echo.data = Some(path.clone());
            echo.label_column = Some(raw.clone());
            DatasetSource::File {
                path: path.clone(),
                label_column: parse_label_column(&raw),
            }
        }
        None => {
            let spec = blob_spec(&mut p, c, crate::rng::child_seed(seed, crate::rng::streams::DATA));
            echo_blob(&mut echo, &spec);
            DatasetSource::Generate(spec)
        }
    };

    let tol = c.tol.unwrap_or(1e-8);
    if !(tol >= 0.0 && tol.is_finite()) {
        p.push("tol", format!("must be nonnegative, got {tol}"));
    }
    let max_iter = c.max_iter.unwrap_or(100);
    p.at_least("max_iter", max_iter, 1);
    let update = parse_choice(
        &mut p,
        "update",
        c.update.as_deref(),
        CentroidUpdate::Full,
        &[("full", CentroidUpdate::Full), ("sampled", CentroidUpdate::Sampled)],
    );
    let tie_break = parse_choice(
        &mut p,
        "tie_break",
        c.tie_break.as_deref(),
        TieBreak::LowestIndex,
        &[("lowest-index", TieBreak::LowestIndex), ("random", TieBreak::Random)],
    );
    if let Some(k) = c.k {
        p.at_least("k", k, 1);
    }
    let n = c.n.unwrap_or(16);
    p.at_least("n", n, 1);
    p.finish()?;

    echo.algorithm = c.algorithm.clone().or_else(|| Some("pnn".into()));
    echo.backend = c.backend.clone().or_else(|| Some("classical".into()));
    if backend != BackendChoice::Classical {
        echo.epsilon = Some(params.epsilon);
        echo.delta = Some(params.delta);
        echo.lambda = params.lambda;
    }
    match algorithm {
        Algorithm::Kmeans => {
            echo.k = c.k.or(echo.k);
            echo.tol = Some(tol);
            echo.max_iter = Some(max_iter);
            echo.update = Some(c.update.clone().unwrap_or_else(|| "full".into()));
        }
        Algorithm::Pnn => {
            echo.tie_break = Some(c.tie_break.clone().unwrap_or_else(|| "lowest-index".into()));
        }
        Algorithm::MatmulBench => {
            let seed_only = ExperimentConfig {
                seed: echo.seed,
                ..Default::default()
            };
            echo = seed_only;
            echo.n = Some(n);
        }
        Algorithm::SelfTrain => {}
    }

    Ok(RunPlan {
        seed,
        source,
        algorithm,
        backend,
        params,
        k: c.k,
        tol,
        max_iter,
        update,
        tie_break,
        n,
        out: c.out.clone(),
        echo,
    })
}

pub struct BenchPlan {
    pub seed: u64,
    pub algorithm: BenchAlgorithm,
    pub variable: String,
    pub values: Vec<usize>,
    pub params: EstimationParams,
    pub k: usize,
    pub dim: usize,
    pub points: usize,
    pub l: usize,
    pub u: usize,
    pub max_iter: usize,
    pub out: Option<PathBuf>,
    pub echo: ExperimentConfig,
}

/// Memory access is treated as a constant in the algorithmic scaling fits,
/// so benches pin the state-preparation cost unless told otherwise.
pub const BENCH_LAMBDA: f64 = 1.0;

pub fn resolve_bench(c: &ExperimentConfig) -> Result<BenchPlan, Vec<String>> {
    let mut p = Problems::default();
    let seed = c.seed.unwrap_or(0);
    let algorithm = parse_choice(
        &mut p,
        "algorithm",
        c.algorithm.as_deref(),
        BenchAlgorithm::Pnn,
        &[
            ("pnn", BenchAlgorithm::Pnn),
            ("kmeans", BenchAlgorithm::Kmeans),
            ("matmul", BenchAlgorithm::Matmul),
        ],
    );
    let (default_var, default_values, allowed): (&str, Vec<usize>, &[&str]) = match algorithm {
        BenchAlgorithm::Pnn => ("d", vec![4, 8, 16, 32, 64, 128, 256], &["d", "u", "l"]),
        BenchAlgorithm::Kmeans => ("n", vec![100, 200, 400, 800, 1600], &["n", "k", "d"]),
        BenchAlgorithm::Matmul => ("n", vec![8, 16, 32, 64], &["n"]),
    };
    let (variable, values) = match &c.sweep {
        None => (default_var.to_string(), default_values),
        Some(spec) => match parse_sweep(spec) {
            Ok(v) => v,
            Err(e) => {
                p.push("sweep", e);
                (default_var.to_string(), default_values)
            }
        },
    };
    if !allowed.contains(&variable.as_str()) {
        p.push(
            "sweep",
            format!(
                "cannot sweep `{variable}` for this algorithm (allowed: {})",
                allowed.join(", ")
            ),
        );
    }
    if values.len() < crate::cost::MIN_SWEEP_POINTS {
        p.push(
            "sweep",
            format!("needs at least {} values", crate::cost::MIN_SWEEP_POINTS),
        );
    }
    if values.contains(&0) {
        p.push("sweep", "values must be positive");
    }

    let mut params = estimation(&mut p, c, OracleMode::Noisy);
    params.lambda = Some(params.lambda.unwrap_or(BENCH_LAMBDA));
    let k = c.k.unwrap_or(4);
    let dim = c.dim.unwrap_or(16);
    let points = c.per_cluster.map_or(400, |pc| pc * k);
    let l = c.l.unwrap_or(10);
    let u = c.u.unwrap_or(90);
    let max_iter = c.max_iter.unwrap_or(5);
    p.at_least("k", k, 1);
    p.at_least("dim", dim, 1);
    p.at_least("l", l, 1);
    p.at_least("max_iter", max_iter, 1);
    if algorithm == BenchAlgorithm::Kmeans {
        let max_k = if variable == "k" {
            values.iter().copied().max().unwrap_or(k)
        } else {
            k
        };
        let min_n = if variable == "n" {
            values.iter().copied().min().unwrap_or(points)
        } else {
            points
        };
        if max_k > min_n {
            p.push("k", format!("k = {max_k} exceeds the smallest point count {min_n}"));
        }
    }
    p.finish()?;

    let mut echo = ExperimentConfig {
        seed: Some(seed),
        algorithm: Some(c.algorithm.clone().unwrap_or_else(|| "pnn".into())),
        sweep: Some(format!(
            "{variable}={}",
            values.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
        )),
        epsilon: Some(params.epsilon),
        delta: Some(params.delta),
        lambda: params.lambda,
        ..Default::default()
    };
    match algorithm {
        BenchAlgorithm::Pnn => {
            echo.l = Some(l);
            echo.u = Some(u);
            echo.dim = Some(dim);
        }
        BenchAlgorithm::Kmeans => {
            echo.k = Some(k);
            echo.dim = Some(dim);
            echo.per_cluster = Some(points / k);
            echo.max_iter = Some(max_iter);
        }
        BenchAlgorithm::Matmul => {}
    }

    Ok(BenchPlan {
        seed,
        algorithm,
        variable,
        values,
        params,
        k,
        dim,
        points: (points / k) * k,
        l,
        u,
        max_iter,
        out: c.out.clone(),
        echo,
    })
}

fn parse_sweep(spec: &str) -> Result<(String, Vec<usize>), String> {
    let (var, vals) = spec
        .split_once('=')
        .ok_or_else(|| format!("expected VAR=V1,V2,..., got `{spec}`"))?;
    let values = vals
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("`{v}` is not a positive integer"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((var.trim().to_lowercase(), values))
}

pub struct VerifyPlan {
    pub seed: u64,
    pub estimators: Vec<EstimatorChoice>,
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    pub draws: usize,
    pub dim: usize,
    pub out: Option<PathBuf>,
    pub echo: ExperimentConfig,
}

pub fn resolve_verify(c: &ExperimentConfig) -> Result<VerifyPlan, Vec<String>> {
    let mut p = Problems::default();
    let seed = c.seed.unwrap_or(0);
    let which = parse_choice(
        &mut p,
        "estimator",
        c.estimator.as_deref(),
        EstimatorChoice::Both,
        &[
            ("distance", EstimatorChoice::Distance),
            ("inner-product", EstimatorChoice::InnerProduct),
            ("both", EstimatorChoice::Both),
        ],
    );
    let estimators = match which {
        EstimatorChoice::Both => vec![EstimatorChoice::Distance, EstimatorChoice::InnerProduct],
        e => vec![e],
    };
    let epsilons = c.epsilons.clone().unwrap_or_else(|| vec![0.01, 0.1]);
    let deltas = c.deltas.clone().unwrap_or_else(|| vec![0.01, 0.05, 0.1]);
    for &e in &epsilons {
        p.positive_f64("epsilons", e);
    }
    for &d in &deltas {
        if !(d > 0.0 && d < 0.5) {
            p.push("deltas", format!("each delta must lie in (0, 1/2), got {d}"));
        }
    }
    if epsilons.is_empty() {
        p.push("epsilons", "must not be empty");
    }
    if deltas.is_empty() {
        p.push("deltas", "must not be empty");
    }
    let draws = c.draws.unwrap_or(10_000);
    p.at_least("draws", draws, 1);
    let dim = c.dim.unwrap_or(8);
    p.at_least("dim", dim, 1);
    p.finish()?;

    let echo = ExperimentConfig {
        seed: Some(seed),
        estimator: Some(c.estimator.clone().unwrap_or_else(|| "both".into())),
        epsilons: Some(epsilons.clone()),
        deltas: Some(deltas.clone()),
        draws: Some(draws),
        dim: Some(dim),
        ..Default::default()
    };
    Ok(VerifyPlan {
        seed,
        estimators,
        epsilons,
        deltas,
        draws,
        dim,
        out: c.out.clone(),
        echo,
    })
}
