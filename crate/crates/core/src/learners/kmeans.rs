use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::digest_labels;
use crate::cost::{phases, CostLedger, LedgerRow};
use crate::data::{squared_euclidean, Dataset, FeatureVector, Label};
use crate::error::{Error, Result};
use crate::estimators::{centroid_distance_map, EstimationParams};
use crate::qram::QramStore;
use crate::rng::{self, streams};

/// Which centroids the quantum learner refreshes per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CentroidUpdate {
    /// All `k` centroids, priced as `k` matrix-vector products.
    #[default]
    Full,
    /// Only the centroid whose label register was measured.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub init_seed: u64,
    /// Convergence threshold on the largest squared centroid shift.
    pub tol: f64,
    pub max_iter: usize,
    pub update: CentroidUpdate,
}

impl KMeansConfig {
    pub fn new(k: usize, init_seed: u64) -> Self {
        Self {
            k,
            init_seed,
            tol: 1e-8,
            max_iter: 100,
            update: CentroidUpdate::Full,
        }
    }

    fn validate(&self, ds: &Dataset) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.k > ds.len() {
            return Err(Error::invalid(format!("k = {} exceeds N = {}", self.k, ds.len())));
        }
        if let Some(z) = ds.max_label() {
            if z.index() >= self.k {
                return Err(Error::invalid(format!("label {z} is outside [1, {}]", self.k)));
            }
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::invalid("tol must be nonnegative"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeansState {
    pub centroids: Vec<FeatureVector>,
    pub assignments: Vec<Label>,
    /// `cluster_sets[m]` holds the indices assigned to label `m + 1`.
    pub cluster_sets: Vec<Vec<usize>>,
    pub t: usize,
    /// Within-cluster sum of squared distances to the current centroids.
    pub objective: f64,
}

impl KMeansState {
    /// Nearest-centroid prediction for an arbitrary point; lowest label wins
    /// ties.
    pub fn predict(&self, x: &FeatureVector) -> Result<Label> {
        let mut best = (0, f64::INFINITY);
        for (m, c) in self.centroids.iter().enumerate() {
            let d = squared_euclidean(x, c)?;
            if d < best.1 {
                best = (m, d);
            }
        }
        Ok(Label::from_index(best.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeansIteration {
    pub t: usize,
    #[serde(skip)]
    pub assignments: Vec<Label>,
    pub assignments_digest: String,
    pub centroids: Vec<Vec<f64>>,
    pub objective: f64,
    pub max_shift: f64,
    /// Cluster measured in the label register, sampled-update mode only.
    pub measured: Option<Label>,
    /// Zero-cost bookkeeping events, such as uncomputing the distance
    /// registers.
    pub events: Vec<String>,
    pub charges: Vec<LedgerRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeansOutcome {
    pub state: KMeansState,
    pub converged: bool,
    pub trace: Vec<KMeansIteration>,
}

/// A uniform superposition over one cluster's members.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Membership {
    pub indices: Vec<usize>,
    /// Amplitude placed on each member, `1 / |S_m|`.
    pub weight: f64,
}

/// Measure the label register: returns cluster `m` with probability
/// `|S_m| / N` together with its membership. Sampling a uniformly random
/// point and reading its label realizes exactly that law.
pub fn measure_label_register<R: Rng + ?Sized>(state: &KMeansState, rng: &mut R) -> (Label, Membership) {
    let n = state.assignments.len();
    let z = state.assignments[rng.gen_range(0..n)];
    let indices = state.cluster_sets[z.index()].clone();
    let weight = 1.0 / indices.len() as f64;
    (z, Membership { indices, weight })
}

/// Labeled-mean centroids; a cluster with no labeled member starts at a
/// data point drawn uniformly with a generator seeded by `init_seed`.
pub fn initial_centroids(ds: &Dataset, k: usize, init_seed: u64) -> Result<Vec<FeatureVector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
    let mut sums: Vec<Option<(Vec<f64>, usize)>> = vec![None; k];
    for (v, z) in ds.labeled() {
        let slot = sums
            .get_mut(z.index())
            .ok_or_else(|| Error::invalid(format!("label {z} is outside [1, {k}]")))?;
        let (acc, count) = slot.get_or_insert_with(|| (vec![0.0; ds.dim()], 0));
        for (a, x) in acc.iter_mut().zip(v.as_slice()) {
            *a += x;
        }
        *count += 1;
    }
    sums.into_iter()
        .map(|s| match s {
            Some((acc, count)) => FeatureVector::new(acc.into_iter().map(|a| a / count as f64).collect()),
            None => Ok(ds.point(rng.gen_range(0..ds.len())).clone()),
        })
        .collect()
}

fn cluster_sets(assignments: &[Label], k: usize) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); k];
    for (j, z) in assignments.iter().enumerate() {
        sets[z.index()].push(j);
    }
    sets
}

/// Mean of the members of cluster `m`, or `None` when it is empty. Both
/// backends go through this function so their centroids agree bit for bit.
fn cluster_mean(ds: &Dataset, members: &[usize]) -> Result<Option<FeatureVector>> {
    if members.is_empty() {
        return Ok(None);
    }
    let mut acc = vec![0.0; ds.dim()];
    for &j in members {
        for (a, x) in acc.iter_mut().zip(ds.point(j).as_slice()) {
            *a += x;
        }
    }
    let n = members.len() as f64;
    FeatureVector::new(acc.into_iter().map(|a| a / n).collect()).map(Some)
}

fn objective(ds: &Dataset, assignments: &[Label], centroids: &[FeatureVector]) -> Result<f64> {
    let mut total = 0.0;
    for (j, z) in assignments.iter().enumerate() {
        total += squared_euclidean(ds.point(j), &centroids[z.index()])?;
    }
    Ok(total)
}

fn max_shift(old: &[FeatureVector], new: &[FeatureVector]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (a, b) in old.iter().zip(new) {
        worst = worst.max(squared_euclidean(a, b)?);
    }
    Ok(worst)
}

/// Pinned assignment: labeled points keep their label, unlabeled points take
/// the nearest centroid under `dist(j, m)`, lowest label on ties.
fn assign<F>(ds: &Dataset, k: usize, mut dist: F) -> Result<Vec<Label>>
where
    F: FnMut(usize, usize) -> Result<f64>,
{
    let mut out = Vec::with_capacity(ds.len());
    for j in 0..ds.len() {
        if let Some(z) = ds.label(j) {
            out.push(z);
            continue;
        }
        let mut best = (0, f64::INFINITY);
        for m in 0..k {
            let d = dist(j, m)?;
            if d < best.1 {
                best = (m, d);
            }
        }
        out.push(Label::from_index(best.0));
    }
    Ok(out)
}

fn centroid_rows(centroids: &[FeatureVector]) -> Vec<Vec<f64>> {
    centroids.iter().map(|c| c.as_slice().to_vec()).collect()
}

/// Classical semi-supervised K-means (Lloyd iterations with labeled points
/// pinned to their given cluster). Each iteration books `N*k*d` distance
/// arithmetic, `N*k` comparisons and `N*d` update arithmetic. An empty
/// cluster keeps its previous centroid.
pub fn kmeans_classical(ds: &Dataset, config: &KMeansConfig, ledger: &CostLedger) -> Result<KMeansOutcome> {
    config.validate(ds)?;
    let (n, k, d) = (ds.len() as u64, config.k, ds.dim() as u64);
    let mut centroids = initial_centroids(ds, k, config.init_seed)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut state = None;

    for t in 1..=config.max_iter {
        let before = ledger.snapshot();

        let assignments = assign(ds, k, |j, m| squared_euclidean(ds.point(j), &centroids[m]))?;
        ledger.meter(phases::KMEANS_DISTANCE).classical(n * k as u64 * d)?;
        ledger.meter(phases::KMEANS_ASSIGN).classical(n * k as u64)?;

        let sets = cluster_sets(&assignments, k);
        let mut next = centroids.clone();
        for (m, members) in sets.iter().enumerate() {
            if let Some(c) = cluster_mean(ds, members)? {
                next[m] = c;
            }
        }
        ledger.meter(phases::KMEANS_UPDATE).classical(n * d)?;

        let shift = max_shift(&centroids, &next)?;
        centroids = next;
        let obj = objective(ds, &assignments, &centroids)?;
        trace.push(KMeansIteration {
            t,
            assignments_digest: digest_labels(assignments.iter().map(|z| z.get())),
            assignments: assignments.clone(),
            centroids: centroid_rows(&centroids),
            objective: obj,
            max_shift: shift,
            measured: None,
            events: Vec::new(),
            charges: ledger.snapshot().since(&before).rows(),
        });
        state = Some(KMeansState {
            centroids: centroids.clone(),
            assignments,
            cluster_sets: sets,
            t,
            objective: obj,
        });
        if shift <= config.tol {
            converged = true;
            break;
        }
    }

    Ok(KMeansOutcome {
        state: state.expect("max_iter >= 1"),
        converged,
        trace,
    })
}

/// Quantum semi-supervised K-means.
///
/// Per iteration: one superposed distance-estimation pass over all points
/// (`k` estimate charges, independent of `N` and `d`), pinned assignment on
/// the noisy distances (`k` units), label measurement (one unit) and the
/// centroid update as a matrix-vector product (`N` units per refreshed
/// centroid). Classical shadow counters record what the same steps cost
/// classically. The centroid store is rewritten entry by entry, which lands
/// on the memory-access counters.
///
/// In exact oracle mode with [`CentroidUpdate::Full`] the trace equals that
/// of [`kmeans_classical`] for the same configuration.
pub fn kmeans_quantum<R: Rng + ?Sized>(
    ds: &Dataset,
    config: &KMeansConfig,
    params: &EstimationParams,
    rng: &mut R,
    ledger: &CostLedger,
) -> Result<KMeansOutcome> {
    config.validate(ds)?;
    params.validate()?;
    let (n, k, d) = (ds.len() as u64, config.k, ds.dim() as u64);
    let load = ledger.meter(phases::KMEANS_LOAD);
    let mut points = QramStore::from_rows(ds.dim(), ds.points(), load)?;
    points.set_lambda(params.lambda)?;
    let mut centroids = initial_centroids(ds, k, config.init_seed)?;
    let mut centroid_store = QramStore::from_rows(ds.dim(), &centroids, load)?;
    centroid_store.set_lambda(params.lambda)?;
    let mut measure_rng = rng::stream(config.init_seed, streams::MEASURE);

    let mut trace = Vec::new();
    let mut converged = false;
    let mut state: Option<KMeansState> = None;

    for t in 1..=config.max_iter {
        let before = ledger.snapshot();

        let map = centroid_distance_map(
            &points,
            &centroid_store,
            k,
            params,
            rng,
            ledger.meter(phases::KMEANS_DISTANCE),
        )?;

        let assignments = assign(ds, k, |j, m| Ok(map.estimates.get(j, m).value))?;
        let assign_meter = ledger.meter(phases::KMEANS_ASSIGN);
        assign_meter.quantum(k as u64)?;
        assign_meter.classical(n * k as u64)?;
        let events = vec!["uncompute distance registers".to_string()];

        let sets = cluster_sets(&assignments, k);
        let provisional = KMeansState {
            centroids: centroids.clone(),
            assignments: assignments.clone(),
            cluster_sets: sets.clone(),
            t,
            objective: 0.0,
        };
        let measure = ledger.meter(phases::KMEANS_MEASURE);
        let (refresh, measured): (Vec<usize>, Option<Label>) = match config.update {
            CentroidUpdate::Full => {
                measure.quantum(1)?;
                ((0..k).collect(), None)
            }
            CentroidUpdate::Sampled => {
                let (m, _) = measure_label_register(&provisional, &mut measure_rng);
                measure.quantum(1)?;
                (vec![m.index()], Some(m))
            }
        };

        let update = ledger.meter(phases::KMEANS_UPDATE);
        let mut next = centroids.clone();
        for &m in &refresh {
            if let Some(c) = cluster_mean(ds, &sets[m])? {
                next[m] = c;
            }
            update.quantum(n)?;
        }
        update.classical(n * d)?;
        for &m in &refresh {
            if next[m] != centroids[m] {
                centroid_store.replace_row(m, &next[m], update)?;
            }
        }

        let shift = max_shift(&centroids, &next)?;
        centroids = next;
        let obj = objective(ds, &assignments, &centroids)?;
        trace.push(KMeansIteration {
            t,
            assignments_digest: digest_labels(assignments.iter().map(|z| z.get())),
            assignments: assignments.clone(),
            centroids: centroid_rows(&centroids),
            objective: obj,
            max_shift: shift,
            measured,
            events,
            charges: ledger.snapshot().since(&before).rows(),
        });
        state = Some(KMeansState {
            centroids: centroids.clone(),
            assignments,
            cluster_sets: sets,
            t,
            objective: obj,
        });
        if shift <= config.tol {
            converged = true;
            break;
        }
    }

    Ok(KMeansOutcome {
        state: state.expect("max_iter >= 1"),
        converged,
        trace,
    })
}
