//! Noisy distance, inner-product and matrix-product oracles.
//!
//! Each oracle returns the exact value perturbed by a draw from a fixed
//! noise law: with probability `1 - 2*delta` the error is uniform on
//! `[-epsilon, epsilon]`, otherwise its magnitude is uniform on
//! `[epsilon, 3*epsilon]` with a random sign. One estimate between rows of
//! norms `a` and `b` charges
//!
//! ```text
//! ceil(a * b * lambda * ln(1/delta) / epsilon)
//! ```
//!
//! quantum algorithmic units (at least one), with no dependence on the
//! dimension. A shadow classical counter records the `d` multiply-adds the
//! same value costs on a classical machine.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cost::Meter;
use crate::data::{inner_product, squared_euclidean};
use crate::error::{Error, Result};
use crate::qram::QramStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    #[default]
    Noisy,
    /// Always returns the ground truth. Costs are still charged, using
    /// `epsilon` and `delta` as reference values.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationParams {
    pub epsilon: f64,
    pub delta: f64,
    /// Overrides the stores' default state-preparation cost.
    pub lambda: Option<f64>,
    pub mode: OracleMode,
}

impl Default for EstimationParams {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            delta: 0.05,
            lambda: None,
            mode: OracleMode::Noisy,
        }
    }
}

impl EstimationParams {
    pub fn noisy(epsilon: f64, delta: f64) -> Self {
        Self {
            epsilon,
            delta,
            ..Self::default()
        }
    }

    pub fn exact(epsilon_ref: f64, delta_ref: f64) -> Self {
        Self {
            epsilon: epsilon_ref,
            delta: delta_ref,
            lambda: None,
            mode: OracleMode::Exact,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            problems.push(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            problems.push(format!("delta must lie in (0, 1/2), got {}", self.delta));
        }
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l > 0.0) {
                problems.push(format!("lambda must be positive, got {l}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(problems.join("; ")))
        }
    }

    /// Probability that a noisy draw lands within `epsilon`.
    pub fn success_probability(&self) -> f64 {
        1.0 - 2.0 * self.delta
    }

    /// Cost of one estimate between vectors of the given norms.
    pub fn unit_cost(&self, norm_a: f64, norm_b: f64, lambda: f64) -> u64 {
        let raw = norm_a * norm_b * lambda * (1.0 / self.delta).ln() / self.epsilon;
        (raw.ceil() as u64).max(1)
    }

    fn resolve_lambda(&self, a: &QramStore, b: &QramStore) -> f64 {
        self.lambda.unwrap_or_else(|| a.lambda().max(b.lambda()))
    }

    /// Additive error of one oracle call and whether it is a success draw.
    pub fn draw_error<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, bool) {
        match self.mode {
            OracleMode::Exact => (0.0, true),
            OracleMode::Noisy => {
                let eps = self.epsilon;
                if rng.gen_bool(self.success_probability()) {
                    (rng.gen_range(-eps..=eps), true)
                } else {
                    let magnitude = rng.gen_range(eps..=3.0 * eps);
                    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    (sign * magnitude, false)
                }
            }
        }
    }
}

/// One oracle output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyEstimate {
    pub value: f64,
    /// Whether the draw came from the success branch.
    pub truth_within_epsilon: bool,
    pub cost_charged: u64,
}

fn check_pair(x: &QramStore, y: &QramStore) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum Quantity {
    DistanceSq,
    InnerProduct,
}

#[allow(clippy::too_many_arguments)]
fn estimate_pair<R: Rng + ?Sized>(
    quantity: Quantity,
    x: &QramStore,
    i: usize,
    y: &QramStore,
    j: usize,
    params: &EstimationParams,
    lambda: f64,
    rng: &mut R,
    meter: Meter<'_>,
) -> Result<NoisyEstimate> {
    let a = x.peek_row(i)?;
    let b = y.peek_row(j)?;
    let truth = match quantity {
        Quantity::DistanceSq => squared_euclidean(a, b)?,
        Quantity::InnerProduct => inner_product(a, b)?,
    };
    let cost = params.unit_cost(x.norm(i)?, y.norm(j)?, lambda);
    meter.quantum(cost)?;
    meter.classical(x.dim() as u64)?;
    let (err, ok) = params.draw_error(rng);
    let value = match (quantity, params.mode) {
        (_, OracleMode::Exact) => truth,
        (Quantity::DistanceSq, OracleMode::Noisy) => (truth + err).max(0.0),
        (Quantity::InnerProduct, OracleMode::Noisy) => truth + err,
    };
    Ok(NoisyEstimate {
        value,
        truth_within_epsilon: ok,
        cost_charged: cost,
    })
}

/// Estimate `|x_i - y_j|^2`. Noisy values are clamped at zero.
pub fn estimate_distance_sq<R: Rng + ?Sized>(
    x: &QramStore,
    i: usize,
    y: &QramStore,
    j: usize,
    params: &EstimationParams,
    rng: &mut R,
    meter: Meter<'_>,
) -> Result<NoisyEstimate> {
    params.validate()?;
    check_pair(x, y)?;
    let lambda = params.resolve_lambda(x, y);
    estimate_pair(Quantity::DistanceSq, x, i, y, j, params, lambda, rng, meter)
}

/// Estimate `<x_i, y_j>`.
pub fn estimate_inner_product<R: Rng + ?Sized>(
    x: &QramStore,
    i: usize,
    y: &QramStore,
    j: usize,
    params: &EstimationParams,
    rng: &mut R,
    meter: Meter<'_>,
) -> Result<NoisyEstimate> {
    params.validate()?;
    check_pair(x, y)?;
    let lambda = params.resolve_lambda(x, y);
    estimate_pair(Quantity::InnerProduct, x, i, y, j, params, lambda, rng, meter)
}

/// Distance estimates for a batch of `(i, j)` pairs, `i` indexing `x` and
/// `j` indexing `y`. Each estimate obeys the same contract as
/// [`estimate_distance_sq`]; the summed quantum cost and the `pairs * d`
/// classical shadow are booked as one charge each.
pub fn estimate_distances_batch<R: Rng + ?Sized>(
    x: &QramStore,
    y: &QramStore,
    pairs: &[(usize, usize)],
    params: &EstimationParams,
    rng: &mut R,
    meter: Meter<'_>,
) -> Result<Vec<NoisyEstimate>> {
    params.validate()?;
    check_pair(x, y)?;
    let lambda = params.resolve_lambda(x, y);
    let scale = lambda * (1.0 / params.delta).ln() / params.epsilon;
    let mut total = 0u64;
    let out = pairs
        .iter()
        .map(|&(i, j)| {
            let truth = squared_euclidean(x.peek_row(i)?, y.peek_row(j)?)?;
            let cost = ((x.norm(i)? * y.norm(j)? * scale).ceil() as u64).max(1);
            total += cost;
            let (err, ok) = params.draw_error(rng);
            let value = match params.mode {
                OracleMode::Exact => truth,
                OracleMode::Noisy => (truth + err).max(0.0),
            };
            Ok(NoisyEstimate {
                value,
                truth_within_epsilon: ok,
                cost_charged: cost,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    meter.quantum(total)?;
    meter.classical((pairs.len() * x.dim()) as u64)?;
    Ok(out)
}

/// Row-major matrix of estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<NoisyEstimate>,
}

impl EstimateMatrix {
    pub fn get(&self, i: usize, j: usize) -> &NoisyEstimate {
        &self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[NoisyEstimate] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> Vec<Vec<f64>> {
        self.entries
            .chunks(self.cols.max(1))
            .map(|r| r.iter().map(|e| e.value).collect())
            .collect()
    }

    pub fn total_cost(&self) -> u64 {
        self.entries.iter().map(|e| e.cost_charged).sum()
    }
}

/// Estimate `Z = X Y^T` entry by entry: exactly `l*u` inner-product
/// estimates, each booked as its own quantum charge. The classical shadow
/// counter is charged `l*u*d` multiply-accumulates in one booking.
pub fn estimate_matrix_product<R: Rng + ?Sized>(
    x: &QramStore,
    y: &QramStore,
    params: &EstimationParams,
    rng: &mut R,
    meter: Meter<'_>,
) -> Result<EstimateMatrix> {
    params.validate()?;
    check_pair(x, y)?;
    let lambda = params.resolve_lambda(x, y);
    let (l, u, d) = (x.len(), y.len(), x.dim());
    let mut entries = Vec::with_capacity(l * u);
    for i in 0..l {
        let a = x.peek_row(i)?;
        let na = x.norm(i)?;
        for j in 0..u {
            let truth = inner_product(a, y.peek_row(j)?)?;
            let cost = params.unit_cost(na, y.norm(j)?, lambda);
            meter.quantum(cost)?;
            let (err, ok) = params.draw_error(rng);
            entries.push(NoisyEstimate {
                value: truth + err,
                truth_within_epsilon: ok,
                cost_charged: cost,
            });
        }
    }
    meter.classical((l * u * d) as u64)?;
    Ok(EstimateMatrix {
        rows: l,
        cols: u,
        entries,
    })
}

/// All point-to-centroid distance estimates from one superposed pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidDistances {
    /// `N x k`; entries carry `cost_charged == 0`, the pass is priced per
    /// centroid in `per_centroid_cost`.
    pub estimates: EstimateMatrix,
    pub per_centroid_cost: Vec<u64>,
}

impl CentroidDistances {
    pub fn total_cost(&self) -> u64 {
        self.per_centroid_cost.iter().sum()
    }
}

/// Distances from every stored point to each of the `k` centroids.
///
/// The point index rides in superposition, so the quantum charge is one
/// estimate per centroid, priced with the largest point norm, and does not
/// depend on `N` or `d`. The classical shadow counter is charged `N*k*d`.
pub fn centroid_distance_map<R: Rng + ?Sized>(
    points: &QramStore,
    centroids: &QramStore,
    k: usize,
    params: &EstimationParams,
    rng: &mut R,
    meter: Meter<'_>,
) -> Result<CentroidDistances> {
    params.validate()?;
    check_pair(points, centroids)?;
    if k == 0 || centroids.is_empty() {
        return Err(Error::invalid("centroid set is empty"));
    }
    if centroids.len() != k {
        return Err(Error::invalid(format!(
            "expected {k} centroids, store holds {}",
            centroids.len()
        )));
    }
    let lambda = params.resolve_lambda(points, centroids);
    let max_norm = points.max_norm();
    let per_centroid_cost: Vec<u64> = centroids
        .norms()
        .iter()
        .map(|c| params.unit_cost(max_norm, *c, lambda))
        .collect();
    for &c in &per_centroid_cost {
        meter.quantum(c)?;
    }
    let n = points.len();
    let mut entries = Vec::with_capacity(n * k);
    for j in 0..n {
        let x = points.peek_row(j)?;
        for m in 0..k {
            let truth = squared_euclidean(x, centroids.peek_row(m)?)?;
            let (err, ok) = params.draw_error(rng);
            let value = match params.mode {
                OracleMode::Exact => truth,
                OracleMode::Noisy => (truth + err).max(0.0),
            };
            entries.push(NoisyEstimate {
                value,
                truth_within_epsilon: ok,
                cost_charged: 0,
            });
        }
    }
    meter.classical((n * k * points.dim()) as u64)?;
    Ok(CentroidDistances {
        estimates: EstimateMatrix {
            rows: n,
            cols: k,
            entries,
        },
        per_centroid_cost,
    })
}
