//! Dual cost accounting.
//!
//! Every counter is keyed by backend (classical or quantum), kind (memory
//! access or algorithmic work) and a phase tag. Memory access is booked
//! separately from algorithmic work and never enters the scaling fits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Classical,
    Quantum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    MemoryAccess,
    Algorithmic,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Classical => "classical",
            Backend::Quantum => "quantum",
        })
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostKind::MemoryAccess => "memory_access",
            CostKind::Algorithmic => "algorithmic",
        })
    }
}

/// Phase tags registered on every new ledger.
pub mod phases {
    pub const QRAM_MUTATE: &str = "qram.mutate";
    pub const QRAM_QUERY: &str = "qram.query";
    pub const QRAM_SAMPLE: &str = "qram.sample";

    pub const ESTIMATE_DISTANCE: &str = "estimate.distance";
    pub const ESTIMATE_INNER_PRODUCT: &str = "estimate.inner_product";
    pub const ESTIMATE_MATMUL: &str = "estimate.matmul";
    pub const ESTIMATE_CENTROID_MAP: &str = "estimate.centroid_map";

    pub const PNN_DISTANCE: &str = "pnn.step1.distance";
    pub const PNN_MINIMIZE: &str = "pnn.step2.minimize";
    pub const PNN_ASSIGN: &str = "pnn.step3.assign";

    pub const KMEANS_LOAD: &str = "kmeans.load";
    pub const KMEANS_DISTANCE: &str = "kmeans.step1.distance";
    pub const KMEANS_ASSIGN: &str = "kmeans.step2.assign";
    pub const KMEANS_MEASURE: &str = "kmeans.step3.measure";
    pub const KMEANS_UPDATE: &str = "kmeans.step4.update";

    pub const SELF_TRAIN_FIT: &str = "self_train.fit";
    pub const SELF_TRAIN_PREDICT: &str = "self_train.predict";
    pub const SELF_TRAIN_PROMOTE: &str = "self_train.promote";

    pub const ALL: &[&str] = &[
        QRAM_MUTATE,
        QRAM_QUERY,
        QRAM_SAMPLE,
        ESTIMATE_DISTANCE,
        ESTIMATE_INNER_PRODUCT,
        ESTIMATE_MATMUL,
        ESTIMATE_CENTROID_MAP,
        PNN_DISTANCE,
        PNN_MINIMIZE,
        PNN_ASSIGN,
        KMEANS_LOAD,
        KMEANS_DISTANCE,
        KMEANS_ASSIGN,
        KMEANS_MEASURE,
        KMEANS_UPDATE,
        SELF_TRAIN_FIT,
        SELF_TRAIN_PREDICT,
        SELF_TRAIN_PROMOTE,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CounterKey {
    pub backend: Backend,
    pub kind: CostKind,
    pub phase: String,
}

/// One serialized counter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub backend: Backend,
    pub kind: CostKind,
    pub phase: String,
    pub units: u64,
    /// Number of nonzero charges booked to this counter.
    pub events: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counter {
    units: u64,
    events: u64,
}

#[derive(Debug, Default)]
struct LedgerInner {
    counters: BTreeMap<CounterKey, Counter>,
    totals: BTreeMap<(Backend, CostKind), u64>,
}

/// Thread-safe cost ledger. Counters only ever increase.
#[derive(Debug)]
pub struct CostLedger {
    registered: Mutex<BTreeSet<String>>,
    inner: Mutex<LedgerInner>,
}

impl Default for CostLedger {
    fn default() -> Self {
        Self::new()
    }
}

impl CostLedger {
    /// A ledger with the built-in [`phases`] registered.
    pub fn new() -> Self {
        Self {
            registered: Mutex::new(phases::ALL.iter().map(|p| p.to_string()).collect()),
            inner: Mutex::default(),
        }
    }

    pub fn register(&self, phase: &str) {
        self.registered.lock().unwrap().insert(phase.to_string());
    }

    pub fn is_registered(&self, phase: &str) -> bool {
        self.registered.lock().unwrap().contains(phase)
    }

    pub fn charge(&self, backend: Backend, kind: CostKind, phase: &str, amount: u64) -> Result<()> {
        if !self.is_registered(phase) {
            return Err(Error::UnregisteredPhase(phase.to_string()));
        }
        if amount == 0 {
            return Ok(());
        }
        let key = CounterKey {
            backend,
            kind,
            phase: phase.to_string(),
        };
        let mut inner = self.inner.lock().unwrap();
        let overflow = || Error::CounterOverflow(format!("{backend}/{kind}/{phase}"));
        let current = inner.counters.get(&key).copied().unwrap_or_default();
        let total = inner.totals.get(&(backend, kind)).copied().unwrap_or(0);
        let next = Counter {
            units: current.units.checked_add(amount).ok_or_else(overflow)?,
            events: current.events + 1,
        };
        let next_total = total.checked_add(amount).ok_or_else(overflow)?;
        inner.counters.insert(key, next);
        inner.totals.insert((backend, kind), next_total);
        Ok(())
    }

    pub fn meter<'a>(&'a self, phase: &'a str) -> Meter<'a> {
        Meter { ledger: self, phase }
    }

    pub fn get(&self, backend: Backend, kind: CostKind, phase: &str) -> u64 {
        let key = CounterKey {
            backend,
            kind,
            phase: phase.to_string(),
        };
        self.inner.lock().unwrap().counters.get(&key).map_or(0, |c| c.units)
    }

    /// How many nonzero charges were booked to a counter.
    pub fn events(&self, backend: Backend, kind: CostKind, phase: &str) -> u64 {
        let key = CounterKey {
            backend,
            kind,
            phase: phase.to_string(),
        };
        self.inner.lock().unwrap().counters.get(&key).map_or(0, |c| c.events)
    }

    /// Running total for a backend and kind, maintained independently of the
    /// per-phase counters.
    pub fn total(&self, backend: Backend, kind: CostKind) -> u64 {
        self.inner
            .lock()
            .unwrap()
            .totals
            .get(&(backend, kind))
            .copied()
            .unwrap_or(0)
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot(self.inner.lock().unwrap().counters.clone())
    }

    pub fn rows(&self) -> Vec<LedgerRow> {
        self.snapshot().rows()
    }
}

/// A ledger plus the phase tag that charges should be booked under.
#[derive(Debug, Clone, Copy)]
pub struct Meter<'a> {
    pub ledger: &'a CostLedger,
    pub phase: &'a str,
}

impl<'a> Meter<'a> {
    pub fn charge(&self, backend: Backend, kind: CostKind, amount: u64) -> Result<()> {
        self.ledger.charge(backend, kind, self.phase, amount)
    }

    pub fn quantum(&self, amount: u64) -> Result<()> {
        self.charge(Backend::Quantum, CostKind::Algorithmic, amount)
    }

    pub fn classical(&self, amount: u64) -> Result<()> {
        self.charge(Backend::Classical, CostKind::Algorithmic, amount)
    }

    pub fn with_phase(&self, phase: &'a str) -> Meter<'a> {
        Meter {
            ledger: self.ledger,
            phase,
        }
    }
}

/// Point-in-time copy of every counter.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LedgerSnapshot(BTreeMap<CounterKey, Counter>);

impl LedgerSnapshot {
    pub fn get(&self, backend: Backend, kind: CostKind, phase: &str) -> u64 {
        self.0
            .iter()
            .find(|(k, _)| k.backend == backend && k.kind == kind && k.phase == phase)
            .map_or(0, |(_, v)| v.units)
    }

    pub fn events(&self, backend: Backend, kind: CostKind, phase: &str) -> u64 {
        self.0
            .iter()
            .find(|(k, _)| k.backend == backend && k.kind == kind && k.phase == phase)
            .map_or(0, |(_, v)| v.events)
    }

    pub fn sum(&self, backend: Backend, kind: CostKind) -> u64 {
        self.0
            .iter()
            .filter(|(k, _)| k.backend == backend && k.kind == kind)
            .map(|(_, v)| v.units)
            .sum()
    }

    /// Sum over the phases whose tag starts with `prefix`.
    pub fn sum_prefix(&self, backend: Backend, kind: CostKind, prefix: &str) -> u64 {
        self.0
            .iter()
            .filter(|(k, _)| k.backend == backend && k.kind == kind && k.phase.starts_with(prefix))
            .map(|(_, v)| v.units)
            .sum()
    }

    /// Counters accrued since `earlier`. Counters never decrease, so the
    /// difference is exact.
    pub fn since(&self, earlier: &LedgerSnapshot) -> LedgerSnapshot {
        LedgerSnapshot(
            self.0
                .iter()
                .filter_map(|(k, v)| {
                    let e = earlier.0.get(k).copied().unwrap_or_default();
                    let d = Counter {
                        units: v.units - e.units,
                        events: v.events - e.events,
                    };
                    (d.events > 0).then(|| (k.clone(), d))
                })
                .collect(),
        )
    }

    pub fn rows(&self) -> Vec<LedgerRow> {
        self.0
            .iter()
            .map(|(k, v)| LedgerRow {
                backend: k.backend,
                kind: k.kind,
                phase: k.phase.clone(),
                units: v.units,
                events: v.events,
            })
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Least-squares fit of `ln(charge) = slope * ln(value) + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub variable: String,
    pub values: Vec<f64>,
    pub charges: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

pub const MIN_SWEEP_POINTS: usize = 4;

pub fn fit_scaling(variable: &str, sweep: &[(f64, f64)]) -> Result<ScalingReport> {
    if sweep.len() < MIN_SWEEP_POINTS {
        return Err(Error::invalid(format!(
            "a scaling fit needs at least {MIN_SWEEP_POINTS} points, got {}",
            sweep.len()
        )));
    }
    if let Some((v, c)) = sweep
        .iter()
        .find(|(v, c)| !(*v > 0.0 && *c > 0.0 && v.is_finite() && c.is_finite()))
    {
        return Err(Error::invalid(format!(
            "scaling fit needs positive finite points, got ({v}, {c})"
        )));
    }
    let xs: Vec<f64> = sweep.iter().map(|(v, _)| v.ln()).collect();
    let ys: Vec<f64> = sweep.iter().map(|(_, c)| c.ln()).collect();
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("scaling fit needs at least two distinct swept values"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    Ok(ScalingReport {
        variable: variable.to_string(),
        values: sweep.iter().map(|(v, _)| *v).collect(),
        charges: sweep.iter().map(|(_, c)| *c).collect(),
        slope,
        intercept,
        residual: (sse / n).sqrt(),
    })
}
