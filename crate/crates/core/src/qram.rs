//! Simulated QRAM row store.
//!
//! Rows are kept as plain vectors together with their norms and a binary
//! tree of partial sums of squared norms. Mutations and queries are priced
//! on the ledger: a single-entry mutation costs `ceil(log2(N*d))` quantum
//! memory-access units against `N*d` for a classical RAM rebuild, and every
//! state-preparation query costs `lambda` quantum algorithmic units.

use rand::Rng;

use crate::cost::{Backend, CostKind, Meter};
use crate::data::FeatureVector;
use crate::error::{Error, Result};

/// `ceil(log2(n))` for `n >= 1`, zero for `n <= 1`.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        n.next_power_of_two().trailing_zeros()
    }
}

/// Quantum memory-access units for mutating a single entry of an `n x d`
/// store.
pub fn entry_mutation_cost(n: usize, d: usize) -> u64 {
    u64::from(ceil_log2(n.saturating_mul(d)))
}

#[derive(Debug, Clone)]
pub struct QramStore {
    dim: usize,
    rows: Vec<FeatureVector>,
    norms: Vec<f64>,
    /// Heap-ordered partial sums; node `x` has children `2x` and `2x + 1`,
    /// leaves live at `capacity..2 * capacity`.
    tree: Vec<f64>,
    capacity: usize,
    lambda: Option<f64>,
}

impl QramStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("store dimension must be at least 1"));
        }
        Ok(Self {
            dim,
            rows: Vec::new(),
            norms: Vec::new(),
            tree: vec![0.0; 2],
            capacity: 1,
            lambda: None,
        })
    }

    /// Build a store by inserting `rows` one at a time, charging each insert.
    pub fn from_rows<'a, I>(dim: usize, rows: I, meter: Meter<'_>) -> Result<Self>
    where
        I: IntoIterator<Item = &'a FeatureVector>,
    {
        let mut store = Self::new(dim)?;
        for v in rows {
            store.insert_row(v.clone(), meter)?;
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Per-query state-preparation cost. Defaults to `ceil(log2(N*d))`.
    pub fn lambda(&self) -> f64 {
        self.lambda
            .unwrap_or_else(|| f64::from(ceil_log2(self.len() * self.dim)))
    }

    pub fn set_lambda(&mut self, lambda: Option<f64>) -> Result<()> {
        if let Some(l) = lambda {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidParams(format!("lambda must be positive, got {l}")));
            }
        }
        self.lambda = lambda;
        Ok(())
    }

    pub fn depth(&self) -> u32 {
        self.capacity.trailing_zeros()
    }

    /// Sum of squared row norms (the tree root).
    pub fn total_norm_sq(&self) -> f64 {
        self.tree[1]
    }

    pub fn norm(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.norms[i])
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn max_norm(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }

    /// Uncharged access to a row, for simulator bookkeeping that the modelled
    /// algorithm does not pay for separately.
    pub fn peek_row(&self, i: usize) -> Result<&FeatureVector> {
        self.check_index(i)?;
        Ok(&self.rows[i])
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    /// Node values of the partial-sum tree in heap order, root at index 1.
    pub fn tree_nodes(&self) -> &[f64] {
        &self.tree
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.rows.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.rows.len(),
            });
        }
        Ok(())
    }

    fn check_dim(&self, v: &FeatureVector) -> Result<()> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.dim(),
            });
        }
        Ok(())
    }

    fn charge_mutation(&self, entries: u64, meter: Meter<'_>) -> Result<()> {
        let n = self.len().max(1);
        let per_entry = entry_mutation_cost(n, self.dim);
        meter.charge(Backend::Quantum, CostKind::MemoryAccess, entries * per_entry)?;
        meter.charge(Backend::Classical, CostKind::MemoryAccess, (n * self.dim) as u64)
    }

    fn target_capacity(n: usize) -> usize {
        n.max(1).next_power_of_two()
    }

    fn rebuild(&mut self) {
        self.capacity = Self::target_capacity(self.rows.len());
        self.tree = vec![0.0; 2 * self.capacity];
        for (i, n) in self.norms.iter().enumerate() {
            self.tree[self.capacity + i] = n * n;
        }
        for node in (1..self.capacity).rev() {
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1];
        }
    }

    fn refresh_leaf(&mut self, i: usize) {
        let mut node = self.capacity + i;
        self.tree[node] = self.norms.get(i).map_or(0.0, |n| n * n);
        while node > 1 {
            node /= 2;
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1];
        }
    }

    /// Append a row. Charged as `d` single-entry mutations at the new size.
    pub fn insert_row(&mut self, v: FeatureVector, meter: Meter<'_>) -> Result<usize> {
        self.check_dim(&v)?;
        let i = self.rows.len();
        self.norms.push(v.norm());
        self.rows.push(v);
        if self.rows.len() > self.capacity {
            self.rebuild();
        } else {
            self.refresh_leaf(i);
        }
        self.charge_mutation(self.dim as u64, meter)?;
        Ok(i)
    }

    pub fn update_entry(&mut self, i: usize, j: usize, value: f64, meter: Meter<'_>) -> Result<()> {
        self.check_index(i)?;
        if j >= self.dim {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.dim,
            });
        }
        if !value.is_finite() {
            return Err(Error::NonFinite { index: j, value });
        }
        self.rows[i].set(j, value);
        self.norms[i] = self.rows[i].norm();
        self.refresh_leaf(i);
        self.charge_mutation(1, meter)
    }

    /// Overwrite row `i`: `d` single-entry mutations on the quantum side, one
    /// rebuild on the classical side.
    pub fn replace_row(&mut self, i: usize, v: &FeatureVector, meter: Meter<'_>) -> Result<()> {
        self.check_index(i)?;
        self.check_dim(v)?;
        self.rows[i] = v.clone();
        self.norms[i] = v.norm();
        self.refresh_leaf(i);
        self.charge_mutation(self.dim as u64, meter)
    }

    /// Remove row `i`. The last row moves into slot `i`; its former index is
    /// returned when such a move happened.
    pub fn delete_row(&mut self, i: usize, meter: Meter<'_>) -> Result<Option<usize>> {
        self.check_index(i)?;
        self.charge_mutation(self.dim as u64, meter)?;
        let last = self.rows.len() - 1;
        self.rows.swap_remove(i);
        self.norms.swap_remove(i);
        if Self::target_capacity(self.rows.len()) != self.capacity {
            self.rebuild();
        } else {
            self.refresh_leaf(i);
            self.refresh_leaf(last);
        }
        Ok((i != last).then_some(last))
    }

    /// Prepare `|v_i>`: returns the stored row and its norm, charging
    /// `lambda` quantum algorithmic units.
    pub fn query_row(&self, i: usize, meter: Meter<'_>) -> Result<(&FeatureVector, f64)> {
        self.check_index(i)?;
        meter.quantum(self.lambda().ceil() as u64)?;
        Ok((&self.rows[i], self.norms[i]))
    }

    /// Measure the state `sum_i |v_i| |i>`: index `i` is returned with
    /// probability `|v_i|^2 / sum_j |v_j|^2`. Charges `lambda` units.
    pub fn sample_row_index<R: Rng + ?Sized>(&self, rng: &mut R, meter: Meter<'_>) -> Result<usize> {
        let total = self.total_norm_sq();
        if self.is_empty() || total <= 0.0 {
            return Err(Error::ZeroNormStore);
        }
        meter.quantum(self.lambda().ceil() as u64)?;
        let mut r = rng.gen::<f64>() * total;
        let mut node = 1;
        while node < self.capacity {
            let left = self.tree[2 * node];
            let right = self.tree[2 * node + 1];
            if (r < left && left > 0.0) || right <= 0.0 {
                node *= 2;
            } else {
                r -= left;
                node = 2 * node + 1;
            }
        }
        Ok(node - self.capacity)
    }
}
