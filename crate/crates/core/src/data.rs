//! Datasets, labels and the exact vector arithmetic that every other module
//! treats as ground truth.
//!
//! Points are indexed `0..N` with the labeled points first (`0..l`) and the
//! unlabeled points after them (`l..N`).

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite, non-empty point in feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some((index, &value)) = components.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self(components))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub(crate) fn set(&mut self, index: usize, value: f64) {
        self.0[index] = value;
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(components: Vec<f64>) -> Result<Self> {
        Self::new(components)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

/// Class or cluster identifier. Labels start at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Label(u32);

impl Label {
    pub fn new(value: u32) -> Result<Self> {
        if value == 0 {
            return Err(Error::invalid("labels start at 1"));
        }
        Ok(Self(value))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Zero-based position of this label in `[1, k]`.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub(crate) fn from_index(index: usize) -> Self {
        Self(index as u32 + 1)
    }
}

impl TryFrom<u32> for Label {
    type Error = Error;

    fn try_from(value: u32) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Label> for u32 {
    fn from(l: Label) -> Self {
        l.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

fn check_dims(a: &FeatureVector, b: &FeatureVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Squared Euclidean distance. Square roots are never taken anywhere in the
/// crate; every comparison is monotone in the squared value.
pub fn squared_euclidean(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.0
        .iter()
        .zip(&b.0)
        .map(|(x, y)| {
            let diff = x - y;
            diff * diff
        })
        .sum())
}

pub fn inner_product(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum())
}

/// A semi-supervised training sample: `l` labeled points followed by `u`
/// unlabeled points, all of the same dimension. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    labeled: Vec<(FeatureVector, Label)>,
    unlabeled: Vec<FeatureVector>,
}

impl Dataset {
    pub fn new(labeled: Vec<(FeatureVector, Label)>, unlabeled: Vec<FeatureVector>) -> Result<Self> {
        let dim = labeled
            .first()
            .map(|(v, _)| v.dim())
            .or_else(|| unlabeled.first().map(FeatureVector::dim))
            .ok_or_else(|| Error::invalid("a dataset needs at least one point"))?;
        for v in labeled.iter().map(|(v, _)| v).chain(&unlabeled) {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.dim(),
                });
            }
        }
        Ok(Self {
            dim,
            labeled,
            unlabeled,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_labeled(&self) -> usize {
        self.labeled.len()
    }

    pub fn num_unlabeled(&self) -> usize {
        self.unlabeled.len()
    }

    pub fn len(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labeled(&self) -> &[(FeatureVector, Label)] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[FeatureVector] {
        &self.unlabeled
    }

    /// Point `index` under the labeled-first indexing convention.
    pub fn point(&self, index: usize) -> &FeatureVector {
        let l = self.labeled.len();
        if index < l {
            &self.labeled[index].0
        } else {
            &self.unlabeled[index - l]
        }
    }

    /// The given label of point `index`, `None` for unlabeled points.
    pub fn label(&self, index: usize) -> Option<Label> {
        self.labeled.get(index).map(|(_, z)| *z)
    }

    pub fn points(&self) -> impl Iterator<Item = &FeatureVector> + '_ {
        self.labeled.iter().map(|(v, _)| v).chain(&self.unlabeled)
    }

    pub fn max_label(&self) -> Option<Label> {
        self.labeled.iter().map(|(_, z)| *z).max()
    }
}

/// Parameters of the synthetic Gaussian-blob generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub seed: u64,
    pub k: usize,
    pub per_cluster: usize,
    pub dim: usize,
    pub spread: f64,
    pub labeled_fraction: f64,
    /// Centers are drawn uniformly from `[-center_box, center_box]^dim`.
    pub center_box: f64,
    /// Minimum Euclidean distance between any two centers.
    pub min_center_gap: f64,
}

impl BlobSpec {
    pub fn new(seed: u64, k: usize, per_cluster: usize, dim: usize, spread: f64, labeled_fraction: f64) -> Self {
        Self {
            seed,
            k,
            per_cluster,
            dim,
            spread,
            labeled_fraction,
            center_box: 10.0,
            min_center_gap: 2.0,
        }
    }
}

/// Output of [`generate_blobs`]: the dataset plus the generating cluster of
/// every point (aligned with dataset indexing) and the cluster centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Blobs {
    pub dataset: Dataset,
    pub truth: Vec<Label>,
    pub centers: Vec<FeatureVector>,
}

impl Blobs {
    /// Smallest squared distance between two distinct centers.
    pub fn min_center_gap_sq(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (a, ca) in self.centers.iter().enumerate() {
            for cb in &self.centers[a + 1..] {
                let d = squared_euclidean(ca, cb).expect("centers share dim");
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }
}

const CENTER_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Deterministic Gaussian blobs.
///
/// Exactly `ceil(labeled_fraction * N)` points are labeled. Labeled points
/// are picked round-robin across clusters (each cluster's members in a
/// seeded shuffled order), so every cluster receives a labeled
/// representative as soon as `l >= k`. Unlabeled points follow in a seeded
/// shuffled order.
pub fn generate_blobs(spec: &BlobSpec) -> Result<Blobs> {
    if spec.k == 0 || spec.per_cluster == 0 || spec.dim == 0 {
        return Err(Error::invalid("k, per_cluster and dim must all be at least 1"));
    }
    if !(0.0..=1.0).contains(&spec.labeled_fraction) {
        return Err(Error::invalid(format!(
            "labeled_fraction must lie in [0, 1], got {}",
            spec.labeled_fraction
        )));
    }
    if !(spec.spread.is_finite() && spec.spread > 0.0) {
        return Err(Error::invalid("spread must be positive"));
    }
    if !(spec.center_box.is_finite() && spec.center_box > 0.0)
        || spec.min_center_gap.is_nan()
        || spec.min_center_gap < 0.0
    {
        return Err(Error::invalid(
            "center_box must be positive and min_center_gap nonnegative",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = place_centers(spec, &mut rng)?;
    let noise = Normal::new(0.0, spec.spread).map_err(|e| Error::invalid(e.to_string()))?;

    let mut members: Vec<Vec<FeatureVector>> = centers
        .iter()
        .map(|c| {
            (0..spec.per_cluster)
                .map(|_| {
                    let v = c.as_slice().iter().map(|x| x + noise.sample(&mut rng)).collect();
                    FeatureVector::new(v)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    for m in &mut members {
        m.shuffle(&mut rng);
    }

    let n = spec.k * spec.per_cluster;
    let num_labeled = (spec.labeled_fraction * n as f64).ceil() as usize;
    let num_labeled = num_labeled.min(n);

    // round-robin interleave of clusters
    let mut order: Vec<(usize, FeatureVector)> = Vec::with_capacity(n);
    let mut iters: Vec<_> = members.into_iter().map(Vec::into_iter).collect();
    loop {
        let before = order.len();
        for (cluster, it) in iters.iter_mut().enumerate() {
            if let Some(v) = it.next() {
                order.push((cluster, v));
            }
        }
        if order.len() == before {
            break;
        }
    }

    let mut rest = order.split_off(num_labeled);
    rest.shuffle(&mut rng);

    let mut truth = Vec::with_capacity(n);
    let labeled = order
        .into_iter()
        .map(|(cluster, v)| {
            let z = Label::from_index(cluster);
            truth.push(z);
            (v, z)
        })
        .collect();
    let unlabeled = rest
        .into_iter()
        .map(|(cluster, v)| {
            truth.push(Label::from_index(cluster));
            v
        })
        .collect();

    Ok(Blobs {
        dataset: Dataset::new(labeled, unlabeled)?,
        truth,
        centers,
    })
}

fn place_centers(spec: &BlobSpec, rng: &mut ChaCha8Rng) -> Result<Vec<FeatureVector>> {
    let gap_sq = spec.min_center_gap * spec.min_center_gap;
    let mut centers: Vec<FeatureVector> = Vec::with_capacity(spec.k);
    while centers.len() < spec.k {
        let mut placed = false;
        for _ in 0..CENTER_PLACEMENT_ATTEMPTS {
            let c = FeatureVector::new(
                (0..spec.dim)
                    .map(|_| rng.gen_range(-spec.center_box..=spec.center_box))
                    .collect(),
            )?;
            let clear = centers
                .iter()
                .all(|o| squared_euclidean(o, &c).expect("same dim") >= gap_sq);
            if clear {
                centers.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::invalid(format!(
                "could not place {} centers {} apart inside the box",
                spec.k, spec.min_center_gap
            )));
        }
    }
    Ok(centers)
}

/// Which CSV column holds the label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
    Name(String),
}

pub const UNLABELED_TOKEN: &str = "?";

/// Read a dataset from CSV. The header is `f1,...,fd,label`; the label cell
/// holds an integer `>= 1` or `?`. Labeled rows keep their relative order and
/// are placed before the unlabeled rows.
pub fn load_dataset(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.len() < 2 {
        return Err(parse_err(
            1,
            "header needs at least one feature column and a label column".into(),
        ));
    }
    let label_at = match label_column {
        LabelColumn::Last => headers.len() - 1,
        LabelColumn::Index(i) if *i < headers.len() => *i,
        LabelColumn::Index(i) => return Err(parse_err(1, format!("label column {i} does not exist"))),
        LabelColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("no column named `{name}`")))?,
    };

    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        let mut features = Vec::with_capacity(headers.len() - 1);
        for (col, cell) in record.iter().enumerate() {
            if col == label_at {
                continue;
            }
            let value: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("feature `{}` is not a number: `{cell}`", &headers[col])))?;
            features.push(value);
        }
        let v = FeatureVector::new(features).map_err(|e| parse_err(line, e.to_string()))?;
        let token = &record[label_at];
        if token == UNLABELED_TOKEN {
            unlabeled.push(v);
        } else {
            let z = token
                .parse::<u32>()
                .ok()
                .and_then(|n| Label::new(n).ok())
                .ok_or_else(|| parse_err(line, format!("unknown label token `{token}`")))?;
            labeled.push((v, z));
        }
    }

    Dataset::new(labeled, unlabeled).map_err(|e| parse_err(0, e.to_string()))
}

/// Write a dataset in the CSV schema read by [`load_dataset`].
pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let header: Vec<String> = (1..=ds.dim())
        .map(|i| format!("f{i}"))
        .chain(["label".to_string()])
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    let rows = ds
        .labeled()
        .iter()
        .map(|(v, z)| (v, z.to_string()))
        .chain(ds.unlabeled().iter().map(|v| (v, UNLABELED_TOKEN.to_string())));
    for (v, token) in rows {
        for x in v.as_slice() {
            write!(out, "{x},").map_err(io)?;
        }
        writeln!(out, "{token}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Pretty-printed JSON report with a trailing newline.
pub fn save_report<T: Serialize + ?Sized>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut body = serde_json::to_string_pretty(report)?;
    body.push('\n');
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}
