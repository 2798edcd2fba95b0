//! Synthetic inputs for benches and estimator checks. Rows are scaled to
//! unit norm so the norm factor in the oracle cost stays fixed across sweeps.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{generate_blobs, BlobSpec, Dataset, FeatureVector, Label};
use crate::error::Result;
use crate::rng::{stream, streams};

/// `n` points drawn uniformly from the unit sphere in `d` dimensions.
pub fn unit_sphere_points<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> Result<Vec<FeatureVector>> {
    (0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break FeatureVector::new(v.into_iter().map(|x| x / norm).collect());
            }
        })
        .collect()
}

/// `l` labeled and `u` unlabeled unit vectors; labels cycle through
/// `1..=classes`.
pub fn unit_sphere_dataset(seed: u64, l: usize, u: usize, d: usize, classes: u32) -> Result<Dataset> {
    let mut rng = stream(seed, streams::DATA);
    let mut pts = unit_sphere_points(&mut rng, l + u, d)?;
    let unlabeled = pts.split_off(l);
    let labeled = pts
        .into_iter()
        .enumerate()
        .map(|(i, p)| Ok((p, Label::new(1 + (i as u32) % classes.max(1))?)))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(labeled, unlabeled)
}

/// Gaussian blobs with every point rescaled to unit norm.
pub fn unit_norm_blobs(spec: &BlobSpec) -> Result<Dataset> {
    let blobs = generate_blobs(spec)?;
    let scale = |p: &FeatureVector| {
        let n = p.norm();
        FeatureVector::new(p.as_slice().iter().map(|x| x / n).collect())
    };
    let labeled = blobs
        .dataset
        .labeled()
        .iter()
        .map(|(p, z)| Ok((scale(p)?, *z)))
        .collect::<Result<Vec<_>>>()?;
    let unlabeled = blobs
        .dataset
        .unlabeled()
        .iter()
        .map(scale)
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(labeled, unlabeled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_have_unit_norm() {
        let ds = unit_sphere_dataset(3, 4, 6, 5, 2).unwrap();
        assert_eq!((ds.num_labeled(), ds.num_unlabeled(), ds.dim()), (4, 6, 5));
        assert!(ds.points().all(|p| (p.norm() - 1.0).abs() < 1e-12));
        assert_eq!(ds.max_label().unwrap().get(), 2);
        let blobs = unit_norm_blobs(&BlobSpec::new(1, 3, 10, 4, 0.5, 0.2)).unwrap();
        assert_eq!(blobs.len(), 30);
        assert!(blobs.points().all(|p| (p.norm() - 1.0).abs() < 1e-12));
    }
}
