//! Propagating nearest-neighbour classifiers, the generic self-training
//! driver and semi-supervised K-means, each in a classical and a
//! quantum-oracle variant.

mod kmeans;
mod pnn;
mod self_train;

use serde::{Deserialize, Serialize};

pub use kmeans::{
    initial_centroids, kmeans_classical, kmeans_quantum, measure_label_register, CentroidUpdate, KMeansConfig,
    KMeansIteration, KMeansOutcome, KMeansState, Membership,
};
pub use pnn::{pnn_classical, pnn_quantum, PnnOutcome, PnnRecord, PnnState, PnnStep};
pub use self_train::{self_train, NearestNeighbor, Prediction, PromotionPolicy, SelfTrainOutcome, SupervisedLearner};

/// How to choose among exactly tied candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Lowest `(labeled index, unlabeled index)` pair.
    #[default]
    LowestIndex,
    /// Uniformly among tied pairs, from a seeded stream.
    Random,
}

/// FNV-1a over the label values, as lowercase hex.
pub(crate) fn digest_labels<I: IntoIterator<Item = u32>>(labels: I) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in labels {
        for b in v.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}
