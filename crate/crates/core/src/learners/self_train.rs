use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::cost::{phases, CostLedger};
use crate::data::{squared_euclidean, Dataset, FeatureVector, Label};
use crate::error::Result;

/// A prediction for one unlabeled point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// Higher is more confident.
    pub confidence: f64,
    /// Training index backing the prediction; breaks confidence ties.
    pub anchor: usize,
}

/// Base learner for [`self_train`], operating on dataset indices.
pub trait SupervisedLearner {
    fn fit(&mut self, ds: &Dataset, labeled: &[(usize, Label)]) -> Result<()>;

    /// `None` means the learner abstains on this point.
    fn predict(&self, ds: &Dataset, index: usize) -> Result<Option<Prediction>>;
}

/// Which predictions get promoted into the labeled set each round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromotionPolicy {
    /// The `n` most confident predictions.
    Top(usize),
    /// Every prediction with confidence at least the threshold.
    Threshold(f64),
}

/// 1-NN under squared Euclidean distance. Confidence is the negated
/// distance to the nearest training point, so promoting the single most
/// confident prediction promotes the globally nearest unlabeled point.
#[derive(Debug, Clone, Default)]
pub struct NearestNeighbor {
    training: Vec<(usize, Label)>,
}

impl NearestNeighbor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inductive prediction for a point outside the training sample.
    pub fn predict_point(&self, ds: &Dataset, x: &FeatureVector) -> Result<Option<(Label, f64)>> {
        let mut best: Option<(Label, f64)> = None;
        for &(i, z) in &self.training {
            let d = squared_euclidean(ds.point(i), x)?;
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((z, d));
            }
        }
        Ok(best)
    }
}

impl SupervisedLearner for NearestNeighbor {
    fn fit(&mut self, _ds: &Dataset, labeled: &[(usize, Label)]) -> Result<()> {
        self.training = labeled.to_vec();
        self.training.sort_by_key(|(i, _)| *i);
        Ok(())
    }

    fn predict(&self, ds: &Dataset, index: usize) -> Result<Option<Prediction>> {
        let x = ds.point(index);
        let mut best: Option<Prediction> = None;
        for &(i, z) in &self.training {
            let confidence = -squared_euclidean(ds.point(i), x)?;
            if best.is_none_or(|b| confidence > b.confidence) {
                best = Some(Prediction {
                    label: z,
                    confidence,
                    anchor: i,
                });
            }
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfTrainOutcome<L> {
    /// Label of every point; `None` for points left unlabeled on stagnation.
    pub labels: Vec<Option<Label>>,
    /// `(index, label)` in promotion order.
    pub promoted: Vec<(usize, Label)>,
    pub rounds: usize,
    /// Set when a round ended with unlabeled points but nothing promotable.
    pub stagnated: bool,
    #[serde(skip)]
    pub model: L,
}

/// Generic self-training: fit on `L`, predict on `U`, promote according to
/// `policy`, repeat until `U` is empty or nothing can be promoted. The model
/// is refitted on the final labeled set before returning.
///
/// Candidates are ranked by confidence, then anchor index, then unlabeled
/// index, so a 1-NN learner under `Top(1)` reproduces the classical
/// propagating nearest-neighbour classifier.
pub fn self_train<L: SupervisedLearner>(
    ds: &Dataset,
    mut learner: L,
    policy: PromotionPolicy,
    ledger: &CostLedger,
) -> Result<SelfTrainOutcome<L>> {
    let mut labels: Vec<Option<Label>> = (0..ds.len()).map(|i| ds.label(i)).collect();
    let mut labeled: Vec<(usize, Label)> = ds.labeled().iter().enumerate().map(|(i, (_, z))| (i, *z)).collect();
    let mut unlabeled: Vec<usize> = (ds.num_labeled()..ds.len()).collect();
    let mut promoted = Vec::new();
    let mut rounds = 0;
    let mut stagnated = false;

    while !unlabeled.is_empty() {
        learner.fit(ds, &labeled)?;
        ledger.meter(phases::SELF_TRAIN_FIT).classical(labeled.len() as u64)?;

        let mut candidates = Vec::new();
        for &j in &unlabeled {
            if let Some(p) = learner.predict(ds, j)? {
                candidates.push((j, p));
            }
        }
        ledger
            .meter(phases::SELF_TRAIN_PREDICT)
            .classical(unlabeled.len() as u64)?;

        candidates.sort_by(|(ja, a), (jb, b)| {
            b.confidence
                .partial_cmp(&a.confidence)
                .unwrap_or(Ordering::Equal)
                .then(a.anchor.cmp(&b.anchor))
                .then(ja.cmp(jb))
        });
        let chosen: Vec<(usize, Prediction)> = match policy {
            PromotionPolicy::Top(n) => candidates.into_iter().take(n).collect(),
            PromotionPolicy::Threshold(t) => candidates.into_iter().filter(|(_, p)| p.confidence >= t).collect(),
        };
        rounds += 1;
        if chosen.is_empty() {
            stagnated = true;
            break;
        }

        ledger
            .meter(phases::SELF_TRAIN_PROMOTE)
            .classical(chosen.len() as u64)?;
        for (j, p) in chosen {
            labels[j] = Some(p.label);
            labeled.push((j, p.label));
            promoted.push((j, p.label));
            unlabeled.retain(|&x| x != j);
        }
    }
    learner.fit(ds, &labeled)?;

    Ok(SelfTrainOutcome {
        labels,
        promoted,
        rounds,
        stagnated,
        model: learner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{pnn_classical, TieBreak};

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    fn lab(n: u32) -> Label {
        Label::new(n).unwrap()
    }

    struct Abstain;

    impl SupervisedLearner for Abstain {
        fn fit(&mut self, _: &Dataset, _: &[(usize, Label)]) -> Result<()> {
            Ok(())
        }

        fn predict(&self, _: &Dataset, _: usize) -> Result<Option<Prediction>> {
            Ok(None)
        }
    }

    fn sample() -> Dataset {
        Dataset::new(
            vec![(fv(&[0.0, 0.0]), lab(1)), (fv(&[10.0, 0.0]), lab(2))],
            vec![fv(&[1.0, 0.0]), fv(&[9.0, 0.0]), fv(&[5.0, 0.0]), fv(&[4.0, 1.0])],
        )
        .unwrap()
    }

    #[test]
    fn one_nn_top1_matches_pnn() {
        let ds = sample();
        let st = self_train(&ds, NearestNeighbor::new(), PromotionPolicy::Top(1), &CostLedger::new()).unwrap();
        let pnn = pnn_classical(&ds, TieBreak::LowestIndex, 0, &CostLedger::new()).unwrap();
        assert!(!st.stagnated);
        assert_eq!(st.labels.iter().map(|z| z.unwrap()).collect::<Vec<_>>(), pnn.labels);
        let order: Vec<usize> = st.promoted.iter().map(|(j, _)| *j).collect();
        let pnn_order: Vec<usize> = pnn.steps().map(|s| s.promoted).collect();
        assert_eq!(order, pnn_order);
        assert_eq!(st.rounds, 4);
    }

    #[test]
    fn empty_u_is_a_noop() {
        let ds = Dataset::new(vec![(fv(&[1.0]), lab(2))], vec![]).unwrap();
        let st = self_train(&ds, NearestNeighbor::new(), PromotionPolicy::Top(1), &CostLedger::new()).unwrap();
        assert_eq!(st.labels, vec![Some(lab(2))]);
        assert_eq!(st.rounds, 0);
        assert!(!st.stagnated);
    }

    #[test]
    fn abstaining_learner_stagnates() {
        let ds = sample();
        let st = self_train(&ds, Abstain, PromotionPolicy::Top(1), &CostLedger::new()).unwrap();
        assert!(st.stagnated);
        assert!(st.promoted.is_empty());
        assert_eq!(st.labels.iter().filter(|z| z.is_none()).count(), 4);
    }

    #[test]
    fn threshold_policy_promotes_in_batches() {
        let ds = sample();
        // only points within squared distance 1 of L are promotable
        let st = self_train(
            &ds,
            NearestNeighbor::new(),
            PromotionPolicy::Threshold(-1.0),
            &CostLedger::new(),
        )
        .unwrap();
        assert!(st.stagnated);
        assert_eq!(st.promoted, vec![(2, lab(1)), (3, lab(2))]);
        assert_eq!(st.labels[4], None);
    }

    #[test]
    fn fitted_model_predicts_new_points() {
        let ds = sample();
        let st = self_train(&ds, NearestNeighbor::new(), PromotionPolicy::Top(1), &CostLedger::new()).unwrap();
        let (z, d) = st.model.predict_point(&ds, &fv(&[8.5, 0.0])).unwrap().unwrap();
        assert_eq!(z, lab(2));
        assert_eq!(d, 0.25);
    }
}
