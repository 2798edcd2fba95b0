use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TieBreak;
use crate::cost::{phases, CostLedger, LedgerRow};
use crate::data::{squared_euclidean, Dataset, Label};
use crate::error::{Error, Result};
use crate::estimators::{estimate_distances_batch, EstimationParams};
use crate::qram::QramStore;
use crate::rng::{self, streams, SimRng};

/// Labeled set `L` and unlabeled set `U` of a propagation run, both kept as
/// sorted dataset indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PnnState {
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
    labels: Vec<Option<Label>>,
    iteration: usize,
}

impl PnnState {
    pub fn new(ds: &Dataset) -> Result<Self> {
        if ds.num_labeled() == 0 {
            return Err(Error::NoLabeledSeed);
        }
        let l = ds.num_labeled();
        Ok(Self {
            labeled: (0..l).collect(),
            unlabeled: (l..ds.len()).collect(),
            labels: (0..ds.len()).map(|i| ds.label(i)).collect(),
            iteration: 0,
        })
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn label(&self, index: usize) -> Option<Label> {
        self.labels[index]
    }

    fn promote(&mut self, j: usize, label: Label) {
        let pos = self.unlabeled.binary_search(&j).expect("promoted index is unlabeled");
        self.unlabeled.remove(pos);
        let ins = self.labeled.binary_search(&j).unwrap_err();
        self.labeled.insert(ins, j);
        self.labels[j] = Some(label);
        self.iteration += 1;
    }

    /// `(i, j)` for every `i` in `L` and `j` in `U`, `i`-major, both ascending.
    fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.labeled.len() * self.unlabeled.len());
        for &i in &self.labeled {
            out.extend(self.unlabeled.iter().map(|&j| (i, j)));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnnStep {
    pub iteration: usize,
    /// Unlabeled point moved into `L`.
    pub promoted: usize,
    /// Its nearest member of `L`, whose label it takes.
    pub neighbor: usize,
    pub label: Label,
    /// Distance value the selection was made on (an estimate on the
    /// quantum backend).
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PnnRecord {
    #[serde(flatten)]
    pub step: PnnStep,
    pub charges: Vec<LedgerRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PnnOutcome {
    /// Final label of every point, given or propagated.
    pub labels: Vec<Label>,
    pub trace: Vec<PnnRecord>,
}

impl PnnOutcome {
    pub fn steps(&self) -> impl Iterator<Item = &PnnStep> + '_ {
        self.trace.iter().map(|r| &r.step)
    }
}

struct Selector {
    tie_break: TieBreak,
    rng: Option<SimRng>,
}

impl Selector {
    fn new(tie_break: TieBreak, seed: u64) -> Self {
        let rng = matches!(tie_break, TieBreak::Random).then(|| rng::stream(seed, streams::TIE_BREAK));
        Self { tie_break, rng }
    }

    /// Minimum over candidates supplied in ascending `(i, j)` order.
    fn select(&mut self, candidates: impl Iterator<Item = (usize, usize, f64)>) -> Option<(usize, usize, f64)> {
        match self.tie_break {
            TieBreak::LowestIndex => candidates.fold(None, |best, c| match best {
                Some((_, _, d)) if c.2 >= d => best,
                _ => Some(c),
            }),
            TieBreak::Random => {
                let mut ties: Vec<(usize, usize, f64)> = Vec::new();
                for c in candidates {
                    match ties.first() {
                        Some(&(_, _, d)) if c.2 > d => {}
                        Some(&(_, _, d)) if c.2 == d => ties.push(c),
                        _ => {
                            ties.clear();
                            ties.push(c);
                        }
                    }
                }
                if ties.is_empty() {
                    return None;
                }
                let rng = self.rng.as_mut().expect("random tie-break has a stream");
                Some(ties[rng.gen_range(0..ties.len())])
            }
        }
    }
}

fn finish(state: PnnState, trace: Vec<PnnRecord>) -> PnnOutcome {
    PnnOutcome {
        labels: state
            .labels
            .into_iter()
            .map(|z| z.expect("propagation labels every point"))
            .collect(),
        trace,
    }
}

/// Classical propagating nearest neighbour: repeatedly move the unlabeled
/// point closest to any labeled point into `L`, copying that neighbour's
/// label. Each iteration books `|L|*|U|*d` distance arithmetic, `|L|*|U|`
/// comparisons and one assignment.
///
/// `tie_seed` seeds the stream used by [`TieBreak::Random`].
pub fn pnn_classical(ds: &Dataset, tie_break: TieBreak, tie_seed: u64, ledger: &CostLedger) -> Result<PnnOutcome> {
    let mut state = PnnState::new(ds)?;
    let mut selector = Selector::new(tie_break, tie_seed);
    let d = ds.dim() as u64;
    let mut trace = Vec::with_capacity(ds.num_unlabeled());

    while !state.unlabeled.is_empty() {
        let before = ledger.snapshot();
        let (l, u) = (state.labeled.len() as u64, state.unlabeled.len() as u64);

        let mut dists = Vec::with_capacity((l * u) as usize);
        for &i in &state.labeled {
            for &j in &state.unlabeled {
                dists.push((i, j, squared_euclidean(ds.point(i), ds.point(j))?));
            }
        }
        ledger.meter(phases::PNN_DISTANCE).classical(l * u * d)?;

        let (i, j, distance) = selector.select(dists.into_iter()).expect("L and U are nonempty");
        ledger.meter(phases::PNN_MINIMIZE).classical(l * u)?;

        let label = state.labels[i].expect("members of L are labeled");
        state.promote(j, label);
        ledger.meter(phases::PNN_ASSIGN).classical(1)?;

        trace.push(PnnRecord {
            step: PnnStep {
                iteration: state.iteration,
                promoted: j,
                neighbor: i,
                label,
                distance,
            },
            charges: ledger.snapshot().since(&before).rows(),
        });
    }
    Ok(finish(state, trace))
}

/// Quantum propagating nearest neighbour. The points are loaded into a
/// [`QramStore`]; each iteration estimates all `|L|*|U|` distances with the
/// noisy oracle (no factor of `d` in the quantum charge), books `|L|*|U|`
/// comparisons for the minimum search and one unit for the assignment.
///
/// With [`OracleMode::Exact`](crate::OracleMode::Exact) and the same tie
/// policy the trace matches [`pnn_classical`] step for step.
pub fn pnn_quantum<R: Rng + ?Sized>(
    ds: &Dataset,
    params: &EstimationParams,
    tie_break: TieBreak,
    tie_seed: u64,
    rng: &mut R,
    ledger: &CostLedger,
) -> Result<PnnOutcome> {
    params.validate()?;
    let mut state = PnnState::new(ds)?;
    let mut selector = Selector::new(tie_break, tie_seed);
    let mut store = QramStore::from_rows(ds.dim(), ds.points(), ledger.meter(phases::QRAM_MUTATE))?;
    store.set_lambda(params.lambda)?;
    let mut trace = Vec::with_capacity(ds.num_unlabeled());

    while !state.unlabeled.is_empty() {
        let before = ledger.snapshot();
        let (l, u) = (state.labeled.len() as u64, state.unlabeled.len() as u64);

        let pairs = state.pairs();
        let estimates =
            estimate_distances_batch(&store, &store, &pairs, params, rng, ledger.meter(phases::PNN_DISTANCE))?;

        let candidates = pairs.iter().zip(&estimates).map(|(&(i, j), e)| (i, j, e.value));
        let (i, j, distance) = selector.select(candidates).expect("L and U are nonempty");
        ledger.meter(phases::PNN_MINIMIZE).quantum(l * u)?;

        let label = state.labels[i].expect("members of L are labeled");
        state.promote(j, label);
        ledger.meter(phases::PNN_ASSIGN).quantum(1)?;

        trace.push(PnnRecord {
            step: PnnStep {
                iteration: state.iteration,
                promoted: j,
                neighbor: i,
                label,
                distance,
            },
            charges: ledger.snapshot().since(&before).rows(),
        });
    }
    Ok(finish(state, trace))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::cost::{Backend, CostKind};
    use crate::data::FeatureVector;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    fn lab(n: u32) -> Label {
        Label::new(n).unwrap()
    }

    fn two_sided() -> Dataset {
        Dataset::new(
            vec![(fv(&[0.0, 0.0]), lab(1)), (fv(&[10.0, 0.0]), lab(2))],
            vec![fv(&[1.0, 0.0]), fv(&[9.0, 0.0])],
        )
        .unwrap()
    }

    #[test]
    fn hand_worked_two_iterations() {
        // Iteration 1: candidates (0,2)=1, (0,3)=81, (1,2)=81, (1,3)=1; ties
        // at 1 resolve to the lower pair (0,2). Iteration 2: (1,3)=1 wins.
        let ledger = CostLedger::new();
        let out = pnn_classical(&two_sided(), TieBreak::LowestIndex, 0, &ledger).unwrap();
        assert_eq!(out.labels, vec![lab(1), lab(2), lab(1), lab(2)]);
        let steps: Vec<_> = out.steps().map(|s| (s.promoted, s.neighbor, s.distance)).collect();
        assert_eq!(steps, vec![(2, 0, 1.0), (3, 1, 1.0)]);
    }

    #[test]
    fn per_iteration_classical_charges() {
        let ledger = CostLedger::new();
        let out = pnn_classical(&two_sided(), TieBreak::LowestIndex, 0, &ledger).unwrap();
        let first = &out.trace[0].charges;
        let get = |phase: &str| first.iter().find(|r| r.phase == phase).map(|r| r.units);
        // l = 2, u = 2, d = 2
        assert_eq!(get(phases::PNN_DISTANCE), Some(8));
        assert_eq!(get(phases::PNN_MINIMIZE), Some(4));
        assert_eq!(get(phases::PNN_ASSIGN), Some(1));
        // l = 3, u = 1
        let second = &out.trace[1].charges;
        assert_eq!(
            second.iter().find(|r| r.phase == phases::PNN_DISTANCE).unwrap().units,
            6
        );
    }

    #[test]
    fn empty_unlabeled_set_returns_immediately() {
        let ds = Dataset::new(vec![(fv(&[1.0]), lab(1)), (fv(&[2.0]), lab(2))], vec![]).unwrap();
        let ledger = CostLedger::new();
        let out = pnn_classical(&ds, TieBreak::LowestIndex, 0, &ledger).unwrap();
        assert!(out.trace.is_empty());
        assert_eq!(out.labels, vec![lab(1), lab(2)]);
        assert!(ledger.snapshot().is_empty());
    }

    #[test]
    fn single_seed_labels_everything() {
        let ds = Dataset::new(
            vec![(fv(&[0.0]), lab(3))],
            (1..20).map(|i| fv(&[i as f64 * 0.7 - 5.0])).collect(),
        )
        .unwrap();
        let out = pnn_classical(&ds, TieBreak::LowestIndex, 0, &CostLedger::new()).unwrap();
        assert!(out.labels.iter().all(|z| *z == lab(3)));
        assert_eq!(out.trace.len(), 19);
    }

    #[test]
    fn no_labeled_seed_rejected() {
        let ds = Dataset::new(vec![], vec![fv(&[0.0])]).unwrap();
        assert!(matches!(
            pnn_classical(&ds, TieBreak::LowestIndex, 0, &CostLedger::new()),
            Err(Error::NoLabeledSeed)
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(pnn_quantum(
            &ds,
            &EstimationParams::default(),
            TieBreak::LowestIndex,
            0,
            &mut rng,
            &CostLedger::new()
        )
        .is_err());
    }

    #[test]
    fn random_ties_are_seeded() {
        // every unlabeled point is equidistant from both seeds
        let ds = Dataset::new(
            vec![(fv(&[-1.0, 0.0]), lab(1)), (fv(&[1.0, 0.0]), lab(2))],
            (0..8).map(|i| fv(&[0.0, i as f64 - 3.5])).collect(),
        )
        .unwrap();
        let run = |seed| {
            pnn_classical(&ds, TieBreak::Random, seed, &CostLedger::new())
                .unwrap()
                .labels
        };
        assert_eq!(run(4), run(4));
        let distinct: std::collections::BTreeSet<_> = (0..16).map(run).collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn quantum_exact_matches_classical_on_example() {
        let ds = two_sided();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = pnn_quantum(
            &ds,
            &EstimationParams::exact(0.1, 0.05),
            TieBreak::LowestIndex,
            0,
            &mut rng,
            &CostLedger::new(),
        )
        .unwrap();
        let c = pnn_classical(&ds, TieBreak::LowestIndex, 0, &CostLedger::new()).unwrap();
        assert_eq!(q.labels, c.labels);
        assert!(q.steps().eq(c.steps()));
    }

    #[test]
    fn quantum_charges_have_no_dimension_factor() {
        let ledger = CostLedger::new();
        let ds = two_sided();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = EstimationParams::noisy(0.1, 0.05).with_lambda(1.0);
        let out = pnn_quantum(&ds, &params, TieBreak::LowestIndex, 0, &mut rng, &ledger).unwrap();
        let first = &out.trace[0].charges;
        let q = |phase: &str| {
            first
                .iter()
                .find(|r| r.phase == phase && r.backend == Backend::Quantum && r.kind == CostKind::Algorithmic)
                .map(|r| r.units)
        };
        assert_eq!(q(phases::PNN_MINIMIZE), Some(4));
        assert_eq!(q(phases::PNN_ASSIGN), Some(1));
        let per_pair = params.unit_cost(0.0, 0.0, 1.0);
        assert!(q(phases::PNN_DISTANCE).unwrap() >= 4 * per_pair);
    }
}
