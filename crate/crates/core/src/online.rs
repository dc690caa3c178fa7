//! Full (transductive) conformal prediction in the on-line protocol: predict
//! one example, reveal its label, absorb it into the bag, repeat.
//!
//! The nonconformity measure is the k-NN distance ratio. Each member of the
//! augmented bag is scored against the bag minus itself, and
//!
//! ```text
//! p = #{i : alpha_i >= alpha_candidate} / (n + 1)
//! ```
//!
//! with the candidate included in the count.
//!
//! [`full_cp_pvalue`] recomputes everything from scratch (O(n²) distances).
//! [`OnlineState`] caches each member's nearest same-label and other-label
//! distances so that a round costs O(n·(d + k)); both paths produce
//! bit-identical alphas.

use serde::{Deserialize, Serialize};

use crate::domain::{FeatureVector, Label, PredictionRegion, SignificanceLevel};
use crate::error::{Error, Result};
use crate::nonconformity::{nearest_by_label, ratio_for, ratio_from_distances, KSmallest, TrainingBag};

/// Full-CP p-value of `(point, hypothesized)` against `bag`, recomputing
/// every leave-one-out alpha.
pub fn full_cp_pvalue(bag: &TrainingBag, k: usize, point: &FeatureVector, hypothesized: Label) -> Result<f64> {
    if bag.is_empty() {
        return Err(Error::EmptyBag);
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    bag.check_dim(point)?;
    let mut augmented = bag.clone();
    augmented.push(point.clone(), hypothesized)?;
    let n = augmented.len();
    let alphas: Vec<f64> = (0..n)
        .map(|i| {
            let (pos, neg) = nearest_by_label(&augmented, &augmented.points()[i], k, Some(i));
            ratio_for(&pos, &neg, augmented.labels()[i], k).alpha()
        })
        .collect();
    let candidate = alphas[n - 1];
    let at_least = alphas.iter().filter(|&&a| a >= candidate).count();
    Ok(at_least as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
struct Neighbourhood {
    same: KSmallest,
    other: KSmallest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub region: PredictionRegion,
    pub true_label: Label,
}

/// Accumulating state of the on-line protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineState {
    bag: TrainingBag,
    k: usize,
    initial_size: usize,
    round: usize,
    errors_so_far: usize,
    history: Vec<RoundRecord>,
    neighbours: Vec<Neighbourhood>,
}

impl OnlineState {
    pub fn new(bag: TrainingBag, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        let n = bag.len();
        let mut neighbours = vec![
            Neighbourhood {
                same: KSmallest::default(),
                other: KSmallest::default(),
            };
            n
        ];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = bag.metric().distance(&bag.points()[i], &bag.points()[j]);
                let same = bag.labels()[i] == bag.labels()[j];
                for (a, _) in [(i, j), (j, i)] {
                    let nb = &mut neighbours[a];
                    if same {
                        nb.same.insert(d, k);
                    } else {
                        nb.other.insert(d, k);
                    }
                }
            }
        }
        Ok(OnlineState {
            initial_size: n,
            bag,
            k,
            round: 0,
            errors_so_far: 0,
            history: Vec::new(),
            neighbours,
        })
    }

    pub fn bag(&self) -> &TrainingBag {
        &self.bag
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn initial_size(&self) -> usize {
        self.initial_size
    }

    pub fn errors_so_far(&self) -> usize {
        self.errors_so_far
    }

    pub fn history(&self) -> &[RoundRecord] {
        &self.history
    }

    pub fn cumulative_error_rate(&self) -> Option<f64> {
        (self.round > 0).then(|| self.errors_so_far as f64 / self.round as f64)
    }

    /// Full-CP p-value of `(point, hypothesized)` using the cached
    /// neighbourhoods.
    pub fn p_value(&self, point: &FeatureVector, hypothesized: Label) -> Result<f64> {
        self.bag.check_dim(point)?;
        let k = self.k;
        let distances: Vec<f64> = self
            .bag
            .points()
            .iter()
            .map(|x| self.bag.metric().distance(x, point))
            .collect();

        let mut cand = Neighbourhood {
            same: KSmallest::default(),
            other: KSmallest::default(),
        };
        for (&d, &y) in distances.iter().zip(self.bag.labels()) {
            if y == hypothesized {
                cand.same.insert(d, k);
            } else {
                cand.other.insert(d, k);
            }
        }
        let alpha_cand = ratio_from_distances(cand.same.mean(k), cand.other.mean(k)).alpha();

        let mut at_least = 1; // the candidate itself
        for ((nb, &d), &y) in self.neighbours.iter().zip(&distances).zip(self.bag.labels()) {
            let alpha = if y == hypothesized {
                ratio_from_distances(nb.same.with(d, k).mean(k), nb.other.mean(k))
            } else {
                ratio_from_distances(nb.same.mean(k), nb.other.with(d, k).mean(k))
            }
            .alpha();
            if alpha >= alpha_cand {
                at_least += 1;
            }
        }
        Ok(at_least as f64 / (self.bag.len() + 1) as f64)
    }

    /// The region for `point`: every label whose p-value exceeds ε.
    pub fn predict(&self, point: &FeatureVector, eps: SignificanceLevel) -> Result<PredictionRegion> {
        let pos = self.p_value(point, Label::Positive)? > eps.epsilon();
        let neg = self.p_value(point, Label::Negative)? > eps.epsilon();
        Ok(PredictionRegion::from_inclusion(pos, neg))
    }

    /// Adds a revealed example to the bag and the neighbour caches.
    fn absorb(&mut self, point: FeatureVector, label: Label) -> Result<()> {
        self.bag.check_dim(&point)?;
        let k = self.k;
        let mut own = Neighbourhood {
            same: KSmallest::default(),
            other: KSmallest::default(),
        };
        for (i, (x, y)) in self.bag.iter().enumerate() {
            let d = self.bag.metric().distance(x, &point);
            let nb = &mut self.neighbours[i];
            if y == label {
                nb.same.insert(d, k);
                own.same.insert(d, k);
            } else {
                nb.other.insert(d, k);
                own.other.insert(d, k);
            }
        }
        self.neighbours.push(own);
        self.bag.push(point, label)
    }
}

/// One protocol round: predict, reveal, absorb.
pub fn online_round(
    mut state: OnlineState,
    point: FeatureVector,
    label: Label,
    eps: SignificanceLevel,
) -> Result<(PredictionRegion, OnlineState)> {
    let region = state.predict(&point, eps)?;
    state.absorb(point, label)?;
    state.round += 1;
    if !region.contains(label) {
        state.errors_so_far += 1;
    }
    state.history.push(RoundRecord {
        region,
        true_label: label,
    });
    Ok((region, state))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub round: usize,
    pub region: PredictionRegion,
    pub true_label: Label,
    pub cumulative_error_rate: f64,
}

/// Runs the protocol over `stream`, starting from `initial`.
pub fn run_online(
    initial: TrainingBag,
    k: usize,
    stream: Vec<(FeatureVector, Label)>,
    eps: SignificanceLevel,
) -> Result<Vec<TrajectoryPoint>> {
    if stream.is_empty() {
        return Err(Error::InvalidArgument("on-line stream is empty".into()));
    }
    let mut state = OnlineState::new(initial, k)?;
    let mut trajectory = Vec::with_capacity(stream.len());
    for (x, y) in stream {
        let (region, next) = online_round(state, x, y, eps)?;
        state = next;
        trajectory.push(TrajectoryPoint {
            round: state.round(),
            region,
            true_label: y,
            cumulative_error_rate: state.errors_so_far() as f64 / state.round() as f64,
        });
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{Negative as N, Positive as P};

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    fn bag_1d(items: &[(f64, Label)]) -> TrainingBag {
        TrainingBag::new(items.iter().map(|&(x, y)| (fv(&[x]), y)).collect()).unwrap()
    }

    fn eps(e: f64) -> SignificanceLevel {
        SignificanceLevel::new(e).unwrap()
    }

    #[test]
    fn two_point_bag_example() {
        let bag = bag_1d(&[(0.0, N), (10.0, P)]);
        // candidate 1/9, (0,N) 1/10, (10,P) +inf
        assert_eq!(full_cp_pvalue(&bag, 1, &fv(&[1.0]), N).unwrap(), 2.0 / 3.0);
        // candidate 9, (0,N) +inf, (10,P) 9/10
        assert_eq!(full_cp_pvalue(&bag, 1, &fv(&[1.0]), P).unwrap(), 2.0 / 3.0);
        let state = OnlineState::new(bag, 1).unwrap();
        assert_eq!(state.p_value(&fv(&[1.0]), N).unwrap(), 2.0 / 3.0);
        let (region, _) = online_round(state, fv(&[1.0]), N, eps(0.5)).unwrap();
        assert_eq!(region, PredictionRegion::Both);
    }

    #[test]
    fn duplicate_candidate_is_fully_conforming() {
        let bag = bag_1d(&[(0.0, N), (3.0, N), (10.0, P)]);
        assert_eq!(full_cp_pvalue(&bag, 1, &fv(&[3.0]), N).unwrap(), 1.0);
    }

    #[test]
    fn single_member_bag_degenerate_case() {
        // candidate (0,P) has no other positive: +inf. The bag member (0,N)
        // has no other negative either: +inf. Both count, p = 2/2.
        let bag = bag_1d(&[(0.0, N)]);
        assert_eq!(full_cp_pvalue(&bag, 1, &fv(&[0.0]), P).unwrap(), 1.0);
        // candidate (0,N): same-label distance 0, no other label -> alpha 0;
        // member (0,N): same-label 0 -> alpha 0. p = 1.
        assert_eq!(full_cp_pvalue(&bag, 1, &fv(&[0.0]), N).unwrap(), 1.0);
    }

    #[test]
    fn p_value_errors() {
        let bag = bag_1d(&[(0.0, N)]);
        assert!(matches!(
            full_cp_pvalue(&bag, 1, &fv(&[0.0, 0.0]), N),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(full_cp_pvalue(&bag, 0, &fv(&[0.0]), N).is_err());
        assert!(run_online(bag, 1, vec![], eps(0.1)).is_err());
    }

    #[test]
    fn boundary_epsilons() {
        let bag = bag_1d(&[(0.0, N), (10.0, P)]);
        let stream: Vec<_> = (0..20)
            .map(|i| (fv(&[i as f64 * 0.7]), if i % 3 == 0 { P } else { N }))
            .collect();
        let at_zero = run_online(bag.clone(), 1, stream.clone(), eps(0.0)).unwrap();
        assert!(at_zero.iter().all(|t| t.region == PredictionRegion::Both && t.cumulative_error_rate == 0.0));
        let at_one = run_online(bag, 1, stream, eps(1.0)).unwrap();
        assert!(at_one.iter().all(|t| t.region == PredictionRegion::Empty && t.cumulative_error_rate == 1.0));
    }

    #[test]
    fn state_bookkeeping() {
        let bag = bag_1d(&[(0.0, N), (10.0, P)]);
        let mut state = OnlineState::new(bag, 1).unwrap();
        let mut last_errors = 0;
        for i in 0..15 {
            let label = if i % 2 == 0 { P } else { N };
            let (_, next) = online_round(state, fv(&[i as f64]), label, eps(0.3)).unwrap();
            state = next;
            assert_eq!(state.bag().len(), state.initial_size() + state.round());
            assert!(state.errors_so_far() >= last_errors && state.errors_so_far() <= state.round());
            let recount = state.history().iter().filter(|r| !r.region.contains(r.true_label)).count();
            assert_eq!(recount, state.errors_so_far());
            last_errors = state.errors_so_far();
        }
    }

    type Case = (Vec<(Vec<f64>, bool)>, Vec<f64>, usize);

    fn arb_points() -> impl Strategy<Value = Case> {
        (1usize..3).prop_flat_map(|d| {
            (
                // small integer grid to force distance ties
                prop::collection::vec((prop::collection::vec((-3i32..3).prop_map(f64::from), d), any::<bool>()), 1..15),
                prop::collection::vec((-3i32..3).prop_map(f64::from), d),
                1usize..4,
            )
        })
    }

    proptest! {
        #[test]
        fn cached_p_value_matches_recomputation((items, point, k) in arb_points(), hyp in any::<bool>()) {
            let hyp = if hyp { P } else { N };
            let bag = TrainingBag::new(items.iter().map(|(x, p)| (fv(x), if *p { P } else { N })).collect()).unwrap();
            let naive = full_cp_pvalue(&bag, k, &fv(&point), hyp).unwrap();
            let state = OnlineState::new(bag.clone(), k).unwrap();
            prop_assert_eq!(state.p_value(&fv(&point), hyp).unwrap(), naive);
        }

        #[test]
        fn cache_survives_absorption((items, point, k) in arb_points()) {
            let (first, rest) = items.split_at(1);
            let to_bag = |v: &[(Vec<f64>, bool)]| v.iter().map(|(x, p)| (fv(x), if *p { P } else { N })).collect::<Vec<_>>();
            let mut state = OnlineState::new(TrainingBag::new(to_bag(first)).unwrap(), k).unwrap();
            for (x, y) in to_bag(rest) {
                state = online_round(state, x, y, eps(0.2)).unwrap().1;
            }
            for hyp in Label::BOTH {
                let naive = full_cp_pvalue(state.bag(), k, &fv(&point), hyp).unwrap();
                prop_assert_eq!(state.p_value(&fv(&point), hyp).unwrap(), naive);
            }
        }
    }
}
