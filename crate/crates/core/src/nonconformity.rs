//! Nonconformity measures and the score sources that feed the conformal
//! engines.
//!
//! Two families are provided:
//!
//! * the nearest-neighbour distance ratio, which looks at a point's distance
//!   to its own class relative to the other class, and
//! * probability-type scores (a forest's vote fraction, or the built-in
//!   k-NN class frequency), where the predicted probability of the
//!   hypothesized class is the conformity score.
//!
//! The ratio is a *nonconformity* value (large = strange); the engines work
//! in the conformity direction, so [`conformity_from_ratio`] negates it.

use std::cmp::Ordering;

use crate::domain::{Dataset, FeatureVector, Label, Sample, ScorePair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Euclidean,
}

impl Metric {
    pub fn distance(self, a: &FeatureVector, b: &FeatureVector) -> f64 {
        match self {
            Metric::Euclidean => a.distance(b),
        }
    }
}

/// A bag of labelled examples with a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBag {
    points: Vec<FeatureVector>,
    labels: Vec<Label>,
    metric: Metric,
}

impl TrainingBag {
    pub fn new(examples: Vec<(FeatureVector, Label)>) -> Result<Self> {
        let Some(dim) = examples.first().map(|(x, _)| x.dim()) else {
            return Err(Error::EmptyBag);
        };
        let (points, labels): (Vec<_>, Vec<_>) = examples.into_iter().unzip();
        if let Some(bad) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        Ok(TrainingBag {
            points,
            labels,
            metric: Metric::Euclidean,
        })
    }

    /// Builds a bag from every sample of `data`; each needs features and a
    /// true label.
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        let examples = data
            .iter()
            .map(|s| Ok((s.require_features()?.clone(), s.require_label()?)))
            .collect::<Result<Vec<_>>>()?;
        TrainingBag::new(examples)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn points(&self) -> &[FeatureVector] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureVector, Label)> + '_ {
        self.points.iter().zip(self.labels.iter().copied())
    }

    /// Appends an example. The dimension must match.
    pub fn push(&mut self, point: FeatureVector, label: Label) -> Result<()> {
        self.check_dim(&point)?;
        self.points.push(point);
        self.labels.push(label);
        Ok(())
    }

    /// The same bag with every label flipped.
    pub fn with_flipped_labels(&self) -> TrainingBag {
        TrainingBag {
            points: self.points.clone(),
            labels: self.labels.iter().map(|l| l.flip()).collect(),
            metric: self.metric,
        }
    }

    pub(crate) fn check_dim(&self, point: &FeatureVector) -> Result<()> {
        if point.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: point.dim(),
            });
        }
        Ok(())
    }
}

/// A nonconformity value α ≥ 0; `+inf` is the most nonconforming.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Nonconformity(f64);

impl Nonconformity {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_nan() || alpha < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "nonconformity must be >= 0 and not NaN, got {alpha}"
            )));
        }
        Ok(Nonconformity(alpha))
    }

    pub fn alpha(self) -> f64 {
        self.0
    }
}

/// The distance ratio from the same-label and other-label neighbour
/// distances, `None` meaning no such neighbour exists.
///
/// Degenerate cases follow the monotone limits of the ratio: a zero
/// numerator gives 0, a zero denominator gives `+inf`, `0/0` gives 1, a
/// missing same-label neighbour gives `+inf` and a missing other-label
/// neighbour gives 0.
pub fn ratio_from_distances(same: Option<f64>, other: Option<f64>) -> Nonconformity {
    let alpha = match (same, other) {
        (None, _) => f64::INFINITY,
        (Some(_), None) => 0.0,
        (Some(s), Some(o)) if s == 0.0 && o == 0.0 => 1.0,
        (Some(0.0), Some(_)) => 0.0,
        (Some(_), Some(0.0)) => f64::INFINITY,
        (Some(s), Some(o)) => s / o,
    };
    Nonconformity(alpha)
}

/// Mean of the `k` smallest entries of an ascending slice (fewer if the
/// slice is shorter). Summation runs in ascending order.
pub(crate) fn mean_of_smallest(sorted: &[f64], k: usize) -> Option<f64> {
    let take = k.min(sorted.len());
    if take == 0 {
        return None;
    }
    let sum: f64 = sorted[..take].iter().sum();
    Some(sum / take as f64)
}

/// Up to `k` smallest distances seen so far, ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct KSmallest(Vec<f64>);

impl KSmallest {
    pub(crate) fn insert(&mut self, d: f64, k: usize) {
        let at = self.0.partition_point(|&x| x <= d);
        if at < k {
            self.0.insert(at, d);
            self.0.truncate(k);
        }
    }

    pub(crate) fn with(&self, d: f64, k: usize) -> KSmallest {
        let mut out = self.clone();
        out.insert(d, k);
        out
    }

    pub(crate) fn mean(&self, k: usize) -> Option<f64> {
        mean_of_smallest(&self.0, k)
    }
}

/// The `k` nearest distances from `point` to positive and to negative bag
/// members. `skip` excludes one member (leave-one-out).
pub(crate) fn nearest_by_label(
    bag: &TrainingBag,
    point: &FeatureVector,
    k: usize,
    skip: Option<usize>,
) -> (KSmallest, KSmallest) {
    let mut pos = KSmallest::default();
    let mut neg = KSmallest::default();
    for (i, (x, y)) in bag.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let d = bag.metric().distance(point, x);
        match y {
            Label::Positive => pos.insert(d, k),
            Label::Negative => neg.insert(d, k),
        }
    }
    (pos, neg)
}

/// Ratio for `hypothesized` from per-label nearest distances.
pub(crate) fn ratio_for(pos: &KSmallest, neg: &KSmallest, hypothesized: Label, k: usize) -> Nonconformity {
    let (same, other) = match hypothesized {
        Label::Positive => (pos, neg),
        Label::Negative => (neg, pos),
    };
    ratio_from_distances(same.mean(k), other.mean(k))
}

fn check_ratio_args(bag: &TrainingBag, point: &FeatureVector, k: usize) -> Result<()> {
    if bag.is_empty() {
        return Err(Error::EmptyBag);
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    bag.check_dim(point)
}

/// Distance-ratio nonconformity with a single nearest neighbour on each side.
pub fn knn_distance_ratio(
    bag: &TrainingBag,
    point: &FeatureVector,
    hypothesized: Label,
) -> Result<Nonconformity> {
    knn_distance_ratio_k(bag, point, hypothesized, 1)
}

/// Distance-ratio nonconformity using the mean of the `k` smallest
/// same-label and other-label distances.
pub fn knn_distance_ratio_k(
    bag: &TrainingBag,
    point: &FeatureVector,
    hypothesized: Label,
    k: usize,
) -> Result<Nonconformity> {
    check_ratio_args(bag, point, k)?;
    let (pos, neg) = nearest_by_label(bag, point, k, None);
    Ok(ratio_for(&pos, &neg, hypothesized, k))
}

/// Order-reversing adapter from nonconformity to conformity.
pub fn conformity_from_ratio(alpha: Nonconformity) -> f64 {
    -alpha.0
}

/// The predicted probability of the hypothesized class.
pub fn probability_conformity(scores: &ScorePair, hypothesized: Label) -> Result<f64> {
    if !scores.is_probability() {
        return Err(Error::InvalidArgument(
            "probability conformity needs a probability-type score pair".into(),
        ));
    }
    Ok(scores.get(hypothesized))
}

/// Class frequencies among the `k` nearest bag members. Distance ties are
/// broken by bag index.
pub fn knn_probability_scores(bag: &TrainingBag, point: &FeatureVector, k: usize) -> Result<ScorePair> {
    if bag.is_empty() {
        return Err(Error::EmptyBag);
    }
    if k == 0 || k > bag.len() {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={}, got {k}",
            bag.len()
        )));
    }
    bag.check_dim(point)?;
    let mut order: Vec<(f64, usize)> = bag
        .points()
        .iter()
        .enumerate()
        .map(|(i, x)| (bag.metric().distance(point, x), i))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    let positives = order[..k]
        .iter()
        .filter(|&&(_, i)| bag.labels()[i] == Label::Positive)
        .count();
    let pos = positives as f64 / k as f64;
    ScorePair::probability(pos, 1.0 - pos)
}

/// How score pairs are produced for a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// Negated k-NN distance ratio, one value per hypothesized label.
    KnnRatio { k: usize },
    /// k-NN class frequency as a probability pair.
    KnnProbability { k: usize },
    /// Use the probability pairs already carried by the samples.
    Passthrough,
}

impl Measure {
    pub fn needs_bag(self) -> bool {
        !matches!(self, Measure::Passthrough)
    }

    pub fn name(self) -> String {
        match self {
            Measure::KnnRatio { k } => format!("knn_ratio(k={k})"),
            Measure::KnnProbability { k } => format!("knn_prob(k={k})"),
            Measure::Passthrough => "passthrough".to_string(),
        }
    }
}

/// Scores one sample.
pub fn score_sample(measure: Measure, bag: Option<&TrainingBag>, sample: &Sample) -> Result<ScorePair> {
    let bag_for = |m: Measure| {
        bag.ok_or_else(|| {
            Error::InvalidArgument(format!("measure {} needs a training bag", m.name()))
        })
    };
    match measure {
        Measure::Passthrough => {
            let scores = sample.require_scores()?;
            if !scores.is_probability() {
                return Err(Error::sample(&sample.id, "passthrough needs probability scores"));
            }
            Ok(scores)
        }
        Measure::KnnRatio { k } => {
            let bag = bag_for(measure)?;
            let x = sample.require_features()?;
            check_ratio_args(bag, x, k)?;
            let (pos, neg) = nearest_by_label(bag, x, k, None);
            ScorePair::conformity(
                conformity_from_ratio(ratio_for(&pos, &neg, Label::Positive, k)),
                conformity_from_ratio(ratio_for(&pos, &neg, Label::Negative, k)),
            )
        }
        Measure::KnnProbability { k } => {
            let bag = bag_for(measure)?;
            knn_probability_scores(bag, sample.require_features()?, k)
        }
    }
}

/// Returns a copy of `data` in which every sample carries the score pair
/// produced by `measure`.
pub fn score_dataset(measure: Measure, bag: Option<&TrainingBag>, data: &Dataset) -> Result<Dataset> {
    let samples = data
        .iter()
        .map(|s| {
            let scores = score_sample(measure, bag, s)?;
            Ok(Sample {
                scores: Some(scores),
                ..s.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples)
}
