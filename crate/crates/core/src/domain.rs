//! Value types shared by every stage: labels, samples, score pairs,
//! significance levels and the four binary prediction regions.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `s_pos + s_neg = 1` for probability-type score pairs.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub const BOTH: [Label; 2] = [Label::Positive, Label::Negative];

    pub fn flip(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(Label::Positive),
            "negative" => Ok(Label::Negative),
            other => Err(Error::UnknownClass(other.to_string())),
        }
    }
}

/// An ordered list of finite descriptor values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "feature values must be finite, got {bad}"
            )));
        }
        Ok(FeatureVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Euclidean distance. Symmetric bit-for-bit in its arguments.
    pub fn distance(&self, other: &FeatureVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Whether a [`ScorePair`] is a pair of class probabilities or a pair of
/// arbitrary conformity scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Probability,
    Conformity,
}

/// Conformity scores of one sample under each hypothesized label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorePair {
    pos: f64,
    neg: f64,
    kind: ScoreKind,
}

impl ScorePair {
    /// A probability pair: both entries in `[0, 1]` and summing to one.
    pub fn probability(pos: f64, neg: f64) -> Result<Self> {
        if !(pos.is_finite() && neg.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "scores must be finite, got ({pos}, {neg})"
            )));
        }
        if !(0.0..=1.0).contains(&pos) || !(0.0..=1.0).contains(&neg) {
            return Err(Error::InvalidArgument(format!(
                "probabilities must lie in [0, 1], got ({pos}, {neg})"
            )));
        }
        if (pos + neg - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "probabilities must sum to 1, got {pos} + {neg} = {}",
                pos + neg
            )));
        }
        Ok(ScorePair {
            pos,
            neg,
            kind: ScoreKind::Probability,
        })
    }

    /// A pair of conformity scores. `-inf` is allowed (maximally
    /// nonconforming); NaN and `+inf` are not.
    pub fn conformity(pos: f64, neg: f64) -> Result<Self> {
        let ok = |v: f64| !v.is_nan() && v != f64::INFINITY;
        if !(ok(pos) && ok(neg)) {
            return Err(Error::InvalidArgument(format!(
                "conformity scores must be finite or -inf, got ({pos}, {neg})"
            )));
        }
        Ok(ScorePair {
            pos,
            neg,
            kind: ScoreKind::Conformity,
        })
    }

    pub fn pos(&self) -> f64 {
        self.pos
    }

    pub fn neg(&self) -> f64 {
        self.neg
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn is_probability(&self) -> bool {
        self.kind == ScoreKind::Probability
    }

    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::Positive => self.pos,
            Label::Negative => self.neg,
        }
    }

    /// The same pair with the two entries exchanged.
    pub fn swapped(&self) -> ScorePair {
        ScorePair {
            pos: self.neg,
            neg: self.pos,
            kind: self.kind,
        }
    }
}

/// Significance level ε. A label enters a region when its p-value exceeds ε.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignificanceLevel(f64);

/// Decimal places of a percentage that survive the ε ↔ confidence conversion.
const PERCENT_DECIMALS_SCALE: f64 = 1e4;
const EPSILON_DECIMALS_SCALE: f64 = 1e6;

/// Snap `x * scale` to the nearest integer when it is within floating noise
/// of one, so decimal inputs map to the closest double of their decimal
/// result.
fn snap(x: f64, scale: f64) -> Option<f64> {
    let scaled = x * scale;
    let rounded = scaled.round();
    ((scaled - rounded).abs() <= 1e-6).then_some(rounded)
}

impl SignificanceLevel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidArgument(format!(
                "significance level must lie in [0, 1], got {epsilon}"
            )));
        }
        Ok(SignificanceLevel(epsilon))
    }

    /// Converts an "N%" confidence into ε = 1 − N/100.
    pub fn from_confidence(confidence_percent: f64) -> Result<Self> {
        if !(0.0..=100.0).contains(&confidence_percent) {
            return Err(Error::InvalidArgument(format!(
                "confidence must lie in [0, 100], got {confidence_percent}"
            )));
        }
        let epsilon = match snap(confidence_percent, PERCENT_DECIMALS_SCALE) {
            Some(k) => (100.0 * PERCENT_DECIMALS_SCALE - k) / EPSILON_DECIMALS_SCALE,
            None => 1.0 - confidence_percent / 100.0,
        };
        Ok(SignificanceLevel(epsilon.clamp(0.0, 1.0)))
    }

    pub fn epsilon(self) -> f64 {
        self.0
    }

    /// The confidence N (in percent) matching this ε.
    pub fn confidence(self) -> f64 {
        match snap(1.0 - self.0, EPSILON_DECIMALS_SCALE) {
            Some(k) => k / PERCENT_DECIMALS_SCALE,
            None => 100.0 * (1.0 - self.0),
        }
    }
}

pub fn confidence_to_epsilon(confidence_percent: f64) -> Result<SignificanceLevel> {
    SignificanceLevel::from_confidence(confidence_percent)
}

/// The four possible conformal regions of a binary classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionRegion {
    #[serde(rename = "positive")]
    SinglePositive,
    #[serde(rename = "negative")]
    SingleNegative,
    Both,
    Empty,
}

impl PredictionRegion {
    pub fn from_inclusion(positive: bool, negative: bool) -> Self {
        match (positive, negative) {
            (true, true) => PredictionRegion::Both,
            (true, false) => PredictionRegion::SinglePositive,
            (false, true) => PredictionRegion::SingleNegative,
            (false, false) => PredictionRegion::Empty,
        }
    }

    pub fn contains(self, label: Label) -> bool {
        match self {
            PredictionRegion::Both => true,
            PredictionRegion::Empty => false,
            PredictionRegion::SinglePositive => label == Label::Positive,
            PredictionRegion::SingleNegative => label == Label::Negative,
        }
    }

    pub fn singleton(self) -> Option<Label> {
        match self {
            PredictionRegion::SinglePositive => Some(Label::Positive),
            PredictionRegion::SingleNegative => Some(Label::Negative),
            _ => None,
        }
    }

    pub fn is_singleton(self) -> bool {
        self.singleton().is_some()
    }

    pub fn len(self) -> usize {
        match self {
            PredictionRegion::Both => 2,
            PredictionRegion::Empty => 0,
            _ => 1,
        }
    }

    pub fn is_empty(self) -> bool {
        self == PredictionRegion::Empty
    }

    /// True when every label in `self` is also in `other`.
    pub fn is_subset_of(self, other: PredictionRegion) -> bool {
        Label::BOTH
            .iter()
            .all(|&l| !self.contains(l) || other.contains(l))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PredictionRegion::SinglePositive => "positive",
            PredictionRegion::SingleNegative => "negative",
            PredictionRegion::Both => "both",
            PredictionRegion::Empty => "empty",
        }
    }
}

impl fmt::Display for PredictionRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredictionRegion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(PredictionRegion::SinglePositive),
            "negative" => Ok(PredictionRegion::SingleNegative),
            "both" => Ok(PredictionRegion::Both),
            "empty" => Ok(PredictionRegion::Empty),
            other => Err(Error::InvalidArgument(format!("unknown region `{other}`"))),
        }
    }
}

pub fn region_contains(region: PredictionRegion, label: Label) -> bool {
    region.contains(label)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub features: Option<FeatureVector>,
    pub scores: Option<ScorePair>,
    pub label: Option<Label>,
}

impl Sample {
    pub fn with_features(id: impl Into<String>, features: FeatureVector, label: Option<Label>) -> Self {
        Sample {
            id: id.into(),
            features: Some(features),
            scores: None,
            label,
        }
    }

    pub fn with_scores(id: impl Into<String>, scores: ScorePair, label: Option<Label>) -> Self {
        Sample {
            id: id.into(),
            features: None,
            scores: Some(scores),
            label,
        }
    }

    pub fn require_label(&self) -> Result<Label> {
        self.label
            .ok_or_else(|| Error::sample(&self.id, "missing true label"))
    }

    pub fn require_scores(&self) -> Result<ScorePair> {
        self.scores
            .ok_or_else(|| Error::sample(&self.id, "missing scores"))
    }

    pub fn require_features(&self) -> Result<&FeatureVector> {
        self.features
            .as_ref()
            .ok_or_else(|| Error::sample(&self.id, "missing features"))
    }
}

/// An ordered collection of samples with unique ids and a common feature
/// dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    samples: Vec<Sample>,
    feature_dim: Option<usize>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(samples.len());
        let mut feature_dim = None;
        for s in &samples {
            if s.features.is_none() && s.scores.is_none() {
                return Err(Error::sample(&s.id, "needs features or scores"));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::sample(&s.id, "duplicate id"));
            }
            if let Some(f) = &s.features {
                match feature_dim {
                    None => feature_dim = Some(f.dim()),
                    Some(d) if d != f.dim() => {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: f.dim(),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(Dataset {
            samples,
            feature_dim,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.samples
            .iter()
            .filter(|s| s.label == Some(label))
            .count()
    }

    /// True labels of every sample, failing on the first unlabelled one.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.samples.iter().map(Sample::require_label).collect()
    }

    pub fn scores(&self) -> Result<Vec<ScorePair>> {
        self.samples.iter().map(Sample::require_scores).collect()
    }

    /// A new dataset holding the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            feature_dim: self.feature_dim,
        }
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Sample;
    type IntoIter = std::slice::Iter<'a, Sample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn region_contains_examples() {
        assert!(region_contains(PredictionRegion::Both, Label::Positive));
        assert!(!region_contains(PredictionRegion::Empty, Label::Negative));
        assert!(!region_contains(PredictionRegion::SinglePositive, Label::Negative));
        assert!(region_contains(PredictionRegion::SingleNegative, Label::Negative));
    }

    #[test]
    fn confidence_examples() {
        assert_eq!(confidence_to_epsilon(95.0).unwrap().epsilon(), 0.05);
        assert_eq!(confidence_to_epsilon(86.0).unwrap().epsilon(), 0.14);
        assert_eq!(confidence_to_epsilon(100.0).unwrap().epsilon(), 0.0);
        assert_eq!(confidence_to_epsilon(0.0).unwrap().epsilon(), 1.0);
        assert!(confidence_to_epsilon(100.5).is_err());
        assert!(confidence_to_epsilon(-1.0).is_err());
        assert!(SignificanceLevel::new(1.5).is_err());
    }

    #[test]
    fn probability_pair_validation() {
        assert!(ScorePair::probability(0.3, 0.8).is_err());
        assert!(ScorePair::probability(-0.1, 1.1).is_err());
        assert!(ScorePair::probability(0.998, 0.002).is_ok());
        assert!(ScorePair::conformity(f64::NEG_INFINITY, 0.0).is_ok());
        assert!(ScorePair::conformity(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn dataset_rejects_duplicates_and_ragged_features() {
        let f = |v: Vec<f64>| FeatureVector::new(v).unwrap();
        let dup = vec![
            Sample::with_features("a", f(vec![0.0]), None),
            Sample::with_features("a", f(vec![1.0]), None),
        ];
        assert!(Dataset::new(dup).is_err());
        let ragged = vec![
            Sample::with_features("a", f(vec![0.0]), None),
            Sample::with_features("b", f(vec![1.0, 2.0]), None),
        ];
        assert!(matches!(
            Dataset::new(ragged),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
        assert!(FeatureVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn region_kind_is_consistent() {
        for (p, n) in [(true, true), (true, false), (false, true), (false, false)] {
            let r = PredictionRegion::from_inclusion(p, n);
            assert_eq!(r.contains(Label::Positive), p);
            assert_eq!(r.contains(Label::Negative), n);
            assert_eq!(r.len(), p as usize + n as usize);
            assert_eq!(r.as_str().parse::<PredictionRegion>().unwrap(), r);
        }
    }

    proptest! {
        #[test]
        fn confidence_round_trips_four_decimals(k in 0u32..=1_000_000) {
            let pct = k as f64 / 1e4;
            let eps = SignificanceLevel::from_confidence(pct).unwrap();
            prop_assert_eq!(eps.confidence(), pct);
            prop_assert_eq!(SignificanceLevel::new(eps.epsilon()).unwrap().confidence(), pct);
        }
    }
}
