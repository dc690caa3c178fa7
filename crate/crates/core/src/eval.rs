//! Metrics for binary conformal regions and for the underlying scores.
//!
//! Validity alone cannot tell an all-`both` predictor from a perfect one, so
//! every report carries the full region decomposition next to it, the two
//! ways of scoring `both`, classical confusion-matrix rates, and the same
//! rates restricted to singleton regions.

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Label, PredictionRegion, ScorePair, SignificanceLevel};
use crate::error::{Error, Result};

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// Fraction of regions containing the true label.
pub fn validity(regions: &[PredictionRegion], truths: &[Label]) -> Result<f64> {
    check_lengths(regions.len(), truths.len())?;
    let hits = regions
        .iter()
        .zip(truths)
        .filter(|(r, &t)| r.contains(t))
        .count();
    Ok(hits as f64 / regions.len() as f64)
}

/// Fraction of singleton regions.
pub fn efficiency(regions: &[PredictionRegion]) -> Result<f64> {
    if regions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let singles = regions.iter().filter(|r| r.is_singleton()).count();
    Ok(singles as f64 / regions.len() as f64)
}

/// Counts of the four region outcomes against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RegionCounts {
    pub correct_single: usize,
    pub false_single: usize,
    pub both: usize,
    pub empty: usize,
}

impl RegionCounts {
    pub fn tally(regions: &[PredictionRegion], truths: &[Label]) -> Result<Self> {
        check_lengths(regions.len(), truths.len())?;
        let mut c = RegionCounts::default();
        for (r, &t) in regions.iter().zip(truths) {
            match r {
                PredictionRegion::Both => c.both += 1,
                PredictionRegion::Empty => c.empty += 1,
                single if single.contains(t) => c.correct_single += 1,
                _ => c.false_single += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.correct_single + self.false_single + self.both + self.empty
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionDistribution {
    pub frac_correct_single: f64,
    pub frac_false_single: f64,
    pub frac_both: f64,
    pub frac_empty: f64,
}

impl RegionDistribution {
    pub fn from_counts(c: &RegionCounts) -> Self {
        let n = c.total() as f64;
        RegionDistribution {
            frac_correct_single: c.correct_single as f64 / n,
            frac_false_single: c.false_single as f64 / n,
            frac_both: c.both as f64 / n,
            frac_empty: c.empty as f64 / n,
        }
    }
}

pub fn region_distribution(regions: &[PredictionRegion], truths: &[Label]) -> Result<RegionDistribution> {
    Ok(RegionDistribution::from_counts(&RegionCounts::tally(regions, truths)?))
}

/// How a `both` region is scored. `empty` is always an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BothScoring {
    BothCorrect,
    BothWrong,
}

pub fn scored_accuracy(mode: BothScoring, regions: &[PredictionRegion], truths: &[Label]) -> Result<f64> {
    let c = RegionCounts::tally(regions, truths)?;
    let correct = match mode {
        BothScoring::BothCorrect => c.correct_single + c.both,
        BothScoring::BothWrong => c.correct_single,
    };
    Ok(correct as f64 / c.total() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[Label], truths: &[Label]) -> Result<Self> {
        check_lengths(predicted.len(), truths.len())?;
        let mut c = Confusion::default();
        for (&p, &t) in predicted.iter().zip(truths) {
            match (p, t) {
                (Label::Positive, Label::Positive) => c.tp += 1,
                (Label::Positive, Label::Negative) => c.fp += 1,
                (Label::Negative, Label::Negative) => c.tn += 1,
                (Label::Negative, Label::Positive) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn misclassification_error(&self) -> f64 {
        (self.fp + self.fn_) as f64 / self.total() as f64
    }

    /// TP / (TP + FN); absent without positive truths.
    pub fn sensitivity(&self) -> Option<f64> {
        let p = self.tp + self.fn_;
        (p > 0).then(|| self.tp as f64 / p as f64)
    }

    /// TN / (TN + FP); absent without negative truths.
    pub fn specificity(&self) -> Option<f64> {
        let n = self.tn + self.fp;
        (n > 0).then(|| self.tn as f64 / n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

impl From<Confusion> for BinaryMetrics {
    fn from(c: Confusion) -> Self {
        BinaryMetrics {
            accuracy: c.accuracy(),
            sensitivity: c.sensitivity(),
            specificity: c.specificity(),
        }
    }
}

/// Point predictions from probability scores: Positive iff `s_pos >= threshold`.
pub fn threshold_predictions(scores: &[ScorePair], threshold: f64) -> Result<Vec<Label>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!(
            "threshold must lie in [0, 1], got {threshold}"
        )));
    }
    scores
        .iter()
        .map(|s| {
            if !s.is_probability() {
                return Err(Error::InvalidArgument(
                    "threshold metrics need probability-type scores".into(),
                ));
            }
            Ok(if s.pos() >= threshold { Label::Positive } else { Label::Negative })
        })
        .collect()
}

pub fn confusion_at_threshold(scores: &[ScorePair], truths: &[Label], threshold: f64) -> Result<Confusion> {
    check_lengths(scores.len(), truths.len())?;
    Confusion::from_predictions(&threshold_predictions(scores, threshold)?, truths)
}

pub fn binary_metrics(scores: &[ScorePair], truths: &[Label], threshold: f64) -> Result<BinaryMetrics> {
    Ok(confusion_at_threshold(scores, truths, threshold)?.into())
}

/// Rank-based (Mann–Whitney) AUROC of `s_pos`, with half credit for ties.
pub fn auroc(scores: &[ScorePair], truths: &[Label]) -> Result<f64> {
    check_lengths(scores.len(), truths.len())?;
    let values: Vec<f64> = scores.iter().map(ScorePair::pos).collect();
    auroc_values(&values, truths)
}

/// Rank-based AUROC on raw values.
pub fn auroc_values(values: &[f64], truths: &[Label]) -> Result<f64> {
    check_lengths(values.len(), truths.len())?;
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("AUROC scores must not be NaN".into()));
    }
    let n_pos = truths.iter().filter(|&&t| t == Label::Positive).count();
    let n_neg = truths.len() - n_pos;
    if n_pos == 0 {
        return Err(Error::MissingClass(Label::Positive));
    }
    if n_neg == 0 {
        return Err(Error::MissingClass(Label::Negative));
    }

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());

    // Sum of positive ranks, with tied groups sharing their mean rank.
    // Ranks are 1-based; a tied group over positions i..j has mean rank
    // (i + 1 + j) / 2, a multiple of one half, so the sum is exact.
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let mean_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j]
            .iter()
            .filter(|&&idx| truths[idx] == Label::Positive)
            .count();
        pos_rank_sum += mean_rank * pos_in_group as f64;
        i = j;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub auroc: Option<f64>,
    pub accuracy: Option<f64>,
    pub n: usize,
}

/// AUROC and threshold-0.5 accuracy of the calibration set itself.
pub fn calibration_report(calibration: &Dataset) -> Result<CalibrationReport> {
    let scores = calibration.scores()?;
    let truths = calibration.labels()?;
    let accuracy = binary_metrics(&scores, &truths, 0.5)?.accuracy;
    Ok(CalibrationReport {
        auroc: Some(auroc(&scores, &truths)?),
        accuracy: Some(accuracy),
        n: calibration.len(),
    })
}

/// Like [`calibration_report`], but reports absent values instead of
/// failing when the scores are not probabilities (no accuracy) or a class is
/// missing (no AUROC).
pub fn calibration_report_lenient(calibration: &Dataset) -> Result<CalibrationReport> {
    let scores = calibration.scores()?;
    let truths = calibration.labels()?;
    let accuracy = if scores.iter().all(ScorePair::is_probability) {
        Some(binary_metrics(&scores, &truths, 0.5)?.accuracy)
    } else {
        None
    };
    Ok(CalibrationReport {
        auroc: auroc(&scores, &truths).ok(),
        accuracy,
        n: calibration.len(),
    })
}

/// Quality of the singleton regions only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingletonMetrics {
    pub n_singleton: usize,
    pub false_positives_in_singletons: usize,
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub auroc: Option<f64>,
}

pub fn conditional_singleton_metrics(
    regions: &[PredictionRegion],
    scores: &[ScorePair],
    truths: &[Label],
) -> Result<SingletonMetrics> {
    if regions.len() != truths.len() {
        return Err(Error::LengthMismatch { left: regions.len(), right: truths.len() });
    }
    if scores.len() != truths.len() {
        return Err(Error::LengthMismatch { left: scores.len(), right: truths.len() });
    }
    let mut predicted = Vec::new();
    let mut kept_truths = Vec::new();
    let mut kept_scores = Vec::new();
    for ((r, s), &t) in regions.iter().zip(scores).zip(truths) {
        if let Some(label) = r.singleton() {
            predicted.push(label);
            kept_truths.push(t);
            kept_scores.push(*s);
        }
    }
    if predicted.is_empty() {
        return Ok(SingletonMetrics {
            n_singleton: 0,
            false_positives_in_singletons: 0,
            accuracy: None,
            sensitivity: None,
            specificity: None,
            auroc: None,
        });
    }
    let c = Confusion::from_predictions(&predicted, &kept_truths)?;
    Ok(SingletonMetrics {
        n_singleton: predicted.len(),
        false_positives_in_singletons: c.fp,
        accuracy: Some(c.accuracy()),
        sensitivity: c.sensitivity(),
        specificity: c.specificity(),
        auroc: auroc(&kept_scores, &kept_truths).ok(),
    })
}

/// Threshold-0.5 rates (probability scores only) and AUROC over all test
/// samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryPanel {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub auroc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub epsilon: f64,
    pub confidence: f64,
    pub n: usize,
    pub validity: f64,
    pub efficiency: f64,
    pub counts: RegionCounts,
    pub distribution: RegionDistribution,
    pub scored_accuracy_both_correct: f64,
    pub scored_accuracy_both_wrong: f64,
    pub binary: BinaryPanel,
    pub singleton_conditional: SingletonMetrics,
}

/// Everything the toolkit knows about one batch of regions.
pub fn evaluate(
    eps: SignificanceLevel,
    regions: &[PredictionRegion],
    scores: &[ScorePair],
    truths: &[Label],
) -> Result<EvaluationReport> {
    check_lengths(regions.len(), truths.len())?;
    check_lengths(scores.len(), truths.len())?;
    let counts = RegionCounts::tally(regions, truths)?;
    let binary = if scores.iter().all(ScorePair::is_probability) {
        let m = binary_metrics(scores, truths, 0.5)?;
        BinaryPanel {
            accuracy: Some(m.accuracy),
            sensitivity: m.sensitivity,
            specificity: m.specificity,
            auroc: auroc(scores, truths).ok(),
        }
    } else {
        BinaryPanel {
            accuracy: None,
            sensitivity: None,
            specificity: None,
            auroc: auroc(scores, truths).ok(),
        }
    };
    Ok(EvaluationReport {
        epsilon: eps.epsilon(),
        confidence: eps.confidence(),
        n: regions.len(),
        validity: validity(regions, truths)?,
        efficiency: efficiency(regions)?,
        counts,
        distribution: RegionDistribution::from_counts(&counts),
        scored_accuracy_both_correct: scored_accuracy(BothScoring::BothCorrect, regions, truths)?,
        scored_accuracy_both_wrong: scored_accuracy(BothScoring::BothWrong, regions, truths)?,
        binary,
        singleton_conditional: conditional_singleton_metrics(regions, scores, truths)?,
    })
}

/// Builds a region/truth list with the given counts of correct singletons,
/// false singletons, `both` and `empty`, alternating the true class.
pub fn mixture(correct: usize, wrong: usize, both: usize, empty: usize) -> (Vec<PredictionRegion>, Vec<Label>) {
    let single = |l: Label| match l {
        Label::Positive => PredictionRegion::SinglePositive,
        Label::Negative => PredictionRegion::SingleNegative,
    };
    let kinds = [(0u8, correct), (1, wrong), (2, both), (3, empty)];
    let mut regions = Vec::new();
    let mut truths = Vec::new();
    let mut truth = Label::Positive;
    for (kind, n) in kinds {
        for _ in 0..n {
            regions.push(match kind {
                0 => single(truth),
                1 => single(truth.flip()),
                2 => PredictionRegion::Both,
                _ => PredictionRegion::Empty,
            });
            truths.push(truth);
            truth = truth.flip();
        }
    }
    (regions, truths)
}
