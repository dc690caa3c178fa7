//! Inductive and Mondrian conformal prediction.
//!
//! The calibration table keeps the conformity scores of the calibration
//! samples, sorted. Under the Mondrian taxonomy each class gets its own
//! list (the score of a true-positive sample under the positive hypothesis,
//! and likewise for negatives); the pooled variant shares one list.
//!
//! p-values are non-smoothed with ties counted inclusively:
//!
//! ```text
//! p_y = (#{c in class-y scores : c <= s_y} + 1) / (n_y + 1)
//! ```
//!
//! and a label enters the region iff `p_y > ε`.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Label, PredictionRegion, ScorePair, SignificanceLevel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub proper_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            proper_fraction: 0.7,
            seed: 0,
            stratified: false,
        }
    }
}

/// `floor(fraction * n + 0.5)`, then pulled into `1..n` so neither part is
/// empty.
fn proper_size(fraction: f64, n: usize) -> usize {
    let raw = (fraction * n as f64 + 0.5).floor() as usize;
    raw.clamp(1, n - 1)
}

/// Randomly partitions labelled data into a proper training set and a
/// calibration set. Both parts keep the input order of their samples.
pub fn split_dataset(data: &Dataset, config: &SplitConfig) -> Result<(Dataset, Dataset)> {
    if !(config.proper_fraction > 0.0 && config.proper_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "proper fraction must lie in (0, 1), got {}",
            config.proper_fraction
        )));
    }
    if data.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 samples to split, got {}",
            data.len()
        )));
    }
    let labels = data.labels()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = data.len();

    let mut proper: Vec<usize> = if config.stratified {
        let mut chosen = Vec::new();
        let mut leftovers = Vec::new();
        for class in Label::BOTH {
            let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
            if idx.is_empty() {
                return Err(Error::MissingClass(class));
            }
            idx.shuffle(&mut rng);
            let take = (config.proper_fraction * idx.len() as f64 + 0.5).floor() as usize;
            chosen.extend_from_slice(&idx[..take]);
            leftovers.push(idx[take..].to_vec());
        }
        if chosen.is_empty() {
            // move one sample from the larger class remainder
            let from = leftovers.iter_mut().max_by_key(|v| v.len()).unwrap();
            chosen.push(from.remove(0));
        } else if chosen.len() == n {
            chosen.pop();
        }
        chosen
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        idx.truncate(proper_size(config.proper_fraction, n));
        idx
    };
    proper.sort_unstable();
    let mut in_proper = vec![false; n];
    for &i in &proper {
        in_proper[i] = true;
    }
    let calibration: Vec<usize> = (0..n).filter(|&i| !in_proper[i]).collect();
    Ok((data.subset(&proper), data.subset(&calibration)))
}

fn sort_scores(v: &mut [f64]) {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
}

/// Sorted calibration conformity scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pos_scores: Vec<f64>,
    neg_scores: Vec<f64>,
    mondrian: bool,
}

impl CalibrationTable {
    /// Mondrian table from per-class score lists, in any order.
    pub fn from_class_scores(mut pos_scores: Vec<f64>, mut neg_scores: Vec<f64>) -> Result<Self> {
        if pos_scores.is_empty() {
            return Err(Error::MissingClass(Label::Positive));
        }
        if neg_scores.is_empty() {
            return Err(Error::MissingClass(Label::Negative));
        }
        check_scores(&pos_scores)?;
        check_scores(&neg_scores)?;
        sort_scores(&mut pos_scores);
        sort_scores(&mut neg_scores);
        Ok(CalibrationTable {
            pos_scores,
            neg_scores,
            mondrian: true,
        })
    }

    /// Pooled table: one list serves both hypotheses.
    pub fn pooled(mut scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_scores(&scores)?;
        sort_scores(&mut scores);
        Ok(CalibrationTable {
            pos_scores: scores.clone(),
            neg_scores: scores,
            mondrian: false,
        })
    }

    pub fn scores(&self, label: Label) -> &[f64] {
        match label {
            Label::Positive => &self.pos_scores,
            Label::Negative => &self.neg_scores,
        }
    }

    pub fn is_mondrian(&self) -> bool {
        self.mondrian
    }

    /// The p-value of one hypothesized label.
    pub fn p_value(&self, label: Label, score: f64) -> f64 {
        let col = self.scores(label);
        let at_most = col.partition_point(|&c| c <= score);
        (at_most + 1) as f64 / (col.len() + 1) as f64
    }

    pub fn p_values(&self, scores: &ScorePair) -> PValuePair {
        PValuePair {
            pos: self.p_value(Label::Positive, scores.pos()),
            neg: self.p_value(Label::Negative, scores.neg()),
        }
    }

    /// Smoothed p-values: ties with the test score receive a uniform random
    /// share `τ` instead of full credit,
    /// `p_y = (#{c < s_y} + τ (#{c = s_y} + 1)) / (n_y + 1)`.
    pub fn p_values_smoothed<R: Rng + ?Sized>(&self, scores: &ScorePair, rng: &mut R) -> PValuePair {
        let mut one = |label: Label, s: f64| {
            let col = self.scores(label);
            let below = col.partition_point(|&c| c < s);
            let at_most = col.partition_point(|&c| c <= s);
            let tau: f64 = rng.random();
            (below as f64 + tau * ((at_most - below) + 1) as f64) / (col.len() + 1) as f64
        };
        let pos = one(Label::Positive, scores.pos());
        let neg = one(Label::Negative, scores.neg());
        PValuePair { pos, neg }
    }
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("calibration scores must not be NaN".into()));
    }
    Ok(())
}

/// Builds the calibration table. With `mondrian`, each class keeps the
/// conformity scores of its own members under their true label; otherwise
/// all true-label scores are pooled.
pub fn build_calibration_table(calibration: &Dataset, mondrian: bool) -> Result<CalibrationTable> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for s in calibration {
        let label = s.require_label()?;
        let score = s.require_scores()?.get(label);
        match label {
            Label::Positive => pos.push(score),
            Label::Negative => neg.push(score),
        }
    }
    if mondrian {
        CalibrationTable::from_class_scores(pos, neg)
    } else {
        pos.extend(neg);
        CalibrationTable::pooled(pos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValuePair {
    pub pos: f64,
    pub neg: f64,
}

impl PValuePair {
    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::Positive => self.pos,
            Label::Negative => self.neg,
        }
    }
}

pub fn p_values(table: &CalibrationTable, scores: &ScorePair) -> PValuePair {
    table.p_values(scores)
}

/// Labels whose p-value strictly exceeds ε.
pub fn region(p: &PValuePair, eps: SignificanceLevel) -> PredictionRegion {
    let e = eps.epsilon();
    PredictionRegion::from_inclusion(p.pos > e, p.neg > e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetPrediction {
    pub id: String,
    pub p_values: PValuePair,
    pub region: PredictionRegion,
}

/// p-values and region for every test sample, in input order.
pub fn predict_set(
    table: &CalibrationTable,
    tests: &Dataset,
    eps: SignificanceLevel,
) -> Result<Vec<SetPrediction>> {
    tests
        .iter()
        .map(|s| {
            let p = table.p_values(&s.require_scores()?);
            Ok(SetPrediction {
                id: s.id.clone(),
                p_values: p,
                region: region(&p, eps),
            })
        })
        .collect()
}
