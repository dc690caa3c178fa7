//! Python bindings for the `binconf` conformal-prediction engine.
//!
//! Labels and regions cross the boundary as strings (`"positive"`,
//! `"negative"`; `"positive"`, `"negative"`, `"both"`, `"empty"`).

use std::collections::BTreeMap;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use binconf::eval::{self, BothScoring};
use binconf::icp::{self, CalibrationTable};
use binconf::nonconformity::{self, TrainingBag};
use binconf::online;
use binconf::synth::{self, SyntheticSpec};
use binconf::{FeatureVector, Label, PredictionRegion, SignificanceLevel};

fn err(e: binconf::Error) -> PyErr {
    match e.exit_code() {
        2 => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn label(s: &str) -> PyResult<Label> {
    s.parse().map_err(err)
}

fn parse_labels(v: &[String]) -> PyResult<Vec<Label>> {
    v.iter().map(|s| label(s)).collect()
}

fn parse_regions(v: &[String]) -> PyResult<Vec<PredictionRegion>> {
    v.iter().map(|s| s.parse().map_err(err)).collect()
}

fn significance(epsilon: f64) -> PyResult<SignificanceLevel> {
    SignificanceLevel::new(epsilon).map_err(err)
}

fn bag(points: Vec<Vec<f64>>, bag_labels: &[String]) -> PyResult<TrainingBag> {
    if points.len() != bag_labels.len() {
        return Err(PyValueError::new_err("points and labels differ in length"));
    }
    let examples = points
        .into_iter()
        .zip(parse_labels(bag_labels)?)
        .map(|(x, y)| Ok((FeatureVector::new(x).map_err(err)?, y)))
        .collect::<PyResult<Vec<_>>>()?;
    TrainingBag::new(examples).map_err(err)
}

fn score_pairs(s_pos: &[f64], s_neg: &[f64]) -> PyResult<Vec<binconf::ScorePair>> {
    if s_pos.len() != s_neg.len() {
        return Err(PyValueError::new_err("s_pos and s_neg differ in length"));
    }
    s_pos
        .iter()
        .zip(s_neg)
        .map(|(&p, &n)| binconf::ScorePair::probability(p, n).map_err(err))
        .collect()
}

/// A pair of per-label scores, either probabilities or conformity values.
#[pyclass(name = "ScorePair", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScorePair(binconf::ScorePair);

#[pymethods]
impl PyScorePair {
    #[new]
    #[pyo3(signature = (pos, neg, kind = "probability"))]
    fn new(pos: f64, neg: f64, kind: &str) -> PyResult<Self> {
        let pair = match kind {
            "probability" => binconf::ScorePair::probability(pos, neg),
            "conformity" => binconf::ScorePair::conformity(pos, neg),
            other => return Err(PyValueError::new_err(format!("unknown score kind `{other}`"))),
        };
        pair.map(PyScorePair).map_err(err)
    }

    #[getter]
    fn pos(&self) -> f64 {
        self.0.pos()
    }

    #[getter]
    fn neg(&self) -> f64 {
        self.0.neg()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        if self.0.is_probability() {
            "probability"
        } else {
            "conformity"
        }
    }

    fn swapped(&self) -> Self {
        PyScorePair(self.0.swapped())
    }

    fn __repr__(&self) -> String {
        format!("ScorePair(pos={}, neg={}, kind='{}')", self.0.pos(), self.0.neg(), self.kind())
    }
}

/// Sorted calibration scores, per class (Mondrian) or pooled.
#[pyclass(name = "CalibrationTable", frozen)]
struct PyCalibrationTable(CalibrationTable);

#[pymethods]
impl PyCalibrationTable {
    /// Mondrian table from per-class calibration scores.
    #[new]
    fn new(pos_scores: Vec<f64>, neg_scores: Vec<f64>) -> PyResult<Self> {
        CalibrationTable::from_class_scores(pos_scores, neg_scores)
            .map(PyCalibrationTable)
            .map_err(err)
    }

    #[staticmethod]
    fn pooled(scores: Vec<f64>) -> PyResult<Self> {
        CalibrationTable::pooled(scores).map(PyCalibrationTable).map_err(err)
    }

    #[getter]
    fn mondrian(&self) -> bool {
        self.0.is_mondrian()
    }

    /// `(p_pos, p_neg)` for a test sample's scores.
    fn p_values(&self, scores: &PyScorePair) -> (f64, f64) {
        let p = icp::p_values(&self.0, &scores.0);
        (p.pos, p.neg)
    }

    /// The prediction region at significance level `epsilon`.
    fn predict(&self, scores: &PyScorePair, epsilon: f64) -> PyResult<String> {
        let p = icp::p_values(&self.0, &scores.0);
        Ok(icp::region(&p, significance(epsilon)?).as_str().to_owned())
    }
}

#[pyfunction]
fn confidence_to_epsilon(confidence_percent: f64) -> PyResult<f64> {
    binconf::domain::confidence_to_epsilon(confidence_percent)
        .map(SignificanceLevel::epsilon)
        .map_err(err)
}

#[pyfunction]
fn region_contains(region: &str, truth: &str) -> PyResult<bool> {
    Ok(binconf::region_contains(region.parse().map_err(err)?, label(truth)?))
}

/// Nearest-neighbour distance ratio of `point` under `hypothesized`.
#[pyfunction]
#[pyo3(signature = (points, point_labels, point, hypothesized, k = 1))]
fn knn_distance_ratio(
    points: Vec<Vec<f64>>,
    point_labels: Vec<String>,
    point: Vec<f64>,
    hypothesized: &str,
    k: usize,
) -> PyResult<f64> {
    let bag = bag(points, &point_labels)?;
    let x = FeatureVector::new(point).map_err(err)?;
    nonconformity::knn_distance_ratio_k(&bag, &x, label(hypothesized)?, k)
        .map(|a| a.alpha())
        .map_err(err)
}

/// On-line full-CP p-value of `(point, hypothesized)` against a bag.
#[pyfunction]
#[pyo3(signature = (points, point_labels, point, hypothesized, k = 1))]
fn full_cp_pvalue(
    points: Vec<Vec<f64>>,
    point_labels: Vec<String>,
    point: Vec<f64>,
    hypothesized: &str,
    k: usize,
) -> PyResult<f64> {
    let bag = bag(points, &point_labels)?;
    let x = FeatureVector::new(point).map_err(err)?;
    online::full_cp_pvalue(&bag, k, &x, label(hypothesized)?).map_err(err)
}

#[pyfunction]
fn validity(regions: Vec<String>, truths: Vec<String>) -> PyResult<f64> {
    eval::validity(&parse_regions(&regions)?, &parse_labels(&truths)?).map_err(err)
}

#[pyfunction]
fn efficiency(regions: Vec<String>) -> PyResult<f64> {
    eval::efficiency(&parse_regions(&regions)?).map_err(err)
}

#[pyfunction]
fn region_distribution(regions: Vec<String>, truths: Vec<String>) -> PyResult<BTreeMap<&'static str, f64>> {
    let d = eval::region_distribution(&parse_regions(&regions)?, &parse_labels(&truths)?).map_err(err)?;
    Ok(BTreeMap::from([
        ("correct_single", d.frac_correct_single),
        ("false_single", d.frac_false_single),
        ("both", d.frac_both),
        ("empty", d.frac_empty),
    ]))
}

/// Accuracy with `both` regions scored as correct (`"correct"`) or wrong
/// (`"wrong"`).
#[pyfunction]
#[pyo3(signature = (regions, truths, both = "correct"))]
fn scored_accuracy(regions: Vec<String>, truths: Vec<String>, both: &str) -> PyResult<f64> {
    let mode = match both {
        "correct" => BothScoring::BothCorrect,
        "wrong" => BothScoring::BothWrong,
        other => return Err(PyValueError::new_err(format!("both must be `correct` or `wrong`, got `{other}`"))),
    };
    eval::scored_accuracy(mode, &parse_regions(&regions)?, &parse_labels(&truths)?).map_err(err)
}

/// Rank-based AUROC of `values` (higher means more positive).
#[pyfunction]
fn auroc(values: Vec<f64>, truths: Vec<String>) -> PyResult<f64> {
    eval::auroc_values(&values, &parse_labels(&truths)?).map_err(err)
}

/// Accuracy, sensitivity and specificity at a threshold on `s_pos`.
#[pyfunction]
#[pyo3(signature = (s_pos, s_neg, truths, threshold = 0.5))]
fn binary_metrics(
    s_pos: Vec<f64>,
    s_neg: Vec<f64>,
    truths: Vec<String>,
    threshold: f64,
) -> PyResult<BTreeMap<&'static str, Option<f64>>> {
    let m = eval::binary_metrics(&score_pairs(&s_pos, &s_neg)?, &parse_labels(&truths)?, threshold).map_err(err)?;
    Ok(BTreeMap::from([
        ("accuracy", Some(m.accuracy)),
        ("sensitivity", m.sensitivity),
        ("specificity", m.specificity),
    ]))
}

/// Runs the on-line protocol; returns `(round, region, true_label,
/// cumulative_error_rate)` per streamed example.
#[pyfunction]
#[pyo3(signature = (points, point_labels, initial, epsilon, k = 1))]
fn run_online(
    points: Vec<Vec<f64>>,
    point_labels: Vec<String>,
    initial: usize,
    epsilon: f64,
    k: usize,
) -> PyResult<Vec<(usize, &'static str, &'static str, f64)>> {
    if initial == 0 || initial >= points.len() {
        return Err(PyValueError::new_err("initial must leave a nonempty bag and stream"));
    }
    let mut points = points;
    let stream_points = points.split_off(initial);
    let stream = stream_points
        .into_iter()
        .zip(parse_labels(&point_labels[initial..])?)
        .map(|(x, y)| Ok((FeatureVector::new(x).map_err(err)?, y)))
        .collect::<PyResult<Vec<_>>>()?;
    let bag = bag(points, &point_labels[..initial])?;
    let trajectory = online::run_online(bag, k, stream, significance(epsilon)?).map_err(err)?;
    Ok(trajectory
        .into_iter()
        .map(|t| (t.round, t.region.as_str(), t.true_label.as_str(), t.cumulative_error_rate))
        .collect())
}

/// Two-class Gaussian data; returns `(ids, features, labels)`.
type SyntheticColumns = (Vec<String>, Vec<Vec<f64>>, Vec<&'static str>);

#[pyfunction]
#[pyo3(signature = (n_per_class, dim = 2, separation = 2.0, noise = 1.0, seed = 0))]
fn generate_synthetic(
    n_per_class: usize,
    dim: usize,
    separation: f64,
    noise: f64,
    seed: u64,
) -> PyResult<SyntheticColumns> {
    let data = synth::generate_synthetic(&SyntheticSpec { n_per_class, dim, separation, noise, seed }).map_err(err)?;
    let mut ids = Vec::with_capacity(data.len());
    let mut features = Vec::with_capacity(data.len());
    let mut out_labels = Vec::with_capacity(data.len());
    for s in data.iter() {
        ids.push(s.id.clone());
        features.push(s.require_features().map_err(err)?.values().to_vec());
        out_labels.push(s.require_label().map_err(err)?.as_str());
    }
    Ok((ids, features, out_labels))
}

#[pymodule]
fn binconf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScorePair>()?;
    m.add_class::<PyCalibrationTable>()?;
    m.add_function(wrap_pyfunction!(confidence_to_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(region_contains, m)?)?;
    m.add_function(wrap_pyfunction!(knn_distance_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(full_cp_pvalue, m)?)?;
    m.add_function(wrap_pyfunction!(validity, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency, m)?)?;
    m.add_function(wrap_pyfunction!(region_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(scored_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(binary_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(run_online, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    Ok(())
}
