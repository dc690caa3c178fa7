//! End-to-end inductive run: split, score, calibrate, predict, evaluate.

use std::io::Write;
use std::path::PathBuf;

use crate::domain::{Dataset, Label, SignificanceLevel};
use crate::error::{Error, Result};
use crate::eval::{calibration_report_lenient, evaluate};
use crate::icp::{build_calibration_table, predict_set, split_dataset, SetPrediction, SplitConfig};
use crate::io::{load_dataset, ClassNames};
use crate::nonconformity::{score_dataset, Measure, TrainingBag};
use crate::report::{PipelineReport, SplitSummary};

/// Input datasets. Either `calibration` is given directly (with `train` as
/// the proper training set for feature-based measures), or `data` is split
/// into proper training and calibration parts.
#[derive(Debug, Clone, Default)]
pub struct PipelineInputs {
    pub data: Option<Dataset>,
    pub train: Option<Dataset>,
    pub calibration: Option<Dataset>,
    pub test: Option<Dataset>,
}

#[derive(Debug, Clone)]
pub struct PipelineSettings {
    pub measure: Measure,
    pub mondrian: bool,
    pub split: SplitConfig,
    pub epsilons: Vec<SignificanceLevel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonPredictions {
    pub epsilon: SignificanceLevel,
    pub predictions: Vec<SetPrediction>,
    pub truths: Vec<Option<Label>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub report: PipelineReport,
    pub predictions: Vec<EpsilonPredictions>,
}

pub fn run_on_datasets(inputs: PipelineInputs, settings: &PipelineSettings) -> Result<PipelineOutput> {
    if settings.epsilons.is_empty() {
        return Err(Error::InvalidArgument("at least one significance level is required".into()));
    }
    let (proper, calibration, split) = match (inputs.calibration, inputs.data) {
        (Some(cal), None) => (inputs.train, cal, None),
        (None, Some(data)) => {
            if inputs.train.is_some() {
                return Err(Error::InvalidArgument(
                    "give either a dataset to split or a training set, not both".into(),
                ));
            }
            let (proper, cal) = split_dataset(&data, &settings.split).map_err(|e| e.in_stage("split"))?;
            let summary = SplitSummary {
                proper_fraction: settings.split.proper_fraction,
                seed: settings.split.seed,
                stratified: settings.split.stratified,
                n_proper: proper.len(),
                n_calibration: cal.len(),
            };
            (Some(proper), cal, Some(summary))
        }
        (Some(_), Some(_)) => {
            return Err(Error::InvalidArgument(
                "give either a calibration set or a dataset to split, not both".into(),
            ))
        }
        (None, None) => {
            return Err(Error::InvalidArgument(
                "a calibration set or a dataset to split is required".into(),
            ))
        }
    };

    let bag = if settings.measure.needs_bag() {
        let proper = proper.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "measure {} needs a proper training set",
                settings.measure.name()
            ))
            .in_stage("score")
        })?;
        Some(TrainingBag::from_dataset(proper).map_err(|e| e.in_stage("score"))?)
    } else {
        None
    };
    let score = |d: &Dataset| score_dataset(settings.measure, bag.as_ref(), d).map_err(|e| e.in_stage("score"));
    let calibration = score(&calibration)?;
    let test = inputs.test.as_ref().map(score).transpose()?;

    let table = build_calibration_table(&calibration, settings.mondrian).map_err(|e| e.in_stage("calibrate"))?;
    let cal_report = calibration_report_lenient(&calibration).map_err(|e| e.in_stage("calibrate"))?;

    let mut evaluations = Vec::new();
    let mut predictions = Vec::new();
    if let Some(test) = &test {
        let truths: Vec<Option<Label>> = test.iter().map(|s| s.label).collect();
        let labelled: Option<Vec<Label>> = truths.iter().copied().collect();
        let scores = test.scores()?;
        for &eps in &settings.epsilons {
            let preds = predict_set(&table, test, eps).map_err(|e| e.in_stage("predict"))?;
            if let Some(labels) = &labelled {
                let regions: Vec<_> = preds.iter().map(|p| p.region).collect();
                evaluations.push(evaluate(eps, &regions, &scores, labels).map_err(|e| e.in_stage("evaluate"))?);
            }
            predictions.push(EpsilonPredictions {
                epsilon: eps,
                predictions: preds,
                truths: truths.clone(),
            });
        }
    }

    Ok(PipelineOutput {
        report: PipelineReport {
            measure: settings.measure.name(),
            mondrian: settings.mondrian,
            split,
            calibration: cal_report,
            evaluations,
        },
        predictions,
    })
}

/// Paths plus settings for a file-based run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub classes: ClassNames,
    pub settings: PipelineSettings,
}

pub fn load_inputs(config: &RunConfig) -> Result<PipelineInputs> {
    // one mapping shared by every file so the negative name stays stable
    let mut classes = config.classes.clone();
    let mut load = |p: &Option<PathBuf>| -> Result<Option<Dataset>> {
        p.as_ref()
            .map(|p| {
                load_dataset(p, None, &mut classes).map_err(|e| Error::Stage {
                    stage: "load",
                    source: Box::new(e),
                })
            })
            .transpose()
    };
    Ok(PipelineInputs {
        data: load(&config.data)?,
        train: load(&config.train)?,
        calibration: load(&config.calibration)?,
        test: load(&config.test)?,
    })
}

pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutput> {
    run_on_datasets(load_inputs(config)?, &config.settings)
}

/// Per-sample regions as CSV: `epsilon,id,p_pos,p_neg,region,label`.
pub fn write_regions<W: Write>(output: &[EpsilonPredictions], classes: &ClassNames, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(["epsilon", "id", "p_pos", "p_neg", "region", "label"]).map_err(io)?;
    for block in output {
        for (p, truth) in block.predictions.iter().zip(&block.truths) {
            w.write_record([
                block.epsilon.epsilon().to_string(),
                p.id.clone(),
                p.p_values.pos.to_string(),
                p.p_values.neg.to_string(),
                p.region.to_string(),
                truth.map(|l| classes.name(l).to_string()).unwrap_or_default(),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}
