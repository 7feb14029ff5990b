use serde::{Deserialize, Serialize};

use crate::model::decision_from_prediction;
use crate::{EvalMethod, LabeledExample, LearnError, Model, Task};

/// Confusion-matrix metrics, positive = "rewriting is faster".
/// `prec` is `None` when nothing was predicted positive, `rec` when no
/// example is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub acc: f64,
    pub prec: Option<f64>,
    pub rec: Option<f64>,
    pub mse: Option<f64>,
    pub mae: Option<f64>,
}

impl Metrics {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision_defined(&self) -> bool {
        self.prec.is_some()
    }

    pub fn precision_or_nan(&self) -> f64 {
        self.prec.unwrap_or(f64::NAN)
    }

    pub fn recall_or_nan(&self) -> f64 {
        self.rec.unwrap_or(f64::NAN)
    }
}

pub fn compute_metrics(predictions: &[u8], truths: &[u8]) -> Result<Metrics, LearnError> {
    if predictions.len() != truths.len() {
        return Err(LearnError::LengthMismatch(predictions.len(), truths.len()));
    }
    if predictions.is_empty() {
        return Err(LearnError::EmptyTraining);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in predictions.iter().zip(truths) {
        match (p != 0, t != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    Ok(Metrics {
        tp,
        fp,
        tn,
        fn_,
        acc: (tp + tn) as f64 / predictions.len() as f64,
        prec: ratio(tp, tp + fp),
        rec: ratio(tp, tp + fn_),
        mse: None,
        mae: None,
    })
}

/// (MSE, MAE).
pub fn regression_errors(predictions: &[f64], truths: &[f64]) -> Result<(f64, f64), LearnError> {
    if predictions.len() != truths.len() {
        return Err(LearnError::LengthMismatch(predictions.len(), truths.len()));
    }
    if predictions.is_empty() {
        return Err(LearnError::EmptyTraining);
    }
    let n = predictions.len() as f64;
    let mse = predictions.iter().zip(truths).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
    let mae = predictions.iter().zip(truths).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
    Ok((mse, mae))
}

/// Scores a model on labeled examples; regressors are thresholded.
pub fn evaluate<'a>(
    model: &Model,
    examples: impl IntoIterator<Item = &'a LabeledExample>,
    threshold: f64,
) -> Result<Metrics, LearnError> {
    let mut preds = Vec::new();
    let mut classes = Vec::new();
    let mut truths = Vec::new();
    let mut targets = Vec::new();
    for e in examples {
        let p = model.predict(&e.features)?;
        preds.push(p);
        classes.push(u8::from(decision_from_prediction(model.task(), p, threshold) == EvalMethod::Rewritten));
        truths.push(e.class_label);
        targets.push(e.reg_target);
    }
    let mut m = compute_metrics(&classes, &truths)?;
    if model.task() == Task::Regress {
        let (mse, mae) = regression_errors(&preds, &targets)?;
        m.mse = Some(mse);
        m.mae = Some(mae);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub metrics: Metrics,
    pub e2e_seconds: f64,
}

/// Metrics and total runtime of the chosen strategies at each threshold.
pub fn threshold_sweep(model: &Model, validation: &[LabeledExample], grid: &[f64]) -> Result<Vec<SweepPoint>, LearnError> {
    if model.task() != Task::Regress {
        return Err(LearnError::WrongTask(Task::Regress));
    }
    let preds: Vec<f64> = validation.iter().map(|e| model.predict(&e.features)).collect::<Result<_, _>>()?;
    let truths: Vec<u8> = validation.iter().map(|e| e.class_label).collect();
    grid.iter()
        .map(|&threshold| {
            let mut classes = Vec::with_capacity(preds.len());
            let mut e2e = 0.0;
            for (p, e) in preds.iter().zip(validation) {
                let rewrite = *p < threshold;
                classes.push(u8::from(rewrite));
                e2e += if rewrite { e.t_rewritten } else { e.t_original };
            }
            Ok(SweepPoint { threshold, metrics: compute_metrics(&classes, &truths)?, e2e_seconds: e2e })
        })
        .collect()
}
