use serde::{Deserialize, Serialize};

use crate::{CartModel, KnnModel, LabeledExample, LearnError, Metrics, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalMethod {
    Original,
    Rewritten,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Model {
    Cart(CartModel),
    Knn(KnnModel),
}

impl Model {
    pub fn task(&self) -> Task {
        match self {
            Model::Cart(m) => m.task,
            Model::Knn(m) => m.task,
        }
    }

    /// Class (0/1) for classifiers, predicted sign-log difference for regressors.
    pub fn predict(&self, x: &[f64]) -> Result<f64, LearnError> {
        match self {
            Model::Cart(m) => m.predict(x),
            Model::Knn(m) => m.predict(x),
        }
    }

    pub fn to_json(&self) -> Result<String, LearnError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Model, LearnError> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Regressors pick rewriting only when the prediction is strictly below
/// `threshold`; classifiers ignore the threshold.
pub fn decide(model: &Model, x: &[f64], threshold: f64) -> Result<EvalMethod, LearnError> {
    let p = model.predict(x)?;
    Ok(decision_from_prediction(model.task(), p, threshold))
}

pub fn decision_from_prediction(task: Task, prediction: f64, threshold: f64) -> EvalMethod {
    let rewrite = match task {
        Task::Classify => prediction > 0.5,
        Task::Regress => prediction < threshold,
    };
    if rewrite {
        EvalMethod::Rewritten
    } else {
        EvalMethod::Original
    }
}

/// Trains on all folds but one and scores the held-out fold, for each fold.
/// Regressors are scored as classifiers at threshold 0.
pub fn cross_validate<F>(examples: &[LabeledExample], folds: &[Vec<usize>], fit: F) -> Result<Vec<Metrics>, LearnError>
where
    F: Fn(&[LabeledExample]) -> Result<Model, LearnError>,
{
    let mut out = Vec::with_capacity(folds.len());
    for k in 0..folds.len() {
        let train: Vec<LabeledExample> = folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .flat_map(|(_, f)| f.iter().map(|&i| examples[i].clone()))
            .collect();
        let model = fit(&train)?;
        let held: Vec<&LabeledExample> = folds[k].iter().map(|&i| &examples[i]).collect();
        out.push(crate::metrics::evaluate(&model, held.iter().copied(), 0.0)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{CartParams, Node};

    fn stump(value_left: f64, value_right: f64, task: Task) -> Model {
        Model::Cart(CartModel {
            task,
            params: CartParams::default(),
            feature_names: vec!["x".into()],
            nodes: vec![
                Node::Split { feature: 0, threshold: 0.0, left: 1, right: 2 },
                Node::Leaf { value: value_left, counts: None, n: 1 },
                Node::Leaf { value: value_right, counts: None, n: 1 },
            ],
            importances: vec![1.0],
        })
    }

    #[test]
    fn strict_threshold() {
        let m = stump(-0.5, 0.0, Task::Regress);
        assert_eq!(decide(&m, &[-1.0], 0.0).unwrap(), EvalMethod::Rewritten);
        assert_eq!(decide(&m, &[1.0], 0.0).unwrap(), EvalMethod::Original);
        assert_eq!(decide(&m, &[-1.0], -1.0).unwrap(), EvalMethod::Original);
    }

    #[test]
    fn classifier_ignores_threshold() {
        let m = stump(1.0, 0.0, Task::Classify);
        assert_eq!(decide(&m, &[-1.0], -100.0).unwrap(), EvalMethod::Rewritten);
        assert_eq!(decide(&m, &[1.0], 100.0).unwrap(), EvalMethod::Original);
    }

    #[test]
    fn json_roundtrip() {
        let m = stump(1.0, 0.0, Task::Classify);
        assert_eq!(Model::from_json(&m.to_json().unwrap()).unwrap(), m);
    }
}
