use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use smash_core::acyclic::analyze;
use smash_core::engine::{estimate_with_statistics, Database, Statistics};
use smash_core::features::{extract_features, FeatureVector};
use smash_core::query::{normalize, Catalog, QuerySpec};
use smash_learn::metrics::evaluate;
use smash_learn::{
    cross_validate, label, split_dataset, train_cart, train_knn, CartParams, LabeledExample, Metrics, Model, Task,
};

use crate::{HarnessError, RunLog, Strategy};

/// Feature vector of one query plus its 0MA flag.
pub fn query_features(
    spec: &QuerySpec,
    catalog: &Catalog,
    db: &Database,
    stats: &Statistics,
) -> Result<(FeatureVector, bool), HarnessError> {
    let cq = normalize(spec, catalog)?;
    let (tree, oma) = analyze(&cq)?;
    let est = estimate_with_statistics(&cq, db, stats)?;
    Ok((extract_features(&cq, &tree, &est), oma.is_0ma))
}

/// One example per measured query; queries where both strategies timed out
/// or either failed are dropped.
pub fn build_dataset(log: &RunLog, features: &BTreeMap<String, Vec<f64>>) -> Result<Vec<LabeledExample>, HarnessError> {
    let mut out = Vec::new();
    for id in log.query_ids() {
        let mut means = [0.0; 2];
        let mut usable = true;
        for (i, s) in Strategy::ALL.iter().enumerate() {
            let e = log
                .entry(&id, *s)
                .ok_or_else(|| HarnessError::MissingStrategy { query: id.clone(), strategy: *s })?;
            usable &= e.usable();
            means[i] = e.mean_s;
        }
        if !usable || log.excluded(&id) {
            continue;
        }
        let fv = features.get(&id).ok_or_else(|| HarnessError::MissingFeatures(id.clone()))?;
        out.push(label(id, fv.clone(), means[0], means[1]));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectorKind {
    CartClassifier,
    CartRegressor,
    KnnClassifier { k: usize },
    KnnRegressor { k: usize },
}

impl SelectorKind {
    pub fn task(self) -> Task {
        match self {
            SelectorKind::CartClassifier | SelectorKind::KnnClassifier { .. } => Task::Classify,
            SelectorKind::CartRegressor | SelectorKind::KnnRegressor { .. } => Task::Regress,
        }
    }

    pub fn fit(self, train: &[LabeledExample], names: &[String]) -> Result<Model, smash_learn::LearnError> {
        Ok(match self {
            SelectorKind::CartClassifier | SelectorKind::CartRegressor => {
                Model::Cart(train_cart(train, self.task(), CartParams::default(), names.to_vec())?)
            }
            SelectorKind::KnnClassifier { k } | SelectorKind::KnnRegressor { k } => {
                Model::Knn(train_knn(train, self.task(), k)?)
            }
        })
    }
}

/// A trained model together with the data partition it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedSelector {
    pub kind: SelectorKind,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub cv_accuracy: Vec<f64>,
    pub validation: Metrics,
    pub test: Metrics,
    pub model: Model,
}

impl TrainedSelector {
    pub fn mean_cv_accuracy(&self) -> f64 {
        self.cv_accuracy.iter().sum::<f64>() / self.cv_accuracy.len().max(1) as f64
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<TrainedSelector, HarnessError> {
        Ok(serde_json::from_str(s)?)
    }
}

/// 10-fold CV over train+validation, final fit on the training split,
/// metrics on validation and on the untouched test split.
pub fn train_selector(examples: &[LabeledExample], kind: SelectorKind, seed: u64) -> Result<TrainedSelector, HarnessError> {
    let splits = split_dataset(examples.len(), seed)?;
    let names = FeatureVector::names();
    let cv = cross_validate(examples, &splits.folds, |tr| kind.fit(tr, &names))?;
    let pick = |idx: &[usize]| -> Vec<LabeledExample> { idx.iter().map(|&i| examples[i].clone()).collect() };
    let (train, validation, test) = (pick(&splits.train), pick(&splits.validation), pick(&splits.test));
    let model = kind.fit(&train, &names)?;
    let ids = |v: &[LabeledExample]| v.iter().map(|e| e.id.clone()).collect::<Vec<_>>();
    Ok(TrainedSelector {
        kind,
        seed,
        feature_names: names,
        train_ids: ids(&train),
        validation_ids: ids(&validation),
        test_ids: ids(&test),
        cv_accuracy: cv.iter().map(|m| m.acc).collect(),
        validation: evaluate(&model, &validation, 0.0)?,
        test: evaluate(&model, &test, 0.0)?,
        model,
    })
}

/// Features of every query, keyed by id.
pub fn feature_table(queries: &[(String, QuerySpec)], db: &Database) -> Result<BTreeMap<String, Vec<f64>>, HarnessError> {
    let catalog = Catalog::from_db(db);
    let stats = Statistics::analyze(db);
    let mut out = BTreeMap::new();
    for (id, q) in queries {
        match query_features(q, &catalog, db, &stats) {
            Ok((fv, _)) => {
                out.insert(id.clone(), fv.to_vec());
            }
            Err(HarnessError::Acyclic(e)) => log::info!("no features for {id}: {e}"),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// `id,<features>,t_original,t_rewritten` rows.
pub fn dataset_csv(examples: &[LabeledExample]) -> String {
    let mut s = format!("id,{},t_original,t_rewritten\n", FeatureVector::names().join(","));
    for e in examples {
        let f: Vec<String> = e.features.iter().map(f64::to_string).collect();
        s.push_str(&format!("{},{},{},{}\n", e.id, f.join(","), e.t_original, e.t_rewritten));
    }
    s
}

/// Examples keyed by id, for picking a split back out of a dataset.
pub fn by_id(examples: &[LabeledExample]) -> HashMap<&str, &LabeledExample> {
    examples.iter().map(|e| (e.id.as_str(), e)).collect()
}
