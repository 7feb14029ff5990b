use serde::{Deserialize, Serialize};

use crate::{LabeledExample, LearnError, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CartParams {
    pub max_depth: Option<usize>,
    /// Nodes with fewer examples than this become leaves.
    pub min_leaf: usize,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams { max_depth: None, min_leaf: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// `counts` holds the class distribution for classifiers.
    Leaf { value: f64, counts: Option<[usize; 2]>, n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartModel {
    pub task: Task,
    pub params: CartParams,
    pub feature_names: Vec<String>,
    pub nodes: Vec<Node>,
    pub importances: Vec<f64>,
}

struct Stats {
    n: f64,
    pos: f64,
    sum: f64,
    sq: f64,
}

impl Stats {
    fn new() -> Self {
        Stats { n: 0.0, pos: 0.0, sum: 0.0, sq: 0.0 }
    }

    fn add(&mut self, y: f64, sign: f64) {
        self.n += sign;
        self.pos += sign * f64::from(u8::from(y > 0.5));
        self.sum += sign * y;
        self.sq += sign * y * y;
    }

    fn impurity(&self, task: Task) -> f64 {
        if self.n <= 0.0 {
            return 0.0;
        }
        match task {
            Task::Classify => {
                let p = self.pos / self.n;
                2.0 * p * (1.0 - p)
            }
            Task::Regress => {
                let m = self.sum / self.n;
                (self.sq / self.n - m * m).max(0.0)
            }
        }
    }
}

struct Best {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

fn best_split(xs: &[Vec<f64>], ys: &[f64], idx: &[usize], task: Task, n_features: usize) -> Option<Best> {
    let mut total = Stats::new();
    for &i in idx {
        total.add(ys[i], 1.0);
    }
    let parent = total.impurity(task);
    let n = idx.len() as f64;
    let mut best: Option<Best> = None;
    let mut order = idx.to_vec();
    for f in 0..n_features {
        order.sort_by(|&a, &b| xs[a][f].total_cmp(&xs[b][f]).then(a.cmp(&b)));
        let mut left = Stats::new();
        let mut right = Stats { n: total.n, pos: total.pos, sum: total.sum, sq: total.sq };
        for w in 0..order.len() - 1 {
            let y = ys[order[w]];
            left.add(y, 1.0);
            right.add(y, -1.0);
            let (lo, hi) = (xs[order[w]][f], xs[order[w + 1]][f]);
            if lo == hi {
                continue;
            }
            let child = (left.n * left.impurity(task) + right.n * right.impurity(task)) / n;
            let decrease = (parent - child).max(0.0);
            if best.as_ref().map_or(true, |b| decrease > b.decrease + 1e-12) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if !threshold.is_finite() || threshold >= hi {
                    threshold = lo;
                }
                best = Some(Best { feature: f, threshold, decrease });
            }
        }
    }
    best
}

fn leaf(ys: &[f64], idx: &[usize], task: Task) -> Node {
    let n = idx.len();
    match task {
        Task::Classify => {
            let pos = idx.iter().filter(|&&i| ys[i] > 0.5).count();
            // Majority vote; an even split predicts 0.
            let value = if 2 * pos > n { 1.0 } else { 0.0 };
            Node::Leaf { value, counts: Some([n - pos, pos]), n }
        }
        Task::Regress => {
            let value = if n == 0 { 0.0 } else { idx.iter().map(|&i| ys[i]).sum::<f64>() / n as f64 };
            Node::Leaf { value, counts: None, n }
        }
    }
}

impl CartModel {
    /// Greedy CART over raw rows. Class targets are read as 0/1.
    pub fn fit(
        xs: &[Vec<f64>],
        ys: &[f64],
        task: Task,
        params: CartParams,
        feature_names: Vec<String>,
    ) -> Result<CartModel, LearnError> {
        if xs.is_empty() {
            return Err(LearnError::EmptyTraining);
        }
        if xs.len() != ys.len() {
            return Err(LearnError::LengthMismatch(xs.len(), ys.len()));
        }
        let n_features = xs[0].len();
        if n_features == 0 {
            return Err(LearnError::EmptyTraining);
        }
        for row in xs {
            if row.len() != n_features {
                return Err(LearnError::UnseenFeatureDimension { expected: n_features, got: row.len() });
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(LearnError::NonFinite(*v));
            }
        }
        let total = xs.len() as f64;
        let mut nodes: Vec<Node> = Vec::new();
        let mut raw_importance = vec![0.0; n_features];
        let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, (0..xs.len()).collect(), 0)];
        nodes.push(Node::Leaf { value: 0.0, counts: None, n: 0 });
        while let Some((slot, idx, depth)) = stack.pop() {
            let pure = idx.iter().all(|&i| ys[i] == ys[idx[0]]);
            let capped = params.max_depth.is_some_and(|d| depth >= d);
            let split = if pure || capped || idx.len() < params.min_leaf.max(2) {
                None
            } else {
                best_split(xs, ys, &idx, task, n_features)
            };
            match split {
                None => nodes[slot] = leaf(ys, &idx, task),
                Some(b) => {
                    raw_importance[b.feature] += b.decrease * idx.len() as f64 / total;
                    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| xs[i][b.feature] <= b.threshold);
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(Node::Leaf { value: 0.0, counts: None, n: 0 });
                    nodes.push(Node::Leaf { value: 0.0, counts: None, n: 0 });
                    nodes[slot] = Node::Split { feature: b.feature, threshold: b.threshold, left, right };
                    stack.push((right, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
            }
        }
        let sum: f64 = raw_importance.iter().sum();
        let importances = if sum > 0.0 {
            raw_importance.iter().map(|v| v / sum).collect()
        } else {
            vec![0.0; n_features]
        };
        let feature_names = if feature_names.len() == n_features {
            feature_names
        } else {
            (0..n_features).map(|i| format!("f{i}")).collect()
        };
        Ok(CartModel { task, params, feature_names, nodes, importances })
    }

    pub fn n_features(&self) -> usize {
        self.importances.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, LearnError> {
        if self.nodes.is_empty() {
            return Err(LearnError::UntrainedModel);
        }
        if x.len() != self.n_features() {
            return Err(LearnError::UnseenFeatureDimension { expected: self.n_features(), got: x.len() });
        }
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { value, .. } => return Ok(*value),
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            go(&self.nodes, 0)
        }
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    pub fn to_json(&self) -> Result<String, LearnError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<CartModel, LearnError> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Fits on `class_label` for classifiers and `reg_target` for regressors.
pub fn train_cart(
    train: &[LabeledExample],
    task: Task,
    params: CartParams,
    feature_names: Vec<String>,
) -> Result<CartModel, LearnError> {
    let xs: Vec<Vec<f64>> = train.iter().map(|e| e.features.clone()).collect();
    let ys: Vec<f64> = train
        .iter()
        .map(|e| match task {
            Task::Classify => f64::from(e.class_label),
            Task::Regress => e.reg_target,
        })
        .collect();
    CartModel::fit(&xs, &ys, task, params, feature_names)
}

/// Features with nonzero importance, most important first.
pub fn gini_importances(model: &CartModel) -> Result<Vec<(String, f64)>, LearnError> {
    if model.nodes.is_empty() {
        return Err(LearnError::UntrainedModel);
    }
    let mut ranked: Vec<(usize, f64)> =
        model.importances.iter().copied().enumerate().filter(|(_, v)| *v > 0.0).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().map(|(i, v)| (model.feature_names[i].clone(), v)).collect())
}
