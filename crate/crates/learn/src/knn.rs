use serde::{Deserialize, Serialize};

use crate::{LabeledExample, LearnError, Task};

/// k nearest neighbours over z-scored features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub task: Task,
    pub k: usize,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl KnnModel {
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], task: Task, k: usize) -> Result<KnnModel, LearnError> {
        if xs.is_empty() || k == 0 {
            return Err(LearnError::EmptyTraining);
        }
        if xs.len() != ys.len() {
            return Err(LearnError::LengthMismatch(xs.len(), ys.len()));
        }
        let d = xs[0].len();
        if let Some(row) = xs.iter().find(|r| r.len() != d) {
            return Err(LearnError::UnseenFeatureDimension { expected: d, got: row.len() });
        }
        let n = xs.len() as f64;
        let means: Vec<f64> = (0..d).map(|j| xs.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scales: Vec<f64> = (0..d)
            .map(|j| {
                let var = xs.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 { var.sqrt() } else { 1.0 }
            })
            .collect();
        let k = if k > xs.len() {
            log::warn!("k = {k} exceeds the {} training points; using {}", xs.len(), xs.len());
            xs.len()
        } else {
            k
        };
        let points = xs.iter().map(|r| standardize(r, &means, &scales)).collect();
        Ok(KnnModel { task, k, means, scales, points, targets: ys.to_vec() })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, LearnError> {
        if x.len() != self.means.len() {
            return Err(LearnError::UnseenFeatureDimension { expected: self.means.len(), got: x.len() });
        }
        let z = standardize(x, &self.means, &self.scales);
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let near = &dist[..self.k];
        Ok(match self.task {
            Task::Classify => {
                let pos = near.iter().filter(|(_, i)| self.targets[*i] > 0.5).count();
                if 2 * pos > near.len() { 1.0 } else { 0.0 }
            }
            Task::Regress => near.iter().map(|(_, i)| self.targets[*i]).sum::<f64>() / near.len() as f64,
        })
    }
}

fn standardize(x: &[f64], means: &[f64], scales: &[f64]) -> Vec<f64> {
    x.iter().zip(means).zip(scales).map(|((v, m), s)| (v - m) / s).collect()
}

pub fn train_knn(train: &[LabeledExample], task: Task, k: usize) -> Result<KnnModel, LearnError> {
    let xs: Vec<Vec<f64>> = train.iter().map(|e| e.features.clone()).collect();
    let ys: Vec<f64> = train
        .iter()
        .map(|e| match task {
            Task::Classify => f64::from(e.class_label),
            Task::Regress => e.reg_target,
        })
        .collect();
    KnnModel::fit(&xs, &ys, task, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_with_k1() {
        let xs = vec![vec![0.0, 0.0], vec![5.0, 1.0], vec![9.0, 3.0]];
        let m = KnnModel::fit(&xs, &[0.0, 1.0, 0.0], Task::Classify, 1).unwrap();
        for (x, y) in xs.iter().zip([0.0, 1.0, 0.0]) {
            assert_eq!(m.predict(x).unwrap(), y);
        }
    }

    #[test]
    fn k_clamped() {
        let xs = vec![vec![0.0], vec![1.0], vec![2.0]];
        let m = KnnModel::fit(&xs, &[1.0, 2.0, 6.0], Task::Regress, 5).unwrap();
        assert_eq!(m.k, 3);
        assert_eq!(m.predict(&[100.0]).unwrap(), 3.0);
    }

    #[test]
    fn distance_ties_use_training_order() {
        let xs = vec![vec![-1.0], vec![1.0]];
        let m = KnnModel::fit(&xs, &[1.0, 0.0], Task::Classify, 1).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), 1.0);
        let m = KnnModel::fit(&xs, &[0.0, 1.0], Task::Classify, 1).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn z_scoring_equalizes_scales() {
        // Without scaling the second column would dominate.
        let xs = vec![vec![0.0, 0.0], vec![1.0, 1000.0], vec![0.0, 1000.0], vec![1.0, 0.0]];
        let m = KnnModel::fit(&xs, &[0.0, 1.0, 0.0, 1.0], Task::Classify, 1).unwrap();
        assert_eq!(m.predict(&[0.9, 400.0]).unwrap(), 1.0);
        assert!(matches!(m.predict(&[1.0]), Err(LearnError::UnseenFeatureDimension { .. })));
    }

    #[test]
    fn empty_training() {
        assert!(matches!(KnnModel::fit(&[], &[], Task::Classify, 5), Err(LearnError::EmptyTraining)));
    }
}
