use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::LearnError;

/// `sgn(x) * ln(|x| + 1)`.
pub fn sign_log(x: f64) -> Result<f64, LearnError> {
    if !x.is_finite() {
        return Err(LearnError::NonFinite(x));
    }
    Ok(x.signum() * x.abs().ln_1p())
}

pub fn sign_log_inverse(y: f64) -> f64 {
    y.signum() * y.abs().exp_m1()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub features: Vec<f64>,
    pub t_original: f64,
    pub t_rewritten: f64,
    pub class_label: u8,
    pub reg_target: f64,
}

/// Label 1 when rewriting is strictly faster; ties go to the original.
pub fn label(id: impl Into<String>, features: Vec<f64>, t_original: f64, t_rewritten: f64) -> LabeledExample {
    let diff = t_rewritten - t_original;
    LabeledExample {
        id: id.into(),
        features,
        t_original,
        t_rewritten,
        class_label: u8::from(t_rewritten < t_original),
        reg_target: sign_log(diff).unwrap_or(0.0),
    }
}

/// Index partition of a dataset. `folds` partition `train ∪ validation`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub seed: u64,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub folds: Vec<Vec<usize>>,
}

impl Splits {
    pub fn pool(&self) -> Vec<usize> {
        self.train.iter().chain(&self.validation).copied().collect()
    }

    /// (training indices, held-out indices) for fold `k`.
    pub fn fold(&self, k: usize) -> (Vec<usize>, Vec<usize>) {
        let train = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        (train, self.folds[k].clone())
    }
}

pub const MIN_EXAMPLES: usize = 20;
pub const N_FOLDS: usize = 10;

pub fn split_dataset(n: usize, seed: u64) -> Result<Splits, LearnError> {
    if n < MIN_EXAMPLES {
        return Err(LearnError::TooFewExamples { needed: MIN_EXAMPLES, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (n as f64 * 0.1).round() as usize;
    let n_val = n_test;
    let test = idx[..n_test].to_vec();
    let validation = idx[n_test..n_test + n_val].to_vec();
    let train = idx[n_test + n_val..].to_vec();
    let pool = &idx[n_test..];
    let base = pool.len() / N_FOLDS;
    let extra = pool.len() % N_FOLDS;
    let mut folds = Vec::with_capacity(N_FOLDS);
    let mut at = 0;
    for f in 0..N_FOLDS {
        let len = base + usize::from(f < extra);
        folds.push(pool[at..at + len].to_vec());
        at += len;
    }
    Ok(Splits { seed, train, validation, test, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn sign_log_values() {
        assert_eq!(sign_log(0.0).unwrap(), 0.0);
        assert!((sign_log(std::f64::consts::E - 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((sign_log(-(std::f64::consts::E - 1.0)).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(sign_log(f64::NAN), Err(LearnError::NonFinite(_))));
        assert!(sign_log(f64::INFINITY).is_err());
    }

    #[test]
    fn labels_follow_runtime_comparison() {
        let e = label("fig1", vec![], 3.38, 0.11);
        assert_eq!(e.class_label, 1);
        assert!(e.reg_target < 0.0);
        assert!((e.reg_target - sign_log(0.11 - 3.38).unwrap()).abs() < 1e-15);
        assert_eq!(label("m", vec![], 0.05, 0.09).class_label, 0);
        let tie = label("t", vec![], 1.0, 1.0);
        assert_eq!((tie.class_label, tie.reg_target), (0, 0.0));
    }

    #[test]
    fn split_sizes() {
        let s = split_dataset(100, 7).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (80, 10, 10));
        assert!(s.folds.iter().all(|f| f.len() == 9));
        assert_eq!(s, split_dataset(100, 7).unwrap());
        assert_ne!(s.test, split_dataset(100, 8).unwrap().test);
        let test: HashSet<_> = s.test.iter().collect();
        assert!(s.folds.iter().flatten().all(|i| !test.contains(i)));
        let all: HashSet<_> = s.folds.iter().flatten().chain(&s.test).collect();
        assert_eq!(all.len(), 100);
        assert!(matches!(split_dataset(19, 0), Err(LearnError::TooFewExamples { .. })));
    }

    #[test]
    fn uneven_folds_cover_pool() {
        let s = split_dataset(23, 1).unwrap();
        let sizes: Vec<_> = s.folds.iter().map(Vec::len).collect();
        assert_eq!(sizes.iter().sum::<usize>(), s.pool().len());
        let (tr, ho) = s.fold(3);
        assert_eq!(tr.len() + ho.len(), s.pool().len());
    }
}
