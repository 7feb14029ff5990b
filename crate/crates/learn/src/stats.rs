use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 usable pairs, got {0}")]
    TooFewPairs(usize),
    #[error("all paired differences are zero")]
    AllDifferencesZero,
    #[error("differences have zero variance")]
    ZeroVariance,
    #[error("non-finite sample value")]
    NonFinite,
}

/// Largest sample size evaluated by exact enumeration.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    /// min(W+, W-).
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Nonzero differences used.
    pub n: usize,
    pub exact: bool,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    pub mean_diff: f64,
    pub p_value: f64,
}

fn differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(d)
}

/// Average ranks of `|d|`, doubled so they are integers.
fn doubled_ranks(abs: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&i, &j| abs[i].total_cmp(&abs[j]));
    let mut ranks = vec![0u64; abs.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        // Positions i..=j share rank ((i+1)+(j+1))/2.
        let r2 = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = r2;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Two-sided Wilcoxon signed-rank test on `a - b`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<Wilcoxon, StatsError> {
    let d: Vec<f64> = differences(a, b)?.into_iter().filter(|v| *v != 0.0).collect();
    if d.is_empty() {
        return Err(if a.len() < 2 { StatsError::TooFewPairs(a.len()) } else { StatsError::AllDifferencesZero });
    }
    if d.len() < 2 {
        return Err(StatsError::TooFewPairs(d.len()));
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = doubled_ranks(&abs);
    let total2: u64 = ranks.iter().sum();
    let plus2: u64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let min2 = plus2.min(total2 - plus2);
    let (p_value, exact) = if n <= EXACT_LIMIT {
        // counts[s] = number of sign assignments with doubled W+ == s.
        let mut counts = vec![0u64; total2 as usize + 1];
        counts[0] = 1;
        let mut reach = 0usize;
        for &r in &ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] > 0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let below: u64 = counts[..=min2 as usize].iter().sum();
        ((2.0 * below as f64 / 2f64.powi(n as i32)).min(1.0), true)
    } else {
        let nf = n as f64;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        let mean = nf * (nf + 1.0) / 4.0;
        let z = ((plus2 as f64 / 2.0 - mean).abs() - 0.5).max(0.0) / var.sqrt();
        (erfc(z / std::f64::consts::SQRT_2).min(1.0), false)
    };
    Ok(Wilcoxon {
        statistic: min2 as f64 / 2.0,
        w_plus: plus2 as f64 / 2.0,
        w_minus: (total2 - plus2) as f64 / 2.0,
        n,
        exact,
        p_value,
    })
}

/// Two-sided paired t-test on `a - b` with n-1 degrees of freedom.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    let d = differences(a, b)?;
    let n = d.len();
    if n < 2 {
        return Err(StatsError::TooFewPairs(n));
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let s = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    if s == 0.0 || s <= mean.abs() * 1e-14 {
        return Err(StatsError::ZeroVariance);
    }
    let t = mean * nf.sqrt() / s;
    let df = nf - 1.0;
    // P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2).
    let p_value = if t == 0.0 { 1.0 } else { beta_reg(df / 2.0, 0.5, df / (df + t * t)) };
    Ok(TTest { t, df: n - 1, mean_diff: mean, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeros(n: usize) -> Vec<f64> {
        vec![0.0; n]
    }

    #[test]
    fn wilcoxon_all_positive() {
        let w = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &zeros(5)).unwrap();
        assert_eq!(w.statistic, 0.0);
        assert_eq!(w.w_plus, 15.0);
        assert!((w.p_value - 0.0625).abs() < 1e-15);
        assert!(w.exact);
    }

    #[test]
    fn wilcoxon_symmetric_pair() {
        // Tied |d| share rank 1.5, so W+ = W- = 1.5.
        let w = wilcoxon_signed_rank(&[1.0, -1.0], &zeros(2)).unwrap();
        assert_eq!(w.statistic, 1.5);
        assert_eq!(w.p_value, 1.0);
    }

    #[test]
    fn wilcoxon_errors() {
        assert_eq!(wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::AllDifferencesZero));
        assert_eq!(wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 3.0]), Err(StatsError::TooFewPairs(1)));
        assert_eq!(wilcoxon_signed_rank(&[1.0], &[1.0, 3.0]), Err(StatsError::LengthMismatch(1, 2)));
    }

    #[test]
    fn wilcoxon_large_sample_uses_normal() {
        let a: Vec<f64> = (1..=40).map(f64::from).collect();
        let w = wilcoxon_signed_rank(&a, &zeros(40)).unwrap();
        assert!(!w.exact);
        assert!(w.p_value < 1e-6);
        let mixed: Vec<f64> = (1..=40).map(|i| if i % 2 == 0 { f64::from(i) } else { -f64::from(i) }).collect();
        assert!(wilcoxon_signed_rank(&mixed, &zeros(40)).unwrap().p_value > 0.5);
    }

    #[test]
    fn t_values() {
        let t = paired_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &zeros(5)).unwrap();
        assert!((t.t - 4.242640687119285).abs() < 1e-12);
        assert_eq!(t.df, 4);
        // Two-sided p for t = 3*sqrt(2), df = 4.
        assert!((t.p_value - 0.013236).abs() < 1e-5);
        let sym = paired_t_test(&[2.0, -2.0], &zeros(2)).unwrap();
        assert_eq!((sym.t, sym.p_value), (0.0, 1.0));
        assert_eq!(paired_t_test(&[3.0, 3.0, 3.0], &zeros(3)), Err(StatsError::ZeroVariance));
        assert_eq!(paired_t_test(&[3.0], &zeros(1)), Err(StatsError::TooFewPairs(1)));
    }
}
