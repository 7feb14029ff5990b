use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use smash_core::engine::{Database, Statistics};
use smash_core::query::{Catalog, QuerySpec};
use smash_learn::{decide, EvalMethod, Model};

use crate::harness::clock_description;
use crate::selector::query_features;
use crate::{HarnessError, RunLog, Strategy};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StrategyTotals {
    pub total_s: f64,
    pub oma_s: f64,
    pub enum_s: f64,
    /// Queries on which this strategy's runtime exceeded Base's.
    pub slowdowns: usize,
    pub slowdown_fraction: f64,
}

impl StrategyTotals {
    fn add(&mut self, is_0ma: bool, seconds: f64, slower: bool) {
        self.total_s += seconds;
        if is_0ma {
            self.oma_s += seconds;
        } else {
            self.enum_s += seconds;
        }
        self.slowdowns += usize::from(slower);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub query_id: String,
    pub is_0ma: bool,
    pub base_s: f64,
    pub rewriting_s: f64,
    pub choice: EvalMethod,
    pub decision_s: f64,
}

impl QueryOutcome {
    pub fn chosen_s(&self) -> f64 {
        match self.choice {
            EvalMethod::Original => self.base_s,
            EvalMethod::Rewritten => self.rewriting_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2eReport {
    pub clock: String,
    pub threshold: f64,
    pub n_queries: usize,
    pub excluded_query_ids: Vec<String>,
    pub base: StrategyTotals,
    pub rewriting: StrategyTotals,
    /// Chosen runtimes plus the measured decision latency.
    pub smash: StrategyTotals,
    pub oracle_best: StrategyTotals,
    pub decision_mean_s: f64,
    pub decision_max_s: f64,
    pub queries: Vec<QueryOutcome>,
}

impl E2eReport {
    /// Aggregates per-query outcomes.
    pub fn from_outcomes(queries: Vec<QueryOutcome>, excluded: Vec<String>, threshold: f64, clock: String) -> E2eReport {
        let (mut base, mut rewriting, mut smash, mut oracle) =
            (StrategyTotals::default(), StrategyTotals::default(), StrategyTotals::default(), StrategyTotals::default());
        let mut sorted = queries;
        sorted.sort_by(|a, b| a.query_id.cmp(&b.query_id));
        for q in &sorted {
            StrategyTotals::add(&mut base, q.is_0ma, q.base_s, false);
            StrategyTotals::add(&mut rewriting, q.is_0ma, q.rewriting_s, q.rewriting_s > q.base_s);
            StrategyTotals::add(&mut smash, q.is_0ma, q.chosen_s() + q.decision_s, q.chosen_s() > q.base_s);
            StrategyTotals::add(&mut oracle, q.is_0ma, q.base_s.min(q.rewriting_s), false);
        }
        let n = sorted.len();
        for t in [&mut base, &mut rewriting, &mut smash, &mut oracle] {
            t.slowdown_fraction = if n == 0 { 0.0 } else { t.slowdowns as f64 / n as f64 };
        }
        let decision_mean_s = if n == 0 { 0.0 } else { sorted.iter().map(|q| q.decision_s).sum::<f64>() / n as f64 };
        let decision_max_s = sorted.iter().map(|q| q.decision_s).fold(0.0, f64::max);
        let mut excluded_query_ids = excluded;
        excluded_query_ids.sort();
        E2eReport {
            clock,
            threshold,
            n_queries: n,
            excluded_query_ids,
            base,
            rewriting,
            smash,
            oracle_best: oracle,
            decision_mean_s,
            decision_max_s,
            queries: sorted,
        }
    }

    pub fn text_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# clock: {}", self.clock);
        let _ = writeln!(
            s,
            "# {} queries, {} excluded, threshold {}, decision latency mean {:.3} ms / max {:.3} ms",
            self.n_queries,
            self.excluded_query_ids.len(),
            self.threshold,
            self.decision_mean_s * 1e3,
            self.decision_max_s * 1e3
        );
        let _ = writeln!(s, "{:<12} {:>12} {:>12} {:>12} {:>10}", "strategy", "0MA [s]", "Enum [s]", "total [s]", "slowdowns");
        for (name, t) in [
            ("Base", &self.base),
            ("Rewriting", &self.rewriting),
            ("SMASH", &self.smash),
            ("OracleBest", &self.oracle_best),
        ] {
            let _ = writeln!(
                s,
                "{:<12} {:>12.4} {:>12.4} {:>12.4} {:>9.1}%",
                name,
                t.oma_s,
                t.enum_s,
                t.total_s,
                100.0 * t.slowdown_fraction
            );
        }
        s
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Replays the selector over `queries` against measured runtimes. Feature
/// extraction and prediction are timed and charged to SMASH; table
/// statistics are gathered once up front, as a database would at load time.
pub fn smash_e2e(
    db: &Database,
    queries: &[(String, QuerySpec)],
    model: &Model,
    threshold: f64,
    log: &RunLog,
) -> Result<E2eReport, HarnessError> {
    let catalog = Catalog::from_db(db);
    let stats = Statistics::analyze(db);
    let mut outcomes = Vec::with_capacity(queries.len());
    let mut excluded = Vec::new();
    for (id, spec) in queries {
        let mut means = [0.0; 2];
        let mut usable = true;
        for (i, s) in Strategy::ALL.iter().enumerate() {
            let e = log
                .entry(id, *s)
                .ok_or_else(|| HarnessError::MissingStrategy { query: id.clone(), strategy: *s })?;
            usable &= e.usable();
            means[i] = e.mean_s;
        }
        if !usable || log.excluded(id) {
            excluded.push(id.clone());
            continue;
        }
        let start = Instant::now();
        let (fv, is_0ma) = query_features(spec, &catalog, db, &stats)?;
        let x = fv.to_vec();
        let choice = decide(model, &x, threshold).map_err(|e| match e {
            smash_learn::LearnError::UnseenFeatureDimension { expected, got } => {
                HarnessError::UnseenFeatureDimension { expected, got }
            }
            other => other.into(),
        })?;
        let decision_s = start.elapsed().as_secs_f64();
        outcomes.push(QueryOutcome { query_id: id.clone(), is_0ma, base_s: means[0], rewriting_s: means[1], choice, decision_s });
    }
    Ok(E2eReport::from_outcomes(outcomes, excluded, threshold, clock_description()))
}
