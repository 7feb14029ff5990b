use std::collections::HashSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use smash_core::acyclic::{analyze, JoinTree, OmaResult};
use smash_core::engine::{evaluate_baseline, Database, EngineError, Executor, OpCounter, Relation};
use smash_core::query::{normalize, Catalog, NormalizedCQ, QuerySpec};
use smash_core::rewrite::{interpret_sequence, rewrite, RewriteOptions, StatementSequence};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Join everything in FROM order, then filter the answer.
    Base,
    /// Run the rewritten statement sequence.
    Rewriting,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::Base, Strategy::Rewriting];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub repeats: usize,
    pub timeout_s: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { repeats: 5, timeout_s: 100.0, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub query_id: String,
    pub strategy: Strategy,
    pub warmup_s: f64,
    pub rep_times_s: Vec<f64>,
    /// Mean of `rep_times_s`, or the timeout when any run timed out.
    pub mean_s: f64,
    pub timed_out: bool,
    pub result_rows: Option<usize>,
    pub counter: Option<OpCounter>,
    pub error: Option<String>,
}

impl RunEntry {
    pub fn usable(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub query_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunLog {
    pub config: RunConfig,
    pub clock: String,
    pub entries: Vec<RunEntry>,
    pub skipped: Vec<Skipped>,
}

impl RunLog {
    pub fn entry(&self, query_id: &str, strategy: Strategy) -> Option<&RunEntry> {
        self.entries.iter().find(|e| e.query_id == query_id && e.strategy == strategy)
    }

    pub fn query_ids(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.entries.iter().filter(|e| seen.insert(e.query_id.clone())).map(|e| e.query_id.clone()).collect()
    }

    /// Both strategies timed out.
    pub fn excluded(&self, query_id: &str) -> bool {
        Strategy::ALL.iter().all(|&s| self.entry(query_id, s).is_some_and(|e| e.timed_out))
    }

    /// The log with every wall-clock measurement zeroed.
    pub fn without_timings(&self) -> RunLog {
        let mut out = self.clone();
        out.clock.clear();
        for e in &mut out.entries {
            e.warmup_s = 0.0;
            e.rep_times_s.iter_mut().for_each(|t| *t = 0.0);
            if !e.timed_out {
                e.mean_s = 0.0;
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<RunLog, HarnessError> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Describes the monotonic clock and its observed tick.
pub fn clock_description() -> String {
    let mut finest = Duration::MAX;
    for _ in 0..1000 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        finest = finest.min(b - a);
    }
    format!("monotonic Instant, observed resolution {} ns", finest.as_nanos())
}

/// A query analysed once, ready to be timed under either strategy.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    pub id: String,
    pub spec: QuerySpec,
    pub cq: NormalizedCQ,
    pub tree: JoinTree,
    pub oma: OmaResult,
    pub sequence: StatementSequence,
}

impl PreparedQuery {
    pub fn new(id: &str, spec: &QuerySpec, catalog: &Catalog) -> Result<PreparedQuery, HarnessError> {
        let cq = normalize(spec, catalog)?;
        let (tree, oma) = analyze(&cq)?;
        let sequence = rewrite(&tree, &cq, RewriteOptions::default())?;
        Ok(PreparedQuery { id: id.to_string(), spec: spec.clone(), cq, tree, oma, sequence })
    }

    pub fn execute(&self, strategy: Strategy, db: &Database, ex: &mut Executor) -> Result<Relation, EngineError> {
        match strategy {
            Strategy::Base => evaluate_baseline(&self.cq, db, ex),
            Strategy::Rewriting => interpret_sequence(&self.sequence, db, ex),
        }
    }
}

enum Outcome {
    Done(f64, Relation, OpCounter),
    TimedOut,
    Failed(String),
}

fn timed(q: &PreparedQuery, strategy: Strategy, db: &Database, timeout: Duration) -> Outcome {
    let start = Instant::now();
    let mut ex = Executor::with_deadline(start + timeout);
    match q.execute(strategy, db, &mut ex) {
        Ok(rel) => {
            let dt = start.elapsed();
            if dt > timeout {
                Outcome::TimedOut
            } else {
                Outcome::Done(dt.as_secs_f64(), rel, ex.counter)
            }
        }
        Err(EngineError::Timeout) => Outcome::TimedOut,
        Err(e) => Outcome::Failed(e.to_string()),
    }
}

fn measure(q: &PreparedQuery, strategy: Strategy, db: &Database, config: &RunConfig) -> RunEntry {
    let timeout = Duration::from_secs_f64(config.timeout_s);
    let mut entry = RunEntry {
        query_id: q.id.clone(),
        strategy,
        warmup_s: 0.0,
        rep_times_s: Vec::with_capacity(config.repeats),
        mean_s: config.timeout_s,
        timed_out: false,
        result_rows: None,
        counter: None,
        error: None,
    };
    for rep in 0..=config.repeats {
        match timed(q, strategy, db, timeout) {
            Outcome::Done(t, rel, counter) => {
                if rep == 0 {
                    entry.warmup_s = t;
                    entry.result_rows = Some(rel.len());
                    entry.counter = Some(counter);
                } else {
                    entry.rep_times_s.push(t);
                }
            }
            Outcome::TimedOut => {
                if rep == 0 {
                    entry.warmup_s = config.timeout_s;
                }
                entry.timed_out = true;
                return entry;
            }
            Outcome::Failed(msg) => {
                entry.error = Some(msg);
                return entry;
            }
        }
    }
    if !entry.rep_times_s.is_empty() {
        entry.mean_s = entry.rep_times_s.iter().sum::<f64>() / entry.rep_times_s.len() as f64;
    }
    entry
}

/// Times every query under both strategies, sequentially and in input order:
/// one discarded warm-up run, then `repeats` timed runs.
pub fn run_workload(db: &Database, queries: &[(String, QuerySpec)], config: &RunConfig) -> RunLog {
    let catalog = Catalog::from_db(db);
    let mut log = RunLog { config: config.clone(), clock: clock_description(), ..RunLog::default() };
    for (id, spec) in queries {
        let prepared = match PreparedQuery::new(id, spec, &catalog) {
            Ok(p) => p,
            Err(e) => {
                log::info!("skipping {id}: {e}");
                log.skipped.push(Skipped { query_id: id.clone(), reason: e.to_string() });
                continue;
            }
        };
        for strategy in Strategy::ALL {
            log.entries.push(measure(&prepared, strategy, db, config));
        }
    }
    log
}
