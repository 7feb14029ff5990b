use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smash::selector::by_id;
use smash::{
    build_dataset, dataset_csv, feature_table, load_queries, query_features, run_workload, save_queries,
    smash_e2e, train_selector, two_regime_workload, E2eReport, RunConfig, RunLog, SelectorKind, TrainedSelector,
};
use smash_core::acyclic::analyze;
use smash_core::augment::{augment_query, generate_workload, Workload, WorkloadSpec};
use smash_core::engine::{Database, Statistics};
use smash_core::features::FeatureVector;
use smash_core::query::{normalize, parse_query, Catalog, QuerySpec};
use smash_core::rewrite::{rewrite, RewriteOptions};
use smash_learn::metrics::evaluate;
use smash_learn::{decide, gini_importances, paired_t_test, threshold_sweep, wilcoxon_signed_rank, LabeledExample, Model};

#[derive(Parser)]
#[command(name = "smash", version, about = "Choose between conventional and Yannakakis-style evaluation per query")]
struct Cli {
    /// Directory holding one CSV per table (and queries.json for workloads).
    #[arg(long, global = true, env = "SMASH_DATA_DIR")]
    data: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Per-run timeout in seconds.
    #[arg(long, global = true, default_value_t = 100.0)]
    timeout: f64,
    /// Timed repetitions after the warm-up run.
    #[arg(long, global = true, default_value_t = 5)]
    repeats: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum WorkloadKind {
    TwoRegime,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    CartClassifier,
    CartRegressor,
    KnnClassifier,
    KnnRegressor,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a query and print its structured form.
    Parse {
        /// SQL text, a file containing it, or `-` for stdin.
        query: String,
        #[arg(long)]
        json: bool,
    },
    /// Print the join tree and 0MA classification.
    Jointree {
        query: String,
        #[arg(long)]
        json: bool,
    },
    /// Print the Yannakakis-style statement sequence.
    Rewrite {
        query: String,
        #[arg(long)]
        with_drops: bool,
        /// Emit plain CREATE TABLE instead of CREATE UNLOGGED TABLE.
        #[arg(long)]
        logged: bool,
    },
    /// Print the feature vector.
    Features {
        query: String,
        #[arg(long)]
        csv: bool,
    },
    /// Print the augmented variants of a query.
    Augment { query: String },
    /// Write a synthetic database and workload.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        queries: usize,
        #[arg(long, value_enum, default_value = "two-regime")]
        kind: WorkloadKind,
        /// Replace every query by its augmented variants.
        #[arg(long)]
        augment: bool,
    },
    /// Time every workload query under both strategies.
    Run {
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long, default_value = "runlog.json")]
        out: PathBuf,
    },
    /// Train a selector on measured runtimes.
    Train {
        #[arg(long)]
        runlog: PathBuf,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "cart-classifier")]
        model: ModelKind,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value = "selector.json")]
        out: PathBuf,
        /// Also write the labeled dataset as CSV.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Report test-split metrics and, for regressors, a threshold sweep.
    Evaluate {
        #[arg(long)]
        selector: PathBuf,
        #[arg(long)]
        runlog: PathBuf,
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Comma-separated thresholds, swept over the validation split.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        sweep: Vec<f64>,
    },
    /// Pick a strategy for one query.
    Decide {
        query: String,
        #[arg(long)]
        selector: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        threshold: f64,
    },
    /// Compare Base, Rewriting, SMASH and the per-query optimum.
    E2e {
        #[arg(long)]
        selector: PathBuf,
        #[arg(long)]
        runlog: PathBuf,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        threshold: f64,
        /// Use every measured query, not only the selector's test split.
        #[arg(long)]
        all: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired Wilcoxon and t-tests between two strategies.
    Significance {
        /// A run log or an e2e report.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "Base")]
        a: String,
        #[arg(long, default_value = "SMASH")]
        b: String,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = RunConfig { repeats: cli.repeats, timeout_s: cli.timeout, seed: cli.seed };
    match &cli.command {
        Command::Parse { query, json } => {
            let q = parse_query(&read_query(query)?)?;
            if *json {
                println!("{}", serde_json::to_string_pretty(&q)?);
            } else {
                println!("{q}");
            }
        }
        Command::Jointree { query, json } => {
            let db = load_db(&cli)?;
            let cq = normalize(&parse_query(&read_query(query)?)?, &Catalog::from_db(&db))?;
            let (tree, oma) = analyze(&cq)?;
            if *json {
                let v = serde_json::json!({ "tree": tree.to_json(&cq), "oma": oma });
                println!("{}", serde_json::to_string_pretty(&v)?);
            } else {
                print!("{}", tree.render_text(&cq));
                match oma.failure {
                    None => println!("0MA: yes"),
                    Some(f) => println!("0MA: no ({f:?})"),
                }
            }
        }
        Command::Rewrite { query, with_drops, logged } => {
            let db = load_db(&cli)?;
            let cq = normalize(&parse_query(&read_query(query)?)?, &Catalog::from_db(&db))?;
            let (tree, _) = analyze(&cq)?;
            let seq = rewrite(&tree, &cq, RewriteOptions { unlogged: !logged })?;
            println!("{}", seq.to_sql(*with_drops));
        }
        Command::Features { query, csv } => {
            let db = load_db(&cli)?;
            let q = parse_query(&read_query(query)?)?;
            let (fv, _) = query_features(&q, &Catalog::from_db(&db), &db, &Statistics::analyze(&db))?;
            if *csv {
                println!("{}\n{}", FeatureVector::csv_header(), fv.to_csv_row());
            } else {
                println!("{}", serde_json::to_string_pretty(&fv.to_json())?);
            }
        }
        Command::Augment { query } => {
            let db = load_db(&cli)?;
            let q = parse_query(&read_query(query)?)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            for (name, v) in augment_query("q", &q, &db, &mut rng)? {
                println!("-- {name}\n{v};\n");
            }
        }
        Command::Generate { out, queries, kind, augment } => {
            let mut wl = match kind {
                WorkloadKind::TwoRegime => two_regime_workload(*queries, cli.seed)?,
                WorkloadKind::Random => generate_workload(&WorkloadSpec {
                    seed: cli.seed,
                    n_base_queries: *queries,
                    ..WorkloadSpec::default()
                })?,
            };
            if *augment {
                wl = augmented(wl, cli.seed)?;
            }
            std::fs::create_dir_all(out)?;
            wl.db.save_dir(out)?;
            save_queries(&out.join("queries.json"), &wl.queries)?;
            println!("wrote {} tables and {} queries to {}", wl.db.len(), wl.queries.len(), out.display());
        }
        Command::Run { queries, out } => {
            let db = load_db(&cli)?;
            let qs = load_workload(&cli, queries.as_deref())?;
            let log = run_workload(&db, &qs, &config);
            std::fs::write(out, log.to_json()?)?;
            println!(
                "{} measurements, {} skipped queries -> {}",
                log.entries.len(),
                log.skipped.len(),
                out.display()
            );
        }
        Command::Train { runlog, queries, model, k, out, dataset } => {
            let db = load_db(&cli)?;
            let examples = examples(&db, &load_workload(&cli, queries.as_deref())?, &read_runlog(runlog)?)?;
            if let Some(path) = dataset {
                std::fs::write(path, dataset_csv(&examples))?;
            }
            let kind = match model {
                ModelKind::CartClassifier => SelectorKind::CartClassifier,
                ModelKind::CartRegressor => SelectorKind::CartRegressor,
                ModelKind::KnnClassifier => SelectorKind::KnnClassifier { k: *k },
                ModelKind::KnnRegressor => SelectorKind::KnnRegressor { k: *k },
            };
            let sel = train_selector(&examples, kind, cli.seed)?;
            std::fs::write(out, sel.to_json()?)?;
            println!("{} examples, 10-fold CV accuracy {:.3}", examples.len(), sel.mean_cv_accuracy());
            print_metrics("validation", &sel.validation);
            print_metrics("test", &sel.test);
            if let Model::Cart(tree) = &sel.model {
                for (name, v) in gini_importances(tree)?.iter().take(10) {
                    println!("  {name:<32} {v:.4}");
                }
            }
            println!("selector -> {}", out.display());
        }
        Command::Evaluate { selector, runlog, queries, sweep } => {
            let db = load_db(&cli)?;
            let sel = read_selector(selector)?;
            let examples = examples(&db, &load_workload(&cli, queries.as_deref())?, &read_runlog(runlog)?)?;
            let index = by_id(&examples);
            let pick = |ids: &[String]| -> Vec<LabeledExample> {
                ids.iter().filter_map(|id| index.get(id.as_str()).map(|e| (*e).clone())).collect()
            };
            let test = pick(&sel.test_ids);
            print_metrics("test", &evaluate(&sel.model, &test, 0.0)?);
            if !sweep.is_empty() {
                println!("{:>10} {:>8} {:>8} {:>8} {:>12}", "threshold", "acc", "prec", "rec", "e2e [s]");
                for p in threshold_sweep(&sel.model, &pick(&sel.validation_ids), sweep)? {
                    println!(
                        "{:>10.3} {:>8.3} {:>8.3} {:>8.3} {:>12.4}",
                        p.threshold,
                        p.metrics.acc,
                        p.metrics.precision_or_nan(),
                        p.metrics.recall_or_nan(),
                        p.e2e_seconds
                    );
                }
            }
        }
        Command::Decide { query, selector, threshold } => {
            let db = load_db(&cli)?;
            let sel = read_selector(selector)?;
            let (catalog, stats) = (Catalog::from_db(&db), Statistics::analyze(&db));
            let q = parse_query(&read_query(query)?)?;
            let start = Instant::now();
            let (fv, _) = query_features(&q, &catalog, &db, &stats)?;
            let choice = decide(&sel.model, &fv.to_vec(), *threshold)?;
            println!("{choice:?} (decided in {:.3} ms)", start.elapsed().as_secs_f64() * 1e3);
        }
        Command::E2e { selector, runlog, queries, threshold, all, out } => {
            let db = load_db(&cli)?;
            let sel = read_selector(selector)?;
            let log = read_runlog(runlog)?;
            let mut qs = load_workload(&cli, queries.as_deref())?;
            let measured: std::collections::HashSet<String> = log.query_ids().into_iter().collect();
            qs.retain(|(id, _)| measured.contains(id));
            if !all {
                let test: std::collections::HashSet<&String> = sel.test_ids.iter().collect();
                qs.retain(|(id, _)| test.contains(id));
            }
            let report = smash_e2e(&db, &qs, &sel.model, *threshold, &log)?;
            print!("{}", report.text_table());
            if let Some(path) = out {
                std::fs::write(path, report.to_json()?)?;
            }
        }
        Command::Significance { input, a, b } => {
            let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
            let table = strategy_times(&text)?;
            let get = |name: &str| {
                table.get(name).with_context(|| {
                    format!("unknown strategy {name}; available: {}", table.keys().cloned().collect::<Vec<_>>().join(", "))
                })
            };
            let (xa, xb) = (get(a)?, get(b)?);
            let w = wilcoxon_signed_rank(xa, xb)?;
            let t = paired_t_test(xa, xb)?;
            println!("{:<24} {:>16} {:>16}", "comparison", "median test p", "mean test p");
            println!("{:<24} {:>16.3e} {:>16.3e}", format!("{a} vs {b}"), w.p_value, t.p_value);
        }
    }
    Ok(())
}

fn read_query(arg: &str) -> Result<String> {
    if arg == "-" {
        return Ok(std::io::read_to_string(std::io::stdin())?);
    }
    let path = Path::new(arg);
    if path.is_file() {
        return Ok(std::fs::read_to_string(path)?);
    }
    Ok(arg.to_string())
}

fn data_dir(cli: &Cli) -> Result<&Path> {
    match &cli.data {
        Some(d) => Ok(d),
        None => bail!("no data directory: pass --data or set SMASH_DATA_DIR"),
    }
}

fn load_db(cli: &Cli) -> Result<Database> {
    let dir = data_dir(cli)?;
    Database::load_dir(dir).with_context(|| format!("loading tables from {}", dir.display()))
}

fn load_workload(cli: &Cli, path: Option<&Path>) -> Result<Vec<(String, QuerySpec)>> {
    let path = match path {
        Some(p) => p.to_path_buf(),
        None => data_dir(cli)?.join("queries.json"),
    };
    load_queries(&path).with_context(|| format!("reading queries from {}", path.display()))
}

fn read_runlog(path: &Path) -> Result<RunLog> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(RunLog::from_json(&text)?)
}

fn read_selector(path: &Path) -> Result<TrainedSelector> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(TrainedSelector::from_json(&text)?)
}

fn examples(db: &Database, queries: &[(String, QuerySpec)], log: &RunLog) -> Result<Vec<LabeledExample>> {
    let features = feature_table(queries, db)?;
    Ok(build_dataset(log, &features)?)
}

fn augmented(wl: Workload, seed: u64) -> Result<Workload> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queries = Vec::new();
    for (id, q) in &wl.queries {
        queries.extend(augment_query(id, q, &wl.db, &mut rng)?);
    }
    Ok(Workload { db: wl.db, queries })
}

fn print_metrics(label: &str, m: &smash_learn::Metrics) {
    let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.3}"));
    println!(
        "{label}: acc {:.3} prec {} rec {} (TP {} FP {} TN {} FN {})",
        m.acc,
        opt(m.prec),
        opt(m.rec),
        m.tp,
        m.fp,
        m.tn,
        m.fn_
    );
}

/// Per-query runtimes of each strategy found in a run log or e2e report.
fn strategy_times(text: &str) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    if let Ok(report) = serde_json::from_str::<E2eReport>(text) {
        for q in &report.queries {
            out.entry("Base".into()).or_default().push(q.base_s);
            out.entry("Rewriting".into()).or_default().push(q.rewriting_s);
            out.entry("SMASH".into()).or_default().push(q.chosen_s() + q.decision_s);
            out.entry("OracleBest".into()).or_default().push(q.base_s.min(q.rewriting_s));
        }
        return Ok(out);
    }
    let log = RunLog::from_json(text).context("input is neither an e2e report nor a run log")?;
    for id in log.query_ids() {
        if log.excluded(&id) {
            continue;
        }
        let entries: Vec<_> = smash::Strategy::ALL.iter().filter_map(|s| log.entry(&id, *s)).collect();
        if entries.len() == 2 && entries.iter().all(|e| e.usable()) {
            for e in entries {
                out.entry(format!("{:?}", e.strategy)).or_default().push(e.mean_s);
            }
        }
    }
    Ok(out)
}
