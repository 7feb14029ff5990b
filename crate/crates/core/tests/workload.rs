mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smash_core::acyclic::analyze;
use smash_core::augment::{augment_query, generate_workload, WorkloadSpec};
use smash_core::engine::{evaluate_baseline, evaluate_yannakakis, EngineError, Executor, Relation};
use smash_core::query::{normalize, parse_query, Catalog};
use smash_core::rewrite::{interpret_sequence, rewrite, RewriteOptions};
use support::oracle;

fn agree(a: &Result<Relation, EngineError>, b: &Result<Relation, EngineError>) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x.multiset_eq(y),
        (Err(EngineError::EmptyAggregate), Err(EngineError::EmptyAggregate)) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn augmented_workloads_evaluate_consistently(seed in any::<u64>(), dangling in 0.0f64..1.0) {
        let spec = WorkloadSpec {
            seed,
            n_base_queries: 3,
            relations: (1, 4),
            rows: (5, 25),
            key_ratio: 0.3,
            dangling_fraction: dangling,
            filter_probability: 0.5,
            aggregate_fraction: 0.5,
            prefix: "p".into(),
        };
        let wl = generate_workload(&spec).unwrap();
        let catalog = Catalog::from_db(&wl.db);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, base) in &wl.queries {
            let variants = augment_query(name, base, &wl.db, &mut rng).unwrap();
            prop_assert!(!variants.is_empty());
            for (vname, q) in variants {
                prop_assert_eq!(&parse_query(&q.to_string()).unwrap(), &q);
                let cq = normalize(&q, &catalog).unwrap();
                let (tree, _) = analyze(&cq).unwrap();
                let b = evaluate_baseline(&cq, &wl.db, &mut Executor::new());
                let y = evaluate_yannakakis(&tree, &cq, &wl.db, &mut Executor::new());
                let seq = rewrite(&tree, &cq, RewriteOptions::default()).unwrap();
                let r = interpret_sequence(&seq, &wl.db, &mut Executor::new());
                prop_assert!(agree(&b, &y), "{vname}");
                prop_assert!(agree(&b, &r), "{vname}");
                if let Ok(rel) = &b {
                    prop_assert_eq!(oracle::evaluate(&q, &wl.db).unwrap(), rel.sorted_rows());
                }
            }
        }
    }
}

#[test]
fn generator_is_deterministic() {
    let spec = WorkloadSpec::default();
    let a = generate_workload(&spec).unwrap();
    let b = generate_workload(&spec).unwrap();
    assert_eq!(a.queries, b.queries);
    for (x, y) in a.db.tables().zip(b.db.tables()) {
        assert!(x.multiset_eq(y));
    }
}
