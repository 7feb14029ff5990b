//! Acyclicity test, join-tree construction and 0MA classification.

mod gyo;
mod jointree;
mod oma;

use thiserror::Error;

pub use gyo::{build_hypergraph, gyo_reduce, AcyclicityResult, Ear, Hypergraph};
pub use jointree::{build_join_tree, JoinTree};
pub use oma::{classify_0ma, is_set_safe, OmaFailure, OmaResult};

use crate::query::NormalizedCQ;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcyclicError {
    #[error("query is cyclic ({0} edges remain after GYO reduction)")]
    Cyclic(usize),
    #[error("invalid join tree: {0}")]
    InvalidJoinTree(String),
}

/// Hypergraph, reduction, 0MA classification and tree in one call.
pub fn analyze(cq: &NormalizedCQ) -> Result<(JoinTree, OmaResult), AcyclicError> {
    let hg = build_hypergraph(cq);
    match gyo_reduce(&hg) {
        AcyclicityResult::Acyclic { ears, root } => {
            let oma = classify_0ma(cq);
            let tree = build_join_tree(&ears, root, cq, &oma)?;
            Ok((tree, oma))
        }
        AcyclicityResult::Cyclic { residual } => Err(AcyclicError::Cyclic(residual.edges.len())),
    }
}

pub fn join_tree(cq: &NormalizedCQ) -> Result<JoinTree, AcyclicError> {
    analyze(cq).map(|(t, _)| t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ColumnType::Int;
    use crate::query::{normalize, parse_query, Catalog};

    fn catalog() -> Catalog {
        let mut cat = Catalog::new();
        cat.add_table("R", &[("a", Int), ("b", Int)]);
        cat.add_table("S", &[("b", Int), ("c", Int)]);
        cat.add_table("T", &[("c", Int), ("d", Int)]);
        cat.add_table("votes", &[("Id", Int), ("UserId", Int), ("BountyAmount", Int)]);
        cat.add_table("badges", &[("Id", Int), ("UserId", Int)]);
        cat.add_table("users", &[("Id", Int), ("DownVotes", Int), ("Views", Int)]);
        cat.add_table("posts", &[("Id", Int), ("OwnerUserId", Int), ("Score", Int)]);
        cat.add_table("comments", &[("Id", Int), ("UserId", Int)]);
        for t in ["compound", "gene", "disease"] {
            cat.add_table(t, &[("nid", Int)]);
        }
        for t in ["binds", "associates"] {
            cat.add_table(t, &[("sid", Int), ("tid", Int)]);
        }
        cat
    }

    fn cq(sql: &str) -> NormalizedCQ {
        normalize(&parse_query(sql).unwrap(), &catalog()).unwrap()
    }

    fn aliases(cq: &NormalizedCQ, nodes: &[usize]) -> Vec<String> {
        nodes.iter().map(|&n| cq.atoms[n].alias.clone()).collect()
    }

    const FIG1: &str = "SELECT MIN(c.Id) FROM comments AS c, posts AS p, votes AS v, users AS u
        WHERE u.Id = p.OwnerUserId AND u.Id = c.UserId AND u.Id = v.UserId
        AND u.Views >= 0 AND p.Score >= 0 AND p.Score <= 28";

    #[test]
    fn example_one_tree_has_users_on_top() {
        let q = cq("SELECT MIN(u.Id) FROM votes as v, badges as b, users as u
            WHERE u.Id = v.UserId AND v.UserId = b.UserId AND v.BountyAmount>=0 AND u.DownVotes=0");
        let (tree, oma) = analyze(&q).unwrap();
        assert!(oma.is_0ma);
        assert_eq!(aliases(&q, &[tree.root()]), ["u"]);
        assert_eq!(aliases(&q, tree.children(tree.root())), ["b", "v"]);
    }

    #[test]
    fn figure_one_tree() {
        let q = cq(FIG1);
        let (tree, oma) = analyze(&q).unwrap();
        assert_eq!(oma.guard, Some(0));
        assert_eq!(tree.root(), 0);
        assert_eq!(aliases(&q, tree.children(0)), ["u"]);
        let mut leaves = aliases(&q, tree.children(3));
        leaves.sort();
        assert_eq!(leaves, ["p", "v"]);
    }

    #[test]
    fn figure_one_with_count_star_is_not_set_safe() {
        let q = cq(&FIG1.replace("MIN(c.Id)", "COUNT(*)"));
        assert_eq!(classify_0ma(&q).failure, Some(OmaFailure::NotSetSafe));
    }

    #[test]
    fn enumeration_is_not_aggregate() {
        let q = cq("SELECT R.a, T.d FROM R, S, T WHERE R.b = S.b AND S.c = T.c");
        assert_eq!(classify_0ma(&q).failure, Some(OmaFailure::NotAggregate));
    }

    #[test]
    fn unguarded_aggregate() {
        let q = cq("SELECT MIN(R.a), MAX(T.d) FROM R, S, T WHERE R.b = S.b AND S.c = T.c");
        assert_eq!(classify_0ma(&q).failure, Some(OmaFailure::NotGuarded));
    }

    #[test]
    fn chain_rooted_at_guard() {
        let q = cq("SELECT MIN(R.a) FROM R, S, T WHERE R.b = S.b AND S.c = T.c");
        let (tree, _) = analyze(&q).unwrap();
        assert_eq!(tree.root(), 0);
        assert_eq!(tree.children(0), &[1]);
        assert_eq!(tree.children(1), &[2]);
        assert!(tree.oma);
    }

    #[test]
    fn hetionet_q1_depth() {
        let q = cq("SELECT MIN(c.nid) FROM compound c, binds b, gene g, associates a, disease d
            WHERE c.nid = b.sid AND b.tid = g.nid AND g.nid = a.tid AND a.sid = d.nid");
        let (tree, oma) = analyze(&q).unwrap();
        assert_eq!(aliases(&q, &[oma.guard.unwrap()]), ["b"]);
        assert_eq!(tree.depth(), 2);
    }

    #[test]
    fn connectedness_violation_is_detected() {
        let q = cq("SELECT R.a FROM R, S, T WHERE R.b = S.b AND S.c = T.c");
        // S hung below T leaves the R-S path through T, which lacks b.
        let bad = JoinTree::from_parents(vec![Some(2), Some(2), None]).unwrap();
        assert!(bad.check_connectedness(&q).is_err());
        let good = JoinTree::from_parents(vec![Some(1), None, Some(1)]).unwrap();
        assert!(good.check_connectedness(&q).is_ok());
    }

    #[test]
    fn cyclic_query_is_rejected() {
        let mut cat = catalog();
        cat.add_table("E", &[("x", Int), ("y", Int)]);
        let q = normalize(
            &parse_query("SELECT MIN(e1.x) FROM E e1, E e2, E e3 WHERE e1.y = e2.x AND e2.y = e3.x AND e3.y = e1.x").unwrap(),
            &cat,
        )
        .unwrap();
        assert_eq!(analyze(&q), Err(AcyclicError::Cyclic(3)));
    }
}
