use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::gyo::Ear;
use super::oma::OmaResult;
use super::AcyclicError;
use crate::query::{ClassId, NormalizedCQ};

/// Rooted tree over the atoms of a query. Node ids are atom indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinTree {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    root: usize,
    pub oma: bool,
    pub guard: Option<usize>,
}

#[derive(Serialize)]
struct NodeJson<'a> {
    node: usize,
    alias: &'a str,
    table: &'a str,
    parent: Option<usize>,
    children: &'a [usize],
    attrs: Vec<String>,
}

impl JoinTree {
    /// Builds a tree from explicit parent links. Used by tests and by
    /// callers that construct trees by hand; the result is not checked for
    /// connectedness.
    pub fn from_parents(parent: Vec<Option<usize>>) -> Result<Self, AcyclicError> {
        let roots: Vec<usize> = (0..parent.len()).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(AcyclicError::InvalidJoinTree(format!("{} roots", roots.len())));
        }
        let mut children = vec![Vec::new(); parent.len()];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                if *p >= parent.len() {
                    return Err(AcyclicError::InvalidJoinTree(format!("parent {p} out of range")));
                }
                children[*p].push(i);
            }
        }
        let tree = JoinTree {
            parent,
            children,
            root: roots[0],
            oma: false,
            guard: None,
        };
        if tree.pre_order().len() != tree.len() {
            return Err(AcyclicError::InvalidJoinTree("parent links contain a cycle".into()));
        }
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.children[node].is_empty()
    }

    /// Root first, children in order.
    pub fn pre_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            if out.len() > self.len() {
                break;
            }
            stack.extend(self.children[n].iter().rev());
        }
        out
    }

    /// Children (in order) before their parent.
    pub fn post_order(&self) -> Vec<usize> {
        fn visit(t: &JoinTree, n: usize, out: &mut Vec<usize>) {
            for &c in t.children(n) {
                visit(t, c, out);
            }
            out.push(n);
        }
        let mut out = Vec::with_capacity(self.len());
        visit(self, self.root, &mut out);
        out
    }

    /// Maximal root-to-leaf distance.
    pub fn depth(&self) -> usize {
        self.pre_order()
            .into_iter()
            .map(|n| self.node_depth(n))
            .max()
            .unwrap_or(0)
    }

    pub fn node_depth(&self, mut node: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.parent[node] {
            node = p;
            d += 1;
        }
        d
    }

    /// Undirected edge set.
    pub fn edges(&self) -> BTreeSet<(usize, usize)> {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (i.min(p), i.max(p))))
            .collect()
    }

    /// The same undirected tree hung from `new_root`.
    pub fn rerooted(&self, new_root: usize) -> JoinTree {
        let mut t = self.clone();
        let mut path = vec![new_root];
        while let Some(p) = t.parent[*path.last().unwrap()] {
            path.push(p);
        }
        for w in path.windows(2) {
            let (child, parent) = (w[0], w[1]);
            t.children[parent].retain(|&c| c != child);
        }
        for w in path.windows(2) {
            let (child, parent) = (w[0], w[1]);
            t.children[child].push(parent);
            t.parent[parent] = Some(child);
        }
        t.parent[new_root] = None;
        t.root = new_root;
        t
    }

    /// Nodes on the tree path between `a` and `b`, inclusive.
    pub fn path(&self, a: usize, b: usize) -> Vec<usize> {
        let ancestors = |mut n: usize| {
            let mut v = vec![n];
            while let Some(p) = self.parent[n] {
                v.push(p);
                n = p;
            }
            v
        };
        let up_a = ancestors(a);
        let up_b = ancestors(b);
        let lca = *up_a.iter().find(|n| up_b.contains(n)).expect("same tree");
        let mut path: Vec<usize> = up_a.iter().copied().take_while(|&n| n != lca).collect();
        path.push(lca);
        let tail: Vec<usize> = up_b.iter().copied().take_while(|&n| n != lca).collect();
        path.extend(tail.into_iter().rev());
        path
    }

    /// Exhaustive connectedness check: for every class and every pair of
    /// nodes containing it, every node on the connecting path contains it.
    pub fn check_connectedness(&self, cq: &NormalizedCQ) -> Result<(), AcyclicError> {
        if self.len() != cq.atoms.len() {
            return Err(AcyclicError::InvalidJoinTree(format!(
                "tree has {} nodes, query has {} atoms",
                self.len(),
                cq.atoms.len()
            )));
        }
        for class in (0..cq.class_count()).map(ClassId) {
            let holders: Vec<usize> = cq.atoms_containing(class).collect();
            for (i, &a) in holders.iter().enumerate() {
                for &b in &holders[i + 1..] {
                    if let Some(bad) = self.path(a, b).into_iter().find(|&n| !cq.atoms[n].contains(class)) {
                        return Err(AcyclicError::InvalidJoinTree(format!(
                            "{class} occurs in {} and {} but not in {} between them",
                            cq.atoms[a].alias, cq.atoms[b].alias, cq.atoms[bad].alias
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Indented rendering, one node per line.
    pub fn render_text(&self, cq: &NormalizedCQ) -> String {
        fn visit(t: &JoinTree, cq: &NormalizedCQ, n: usize, depth: usize, out: &mut String) {
            let atom = &cq.atoms[n];
            let attrs: Vec<String> = atom.classes().iter().map(|c| class_label(cq, *c)).collect();
            let _ = writeln!(
                out,
                "{}{} ({}) [{}]",
                "  ".repeat(depth),
                atom.alias,
                atom.table,
                attrs.join(", ")
            );
            for &c in t.children(n) {
                visit(t, cq, c, depth + 1, out);
            }
        }
        let mut out = String::new();
        visit(self, cq, self.root, 0, &mut out);
        out
    }

    pub fn to_json(&self, cq: &NormalizedCQ) -> serde_json::Value {
        let nodes: Vec<NodeJson> = self
            .pre_order()
            .into_iter()
            .map(|n| NodeJson {
                node: n,
                alias: &cq.atoms[n].alias,
                table: &cq.atoms[n].table,
                parent: self.parent[n],
                children: &self.children[n],
                attrs: cq.atoms[n].classes().iter().map(|c| class_label(cq, *c)).collect(),
            })
            .collect();
        serde_json::json!({
            "root": self.root,
            "oma": self.oma,
            "guard": self.guard,
            "depth": self.depth(),
            "nodes": nodes,
        })
    }
}

fn class_label(cq: &NormalizedCQ, c: ClassId) -> String {
    let members: Vec<String> = cq.classes[c.0].iter().map(|m| m.to_string()).collect();
    members.join("=")
}

/// Parent of each ear is its witness; children are attached in reverse
/// removal order. 0MA queries are re-rooted at their guard.
pub fn build_join_tree(
    ears: &[Ear],
    root: usize,
    cq: &NormalizedCQ,
    oma: &OmaResult,
) -> Result<JoinTree, AcyclicError> {
    let n = cq.atoms.len();
    if ears.len() + 1 != n {
        return Err(AcyclicError::InvalidJoinTree(format!(
            "{} ears for {} atoms",
            ears.len(),
            n
        )));
    }
    let mut parent = vec![None; n];
    let mut children = vec![Vec::new(); n];
    for ear in ears.iter().rev() {
        parent[ear.edge] = Some(ear.witness);
        children[ear.witness].push(ear.edge);
    }
    let mut tree = JoinTree {
        parent,
        children,
        root,
        oma: false,
        guard: None,
    };
    if tree.pre_order().len() != n {
        return Err(AcyclicError::InvalidJoinTree("ear witnesses do not form a tree".into()));
    }
    if oma.is_0ma {
        let guard = oma.guard.expect("0MA result carries a guard");
        tree = tree.rerooted(guard);
        tree.oma = true;
        tree.guard = Some(guard);
    }
    tree.check_connectedness(cq)?;
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rerooting_keeps_edges() {
        // 0 - 1 - 2, 1 - 3
        let t = JoinTree::from_parents(vec![Some(1), None, Some(1), Some(1)]).unwrap();
        let r = t.rerooted(0);
        assert_eq!(r.root(), 0);
        assert_eq!(r.edges(), t.edges());
        assert_eq!(r.children(0), &[1]);
        assert_eq!(r.children(1), &[2, 3]);
        assert_eq!(r.depth(), 2);
        assert_eq!(r.path(2, 3), vec![2, 1, 3]);
    }

    #[test]
    fn traversal_orders() {
        let t = JoinTree::from_parents(vec![None, Some(0), Some(0), Some(1)]).unwrap();
        assert_eq!(t.pre_order(), vec![0, 1, 3, 2]);
        assert_eq!(t.post_order(), vec![3, 1, 2, 0]);
    }

    #[test]
    fn parent_cycle_is_rejected() {
        assert!(JoinTree::from_parents(vec![None, Some(2), Some(1)]).is_err());
        assert!(JoinTree::from_parents(vec![None, None]).is_err());
    }
}
