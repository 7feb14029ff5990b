use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::query::{ClassId, NormalizedCQ};

/// Query hypergraph: one edge per atom over its class ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypergraph {
    pub vertices: BTreeSet<ClassId>,
    pub edges: Vec<(usize, BTreeSet<ClassId>)>,
}

impl Hypergraph {
    pub fn from_edges(edges: Vec<(usize, BTreeSet<ClassId>)>) -> Self {
        let vertices = edges.iter().flat_map(|(_, e)| e.iter().copied()).collect();
        Hypergraph { vertices, edges }
    }
}

pub fn build_hypergraph(cq: &NormalizedCQ) -> Hypergraph {
    Hypergraph::from_edges(
        cq.atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (i, a.classes().into_iter().collect()))
            .collect(),
    )
}

/// An edge removed by the reduction together with the edge that contained
/// it at removal time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ear {
    pub edge: usize,
    pub witness: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AcyclicityResult {
    /// Ears in removal order; `root` is the last surviving edge.
    Acyclic { ears: Vec<Ear>, root: usize },
    Cyclic { residual: Hypergraph },
}

impl AcyclicityResult {
    pub fn is_acyclic(&self) -> bool {
        matches!(self, AcyclicityResult::Acyclic { .. })
    }
}

/// GYO reduction. Alternates between dropping vertices that occur in a
/// single edge and removing the lowest-numbered edge contained in another
/// edge. The witness of a removed edge is the highest-numbered containing
/// edge.
pub fn gyo_reduce(hg: &Hypergraph) -> AcyclicityResult {
    let mut alive: BTreeMap<usize, BTreeSet<ClassId>> = hg.edges.iter().cloned().collect();
    let mut ears = Vec::new();
    loop {
        drop_isolated_vertices(&mut alive);
        if alive.len() <= 1 {
            let root = alive.keys().next().copied().unwrap_or(0);
            return AcyclicityResult::Acyclic { ears, root };
        }
        let ear = alive.iter().find_map(|(&e, ev)| {
            alive
                .iter()
                .rev()
                .find(|(&f, fv)| f != e && ev.is_subset(fv))
                .map(|(&f, _)| Ear { edge: e, witness: f })
        });
        match ear {
            Some(ear) => {
                alive.remove(&ear.edge);
                ears.push(ear);
            }
            None => {
                return AcyclicityResult::Cyclic {
                    residual: Hypergraph::from_edges(alive.into_iter().collect()),
                }
            }
        }
    }
}

fn drop_isolated_vertices(alive: &mut BTreeMap<usize, BTreeSet<ClassId>>) {
    let mut occurrences: BTreeMap<ClassId, usize> = BTreeMap::new();
    for vs in alive.values() {
        for v in vs {
            *occurrences.entry(*v).or_default() += 1;
        }
    }
    for vs in alive.values_mut() {
        vs.retain(|v| occurrences[v] > 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hg(edges: &[&[usize]]) -> Hypergraph {
        Hypergraph::from_edges(
            edges
                .iter()
                .enumerate()
                .map(|(i, e)| (i, e.iter().map(|&v| ClassId(v)).collect()))
                .collect(),
        )
    }

    #[test]
    fn chain_is_acyclic() {
        // R(a,b) S(b,c) T(c,d)
        let res = gyo_reduce(&hg(&[&[0, 1], &[1, 2], &[2, 3]]));
        assert_eq!(
            res,
            AcyclicityResult::Acyclic {
                ears: vec![Ear { edge: 0, witness: 1 }, Ear { edge: 1, witness: 2 }],
                root: 2
            }
        );
    }

    #[test]
    fn triangle_is_cyclic_with_full_residual() {
        match gyo_reduce(&hg(&[&[0, 1], &[1, 2], &[2, 0]])) {
            AcyclicityResult::Cyclic { residual } => {
                assert_eq!(residual.edges.len(), 3);
                assert_eq!(residual.vertices.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_edge_is_trivially_acyclic() {
        assert_eq!(
            gyo_reduce(&hg(&[&[0, 1]])),
            AcyclicityResult::Acyclic { ears: vec![], root: 0 }
        );
    }

    #[test]
    fn triangle_with_covering_edge_is_acyclic() {
        assert!(gyo_reduce(&hg(&[&[0, 1], &[1, 2], &[2, 0], &[0, 1, 2]])).is_acyclic());
    }
}
