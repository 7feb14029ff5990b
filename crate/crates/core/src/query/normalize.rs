use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::spec::{ColumnRef, Filter, JoinCond, QuerySpec, SelectItem, TableRef};
use super::QueryError;
use crate::engine::{AggFn, ColumnType, Database, Predicate};

/// Equivalence class of attributes merged by equi-join conditions. After
/// normalization every class becomes one natural-join attribute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassId(pub usize);

impl ClassId {
    /// Attribute name used for this class inside the engine.
    pub fn name(self) -> String {
        format!("c{}", self.0)
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// Table schemas, used to resolve attributes during normalization.
#[derive(Clone, Debug, Default)]
pub struct Catalog {
    tables: BTreeMap<String, Vec<(String, ColumnType)>>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_db(db: &Database) -> Self {
        let mut cat = Catalog::new();
        for rel in db.tables() {
            let cols = rel
                .schema()
                .iter()
                .enumerate()
                .map(|(i, a)| (a.clone(), rel.column_type(i)))
                .collect();
            cat.tables.insert(rel.name.clone(), cols);
        }
        cat
    }

    pub fn add_table(&mut self, name: &str, columns: &[(&str, ColumnType)]) {
        self.tables.insert(
            name.to_string(),
            columns.iter().map(|(a, t)| (a.to_string(), *t)).collect(),
        );
    }

    pub fn columns(&self, table: &str) -> Result<&[(String, ColumnType)], QueryError> {
        self.tables
            .get(table)
            .map(|v| v.as_slice())
            .ok_or_else(|| QueryError::UnknownTable(table.to_string()))
    }

    pub fn column_type(&self, table: &str, attr: &str) -> Option<ColumnType> {
        self.tables
            .get(table)?
            .iter()
            .find(|(a, _)| a == attr)
            .map(|(_, t)| *t)
    }
}

/// One occurrence of a base table in the query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub alias: String,
    pub table: String,
    /// Every attribute of the table with its class, in schema order.
    pub columns: Vec<(String, ClassId)>,
    /// Filters pushed to this atom, over original attribute names.
    pub filters: Vec<Predicate>,
}

impl Atom {
    /// Distinct classes of this atom in schema order.
    pub fn classes(&self) -> Vec<ClassId> {
        let mut out: Vec<ClassId> = Vec::new();
        for (_, c) in &self.columns {
            if !out.contains(c) {
                out.push(*c);
            }
        }
        out
    }

    pub fn contains(&self, class: ClassId) -> bool {
        self.columns.iter().any(|(_, c)| *c == class)
    }

    pub fn attribute_of(&self, class: ClassId) -> Option<&str> {
        self.columns
            .iter()
            .find(|(_, c)| *c == class)
            .map(|(a, _)| a.as_str())
    }

    pub fn class_of(&self, attr: &str) -> Option<ClassId> {
        self.columns.iter().find(|(a, _)| a == attr).map(|(_, c)| *c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OutputItem {
    Column {
        class: ClassId,
        name: String,
        source: ColumnRef,
    },
    Aggregate {
        func: AggFn,
        class: Option<ClassId>,
        distinct: bool,
        name: String,
        source: Option<ColumnRef>,
    },
}

impl OutputItem {
    pub fn name(&self) -> &str {
        match self {
            OutputItem::Column { name, .. } | OutputItem::Aggregate { name, .. } => name,
        }
    }

    pub fn class(&self) -> Option<ClassId> {
        match self {
            OutputItem::Column { class, .. } => Some(*class),
            OutputItem::Aggregate { class, .. } => *class,
        }
    }
}

/// A conjunctive query with equi-joins replaced by shared class attributes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCQ {
    pub atoms: Vec<Atom>,
    /// Members of each class, in alias order then attribute order.
    pub classes: Vec<Vec<ColumnRef>>,
    pub output: Vec<OutputItem>,
    pub group_by: Vec<ClassId>,
    /// GROUP BY list as written.
    pub group_sources: Vec<ColumnRef>,
    pub aggregate: bool,
}

impl NormalizedCQ {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Classes needed to produce the output (the projection set U).
    pub fn output_classes(&self) -> Vec<ClassId> {
        let mut out: Vec<ClassId> = self.group_by.clone();
        for item in &self.output {
            if let Some(c) = item.class() {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        out
    }

    /// Number of equality conditions needed to express the joins: each
    /// class of `k` members contributes `k - 1`.
    pub fn join_count(&self) -> usize {
        self.classes.iter().map(|m| m.len().saturating_sub(1)).sum()
    }

    pub fn filter_count(&self) -> usize {
        self.atoms.iter().map(|a| a.filters.len()).sum()
    }

    pub fn atoms_containing(&self, class: ClassId) -> impl Iterator<Item = usize> + '_ {
        self.atoms
            .iter()
            .enumerate()
            .filter(move |(_, a)| a.contains(class))
            .map(|(i, _)| i)
    }

    /// Back to a query spec with one equality per adjacent pair of class
    /// members.
    pub fn to_spec(&self) -> QuerySpec {
        let tables = self
            .atoms
            .iter()
            .map(|a| TableRef {
                table: a.table.clone(),
                alias: a.alias.clone(),
            })
            .collect();
        let mut join_conds = Vec::new();
        for members in &self.classes {
            for pair in members.windows(2) {
                join_conds.push(JoinCond {
                    left: pair[0].clone(),
                    right: pair[1].clone(),
                });
            }
        }
        let filters = self
            .atoms
            .iter()
            .flat_map(|a| {
                a.filters.iter().map(|p| Filter {
                    column: ColumnRef::new(&a.alias, &p.attribute),
                    op: p.op,
                    literal: p.literal.clone(),
                })
            })
            .collect();
        let select = self
            .output
            .iter()
            .map(|o| match o {
                OutputItem::Column { source, .. } => SelectItem::Column(source.clone()),
                OutputItem::Aggregate {
                    func,
                    distinct,
                    source,
                    ..
                } => SelectItem::Aggregate {
                    func: *func,
                    arg: source.clone(),
                    distinct: *distinct,
                },
            })
            .collect();
        let group_by = self.group_sources.clone();
        QuerySpec {
            tables,
            select,
            group_by,
            join_conds,
            filters,
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as root so ids follow declaration order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Replaces equi-joins by natural joins: attributes connected through join
/// conditions share one class. Class ids are assigned in alias order, then
/// attribute order.
pub fn normalize(spec: &QuerySpec, catalog: &Catalog) -> Result<NormalizedCQ, QueryError> {
    spec.validate()?;
    let mut slots: Vec<(usize, String)> = Vec::new();
    let mut slot_of: HashMap<(String, String), usize> = HashMap::new();
    for (ai, t) in spec.tables.iter().enumerate() {
        for (attr, _) in catalog.columns(&t.table)? {
            slot_of.insert((t.alias.clone(), attr.clone()), slots.len());
            slots.push((ai, attr.clone()));
        }
    }
    let lookup = |c: &ColumnRef| -> Result<usize, QueryError> {
        slot_of
            .get(&(c.alias.clone(), c.attr.clone()))
            .copied()
            .ok_or_else(|| QueryError::UnknownAttribute(c.to_string()))
    };

    let mut uf = UnionFind::new(slots.len());
    for jc in &spec.join_conds {
        uf.union(lookup(&jc.left)?, lookup(&jc.right)?);
    }
    let mut class_of_root: HashMap<usize, ClassId> = HashMap::new();
    let mut slot_class = Vec::with_capacity(slots.len());
    let mut classes: Vec<Vec<ColumnRef>> = Vec::new();
    for (s, (ai, attr)) in slots.iter().enumerate() {
        let root = uf.find(s);
        let next = ClassId(class_of_root.len());
        let class = *class_of_root.entry(root).or_insert(next);
        if class.0 == classes.len() {
            classes.push(Vec::new());
        }
        classes[class.0].push(ColumnRef::new(&spec.tables[*ai].alias, attr));
        slot_class.push(class);
    }

    let mut atoms: Vec<Atom> = spec
        .tables
        .iter()
        .map(|t| Atom {
            alias: t.alias.clone(),
            table: t.table.clone(),
            columns: Vec::new(),
            filters: Vec::new(),
        })
        .collect();
    for ((ai, attr), class) in slots.iter().zip(&slot_class) {
        atoms[*ai].columns.push((attr.clone(), *class));
    }
    for f in &spec.filters {
        lookup(&f.column)?;
        let ai = spec
            .tables
            .iter()
            .position(|t| t.alias == f.column.alias)
            .expect("validated alias");
        let mut pred = Predicate::new(&f.column.attr, f.op, f.literal.clone());
        // Text columns compared against numbers are read as integers.
        pred.cast_int = f.literal.is_numeric()
            && catalog.column_type(&atoms[ai].table, &f.column.attr) == Some(ColumnType::Str);
        atoms[ai].filters.push(pred);
    }

    let class_for = |c: &ColumnRef| -> Result<ClassId, QueryError> { Ok(slot_class[lookup(c)?]) };
    let mut names: HashMap<String, usize> = HashMap::new();
    let mut unique_name = |base: String| -> String {
        let n = names.entry(base.clone()).or_insert(0);
        *n += 1;
        if *n == 1 {
            base
        } else {
            format!("{base}#{n}")
        }
    };
    let mut output = Vec::new();
    for item in &spec.select {
        output.push(match item {
            SelectItem::Column(c) => OutputItem::Column {
                class: class_for(c)?,
                name: unique_name(item.to_string()),
                source: c.clone(),
            },
            SelectItem::Aggregate {
                func,
                arg,
                distinct,
            } => OutputItem::Aggregate {
                func: *func,
                class: arg.as_ref().map(&class_for).transpose()?,
                distinct: *distinct,
                name: unique_name(item.to_string()),
                source: arg.clone(),
            },
        });
    }
    let mut group_by = Vec::new();
    for g in &spec.group_by {
        let c = class_for(g)?;
        if !group_by.contains(&c) {
            group_by.push(c);
        }
    }

    Ok(NormalizedCQ {
        atoms,
        classes,
        output,
        group_by,
        group_sources: spec.group_by.clone(),
        aggregate: spec.is_aggregate(),
    })
}
