use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::value::{ColumnType, Value};
use super::EngineError;

pub type Row = Vec<Value>;

/// A named bag of tuples over an ordered schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    schema: Vec<String>,
    rows: Vec<Row>,
}

impl Relation {
    pub fn new(
        name: impl Into<String>,
        schema: Vec<String>,
        rows: Vec<Row>,
    ) -> Result<Self, EngineError> {
        let name = name.into();
        let mut seen = HashSet::new();
        for attr in &schema {
            if !seen.insert(attr.as_str()) {
                return Err(EngineError::DuplicateAttribute {
                    relation: name,
                    attribute: attr.clone(),
                });
            }
        }
        if let Some(row) = rows.iter().find(|r| r.len() != schema.len()) {
            return Err(EngineError::ArityMismatch {
                relation: name,
                expected: schema.len(),
                found: row.len(),
            });
        }
        Ok(Relation { name, schema, rows })
    }

    /// Builds a relation from `&str` attribute names and integer rows.
    pub fn from_ints(name: &str, schema: &[&str], rows: &[&[i64]]) -> Result<Self, EngineError> {
        Relation::new(
            name,
            schema.iter().map(|s| s.to_string()).collect(),
            rows.iter()
                .map(|r| r.iter().map(|v| Value::Int(*v)).collect())
                .collect(),
        )
    }

    pub(crate) fn from_parts_unchecked(name: String, schema: Vec<String>, rows: Vec<Row>) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == schema.len()));
        Relation { name, schema, rows }
    }

    pub fn empty(name: impl Into<String>, schema: Vec<String>) -> Self {
        Relation {
            name: name.into(),
            schema,
            rows: Vec::new(),
        }
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Row> {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.schema.len()
    }

    pub fn position(&self, attr: &str) -> Option<usize> {
        self.schema.iter().position(|a| a == attr)
    }

    pub fn require(&self, attr: &str) -> Result<usize, EngineError> {
        self.position(attr)
            .ok_or_else(|| EngineError::UnknownAttribute {
                relation: self.name.clone(),
                attribute: attr.to_string(),
            })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Rows sorted into a canonical order; two relations are equal as
    /// multisets iff their schemas match and these vectors are equal.
    pub fn sorted_rows(&self) -> Vec<Row> {
        let mut rows = self.rows.clone();
        rows.sort();
        rows
    }

    pub fn multiset_eq(&self, other: &Relation) -> bool {
        self.schema == other.schema && self.sorted_rows() == other.sorted_rows()
    }

    /// Column type, taken as the widest type observed in the column.
    /// Empty columns report `Str`.
    pub fn column_type(&self, idx: usize) -> ColumnType {
        let mut ty: Option<ColumnType> = None;
        for row in &self.rows {
            let t = row[idx].column_type();
            ty = Some(match (ty, t) {
                (None, t) => t,
                (Some(ColumnType::Str), _) | (_, ColumnType::Str) => ColumnType::Str,
                (Some(ColumnType::Float), _) | (_, ColumnType::Float) => ColumnType::Float,
                _ => ColumnType::Int,
            });
            if ty == Some(ColumnType::Str) {
                break;
            }
        }
        ty.unwrap_or(ColumnType::Str)
    }

    /// Number of distinct values in a column.
    pub fn distinct_count(&self, idx: usize) -> usize {
        self.rows.iter().map(|r| &r[idx]).collect::<HashSet<_>>().len()
    }
}

/// A set of named base tables.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Database {
    tables: BTreeMap<String, Relation>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, rel: Relation) -> Result<(), EngineError> {
        if self.tables.contains_key(&rel.name) {
            return Err(EngineError::DuplicateTable(rel.name));
        }
        self.tables.insert(rel.name.clone(), rel);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Relation, EngineError> {
        self.tables
            .get(name)
            .ok_or_else(|| EngineError::UnknownTable(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tables.contains_key(name)
    }

    pub fn tables(&self) -> impl Iterator<Item = &Relation> {
        self.tables.values()
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Merges another database into this one; table names must not clash.
    pub fn extend(&mut self, other: Database) -> Result<(), EngineError> {
        for (_, rel) in other.tables {
            self.insert(rel)?;
        }
        Ok(())
    }

    /// Loads every `*.csv` file in `dir` as a table named after the file stem.
    /// A sidecar `<stem>.schema.json` (attribute name → type) overrides
    /// type inference for the listed columns.
    pub fn load_dir(dir: &Path) -> Result<Self, EngineError> {
        let mut db = Database::new();
        let mut paths: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        paths.sort();
        for path in paths {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let sidecar = path.with_file_name(format!("{stem}.schema.json"));
            let overrides = if sidecar.exists() {
                let text = fs::read_to_string(&sidecar)?;
                Some(serde_json::from_str::<HashMap<String, ColumnType>>(&text)?)
            } else {
                None
            };
            db.insert(load_csv(&path, &stem, overrides.as_ref())?)?;
        }
        Ok(db)
    }

    /// Writes each table as `<name>.csv` plus a `<name>.schema.json` sidecar.
    pub fn save_dir(&self, dir: &Path) -> Result<(), EngineError> {
        fs::create_dir_all(dir)?;
        for rel in self.tables.values() {
            let mut writer = csv::Writer::from_path(dir.join(format!("{}.csv", rel.name)))?;
            writer.write_record(rel.schema())?;
            for row in rel.rows() {
                writer.write_record(row.iter().map(|v| v.to_string()))?;
            }
            writer.flush()?;
            let types: BTreeMap<&str, ColumnType> = rel
                .schema()
                .iter()
                .enumerate()
                .map(|(i, a)| (a.as_str(), rel.column_type(i)))
                .collect();
            fs::write(
                dir.join(format!("{}.schema.json", rel.name)),
                serde_json::to_string_pretty(&types)?,
            )?;
        }
        Ok(())
    }
}

/// Reads a headered CSV file. Per column: int64 if every value parses as an
/// integer, float64 if every value is numeric, otherwise string.
pub fn load_csv(
    path: &Path,
    name: &str,
    overrides: Option<&HashMap<String, ColumnType>>,
) -> Result<Relation, EngineError> {
    let mut reader = csv::Reader::from_path(path)?;
    let schema: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut raw: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        raw.push(record.iter().map(|s| s.to_string()).collect());
    }
    let types: Vec<ColumnType> = (0..schema.len())
        .map(|i| {
            if let Some(ty) = overrides.and_then(|o| o.get(&schema[i])) {
                return *ty;
            }
            if raw.iter().all(|r| r[i].parse::<i64>().is_ok()) {
                ColumnType::Int
            } else if raw.iter().all(|r| r[i].parse::<f64>().is_ok()) {
                ColumnType::Float
            } else {
                ColumnType::Str
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(raw.len());
    for r in raw {
        let mut row = Vec::with_capacity(schema.len());
        for (cell, ty) in r.into_iter().zip(&types) {
            row.push(match ty {
                ColumnType::Int => Value::Int(cell.parse().map_err(|_| {
                    EngineError::Load(format!("{name}: '{cell}' is not an integer"))
                })?),
                ColumnType::Float => Value::Float(cell.parse().map_err(|_| {
                    EngineError::Load(format!("{name}: '{cell}' is not numeric"))
                })?),
                ColumnType::Str => Value::Str(cell),
            });
        }
        rows.push(row);
    }
    Relation::new(name, schema, rows)
}
