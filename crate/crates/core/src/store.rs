//! Typed relational tables with primary/foreign keys and timestamps.
//!
//! A database is an ordered list of tables. Each row carries a positive
//! primary key, one foreign-key slot per table (0 = no link), a fixed-width
//! numeric feature vector, and an integer timestamp. Static tables (users,
//! products) use the sentinel timestamp -1 and are present in every time
//! slice; dynamic tables (transactions) carry real ticks.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Index of a table within the database (0-based, schema order).
pub type TableId = usize;
/// Primary key of a row; valid keys are >= 1, 0 means "no link" in fk slots.
pub type EntityPk = u64;
/// Integer time unit (abstract ticks). Dynamic rows have ticks >= 0.
pub type Timestamp = i64;

/// Sentinel timestamp carried by rows of static tables: present at every t.
pub const STATIC_TS: Timestamp = -1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("table {table} row {row}: {message}")]
    MalformedRow {
        table: String,
        row: usize,
        message: String,
    },
    #[error("table {table} row {row}: duplicate primary key {pk}")]
    DuplicatePk { table: String, row: usize, pk: EntityPk },
    #[error("table {table} row {row}: fk {pk} does not resolve in table {target}")]
    DanglingFk {
        table: String,
        row: usize,
        target: String,
        pk: EntityPk,
    },
    #[error("unknown entity: table {table} pk {pk}")]
    UnknownEntity { table: TableId, pk: EntityPk },
    #[error("task error: {0}")]
    Task(String),
}

/// One row of a table: pk, one fk slot per table (0 = none), features, tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRow {
    pub pk: EntityPk,
    pub fks: Vec<EntityPk>,
    pub features: Vec<f64>,
    pub timestamp: Timestamp,
}

/// Schema-level description of one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDef {
    pub table_id: TableId,
    pub name: String,
    pub feature_dim: usize,
    /// Tables this one may reference, per the declared schema.
    pub fk_targets: BTreeSet<TableId>,
    pub is_static: bool,
    pub pk_col: String,
    pub timestamp_col: Option<String>,
    /// Declared fk columns as (csv column, target table id).
    pub fk_cols: Vec<(String, TableId)>,
    pub feature_cols: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub def: TableDef,
    pub rows: Vec<EntityRow>,
}

/// Immutable after construction; safe to share read-only across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationalDatabase {
    tables: Vec<Table>,
    /// Observed links (referencing table, referenced table): some row in the
    /// first table holds a nonzero fk into the second.
    links: BTreeSet<(TableId, TableId)>,
    /// (table, pk) -> row index within that table. First row wins on
    /// duplicate pks; `validate` reports the duplicates.
    entity_index: HashMap<(TableId, EntityPk), usize>,
}

/// Kind of prediction target attached to a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    BinaryClassification,
    Regression,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskKind::BinaryClassification => write!(f, "binary-classification"),
            TaskKind::Regression => write!(f, "regression"),
        }
    }
}

/// An entity-level prediction task: labels are computed on the forward
/// window (t, t + horizon], features may only read rows at or before t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub target_table: TableId,
    pub task_kind: TaskKind,
    pub seed_times: Vec<Timestamp>,
    pub horizon: Timestamp,
    pub labels: BTreeMap<(EntityPk, Timestamp), f64>,
}

impl TaskSpec {
    /// Checks the task invariants against a database.
    pub fn validate(&self, db: &RelationalDatabase) -> Result<(), StoreError> {
        if self.target_table >= db.num_tables() {
            return Err(StoreError::Task(format!(
                "target table {} out of range",
                self.target_table
            )));
        }
        if !self.seed_times.windows(2).all(|w| w[0] < w[1]) {
            return Err(StoreError::Task(
                "seed times must be strictly increasing".into(),
            ));
        }
        for (&(pk, t), &label) in &self.labels {
            if db.row(self.target_table, pk).is_none() {
                return Err(StoreError::Task(format!(
                    "labeled entity pk {pk} missing from target table"
                )));
            }
            if !self.seed_times.contains(&t) {
                return Err(StoreError::Task(format!("label at unknown seed time {t}")));
            }
            match self.task_kind {
                TaskKind::BinaryClassification => {
                    if label != 0.0 && label != 1.0 {
                        return Err(StoreError::Task(format!(
                            "binary label {label} for pk {pk} at t={t}"
                        )));
                    }
                }
                TaskKind::Regression => {
                    if !label.is_finite() {
                        return Err(StoreError::Task(format!(
                            "non-finite label for pk {pk} at t={t}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Labeled entities at one seed time, in pk order.
    pub fn labels_at(&self, t: Timestamp) -> Vec<(EntityPk, f64)> {
        self.labels
            .iter()
            .filter(|((_, lt), _)| *lt == t)
            .map(|((pk, _), &v)| (*pk, v))
            .collect()
    }
}

/// One finding from `validate`; the validator reports, it never throws.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    PkDuplicate {
        table: TableId,
        pk: EntityPk,
    },
    DanglingFk {
        table: TableId,
        row: usize,
        target: TableId,
        pk: EntityPk,
    },
    NonFiniteFeature {
        table: TableId,
        row: usize,
        col: usize,
    },
    BadTimestamp {
        table: TableId,
        row: usize,
        timestamp: Timestamp,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

// Schema document shape, one JSON file per database.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemaDoc {
    tables: Vec<SchemaTable>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemaTable {
    name: String,
    pk_col: String,
    #[serde(default)]
    timestamp_col: Option<String>,
    #[serde(default)]
    fk_cols: BTreeMap<String, String>,
    #[serde(default)]
    feature_cols: Vec<String>,
    #[serde(default, rename = "static")]
    is_static: bool,
}

impl RelationalDatabase {
    /// Assembles a database from tables, enforcing structural shape
    /// (fk slot count and feature width per row). Semantic problems such as
    /// duplicate pks or dangling fks pass through for `validate` to report.
    pub fn from_tables(mut tables: Vec<Table>) -> Result<Self, StoreError> {
        let n = tables.len();
        for table in &mut tables {
            table.def.fk_cols.sort_by_key(|(_, t)| *t);
        }
        for table in &tables {
            for (i, row) in table.rows.iter().enumerate() {
                if row.fks.len() != n {
                    return Err(StoreError::MalformedRow {
                        table: table.def.name.clone(),
                        row: i + 1,
                        message: format!("fk slot count {} != table count {n}", row.fks.len()),
                    });
                }
                if row.features.len() != table.def.feature_dim {
                    return Err(StoreError::MalformedRow {
                        table: table.def.name.clone(),
                        row: i + 1,
                        message: format!(
                            "feature width {} != declared {}",
                            row.features.len(),
                            table.def.feature_dim
                        ),
                    });
                }
            }
        }
        let mut db = RelationalDatabase {
            tables,
            links: BTreeSet::new(),
            entity_index: HashMap::new(),
        };
        db.rebuild_derived();
        Ok(db)
    }

    fn rebuild_derived(&mut self) {
        self.links.clear();
        self.entity_index.clear();
        for (ti, table) in self.tables.iter().enumerate() {
            for (ri, row) in table.rows.iter().enumerate() {
                self.entity_index.entry((ti, row.pk)).or_insert(ri);
                for (target, &fk) in row.fks.iter().enumerate() {
                    if fk != 0 {
                        self.links.insert((ti, target));
                    }
                }
            }
        }
    }

    pub fn num_tables(&self) -> usize {
        self.tables.len()
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn table(&self, id: TableId) -> &Table {
        &self.tables[id]
    }

    pub fn table_by_name(&self, name: &str) -> Option<TableId> {
        self.tables.iter().position(|t| t.def.name == name)
    }

    /// Observed (referencing, referenced) table pairs.
    pub fn links(&self) -> &BTreeSet<(TableId, TableId)> {
        &self.links
    }

    pub fn row(&self, table: TableId, pk: EntityPk) -> Option<&EntityRow> {
        self.entity_index
            .get(&(table, pk))
            .map(|&i| &self.tables[table].rows[i])
    }

    /// Largest dynamic timestamp in the database, if any dynamic row exists.
    pub fn max_timestamp(&self) -> Option<Timestamp> {
        self.tables
            .iter()
            .flat_map(|t| t.rows.iter())
            .filter(|r| r.timestamp >= 0)
            .map(|r| r.timestamp)
            .max()
    }

    pub fn total_rows(&self) -> usize {
        self.tables.iter().map(|t| t.rows.len()).sum()
    }
}

/// Loads and validates a database: a JSON schema document plus one headered
/// CSV per table in `data_dir`. Load is strict — malformed rows, duplicate
/// pks, and dangling fks are errors carrying table and row location.
pub fn load_database(schema_path: &Path, data_dir: &Path) -> Result<RelationalDatabase, StoreError> {
    let text = fs::read_to_string(schema_path).map_err(|source| StoreError::Io {
        path: schema_path.to_path_buf(),
        source,
    })?;
    let doc: SchemaDoc =
        serde_json::from_str(&text).map_err(|e| StoreError::Schema(e.to_string()))?;
    let defs = resolve_schema(&doc)?;
    let n = defs.len();

    let mut tables = Vec::with_capacity(n);
    for def in defs {
        let rows = read_table_csv(&def, data_dir, n)?;
        tables.push(Table { def, rows });
    }
    let mut db = RelationalDatabase {
        tables,
        links: BTreeSet::new(),
        entity_index: HashMap::new(),
    };

    // Duplicate pks are load errors.
    for table in &db.tables {
        let mut seen: HashMap<EntityPk, usize> = HashMap::new();
        for (i, row) in table.rows.iter().enumerate() {
            if seen.insert(row.pk, i).is_some() {
                return Err(StoreError::DuplicatePk {
                    table: table.def.name.clone(),
                    row: i + 1,
                    pk: row.pk,
                });
            }
        }
    }
    db.rebuild_derived();

    // Every nonzero fk must resolve.
    for ti in 0..n {
        for (ri, row) in db.tables[ti].rows.iter().enumerate() {
            for (target, &fk) in row.fks.iter().enumerate() {
                if fk != 0 && !db.entity_index.contains_key(&(target, fk)) {
                    return Err(StoreError::DanglingFk {
                        table: db.tables[ti].def.name.clone(),
                        row: ri + 1,
                        target: db.tables[target].def.name.clone(),
                        pk: fk,
                    });
                }
            }
        }
    }
    Ok(db)
}

fn resolve_schema(doc: &SchemaDoc) -> Result<Vec<TableDef>, StoreError> {
    let mut names: HashMap<&str, TableId> = HashMap::new();
    for (i, t) in doc.tables.iter().enumerate() {
        if names.insert(t.name.as_str(), i).is_some() {
            return Err(StoreError::Schema(format!("duplicate table name {}", t.name)));
        }
    }
    let mut defs = Vec::with_capacity(doc.tables.len());
    for (i, t) in doc.tables.iter().enumerate() {
        if t.is_static && t.timestamp_col.is_some() {
            return Err(StoreError::Schema(format!(
                "static table {} must not declare a timestamp column",
                t.name
            )));
        }
        if !t.is_static && t.timestamp_col.is_none() {
            return Err(StoreError::Schema(format!(
                "dynamic table {} requires a timestamp column",
                t.name
            )));
        }
        let mut fk_cols = Vec::new();
        let mut fk_targets = BTreeSet::new();
        for (col, target_name) in &t.fk_cols {
            let target = *names.get(target_name.as_str()).ok_or_else(|| {
                StoreError::Schema(format!(
                    "table {} fk column {col} references unknown table {target_name}",
                    t.name
                ))
            })?;
            if !fk_targets.insert(target) {
                return Err(StoreError::Schema(format!(
                    "table {} declares two fk columns into {target_name}",
                    t.name
                )));
            }
            fk_cols.push((col.clone(), target));
        }
        // Canonical order: by target table id, matching the fk slot layout.
        fk_cols.sort_by_key(|(_, t)| *t);
        defs.push(TableDef {
            table_id: i,
            name: t.name.clone(),
            feature_dim: t.feature_cols.len(),
            fk_targets,
            is_static: t.is_static,
            pk_col: t.pk_col.clone(),
            timestamp_col: t.timestamp_col.clone(),
            fk_cols,
            feature_cols: t.feature_cols.clone(),
        });
    }
    Ok(defs)
}

fn read_table_csv(
    def: &TableDef,
    data_dir: &Path,
    n_tables: usize,
) -> Result<Vec<EntityRow>, StoreError> {
    let path = data_dir.join(format!("{}.csv", def.name));
    let mut reader = csv::Reader::from_path(&path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => StoreError::Io {
            path: path.clone(),
            source: std::io::Error::other(e.to_string()),
        },
        _ => StoreError::MalformedRow {
            table: def.name.clone(),
            row: 0,
            message: e.to_string(),
        },
    })?;
    let headers = reader
        .headers()
        .map_err(|e| StoreError::MalformedRow {
            table: def.name.clone(),
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize, StoreError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| StoreError::Schema(format!("table {}: missing column {name}", def.name)))
    };

    let pk_idx = col(&def.pk_col)?;
    let ts_idx = match &def.timestamp_col {
        Some(c) => Some(col(c)?),
        None => None,
    };
    let fk_idx: Vec<(usize, TableId)> = def
        .fk_cols
        .iter()
        .map(|(c, target)| Ok((col(c)?, *target)))
        .collect::<Result<_, StoreError>>()?;
    let feat_idx: Vec<usize> = def
        .feature_cols
        .iter()
        .map(|c| col(c))
        .collect::<Result<_, StoreError>>()?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| StoreError::MalformedRow {
            table: def.name.clone(),
            row: row_no,
            message: e.to_string(),
        })?;
        let field = |idx: usize| -> &str { record.get(idx).unwrap_or("") };
        let parse_err = |col: &str, what: &str| StoreError::MalformedRow {
            table: def.name.clone(),
            row: row_no,
            message: format!("column {col}: {what}"),
        };

        let pk: EntityPk = field(pk_idx)
            .trim()
            .parse()
            .map_err(|_| parse_err(&def.pk_col, "expected positive integer pk"))?;
        if pk == 0 {
            return Err(parse_err(&def.pk_col, "pk must be >= 1"));
        }
        let timestamp = match ts_idx {
            Some(idx) => {
                let t: Timestamp = field(idx)
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(def.timestamp_col.as_ref().unwrap(), "expected integer timestamp"))?;
                if t < 0 {
                    return Err(parse_err(
                        def.timestamp_col.as_ref().unwrap(),
                        "dynamic timestamps must be >= 0",
                    ));
                }
                t
            }
            None => STATIC_TS,
        };
        let mut fks = vec![0; n_tables];
        for (idx, target) in &fk_idx {
            let v: EntityPk = field(*idx)
                .trim()
                .parse()
                .map_err(|_| parse_err(&def.fk_cols.iter().find(|(_, t)| t == target).unwrap().0, "expected non-negative integer fk"))?;
            fks[*target] = v;
        }
        let mut features = Vec::with_capacity(feat_idx.len());
        for (fi, idx) in feat_idx.iter().enumerate() {
            let v: f64 = field(*idx)
                .trim()
                .parse()
                .map_err(|_| parse_err(&def.feature_cols[fi], "expected real number"))?;
            if !v.is_finite() {
                return Err(parse_err(&def.feature_cols[fi], "feature must be finite"));
            }
            features.push(v);
        }
        rows.push(EntityRow {
            pk,
            fks,
            features,
            timestamp,
        });
    }
    Ok(rows)
}

/// Writes `schema.json` plus one CSV per table under `dir`. Feature values
/// are written as shortest round-trip decimal, so `load_database` recovers
/// them bit-exactly.
pub fn save_database(db: &RelationalDatabase, dir: &Path) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(|source| StoreError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let doc = SchemaDoc {
        tables: db
            .tables
            .iter()
            .map(|t| SchemaTable {
                name: t.def.name.clone(),
                pk_col: t.def.pk_col.clone(),
                timestamp_col: t.def.timestamp_col.clone(),
                fk_cols: t
                    .def
                    .fk_cols
                    .iter()
                    .map(|(c, target)| (c.clone(), db.tables[*target].def.name.clone()))
                    .collect(),
                feature_cols: t.def.feature_cols.clone(),
                is_static: t.def.is_static,
            })
            .collect(),
    };
    let schema_path = dir.join("schema.json");
    fs::write(
        &schema_path,
        serde_json::to_string_pretty(&doc).expect("schema serializes"),
    )
    .map_err(|source| StoreError::Io {
        path: schema_path,
        source,
    })?;

    for table in &db.tables {
        let path = dir.join(format!("{}.csv", table.def.name));
        let mut w = csv::Writer::from_path(&path).map_err(|e| StoreError::Io {
            path: path.clone(),
            source: std::io::Error::other(e.to_string()),
        })?;
        let mut header = vec![table.def.pk_col.clone()];
        if let Some(ts) = &table.def.timestamp_col {
            header.push(ts.clone());
        }
        for (c, _) in &table.def.fk_cols {
            header.push(c.clone());
        }
        header.extend(table.def.feature_cols.iter().cloned());
        w.write_record(&header).map_err(|e| StoreError::Io {
            path: path.clone(),
            source: std::io::Error::other(e.to_string()),
        })?;
        for row in &table.rows {
            let mut rec = vec![row.pk.to_string()];
            if table.def.timestamp_col.is_some() {
                rec.push(row.timestamp.to_string());
            }
            for (_, target) in &table.def.fk_cols {
                rec.push(row.fks[*target].to_string());
            }
            for v in &row.features {
                rec.push(format!("{v}"));
            }
            w.write_record(&rec).map_err(|e| StoreError::Io {
                path: path.clone(),
                source: std::io::Error::other(e.to_string()),
            })?;
        }
        w.flush().map_err(|source| StoreError::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok(())
}

/// Reports every invariant violation; an empty report means the database
/// holds all row-level invariants.
pub fn validate(db: &RelationalDatabase) -> ValidationReport {
    let mut violations = Vec::new();
    for (ti, table) in db.tables.iter().enumerate() {
        let mut seen: BTreeSet<EntityPk> = BTreeSet::new();
        let mut reported: BTreeSet<EntityPk> = BTreeSet::new();
        for (ri, row) in table.rows.iter().enumerate() {
            if !seen.insert(row.pk) && reported.insert(row.pk) {
                violations.push(Violation::PkDuplicate {
                    table: ti,
                    pk: row.pk,
                });
            }
            for (target, &fk) in row.fks.iter().enumerate() {
                if fk != 0 && db.row(target, fk).is_none() {
                    violations.push(Violation::DanglingFk {
                        table: ti,
                        row: ri,
                        target,
                        pk: fk,
                    });
                }
            }
            for (ci, v) in row.features.iter().enumerate() {
                if !v.is_finite() {
                    violations.push(Violation::NonFiniteFeature {
                        table: ti,
                        row: ri,
                        col: ci,
                    });
                }
            }
            let ts_ok = if table.def.is_static {
                row.timestamp == STATIC_TS
            } else {
                row.timestamp >= 0
            };
            if !ts_ok {
                violations.push(Violation::BadTimestamp {
                    table: ti,
                    row: ri,
                    timestamp: row.timestamp,
                });
            }
        }
    }
    ValidationReport { violations }
}

/// Keeps exactly the rows with timestamp <= t (static rows always kept).
/// Schema and links are carried over unchanged; fks left dangling by the cut
/// are zeroed. Returns the filtered database and the count of zeroed fks.
pub fn slice_history_report(
    db: &RelationalDatabase,
    t: Timestamp,
) -> (RelationalDatabase, usize) {
    let tables: Vec<Table> = db
        .tables
        .iter()
        .map(|table| Table {
            def: table.def.clone(),
            rows: table
                .rows
                .iter()
                .filter(|r| table.def.is_static || r.timestamp <= t)
                .cloned()
                .collect(),
        })
        .collect();

    let mut index: HashMap<(TableId, EntityPk), usize> = HashMap::new();
    for (ti, table) in tables.iter().enumerate() {
        for (ri, row) in table.rows.iter().enumerate() {
            index.entry((ti, row.pk)).or_insert(ri);
        }
    }
    let mut zeroed = 0usize;
    let mut tables = tables;
    for table in &mut tables {
        for row in &mut table.rows {
            for (target, fk) in row.fks.iter_mut().enumerate() {
                if *fk != 0 && !index.contains_key(&(target, *fk)) {
                    *fk = 0;
                    zeroed += 1;
                }
            }
        }
    }
    let sliced = RelationalDatabase {
        tables,
        links: db.links.clone(),
        entity_index: index,
    };
    (sliced, zeroed)
}

/// `slice_history_report` without the zeroed-fk count.
pub fn slice_history(db: &RelationalDatabase, t: Timestamp) -> RelationalDatabase {
    slice_history_report(db, t).0
}

// Task files on disk: a small JSON header next to a labels CSV
// (entity, seed_time, label).
#[derive(Debug, Serialize, Deserialize)]
struct TaskDoc {
    target_table: String,
    task_kind: TaskKind,
    horizon: Timestamp,
    labels_csv: String,
}

/// Loads a task header and its labels CSV; paths in the header are relative
/// to the header file.
pub fn load_task(task_path: &Path, db: &RelationalDatabase) -> Result<TaskSpec, StoreError> {
    let text = fs::read_to_string(task_path).map_err(|source| StoreError::Io {
        path: task_path.to_path_buf(),
        source,
    })?;
    let doc: TaskDoc = serde_json::from_str(&text).map_err(|e| StoreError::Task(e.to_string()))?;
    let target_table = db
        .table_by_name(&doc.target_table)
        .ok_or_else(|| StoreError::Task(format!("unknown target table {}", doc.target_table)))?;
    let csv_path = task_path
        .parent()
        .unwrap_or(Path::new("."))
        .join(&doc.labels_csv);
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| StoreError::Io {
        path: csv_path.clone(),
        source: std::io::Error::other(e.to_string()),
    })?;
    let mut labels = BTreeMap::new();
    let mut seed_times = BTreeSet::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| StoreError::Task(format!("labels row {}: {e}", i + 1)))?;
        let get = |j: usize| record.get(j).unwrap_or("").trim().to_string();
        let pk: EntityPk = get(0)
            .parse()
            .map_err(|_| StoreError::Task(format!("labels row {}: bad entity", i + 1)))?;
        let t: Timestamp = get(1)
            .parse()
            .map_err(|_| StoreError::Task(format!("labels row {}: bad seed time", i + 1)))?;
        let label: f64 = get(2)
            .parse()
            .map_err(|_| StoreError::Task(format!("labels row {}: bad label", i + 1)))?;
        labels.insert((pk, t), label);
        seed_times.insert(t);
    }
    let task = TaskSpec {
        target_table,
        task_kind: doc.task_kind,
        seed_times: seed_times.into_iter().collect(),
        horizon: doc.horizon,
        labels,
    };
    task.validate(db)?;
    Ok(task)
}

/// Writes the task header JSON plus the labels CSV next to it.
pub fn save_task(
    task: &TaskSpec,
    db: &RelationalDatabase,
    dir: &Path,
    stem: &str,
) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(|source| StoreError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let csv_name = format!("{stem}.csv");
    let doc = TaskDoc {
        target_table: db.table(task.target_table).def.name.clone(),
        task_kind: task.task_kind,
        horizon: task.horizon,
        labels_csv: csv_name.clone(),
    };
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(
        &json_path,
        serde_json::to_string_pretty(&doc).expect("task serializes"),
    )
    .map_err(|source| StoreError::Io {
        path: json_path,
        source,
    })?;
    let csv_path = dir.join(csv_name);
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| StoreError::Io {
        path: csv_path.clone(),
        source: std::io::Error::other(e.to_string()),
    })?;
    w.write_record(["entity", "seed_time", "label"])
        .map_err(|e| StoreError::Io {
            path: csv_path.clone(),
            source: std::io::Error::other(e.to_string()),
        })?;
    for (&(pk, t), &label) in &task.labels {
        w.write_record(&[pk.to_string(), t.to_string(), format!("{label}")])
            .map_err(|e| StoreError::Io {
                path: csv_path.clone(),
                source: std::io::Error::other(e.to_string()),
            })?;
    }
    w.flush().map_err(|source| StoreError::Io {
        path: csv_path.clone(),
        source,
    })?;
    Ok(())
}
