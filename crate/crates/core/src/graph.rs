//! Heterogeneous graph construction from a relational database.
//!
//! Two builders share the same edge rule (a directed edge runs from the
//! referenced row to the referencing row whose fk matches its pk):
//!
//! - [`build_cumulative_graph`]: every row up to time `t`, with the temporal
//!   admission rule between dynamic endpoints.
//! - [`build_snapshot_graph`]: only dynamic rows inside the half-open window
//!   `(t - window, t]`, plus the static rows they reference and any
//!   explicitly requested target entities. A window of one tick keeps
//!   exactly the rows stamped `t`.
//!
//! Node ids are dense integers assigned in (table, pk) order, so repeated
//! builds are byte-identical under [`HeteroGraph::canonical_string`].

use crate::store::{EntityPk, RelationalDatabase, TableId, Timestamp, STATIC_TS};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::ops::Range;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge ({0}, {1}) not present in graph")]
    UnknownEdge(u32, u32),
    #[error("node id {0} out of range")]
    UnknownNode(u32),
}

/// Edge type per the schema pair it connects: the referenced table first,
/// the referencing table second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct EdgeType {
    pub referenced: TableId,
    pub referencing: TableId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphNode<'a> {
    pub table: TableId,
    pub pk: EntityPk,
    pub features: &'a [f64],
    pub timestamp: Timestamp,
}

/// Directed edge from the referenced node to the referencing node. The
/// reverse direction exists implicitly for message passing and is tagged
/// with the mirrored table pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct GraphEdge {
    pub src: u32,
    pub dst: u32,
}

#[derive(Debug, Clone)]
struct NodeData {
    table: TableId,
    pk: EntityPk,
    features: Vec<f64>,
    timestamp: Timestamp,
}

#[derive(Debug, Clone)]
pub struct HeteroGraph {
    nodes: Vec<NodeData>,
    edges_by_type: BTreeMap<EdgeType, Vec<GraphEdge>>,
    table_ranges: Vec<Range<usize>>,
    node_index: HashMap<(TableId, EntityPk), u32>,
    build_seconds: f64,
}

/// Per-table node counts and per-type edge counts, plus the build wall time.
#[derive(Debug, Clone, Serialize)]
pub struct GraphStats {
    pub nodes_per_table: Vec<usize>,
    pub edges_per_type: Vec<(EdgeType, usize)>,
    pub total_nodes: usize,
    pub total_edges: usize,
    pub build_seconds: f64,
}

impl HeteroGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges_by_type.values().map(Vec::len).sum()
    }

    pub fn node(&self, id: u32) -> Result<GraphNode<'_>, GraphError> {
        let n = self
            .nodes
            .get(id as usize)
            .ok_or(GraphError::UnknownNode(id))?;
        Ok(GraphNode {
            table: n.table,
            pk: n.pk,
            features: &n.features,
            timestamp: n.timestamp,
        })
    }

    pub fn node_id(&self, table: TableId, pk: EntityPk) -> Option<u32> {
        self.node_index.get(&(table, pk)).copied()
    }

    pub fn table_of(&self, id: u32) -> TableId {
        self.nodes[id as usize].table
    }

    /// Dense node-id range occupied by one table.
    pub fn table_range(&self, table: TableId) -> Range<usize> {
        self.table_ranges[table].clone()
    }

    pub fn num_tables(&self) -> usize {
        self.table_ranges.len()
    }

    pub fn edges_by_type(&self) -> &BTreeMap<EdgeType, Vec<GraphEdge>> {
        &self.edges_by_type
    }

    pub fn build_seconds(&self) -> f64 {
        self.build_seconds
    }

    /// Table pair (table of first endpoint, table of second endpoint) for an
    /// ordered node pair that is an edge in either stored orientation.
    pub fn edge_type_of(&self, a: u32, b: u32) -> Result<(TableId, TableId), GraphError> {
        if a as usize >= self.nodes.len() || b as usize >= self.nodes.len() {
            return Err(GraphError::UnknownEdge(a, b));
        }
        let (ta, tb) = (self.table_of(a), self.table_of(b));
        let stored = |ty: EdgeType, e: GraphEdge| {
            self.edges_by_type
                .get(&ty)
                .is_some_and(|v| v.binary_search(&e).is_ok())
        };
        let forward = stored(
            EdgeType { referenced: ta, referencing: tb },
            GraphEdge { src: a, dst: b },
        );
        let reverse = stored(
            EdgeType { referenced: tb, referencing: ta },
            GraphEdge { src: b, dst: a },
        );
        if forward || reverse {
            Ok((ta, tb))
        } else {
            Err(GraphError::UnknownEdge(a, b))
        }
    }

    pub fn stats(&self) -> GraphStats {
        let nodes_per_table = self.table_ranges.iter().map(|r| r.len()).collect();
        let edges_per_type = self
            .edges_by_type
            .iter()
            .map(|(ty, v)| (*ty, v.len()))
            .collect();
        GraphStats {
            nodes_per_table,
            edges_per_type,
            total_nodes: self.num_nodes(),
            total_edges: self.num_edges(),
            build_seconds: self.build_seconds,
        }
    }

    /// Line-oriented canonical form (nodes sorted, then edges sorted) used by
    /// tests for byte equality. Build wall time is deliberately excluded.
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            let _ = write!(out, "node t={} pk={} ts={} x=", n.table, n.pk, n.timestamp);
            for (i, v) in n.features.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        for (ty, edges) in &self.edges_by_type {
            for e in edges {
                let _ = writeln!(
                    out,
                    "edge {} -> {} type=({},{})",
                    e.src, e.dst, ty.referenced, ty.referencing
                );
            }
        }
        out
    }
}

/// Temporal admission for a cumulative edge: a static endpoint is treated as
/// always present; between dynamic rows the referencing row may not be newer
/// than the referenced one.
pub fn cumulative_edge_ok(referenced_ts: Timestamp, referencing_ts: Timestamp) -> bool {
    referenced_ts == STATIC_TS || referencing_ts == STATIC_TS || referencing_ts <= referenced_ts
}

fn assemble(
    db: &RelationalDatabase,
    keep: impl Fn(TableId, usize) -> bool,
    temporal: impl Fn(Timestamp, Timestamp) -> bool,
    started: Instant,
) -> HeteroGraph {
    // Nodes in (table, pk) order, ids dense.
    let mut nodes = Vec::new();
    let mut table_ranges = Vec::with_capacity(db.num_tables());
    let mut node_index = HashMap::new();
    for (ti, table) in db.tables().iter().enumerate() {
        let start = nodes.len();
        let mut picked: Vec<usize> = (0..table.rows.len()).filter(|&ri| keep(ti, ri)).collect();
        picked.sort_by_key(|&ri| table.rows[ri].pk);
        for ri in picked {
            let row = &table.rows[ri];
            node_index.insert((ti, row.pk), nodes.len() as u32);
            nodes.push(NodeData {
                table: ti,
                pk: row.pk,
                features: row.features.clone(),
                timestamp: row.timestamp,
            });
        }
        table_ranges.push(start..nodes.len());
    }

    // Edges: resolve every nonzero fk of every included node against the
    // included node set.
    let mut edges_by_type: BTreeMap<EdgeType, Vec<GraphEdge>> = BTreeMap::new();
    for (dst_id, node) in nodes.iter().enumerate() {
        let row = db.row(node.table, node.pk).expect("node comes from db");
        for (target, &fk) in row.fks.iter().enumerate() {
            if fk == 0 {
                continue;
            }
            let Some(&src_id) = node_index.get(&(target, fk)) else {
                continue;
            };
            let src_ts = nodes[src_id as usize].timestamp;
            if !temporal(src_ts, node.timestamp) {
                continue;
            }
            edges_by_type
                .entry(EdgeType {
                    referenced: target,
                    referencing: node.table,
                })
                .or_default()
                .push(GraphEdge {
                    src: src_id,
                    dst: dst_id as u32,
                });
        }
    }
    for edges in edges_by_type.values_mut() {
        edges.sort();
    }

    HeteroGraph {
        nodes,
        edges_by_type,
        table_ranges,
        node_index,
        build_seconds: started.elapsed().as_secs_f64(),
    }
}

/// Graph over all rows with timestamp <= t (static rows included), with the
/// temporal edge rule between dynamic endpoints.
pub fn build_cumulative_graph(db: &RelationalDatabase, t: Timestamp) -> HeteroGraph {
    let started = Instant::now();
    assemble(
        db,
        |ti, ri| {
            let table = db.table(ti);
            table.def.is_static || table.rows[ri].timestamp <= t
        },
        cumulative_edge_ok,
        started,
    )
}

/// Snapshot over the half-open window `(t - window, t]`: windowed dynamic
/// rows plus the static rows they reference, and nothing else.
pub fn build_snapshot_graph(db: &RelationalDatabase, t: Timestamp, window: u64) -> HeteroGraph {
    build_snapshot_graph_with_targets(db, t, window, &[])
}

/// Snapshot that additionally admits the listed entities (typically the
/// target-table entities needing predictions, which may have had no activity
/// inside the window).
pub fn build_snapshot_graph_with_targets(
    db: &RelationalDatabase,
    t: Timestamp,
    window: u64,
    targets: &[(TableId, EntityPk)],
) -> HeteroGraph {
    assert!(window >= 1, "window must be >= 1 tick");
    let started = Instant::now();
    let low = t - window as Timestamp; // window is (low, t]

    let in_window = |ts: Timestamp| ts != STATIC_TS && ts > low && ts <= t;

    // Pass 1: statics referenced by windowed dynamic rows, plus explicit
    // targets.
    let mut extra: HashMap<(TableId, EntityPk), ()> = HashMap::new();
    for table in db.tables() {
        if table.def.is_static {
            continue;
        }
        for row in &table.rows {
            if !in_window(row.timestamp) {
                continue;
            }
            for (target, &fk) in row.fks.iter().enumerate() {
                if fk != 0 && db.table(target).def.is_static {
                    extra.insert((target, fk), ());
                }
            }
        }
    }
    for &(table, pk) in targets {
        extra.insert((table, pk), ());
    }

    assemble(
        db,
        |ti, ri| {
            let table = db.table(ti);
            let row = &table.rows[ri];
            if table.def.is_static {
                extra.contains_key(&(ti, row.pk))
            } else {
                in_window(row.timestamp) || extra.contains_key(&(ti, row.pk))
            }
        },
        // Window membership already constrains both endpoints; no ordering
        // condition inside the window.
        |_, _| true,
        started,
    )
}

/// Totals for reporting.
pub fn graph_stats(g: &HeteroGraph) -> GraphStats {
    g.stats()
}
