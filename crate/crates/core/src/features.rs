//! Per-entity temporal features from linked history.
//!
//! For a target entity at seed time `t`, the feature vector is its own static
//! features followed, for every table that may reference its table and every
//! configured lag window, by the count of linked rows inside the window, the
//! sum and mean of each of their numeric features, and the ticks since the
//! most recent linked row (capped at `t + 1` when the window is empty). Only
//! rows with timestamp <= t ever contribute, so features never read past the
//! seed time.

use crate::store::{EntityPk, RelationalDatabase, TableId, Timestamp};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("unknown entity: table {table} pk {pk}")]
    UnknownEntity { table: TableId, pk: EntityPk },
    #[error("entity table {0} out of range")]
    UnknownTable(TableId),
}

/// Lag windows in ticks; `None` spans all history up to the seed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeConfig {
    pub windows: Vec<Option<u64>>,
}

impl Default for FeConfig {
    fn default() -> Self {
        FeConfig {
            windows: vec![Some(1), Some(4), Some(16), None],
        }
    }
}

/// Engineered features for one entity at one seed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub entity: (TableId, EntityPk),
    pub seed_time: Timestamp,
}

/// Rows of (features, label) with a consistent width.
#[derive(Debug, Clone)]
pub struct TabularDataset {
    pub rows: Vec<(FeatureVector, f64)>,
    pub task_kind: crate::store::TaskKind,
}

impl TabularDataset {
    pub fn feature_dim(&self) -> usize {
        self.rows.first().map_or(0, |(f, _)| f.values.len())
    }
}

/// Precomputed reverse index: for each (referencing table, referenced pk),
/// the linked rows sorted by timestamp. Reused across entities and seed
/// times of one database.
pub struct Featurizer<'a> {
    db: &'a RelationalDatabase,
    config: FeConfig,
    target_table: TableId,
    /// Referencing tables in ascending id order, from the declared schema so
    /// the width is data-independent.
    referencing: Vec<TableId>,
    /// Per referencing table: pk of the target entity -> (timestamp, row)
    /// pairs sorted by timestamp.
    linked: Vec<HashMap<EntityPk, Vec<(Timestamp, usize)>>>,
}

impl<'a> Featurizer<'a> {
    pub fn new(
        db: &'a RelationalDatabase,
        target_table: TableId,
        config: FeConfig,
    ) -> Result<Self, FeatureError> {
        if target_table >= db.num_tables() {
            return Err(FeatureError::UnknownTable(target_table));
        }
        let referencing: Vec<TableId> = (0..db.num_tables())
            .filter(|&j| db.table(j).def.fk_targets.contains(&target_table))
            .collect();
        let mut linked = Vec::with_capacity(referencing.len());
        for &j in &referencing {
            let mut index: HashMap<EntityPk, Vec<(Timestamp, usize)>> = HashMap::new();
            for (ri, row) in db.table(j).rows.iter().enumerate() {
                let fk = row.fks[target_table];
                if fk != 0 {
                    index.entry(fk).or_default().push((row.timestamp, ri));
                }
            }
            for list in index.values_mut() {
                list.sort();
            }
            linked.push(index);
        }
        Ok(Featurizer {
            db,
            config,
            target_table,
            referencing,
            linked,
        })
    }

    /// Width of every vector this featurizer produces.
    pub fn feature_dim(&self) -> usize {
        let statics = self.db.table(self.target_table).def.feature_dim;
        let per_table: usize = self
            .referencing
            .iter()
            .map(|&j| {
                let d = self.db.table(j).def.feature_dim;
                self.config.windows.len() * (1 + 2 * d + 1)
            })
            .sum();
        statics + per_table
    }

    pub fn config(&self) -> &FeConfig {
        &self.config
    }

    pub fn features(&self, pk: EntityPk, t: Timestamp) -> Result<FeatureVector, FeatureError> {
        let entity_row = self
            .db
            .row(self.target_table, pk)
            .ok_or(FeatureError::UnknownEntity {
                table: self.target_table,
                pk,
            })?;

        let mut values = entity_row.features.clone();
        for (slot, &j) in self.referencing.iter().enumerate() {
            let d = self.db.table(j).def.feature_dim;
            let rows = self.linked[slot].get(&pk);
            for window in &self.config.windows {
                let low = window.map(|w| t - w as Timestamp);
                let mut count = 0usize;
                let mut sums = vec![0.0; d];
                let mut newest: Option<Timestamp> = None;
                if let Some(rows) = rows {
                    for &(ts, ri) in rows {
                        if ts > t {
                            break;
                        }
                        if let Some(low) = low {
                            if ts <= low {
                                continue;
                            }
                        }
                        count += 1;
                        let row = &self.db.table(j).rows[ri];
                        for (k, v) in row.features.iter().enumerate() {
                            sums[k] += v;
                        }
                        newest = Some(newest.map_or(ts, |n| n.max(ts)));
                    }
                }
                values.push(count as f64);
                values.extend_from_slice(&sums);
                if count > 0 {
                    values.extend(sums.iter().map(|s| s / count as f64));
                } else {
                    values.extend(std::iter::repeat(0.0).take(d));
                }
                let recency = match newest {
                    Some(ts) => (t - ts) as f64,
                    None => (t + 1) as f64,
                };
                values.push(recency);
            }
        }
        Ok(FeatureVector {
            values,
            entity: (self.target_table, pk),
            seed_time: t,
        })
    }
}

/// One-off convenience wrapper around [`Featurizer`].
pub fn engineer_features(
    db: &RelationalDatabase,
    entity: (TableId, EntityPk),
    t: Timestamp,
    config: &FeConfig,
) -> Result<FeatureVector, FeatureError> {
    Featurizer::new(db, entity.0, config.clone())?.features(entity.1, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::slice_history;
    use crate::test_fixtures::star_db;

    fn cfg() -> FeConfig {
        FeConfig::default()
    }

    #[test]
    fn cold_start_entity_has_zero_aggregates_and_capped_recency() {
        let db = star_db(2, 1, &[(1, 2, 1, 0, 5.0)]);
        let t = 7;
        let f = engineer_features(&db, (0, 1), t, &cfg()).unwrap();
        // Statics pass through.
        assert_eq!(f.values[0], 21.0);
        assert_eq!(f.values[1], 0.5);
        // One referencing table (transactions, d=1), four windows of
        // [count, sum, mean, recency].
        assert_eq!(f.values.len(), 2 + 4 * 4);
        for w in 0..4 {
            let base = 2 + w * 4;
            assert_eq!(f.values[base], 0.0, "count");
            assert_eq!(f.values[base + 1], 0.0, "sum");
            assert_eq!(f.values[base + 2], 0.0, "mean");
            assert_eq!(f.values[base + 3], (t + 1) as f64, "recency cap");
        }
    }

    #[test]
    fn aggregates_match_hand_computation() {
        // Three transactions of amounts 1, 2, 3 for user 1, all inside every
        // window at t = 2.
        let db = star_db(1, 1, &[(1, 1, 1, 2, 1.0), (2, 1, 1, 2, 2.0), (3, 1, 1, 2, 3.0)]);
        let f = engineer_features(&db, (0, 1), 2, &cfg()).unwrap();
        for w in 0..4 {
            let base = 2 + w * 4;
            assert_eq!(f.values[base], 3.0, "count in window {w}");
            assert_eq!(f.values[base + 1], 6.0, "sum in window {w}");
            assert_eq!(f.values[base + 2], 2.0, "mean in window {w}");
            assert_eq!(f.values[base + 3], 0.0, "recency in window {w}");
        }
    }

    #[test]
    fn windows_clip_older_rows() {
        // Amount 10 at tick 0, amount 2 at tick 9; at t=9 the 1-tick and
        // 4-tick windows see only the recent row, all-history sees both.
        let db = star_db(1, 1, &[(1, 1, 1, 0, 10.0), (2, 1, 1, 9, 2.0)]);
        let f = engineer_features(&db, (0, 1), 9, &cfg()).unwrap();
        let window = |i: usize| &f.values[2 + i * 4..2 + (i + 1) * 4];
        assert_eq!(window(0), &[1.0, 2.0, 2.0, 0.0]); // (8, 9]
        assert_eq!(window(1), &[1.0, 2.0, 2.0, 0.0]); // (5, 9]
        assert_eq!(window(2), &[2.0, 12.0, 6.0, 0.0]); // (-7, 9]
        assert_eq!(window(3), &[2.0, 12.0, 6.0, 0.0]); // all history
    }

    #[test]
    fn seed_time_before_first_activity_sees_nothing() {
        let db = star_db(1, 1, &[(1, 1, 1, 5, 4.0)]);
        let f = engineer_features(&db, (0, 1), 3, &cfg()).unwrap();
        let all_history = &f.values[2 + 3 * 4..2 + 4 * 4];
        assert_eq!(all_history[0], 0.0);
        assert_eq!(all_history[3], 4.0); // t + 1
    }

    #[test]
    fn features_are_causal_under_history_slicing() {
        let tx: Vec<(u64, u64, u64, i64, f64)> = (0..20)
            .map(|i| (i as u64 + 1, i % 3 + 1, 1, i as i64, i as f64 * 0.5))
            .collect();
        let db = star_db(3, 1, &tx);
        for t in [0, 5, 11, 19] {
            let sliced = slice_history(&db, t);
            for pk in 1..=3u64 {
                let full = engineer_features(&db, (0, pk), t, &cfg()).unwrap();
                let cut = engineer_features(&sliced, (0, pk), t, &cfg()).unwrap();
                assert_eq!(full, cut, "pk {pk} at t {t}");
            }
        }
    }

    #[test]
    fn unknown_entity_is_an_error() {
        let db = star_db(1, 1, &[]);
        assert!(matches!(
            engineer_features(&db, (0, 9), 0, &cfg()),
            Err(FeatureError::UnknownEntity { .. })
        ));
    }

    #[test]
    fn width_is_schema_determined_even_with_empty_data() {
        let db = star_db(2, 3, &[]);
        let fz_users = Featurizer::new(&db, 0, cfg()).unwrap();
        // users: 2 statics + transactions (d=1): 4 windows * (1+2+1).
        assert_eq!(fz_users.feature_dim(), 2 + 16);
        let f = fz_users.features(1, 3).unwrap();
        assert_eq!(f.values.len(), fz_users.feature_dim());

        let fz_products = Featurizer::new(&db, 1, cfg()).unwrap();
        assert_eq!(fz_products.feature_dim(), 1 + 16);
    }
}
