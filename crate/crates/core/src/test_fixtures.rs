//! Hand-built users/products/transactions fixtures shared by unit tests.

use crate::store::{EntityRow, RelationalDatabase, Table, TableDef, STATIC_TS};
use std::collections::BTreeSet;

pub(crate) fn static_def(table_id: usize, name: &str, feature_cols: &[&str]) -> TableDef {
    TableDef {
        table_id,
        name: name.into(),
        feature_dim: feature_cols.len(),
        fk_targets: BTreeSet::new(),
        is_static: true,
        pk_col: format!("{name}_id"),
        timestamp_col: None,
        fk_cols: Vec::new(),
        feature_cols: feature_cols.iter().map(|s| s.to_string()).collect(),
    }
}

/// Three-table star: users (2 static features), products (1 static feature),
/// transactions (1 feature, fks into users and products).
/// Transactions are given as (pk, user_pk, product_pk, tick, amount).
pub(crate) fn star_db(
    n_users: u64,
    n_products: u64,
    tx: &[(u64, u64, u64, i64, f64)],
) -> RelationalDatabase {
    let users = Table {
        def: static_def(0, "users", &["age", "tenure"]),
        rows: (1..=n_users)
            .map(|pk| EntityRow {
                pk,
                fks: vec![0, 0, 0],
                features: vec![20.0 + pk as f64, 0.5 * pk as f64],
                timestamp: STATIC_TS,
            })
            .collect(),
    };
    let products = Table {
        def: static_def(1, "products", &["price"]),
        rows: (1..=n_products)
            .map(|pk| EntityRow {
                pk,
                fks: vec![0, 0, 0],
                features: vec![10.0 * pk as f64],
                timestamp: STATIC_TS,
            })
            .collect(),
    };
    let transactions = Table {
        def: TableDef {
            table_id: 2,
            name: "transactions".into(),
            feature_dim: 1,
            fk_targets: [0usize, 1].into_iter().collect(),
            is_static: false,
            pk_col: "tx_id".into(),
            timestamp_col: Some("tick".into()),
            fk_cols: vec![("user_id".into(), 0), ("product_id".into(), 1)],
            feature_cols: vec!["amount".into()],
        },
        rows: tx
            .iter()
            .map(|&(pk, user, product, tick, amount)| EntityRow {
                pk,
                fks: vec![user, product, 0],
                features: vec![amount],
                timestamp: tick,
            })
            .collect(),
    };
    RelationalDatabase::from_tables(vec![users, products, transactions]).expect("fixture shape")
}
