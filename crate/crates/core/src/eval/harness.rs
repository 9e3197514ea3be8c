//! Comparison experiments: triplet vs entity records under the bottom-up
//! clusterer, and K-means sweeps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, KMeansParams, SparseBinary};
use super::metrics::{evaluate, LabeledItems, MetricsReport};
use super::EvalError;
use crate::cluster::{cluster, ClusterOutcome, ClusterParams, Record};
use crate::extract::TableColumn;
use crate::triplets::{entity_records, TripletStore};
use crate::ColumnRef;

/// Truth class of a record: the most common class among its columns,
/// ties to the smaller class id.
pub fn record_class<R: Record>(record: &R, column_class: &BTreeMap<ColumnRef, u32>) -> Option<u32> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for c in record.columns() {
        if let Some(&class) = column_class.get(c) {
            *counts.entry(class).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(class, _)| class)
}

/// Hard labeling of the clustered records.
pub fn record_labels<R: Record>(
    records: &[R],
    outcome: &ClusterOutcome,
    column_class: &BTreeMap<ColumnRef, u32>,
) -> LabeledItems {
    let mut items = Vec::new();
    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    for a in &outcome.assignments {
        let r = &records[a.record];
        if let Some(class) = record_class(r, column_class) {
            items.push(r.key());
            predicted.push(a.cluster_id);
            truth.push(class);
        }
    }
    LabeledItems::hard(items, predicted, truth)
}

/// Soft labeling of columns: a column belongs to every cluster that holds it.
pub fn column_labels(outcome: &ClusterOutcome, column_class: &BTreeMap<ColumnRef, u32>) -> LabeledItems {
    let mut memberships: BTreeMap<ColumnRef, Vec<u32>> = BTreeMap::new();
    for c in &outcome.clusters {
        for col in &c.columns {
            memberships.entry(*col).or_default().push(c.cluster_id);
        }
    }
    let mut items = Vec::new();
    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    for (col, clusters) in memberships {
        if let Some(&class) = column_class.get(&col) {
            items.push(col.to_string());
            predicted.push(clusters);
            truth.push(class);
        }
    }
    LabeledItems::soft(items, predicted, truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationScores {
    /// Metrics over clustered records.
    pub records: MetricsReport,
    /// Metrics over columns with soft cluster membership.
    pub columns: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationComparison {
    pub triplet: RepresentationScores,
    pub entity: RepresentationScores,
}

fn score<R: Record>(
    records: &[R],
    params: &ClusterParams,
    column_class: &BTreeMap<ColumnRef, u32>,
) -> Result<RepresentationScores, EvalError> {
    let outcome = cluster(records, params)?;
    Ok(RepresentationScores {
        records: evaluate(&record_labels(records, &outcome, column_class))?,
        columns: evaluate(&column_labels(&outcome, column_class))?,
    })
}

/// Clusters the same columns as triplet records and as entity records.
pub fn compare_representations(
    columns: &[TableColumn],
    column_class: &BTreeMap<ColumnRef, u32>,
    params: &ClusterParams,
) -> Result<RepresentationComparison, EvalError> {
    let triplets = TripletStore::from_columns(columns).rank();
    let entities = entity_records(columns);
    Ok(RepresentationComparison {
        triplet: score(&triplets, params, column_class)?,
        entity: score(&entities, params, column_class)?,
    })
}

/// Fruit and company columns that share the entity "apple". Each layout is
/// published on two domains so every window clears the default domain
/// threshold. Class 0 is fruit, class 1 is company.
pub fn toy_apple() -> (Vec<TableColumn>, BTreeMap<ColumnRef, u32>) {
    let layouts: [(&[&str], u32); 4] = [
        (&["Apple", "Banana", "Orange", "Mango", "Grape", "Pear"], 0),
        (&["Cherry", "Peach", "Apple", "Banana", "Orange", "Plum"], 0),
        (&["Apple", "Microsoft", "Google", "Amazon", "IBM", "Intel"], 1),
        (&["Oracle", "Dell", "Apple", "Microsoft", "Google", "HP"], 1),
    ];
    let mut columns = Vec::new();
    let mut classes = BTreeMap::new();
    let mut table_id = 0;
    for (layout, class) in layouts {
        for copy in 0..2 {
            let col = TableColumn {
                table_id,
                column_index: 1,
                domain: format!("www.site{table_id}-{copy}.com"),
                cells: layout.iter().map(|s| s.to_string()).collect(),
            };
            classes.insert(col.column_ref(), class);
            columns.push(col);
            table_id += 1;
        }
    }
    (columns, classes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub k: usize,
    pub seed: u64,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub runs: Vec<SweepRun>,
    /// Index into `runs` of the highest-purity run (first on ties).
    pub best: Option<usize>,
}

/// K-means for every (k, seed) combination with `k <= n`.
pub fn kmeans_sweep(
    vectors: &[SparseBinary],
    truth: &[u32],
    ks: &[usize],
    seeds: &[u64],
    max_iters: usize,
) -> Result<SweepResult, EvalError> {
    let mut runs = Vec::new();
    for &k in ks.iter().filter(|&&k| k >= 1 && k <= vectors.len()) {
        for &seed in seeds {
            let assignment = kmeans(vectors, &KMeansParams { k, seed, max_iters })?;
            let metrics = evaluate(&LabeledItems::anonymous_hard(assignment, truth.to_vec()))?;
            runs.push(SweepRun { k, seed, metrics });
        }
    }
    let mut best: Option<usize> = None;
    for (i, r) in runs.iter().enumerate() {
        if best.is_none_or(|b| r.metrics.purity > runs[b].metrics.purity) {
            best = Some(i);
        }
    }
    Ok(SweepResult { runs, best })
}
