//! Clustering-quality metrics, a K-means baseline, and comparison harnesses.

mod harness;
mod kmeans;
mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

pub use harness::{
    column_labels, compare_representations, kmeans_sweep, record_class, record_labels, toy_apple,
    RepresentationComparison, RepresentationScores, SweepResult, SweepRun,
};
pub use kmeans::{kmeans, occurrence_vectors, KMeansParams, SparseBinary};
pub use metrics::{
    evaluate, fowlkes_mallows, nmi, purity, rand_index, Contingency, LabeledItems, MetricsReport,
};

use crate::cluster::{Cluster, ClusterError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no items to evaluate")]
    EmptyInput,
    #[error("rand index needs at least two items")]
    SingleItem,
    #[error("metric requires a hard clustering")]
    SoftPrediction,
    #[error("fowlkes-mallows is undefined: no same-cluster or same-class pairs")]
    Degenerate,
    #[error("k = {k} exceeds the number of items ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Reads `item TAB class` lines.
pub fn read_truth(path: &Path) -> Result<BTreeMap<String, String>, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (item, class) = line.split_once('\t').ok_or_else(|| EvalError::Format {
            path: path.display().to_string(),
            line: i + 1,
            message: "expected item<TAB>class".into(),
        })?;
        out.insert(item.trim().to_lowercase(), class.trim().to_string());
    }
    Ok(out)
}

/// Entities of the clusters that have a truth class. An entity in several
/// clusters gets a soft membership. Class names are numbered in sorted order.
pub fn entity_labels(clusters: &[Cluster], truth: &BTreeMap<String, String>) -> LabeledItems {
    let class_ids: BTreeMap<&str, u32> = truth
        .values()
        .map(String::as_str)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, c)| (c, i as u32))
        .collect();
    let mut memberships: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for c in clusters {
        for e in &c.entities {
            if truth.contains_key(e) {
                memberships.entry(e).or_default().push(c.cluster_id);
            }
        }
    }
    let mut items = Vec::new();
    let mut predicted = Vec::new();
    let mut classes = Vec::new();
    for (e, m) in memberships {
        items.push(e.to_string());
        predicted.push(m);
        classes.push(class_ids[truth[e].as_str()]);
    }
    LabeledItems::soft(items, predicted, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entity_labels_are_soft_when_needed() {
        let mk = |id, es: &[&str]| Cluster {
            cluster_id: id,
            entities: es.iter().map(|s| s.to_string()).collect(),
            columns: BTreeSet::new(),
            domains: BTreeSet::new(),
            n_triplets: 1,
        };
        let truth: BTreeMap<String, String> = [("a", "x"), ("b", "y"), ("c", "x")]
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .into();
        let l = entity_labels(&[mk(0, &["a", "b", "z"]), mk(1, &["b", "c"])], &truth);
        assert_eq!(l.items, vec!["a", "b", "c"]);
        assert_eq!(l.predicted, vec![vec![0], vec![0, 1], vec![1]]);
        assert_eq!(l.truth, vec![0, 1, 0]);
        assert!(!l.is_hard());
    }
}
