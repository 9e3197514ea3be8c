//! Purity, NMI, Rand index and Fowlkes-Mallows over a cluster × class
//! contingency table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Items with predicted cluster memberships and one truth class each.
/// A hard clustering gives every item exactly one cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledItems {
    pub items: Vec<String>,
    /// Sorted, duplicate-free cluster ids per item.
    pub predicted: Vec<Vec<u32>>,
    pub truth: Vec<u32>,
}

impl LabeledItems {
    pub fn hard(items: Vec<String>, predicted: Vec<u32>, truth: Vec<u32>) -> Self {
        assert_eq!(items.len(), predicted.len());
        assert_eq!(items.len(), truth.len());
        Self {
            items,
            predicted: predicted.into_iter().map(|p| vec![p]).collect(),
            truth,
        }
    }

    pub fn soft(items: Vec<String>, predicted: Vec<Vec<u32>>, truth: Vec<u32>) -> Self {
        assert_eq!(items.len(), predicted.len());
        assert_eq!(items.len(), truth.len());
        let predicted = predicted
            .into_iter()
            .map(|mut p| {
                p.sort_unstable();
                p.dedup();
                p
            })
            .collect();
        Self {
            items,
            predicted,
            truth,
        }
    }

    /// Unnamed items, for tests and harness code.
    pub fn anonymous_hard(predicted: Vec<u32>, truth: Vec<u32>) -> Self {
        let items = (0..predicted.len()).map(|i| i.to_string()).collect();
        Self::hard(items, predicted, truth)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_hard(&self) -> bool {
        self.predicted.iter().all(|p| p.len() == 1)
    }
}

/// Counts of (cluster, class) incidences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contingency {
    /// `cells[i][j]` = items of class `j` in cluster `i`.
    pub cells: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub total: u64,
}

impl Contingency {
    pub fn new(l: &LabeledItems) -> Self {
        let clusters: BTreeMap<u32, usize> = l
            .predicted
            .iter()
            .flatten()
            .copied()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, c)| (c, i))
            .collect();
        let classes: BTreeMap<u32, usize> = l
            .truth
            .iter()
            .copied()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, c)| (c, i))
            .collect();
        let mut cells = vec![vec![0u64; classes.len()]; clusters.len()];
        for (pred, truth) in l.predicted.iter().zip(&l.truth) {
            for p in pred {
                cells[clusters[p]][classes[truth]] += 1;
            }
        }
        let row_sums: Vec<u64> = cells.iter().map(|r| r.iter().sum()).collect();
        let col_sums: Vec<u64> = (0..classes.len())
            .map(|j| cells.iter().map(|r| r[j]).sum())
            .collect();
        let total = row_sums.iter().sum();
        Self {
            cells,
            row_sums,
            col_sums,
            total,
        }
    }
}

fn pairs(n: u64) -> f64 {
    (n as f64) * (n.saturating_sub(1) as f64) / 2.0
}

fn require_hard(l: &LabeledItems) -> Result<Contingency, EvalError> {
    if l.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if !l.is_hard() {
        return Err(EvalError::SoftPrediction);
    }
    Ok(Contingency::new(l))
}

pub fn purity(l: &LabeledItems) -> Result<f64, EvalError> {
    let t = require_hard(l)?;
    let hits: u64 = t
        .cells
        .iter()
        .map(|r| r.iter().copied().max().unwrap_or(0))
        .sum();
    Ok(hits as f64 / t.total as f64)
}

fn entropy(sums: &[u64], n: f64) -> f64 {
    sums.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with natural logs. Defined as 1 when both
/// partitions are trivial.
pub fn nmi(l: &LabeledItems) -> Result<f64, EvalError> {
    let t = require_hard(l)?;
    let n = t.total as f64;
    let mut mi = 0.0;
    for (i, row) in t.cells.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (t.row_sums[i] as f64 * t.col_sums[j] as f64)).ln();
            }
        }
    }
    let (h_clusters, h_classes) = (entropy(&t.row_sums, n), entropy(&t.col_sums, n));
    let denom = (h_clusters + h_classes) / 2.0;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

pub fn rand_index(l: &LabeledItems) -> Result<f64, EvalError> {
    let t = require_hard(l)?;
    if t.total < 2 {
        return Err(EvalError::SingleItem);
    }
    let tp: f64 = t.cells.iter().flatten().map(|&c| pairs(c)).sum();
    let same_cluster: f64 = t.row_sums.iter().map(|&c| pairs(c)).sum();
    let same_class: f64 = t.col_sums.iter().map(|&c| pairs(c)).sum();
    let all = pairs(t.total);
    let fp = same_cluster - tp;
    let fn_ = same_class - tp;
    let tn = all - tp - fp - fn_;
    Ok((tp + tn) / all)
}

/// Fowlkes-Mallows index; soft memberships count once per (item, cluster).
pub fn fowlkes_mallows(l: &LabeledItems) -> Result<f64, EvalError> {
    if l.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let t = Contingency::new(l);
    let num: f64 = t.cells.iter().flatten().map(|&c| pairs(c)).sum();
    let rows: f64 = t.row_sums.iter().map(|&c| pairs(c)).sum();
    let cols: f64 = t.col_sums.iter().map(|&c| pairs(c)).sum();
    if rows == 0.0 || cols == 0.0 {
        return Err(EvalError::Degenerate);
    }
    Ok(num / (rows * cols).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub purity: Option<f64>,
    pub nmi: Option<f64>,
    pub rand_index: Option<f64>,
    /// Absent when every cluster or every class is a singleton.
    pub fm: Option<f64>,
    pub n_items: usize,
    pub n_clusters: usize,
    pub n_classes: usize,
}

/// Every metric that is defined for `l`.
pub fn evaluate(l: &LabeledItems) -> Result<MetricsReport, EvalError> {
    if l.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let t = Contingency::new(l);
    let hard = l.is_hard();
    let fm = match fowlkes_mallows(l) {
        Ok(v) => Some(v),
        Err(EvalError::Degenerate) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        purity: if hard { Some(purity(l)?) } else { None },
        nmi: if hard { Some(nmi(l)?) } else { None },
        rand_index: if hard && l.len() >= 2 {
            Some(rand_index(l)?)
        } else {
            None
        },
        fm,
        n_items: l.len(),
        n_clusters: t.row_sums.len(),
        n_classes: t.col_sums.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn purity_examples() {
        let l = LabeledItems::anonymous_hard(vec![0, 0, 1], vec![0, 1, 1]);
        assert!(close(purity(&l).unwrap(), 2.0 / 3.0));
        let l = LabeledItems::anonymous_hard(vec![5, 5, 5, 5], vec![0, 0, 1, 1]);
        assert!(close(purity(&l).unwrap(), 0.5));
        let l = LabeledItems::anonymous_hard(vec![], vec![]);
        assert!(matches!(purity(&l), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn nmi_examples() {
        let l = LabeledItems::anonymous_hard(vec![0, 0, 1, 1], vec![0, 1, 0, 1]);
        assert!(close(nmi(&l).unwrap(), 0.0));
        let l = LabeledItems::anonymous_hard(vec![3, 3, 9], vec![1, 1, 2]);
        assert!(close(nmi(&l).unwrap(), 1.0));
        let l = LabeledItems::anonymous_hard(vec![0, 0], vec![4, 4]);
        assert_eq!(nmi(&l).unwrap(), 1.0);
    }

    #[test]
    fn rand_index_examples() {
        let l = LabeledItems::anonymous_hard(vec![0, 0, 1], vec![0, 1, 1]);
        assert!(close(rand_index(&l).unwrap(), 1.0 / 3.0));
        let l = LabeledItems::anonymous_hard(vec![0], vec![0]);
        assert!(matches!(rand_index(&l), Err(EvalError::SingleItem)));
        let l = LabeledItems::anonymous_hard(vec![1, 1, 1], vec![2, 2, 2]);
        assert_eq!(rand_index(&l).unwrap(), 1.0);
    }

    #[test]
    fn fm_examples() {
        // Clusters {a,b} and {b,c}; classes {a,b} and {c}: table [[2,0],[1,1]].
        let l = LabeledItems::soft(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![0], vec![0, 1], vec![1]],
            vec![0, 0, 1],
        );
        let t = Contingency::new(&l);
        assert_eq!(t.cells, vec![vec![2, 0], vec![1, 1]]);
        assert!(close(fowlkes_mallows(&l).unwrap(), 1.0 / (2.0f64 * 3.0).sqrt()));
        assert!(matches!(purity(&l), Err(EvalError::SoftPrediction)));

        let l = LabeledItems::anonymous_hard(vec![0, 0, 1, 1], vec![0, 1, 0, 1]);
        assert_eq!(fowlkes_mallows(&l).unwrap(), 0.0);
        let l = LabeledItems::anonymous_hard(vec![0, 1], vec![0, 0]);
        assert!(matches!(fowlkes_mallows(&l), Err(EvalError::Degenerate)));
    }

    #[test]
    fn report_skips_undefined_metrics() {
        let l = LabeledItems::soft(
            vec!["a".into(), "b".into()],
            vec![vec![0, 1], vec![1]],
            vec![0, 0],
        );
        let r = evaluate(&l).unwrap();
        assert_eq!(r.purity, None);
        assert_eq!(r.n_clusters, 2);
        assert!(r.fm.is_some());
        let perfect = LabeledItems::anonymous_hard(vec![0, 0, 1, 1], vec![7, 7, 8, 8]);
        let r = evaluate(&perfect).unwrap();
        for v in [r.purity, r.nmi, r.rand_index, r.fm] {
            assert_eq!(v, Some(1.0));
        }
    }
}
