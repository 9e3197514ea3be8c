//! Corpus summary: labeled sets with sample entities and provenance.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cluster::Cluster;
use crate::hypernym::RankedLabels;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportStats {
    pub n_tables: usize,
    pub n_tables_kept: usize,
    pub n_columns: usize,
    pub n_triplets: usize,
    pub n_clusters: usize,
    pub n_labeled_clusters: usize,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub cluster_id: u32,
    pub label: String,
    pub label_score: u64,
    /// First entities in lexicographic order.
    pub entities: Vec<String>,
    pub n_entities: usize,
    pub n_domains: usize,
    pub table_ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub stats: ReportStats,
    pub clusters: Vec<ReportEntry>,
}

/// One entry per labeled cluster, most widely published first.
pub fn emit_report(
    clusters: &[Cluster],
    labels: &[RankedLabels],
    top_entities: usize,
    mut stats: ReportStats,
) -> SummaryReport {
    let by_id: HashMap<u32, &RankedLabels> = labels.iter().map(|l| (l.cluster_id, l)).collect();
    let mut entries: Vec<(usize, ReportEntry)> = clusters
        .iter()
        .filter_map(|c| {
            let (label, score) = by_id.get(&c.cluster_id)?.top()?;
            let table_ids: BTreeSet<u32> = c.columns.iter().map(|col| col.table_id).collect();
            Some((
                c.domains.len(),
                ReportEntry {
                    cluster_id: c.cluster_id,
                    label: label.clone(),
                    label_score: *score,
                    entities: c.entities.iter().take(top_entities).cloned().collect(),
                    n_entities: c.entities.len(),
                    n_domains: c.domains.len(),
                    table_ids: table_ids.into_iter().collect(),
                },
            ))
        })
        .collect();
    entries.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cluster_id.cmp(&b.1.cluster_id)));
    stats.n_clusters = clusters.len();
    stats.n_labeled_clusters = entries.len();
    SummaryReport {
        stats,
        clusters: entries.into_iter().map(|e| e.1).collect(),
    }
}

/// Plain-text rendering of a report.
pub fn render_text(report: &SummaryReport) -> String {
    let s = &report.stats;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "tables: {} ({} kept)  columns: {}  triplets: {}",
        s.n_tables, s.n_tables_kept, s.n_columns, s.n_triplets
    );
    let _ = writeln!(
        out,
        "clusters: {} ({} labeled)  pairs: {}",
        s.n_clusters, s.n_labeled_clusters, s.n_pairs
    );
    for e in &report.clusters {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "[{}] {} (score {}, {} entities, {} domains)",
            e.cluster_id, e.label, e.label_score, e.n_entities, e.n_domains
        );
        let more = if e.n_entities > e.entities.len() { ", ..." } else { "" };
        let _ = writeln!(out, "  entities: {}{more}", e.entities.join(", "));
        let tables: Vec<String> = e.table_ids.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "  tables: {}", tables.join(", "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ColumnRef;

    fn cl(id: u32, entities: &[&str], tables: &[u32], n_domains: usize) -> Cluster {
        Cluster {
            cluster_id: id,
            entities: entities.iter().map(|s| s.to_string()).collect(),
            columns: tables.iter().map(|&t| ColumnRef::new(t, 1)).collect(),
            domains: (0..n_domains).map(|d| format!("d{d}")).collect(),
            n_triplets: 1,
        }
    }

    fn lab(id: u32, l: &str) -> RankedLabels {
        RankedLabels {
            cluster_id: id,
            labels: vec![(l.to_string(), 2)],
        }
    }

    #[test]
    fn orders_by_domains_then_id() {
        let clusters = vec![
            cl(0, &["a", "b", "c"], &[1], 1),
            cl(1, &["d", "e", "f"], &[2], 3),
            cl(2, &["g", "h", "i"], &[3, 4], 3),
            cl(3, &["x", "y", "z"], &[5], 9),
        ];
        let labels = vec![lab(0, "p"), lab(1, "q"), lab(2, "r"), RankedLabels { cluster_id: 3, labels: vec![] }];
        let r = emit_report(&clusters, &labels, 2, ReportStats::default());
        let ids: Vec<u32> = r.clusters.iter().map(|e| e.cluster_id).collect();
        assert_eq!(ids, vec![1, 2, 0]);
        assert_eq!(r.clusters[1].entities, vec!["g", "h"]);
        assert_eq!(r.clusters[1].table_ids, vec![3, 4]);
        assert_eq!(r.stats.n_clusters, 4);
        assert_eq!(r.stats.n_labeled_clusters, 3);
        let text = render_text(&r);
        assert!(text.contains("[2] r (score 2, 3 entities, 3 domains)"));
        assert!(text.contains("  entities: g, h, ..."));
    }

    #[test]
    fn empty_report_keeps_stats() {
        let r = emit_report(&[], &[], 10, ReportStats { n_tables: 4, ..Default::default() });
        assert!(r.clusters.is_empty());
        assert!(render_text(&r).starts_with("tables: 4 (0 kept)"));
    }
}
