//! Single-pass bottom-up clustering of ranked triplet records.
//!
//! Records are visited in rank order. Each one joins the lowest-numbered
//! existing cluster with which it shares at least `min_entity_overlap`
//! entities or at least `min_column_overlap` columns; otherwise it starts a
//! new cluster. Clusters are never merged with each other.
//!
//! Overlaps are found through two inverted indexes (entity → cluster ids,
//! column → cluster ids). Postings are kept sorted, so the candidate lists of
//! a record can be merged in ascending id order and the scan stops at the
//! first qualifying cluster.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::extract::ColumnRef;
use crate::triplets::{EntityRecord, Triplet};

#[derive(Debug, thiserror::Error)]
pub enum ClusterError {
    #[error("postings reference unknown cluster {0}")]
    IndexInconsistent(u32),
    #[error("column {0} was not part of any clustered record")]
    UnknownColumn(ColumnRef),
    #[error("invalid cluster parameters: {0}")]
    InvalidParams(String),
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

/// Anything the clusterer can consume. Triplets and clusters share this
/// shape: a set of entities, the columns they co-occurred in, and the
/// domains they came from.
pub trait Record {
    fn entities(&self) -> &[String];
    fn columns(&self) -> &BTreeSet<ColumnRef>;
    fn domains(&self) -> &BTreeSet<String>;
    fn key(&self) -> String;
}

impl Record for Triplet {
    fn entities(&self) -> &[String] {
        &self.entities
    }
    fn columns(&self) -> &BTreeSet<ColumnRef> {
        &self.occurrences
    }
    fn domains(&self) -> &BTreeSet<String> {
        &self.domains
    }
    fn key(&self) -> String {
        Triplet::key(self)
    }
}

impl Record for EntityRecord {
    fn entities(&self) -> &[String] {
        std::slice::from_ref(&self.entity)
    }
    fn columns(&self) -> &BTreeSet<ColumnRef> {
        &self.occurrences
    }
    fn domains(&self) -> &BTreeSet<String> {
        &self.domains
    }
    fn key(&self) -> String {
        self.entity.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterParams {
    /// Records seen in fewer distinct domains are skipped.
    pub min_unique_domain: usize,
    pub min_entity_overlap: usize,
    pub min_column_overlap: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            min_unique_domain: 2,
            min_entity_overlap: 2,
            min_column_overlap: 2,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.min_unique_domain == 0 || self.min_entity_overlap == 0 || self.min_column_overlap == 0
        {
            return Err(ClusterError::InvalidParams(
                "all cluster thresholds must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A finished cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub cluster_id: u32,
    pub entities: BTreeSet<String>,
    pub columns: BTreeSet<ColumnRef>,
    pub domains: BTreeSet<String>,
    pub n_triplets: usize,
}

/// Which predicate placed a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchRule {
    Entity,
    Column,
    New,
}

impl MatchRule {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchRule::Entity => "ENTITY",
            MatchRule::Column => "COLUMN",
            MatchRule::New => "NEW",
        }
    }
}

/// Where one input record went. `record` indexes the clusterer's input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub record: usize,
    pub cluster_id: u32,
    pub rule: MatchRule,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterOutcome {
    pub clusters: Vec<Cluster>,
    /// One entry per processed record, in processing order.
    pub assignments: Vec<Assignment>,
}

/// String-keyed view of the inverted indexes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InvertedIndexes {
    pub entity: BTreeMap<String, Vec<u32>>,
    pub column: BTreeMap<ColumnRef, Vec<u32>>,
}

impl InvertedIndexes {
    /// Builds the indexes from scratch out of finished clusters.
    pub fn from_clusters(clusters: &[Cluster]) -> Self {
        let mut idx = Self::default();
        for c in clusters {
            for e in &c.entities {
                idx.entity.entry(e.clone()).or_default().push(c.cluster_id);
            }
            for col in &c.columns {
                idx.column.entry(*col).or_default().push(c.cluster_id);
            }
        }
        for list in idx.entity.values_mut().chain(idx.column.values_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        idx
    }
}

#[derive(Debug, Default)]
struct ClusterState {
    entities: Vec<u32>,
    columns: Vec<ColumnRef>,
    domains: Vec<u32>,
    n_records: usize,
}

/// Inserts `id` into a sorted postings list; returns false if present.
fn insert_sorted<T: Ord + Copy>(list: &mut Vec<T>, id: T) -> bool {
    match list.binary_search(&id) {
        Ok(_) => false,
        Err(pos) => {
            list.insert(pos, id);
            true
        }
    }
}

/// Incremental clusterer state.
#[derive(Debug)]
pub struct Clusterer {
    params: ClusterParams,
    entity_ids: HashMap<String, u32>,
    entity_names: Vec<String>,
    domain_ids: HashMap<String, u32>,
    domain_names: Vec<String>,
    entity_postings: Vec<Vec<u32>>,
    column_postings: HashMap<ColumnRef, Vec<u32>>,
    clusters: Vec<ClusterState>,
}

impl Clusterer {
    pub fn new(params: ClusterParams) -> Self {
        Self {
            params,
            entity_ids: HashMap::new(),
            entity_names: Vec::new(),
            domain_ids: HashMap::new(),
            domain_names: Vec::new(),
            entity_postings: Vec::new(),
            column_postings: HashMap::new(),
            clusters: Vec::new(),
        }
    }

    /// Seeds the state with existing clusters, which must be numbered
    /// `0..clusters.len()` in order.
    pub fn from_clusters(params: ClusterParams, clusters: &[Cluster]) -> Self {
        let mut this = Self::new(params);
        for (i, c) in clusters.iter().enumerate() {
            debug_assert_eq!(c.cluster_id as usize, i);
            let id = this.clusters.len() as u32;
            this.clusters.push(ClusterState::default());
            this.absorb(id, c.entities.iter(), c.columns.iter(), c.domains.iter());
            this.clusters[id as usize].n_records = c.n_triplets;
        }
        this
    }

    pub fn params(&self) -> &ClusterParams {
        &self.params
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    fn intern_entity(&mut self, e: &str) -> u32 {
        if let Some(&id) = self.entity_ids.get(e) {
            return id;
        }
        let id = self.entity_names.len() as u32;
        self.entity_ids.insert(e.to_string(), id);
        self.entity_names.push(e.to_string());
        self.entity_postings.push(Vec::new());
        id
    }

    fn intern_domain(&mut self, d: &str) -> u32 {
        if let Some(&id) = self.domain_ids.get(d) {
            return id;
        }
        let id = self.domain_names.len() as u32;
        self.domain_ids.insert(d.to_string(), id);
        self.domain_names.push(d.to_string());
        id
    }

    fn absorb<'a>(
        &mut self,
        cluster_id: u32,
        entities: impl Iterator<Item = &'a String>,
        columns: impl Iterator<Item = &'a ColumnRef>,
        domains: impl Iterator<Item = &'a String>,
    ) {
        for e in entities {
            let eid = self.intern_entity(e);
            if insert_sorted(&mut self.entity_postings[eid as usize], cluster_id) {
                self.clusters[cluster_id as usize].entities.push(eid);
            }
        }
        for col in columns {
            if insert_sorted(self.column_postings.entry(*col).or_default(), cluster_id) {
                self.clusters[cluster_id as usize].columns.push(*col);
            }
        }
        for d in domains {
            let did = self.intern_domain(d);
            insert_sorted(&mut self.clusters[cluster_id as usize].domains, did);
        }
    }

    /// Lowest cluster id satisfying either overlap threshold, found by a
    /// k-way merge of the record's postings lists.
    pub fn find_merge_target<R: Record + ?Sized>(
        &self,
        record: &R,
    ) -> Result<Option<(u32, MatchRule)>, ClusterError> {
        let mut lists: Vec<(&[u32], bool)> = Vec::new();
        for e in record.entities() {
            if let Some(&eid) = self.entity_ids.get(e.as_str()) {
                lists.push((&self.entity_postings[eid as usize], true));
            }
        }
        for col in record.columns() {
            if let Some(list) = self.column_postings.get(col) {
                lists.push((list, false));
            }
        }

        let mut heap: BinaryHeap<Reverse<(u32, usize)>> = lists
            .iter()
            .enumerate()
            .filter_map(|(i, (l, _))| l.first().map(|&id| Reverse((id, i))))
            .collect();
        let mut cursors = vec![0usize; lists.len()];

        while let Some(&Reverse((id, _))) = heap.peek() {
            if id as usize >= self.clusters.len() {
                return Err(ClusterError::IndexInconsistent(id));
            }
            let (mut entity_hits, mut column_hits) = (0usize, 0usize);
            while let Some(&Reverse((next, i))) = heap.peek() {
                if next != id {
                    break;
                }
                heap.pop();
                if lists[i].1 {
                    entity_hits += 1;
                } else {
                    column_hits += 1;
                }
                cursors[i] += 1;
                if let Some(&following) = lists[i].0.get(cursors[i]) {
                    heap.push(Reverse((following, i)));
                }
            }
            if entity_hits >= self.params.min_entity_overlap {
                return Ok(Some((id, MatchRule::Entity)));
            }
            if column_hits >= self.params.min_column_overlap {
                return Ok(Some((id, MatchRule::Column)));
            }
        }
        Ok(None)
    }

    /// Places one record, creating a cluster if nothing qualifies.
    pub fn assign<R: Record + ?Sized>(&mut self, record: &R) -> Result<(u32, MatchRule), ClusterError> {
        let (id, rule) = match self.find_merge_target(record)? {
            Some(hit) => hit,
            None => {
                self.clusters.push(ClusterState::default());
                ((self.clusters.len() - 1) as u32, MatchRule::New)
            }
        };
        self.absorb(
            id,
            record.entities().iter(),
            record.columns().iter(),
            record.domains().iter(),
        );
        self.clusters[id as usize].n_records += 1;
        Ok((id, rule))
    }

    /// Current indexes, keyed by strings.
    pub fn indexes(&self) -> InvertedIndexes {
        InvertedIndexes {
            entity: self
                .entity_names
                .iter()
                .zip(&self.entity_postings)
                .filter(|(_, p)| !p.is_empty())
                .map(|(n, p)| (n.clone(), p.clone()))
                .collect(),
            column: self
                .column_postings
                .iter()
                .map(|(c, p)| (*c, p.clone()))
                .collect(),
        }
    }

    pub fn clusters(&self) -> Vec<Cluster> {
        self.clusters
            .iter()
            .enumerate()
            .map(|(id, s)| Cluster {
                cluster_id: id as u32,
                entities: s
                    .entities
                    .iter()
                    .map(|&e| self.entity_names[e as usize].clone())
                    .collect(),
                columns: s.columns.iter().copied().collect(),
                domains: s
                    .domains
                    .iter()
                    .map(|&d| self.domain_names[d as usize].clone())
                    .collect(),
                n_triplets: s.n_records,
            })
            .collect()
    }
}

/// Clusters records given in rank order.
pub fn cluster<R: Record>(ranked: &[R], params: &ClusterParams) -> Result<ClusterOutcome, ClusterError> {
    params.validate()?;
    let mut clusterer = Clusterer::new(*params);
    let mut assignments = Vec::new();
    for (i, record) in ranked.iter().enumerate() {
        if record.domains().len() < params.min_unique_domain {
            continue;
        }
        let (cluster_id, rule) = clusterer.assign(record)?;
        assignments.push(Assignment {
            record: i,
            cluster_id,
            rule,
        });
    }
    Ok(ClusterOutcome {
        clusters: clusterer.clusters(),
        assignments,
    })
}

/// Entities of every clustered record that occurred in `column`.
pub fn reconstruct_column<R: Record>(
    column: ColumnRef,
    outcome: &ClusterOutcome,
    records: &[R],
) -> Result<BTreeSet<String>, ClusterError> {
    let mut found = false;
    let mut out = BTreeSet::new();
    for a in &outcome.assignments {
        let r = &records[a.record];
        if r.columns().contains(&column) {
            found = true;
            out.extend(r.entities().iter().cloned());
        }
    }
    if found {
        Ok(out)
    } else {
        Err(ClusterError::UnknownColumn(column))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ClusterError + '_ {
    move |source| ClusterError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes one JSON object per cluster.
pub fn write_clusters(path: &Path, clusters: &[Cluster]) -> Result<(), ClusterError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for c in clusters {
        let line = serde_json::to_string(c).expect("clusters serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_clusters(path: &Path) -> Result<Vec<Cluster>, ClusterError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| ClusterError::Format {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

/// Writes `key TAB cluster_id TAB rule` per processed record.
pub fn write_assignments<R: Record>(
    path: &Path,
    outcome: &ClusterOutcome,
    records: &[R],
) -> Result<(), ClusterError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for a in &outcome.assignments {
        writeln!(
            w,
            "{}\t{}\t{}",
            records[a.record].key(),
            a.cluster_id,
            a.rule.as_str()
        )
        .map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(e: [&str; 3], cols: &[(u32, u32)], doms: &[&str]) -> Triplet {
        let mut entities = e.map(str::to_string);
        entities.sort();
        Triplet {
            entities,
            occurrences: cols.iter().map(|&(a, b)| ColumnRef::new(a, b)).collect(),
            domains: doms.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn mk_cluster(id: u32, entities: &[&str], cols: &[(u32, u32)]) -> Cluster {
        Cluster {
            cluster_id: id,
            entities: entities.iter().map(|s| s.to_string()).collect(),
            columns: cols.iter().map(|&(a, b)| ColumnRef::new(a, b)).collect(),
            domains: ["d".to_string()].into(),
            n_triplets: 1,
        }
    }

    #[test]
    fn single_record_is_its_own_cluster() {
        let rec = t(["a", "b", "c"], &[(1, 1)], &["x", "y"]);
        let out = cluster(std::slice::from_ref(&rec), &ClusterParams::default()).unwrap();
        assert_eq!(out.clusters.len(), 1);
        let c = &out.clusters[0];
        assert_eq!(c.entities, rec.entities.iter().cloned().collect());
        assert_eq!(c.columns, rec.occurrences);
        assert_eq!(c.domains, rec.domains);
        assert_eq!(out.assignments[0].rule, MatchRule::New);
    }

    #[test]
    fn empty_input() {
        let out = cluster::<Triplet>(&[], &ClusterParams::default()).unwrap();
        assert!(out.clusters.is_empty());
    }

    #[test]
    fn low_domain_records_are_skipped() {
        let recs = [t(["a", "b", "c"], &[(1, 1)], &["x"])];
        let out = cluster(&recs, &ClusterParams::default()).unwrap();
        assert!(out.clusters.is_empty());
        assert!(out.assignments.is_empty());
    }

    #[test]
    fn lowest_id_wins_across_predicates() {
        // Clusters 0..=7; cluster 3 shares two columns, cluster 7 two entities.
        let mut clusters: Vec<Cluster> = (0..8)
            .map(|i| mk_cluster(i, &[&format!("z{i}")], &[(100 + i, 1)]))
            .collect();
        clusters[7] = mk_cluster(7, &["a", "b"], &[(107, 1)]);
        clusters[3] = mk_cluster(3, &["z3"], &[(5, 1), (5, 2)]);
        let c = Clusterer::from_clusters(ClusterParams::default(), &clusters);
        let rec = t(["a", "b", "q"], &[(5, 1), (5, 2)], &["d"]);
        // Oracle: linear scan over clusters in id order.
        let scan = clusters.iter().find(|cl| {
            rec.entities.iter().filter(|e| cl.entities.contains(*e)).count() >= 2
                || rec.occurrences.intersection(&cl.columns).count() >= 2
        });
        assert_eq!(scan.map(|c| c.cluster_id), Some(3));
        assert_eq!(c.find_merge_target(&rec).unwrap(), Some((3, MatchRule::Column)));
    }

    #[test]
    fn single_overlaps_do_not_qualify() {
        let clusters: Vec<Cluster> = (0..4)
            .map(|i| mk_cluster(i, &["a", &format!("u{i}")], &[(1, 1), (50 + i, 1)]))
            .collect();
        let c = Clusterer::from_clusters(ClusterParams::default(), &clusters);
        let rec = t(["a", "m", "n"], &[(1, 1), (9, 9)], &["d"]);
        assert_eq!(c.find_merge_target(&rec).unwrap(), None);
    }

    #[test]
    fn full_entity_overlap_hits_cluster_zero() {
        let clusters = vec![mk_cluster(0, &["a", "b", "c"], &[(1, 1)])];
        let c = Clusterer::from_clusters(ClusterParams::default(), &clusters);
        let rec = t(["a", "b", "c"], &[(2, 1)], &["d"]);
        assert_eq!(c.find_merge_target(&rec).unwrap(), Some((0, MatchRule::Entity)));
    }

    #[test]
    fn merges_union_all_fields() {
        let recs = [
            t(["a", "b", "c"], &[(1, 1)], &["x", "y"]),
            t(["b", "c", "d"], &[(2, 1)], &["y", "z"]),
        ];
        let out = cluster(&recs, &ClusterParams::default()).unwrap();
        assert_eq!(out.clusters.len(), 1);
        let c = &out.clusters[0];
        assert_eq!(c.entities.len(), 4);
        assert_eq!(c.columns.len(), 2);
        assert_eq!(c.domains.len(), 3);
        assert_eq!(c.n_triplets, 2);
        assert_eq!(out.assignments[1].rule, MatchRule::Entity);
    }

    #[test]
    fn indexes_match_rebuild() {
        let recs = [
            t(["a", "b", "c"], &[(1, 1)], &["x", "y"]),
            t(["d", "e", "f"], &[(1, 1), (2, 1)], &["x", "y"]),
            t(["c", "d", "g"], &[(1, 1), (2, 1)], &["x", "y"]),
            t(["a", "b", "h"], &[(3, 1)], &["x", "y"]),
        ];
        let mut c = Clusterer::new(ClusterParams::default());
        for r in &recs {
            c.assign(r).unwrap();
        }
        assert_eq!(c.indexes(), InvertedIndexes::from_clusters(&c.clusters()));
    }

    #[test]
    fn inconsistent_postings_are_reported() {
        let mut c = Clusterer::new(ClusterParams::default());
        c.column_postings.insert(ColumnRef::new(1, 1), vec![5]);
        let rec = t(["a", "b", "c"], &[(1, 1)], &["d"]);
        assert!(matches!(
            c.find_merge_target(&rec),
            Err(ClusterError::IndexInconsistent(5))
        ));
    }

    #[test]
    fn reconstruct_single_triplet_column() {
        let recs = [t(["a", "b", "c"], &[(4, 2)], &["x", "y"])];
        let out = cluster(&recs, &ClusterParams::default()).unwrap();
        let got = reconstruct_column(ColumnRef::new(4, 2), &out, &recs).unwrap();
        assert_eq!(got, ["a", "b", "c"].map(String::from).into());
        assert!(matches!(
            reconstruct_column(ColumnRef::new(9, 9), &out, &recs),
            Err(ClusterError::UnknownColumn(_))
        ));
    }

    #[test]
    fn params_must_be_positive() {
        let p = ClusterParams {
            min_entity_overlap: 0,
            ..ClusterParams::default()
        };
        assert!(cluster::<Triplet>(&[], &p).is_err());
    }
}
