//! Hypernym labels for clusters and the concept-instance pairs they yield.
//!
//! A label's score for a cluster is the number of distinct cluster entities
//! the hyponym dataset pairs it with. The top label is extended to every
//! entity of the cluster (WS); the extended variant (WSEXT) first drops
//! dataset support below a count threshold. DPM and DPMEXT are baselines
//! gated by a rank cutoff `K` and a coverage fraction `J`.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::Cluster;
use crate::hyponym::HyponymDataset;

#[derive(Debug, thiserror::Error)]
pub enum HypernymError {
    #[error("invalid labeling parameters: {0}")]
    InvalidParams(String),
    #[error("unknown label source {0:?}")]
    UnknownSource(String),
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

/// Labels of one cluster, best first. Zero scores never appear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedLabels {
    pub cluster_id: u32,
    pub labels: Vec<(String, u64)>,
}

impl RankedLabels {
    pub fn top(&self) -> Option<&(String, u64)> {
        self.labels.first()
    }

    pub fn truncated(&self, n: usize) -> Self {
        Self {
            cluster_id: self.cluster_id,
            labels: self.labels.iter().take(n).cloned().collect(),
        }
    }
}

/// Ranks candidate labels for a cluster by distinct supporting entities,
/// ties broken by label.
pub fn recommend(cluster: &Cluster, h: &HyponymDataset) -> RankedLabels {
    let mut scores: HashMap<&str, u64> = HashMap::new();
    for entity in &cluster.entities {
        for (concept, _) in h.lookup(entity) {
            *scores.entry(concept).or_default() += 1;
        }
    }
    let mut labels: Vec<(String, u64)> = scores
        .into_iter()
        .map(|(l, s)| (l.to_string(), s))
        .collect();
    labels.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    RankedLabels {
        cluster_id: cluster.cluster_id,
        labels,
    }
}

/// [`recommend`] over every cluster, in input order.
pub fn recommend_all(clusters: &[Cluster], h: &HyponymDataset) -> Vec<RankedLabels> {
    clusters.par_iter().map(|c| recommend(c, h)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LabelSource {
    Ws,
    WsExt,
    Dpm,
    DpmExt,
}

impl LabelSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelSource::Ws => "WS",
            LabelSource::WsExt => "WSEXT",
            LabelSource::Dpm => "DPM",
            LabelSource::DpmExt => "DPMEXT",
        }
    }
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelSource {
    type Err = HypernymError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "WS" => Ok(LabelSource::Ws),
            "WSEXT" => Ok(LabelSource::WsExt),
            "DPM" => Ok(LabelSource::Dpm),
            "DPMEXT" => Ok(LabelSource::DpmExt),
            _ => Err(HypernymError::UnknownSource(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConceptInstancePair {
    pub concept: String,
    pub instance: String,
    pub source: LabelSource,
    pub cluster_id: u32,
    /// Score of `concept` for the cluster.
    pub score: u64,
}

/// Top label of every labeled cluster, paired with each of its entities.
/// With `min_count`, dataset pairs seen fewer times are ignored first.
pub fn ws_pairs(
    clusters: &[Cluster],
    h: &HyponymDataset,
    min_count: Option<u64>,
) -> Vec<ConceptInstancePair> {
    let filtered;
    let (h, source) = match min_count {
        Some(n) => {
            filtered = h.filter_min_count(n);
            (&filtered, LabelSource::WsExt)
        }
        None => (h, LabelSource::Ws),
    };
    clusters
        .par_iter()
        .flat_map_iter(|c| {
            let top = recommend(c, h).labels.into_iter().next();
            top.into_iter().flat_map(move |(label, score)| {
                c.entities.iter().map(move |x| ConceptInstancePair {
                    concept: label.clone(),
                    instance: x.clone(),
                    source,
                    cluster_id: c.cluster_id,
                    score,
                })
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpmParams {
    /// Rank cutoff; `None` keeps every label.
    pub k_threshold: Option<usize>,
    /// Minimum fraction of cluster entities a label must cover.
    pub j_threshold: f64,
    pub extend: bool,
}

impl Default for DpmParams {
    fn default() -> Self {
        Self {
            k_threshold: Some(5),
            j_threshold: 0.2,
            extend: false,
        }
    }
}

impl DpmParams {
    pub fn validate(&self) -> Result<(), HypernymError> {
        if !(0.0..=1.0).contains(&self.j_threshold) {
            return Err(HypernymError::InvalidParams(format!(
                "j_threshold {} outside [0, 1]",
                self.j_threshold
            )));
        }
        if self.k_threshold == Some(0) {
            return Err(HypernymError::InvalidParams("k_threshold must be at least 1".into()));
        }
        Ok(())
    }
}

const COVERAGE_EPS: f64 = 1e-12;

/// Labels among the top `K` covering at least a `J` fraction of the cluster.
/// DPM pairs a label only with entities the dataset already pairs it with;
/// DPMEXT pairs it with every entity.
pub fn dpm_pairs(
    clusters: &[Cluster],
    h: &HyponymDataset,
    p: &DpmParams,
) -> Result<Vec<ConceptInstancePair>, HypernymError> {
    p.validate()?;
    let source = if p.extend {
        LabelSource::DpmExt
    } else {
        LabelSource::Dpm
    };
    Ok(clusters
        .par_iter()
        .flat_map_iter(|c| {
            let n = c.entities.len().max(1) as f64;
            let ranked = recommend(c, h);
            let mut out = Vec::new();
            for (label, score) in ranked.labels.iter().take(p.k_threshold.unwrap_or(usize::MAX)) {
                if (*score as f64) / n + COVERAGE_EPS < p.j_threshold {
                    continue;
                }
                for x in &c.entities {
                    if p.extend || h.lookup(x).iter().any(|(l, _)| l == label) {
                        out.push(ConceptInstancePair {
                            concept: label.clone(),
                            instance: x.clone(),
                            source,
                            cluster_id: c.cluster_id,
                            score: *score,
                        });
                    }
                }
            }
            out
        })
        .collect())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HypernymError + '_ {
    move |source| HypernymError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `concept TAB instance TAB source TAB cluster_id TAB score`.
pub fn write_pairs(path: &Path, pairs: &[ConceptInstancePair]) -> Result<(), HypernymError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for p in pairs {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            p.concept, p.instance, p.source, p.cluster_id, p.score
        )
        .map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_pairs(path: &Path) -> Result<Vec<ConceptInstancePair>, HypernymError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let bad = |message: String| HypernymError::Format {
                path: path.display().to_string(),
                line: i + 1,
                message,
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(bad(format!("expected 5 fields, found {}", f.len())));
            }
            Ok(ConceptInstancePair {
                concept: f[0].to_string(),
                instance: f[1].to_string(),
                source: f[2].parse().map_err(|e: HypernymError| bad(e.to_string()))?,
                cluster_id: f[3].parse().map_err(|_| bad(format!("bad cluster id {:?}", f[3])))?,
                score: f[4].parse().map_err(|_| bad(format!("bad score {:?}", f[4])))?,
            })
        })
        .collect()
}

/// Writes one JSON object per cluster with its top `n` labels.
pub fn write_labels(path: &Path, labels: &[RankedLabels], n: usize) -> Result<(), HypernymError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for l in labels {
        let line = serde_json::to_string(&l.truncated(n)).expect("labels serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_labels(path: &Path) -> Result<Vec<RankedLabels>, HypernymError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| HypernymError::Format {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeSet, HashSet};

    fn cl(id: u32, entities: &[&str]) -> Cluster {
        Cluster {
            cluster_id: id,
            entities: entities.iter().map(|s| s.to_string()).collect(),
            columns: BTreeSet::new(),
            domains: BTreeSet::new(),
            n_triplets: 1,
        }
    }

    fn example() -> HyponymDataset {
        HyponymDataset::from_counts([
            ("usa", "country", 1000),
            ("india", "country", 200),
            ("paris", "city", 100),
            ("paris", "tourist_place", 50),
            ("monkey", "animal", 100),
            ("monkey", "mammal", 60),
            ("sparrow", "bird", 33),
        ])
    }

    fn labels(r: &RankedLabels) -> Vec<(&str, u64)> {
        r.labels.iter().map(|(l, s)| (l.as_str(), *s)).collect()
    }

    #[test]
    fn recommend_ranks_by_support() {
        let r = recommend(&cl(0, &["usa", "india", "paris"]), &example());
        assert_eq!(
            labels(&r),
            vec![("country", 2), ("city", 1), ("tourist_place", 1)]
        );
        assert!(recommend(&cl(1, &["zebra"]), &example()).labels.is_empty());
    }

    #[test]
    fn ws_extends_to_whole_cluster() {
        let pairs = ws_pairs(&[cl(0, &["usa", "india", "canada"]), cl(1, &["x"])], &example(), None);
        assert_eq!(pairs.len(), 3);
        assert!(pairs
            .iter()
            .any(|p| p.concept == "country" && p.instance == "canada" && p.score == 2));
        assert!(pairs.iter().all(|p| p.source == LabelSource::Ws));
    }

    #[test]
    fn wsext_drops_weak_support() {
        let h = HyponymDataset::from_counts([
            ("a", "alpha", 3),
            ("b", "alpha", 3),
            ("a", "beta", 9),
        ]);
        let c = [cl(0, &["a", "b"])];
        assert_eq!(ws_pairs(&c, &h, None)[0].concept, "alpha");
        let ext = ws_pairs(&c, &h, Some(5));
        assert_eq!(ext.len(), 2);
        assert!(ext.iter().all(|p| p.concept == "beta" && p.source == LabelSource::WsExt));
        assert_eq!(
            labels(&recommend(&c[0], &h.filter_min_count(5))),
            vec![("beta", 1)]
        );
    }

    #[test]
    fn dpm_coverage_boundary_is_inclusive() {
        let names: Vec<String> = (0..10).map(|i| format!("e{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let h = HyponymDataset::from_counts([("e0", "city", 1), ("e1", "city", 1)]);
        let c = [cl(0, &refs)];
        let p = DpmParams::default();
        let pairs = dpm_pairs(&c, &h, &p).unwrap();
        assert_eq!(pairs.len(), 2);
        let ext = dpm_pairs(&c, &h, &DpmParams { extend: true, ..p }).unwrap();
        assert_eq!(ext.len(), 10);
        let strict = DpmParams {
            j_threshold: 0.21,
            ..p
        };
        assert!(dpm_pairs(&c, &h, &strict).unwrap().is_empty());
    }

    #[test]
    fn dpm_vacuous_thresholds_emit_all_dataset_pairs() {
        let h = example();
        let c = [cl(0, &["usa", "india", "paris", "canada"])];
        let p = DpmParams {
            k_threshold: None,
            j_threshold: 0.0,
            extend: false,
        };
        let got: HashSet<(String, String)> = dpm_pairs(&c, &h, &p)
            .unwrap()
            .into_iter()
            .map(|p| (p.concept, p.instance))
            .collect();
        let mut want = HashSet::new();
        for x in &c[0].entities {
            for (l, _) in h.lookup(x) {
                want.insert((l.clone(), x.clone()));
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn params_validate() {
        let bad = DpmParams {
            j_threshold: 1.5,
            ..DpmParams::default()
        };
        assert!(bad.validate().is_err());
        assert!(DpmParams {
            k_threshold: Some(0),
            ..DpmParams::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn pairs_tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.tsv");
        let pairs = ws_pairs(&[cl(4, &["usa", "india"])], &example(), None);
        write_pairs(&p, &pairs).unwrap();
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            "country\tindia\tWS\t4\t2\ncountry\tusa\tWS\t4\t2\n"
        );
        assert_eq!(read_pairs(&p).unwrap(), pairs);

        let l = dir.path().join("labels.jsonl");
        let ranked = recommend_all(&[cl(0, &["usa", "india", "paris"])], &example());
        write_labels(&l, &ranked, 1).unwrap();
        assert_eq!(read_labels(&l).unwrap()[0].labels, vec![("country".to_string(), 2)]);
    }

    #[test]
    fn source_names() {
        for s in [LabelSource::Ws, LabelSource::WsExt, LabelSource::Dpm, LabelSource::DpmExt] {
            assert_eq!(s.as_str().parse::<LabelSource>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
        }
        assert!("nope".parse::<LabelSource>().is_err());
    }
}
