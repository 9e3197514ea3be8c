//! Shared fixtures and oracles for integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use setminer::cluster::{Assignment, Cluster, ClusterParams, MatchRule, Record};
use setminer::extract::TableColumn;
use setminer::ColumnRef;

/// Plain linear-scan clusterer: every record is compared against every
/// existing cluster in creation order; no indexes.
pub fn reference_cluster<R: Record>(
    ranked: &[R],
    params: &ClusterParams,
) -> (Vec<Cluster>, Vec<Assignment>) {
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut log = Vec::new();
    for (i, r) in ranked.iter().enumerate() {
        if r.domains().len() < params.min_unique_domain {
            continue;
        }
        let mut target = None;
        for c in &clusters {
            let shared_entities = r.entities().iter().filter(|e| c.entities.contains(*e)).count();
            let shared_columns = r.columns().intersection(&c.columns).count();
            if shared_entities >= params.min_entity_overlap {
                target = Some((c.cluster_id, MatchRule::Entity));
                break;
            }
            if shared_columns >= params.min_column_overlap {
                target = Some((c.cluster_id, MatchRule::Column));
                break;
            }
        }
        let (id, rule) = target.unwrap_or_else(|| {
            let id = clusters.len() as u32;
            clusters.push(Cluster {
                cluster_id: id,
                entities: BTreeSet::new(),
                columns: BTreeSet::new(),
                domains: BTreeSet::new(),
                n_triplets: 0,
            });
            (id, MatchRule::New)
        });
        let c = &mut clusters[id as usize];
        c.entities.extend(r.entities().iter().cloned());
        c.columns.extend(r.columns().iter().copied());
        c.domains.extend(r.domains().iter().cloned());
        c.n_triplets += 1;
        log.push(Assignment {
            record: i,
            cluster_id: id,
            rule,
        });
    }
    (clusters, log)
}

pub fn clusters_ndjson(clusters: &[Cluster]) -> String {
    clusters
        .iter()
        .map(|c| serde_json::to_string(c).unwrap() + "\n")
        .collect()
}

pub fn column(table_id: u32, col: u32, domain: &str, cells: &[&str]) -> TableColumn {
    TableColumn {
        table_id,
        column_index: col,
        domain: domain.to_string(),
        cells: cells.iter().map(|s| s.to_string()).collect(),
    }
}

/// The two country/capital tables: table 21 on www.dom1.com, table 34 on
/// www.dom2.com, entity columns 1 and 2.
pub fn country_capital_columns() -> Vec<TableColumn> {
    vec![
        column(21, 1, "www.dom1.com", &["India", "China", "Canada", "France"]),
        column(21, 2, "www.dom1.com", &["Delhi", "Beijing", "Ottawa", "Paris"]),
        column(34, 1, "www.dom2.com", &["China", "Canada", "France", "England"]),
        column(34, 2, "www.dom2.com", &["Beijing", "Ottawa", "Paris", "London"]),
    ]
}

pub fn country_capital_html() -> (String, String) {
    let t21 = "<html><body><table>\
        <tr><th>Country</th><th>Capital City</th></tr>\
        <tr><td>India</td><td>Delhi</td></tr>\
        <tr><td>China</td><td>Beijing</td></tr>\
        <tr><td>Canada</td><td>Ottawa</td></tr>\
        <tr><td>France</td><td>Paris</td></tr>\
        </table></body></html>";
    let t34 = "<html><body><table>\
        <tr><th>Country</th><th>Capital</th></tr>\
        <tr><td>China</td><td>Beijing</td></tr>\
        <tr><td>Canada</td><td>Ottawa</td></tr>\
        <tr><td>France</td><td>Paris</td></tr>\
        <tr><td>England</td><td>London</td></tr>\
        </table></body></html>";
    (t21.to_string(), t34.to_string())
}

/// Random columns over a small vocabulary so that windows collide across
/// columns and domains.
pub fn random_columns(rng: &mut ChaCha8Rng, n_columns: usize, vocab: usize) -> Vec<TableColumn> {
    let domains: Vec<String> = (0..6).map(|i| format!("d{i}.com")).collect();
    (0..n_columns)
        .map(|i| {
            let len = rng.random_range(3..12);
            let cells = (0..len)
                .map(|_| format!("e{}", rng.random_range(0..vocab)))
                .collect();
            TableColumn {
                table_id: (i / 2) as u32,
                column_index: (i % 2) as u32 + 1,
                domain: domains.choose(rng).unwrap().clone(),
                cells,
            }
        })
        .collect()
}

/// Synthetic corpus of roughly `n_cells` cells: columns are contiguous
/// slices of per-concept entity lists, spread over many domains.
pub fn synthetic_corpus(n_cells: usize, seed: u64) -> Vec<TableColumn> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let concept_size = 200;
    let n_concepts = (n_cells / 2000).max(10);
    let n_domains = (n_cells / 100).max(50);
    let mut out = Vec::new();
    let mut total = 0;
    let mut table_id = 0u32;
    while total < n_cells {
        let concept = rng.random_range(0..n_concepts);
        let len = rng.random_range(5..16).min(n_cells - total).max(3);
        let start = rng.random_range(0..concept_size - len);
        let cells = (start..start + len).map(|j| format!("c{concept}x{j}")).collect();
        out.push(TableColumn {
            table_id,
            column_index: 1,
            domain: format!("site{}.org", rng.random_range(0..n_domains)),
            cells,
        });
        table_id += 1;
        total += len;
    }
    out
}

pub fn column_ref(s: &str) -> ColumnRef {
    s.parse().unwrap()
}

/// Brute-force metric oracles over explicit items and pairs.
pub mod oracle {
    use std::collections::{BTreeMap, BTreeSet};

    pub fn purity(pred: &[u32], truth: &[u32]) -> f64 {
        let clusters: BTreeSet<u32> = pred.iter().copied().collect();
        let mut hits = 0;
        for k in clusters {
            let mut best = 0;
            for &c in truth {
                let n = pred.iter().zip(truth).filter(|(p, t)| **p == k && **t == c).count();
                best = best.max(n);
            }
            hits += best;
        }
        hits as f64 / pred.len() as f64
    }

    fn entropy(labels: &[u32]) -> f64 {
        let n = labels.len() as f64;
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for l in labels {
            *counts.entry(*l).or_default() += 1.0;
        }
        counts.values().map(|c| -(c / n) * (c / n).ln()).sum()
    }

    pub fn nmi(pred: &[u32], truth: &[u32]) -> f64 {
        let n = pred.len() as f64;
        let mut joint: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for (p, t) in pred.iter().zip(truth) {
            *joint.entry((*p, *t)).or_default() += 1.0;
        }
        let mut mi = 0.0;
        for (&(p, t), &nij) in &joint {
            let np = pred.iter().filter(|x| **x == p).count() as f64;
            let nt = truth.iter().filter(|x| **x == t).count() as f64;
            mi += (nij / n) * ((nij / n) / ((np / n) * (nt / n))).ln();
        }
        let h = (entropy(pred) + entropy(truth)) / 2.0;
        if h == 0.0 {
            1.0
        } else {
            mi / h
        }
    }

    pub fn rand_index(pred: &[u32], truth: &[u32]) -> f64 {
        let (mut agree, mut total) = (0u64, 0u64);
        for i in 0..pred.len() {
            for j in i + 1..pred.len() {
                total += 1;
                if (pred[i] == pred[j]) == (truth[i] == truth[j]) {
                    agree += 1;
                }
            }
        }
        agree as f64 / total as f64
    }

    /// Pairs of (item, cluster) incidences: same cluster and class, same
    /// cluster, same class.
    pub fn fowlkes_mallows(pred: &[Vec<u32>], truth: &[u32]) -> Option<f64> {
        let inc: Vec<(u32, u32)> = pred
            .iter()
            .zip(truth)
            .flat_map(|(ps, t)| ps.iter().map(move |p| (*p, *t)))
            .collect();
        let (mut both, mut cluster, mut class) = (0u64, 0u64, 0u64);
        for i in 0..inc.len() {
            for j in i + 1..inc.len() {
                let sc = inc[i].0 == inc[j].0;
                let st = inc[i].1 == inc[j].1;
                both += (sc && st) as u64;
                cluster += sc as u64;
                class += st as u64;
            }
        }
        (cluster > 0 && class > 0).then(|| both as f64 / ((cluster * class) as f64).sqrt())
    }
}

/// Dense Lloyd's algorithm with the same seeding, tie and re-seeding rules
/// as the library implementation.
pub fn reference_lloyd(vectors: &[Vec<u32>], k: usize, seed: u64, max_iters: usize) -> Vec<u32> {
    let dim = vectors.iter().flatten().map(|&f| f as usize + 1).max().unwrap_or(0);
    let dense: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| {
            let mut d = vec![0.0; dim];
            for &f in v {
                d[f as usize] = 1.0;
            }
            d
        })
        .collect();
    let cos_dist = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            1.0
        } else {
            1.0 - dot / (na * nb)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = rand::seq::index::sample(&mut rng, vectors.len(), k)
        .into_iter()
        .map(|i| dense[i].clone())
        .collect();
    let mut assignment = vec![u32::MAX; vectors.len()];
    for _ in 0..max_iters.max(1) {
        let mut next = Vec::new();
        let mut dist = Vec::new();
        for x in &dense {
            let mut best = (0, f64::INFINITY);
            for (c, cen) in centroids.iter().enumerate() {
                let d = cos_dist(x, cen);
                if d < best.1 {
                    best = (c, d);
                }
            }
            next.push(best.0 as u32);
            dist.push(best.1);
        }
        for empty in 0..k as u32 {
            if next.contains(&empty) {
                continue;
            }
            let mut pick: Option<usize> = None;
            for i in 0..next.len() {
                let spare = next.iter().filter(|&&a| a == next[i]).count() > 1;
                if spare && pick.is_none_or(|p| dist[i] > dist[p]) {
                    pick = Some(i);
                }
            }
            if let Some(i) = pick {
                next[i] = empty;
                dist[i] = 0.0;
            }
        }
        let changed = next != assignment;
        assignment = next;
        for (c, cen) in centroids.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = dense
                .iter()
                .zip(&assignment)
                .filter(|(_, a)| **a == c as u32)
                .map(|(v, _)| v)
                .collect();
            *cen = vec![0.0; dim];
            for m in &members {
                for (a, b) in cen.iter_mut().zip(m.iter()) {
                    *a += b;
                }
            }
            for a in cen.iter_mut() {
                *a /= members.len().max(1) as f64;
            }
        }
        if !changed {
            break;
        }
    }
    assignment
}

/// Random hard clustering of `n` items with up to `k` clusters and `c`
/// classes.
pub fn random_labeling(rng: &mut ChaCha8Rng, n: usize, k: u32, c: u32) -> (Vec<u32>, Vec<u32>) {
    let pred = (0..n).map(|_| rng.random_range(0..k)).collect();
    let truth = (0..n).map(|_| rng.random_range(0..c)).collect();
    (pred, truth)
}
