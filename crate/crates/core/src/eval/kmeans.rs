//! Lloyd's K-means with cosine distance over sparse binary vectors.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::cluster::Record;
use crate::ColumnRef;

/// Sorted, duplicate-free indices of the set features.
pub type SparseBinary = Vec<u32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
}

/// Column-occurrence vectors: one feature per distinct column, numbered in
/// column order.
pub fn occurrence_vectors<R: Record>(records: &[R]) -> Vec<SparseBinary> {
    let mut ids: BTreeMap<ColumnRef, u32> = BTreeMap::new();
    for r in records {
        for c in r.columns() {
            ids.insert(*c, 0);
        }
    }
    for (i, v) in ids.values_mut().enumerate() {
        *v = i as u32;
    }
    records
        .iter()
        .map(|r| r.columns().iter().map(|c| ids[c]).collect())
        .collect()
}

#[derive(Debug, Clone, Default)]
struct Centroid {
    /// Sorted by feature.
    weights: Vec<(u32, f64)>,
    norm: f64,
}

impl Centroid {
    fn from_item(v: &[u32]) -> Self {
        Self {
            weights: v.iter().map(|&f| (f, 1.0)).collect(),
            norm: (v.len() as f64).sqrt(),
        }
    }

    fn mean(members: &[&SparseBinary]) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for m in members {
            for &f in m.iter() {
                *acc.entry(f).or_default() += 1.0;
            }
        }
        let n = members.len() as f64;
        let weights: Vec<(u32, f64)> = acc.into_iter().map(|(f, w)| (f, w / n)).collect();
        let norm = weights.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        Self { weights, norm }
    }

    fn distance(&self, v: &[u32]) -> f64 {
        if v.is_empty() || self.norm == 0.0 {
            return 1.0;
        }
        let (mut i, mut j, mut dot) = (0, 0, 0.0);
        while i < v.len() && j < self.weights.len() {
            match v[i].cmp(&self.weights[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    dot += self.weights[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        1.0 - dot / ((v.len() as f64).sqrt() * self.norm)
    }
}

fn nearest(centroids: &[Centroid], v: &[u32]) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = c.distance(v);
        if d < best.1 {
            best = (i as u32, d);
        }
    }
    best
}

/// Hard K-means. Initial centroids are `k` distinct items drawn with
/// ChaCha8 seeded by `seed`; ties go to the lower centroid index; a
/// centroid that loses all its members is moved onto the item farthest
/// from its current centroid.
pub fn kmeans(vectors: &[SparseBinary], p: &KMeansParams) -> Result<Vec<u32>, EvalError> {
    let n = vectors.len();
    if p.k == 0 {
        return Err(EvalError::InvalidParams("k must be at least 1".into()));
    }
    if p.k > n {
        return Err(EvalError::KTooLarge { k: p.k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut centroids: Vec<Centroid> = rand::seq::index::sample(&mut rng, n, p.k)
        .into_iter()
        .map(|i| Centroid::from_item(&vectors[i]))
        .collect();

    let mut assignment: Vec<u32> = vec![u32::MAX; n];
    for _ in 0..p.max_iters.max(1) {
        let nearest: Vec<(u32, f64)> = vectors.par_iter().map(|v| nearest(&centroids, v)).collect();
        let mut next: Vec<u32> = nearest.iter().map(|x| x.0).collect();
        let mut dist: Vec<f64> = nearest.iter().map(|x| x.1).collect();

        let mut sizes = vec![0usize; p.k];
        for &a in &next {
            sizes[a as usize] += 1;
        }
        for empty in 0..p.k {
            if sizes[empty] > 0 {
                continue;
            }
            // Farthest item whose cluster can spare it.
            let pick = (0..n)
                .filter(|&i| sizes[next[i] as usize] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
            if let Some(i) = pick {
                sizes[next[i] as usize] -= 1;
                next[i] = empty as u32;
                sizes[empty] = 1;
                dist[i] = 0.0;
            }
        }

        let changed = next != assignment;
        assignment = next;
        let mut members: Vec<Vec<&SparseBinary>> = vec![Vec::new(); p.k];
        for (v, &a) in vectors.iter().zip(&assignment) {
            members[a as usize].push(v);
        }
        centroids = members.iter().map(|m| Centroid::mean(m)).collect();
        if !changed {
            break;
        }
    }
    Ok(assignment)
}
