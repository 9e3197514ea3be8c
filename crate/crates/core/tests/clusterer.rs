mod common;

use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use setminer::cluster::{
    cluster, reconstruct_column, ClusterParams, Clusterer, InvertedIndexes, MatchRule, Record,
};
use setminer::triplets::{simple_lowercase, TripletStore};

use common::*;

fn random_ranked(seed: u64, n_columns: usize, vocab: usize) -> Vec<setminer::triplets::Triplet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = random_columns(&mut rng, n_columns, vocab);
    TripletStore::from_columns(&cols).rank().into_inner()
}

#[test]
fn fifty_triplets_match_reference() {
    let mut ranked = random_ranked(7, 40, 25);
    ranked.truncate(50);
    assert_eq!(ranked.len(), 50);
    let params = ClusterParams {
        min_unique_domain: 1,
        ..ClusterParams::default()
    };
    let out = cluster(&ranked, &params).unwrap();
    let (clusters, log) = reference_cluster(&ranked, &params);
    assert_eq!(clusters_ndjson(&out.clusters), clusters_ndjson(&clusters));
    assert_eq!(out.assignments, log);
}

#[test]
fn country_capital_clusters() {
    let ranked = TripletStore::from_columns(&country_capital_columns()).rank();
    let params = ClusterParams {
        min_unique_domain: 1,
        ..ClusterParams::default()
    };
    let out = cluster(&ranked, &params).unwrap();
    assert_eq!(out.clusters.len(), 2);
    let sets: BTreeSet<BTreeSet<&str>> = out
        .clusters
        .iter()
        .map(|c| c.entities.iter().map(String::as_str).collect())
        .collect();
    let countries: BTreeSet<&str> = ["canada", "china", "england", "france", "india"].into();
    let capitals: BTreeSet<&str> = ["beijing", "delhi", "london", "ottawa", "paris"].into();
    assert_eq!(sets, [countries, capitals].into());

    let col = reconstruct_column(column_ref("21:1"), &out, &ranked).unwrap();
    let expected: BTreeSet<String> = ["india", "china", "canada", "france"]
        .map(String::from)
        .into();
    assert_eq!(col, expected);
}

#[test]
fn default_domain_threshold_keeps_only_shared_triplets() {
    let ranked = TripletStore::from_columns(&country_capital_columns()).rank();
    let out = cluster(&ranked, &ClusterParams::default()).unwrap();
    assert_eq!(out.assignments.len(), 2);
    assert_eq!(out.clusters.len(), 2);
}

#[test]
fn reconstruct_matches_column_contents() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    // Large vocabulary keeps repeated entities inside a window rare.
    let cols = random_columns(&mut rng, 60, 500);
    let ranked = TripletStore::from_columns(&cols).rank();
    let params = ClusterParams {
        min_unique_domain: 1,
        ..ClusterParams::default()
    };
    let out = cluster(&ranked, &params).unwrap();
    for col in &cols {
        let lowered: Vec<String> = col.cells.iter().map(|c| simple_lowercase(c)).collect();
        let mut expected = BTreeSet::new();
        for w in lowered.windows(3) {
            if w[0] != w[1] && w[1] != w[2] && w[0] != w[2] {
                expected.extend(w.iter().cloned());
            }
        }
        match reconstruct_column(col.column_ref(), &out, &ranked) {
            Ok(got) => assert_eq!(got, expected, "column {}", col.column_ref()),
            Err(_) => assert!(expected.is_empty()),
        }
    }
}

#[test]
fn unknown_column_is_an_error() {
    let ranked = TripletStore::from_columns(&country_capital_columns()).rank();
    let out = cluster(&ranked, &ClusterParams::default()).unwrap();
    assert!(reconstruct_column(column_ref("99:9"), &out, &ranked).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_reference_and_invariants(
        seed in any::<u64>(),
        n_columns in 1usize..200,
        vocab in 5usize..80,
        min_dom in 1usize..3,
        min_ent in 1usize..4,
        min_col in 1usize..3,
    ) {
        let ranked = random_ranked(seed, n_columns, vocab);
        prop_assume!(ranked.len() <= 1000);
        let params = ClusterParams {
            min_unique_domain: min_dom,
            min_entity_overlap: min_ent,
            min_column_overlap: min_col,
        };
        let out = cluster(&ranked, &params).unwrap();
        let (clusters, log) = reference_cluster(&ranked, &params);
        prop_assert_eq!(clusters_ndjson(&out.clusters), clusters_ndjson(&clusters));
        prop_assert_eq!(&out.assignments, &log);

        // Partition: each eligible record appears exactly once.
        let eligible: Vec<usize> = ranked
            .iter()
            .enumerate()
            .filter(|(_, r)| r.domains.len() >= min_dom)
            .map(|(i, _)| i)
            .collect();
        let assigned: Vec<usize> = out.assignments.iter().map(|a| a.record).collect();
        prop_assert_eq!(assigned, eligible);
        let total: usize = out.clusters.iter().map(|c| c.n_triplets).sum();
        prop_assert_eq!(total, out.assignments.len());

        // Threshold soundness, replayed against the cluster state at merge time.
        let mut replay = Clusterer::new(params);
        for a in &out.assignments {
            let r = &ranked[a.record];
            if a.rule != MatchRule::New {
                let state = &replay.clusters()[a.cluster_id as usize];
                let ents = r.entities().iter().filter(|e| state.entities.contains(*e)).count();
                let cols = r.columns().intersection(&state.columns).count();
                match a.rule {
                    MatchRule::Entity => prop_assert!(ents >= min_ent),
                    MatchRule::Column => prop_assert!(cols >= min_col),
                    MatchRule::New => unreachable!(),
                }
            }
            prop_assert_eq!(replay.assign(r).unwrap(), (a.cluster_id, a.rule));
        }

        // Index consistency.
        prop_assert_eq!(replay.indexes(), InvertedIndexes::from_clusters(&out.clusters));

        // Determinism.
        let again = cluster(&ranked, &params).unwrap();
        prop_assert_eq!(again, out);
    }
}

#[test]
fn entity_records_cluster_like_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cols = random_columns(&mut rng, 80, 40);
    let records = setminer::triplets::entity_records(&cols);
    let params = ClusterParams {
        min_unique_domain: 1,
        min_entity_overlap: 1,
        min_column_overlap: 1,
    };
    let out = cluster(&records, &params).unwrap();
    let (clusters, _) = reference_cluster(&records, &params);
    assert_eq!(clusters_ndjson(&out.clusters), clusters_ndjson(&clusters));
    let mut seen: HashMap<&str, u32> = HashMap::new();
    for a in &out.assignments {
        assert!(seen.insert(&records[a.record].entity, a.cluster_id).is_none());
    }
}
