//! Stage orchestration over plain-text artifacts in one output directory.
//!
//! | stage      | reads                                  | writes                              |
//! |------------|----------------------------------------|-------------------------------------|
//! | `extract`  | corpus                                 | `columns.jsonl`, `decisions.tsv`    |
//! | `triplets` | `columns.jsonl`                        | `triplets.tsv`                      |
//! | `cluster`  | `triplets.tsv`                         | `clusters.jsonl`, `assignments.tsv` |
//! | `hyponyms` | filler records or a prebuilt dataset   | `hyponyms.tsv`                      |
//! | `label`    | `clusters.jsonl`, `hyponyms.tsv`       | `labels.jsonl`                      |
//! | `pairs`    | `clusters.jsonl`, `hyponyms.tsv`       | `pairs.tsv`                         |
//! | `report`   | all of the above                       | `report.json`, `report.txt`         |
//!
//! Outputs are written with a `.partial` suffix and renamed once the stage
//! succeeds. A stage is skipped when its outputs exist and the SHA-256 of
//! its inputs and parameters matches the stamp left by the previous run.

mod config;
mod report;

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub use config::{KThreshold, LabelConfig, PipelineConfig, ReportConfig};
pub use report::{emit_report, render_text, ReportEntry, ReportStats, SummaryReport};

use crate::cluster::{self, ClusterError};
use crate::eval::{self, EvalError, MetricsReport};
use crate::extract::{self, ExtractError};
use crate::hypernym::{self, HypernymError, LabelSource};
use crate::hyponym::{self, HyponymDataset, HyponymError};
use crate::triplets::{self, TripletError, TripletStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Extract,
    Triplets,
    Cluster,
    Hyponyms,
    Label,
    Pairs,
    Report,
    Integrity,
}

impl Stage {
    pub const PIPELINE: [Stage; 7] = [
        Stage::Extract,
        Stage::Triplets,
        Stage::Cluster,
        Stage::Hyponyms,
        Stage::Label,
        Stage::Pairs,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Extract => "extract",
            Stage::Triplets => "triplets",
            Stage::Cluster => "cluster",
            Stage::Hyponyms => "hyponyms",
            Stage::Label => "label",
            Stage::Pairs => "pairs",
            Stage::Report => "report",
            Stage::Integrity => "integrity",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Triplet(#[from] TripletError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Hyponym(#[from] HyponymError),
    #[error(transparent)]
    Hypernym(#[from] HypernymError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: StageError,
    },
}

impl PipelineError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    pub stage: Stage,
    pub skipped: bool,
}

pub const COLUMNS: &str = "columns.jsonl";
pub const DECISIONS: &str = "decisions.tsv";
pub const TRIPLETS: &str = "triplets.tsv";
pub const CLUSTERS: &str = "clusters.jsonl";
pub const ASSIGNMENTS: &str = "assignments.tsv";
pub const HYPONYMS: &str = "hyponyms.tsv";
pub const LABELS: &str = "labels.jsonl";
pub const PAIRS: &str = "pairs.tsv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
const STAMP_DIR: &str = ".stamps";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StageError + '_ {
    move |source| StageError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn partial(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Content hash of a stage's inputs and parameters.
struct Fingerprint(Sha256);

impl Fingerprint {
    fn new(stage: Stage) -> Self {
        let mut h = Sha256::new();
        h.update(b"setminer-stamp-v1\0");
        h.update(stage.name().as_bytes());
        Self(h)
    }

    fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.0.update((b.len() as u64).to_le_bytes());
        self.0.update(b);
        self
    }

    fn params<T: serde::Serialize>(&mut self, p: &T) -> &mut Self {
        let json = serde_json::to_vec(p).expect("params serialize");
        self.bytes(&json)
    }

    fn file(&mut self, path: &Path) -> Result<&mut Self, StageError> {
        let data = fs::read(path).map_err(io_err(path))?;
        Ok(self.bytes(&data))
    }

    fn finish(&mut self) -> String {
        hex::encode(self.0.clone().finalize())
    }
}

/// Runs stages against one configuration.
pub struct Pipeline {
    cfg: PipelineConfig,
    force: bool,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate_params()?;
        Ok(Self { cfg, force: false })
    }

    /// Ignore stamps and rerun every requested stage.
    pub fn force(mut self, force: bool) -> Self {
        self.force = force;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn stamp_path(&self, stage: Stage) -> PathBuf {
        self.cfg.output_dir.join(STAMP_DIR).join(stage.name())
    }

    /// Skips when the stamp matches; otherwise writes outputs to `.partial`
    /// paths via `body` and renames them into place.
    fn stage(
        &self,
        stage: Stage,
        fingerprint: String,
        outputs: &[&str],
        body: impl FnOnce(&[PathBuf]) -> Result<(), StageError>,
    ) -> Result<StageOutcome, PipelineError> {
        let wrap = |source| PipelineError::Stage { stage, source };
        let finals: Vec<PathBuf> = outputs.iter().map(|o| self.artifact(o)).collect();
        let stamp = self.stamp_path(stage);
        if !self.force
            && finals.iter().all(|p| p.exists())
            && fs::read_to_string(&stamp).is_ok_and(|s| s.trim() == fingerprint)
        {
            log::info!("{stage}: up to date");
            return Ok(StageOutcome { stage, skipped: true });
        }
        fs::create_dir_all(self.cfg.output_dir.join(STAMP_DIR))
            .map_err(|e| wrap(io_err(&self.cfg.output_dir)(e)))?;
        let _ = fs::remove_file(&stamp);
        let partials: Vec<PathBuf> = finals.iter().map(|p| partial(p)).collect();
        body(&partials).map_err(wrap)?;
        for (from, to) in partials.iter().zip(&finals) {
            fs::rename(from, to).map_err(|e| wrap(io_err(to)(e)))?;
        }
        fs::write(&stamp, format!("{fingerprint}\n")).map_err(|e| wrap(io_err(&stamp)(e)))?;
        log::info!("{stage}: done");
        Ok(StageOutcome { stage, skipped: false })
    }

    fn input_fingerprint(
        &self,
        stage: Stage,
        inputs: &[&str],
        params: &impl serde::Serialize,
    ) -> Result<String, PipelineError> {
        let mut fp = Fingerprint::new(stage);
        fp.params(params);
        for name in inputs {
            fp.file(&self.artifact(name))
                .map_err(|source| PipelineError::Stage { stage, source })?;
        }
        Ok(fp.finish())
    }

    pub fn extract(&self) -> Result<StageOutcome, PipelineError> {
        let stage = Stage::Extract;
        let wrap = |source: StageError| PipelineError::Stage { stage, source };
        let docs = match (&self.cfg.manifest, &self.cfg.corpus_dir) {
            (Some(m), None) => extract::read_manifest(m),
            (None, Some(d)) => extract::walk_directory(d),
            _ => {
                return Err(PipelineError::Config(
                    "exactly one of manifest or corpus_dir is required".into(),
                ))
            }
        }
        .map_err(|e| wrap(e.into()))?;
        let mut fp = Fingerprint::new(stage);
        fp.params(&self.cfg.extraction);
        for d in &docs {
            fp.bytes(d.doc_id.as_bytes())
                .bytes(d.domain.as_bytes())
                .bytes(&d.body);
        }
        let params = self.cfg.extraction.clone();
        self.stage(stage, fp.finish(), &[COLUMNS, DECISIONS], |out| {
            let result = extract::extract_corpus(&docs, &params)?;
            log::info!(
                "extract: {} documents, {} tables, {} columns",
                result.n_documents,
                result.decisions.len(),
                result.columns.len()
            );
            extract::write_columns(&out[0], &result.columns)?;
            extract::write_decisions(&out[1], &result.decisions)?;
            Ok(())
        })
    }

    pub fn triplets(&self) -> Result<StageOutcome, PipelineError> {
        let fp = self.input_fingerprint(Stage::Triplets, &[COLUMNS], &())?;
        let columns = self.artifact(COLUMNS);
        self.stage(Stage::Triplets, fp, &[TRIPLETS], |out| {
            let cols = extract::read_columns(&columns)?;
            let store = TripletStore::from_columns(&cols);
            log::info!("triplets: {} records from {} windows", store.len(), store.n_windows);
            triplets::write_triplets(&out[0], &store.rank())?;
            Ok(())
        })
    }

    pub fn cluster(&self) -> Result<StageOutcome, PipelineError> {
        let params = self.cfg.cluster;
        let fp = self.input_fingerprint(Stage::Cluster, &[TRIPLETS], &params)?;
        let input = self.artifact(TRIPLETS);
        self.stage(Stage::Cluster, fp, &[CLUSTERS, ASSIGNMENTS], |out| {
            let ranked = triplets::read_triplets(&input)?;
            let outcome = cluster::cluster(&ranked, &params)?;
            log::info!(
                "cluster: {} of {} records into {} clusters",
                outcome.assignments.len(),
                ranked.len(),
                outcome.clusters.len()
            );
            cluster::write_clusters(&out[0], &outcome.clusters)?;
            cluster::write_assignments(&out[1], &outcome, &ranked)?;
            Ok(())
        })
    }

    pub fn hyponyms(&self) -> Result<StageOutcome, PipelineError> {
        let stage = Stage::Hyponyms;
        let wrap = |source| PipelineError::Stage { stage, source };
        let mut fp = Fingerprint::new(stage);
        fp.params(&self.cfg.hyponyms);
        let source = match (&self.cfg.fillers, &self.cfg.hyponym_dataset) {
            (Some(f), _) => {
                fp.bytes(b"fillers").file(f).map_err(wrap)?;
                Some((f.clone(), true))
            }
            (None, Some(d)) => {
                fp.bytes(b"dataset").file(d).map_err(wrap)?;
                Some((d.clone(), false))
            }
            (None, None) => None,
        };
        let opts = self.cfg.hyponyms;
        self.stage(stage, fp.finish(), &[HYPONYMS], |out| {
            let dataset = match source {
                Some((path, true)) => hyponym::build_dataset(&hyponym::read_fillers(&path)?, &opts),
                Some((path, false)) => hyponym::read_dataset(&path)?,
                None => {
                    log::warn!("hyponyms: no dataset configured; labels will be empty");
                    HyponymDataset::default()
                }
            };
            log::info!(
                "hyponyms: {} instances, {} pairs",
                dataset.len(),
                dataset.n_pairs()
            );
            hyponym::write_dataset(&out[0], &dataset)?;
            Ok(())
        })
    }

    fn labeling_dataset(&self) -> Result<HyponymDataset, StageError> {
        let h = hyponym::read_dataset(&self.artifact(HYPONYMS))?;
        Ok(match self.cfg.labels.min_count() {
            Some(n) => h.filter_min_count(n),
            None => h,
        })
    }

    pub fn label(&self) -> Result<StageOutcome, PipelineError> {
        let lc = &self.cfg.labels;
        let params = (lc.min_count(), lc.top_labels);
        let fp = self.input_fingerprint(Stage::Label, &[CLUSTERS, HYPONYMS], &params)?;
        self.stage(Stage::Label, fp, &[LABELS], |out| {
            let clusters = cluster::read_clusters(&self.artifact(CLUSTERS))?;
            let h = self.labeling_dataset()?;
            let labels = hypernym::recommend_all(&clusters, &h);
            hypernym::write_labels(&out[0], &labels, lc.top_labels)?;
            Ok(())
        })
    }

    pub fn pairs(&self) -> Result<StageOutcome, PipelineError> {
        let lc = &self.cfg.labels;
        let fp = self.input_fingerprint(Stage::Pairs, &[CLUSTERS, HYPONYMS], lc)?;
        self.stage(Stage::Pairs, fp, &[PAIRS], |out| {
            let clusters = cluster::read_clusters(&self.artifact(CLUSTERS))?;
            let h = hyponym::read_dataset(&self.artifact(HYPONYMS))?;
            let pairs = match lc.mode {
                LabelSource::Ws | LabelSource::WsExt => {
                    hypernym::ws_pairs(&clusters, &h, lc.min_count())
                }
                LabelSource::Dpm | LabelSource::DpmExt => {
                    hypernym::dpm_pairs(&clusters, &h, &lc.dpm_params())?
                }
            };
            log::info!("pairs: {} {} pairs", pairs.len(), lc.mode);
            hypernym::write_pairs(&out[0], &pairs)?;
            Ok(())
        })
    }

    pub fn report(&self) -> Result<StageOutcome, PipelineError> {
        let inputs = [DECISIONS, COLUMNS, TRIPLETS, CLUSTERS, LABELS, PAIRS];
        let fp = self.input_fingerprint(Stage::Report, &inputs, &self.cfg.report)?;
        self.stage(Stage::Report, fp, &[REPORT_JSON, REPORT_TEXT], |out| {
            let decisions = extract::read_decisions(&self.artifact(DECISIONS))?;
            let count_lines = |name: &str| -> Result<usize, StageError> {
                let path = self.artifact(name);
                let text = fs::read_to_string(&path).map_err(io_err(&path))?;
                Ok(text.lines().filter(|l| !l.is_empty()).count())
            };
            let stats = ReportStats {
                n_tables: decisions.len(),
                n_tables_kept: decisions.iter().filter(|d| d.kept()).count(),
                n_columns: count_lines(COLUMNS)?,
                n_triplets: count_lines(TRIPLETS)?,
                n_pairs: count_lines(PAIRS)?,
                ..ReportStats::default()
            };
            let clusters = cluster::read_clusters(&self.artifact(CLUSTERS))?;
            let labels = hypernym::read_labels(&self.artifact(LABELS))?;
            let report = emit_report(&clusters, &labels, self.cfg.report.top_entities, stats);
            let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            fs::write(&out[0], json).map_err(io_err(&out[0]))?;
            fs::write(&out[1], render_text(&report)).map_err(io_err(&out[1]))?;
            Ok(())
        })
    }

    pub fn run_stage(&self, stage: Stage) -> Result<StageOutcome, PipelineError> {
        match stage {
            Stage::Extract => self.extract(),
            Stage::Triplets => self.triplets(),
            Stage::Cluster => self.cluster(),
            Stage::Hyponyms => self.hyponyms(),
            Stage::Label => self.label(),
            Stage::Pairs => self.pairs(),
            Stage::Report => self.report(),
            Stage::Integrity => self.check_integrity().map(|_| StageOutcome {
                stage,
                skipped: false,
            }),
        }
    }

    /// Every stage in order, then the referential integrity check.
    pub fn run_all(&self) -> Result<Vec<StageOutcome>, PipelineError> {
        self.cfg.validate()?;
        let mut outcomes = Vec::new();
        for stage in Stage::PIPELINE {
            outcomes.push(self.run_stage(stage)?);
        }
        self.check_integrity()?;
        Ok(outcomes)
    }

    /// Pairs point at existing clusters; clusters point at kept tables.
    pub fn check_integrity(&self) -> Result<(), PipelineError> {
        let stage = Stage::Integrity;
        let wrap = |source: StageError| PipelineError::Stage { stage, source };
        let clusters = cluster::read_clusters(&self.artifact(CLUSTERS)).map_err(|e| wrap(e.into()))?;
        let pairs = hypernym::read_pairs(&self.artifact(PAIRS)).map_err(|e| wrap(e.into()))?;
        let columns = extract::read_columns(&self.artifact(COLUMNS)).map_err(|e| wrap(e.into()))?;
        let cluster_ids: BTreeSet<u32> = clusters.iter().map(|c| c.cluster_id).collect();
        let tables: BTreeSet<u32> = columns.iter().map(|c| c.table_id).collect();
        if let Some(p) = pairs.iter().find(|p| !cluster_ids.contains(&p.cluster_id)) {
            return Err(wrap(StageError::Other(format!(
                "pair ({}, {}) names unknown cluster {}",
                p.concept, p.instance, p.cluster_id
            ))));
        }
        for c in &clusters {
            if !c.columns.iter().any(|col| tables.contains(&col.table_id)) {
                return Err(wrap(StageError::Other(format!(
                    "cluster {} has no table in the extraction output",
                    c.cluster_id
                ))));
            }
        }
        Ok(())
    }
}

/// Scores a clusters file against `entity TAB class` truth labels.
pub fn evaluate_clusters(clusters: &Path, truth: &Path) -> Result<MetricsReport, PipelineError> {
    let wrap = |source: StageError| PipelineError::Stage {
        stage: Stage::Report,
        source,
    };
    let clusters = cluster::read_clusters(clusters).map_err(|e| wrap(e.into()))?;
    let truth = eval::read_truth(truth).map_err(|e| wrap(e.into()))?;
    eval::evaluate(&eval::entity_labels(&clusters, &truth)).map_err(|e| wrap(e.into()))
}
