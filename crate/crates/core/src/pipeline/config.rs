//! Declarative pipeline configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cluster::ClusterParams;
use crate::extract::ExtractionParams;
use crate::hypernym::{DpmParams, LabelSource};
use crate::hyponym::BuildOptions;

use super::PipelineError;

/// Rank cutoff for DPM labels: a positive count or `"unbounded"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KThreshold(pub Option<usize>);

impl Serialize for KThreshold {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(k) => s.serialize_u64(k as u64),
            None => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for KThreshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(KThreshold(Some(n as usize))),
            Raw::S(s) if s == "unbounded" || s == "inf" => Ok(KThreshold(None)),
            Raw::S(s) => Err(serde::de::Error::custom(format!(
                "expected a count or \"unbounded\", got {s:?}"
            ))),
        }
    }
}

impl std::str::FromStr for KThreshold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "unbounded" | "inf" => Ok(KThreshold(None)),
            _ => s
                .parse()
                .map(|k| KThreshold(Some(k)))
                .map_err(|_| format!("expected a count or \"unbounded\", got {s:?}")),
        }
    }
}

impl fmt::Display for KThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(k) => write!(f, "{k}"),
            None => f.write_str("unbounded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    pub mode: LabelSource,
    pub wsext_min_count: u64,
    pub k_threshold: KThreshold,
    pub j_threshold: f64,
    /// Labels kept per cluster in the labels artifact.
    pub top_labels: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        let dpm = DpmParams::default();
        Self {
            mode: LabelSource::Ws,
            wsext_min_count: 5,
            k_threshold: KThreshold(dpm.k_threshold),
            j_threshold: dpm.j_threshold,
            top_labels: 5,
        }
    }
}

impl LabelConfig {
    pub fn dpm_params(&self) -> DpmParams {
        DpmParams {
            k_threshold: self.k_threshold.0,
            j_threshold: self.j_threshold,
            extend: self.mode == LabelSource::DpmExt,
        }
    }

    /// Dataset count threshold applied before scoring, if any.
    pub fn min_count(&self) -> Option<u64> {
        (self.mode == LabelSource::WsExt).then_some(self.wsext_min_count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub top_entities: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { top_entities: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// JSON-lines manifest of `{doc_id, url, path}` records.
    pub manifest: Option<PathBuf>,
    /// Alternative to `manifest`: every file under this directory.
    pub corpus_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// `np1 TAB filler TAB np2 TAB count` records to build the dataset from.
    pub fillers: Option<PathBuf>,
    /// Prebuilt dataset, used when `fillers` is not set.
    pub hyponym_dataset: Option<PathBuf>,
    pub extraction: ExtractionParams,
    pub cluster: ClusterParams,
    pub hyponyms: BuildOptions,
    pub labels: LabelConfig,
    pub report: ReportConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            corpus_dir: None,
            output_dir: PathBuf::from("out"),
            fillers: None,
            hyponym_dataset: None,
            extraction: ExtractionParams::default(),
            cluster: ClusterParams::default(),
            hyponyms: BuildOptions::default(),
            labels: LabelConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

impl PipelineConfig {
    /// Parses TOML; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        for p in [
            &mut cfg.manifest,
            &mut cfg.corpus_dir,
            &mut cfg.fillers,
            &mut cfg.hyponym_dataset,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Checks thresholds only.
    pub fn validate_params(&self) -> Result<(), PipelineError> {
        self.extraction.validate().map_err(config_err)?;
        self.cluster.validate().map_err(|e| config_err(e.to_string()))?;
        self.labels
            .dpm_params()
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        if self.labels.wsext_min_count == 0 {
            return Err(config_err("wsext_min_count must be at least 1"));
        }
        if self.labels.top_labels == 0 || self.report.top_entities == 0 {
            return Err(config_err("top_labels and top_entities must be at least 1"));
        }
        Ok(())
    }

    /// Checks thresholds and that every configured input exists.
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.validate_params()?;
        match (&self.manifest, &self.corpus_dir) {
            (Some(_), Some(_)) => return Err(config_err("set only one of manifest and corpus_dir")),
            (None, None) => return Err(config_err("one of manifest or corpus_dir is required")),
            _ => {}
        }
        for p in [&self.manifest, &self.corpus_dir, &self.fillers, &self.hyponym_dataset]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(config_err(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
