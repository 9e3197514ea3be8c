//! Corpus input and corpus-wide extraction.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use super::{
    extract_columns, filter_table, parse_document, ExtractError, ExtractionParams,
    FilterDecision, SourceDoc, TableColumn,
};

/// Lowercased host of a URL. Scheme-less URLs are read as `http://`.
pub fn domain_of(url: &str) -> Result<String, ExtractError> {
    let parsed = if url.contains("://") {
        url::Url::parse(url.trim()).ok()
    } else {
        url::Url::parse(&format!("http://{}", url.trim())).ok()
    };
    parsed
        .as_ref()
        .and_then(|u| u.host_str())
        .map(|h| h.trim_end_matches('.').to_ascii_lowercase())
        .filter(|h| !h.is_empty())
        .ok_or_else(|| ExtractError::InvalidUrl(url.to_string()))
}

/// One manifest record: `{"doc_id": ..., "url": ..., "path": ...}`.
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ManifestEntry {
    pub doc_id: String,
    pub url: String,
    pub path: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExtractError + '_ {
    move |source| ExtractError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a JSON-lines manifest and loads every referenced document.
pub fn read_manifest(path: &Path) -> Result<Vec<SourceDoc>, ExtractError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry =
            serde_json::from_str(&line).map_err(|e| ExtractError::Format {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
        let file_path = base.join(&entry.path);
        let body = fs::read(&file_path).map_err(io_err(&file_path))?;
        docs.push(SourceDoc::new(entry.doc_id, entry.url, body)?);
    }
    Ok(docs)
}

/// Loads every file under `dir` in lexicographic order. The doc id is the
/// relative path; the domain is its first path component (or the file stem
/// for files at the top level).
pub fn walk_directory(dir: &Path) -> Result<Vec<SourceDoc>, ExtractError> {
    let mut docs = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| ExtractError::Io {
            path: dir.display().to_string(),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(dir).unwrap_or(entry.path());
        let parts: Vec<String> = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        let doc_id = parts.join("/");
        let domain = if parts.len() > 1 {
            parts[0].to_lowercase()
        } else {
            rel.file_stem()
                .map(|s| s.to_string_lossy().to_lowercase())
                .unwrap_or_default()
        };
        if domain.is_empty() {
            return Err(ExtractError::InvalidUrl(doc_id));
        }
        let body = fs::read(entry.path()).map_err(io_err(entry.path()))?;
        docs.push(SourceDoc {
            url: doc_id.clone(),
            doc_id,
            domain,
            body,
        });
    }
    Ok(docs)
}

/// Result of extracting a whole corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusExtraction {
    pub n_documents: usize,
    pub decisions: Vec<FilterDecision>,
    pub columns: Vec<TableColumn>,
}

type TableOutput = (FilterDecision, Vec<TableColumn>);

/// Parses, filters, and extracts every document in parallel. Table ids are
/// assigned afterwards in `(doc_id, position in document)` order so they do
/// not depend on scheduling.
pub fn extract_corpus(
    docs: &[SourceDoc],
    params: &ExtractionParams,
) -> Result<CorpusExtraction, ExtractError> {
    let mut seen = HashSet::new();
    for d in docs {
        if !seen.insert(d.doc_id.as_str()) {
            return Err(ExtractError::DuplicateDocId(d.doc_id.clone()));
        }
    }

    let mut per_doc: Vec<(&str, Vec<TableOutput>)> = docs
        .par_iter()
        .map(|doc| {
            let tables = parse_document(doc)
                .into_iter()
                .map(|t| {
                    let decision = filter_table(&t, params);
                    let cols = if decision.kept() {
                        extract_columns(&t, params)
                    } else {
                        Vec::new()
                    };
                    (decision, cols)
                })
                .collect();
            (doc.doc_id.as_str(), tables)
        })
        .collect();
    per_doc.sort_by(|a, b| a.0.cmp(b.0));

    let mut out = CorpusExtraction {
        n_documents: docs.len(),
        ..CorpusExtraction::default()
    };
    let mut next_id = 0u32;
    for (_, tables) in per_doc {
        for (mut decision, cols) in tables {
            decision.table_id = next_id;
            out.decisions.push(decision);
            out.columns.extend(cols.into_iter().map(|mut c| {
                c.table_id = next_id;
                c
            }));
            next_id += 1;
        }
    }
    Ok(out)
}

pub fn write_columns(path: &Path, columns: &[TableColumn]) -> Result<(), ExtractError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for c in columns {
        let line = serde_json::to_string(c).expect("columns serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_columns(path: &Path) -> Result<Vec<TableColumn>, ExtractError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| ExtractError::Format {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

pub fn write_decisions(path: &Path, decisions: &[FilterDecision]) -> Result<(), ExtractError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for d in decisions {
        writeln!(w, "{}\t{}", d.table_id, d.reason).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_decisions(path: &Path) -> Result<Vec<FilterDecision>, ExtractError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = |message: String| ExtractError::Format {
                path: path.display().to_string(),
                line: i + 1,
                message,
            };
            let (id, reason) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected table_id<TAB>reason".into()))?;
            Ok(FilterDecision {
                table_id: id.parse().map_err(|_| bad(format!("bad table id {id:?}")))?,
                reason: reason.parse().map_err(bad)?,
            })
        })
        .collect()
}
