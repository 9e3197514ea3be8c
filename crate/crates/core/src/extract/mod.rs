//! Table identification: locate `<table>` elements, clean their cells, and
//! keep the ones that look like relational data.

mod clean;
mod corpus;
mod parser;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use clean::{classify_cell, clean_cell, CellText};
pub use corpus::{
    domain_of, extract_corpus, read_columns, read_decisions, read_manifest, walk_directory,
    write_columns, write_decisions, CorpusExtraction, ManifestEntry,
};
pub use parser::RawCell;

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("cannot derive a domain from url {0:?}")]
    InvalidUrl(String),
    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
}

/// Thresholds for table identification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionParams {
    /// Minimum number of data rows (header excluded).
    pub min_rows: usize,
    /// Minimum number of non-link columns.
    pub min_nonlink_cols: usize,
    /// Cleaned cell length bounds, inclusive, in Unicode scalar values.
    pub min_cell_len: usize,
    pub max_cell_len: usize,
    /// A column is a link column when more than this fraction of its
    /// non-empty cells are link-only.
    pub link_col_ratio: f64,
    /// Minimum surviving cells for a column to be emitted.
    pub min_column_cells: usize,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        Self {
            min_rows: 3,
            min_nonlink_cols: 2,
            min_cell_len: 2,
            max_cell_len: 50,
            link_col_ratio: 0.5,
            min_column_cells: 3,
        }
    }
}

impl ExtractionParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_rows == 0 || self.min_nonlink_cols == 0 || self.min_column_cells == 0 {
            return Err("extraction thresholds must be positive".into());
        }
        if self.min_cell_len == 0 || self.min_cell_len > self.max_cell_len {
            return Err(format!(
                "invalid cell length bounds [{}, {}]",
                self.min_cell_len, self.max_cell_len
            ));
        }
        if !(0.0..=1.0).contains(&self.link_col_ratio) {
            return Err(format!("link_col_ratio {} not in [0, 1]", self.link_col_ratio));
        }
        Ok(())
    }

    pub fn in_bounds(&self, cell: &str) -> bool {
        let n = cell.chars().count();
        n >= self.min_cell_len && n <= self.max_cell_len
    }
}

/// One input document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDoc {
    pub doc_id: String,
    pub url: String,
    /// Lowercased host of `url`.
    pub domain: String,
    pub body: Vec<u8>,
}

impl SourceDoc {
    pub fn new(
        doc_id: impl Into<String>,
        url: impl Into<String>,
        body: impl Into<Vec<u8>>,
    ) -> Result<Self, ExtractError> {
        let url = url.into();
        let domain = domain_of(&url)?;
        Ok(Self {
            doc_id: doc_id.into(),
            url,
            domain,
            body: body.into(),
        })
    }
}

/// Identifies one column of one table. Columns are numbered from 1, and the
/// text form is `table_id:column`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColumnRef {
    pub table_id: u32,
    pub column: u32,
}

impl ColumnRef {
    pub fn new(table_id: u32, column: u32) -> Self {
        Self { table_id, column }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.table_id, self.column)
    }
}

impl FromStr for ColumnRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (t, c) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| format!("bad column ref {s:?}"))?;
        Ok(Self {
            table_id: t.parse().map_err(|_| format!("bad table id in {s:?}"))?,
            column: c.parse().map_err(|_| format!("bad column in {s:?}"))?,
        })
    }
}

impl Serialize for ColumnRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ColumnRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A parsed `<table>` element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub table_id: u32,
    pub source: String,
    pub domain: String,
    pub rows: Vec<Vec<RawCell>>,
    /// The table contains another table element somewhere in its subtree.
    pub is_recursive: bool,
}

impl RawTable {
    /// Rows after dropping a leading all-`<th>` header row.
    pub fn data_rows(&self) -> &[Vec<RawCell>] {
        match self.rows.first() {
            Some(first) if !first.is_empty() && first.iter().all(|c| c.header) => &self.rows[1..],
            _ => &self.rows,
        }
    }
}

/// A cleaned non-link column of a kept table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableColumn {
    pub table_id: u32,
    pub column_index: u32,
    pub domain: String,
    pub cells: Vec<String>,
}

impl TableColumn {
    pub fn column_ref(&self) -> ColumnRef {
        ColumnRef::new(self.table_id, self.column_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FilterReason {
    Recursive,
    TooFewRows,
    TooFewNonlinkColumns,
    AllCellsOutOfLength,
    Kept,
}

impl FilterReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FilterReason::Recursive => "RECURSIVE",
            FilterReason::TooFewRows => "TOO_FEW_ROWS",
            FilterReason::TooFewNonlinkColumns => "TOO_FEW_NONLINK_COLUMNS",
            FilterReason::AllCellsOutOfLength => "ALL_CELLS_OUT_OF_LENGTH",
            FilterReason::Kept => "KEPT",
        }
    }
}

impl fmt::Display for FilterReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "RECURSIVE" => FilterReason::Recursive,
            "TOO_FEW_ROWS" => FilterReason::TooFewRows,
            "TOO_FEW_NONLINK_COLUMNS" => FilterReason::TooFewNonlinkColumns,
            "ALL_CELLS_OUT_OF_LENGTH" => FilterReason::AllCellsOutOfLength,
            "KEPT" => FilterReason::Kept,
            other => return Err(format!("unknown filter reason {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterDecision {
    pub table_id: u32,
    pub reason: FilterReason,
}

impl FilterDecision {
    pub fn kept(&self) -> bool {
        self.reason == FilterReason::Kept
    }
}

/// Decodes a document body (lossily) and returns every table in it, in
/// document order. Table ids count from 0 within the document; corpus-level
/// extraction renumbers them.
pub fn parse_document(doc: &SourceDoc) -> Vec<RawTable> {
    let text = String::from_utf8_lossy(&doc.body);
    parser::parse_tables(&text)
        .into_iter()
        .enumerate()
        .map(|(i, t)| RawTable {
            table_id: i as u32,
            source: doc.doc_id.clone(),
            domain: doc.domain.clone(),
            rows: t.rows,
            is_recursive: t.is_recursive,
        })
        .collect()
}

struct ColumnProfile {
    index: usize,
    cells: Vec<CellText>,
    link: bool,
    non_empty: usize,
}

fn profile_columns(rows: &[Vec<RawCell>], params: &ExtractionParams) -> Vec<ColumnProfile> {
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    (0..width)
        .map(|index| {
            let cells: Vec<CellText> = rows
                .iter()
                .filter_map(|r| r.get(index))
                .map(|c| classify_cell(&c.html))
                .collect();
            let non_empty = cells.iter().filter(|c| **c != CellText::Empty).count();
            let links = cells.iter().filter(|c| **c == CellText::LinkOnly).count();
            let link = non_empty > 0 && links as f64 / non_empty as f64 > params.link_col_ratio;
            ColumnProfile {
                index,
                cells,
                link,
                non_empty,
            }
        })
        .collect()
}

impl ColumnProfile {
    fn is_text_column(&self) -> bool {
        !self.link && self.non_empty > 0
    }

    fn surviving<'a>(&'a self, params: &'a ExtractionParams) -> impl Iterator<Item = &'a str> {
        self.cells.iter().filter_map(move |c| match c {
            CellText::Text(s) if params.in_bounds(s) => Some(s.as_str()),
            _ => None,
        })
    }
}

/// Decides whether a table is likely to hold relational data.
pub fn filter_table(table: &RawTable, params: &ExtractionParams) -> FilterDecision {
    let reason = if table.is_recursive {
        FilterReason::Recursive
    } else if table.data_rows().len() < params.min_rows {
        FilterReason::TooFewRows
    } else {
        let profiles = profile_columns(table.data_rows(), params);
        let text_columns: Vec<_> = profiles.iter().filter(|p| p.is_text_column()).collect();
        if text_columns.len() < params.min_nonlink_cols {
            FilterReason::TooFewNonlinkColumns
        } else if text_columns
            .iter()
            .filter(|p| p.surviving(params).next().is_some())
            .count()
            < params.min_nonlink_cols
        {
            FilterReason::AllCellsOutOfLength
        } else {
            FilterReason::Kept
        }
    };
    FilterDecision {
        table_id: table.table_id,
        reason,
    }
}

/// Emits the non-link columns of a kept table. Cells outside the length
/// bounds are dropped, and so are columns left with too few cells.
pub fn extract_columns(table: &RawTable, params: &ExtractionParams) -> Vec<TableColumn> {
    profile_columns(table.data_rows(), params)
        .iter()
        .filter(|p| p.is_text_column())
        .filter_map(|p| {
            let cells: Vec<String> = p.surviving(params).map(str::to_string).collect();
            (cells.len() >= params.min_column_cells).then(|| TableColumn {
                table_id: table.table_id,
                column_index: p.index as u32 + 1,
                domain: table.domain.clone(),
                cells,
            })
        })
        .collect()
}
