//! Entity-triplet records: every run of three adjacent cells in a column,
//! canonicalized, with the columns and domains it was seen in.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::extract::{ColumnRef, TableColumn};

/// Separator between entities in a canonical key (ASCII unit separator).
pub const KEY_SEPARATOR: char = '\u{1F}';

#[derive(Debug, thiserror::Error)]
pub enum TripletError {
    #[error("column {0} has fewer than 3 cells")]
    ShortColumn(ColumnRef),
    #[error("triple repeats entity {0:?}")]
    DuplicateEntity(String),
    #[error("triple has an empty entity")]
    EmptyEntity,
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

/// Per-character simple lowercase mapping.
pub fn simple_lowercase(s: &str) -> String {
    s.chars()
        .map(|c| c.to_lowercase().next().unwrap_or(c))
        .collect()
}

/// Three lowercase, pairwise distinct entities in ascending code point order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalTriple([String; 3]);

impl CanonicalTriple {
    pub fn entities(&self) -> &[String; 3] {
        &self.0
    }

    pub fn key(&self) -> String {
        let [a, b, c] = &self.0;
        format!("{a}{KEY_SEPARATOR}{b}{KEY_SEPARATOR}{c}")
    }
}

/// Lowercases and sorts a raw triple.
pub fn canonicalize(raw: [&str; 3]) -> Result<CanonicalTriple, TripletError> {
    let mut entities = raw.map(simple_lowercase);
    if entities.iter().any(String::is_empty) {
        return Err(TripletError::EmptyEntity);
    }
    entities.sort();
    if entities[0] == entities[1] || entities[1] == entities[2] {
        return Err(TripletError::DuplicateEntity(entities[1].clone()));
    }
    Ok(CanonicalTriple(entities))
}

/// One window of a column, canonicalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletOccurrence {
    pub triple: CanonicalTriple,
    pub column: ColumnRef,
    pub domain: String,
}

/// Every window of three adjacent cells, in column order. Windows that
/// repeat an entity after canonicalization are dropped.
pub fn column_to_triplets(col: &TableColumn) -> Result<Vec<TripletOccurrence>, TripletError> {
    if col.cells.len() < 3 {
        return Err(TripletError::ShortColumn(col.column_ref()));
    }
    Ok(col
        .cells
        .windows(3)
        .filter_map(|w| canonicalize([&w[0], &w[1], &w[2]]).ok())
        .map(|triple| TripletOccurrence {
            triple,
            column: col.column_ref(),
            domain: col.domain.clone(),
        })
        .collect())
}

/// A triplet record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triplet {
    pub entities: [String; 3],
    pub occurrences: BTreeSet<ColumnRef>,
    pub domains: BTreeSet<String>,
}

impl Triplet {
    pub fn key(&self) -> String {
        self.entities.join(&KEY_SEPARATOR.to_string())
    }
}

/// Corpus-wide keyed collection of triplet records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripletStore {
    records: HashMap<CanonicalTriple, Triplet>,
    pub n_columns: usize,
    pub n_cells: usize,
    /// Sum over ingested columns of `max(0, cells - 2)`.
    pub n_windows: usize,
}

impl TripletStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_columns<'a>(cols: impl IntoIterator<Item = &'a TableColumn>) -> Self {
        let mut store = Self::new();
        for c in cols {
            store.ingest_column(c);
        }
        store
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, triple: &CanonicalTriple) -> Option<&Triplet> {
        self.records.get(triple)
    }

    pub fn records(&self) -> impl Iterator<Item = &Triplet> {
        self.records.values()
    }

    /// Creates or merges a record. Repeating an identical add is a no-op.
    pub fn add_occurrence(&mut self, triple: &CanonicalTriple, column: ColumnRef, domain: &str) {
        let record = self
            .records
            .entry(triple.clone())
            .or_insert_with(|| Triplet {
                entities: triple.0.clone(),
                occurrences: BTreeSet::new(),
                domains: BTreeSet::new(),
            });
        record.occurrences.insert(column);
        if !record.domains.contains(domain) {
            record.domains.insert(domain.to_string());
        }
    }

    /// Adds every window of a column. Columns shorter than three cells only
    /// count toward the cell total.
    pub fn ingest_column(&mut self, col: &TableColumn) {
        self.n_columns += 1;
        self.n_cells += col.cells.len();
        self.n_windows += col.cells.len().saturating_sub(2);
        if let Ok(occurrences) = column_to_triplets(col) {
            for occ in occurrences {
                self.add_occurrence(&occ.triple, occ.column, &occ.domain);
            }
        }
        debug_assert!(self.records.len() <= self.n_windows);
    }

    /// Records by number of domains, descending, then by key ascending.
    pub fn rank(&self) -> RankedTriplets {
        let mut ranked: Vec<Triplet> = self.records.values().cloned().collect();
        sort_ranked(&mut ranked);
        RankedTriplets(ranked)
    }
}

fn sort_ranked(ranked: &mut [Triplet]) {
    ranked.sort_unstable_by(|a, b| {
        b.domains
            .len()
            .cmp(&a.domains.len())
            .then_with(|| a.entities.cmp(&b.entities))
    });
}

/// Triplets in clustering order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RankedTriplets(Vec<Triplet>);

impl RankedTriplets {
    /// Sorts arbitrary records into rank order.
    pub fn from_records(mut records: Vec<Triplet>) -> Self {
        sort_ranked(&mut records);
        Self(records)
    }

    pub fn into_inner(self) -> Vec<Triplet> {
        self.0
    }
}

impl std::ops::Deref for RankedTriplets {
    type Target = [Triplet];

    fn deref(&self) -> &[Triplet] {
        &self.0
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TripletError + '_ {
    move |source| TripletError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Writes `e1 TAB e2 TAB e3 TAB occurrences TAB domains`, one record per line.
pub fn write_triplets(path: &Path, ranked: &RankedTriplets) -> Result<(), TripletError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for t in ranked.iter() {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            t.entities[0],
            t.entities[1],
            t.entities[2],
            join(&t.occurrences),
            join(&t.domains)
        )
        .map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a triplet file and returns its records in rank order.
pub fn read_triplets(path: &Path) -> Result<RankedTriplets, TripletError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| TripletError::Format {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", fields.len())));
        }
        let triple = canonicalize([fields[0], fields[1], fields[2]]).map_err(|e| bad(e.to_string()))?;
        if triple.entities() != &[fields[0], fields[1], fields[2]].map(str::to_string) {
            return Err(bad("entities are not in canonical form".into()));
        }
        let occurrences = fields[3]
            .split(',')
            .map(str::parse)
            .collect::<Result<BTreeSet<ColumnRef>, _>>()
            .map_err(bad)?;
        let domains: BTreeSet<String> = fields[4].split(',').map(str::to_string).collect();
        if occurrences.is_empty() || domains.iter().any(String::is_empty) {
            return Err(bad("empty occurrences or domains".into()));
        }
        records.push(Triplet {
            entities: triple.0,
            occurrences,
            domains,
        });
    }
    Ok(RankedTriplets::from_records(records))
}

/// One record per entity string. This representation collapses every sense
/// of an ambiguous entity into a single record; it exists for the
/// representation comparison in [`crate::eval`], not for the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityRecord {
    pub entity: String,
    pub occurrences: BTreeSet<ColumnRef>,
    pub domains: BTreeSet<String>,
}

/// Builds entity records from columns, ranked like triplets.
pub fn entity_records<'a>(cols: impl IntoIterator<Item = &'a TableColumn>) -> Vec<EntityRecord> {
    let mut map: HashMap<String, EntityRecord> = HashMap::new();
    for col in cols {
        for cell in &col.cells {
            let entity = simple_lowercase(cell);
            let rec = map.entry(entity.clone()).or_insert_with(|| EntityRecord {
                entity,
                occurrences: BTreeSet::new(),
                domains: BTreeSet::new(),
            });
            rec.occurrences.insert(col.column_ref());
            rec.domains.insert(col.domain.clone());
        }
    }
    let mut out: Vec<EntityRecord> = map.into_values().collect();
    out.sort_unstable_by(|a, b| {
        b.domains
            .len()
            .cmp(&a.domains.len())
            .then_with(|| a.entity.cmp(&b.entity))
    });
    out
}
