//! Instance → concept co-occurrence counts harvested with Hearst patterns.
//!
//! Input records are `np1 filler np2` triples from a shallow-parsed text
//! corpus, each with the number of times the sequence occurred. A filler
//! that matches one of four lexical patterns yields a (concept, instance)
//! pair. The patterns, with `w` standing for one alphabetic token:
//!
//! | id | filler                         | concept | instance |
//! |----|--------------------------------|---------|----------|
//! | 1  | `such as (w (and\|or))?`       | np1     | np2      |
//! | 2  | `(w )?(and\|or) other`         | np2     | np1      |
//! | 3  | `include (w (and\|or))?`       | np1     | np2      |
//! | 4  | `including (w (and\|or))?`     | np1     | np2      |
//!
//! Pattern 2 is the "X and other Ys" construction, which names the concept
//! second.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum HyponymError {
    #[error("filler {0:?} must have between 1 and 5 tokens")]
    FillerLength(String),
    #[error("record count must be at least 1")]
    ZeroCount,
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

/// One `np1 filler np2` sequence and its corpus frequency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillerRecord {
    pub np1: String,
    pub filler: String,
    pub np2: String,
    pub count: u64,
}

impl FillerRecord {
    pub fn new(np1: &str, filler: &str, np2: &str, count: u64) -> Self {
        Self {
            np1: np1.to_string(),
            filler: filler.to_string(),
            np2: np2.to_string(),
            count,
        }
    }

    pub fn validate(&self) -> Result<(), HyponymError> {
        let tokens = self.filler.split_whitespace().count();
        if !(1..=5).contains(&tokens) {
            return Err(HyponymError::FillerLength(self.filler.clone()));
        }
        if self.count == 0 {
            return Err(HyponymError::ZeroCount);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HearstPattern {
    SuchAs = 1,
    AndOther = 2,
    Include = 3,
    Including = 4,
}

impl HearstPattern {
    pub const ALL: [HearstPattern; 4] = [
        HearstPattern::SuchAs,
        HearstPattern::AndOther,
        HearstPattern::Include,
        HearstPattern::Including,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    /// Whether np2 (rather than np1) names the concept.
    pub fn concept_second(self) -> bool {
        self == HearstPattern::AndOther
    }

    pub fn regex(self) -> &'static Regex {
        &PATTERNS[self as usize - 1]
    }
}

static PATTERNS: LazyLock<[Regex; 4]> = LazyLock::new(|| {
    let w = r"\p{Alphabetic}+";
    [
        format!(r"(?i)^such as(?: {w} (?:and|or))?$"),
        format!(r"(?i)^(?:{w} )?(?:and|or) other$"),
        format!(r"(?i)^include(?: {w} (?:and|or))?$"),
        format!(r"(?i)^including(?: {w} (?:and|or))?$"),
    ]
    .map(|p| Regex::new(&p).expect("static pattern"))
});

/// A concept-instance pair read off one filler record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HearstMatch {
    pub concept: String,
    pub instance: String,
    pub pattern: HearstPattern,
}

fn normalize(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// First pattern (in id order) matching the filler, with roles assigned.
pub fn match_filler(rec: &FillerRecord) -> Option<HearstMatch> {
    let filler = normalize(&rec.filler);
    let pattern = HearstPattern::ALL
        .into_iter()
        .find(|p| p.regex().is_match(&filler))?;
    let (concept, instance) = if pattern.concept_second() {
        (&rec.np2, &rec.np1)
    } else {
        (&rec.np1, &rec.np2)
    };
    let (concept, instance) = (normalize(concept), normalize(instance));
    if concept.is_empty() || instance.is_empty() {
        return None;
    }
    Some(HearstMatch {
        concept,
        instance,
        pattern,
    })
}

/// Reduces a plural English noun to its singular form with a few suffix
/// rules. Words shorter than four characters are left alone.
pub fn singularize(word: &str) -> String {
    if word.chars().count() < 4 || !word.ends_with('s') {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        return format!("{stem}y");
    }
    for suffix in ["sses", "shes", "ches", "xes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    if ["ss", "us", "is"].iter().any(|s| word.ends_with(s)) {
        return word.to_string();
    }
    word[..word.len() - 1].to_string()
}

/// Singularizes the last word of a concept phrase.
pub fn singularize_head(concept: &str) -> String {
    match concept.rsplit_once(' ') {
        Some((head, last)) => format!("{head} {}", singularize(last)),
        None => singularize(concept),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildOptions {
    pub singularize: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { singularize: true }
    }
}

/// Frozen instance → [(concept, count)] map. Each list is sorted by count
/// descending, then concept ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HyponymDataset {
    entries: BTreeMap<String, Vec<(String, u64)>>,
}

impl HyponymDataset {
    /// Builds from already-aggregated `(instance, concept, count)` triples.
    /// Repeated pairs are summed; zero counts are dropped.
    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, S, u64)>,
        S: AsRef<str>,
    {
        let mut map: HashMap<(String, String), u64> = HashMap::new();
        for (instance, concept, n) in counts {
            if n > 0 {
                *map.entry((normalize(instance.as_ref()), normalize(concept.as_ref())))
                    .or_default() += n;
            }
        }
        Self::from_map(map)
    }

    fn from_map(map: HashMap<(String, String), u64>) -> Self {
        let mut entries: BTreeMap<String, Vec<(String, u64)>> = BTreeMap::new();
        for ((instance, concept), n) in map {
            entries.entry(instance).or_default().push((concept, n));
        }
        for list in entries.values_mut() {
            list.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        }
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Concepts seen with `entity`; empty when the entity is unknown.
    pub fn lookup(&self, entity: &str) -> &[(String, u64)] {
        let key = entity.to_lowercase();
        self.entries.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[(String, u64)])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Keeps only pairs with at least `min_count` occurrences.
    pub fn filter_min_count(&self, min_count: u64) -> Self {
        let entries = self
            .entries
            .iter()
            .filter_map(|(k, v)| {
                let kept: Vec<_> = v.iter().filter(|(_, n)| *n >= min_count).cloned().collect();
                (!kept.is_empty()).then(|| (k.clone(), kept))
            })
            .collect();
        Self { entries }
    }

    /// Number of distinct (instance, concept) pairs.
    pub fn n_pairs(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }
}

/// Matches every record and sums counts per (instance, concept).
pub fn build_dataset(records: &[FillerRecord], opts: &BuildOptions) -> HyponymDataset {
    let map = records
        .par_iter()
        .filter_map(|r| match_filler(r).map(|m| (m, r.count)))
        .fold(HashMap::new, |mut acc: HashMap<(String, String), u64>, (m, n)| {
            let concept = if opts.singularize {
                singularize_head(&m.concept)
            } else {
                m.concept
            };
            *acc.entry((m.instance, concept)).or_default() += n;
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, n) in b {
                *a.entry(k).or_default() += n;
            }
            a
        });
    HyponymDataset::from_map(map)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HyponymError + '_ {
    move |source| HyponymError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads `np1 TAB filler TAB np2 TAB count` lines.
pub fn read_fillers(path: &Path) -> Result<Vec<FillerRecord>, HyponymError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| HyponymError::Format {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", f.len())));
        }
        let count = f[3]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad count {:?}", f[3])))?;
        let rec = FillerRecord::new(f[0], f[1], f[2], count);
        rec.validate().map_err(|e| bad(e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

/// Writes `instance TAB concept:count,concept:count` per instance.
pub fn write_dataset(path: &Path, dataset: &HyponymDataset) -> Result<(), HyponymError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for (instance, concepts) in dataset.iter() {
        let joined = concepts
            .iter()
            .map(|(c, n)| format!("{c}:{n}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(w, "{instance}\t{joined}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Splits `a:1,b,c:2` into `[(a,1), (b,c,2)]`: a piece without a numeric
/// suffix belongs to the concept that follows it.
fn parse_concepts(field: &str) -> Option<Vec<(String, u64)>> {
    let mut out = Vec::new();
    let mut pending = String::new();
    for piece in field.split(',') {
        if !pending.is_empty() {
            pending.push(',');
        }
        pending.push_str(piece);
        if let Some((concept, n)) = pending.rsplit_once(':') {
            if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) {
                out.push((concept.to_string(), n.parse().ok()?));
                pending.clear();
            }
        }
    }
    pending.is_empty().then_some(out)
}

pub fn read_dataset(path: &Path) -> Result<HyponymDataset, HyponymError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut counts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: &str| HyponymError::Format {
            path: path.display().to_string(),
            line: i + 1,
            message: message.to_string(),
        };
        let (instance, field) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected instance<TAB>concepts"))?;
        let concepts = parse_concepts(field).ok_or_else(|| bad("malformed concept list"))?;
        for (c, n) in concepts {
            counts.push((instance.to_string(), c, n));
        }
    }
    Ok(HyponymDataset::from_counts(counts))
}
