//! Mine coordinate-term entity sets from HTML tables and label them with
//! hypernyms harvested from lexical patterns.
//!
//! The pipeline runs in stages, each with a plain-text artifact:
//!
//! 1. [`extract`]: find relational tables and clean their columns.
//! 2. [`triplets`]: turn columns into adjacent-entity triplet records.
//! 3. [`cluster`]: single-pass bottom-up clustering of ranked triplets.
//! 4. [`hyponym`]: build the instance → concept co-occurrence dataset.
//! 5. [`hypernym`]: rank labels per cluster and emit concept-instance pairs.
//! 6. [`pipeline`]: orchestration and the corpus summary report.
//!
//! [`eval`] holds clustering metrics and the K-means baseline.

pub mod extract;

pub use extract::ColumnRef;
pub mod triplets;
pub mod cluster;
pub mod hyponym;
pub mod hypernym;
pub mod eval;
pub mod pipeline;
