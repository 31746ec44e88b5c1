//! `sheetdoc` audits the documentation state of spreadsheet files.
//!
//! The library is organized around an ingestion-independent workbook model
//! ([`model`]): the xlsx reader and the plain-text fixture reader in
//! [`ingest`] both produce the same structures, and every analysis works
//! from there.
//!
//! - [`formula`] — formula lexer/parser, reference extraction, and the
//!   relative (R1C1-offset) normal form used for region-consistency checks.
//! - [`doc_comment`] — the structured documentation comment schema:
//!   parse, validate, serialize.
//! - [`classify`] — cell type taxonomy (Title/Data/Formula/Link),
//!   precedent graph, documentation coverage.
//! - [`inventory`] — per-file metric row, additive risk score, stale-sum
//!   detection, and the append-only file manifest.
//! - [`diff`] — change records between two workbook versions.
//! - [`vba`] — macro module documentation headers and lint rules.
//! - [`reports`] — the standardized 11-column documentation table,
//!   attribute maps, and CSV/Markdown/JSON rendering.

pub mod classify;
pub mod diff;
pub mod doc_comment;
pub mod formula;
pub mod ingest;
pub mod inventory;
pub mod model;
pub mod reports;
mod tabletext;
pub mod vba;

pub use model::{Cell, CellAddress, CellContent, CellRange, Sheet, Workbook};
