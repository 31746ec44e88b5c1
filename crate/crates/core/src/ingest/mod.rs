//! Workbook loaders.
//!
//! Two front ends produce the same canonical model: [`load_xlsx`] reads
//! an Office Open XML container (the subset the analyses need: sheets,
//! cells with cached values, comments, defined names, external link
//! targets, protection/validation flags, document properties), and
//! [`load_fixture`] reads the line-oriented text fixture format used by
//! the test corpus. VBA arrives as exported text modules in a sidecar
//! directory named `<workbook file name>.vba/`.

mod fixture;
mod xlsx;

use std::fs;
use std::path::Path;

use chrono::NaiveDateTime;
use thiserror::Error;

use crate::model::{FileAttribute, FileMeta, Workbook};
use crate::vba::MacroModule;

pub use fixture::load_fixture;
pub use xlsx::load_xlsx;

#[cfg(test)]
pub(crate) use fixture::parse_fixture;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a zip container")]
    NotAZipContainer { path: String },
    #[error("workbook part missing from container: {part}")]
    MissingWorkbookPart { part: String },
    #[error("sheet {sheet:?} is malformed: {detail}")]
    SheetXmlMalformed { sheet: String, detail: String },
    #[error("fixture syntax error at line {line}: {message}")]
    FixtureSyntax { line: usize, message: String },
}

/// A loaded workbook plus anything that needed a fallback while reading.
/// `observations` is empty iff every part parsed cleanly.
#[derive(Debug, Clone)]
pub struct IngestReport {
    pub workbook: Workbook,
    pub observations: Vec<String>,
}

/// Dispatch on extension: `.xlsx` goes through the container reader,
/// everything else is treated as fixture text.
pub fn load_workbook(path: &Path) -> Result<IngestReport, IngestError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("xlsx") => load_xlsx(path),
        _ => load_fixture(path),
    }
}

/// Load exported VBA module text files from a directory. Files are taken
/// in name order; unreadable files become observations, never errors.
pub fn load_vba_modules(dir: &Path) -> (Vec<MacroModule>, Vec<String>) {
    let mut modules = Vec::new();
    let mut observations = Vec::new();
    let entries = match fs::read_dir(dir) {
        Ok(entries) => entries,
        Err(e) => {
            observations.push(format!("cannot read vba directory {}: {e}", dir.display()));
            return (modules, observations);
        }
    };
    let mut paths: Vec<_> = entries.filter_map(|e| e.ok()).map(|e| e.path()).collect();
    paths.sort();
    for path in paths {
        if !path.is_file() {
            continue;
        }
        let name = path
            .file_stem()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        match fs::read_to_string(&path) {
            Ok(source) => modules.push(MacroModule::from_source(name, source)),
            Err(e) => observations.push(format!("unreadable vba module {}: {e}", path.display())),
        }
    }
    (modules, observations)
}

/// The sidecar directory holding a workbook's exported macros.
pub fn vba_sidecar_dir(workbook_path: &Path) -> Option<std::path::PathBuf> {
    let file_name = workbook_path.file_name()?;
    let mut name = file_name.to_os_string();
    name.push(".vba");
    Some(workbook_path.with_file_name(name))
}

pub(crate) fn attach_sidecar_vba(
    path: &Path,
    workbook: &mut Workbook,
    observations: &mut Vec<String>,
) {
    if let Some(dir) = vba_sidecar_dir(path) {
        if dir.is_dir() {
            let (modules, obs) = load_vba_modules(&dir);
            workbook.vba_modules = modules;
            observations.extend(obs);
        }
    }
}

pub(crate) fn file_meta_from_fs(path: &Path) -> FileMeta {
    let mut meta = FileMeta::default();
    if let Ok(fs_meta) = fs::metadata(path) {
        meta.size_bytes = fs_meta.len();
        meta.modified = fs_meta.modified().ok().map(system_time_to_naive);
        meta.accessed = fs_meta.accessed().ok().map(system_time_to_naive);
        meta.created = fs_meta.created().ok().map(system_time_to_naive);
        if fs_meta.permissions().readonly() {
            meta.attributes.insert(FileAttribute::ReadOnly);
        }
    }
    meta
}

fn system_time_to_naive(t: std::time::SystemTime) -> NaiveDateTime {
    let datetime: chrono::DateTime<chrono::Utc> = t.into();
    datetime.naive_utc()
}

/// Days between the spreadsheet epoch and the date, as stored in cell
/// values. Serial 60 is the fictitious 1900-02-29; dates at or past
/// serial 61 use the 1899-12-30 base, earlier ones 1899-12-31.
pub fn date_to_serial(d: NaiveDateTime) -> f64 {
    let base = chrono::NaiveDate::from_ymd_opt(1899, 12, 30).unwrap();
    let days = (d.date() - base).num_days();
    let days = if days < 60 { days - 1 } else { days };
    let seconds = d
        .time()
        .signed_duration_since(chrono::NaiveTime::MIN)
        .num_seconds();
    days as f64 + seconds as f64 / 86_400.0
}

pub fn serial_to_date(serial: f64) -> Option<NaiveDateTime> {
    if !(0.0..=2_958_465.0).contains(&serial) {
        return None;
    }
    let days = serial.floor() as i64;
    let days = if days < 60 { days + 1 } else { days };
    let base = chrono::NaiveDate::from_ymd_opt(1899, 12, 30).unwrap();
    let date = base.checked_add_signed(chrono::Duration::days(days))?;
    let seconds = ((serial - serial.floor()) * 86_400.0).round() as u32;
    let time = chrono::NaiveTime::from_num_seconds_from_midnight_opt(seconds % 86_400, 0)?;
    Some(NaiveDateTime::new(date, time))
}
