//! Reading, validating and writing study files.
//!
//! A study lives in three files:
//!
//! * `vignettes.csv` with header
//!   `vignette_id,description,gold_level,stratum,source,panel_count,consensus_method`
//! * `records.csv` with header `vignette_id,app_id,inputter_id,raw_advice`
//! * `mapping.cfg`, a TOML document with `[apps.<id>]`, `[extended]` and
//!   `[overrides.<variant>]` tables
//!
//! Parsers are pure functions over byte buffers. Every study must pass
//! [`validate_study`] before statistics run; [`ValidatedStudy`] is the only
//! handle the downstream modules accept.

mod mapping;
mod tables;
mod validate;

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use mapping::{parse_mapping, serialize_mapping, MappingError};
pub use tables::{
    parse_records, parse_vignettes, serialize_records, serialize_vignettes, RECORDS_HEADER, VIGNETTES_HEADER,
};
pub use validate::{
    validate_study, Issue, IssueCode, StudySummary, ValidatedStudy, ValidationReport, RECOMMENDED_MIN_VIGNETTES,
};

use crate::domain::Study;

pub const VIGNETTES_FILE: &str = "vignettes.csv";
pub const RECORDS_FILE: &str = "records.csv";
pub const MAPPING_FILE: &str = "mapping.cfg";

/// File and (1-based) line an error refers to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub file: String,
    pub line: Option<u64>,
    pub column: Option<String>,
}

impl Location {
    pub fn file(file: &str) -> Self {
        Self {
            file: file.to_string(),
            line: None,
            column: None,
        }
    }

    pub fn line(file: &str, line: u64) -> Self {
        Self {
            line: Some(line),
            ..Self::file(file)
        }
    }

    pub fn cell(file: &str, line: u64, column: &str) -> Self {
        Self {
            column: Some(column.to_string()),
            ..Self::line(file, line)
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        if let Some(column) = &self.column {
            write!(f, " [{column}]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{location}: EmptyStudy: no data rows")]
    EmptyStudy { location: Location },
    #[error("{location}: MissingColumn: required column `{column}` not found in header")]
    MissingColumn { location: Location, column: String },
    #[error("{location}: HeaderMismatch: expected `{expected}`, found `{found}`")]
    HeaderMismatch {
        location: Location,
        expected: String,
        found: String,
    },
    #[error("{location}: DuplicateId: vignette id `{id}` already used on line {first_line}")]
    DuplicateId {
        location: Location,
        id: String,
        first_line: u64,
    },
    #[error("{location}: UnknownGoldLevel: `{value}` (expected emergency, non_emergency or self_care)")]
    UnknownGoldLevel { location: Location, value: String },
    #[error("{location}: MissingValue: empty required field")]
    MissingValue { location: Location },
    #[error("{location}: InvalidPanelCount: `{value}` is not an integer >= 1")]
    InvalidPanelCount { location: Location, value: String },
    #[error("{location}: DuplicateRecord: ({}, {}, {}) already recorded on line {first_line}", key.0, key.1, key.2)]
    DuplicateRecord {
        location: Location,
        /// (vignette_id, app_id, inputter_id).
        key: Box<(String, String, String)>,
        first_line: u64,
    },
    #[error("{location}: malformed CSV: {message}")]
    Csv { location: Location, message: String },
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl IngestError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// The three serialized study files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudyFiles {
    pub vignettes: String,
    pub records: String,
    pub mapping: String,
}

impl StudyFiles {
    pub fn write_to(&self, dir: &Path) -> Result<(), IngestError> {
        fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
        for (name, body) in [
            (VIGNETTES_FILE, &self.vignettes),
            (RECORDS_FILE, &self.records),
            (MAPPING_FILE, &self.mapping),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| IngestError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Parses the three files into an (unvalidated) study.
pub fn parse_study(
    vignettes: (&str, &[u8]),
    records: (&str, &[u8]),
    mapping: (&str, &[u8]),
) -> Result<Study, IngestError> {
    let vignettes = parse_vignettes(vignettes.0, vignettes.1)?;
    let records = parse_records(records.0, records.1)?;
    let mapping = parse_mapping(mapping.0, mapping.1)?;
    Ok(Study::new(vignettes, records, mapping))
}

/// Reads a study from explicit file paths.
pub fn read_study(vignettes: &Path, records: &Path, mapping: &Path) -> Result<Study, IngestError> {
    let read = |path: &Path| fs::read(path).map_err(|e| IngestError::io(path, e));
    let (v, r, m) = (read(vignettes)?, read(records)?, read(mapping)?);
    parse_study(
        (&vignettes.display().to_string(), &v),
        (&records.display().to_string(), &r),
        (&mapping.display().to_string(), &m),
    )
}

/// Reads `vignettes.csv`, `records.csv` and `mapping.cfg` from a directory.
pub fn read_study_dir(dir: &Path) -> Result<Study, IngestError> {
    read_study(
        &dir.join(VIGNETTES_FILE),
        &dir.join(RECORDS_FILE),
        &dir.join(MAPPING_FILE),
    )
}

/// Writes a study back into the three file formats accepted by the parsers.
pub fn serialize_study(study: &Study) -> Result<StudyFiles, IngestError> {
    if study.vignettes.is_empty() {
        return Err(IngestError::EmptyStudy {
            location: Location::file(VIGNETTES_FILE),
        });
    }
    Ok(StudyFiles {
        vignettes: serialize_vignettes(&study.vignettes)?,
        records: serialize_records(&study.records)?,
        mapping: serialize_mapping(&study.mapping),
    })
}
