use std::collections::HashMap;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use super::{IngestError, Location};
use crate::domain::{AdviceRecord, Consensus, RawAdvice, TriageLevel, Vignette};

pub const VIGNETTES_HEADER: [&str; 7] = [
    "vignette_id",
    "description",
    "gold_level",
    "stratum",
    "source",
    "panel_count",
    "consensus_method",
];

pub const RECORDS_HEADER: [&str; 4] = ["vignette_id", "app_id", "inputter_id", "raw_advice"];

fn csv_error(file: &str, err: csv::Error) -> IngestError {
    let line = err.position().map(|p| p.line());
    IngestError::Csv {
        location: Location {
            file: file.to_string(),
            line,
            column: None,
        },
        message: err.to_string(),
    }
}

/// Reads all data rows after checking the header matches `expected` exactly.
fn read_rows(file: &str, bytes: &[u8], expected: &[&str]) -> Result<Vec<(u64, StringRecord)>, IngestError> {
    let mut reader = ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes);
    let header = reader.headers().map_err(|e| csv_error(file, e))?.clone();
    let found: Vec<&str> = header.iter().collect();
    if let Some(missing) = expected.iter().find(|col| !found.contains(col)) {
        return Err(IngestError::MissingColumn {
            location: Location::line(file, 1),
            column: missing.to_string(),
        });
    }
    if found != expected {
        return Err(IngestError::HeaderMismatch {
            location: Location::line(file, 1),
            expected: expected.join(","),
            found: found.join(","),
        });
    }

    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(file, e))?;
        let line = row.position().map_or(0, |p| p.line());
        rows.push((line, row));
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyStudy {
            location: Location::file(file),
        });
    }
    Ok(rows)
}

fn required<'a>(file: &str, line: u64, row: &'a StringRecord, idx: usize, name: &str) -> Result<&'a str, IngestError> {
    match row.get(idx) {
        Some(value) if !value.is_empty() => Ok(value),
        _ => Err(IngestError::MissingValue {
            location: Location::cell(file, line, name),
        }),
    }
}

/// Parses a vignette table. Vignettes are returned in file order.
pub fn parse_vignettes(file: &str, bytes: &[u8]) -> Result<Vec<Vignette>, IngestError> {
    let rows = read_rows(file, bytes, &VIGNETTES_HEADER)?;
    let mut seen: HashMap<String, u64> = HashMap::new();
    let mut vignettes = Vec::with_capacity(rows.len());

    for (line, row) in rows {
        let id = required(file, line, &row, 0, "vignette_id")?;
        if let Some(&first_line) = seen.get(id) {
            return Err(IngestError::DuplicateId {
                location: Location::cell(file, line, "vignette_id"),
                id: id.to_string(),
                first_line,
            });
        }
        seen.insert(id.to_string(), line);

        let gold_cell = &row[2];
        let gold: TriageLevel = gold_cell.parse().map_err(|_| IngestError::UnknownGoldLevel {
            location: Location::cell(file, line, "gold_level"),
            value: gold_cell.to_string(),
        })?;
        let stratum = required(file, line, &row, 3, "stratum")?;
        let panel_cell = &row[5];
        let panel_count = match panel_cell.parse::<u32>() {
            Ok(n) if n >= 1 => n,
            _ => {
                return Err(IngestError::InvalidPanelCount {
                    location: Location::cell(file, line, "panel_count"),
                    value: panel_cell.to_string(),
                })
            }
        };

        vignettes.push(Vignette {
            id: id.to_string(),
            description: row[1].to_string(),
            gold,
            stratum: stratum.to_string(),
            source: row[4].to_string(),
            consensus: Consensus {
                panel_count,
                method: row[6].to_string(),
            },
        });
    }
    Ok(vignettes)
}

/// Parses an advice-record table. Raw advice is kept verbatim; the
/// `__ABSTAIN__` token becomes [`RawAdvice::Abstain`].
pub fn parse_records(file: &str, bytes: &[u8]) -> Result<Vec<AdviceRecord>, IngestError> {
    let rows = read_rows(file, bytes, &RECORDS_HEADER)?;
    let mut seen: HashMap<(String, String, String), u64> = HashMap::new();
    let mut records = Vec::with_capacity(rows.len());

    for (line, row) in rows {
        let vignette_id = required(file, line, &row, 0, "vignette_id")?;
        let app_id = required(file, line, &row, 1, "app_id")?;
        let inputter_id = required(file, line, &row, 2, "inputter_id")?;
        let raw = required(file, line, &row, 3, "raw_advice")?;

        let key = (vignette_id.to_string(), app_id.to_string(), inputter_id.to_string());
        if let Some(&first_line) = seen.get(&key) {
            return Err(IngestError::DuplicateRecord {
                location: Location::line(file, line),
                key: Box::new(key),
                first_line,
            });
        }
        seen.insert(key, line);

        records.push(AdviceRecord {
            vignette_id: vignette_id.to_string(),
            app_id: app_id.to_string(),
            inputter_id: inputter_id.to_string(),
            advice: RawAdvice::from_cell(raw),
        });
    }
    Ok(records)
}

fn write_table<'a, I>(header: &[&str], rows: I) -> Result<String, IngestError>
where
    I: IntoIterator<Item = Vec<&'a str>>,
{
    let to_err = |message: String| IngestError::Csv {
        location: Location::file("<serialize>"),
        message,
    };
    let mut writer = WriterBuilder::new().from_writer(Vec::new());
    writer.write_record(header).map_err(|e| to_err(e.to_string()))?;
    for row in rows {
        writer.write_record(&row).map_err(|e| to_err(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| to_err(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| to_err(e.to_string()))
}

pub fn serialize_vignettes(vignettes: &[Vignette]) -> Result<String, IngestError> {
    let counts: Vec<String> = vignettes.iter().map(|v| v.consensus.panel_count.to_string()).collect();
    write_table(
        &VIGNETTES_HEADER,
        vignettes.iter().zip(&counts).map(|(v, count)| {
            vec![
                v.id.as_str(),
                v.description.as_str(),
                v.gold.as_str(),
                v.stratum.as_str(),
                v.source.as_str(),
                count.as_str(),
                v.consensus.method.as_str(),
            ]
        }),
    )
}

pub fn serialize_records(records: &[AdviceRecord]) -> Result<String, IngestError> {
    write_table(
        &RECORDS_HEADER,
        records.iter().map(|r| {
            vec![
                r.vignette_id.as_str(),
                r.app_id.as_str(),
                r.inputter_id.as_str(),
                r.advice.as_cell(),
            ]
        }),
    )
}
