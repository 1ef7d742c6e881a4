use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{MappedLevel, RawAdvice, Study, TriageLevel};

use super::{RECORDS_FILE, VIGNETTES_FILE};

/// Minimum vignette-set size recommended for an evaluation.
pub const RECOMMENDED_MIN_VIGNETTES: usize = 45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IssueCode {
    EmptyStudy,
    NoRecords,
    DuplicateId,
    DuplicateRecord,
    UnknownVignette,
    TooFewInputters,
    UnbalancedInputters,
    UnmappedApp,
    UnmappedAdvice,
    UnknownLevel,
    InvalidPanelCount,
    LowPanelCount,
    BelowRecommendedSize,
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub code: IssueCode,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.location, self.code, self.message)
    }
}

/// Base-rate and participation counts, always reported.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudySummary {
    pub n_vignettes: usize,
    pub n_records: usize,
    pub strata: BTreeMap<String, usize>,
    pub gold_levels: BTreeMap<TriageLevel, usize>,
    pub records_per_app: BTreeMap<String, usize>,
    pub records_per_inputter: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
    pub summary: StudySummary,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has_error(&self, code: IssueCode) -> bool {
        self.errors.iter().any(|i| i.code == code)
    }

    pub fn has_warning(&self, code: IssueCode) -> bool {
        self.warnings.iter().any(|i| i.code == code)
    }

    fn error(&mut self, code: IssueCode, location: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Issue {
            code,
            location: location.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, code: IssueCode, location: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Issue {
            code,
            location: location.into(),
            message: message.into(),
        });
    }
}

fn vignette_row(index: usize) -> String {
    format!("{VIGNETTES_FILE}:{}", index + 2)
}

fn record_row(index: usize) -> String {
    format!("{RECORDS_FILE}:{}", index + 2)
}

/// Checks every structural invariant of a study. Problems are collected into
/// the report, never thrown. Row numbers assume the study's vignettes and
/// records are in file order, as the parsers produce them.
pub fn validate_study(study: &Study) -> ValidationReport {
    let mut report = ValidationReport {
        summary: summarize(study),
        ..Default::default()
    };

    if study.vignettes.is_empty() {
        report.error(IssueCode::EmptyStudy, VIGNETTES_FILE, "study has no vignettes");
    }
    if study.records.is_empty() {
        report.error(IssueCode::NoRecords, RECORDS_FILE, "study has no advice records");
    }

    let mut vignette_index: HashMap<&str, usize> = HashMap::new();
    for (i, v) in study.vignettes.iter().enumerate() {
        if let Some(first) = vignette_index.get(v.id.as_str()) {
            report.error(
                IssueCode::DuplicateId,
                vignette_row(i),
                format!("vignette id `{}` already used at {}", v.id, vignette_row(*first)),
            );
        } else {
            vignette_index.insert(&v.id, i);
        }
        if v.consensus.panel_count == 0 {
            report.error(
                IssueCode::InvalidPanelCount,
                vignette_row(i),
                format!("vignette `{}` has panel_count 0", v.id),
            );
        } else if v.consensus.panel_count < 2 {
            report.warn(
                IssueCode::LowPanelCount,
                vignette_row(i),
                format!(
                    "vignette `{}` gold standard rated by {} panel; two independent panels are recommended",
                    v.id, v.consensus.panel_count
                ),
            );
        }
    }

    let mut seen_triples: HashMap<(&str, &str, &str), usize> = HashMap::new();
    // (vignette, app) -> distinct inputters
    let mut pairs: BTreeMap<(&str, &str), BTreeSet<&str>> = BTreeMap::new();
    for (i, r) in study.records.iter().enumerate() {
        let key = (r.vignette_id.as_str(), r.app_id.as_str(), r.inputter_id.as_str());
        if let Some(first) = seen_triples.get(&key) {
            report.error(
                IssueCode::DuplicateRecord,
                record_row(i),
                format!(
                    "({}, {}, {}) already recorded at {}",
                    key.0,
                    key.1,
                    key.2,
                    record_row(*first)
                ),
            );
            continue;
        }
        seen_triples.insert(key, i);
        if !vignette_index.contains_key(r.vignette_id.as_str()) {
            report.error(
                IssueCode::UnknownVignette,
                record_row(i),
                format!("record references unknown vignette `{}`", r.vignette_id),
            );
            continue;
        }
        pairs
            .entry((r.vignette_id.as_str(), r.app_id.as_str()))
            .or_default()
            .insert(r.inputter_id.as_str());
    }

    for app in &study.apps {
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        for v in &study.vignettes {
            let n = pairs.get(&(v.id.as_str(), app.as_str())).map_or(0, BTreeSet::len);
            if n < 2 {
                report.error(
                    IssueCode::TooFewInputters,
                    format!("{RECORDS_FILE} vignette={} app={app}", v.id),
                    format!("{n} inputter(s) recorded; at least two are required"),
                );
            } else {
                *sizes.entry(n).or_default() += 1;
            }
        }
        if sizes.len() > 1 {
            let detail = sizes
                .iter()
                .map(|(n, count)| format!("{count} vignette(s) with {n} inputters"))
                .collect::<Vec<_>>()
                .join(", ");
            report.error(
                IssueCode::UnbalancedInputters,
                format!("{RECORDS_FILE} app={app}"),
                format!("every inputter must enter every vignette; found {detail}"),
            );
        }
    }

    check_mapping(study, &mut report);

    if !study.vignettes.is_empty() && study.vignettes.len() < RECOMMENDED_MIN_VIGNETTES {
        report.warn(
            IssueCode::BelowRecommendedSize,
            VIGNETTES_FILE,
            format!(
                "{} vignettes; at least {RECOMMENDED_MIN_VIGNETTES} are recommended",
                study.vignettes.len()
            ),
        );
    }

    report
}

fn check_mapping(study: &Study, report: &mut ValidationReport) {
    let mapping = &study.mapping;
    for (app, table) in &mapping.apps {
        for (raw, target) in table {
            if let MappedLevel::Extended(name) = target {
                if !mapping.extended.contains_key(name) {
                    report.error(
                        IssueCode::UnknownLevel,
                        format!("mapping apps.{app}.{raw}"),
                        format!("extended level `{name}` is not declared"),
                    );
                }
            }
        }
    }
    for (variant, overrides) in &mapping.variants {
        for name in overrides.keys() {
            if !mapping.extended.contains_key(name) {
                report.error(
                    IssueCode::UnknownLevel,
                    format!("mapping overrides.{variant}"),
                    format!("extended level `{name}` is not declared"),
                );
            }
        }
    }

    let mut reported: BTreeSet<(&str, &str)> = BTreeSet::new();
    for (i, r) in study.records.iter().enumerate() {
        let RawAdvice::Text(raw) = &r.advice else {
            continue;
        };
        match mapping.apps.get(&r.app_id) {
            None => {
                if reported.insert((r.app_id.as_str(), "")) {
                    report.error(
                        IssueCode::UnmappedApp,
                        record_row(i),
                        format!("app `{}` has no mapping table", r.app_id),
                    );
                }
            }
            Some(table) if !table.contains_key(raw) => {
                if reported.insert((r.app_id.as_str(), raw.as_str())) {
                    report.error(
                        IssueCode::UnmappedAdvice,
                        record_row(i),
                        format!("advice `{raw}` of app `{}` is not in the mapping", r.app_id),
                    );
                }
            }
            Some(_) => {}
        }
    }
}

fn summarize(study: &Study) -> StudySummary {
    let mut summary = StudySummary {
        n_vignettes: study.vignettes.len(),
        n_records: study.records.len(),
        ..Default::default()
    };
    for v in &study.vignettes {
        *summary.strata.entry(v.stratum.clone()).or_default() += 1;
        *summary.gold_levels.entry(v.gold).or_default() += 1;
    }
    for r in &study.records {
        *summary.records_per_app.entry(r.app_id.clone()).or_default() += 1;
        *summary.records_per_inputter.entry(r.inputter_id.clone()).or_default() += 1;
    }
    summary
}

/// A study that passed [`validate_study`] with zero errors.
///
/// Downstream stages only accept this type, so an unvalidated study cannot
/// reach the statistics:
///
/// ```compile_fail
/// use triagebench_core::domain::{MappingConfig, Study, Variant};
/// let study = Study::new(vec![], vec![], MappingConfig::default());
/// triagebench_core::pool::pool_study(&study, &Variant::default_variant());
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedStudy {
    study: Study,
    report: ValidationReport,
}

impl ValidatedStudy {
    pub fn new(study: Study) -> Result<Self, Box<ValidationReport>> {
        let report = validate_study(&study);
        if report.is_valid() {
            Ok(Self { study, report })
        } else {
            Err(Box::new(report))
        }
    }

    pub fn study(&self) -> &Study {
        &self.study
    }

    /// The passing report; may carry warnings.
    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn into_inner(self) -> Study {
        self.study
    }

    /// Restricts to a vignette subset and re-validates.
    pub fn restrict_to(&self, keep: &BTreeSet<String>) -> Result<Self, Box<ValidationReport>> {
        Self::new(self.study.restrict_to(keep))
    }
}

impl std::ops::Deref for ValidatedStudy {
    type Target = Study;

    fn deref(&self) -> &Study {
        &self.study
    }
}
