//! Canonical data model shared by every pipeline stage.
//!
//! Advice is kept on a fixed three-level urgency scale. App-specific
//! categories such as "1-day-urgent" only exist before mapping, as
//! [`ExtendedLevel`]s that collapse onto one of the canonical levels.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Reserved advice token recorded when an inputter selected "not sure" or the
/// app declined to give advice.
pub const ABSTAIN_TOKEN: &str = "__ABSTAIN__";

/// Name of the built-in extended level.
pub const ONE_DAY_URGENT: &str = "1-day-urgent";

/// Name of the mapping variant that applies only the default collapse targets.
pub const DEFAULT_VARIANT: &str = "default";

/// Canonical triage urgency, ordered by increasing urgency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriageLevel {
    SelfCare = 0,
    NonEmergency = 1,
    Emergency = 2,
}

impl TriageLevel {
    pub const ALL: [TriageLevel; 3] = [TriageLevel::SelfCare, TriageLevel::NonEmergency, TriageLevel::Emergency];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    /// File-format spelling: `emergency`, `non_emergency` or `self_care`.
    pub fn as_str(self) -> &'static str {
        match self {
            TriageLevel::SelfCare => "self_care",
            TriageLevel::NonEmergency => "non_emergency",
            TriageLevel::Emergency => "emergency",
        }
    }

    /// Short label used in report tables.
    pub fn abbrev(self) -> &'static str {
        match self {
            TriageLevel::SelfCare => "SC",
            TriageLevel::NonEmergency => "NE",
            TriageLevel::Emergency => "E",
        }
    }
}

impl fmt::Display for TriageLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown triage level {0:?} (expected emergency, non_emergency or self_care)")]
pub struct UnknownLevel(pub String);

impl FromStr for TriageLevel {
    type Err = UnknownLevel;

    /// Case-sensitive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "self_care" => Ok(TriageLevel::SelfCare),
            "non_emergency" => Ok(TriageLevel::NonEmergency),
            "emergency" => Ok(TriageLevel::Emergency),
            other => Err(UnknownLevel(other.to_string())),
        }
    }
}

/// Compares two canonical levels by urgency.
pub fn urgency_compare(a: TriageLevel, b: TriageLevel) -> Ordering {
    a.code().cmp(&b.code())
}

/// A non-canonical category together with its default canonical target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtendedLevel {
    pub name: String,
    pub default_collapse: TriageLevel,
}

impl ExtendedLevel {
    pub fn new(name: impl Into<String>, default_collapse: TriageLevel) -> Self {
        Self {
            name: name.into(),
            default_collapse,
        }
    }

    pub fn one_day_urgent() -> Self {
        Self::new(ONE_DAY_URGENT, TriageLevel::NonEmergency)
    }
}

/// Advice after mapping: a canonical level or an abstention.
///
/// Deliberately not `PartialOrd`: an abstention has no urgency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Advice {
    Level(TriageLevel),
    Abstain,
}

impl Advice {
    pub fn level(self) -> Option<TriageLevel> {
        match self {
            Advice::Level(level) => Some(level),
            Advice::Abstain => None,
        }
    }

    pub fn is_abstain(self) -> bool {
        matches!(self, Advice::Abstain)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Advice::Level(level) => level.as_str(),
            Advice::Abstain => "abstain",
        }
    }
}

impl From<TriageLevel> for Advice {
    fn from(level: TriageLevel) -> Self {
        Advice::Level(level)
    }
}

impl fmt::Display for Advice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Advice exactly as an inputter recorded it, before mapping.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RawAdvice {
    Text(String),
    Abstain,
}

impl RawAdvice {
    /// Parses a record cell; the reserved token becomes [`RawAdvice::Abstain`].
    pub fn from_cell(cell: &str) -> Self {
        if cell == ABSTAIN_TOKEN {
            RawAdvice::Abstain
        } else {
            RawAdvice::Text(cell.to_string())
        }
    }

    pub fn as_cell(&self) -> &str {
        match self {
            RawAdvice::Text(text) => text,
            RawAdvice::Abstain => ABSTAIN_TOKEN,
        }
    }
}

/// Gold-standard consensus metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Consensus {
    /// Number of independent physician panels that rated the case.
    pub panel_count: u32,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vignette {
    pub id: String,
    pub description: String,
    pub gold: TriageLevel,
    /// Symptom-type stratum the case was sampled from.
    pub stratum: String,
    pub source: String,
    pub consensus: Consensus,
}

/// One (vignette, app, inputter) observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdviceRecord {
    pub vignette_id: String,
    pub app_id: String,
    pub inputter_id: String,
    pub advice: RawAdvice,
}

/// Where an app-native advice string lands before collapsing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MappedLevel {
    Canonical(TriageLevel),
    Extended(String),
}

/// A named set of extended-level overrides used for sensitivity analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub overrides: BTreeMap<String, TriageLevel>,
}

impl Variant {
    pub fn default_variant() -> Self {
        Self {
            name: DEFAULT_VARIANT.to_string(),
            overrides: BTreeMap::new(),
        }
    }

    pub fn is_default(&self) -> bool {
        self.overrides.is_empty() && self.name == DEFAULT_VARIANT
    }

    /// Human-readable summary, e.g. `1-day-urgent -> emergency`.
    pub fn describe(&self) -> String {
        if self.overrides.is_empty() {
            return "default collapse targets".to_string();
        }
        self.overrides
            .iter()
            .map(|(name, level)| format!("{name} -> {level}"))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Per-app advice tables plus extended-level declarations and named override
/// sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingConfig {
    pub apps: BTreeMap<String, BTreeMap<String, MappedLevel>>,
    pub extended: BTreeMap<String, ExtendedLevel>,
    pub variants: BTreeMap<String, BTreeMap<String, TriageLevel>>,
}

impl Default for MappingConfig {
    fn default() -> Self {
        let builtin = ExtendedLevel::one_day_urgent();
        Self {
            apps: BTreeMap::new(),
            extended: BTreeMap::from([(builtin.name.clone(), builtin)]),
            variants: BTreeMap::new(),
        }
    }
}

impl MappingConfig {
    /// Mapping where every app uses the canonical spellings verbatim.
    pub fn identity<I, S>(apps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let table: BTreeMap<String, MappedLevel> = TriageLevel::ALL
            .iter()
            .map(|level| (level.as_str().to_string(), MappedLevel::Canonical(*level)))
            .collect();
        let mut config = Self::default();
        for app in apps {
            config.apps.insert(app.into(), table.clone());
        }
        config
    }

    /// Looks up a named variant. `"default"` always resolves.
    pub fn variant(&self, name: &str) -> Option<Variant> {
        if let Some(overrides) = self.variants.get(name) {
            return Some(Variant {
                name: name.to_string(),
                overrides: overrides.clone(),
            });
        }
        (name == DEFAULT_VARIANT).then(Variant::default_variant)
    }

    /// Canonical target of an extended level under `variant`.
    pub fn collapse(&self, extended: &str, variant: &Variant) -> Option<TriageLevel> {
        variant
            .overrides
            .get(extended)
            .copied()
            .or_else(|| self.extended.get(extended).map(|e| e.default_collapse))
    }
}

/// A complete study: cases, observations, and the mapping used to read them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Study {
    pub vignettes: Vec<Vignette>,
    pub records: Vec<AdviceRecord>,
    /// Sorted, distinct app ids occurring in `records`.
    pub apps: Vec<String>,
    /// Sorted, distinct inputter ids occurring in `records`.
    pub inputters: Vec<String>,
    pub mapping: MappingConfig,
}

impl Study {
    pub fn new(vignettes: Vec<Vignette>, records: Vec<AdviceRecord>, mapping: MappingConfig) -> Self {
        let apps = distinct(records.iter().map(|r| r.app_id.as_str()));
        let inputters = distinct(records.iter().map(|r| r.inputter_id.as_str()));
        Self {
            vignettes,
            records,
            apps,
            inputters,
            mapping,
        }
    }

    pub fn vignette(&self, id: &str) -> Option<&Vignette> {
        self.vignettes.iter().find(|v| v.id == id)
    }

    pub fn gold_by_id(&self) -> BTreeMap<&str, TriageLevel> {
        self.vignettes.iter().map(|v| (v.id.as_str(), v.gold)).collect()
    }

    /// Copy of the study keeping only the listed vignettes and their records.
    pub fn restrict_to(&self, keep: &BTreeSet<String>) -> Study {
        let vignettes = self
            .vignettes
            .iter()
            .filter(|v| keep.contains(&v.id))
            .cloned()
            .collect();
        let records = self
            .records
            .iter()
            .filter(|r| keep.contains(&r.vignette_id))
            .cloned()
            .collect();
        Study::new(vignettes, records, self.mapping.clone())
    }
}

fn distinct<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<String> {
    ids.collect::<BTreeSet<_>>().into_iter().map(str::to_string).collect()
}
