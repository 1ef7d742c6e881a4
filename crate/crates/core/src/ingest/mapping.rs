//! `mapping.cfg`: per-app advice tables, extended-level declarations and
//! sensitivity override sets.
//!
//! ```toml
//! [extended]
//! "1-day-urgent" = "non_emergency"   # built in; may be restated
//!
//! [apps.appA]
//! "Call an ambulance" = "emergency"
//! "See a doctor within 24h" = "1-day-urgent"
//!
//! [overrides.urgent_as_emergency]
//! "1-day-urgent" = "emergency"
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;
use toml::{Table, Value};

use crate::domain::{ExtendedLevel, MappedLevel, MappingConfig, TriageLevel, ABSTAIN_TOKEN, DEFAULT_VARIANT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MappingError {
    #[error("{file}: malformed mapping document: {message}")]
    Syntax { file: String, message: String },
    #[error("{file}: DuplicateKey: {message}")]
    DuplicateKey { file: String, message: String },
    #[error("{file}: unknown top-level key `{key}` (expected apps, extended, overrides)")]
    UnknownSection { file: String, key: String },
    #[error("{file}: `{path}` must be a table")]
    NotATable { file: String, path: String },
    #[error("{file}: `{path}` must be a string")]
    NotAString { file: String, path: String },
    #[error(
        "{file}: UnknownLevel: `{path}` targets `{level}`, which is neither canonical nor a declared extended level"
    )]
    UnknownLevel { file: String, path: String, level: String },
    #[error("{file}: extended level `{name}` clashes with a canonical level or reserved token")]
    ReservedName { file: String, name: String },
    #[error("{file}: `{path}`: the abstention token cannot be mapped")]
    ReservedAdvice { file: String, path: String },
    #[error("{file}: variant name `{DEFAULT_VARIANT}` is reserved")]
    ReservedVariant { file: String },
}

fn table<'a>(file: &str, path: &str, value: &'a Value) -> Result<&'a Table, MappingError> {
    value.as_table().ok_or_else(|| MappingError::NotATable {
        file: file.to_string(),
        path: path.to_string(),
    })
}

fn string<'a>(file: &str, path: &str, value: &'a Value) -> Result<&'a str, MappingError> {
    value.as_str().ok_or_else(|| MappingError::NotAString {
        file: file.to_string(),
        path: path.to_string(),
    })
}

fn canonical(file: &str, path: &str, level: &str) -> Result<TriageLevel, MappingError> {
    level.parse().map_err(|_| MappingError::UnknownLevel {
        file: file.to_string(),
        path: path.to_string(),
        level: level.to_string(),
    })
}

/// Parses a mapping document. Mapping targets must be canonical level names
/// or extended levels declared in `[extended]` (or the built-in
/// `1-day-urgent`).
pub fn parse_mapping(file: &str, bytes: &[u8]) -> Result<MappingConfig, MappingError> {
    let text = std::str::from_utf8(bytes).map_err(|e| MappingError::Syntax {
        file: file.to_string(),
        message: e.to_string(),
    })?;
    let doc: Table = text.parse().map_err(|e: toml::de::Error| {
        let message = e.message().to_string();
        if message.contains("duplicate key") {
            MappingError::DuplicateKey {
                file: file.to_string(),
                message: e.to_string().trim().to_string(),
            }
        } else {
            MappingError::Syntax {
                file: file.to_string(),
                message: e.to_string().trim().to_string(),
            }
        }
    })?;

    for key in doc.keys() {
        if !matches!(key.as_str(), "apps" | "extended" | "overrides") {
            return Err(MappingError::UnknownSection {
                file: file.to_string(),
                key: key.clone(),
            });
        }
    }

    let mut config = MappingConfig::default();

    if let Some(extended) = doc.get("extended") {
        for (name, target) in table(file, "extended", extended)? {
            let path = format!("extended.{name}");
            if name.parse::<TriageLevel>().is_ok() || name == ABSTAIN_TOKEN || name.is_empty() {
                return Err(MappingError::ReservedName {
                    file: file.to_string(),
                    name: name.clone(),
                });
            }
            let level = canonical(file, &path, string(file, &path, target)?)?;
            config
                .extended
                .insert(name.clone(), ExtendedLevel::new(name.clone(), level));
        }
    }

    if let Some(apps) = doc.get("apps") {
        for (app, entries) in table(file, "apps", apps)? {
            let app_path = format!("apps.{app}");
            let mut entries_out = BTreeMap::new();
            for (raw, target) in table(file, &app_path, entries)? {
                let path = format!("{app_path}.{raw}");
                if raw == ABSTAIN_TOKEN {
                    return Err(MappingError::ReservedAdvice {
                        file: file.to_string(),
                        path,
                    });
                }
                let target = string(file, &path, target)?;
                let mapped = if let Ok(level) = target.parse::<TriageLevel>() {
                    MappedLevel::Canonical(level)
                } else if config.extended.contains_key(target) {
                    MappedLevel::Extended(target.to_string())
                } else {
                    return Err(MappingError::UnknownLevel {
                        file: file.to_string(),
                        path,
                        level: target.to_string(),
                    });
                };
                entries_out.insert(raw.clone(), mapped);
            }
            config.apps.insert(app.clone(), entries_out);
        }
    }

    if let Some(overrides) = doc.get("overrides") {
        for (variant, entries) in table(file, "overrides", overrides)? {
            if variant == DEFAULT_VARIANT {
                return Err(MappingError::ReservedVariant { file: file.to_string() });
            }
            let variant_path = format!("overrides.{variant}");
            let mut set = BTreeMap::new();
            for (name, target) in table(file, &variant_path, entries)? {
                let path = format!("{variant_path}.{name}");
                if !config.extended.contains_key(name) {
                    return Err(MappingError::UnknownLevel {
                        file: file.to_string(),
                        path,
                        level: name.clone(),
                    });
                }
                let level = canonical(file, &path, string(file, &path, target)?)?;
                set.insert(name.clone(), level);
            }
            config.variants.insert(variant.clone(), set);
        }
    }

    Ok(config)
}

/// TOML basic-string quoting, valid for both keys and values.
fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Writes a mapping document with deterministic (sorted) key order.
pub fn serialize_mapping(config: &MappingConfig) -> String {
    let mut out = String::new();
    out.push_str("[extended]\n");
    for (name, ext) in &config.extended {
        let _ = writeln!(out, "{} = {}", quote(name), quote(ext.default_collapse.as_str()));
    }
    for (app, entries) in &config.apps {
        let _ = writeln!(out, "\n[apps.{}]", quote(app));
        for (raw, target) in entries {
            let target = match target {
                MappedLevel::Canonical(level) => level.as_str(),
                MappedLevel::Extended(name) => name.as_str(),
            };
            let _ = writeln!(out, "{} = {}", quote(raw), quote(target));
        }
    }
    for (variant, entries) in &config.variants {
        let _ = writeln!(out, "\n[overrides.{}]", quote(variant));
        for (name, level) in entries {
            let _ = writeln!(out, "{} = {}", quote(name), quote(level.as_str()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Variant, ONE_DAY_URGENT};

    fn parse(text: &str) -> Result<MappingConfig, MappingError> {
        parse_mapping("mapping.cfg", text.as_bytes())
    }

    #[test]
    fn builtin_extended_level_collapses_by_default() {
        let config = parse("[apps.appA]\n\"1-day-urgent\" = \"1-day-urgent\"\n").unwrap();
        assert_eq!(
            config.apps["appA"]["1-day-urgent"],
            MappedLevel::Extended(ONE_DAY_URGENT.into())
        );
        assert_eq!(
            config.collapse(ONE_DAY_URGENT, &Variant::default_variant()),
            Some(TriageLevel::NonEmergency)
        );
    }

    #[test]
    fn canonical_targets_map_directly() {
        let config = parse("[apps.appA]\n\"ER now\" = \"emergency\"\n").unwrap();
        assert_eq!(
            config.apps["appA"]["ER now"],
            MappedLevel::Canonical(TriageLevel::Emergency)
        );
    }

    #[test]
    fn undeclared_target_is_unknown_level() {
        let err = parse("[apps.appA]\nsoon = \"urgentish\"\n").unwrap_err();
        assert!(matches!(err, MappingError::UnknownLevel { ref level, .. } if level == "urgentish"));
    }

    #[test]
    fn declared_extended_level_is_accepted() {
        let config = parse(
            "[extended]\nurgentish = \"emergency\"\n[apps.appA]\nsoon = \"urgentish\"\n[overrides.low]\nurgentish = \"self_care\"\n",
        )
        .unwrap();
        let low = config.variant("low").unwrap();
        assert_eq!(config.collapse("urgentish", &low), Some(TriageLevel::SelfCare));
        assert_eq!(
            config.collapse("urgentish", &Variant::default_variant()),
            Some(TriageLevel::Emergency)
        );
    }

    #[test]
    fn duplicate_raw_key_is_rejected() {
        let err = parse("[apps.appA]\n\"ER\" = \"emergency\"\n\"ER\" = \"self_care\"\n").unwrap_err();
        assert!(matches!(err, MappingError::DuplicateKey { .. }), "{err:?}");
    }

    #[test]
    fn override_of_undeclared_level_is_rejected() {
        let err = parse("[overrides.v]\nsomething = \"emergency\"\n").unwrap_err();
        assert!(matches!(err, MappingError::UnknownLevel { .. }));
    }

    #[test]
    fn reserved_names_are_rejected() {
        assert!(matches!(
            parse("[extended]\nemergency = \"self_care\"\n").unwrap_err(),
            MappingError::ReservedName { .. }
        ));
        assert!(matches!(
            parse("[apps.a]\n\"__ABSTAIN__\" = \"self_care\"\n").unwrap_err(),
            MappingError::ReservedAdvice { .. }
        ));
        assert!(matches!(
            parse("[overrides.default]\n").unwrap_err(),
            MappingError::ReservedVariant { .. }
        ));
        assert!(matches!(
            parse("[scoring]\n").unwrap_err(),
            MappingError::UnknownSection { .. }
        ));
    }

    #[test]
    fn serialized_mapping_parses_back() {
        let config = parse(
            "[extended]\nurgentish = \"emergency\"\n[apps.\"app \\\"A\\\"\"]\n\"see GP, soon\\n\" = \"urgentish\"\n\"ER\" = \"emergency\"\n[overrides.v1]\n\"1-day-urgent\" = \"emergency\"\n",
        )
        .unwrap();
        let text = serialize_mapping(&config);
        assert_eq!(parse(&text).unwrap(), config);
    }
}
