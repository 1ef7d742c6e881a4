//! Study builders shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use triagebench_core::domain::{
    Advice, AdviceRecord, Consensus, MappedLevel, MappingConfig, RawAdvice, Study, TriageLevel, Vignette,
    ONE_DAY_URGENT,
};
use triagebench_core::ingest::ValidatedStudy;
use triagebench_core::Rational;

pub fn vignette(id: &str, gold: TriageLevel) -> Vignette {
    Vignette {
        id: id.to_string(),
        description: format!("case {id}"),
        gold,
        stratum: gold.as_str().to_string(),
        source: "test".to_string(),
        consensus: Consensus {
            panel_count: 2,
            method: "consensus".to_string(),
        },
    }
}

pub fn record(vignette_id: &str, app_id: &str, inputter_id: &str, cell: &str) -> AdviceRecord {
    AdviceRecord {
        vignette_id: vignette_id.to_string(),
        app_id: app_id.to_string(),
        inputter_id: inputter_id.to_string(),
        advice: RawAdvice::from_cell(cell),
    }
}

pub fn validated(study: Study) -> ValidatedStudy {
    ValidatedStudy::new(study).unwrap_or_else(|r| panic!("fixture failed validation: {:?}", r.errors))
}

pub fn rat(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

/// Random study on the canonical spellings: `n_apps` apps, `n_vignettes`
/// vignettes, `n_inputters` inputters, each vote independently uniform over
/// the three levels plus abstention.
pub fn random_study(rng: &mut ChaCha8Rng, n_apps: usize, n_vignettes: usize, n_inputters: usize) -> Study {
    let apps: Vec<String> = (0..n_apps).map(|i| format!("app{i}")).collect();
    let vignettes: Vec<Vignette> = (0..n_vignettes)
        .map(|i| vignette(&format!("v{i:03}"), TriageLevel::ALL[rng.gen_range(0..3)]))
        .collect();
    let mut records = Vec::new();
    for v in &vignettes {
        for app in &apps {
            for who in 0..n_inputters {
                let pick = rng.gen_range(0..4);
                let cell = if pick == 3 {
                    "__ABSTAIN__"
                } else {
                    TriageLevel::ALL[pick].as_str()
                };
                records.push(record(&v.id, app, &format!("r{who}"), cell));
            }
        }
    }
    Study::new(vignettes, records, MappingConfig::identity(apps))
}

/// Native advice strings of the crafted sensitivity study.
pub const ER_NOW: &str = "Go to the ER";
pub const SEE_GP: &str = "See a doctor";
pub const HOME: &str = "Self-care at home";

/// Six vignettes, two apps, three inputters who always agree.
///
/// `appA` uses the extended "1-day-urgent" level on the two vignettes whose
/// gold is non-emergency; `appB` never uses it.
pub fn crafted_sensitivity_study() -> Study {
    use TriageLevel::*;
    let cases: [(&str, TriageLevel, &str, &str); 6] = [
        ("s1", NonEmergency, ONE_DAY_URGENT, SEE_GP),
        ("s2", NonEmergency, ONE_DAY_URGENT, ER_NOW),
        ("s3", Emergency, ER_NOW, ER_NOW),
        ("s4", SelfCare, HOME, HOME),
        ("s5", Emergency, SEE_GP, "__ABSTAIN__"),
        ("s6", SelfCare, "__ABSTAIN__", SEE_GP),
    ];
    let mut vignettes = Vec::new();
    let mut records = Vec::new();
    for (id, gold, a, b) in cases {
        vignettes.push(vignette(id, gold));
        for who in ["r1", "r2", "r3"] {
            records.push(record(id, "appA", who, a));
            records.push(record(id, "appB", who, b));
        }
    }
    let native = |extended: bool| {
        let mut table = BTreeMap::from([
            (ER_NOW.to_string(), MappedLevel::Canonical(Emergency)),
            (SEE_GP.to_string(), MappedLevel::Canonical(NonEmergency)),
            (HOME.to_string(), MappedLevel::Canonical(SelfCare)),
        ]);
        if extended {
            table.insert(
                ONE_DAY_URGENT.to_string(),
                MappedLevel::Extended(ONE_DAY_URGENT.to_string()),
            );
        }
        table
    };
    let mut mapping = MappingConfig::default();
    mapping.apps.insert("appA".to_string(), native(true));
    mapping.apps.insert("appB".to_string(), native(false));
    mapping.variants.insert(
        "urgent_as_emergency".to_string(),
        BTreeMap::from([(ONE_DAY_URGENT.to_string(), Emergency)]),
    );
    Study::new(vignettes, records, mapping)
}

/// Independent majority vote: plurality, ties to the most urgent level.
pub fn oracle_pool(votes: &[Advice]) -> Advice {
    let mut best: Option<(usize, TriageLevel)> = None;
    for level in [TriageLevel::SelfCare, TriageLevel::NonEmergency, TriageLevel::Emergency] {
        let c = votes.iter().filter(|v| **v == Advice::Level(level)).count();
        if c > 0 && best.is_none_or(|(b, _)| c >= b) {
            best = Some((c, level));
        }
    }
    best.map_or(Advice::Abstain, |(_, l)| Advice::Level(l))
}
