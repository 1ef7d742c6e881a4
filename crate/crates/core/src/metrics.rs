//! The comparable metric suite: accuracy (overall and per gold level),
//! safety, inclination to overtriage, comprehensiveness, the capability
//! comparison score, and sensitivity re-analysis under alternative mappings.
//!
//! Every proportion is an exact [`Rational`]. Abstentions count as incorrect
//! for accuracy, are left out of safety and overtriage, and are what
//! comprehensiveness measures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Advice, TriageLevel, Variant, DEFAULT_VARIANT};
use crate::ingest::ValidatedStudy;
use crate::pool::{agreement_stats, pool_study, AgreementStats, PoolError, PooledAdvice};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no cases to evaluate")]
    EmptyCases,
    #[error("vignette `{0}` has no gold standard")]
    MissingGold(String),
    #[error("NoAdviceGiven: every case was an abstention")]
    NoAdviceGiven,
    #[error("capability comparison needs at least 2 apps, found {0}")]
    TooFewApps(usize),
    #[error("NoCommonItems: no vignette received advice from every app")]
    NoCommonItems,
    #[error("variant `{0}` listed twice")]
    DuplicateVariant(String),
    #[error(transparent)]
    Pool(#[from] PoolError),
}

/// One app's pooled advice on one vignette, next to the gold standard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Case {
    pub advice: Advice,
    pub gold: TriageLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseOutcome {
    Correct,
    Overtriage,
    Undertriage,
    Abstain,
}

impl Case {
    pub fn outcome(self) -> CaseOutcome {
        match self.advice {
            Advice::Abstain => CaseOutcome::Abstain,
            Advice::Level(level) if level == self.gold => CaseOutcome::Correct,
            Advice::Level(level) if level > self.gold => CaseOutcome::Overtriage,
            Advice::Level(_) => CaseOutcome::Undertriage,
        }
    }
}

/// Cases of one app, in pooled order.
pub fn cases_for_app(
    pooled: &[PooledAdvice],
    gold: &BTreeMap<&str, TriageLevel>,
    app_id: &str,
) -> Result<Vec<Case>, MetricsError> {
    pooled
        .iter()
        .filter(|p| p.app_id == app_id)
        .map(|p| {
            let gold = gold
                .get(p.vignette_id.as_str())
                .ok_or_else(|| MetricsError::MissingGold(p.vignette_id.clone()))?;
            Ok(Case {
                advice: p.level,
                gold: *gold,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub correct: usize,
    pub overtriage: usize,
    pub undertriage: usize,
    pub abstain: usize,
}

impl OutcomeCounts {
    pub fn tally(cases: &[Case]) -> Self {
        let mut counts = Self::default();
        for case in cases {
            match case.outcome() {
                CaseOutcome::Correct => counts.correct += 1,
                CaseOutcome::Overtriage => counts.overtriage += 1,
                CaseOutcome::Undertriage => counts.undertriage += 1,
                CaseOutcome::Abstain => counts.abstain += 1,
            }
        }
        counts
    }

    pub fn total(&self) -> usize {
        self.correct + self.overtriage + self.undertriage + self.abstain
    }

    pub fn advice_given(&self) -> usize {
        self.total() - self.abstain
    }

    pub fn errors(&self) -> usize {
        self.overtriage + self.undertriage
    }
}

fn ratio(num: usize, den: usize) -> Rational {
    Rational::new(num as i128, den as i128)
}

fn non_empty(cases: &[Case]) -> Result<(), MetricsError> {
    if cases.is_empty() {
        Err(MetricsError::EmptyCases)
    } else {
        Ok(())
    }
}

/// Correct cases over all cases.
pub fn accuracy(cases: &[Case]) -> Result<Rational, MetricsError> {
    non_empty(cases)?;
    let counts = OutcomeCounts::tally(cases);
    Ok(ratio(counts.correct, counts.total()))
}

/// Accuracy restricted to each gold level present in `cases`.
pub fn accuracy_by_level(cases: &[Case]) -> Result<BTreeMap<TriageLevel, Rational>, MetricsError> {
    non_empty(cases)?;
    let mut out = BTreeMap::new();
    for level in TriageLevel::ALL {
        let subset: Vec<Case> = cases.iter().copied().filter(|c| c.gold == level).collect();
        if !subset.is_empty() {
            out.insert(level, accuracy(&subset)?);
        }
    }
    Ok(out)
}

/// Share of advice-given cases that were not undertriaged.
pub fn safety(cases: &[Case]) -> Result<Rational, MetricsError> {
    non_empty(cases)?;
    let counts = OutcomeCounts::tally(cases);
    if counts.advice_given() == 0 {
        return Err(MetricsError::NoAdviceGiven);
    }
    Ok(ratio(counts.correct + counts.overtriage, counts.advice_given()))
}

/// Share of errors that were overtriage; `None` when there were no errors.
pub fn overtriage_inclination(cases: &[Case]) -> Result<Option<Rational>, MetricsError> {
    non_empty(cases)?;
    let counts = OutcomeCounts::tally(cases);
    Ok((counts.errors() > 0).then(|| ratio(counts.overtriage, counts.errors())))
}

/// Share of cases that received any advice.
pub fn comprehensiveness(cases: &[Case]) -> Result<Rational, MetricsError> {
    non_empty(cases)?;
    let counts = OutcomeCounts::tally(cases);
    Ok(ratio(counts.advice_given(), counts.total()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UndefinedReason {
    NoErrors,
    NoAdviceGiven,
    NoGoldCases,
}

impl UndefinedReason {
    pub fn as_str(self) -> &'static str {
        match self {
            UndefinedReason::NoErrors => "no errors",
            UndefinedReason::NoAdviceGiven => "no advice given",
            UndefinedReason::NoGoldCases => "no gold cases at this level",
        }
    }
}

/// A metric value or the reason it is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricValue {
    Value(Rational),
    Undefined(UndefinedReason),
}

impl MetricValue {
    pub fn value(self) -> Option<Rational> {
        match self {
            MetricValue::Value(v) => Some(v),
            MetricValue::Undefined(_) => None,
        }
    }
}

/// Metrics reported per app.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Accuracy,
    AccuracyEmergency,
    AccuracyNonEmergency,
    AccuracySelfCare,
    Safety,
    OvertriageInclination,
    Comprehensiveness,
}

impl MetricName {
    pub const ALL: [MetricName; 7] = [
        MetricName::Accuracy,
        MetricName::AccuracyEmergency,
        MetricName::AccuracyNonEmergency,
        MetricName::AccuracySelfCare,
        MetricName::Safety,
        MetricName::OvertriageInclination,
        MetricName::Comprehensiveness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Accuracy => "accuracy",
            MetricName::AccuracyEmergency => "accuracy_emergency",
            MetricName::AccuracyNonEmergency => "accuracy_non_emergency",
            MetricName::AccuracySelfCare => "accuracy_self_care",
            MetricName::Safety => "safety",
            MetricName::OvertriageInclination => "overtriage_inclination",
            MetricName::Comprehensiveness => "comprehensiveness",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MetricName::Accuracy => "Accuracy",
            MetricName::AccuracyEmergency => "Accuracy (emergency)",
            MetricName::AccuracyNonEmergency => "Accuracy (non-emergency)",
            MetricName::AccuracySelfCare => "Accuracy (self-care)",
            MetricName::Safety => "Safety",
            MetricName::OvertriageInclination => "Overtriage inclination",
            MetricName::Comprehensiveness => "Comprehensiveness",
        }
    }

    pub fn for_level(level: TriageLevel) -> Self {
        match level {
            TriageLevel::Emergency => MetricName::AccuracyEmergency,
            TriageLevel::NonEmergency => MetricName::AccuracyNonEmergency,
            TriageLevel::SelfCare => MetricName::AccuracySelfCare,
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppMetrics {
    pub app_id: String,
    pub n_cases: usize,
    pub counts: OutcomeCounts,
    pub accuracy: Rational,
    pub accuracy_by_level: BTreeMap<TriageLevel, Rational>,
    pub safety: MetricValue,
    pub overtriage_inclination: MetricValue,
    pub comprehensiveness: Rational,
}

impl AppMetrics {
    pub fn compute(app_id: &str, cases: &[Case]) -> Result<Self, MetricsError> {
        let safety = match safety(cases) {
            Ok(v) => MetricValue::Value(v),
            Err(MetricsError::NoAdviceGiven) => MetricValue::Undefined(UndefinedReason::NoAdviceGiven),
            Err(e) => return Err(e),
        };
        let counts = OutcomeCounts::tally(cases);
        let overtriage_inclination = match overtriage_inclination(cases)? {
            Some(v) => MetricValue::Value(v),
            None if counts.advice_given() == 0 => MetricValue::Undefined(UndefinedReason::NoAdviceGiven),
            None => MetricValue::Undefined(UndefinedReason::NoErrors),
        };
        Ok(Self {
            app_id: app_id.to_string(),
            n_cases: cases.len(),
            counts,
            accuracy: accuracy(cases)?,
            accuracy_by_level: accuracy_by_level(cases)?,
            safety,
            overtriage_inclination,
            comprehensiveness: comprehensiveness(cases)?,
        })
    }

    pub fn get(&self, metric: MetricName) -> MetricValue {
        let level = |level: TriageLevel| {
            self.accuracy_by_level
                .get(&level)
                .map_or(MetricValue::Undefined(UndefinedReason::NoGoldCases), |v| {
                    MetricValue::Value(*v)
                })
        };
        match metric {
            MetricName::Accuracy => MetricValue::Value(self.accuracy),
            MetricName::AccuracyEmergency => level(TriageLevel::Emergency),
            MetricName::AccuracyNonEmergency => level(TriageLevel::NonEmergency),
            MetricName::AccuracySelfCare => level(TriageLevel::SelfCare),
            MetricName::Safety => self.safety,
            MetricName::OvertriageInclination => self.overtriage_inclination,
            MetricName::Comprehensiveness => MetricValue::Value(self.comprehensiveness),
        }
    }
}

/// Metrics for every app in `pooled`, sorted by app id.
pub fn app_metrics(
    pooled: &[PooledAdvice],
    gold: &BTreeMap<&str, TriageLevel>,
) -> Result<Vec<AppMetrics>, MetricsError> {
    let apps: BTreeSet<&str> = pooled.iter().map(|p| p.app_id.as_str()).collect();
    apps.into_iter()
        .map(|app| AppMetrics::compute(app, &cases_for_app(pooled, gold, app)?))
        .collect()
}

/// Capability comparison: accuracy of each app on the vignettes every app
/// answered, with the share of vignettes that made it into that set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CcsTable {
    pub common_item_ids: Vec<String>,
    pub n_total_items: usize,
    pub coverage: Rational,
    pub scores: BTreeMap<String, Rational>,
}

/// `vignette_order` lists every vignette of the study; it fixes the order of
/// `common_item_ids` and the coverage denominator.
pub fn ccs(
    pooled: &[PooledAdvice],
    gold: &BTreeMap<&str, TriageLevel>,
    vignette_order: &[String],
) -> Result<CcsTable, MetricsError> {
    let apps: BTreeSet<&str> = pooled.iter().map(|p| p.app_id.as_str()).collect();
    if apps.len() < 2 {
        return Err(MetricsError::TooFewApps(apps.len()));
    }
    let mut answered: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for p in pooled.iter().filter(|p| !p.level.is_abstain()) {
        answered
            .entry(p.vignette_id.as_str())
            .or_default()
            .insert(p.app_id.as_str());
    }
    let common: Vec<String> = vignette_order
        .iter()
        .filter(|v| answered.get(v.as_str()).is_some_and(|a| a.len() == apps.len()))
        .cloned()
        .collect();
    if common.is_empty() {
        return Err(MetricsError::NoCommonItems);
    }
    let common_set: BTreeSet<&str> = common.iter().map(String::as_str).collect();
    let restricted: Vec<PooledAdvice> = pooled
        .iter()
        .filter(|p| common_set.contains(p.vignette_id.as_str()))
        .cloned()
        .collect();
    let mut scores = BTreeMap::new();
    for app in apps {
        scores.insert(app.to_string(), accuracy(&cases_for_app(&restricted, gold, app)?)?);
    }
    Ok(CcsTable {
        coverage: ratio(common.len(), vignette_order.len()),
        n_total_items: vignette_order.len(),
        common_item_ids: common,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantMetrics {
    pub variant: Variant,
    pub apps: Vec<AppMetrics>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub variant: String,
    pub app_id: String,
    pub metric: MetricName,
    pub default_value: MetricValue,
    pub variant_value: MetricValue,
    /// `variant - default`; `None` when either side is undefined.
    pub delta: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// Default variant first, then the requested variants in order.
    pub variants: Vec<VariantMetrics>,
    pub deltas: Vec<MetricDelta>,
}

impl SensitivityReport {
    pub fn default_metrics(&self) -> &VariantMetrics {
        &self.variants[0]
    }
}

/// Default variant followed by `variants`, minus a redundant default entry.
fn variant_list(variants: &[Variant]) -> Result<Vec<Variant>, MetricsError> {
    let mut out = vec![Variant::default_variant()];
    let mut names = BTreeSet::from([DEFAULT_VARIANT.to_string()]);
    for v in variants {
        if v.is_default() {
            continue;
        }
        if !names.insert(v.name.clone()) {
            return Err(MetricsError::DuplicateVariant(v.name.clone()));
        }
        out.push(v.clone());
    }
    Ok(out)
}

/// Reruns pooling and metrics under each variant and diffs against default.
pub fn sensitivity_analysis(study: &ValidatedStudy, variants: &[Variant]) -> Result<SensitivityReport, MetricsError> {
    let gold = study.gold_by_id();
    let mut per_variant = Vec::new();
    for variant in variant_list(variants)? {
        let pooled = pool_study(study, &variant)?;
        per_variant.push(VariantMetrics {
            apps: app_metrics(&pooled, &gold)?,
            variant,
        });
    }

    let baseline = &per_variant[0];
    let mut deltas = Vec::new();
    for vm in &per_variant {
        for (base, app) in baseline.apps.iter().zip(&vm.apps) {
            debug_assert_eq!(base.app_id, app.app_id);
            for metric in MetricName::ALL {
                let default_value = base.get(metric);
                let variant_value = app.get(metric);
                let delta = default_value.value().zip(variant_value.value()).map(|(d, v)| v - d);
                deltas.push(MetricDelta {
                    variant: vm.variant.name.clone(),
                    app_id: app.app_id.clone(),
                    metric,
                    default_value,
                    variant_value,
                    delta,
                });
            }
        }
    }
    Ok(SensitivityReport {
        variants: per_variant,
        deltas,
    })
}

/// CCS table, or why it was not computed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CcsOutcome {
    Table(CcsTable),
    Skipped(String),
}

impl CcsOutcome {
    pub fn table(&self) -> Option<&CcsTable> {
        match self {
            CcsOutcome::Table(t) => Some(t),
            CcsOutcome::Skipped(_) => None,
        }
    }
}

/// Everything the report needs, computed under the default mapping plus
/// the sensitivity variants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationBundle {
    pub pooled: Vec<PooledAdvice>,
    pub tie_rate: Rational,
    pub agreement: Vec<AgreementStats>,
    pub ccs: CcsOutcome,
    pub sensitivity: SensitivityReport,
}

impl EvaluationBundle {
    /// Default-variant metrics, one entry per app.
    pub fn metrics(&self) -> &[AppMetrics] {
        &self.sensitivity.default_metrics().apps
    }

    pub fn per_variant(&self) -> &[VariantMetrics] {
        &self.sensitivity.variants
    }
}

/// Runs pooling, agreement, the metric suite, CCS and sensitivity analysis.
///
/// With fewer than two apps, or when no vignette was answered by every app,
/// the CCS section is skipped rather than failing the evaluation.
pub fn evaluate_all(study: &ValidatedStudy, variants: &[Variant]) -> Result<EvaluationBundle, MetricsError> {
    let default = Variant::default_variant();
    let gold = study.gold_by_id();
    let pooled = pool_study(study, &default)?;
    let agreement = agreement_stats(study, &default)?;
    let order: Vec<String> = study.vignettes.iter().map(|v| v.id.clone()).collect();
    let ccs = match ccs(&pooled, &gold, &order) {
        Ok(table) => CcsOutcome::Table(table),
        Err(e @ (MetricsError::TooFewApps(_) | MetricsError::NoCommonItems)) => CcsOutcome::Skipped(e.to_string()),
        Err(e) => return Err(e),
    };
    let sensitivity = sensitivity_analysis(study, variants)?;
    Ok(EvaluationBundle {
        tie_rate: crate::pool::tie_rate(&pooled),
        pooled,
        agreement,
        ccs,
        sensitivity,
    })
}

/// Accuracy when all of an app's cases are weighed as one pool, recomputed
/// from per-level accuracies; equals [`accuracy`] exactly.
pub fn weighted_level_accuracy(cases: &[Case]) -> Result<Rational, MetricsError> {
    let by_level = accuracy_by_level(cases)?;
    let n = cases.len() as i128;
    Ok(by_level.iter().fold(Rational::zero(), |acc, (level, acc_level)| {
        let n_level = cases.iter().filter(|c| c.gold == *level).count() as i128;
        acc + Rational::new(n_level, n) * acc_level
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use TriageLevel::*;

    fn case(advice: Option<TriageLevel>, gold: TriageLevel) -> Case {
        Case {
            advice: advice.map_or(Advice::Abstain, Advice::Level),
            gold,
        }
    }

    /// 15/15/15 gold split with 12, 9 and 6 correct; misses go one level off.
    fn balanced_45_cases() -> Vec<Case> {
        let mut cases = Vec::new();
        for (gold, correct, miss) in [
            (Emergency, 12, NonEmergency),
            (NonEmergency, 9, SelfCare),
            (SelfCare, 6, NonEmergency),
        ] {
            for i in 0..15 {
                let advice = if i < correct { gold } else { miss };
                cases.push(case(Some(advice), gold));
            }
        }
        cases
    }

    #[test]
    fn accuracy_examples() {
        let perfect: Vec<Case> = TriageLevel::ALL.iter().map(|&l| case(Some(l), l)).collect();
        assert_eq!(accuracy(&perfect), Ok(Rational::from_integer(1)));
        assert_eq!(accuracy(&balanced_45_cases()), Ok(Rational::new(27, 45)));
        let abstained = vec![case(None, Emergency), case(None, SelfCare)];
        assert_eq!(accuracy(&abstained), Ok(Rational::zero()));
        assert_eq!(accuracy(&[]), Err(MetricsError::EmptyCases));
    }

    #[test]
    fn accuracy_by_level_examples() {
        let by_level = accuracy_by_level(&balanced_45_cases()).unwrap();
        assert_eq!(by_level[&Emergency], Rational::new(4, 5));
        assert_eq!(by_level[&NonEmergency], Rational::new(3, 5));
        assert_eq!(by_level[&SelfCare], Rational::new(2, 5));

        let no_self_care = vec![case(Some(Emergency), Emergency), case(Some(SelfCare), NonEmergency)];
        let by_level = accuracy_by_level(&no_self_care).unwrap();
        assert!(!by_level.contains_key(&SelfCare));

        let perfect: Vec<Case> = TriageLevel::ALL.iter().map(|&l| case(Some(l), l)).collect();
        assert!(accuracy_by_level(&perfect)
            .unwrap()
            .values()
            .all(|v| *v == Rational::from_integer(1)));
    }

    #[test]
    fn weighted_decomposition_is_exact() {
        let cases = balanced_45_cases();
        assert_eq!(weighted_level_accuracy(&cases), accuracy(&cases));
    }

    #[test]
    fn safety_examples() {
        let mut ten: Vec<Case> = (0..9).map(|_| case(Some(Emergency), Emergency)).collect();
        ten.push(case(Some(SelfCare), Emergency));
        ten.push(case(None, Emergency));
        assert_eq!(safety(&ten), Ok(Rational::new(9, 10)));

        let all_self_care: Vec<Case> = TriageLevel::ALL.iter().map(|&l| case(Some(l), SelfCare)).collect();
        assert_eq!(safety(&all_self_care), Ok(Rational::from_integer(1)));

        let crossed = vec![case(Some(Emergency), SelfCare), case(Some(SelfCare), Emergency)];
        assert_eq!(safety(&crossed), Ok(Rational::new(1, 2)));

        assert_eq!(safety(&[case(None, SelfCare)]), Err(MetricsError::NoAdviceGiven));
    }

    #[test]
    fn overtriage_examples() {
        let mixed = vec![
            case(Some(Emergency), SelfCare),
            case(Some(NonEmergency), SelfCare),
            case(Some(SelfCare), Emergency),
            case(Some(Emergency), Emergency),
        ];
        assert_eq!(overtriage_inclination(&mixed), Ok(Some(Rational::new(2, 3))));
        assert_eq!(overtriage_inclination(&[case(Some(Emergency), Emergency)]), Ok(None));
        let under = vec![case(Some(SelfCare), Emergency), case(Some(NonEmergency), Emergency)];
        assert_eq!(overtriage_inclination(&under), Ok(Some(Rational::zero())));
    }

    #[test]
    fn comprehensiveness_examples() {
        let full: Vec<Case> = (0..45).map(|_| case(Some(SelfCare), SelfCare)).collect();
        assert_eq!(comprehensiveness(&full), Ok(Rational::from_integer(1)));
        let partial: Vec<Case> = (0..45).map(|i| case((i < 36).then_some(SelfCare), SelfCare)).collect();
        assert_eq!(comprehensiveness(&partial), Ok(Rational::new(4, 5)));
        let none: Vec<Case> = (0..45).map(|_| case(None, SelfCare)).collect();
        assert_eq!(comprehensiveness(&none), Ok(Rational::zero()));
    }

    #[test]
    fn app_metrics_marks_undefined_values() {
        let m = AppMetrics::compute("a", &[case(Some(Emergency), Emergency)]).unwrap();
        assert_eq!(
            m.overtriage_inclination,
            MetricValue::Undefined(UndefinedReason::NoErrors)
        );
        assert_eq!(
            m.get(MetricName::AccuracySelfCare),
            MetricValue::Undefined(UndefinedReason::NoGoldCases)
        );
        let silent = AppMetrics::compute("a", &[case(None, Emergency)]).unwrap();
        assert_eq!(silent.safety, MetricValue::Undefined(UndefinedReason::NoAdviceGiven));
        assert_eq!(
            silent.overtriage_inclination,
            MetricValue::Undefined(UndefinedReason::NoAdviceGiven)
        );
    }

    fn pooled(v: &str, app: &str, level: Option<TriageLevel>) -> PooledAdvice {
        PooledAdvice {
            vignette_id: v.into(),
            app_id: app.into(),
            level: level.map_or(Advice::Abstain, Advice::Level),
            votes: vec![],
            tie_broken: false,
        }
    }

    #[test]
    fn ccs_on_intersection() {
        // Six vignettes; v5 and v6 each have one abstention. A is right on
        // all common items, B on v1 and v2 only.
        let ids: Vec<String> = (1..=6).map(|i| format!("v{i}")).collect();
        let gold: BTreeMap<&str, TriageLevel> = ids.iter().map(|v| (v.as_str(), Emergency)).collect();
        let mut rows = Vec::new();
        for v in &ids {
            let a = if v == "v5" { None } else { Some(Emergency) };
            let b = match v.as_str() {
                "v1" | "v2" => Some(Emergency),
                "v6" => None,
                _ => Some(SelfCare),
            };
            rows.push(pooled(v, "A", a));
            rows.push(pooled(v, "B", b));
        }
        let table = ccs(&rows, &gold, &ids).unwrap();
        assert_eq!(table.common_item_ids, vec!["v1", "v2", "v3", "v4"]);
        assert_eq!(table.coverage, Rational::new(4, 6));
        assert_eq!(table.scores["A"], Rational::from_integer(1));
        assert_eq!(table.scores["B"], Rational::new(1, 2));
    }

    #[test]
    fn ccs_equals_accuracy_when_complete() {
        let ids: Vec<String> = (0..4).map(|i| format!("v{i}")).collect();
        let gold: BTreeMap<&str, TriageLevel> = ids.iter().map(|v| (v.as_str(), NonEmergency)).collect();
        let rows: Vec<PooledAdvice> = ids
            .iter()
            .flat_map(|v| [pooled(v, "A", Some(NonEmergency)), pooled(v, "B", Some(SelfCare))])
            .collect();
        let table = ccs(&rows, &gold, &ids).unwrap();
        for app in ["A", "B"] {
            let acc = accuracy(&cases_for_app(&rows, &gold, app).unwrap()).unwrap();
            assert_eq!(table.scores[app], acc);
        }
        assert_eq!(table.coverage, Rational::from_integer(1));
    }

    #[test]
    fn ccs_errors() {
        let ids = vec!["v1".to_string()];
        let gold = BTreeMap::from([("v1", Emergency)]);
        let one_app = vec![pooled("v1", "A", Some(Emergency))];
        assert_eq!(ccs(&one_app, &gold, &ids), Err(MetricsError::TooFewApps(1)));
        let silent = vec![pooled("v1", "A", Some(Emergency)), pooled("v1", "B", None)];
        assert_eq!(ccs(&silent, &gold, &ids), Err(MetricsError::NoCommonItems));
    }

    #[test]
    fn variant_list_always_starts_with_default() {
        let list = variant_list(&[]).unwrap();
        assert_eq!(list, vec![Variant::default_variant()]);
        let v = Variant {
            name: "x".into(),
            overrides: BTreeMap::from([("1-day-urgent".to_string(), Emergency)]),
        };
        assert_eq!(variant_list(std::slice::from_ref(&v)).unwrap().len(), 2);
        assert_eq!(
            variant_list(&[v.clone(), v]),
            Err(MetricsError::DuplicateVariant("x".into()))
        );
    }
}
