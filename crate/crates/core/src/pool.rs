//! Mapping raw advice onto the canonical scale, majority-vote pooling across
//! inputters, and inter-rater agreement.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Advice, MappedLevel, MappingConfig, RawAdvice, TriageLevel, Variant};
use crate::ingest::ValidatedStudy;
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error("UnmappedAdvice: advice `{raw}` of app `{app_id}` has no mapping entry")]
    UnmappedAdvice { app_id: String, raw: String },
    #[error("UnmappedApp: app `{app_id}` has no mapping table")]
    UnmappedApp { app_id: String },
    #[error("UnknownLevel: extended level `{name}` is not declared")]
    UnknownExtendedLevel { name: String },
    #[error("cannot pool an empty vote list")]
    EmptyVotes,
    #[error("RaggedRatings: item {item} has {found} ratings, expected {expected}")]
    RaggedRatings { item: usize, expected: u32, found: u32 },
    #[error("agreement needs at least two raters per item, found {0}")]
    TooFewRaters(u32),
    #[error("agreement needs at least one rated item")]
    NoItems,
}

/// Maps one recorded advice to the canonical scale under `variant`.
pub fn map_advice(
    raw: &RawAdvice,
    app_id: &str,
    config: &MappingConfig,
    variant: &Variant,
) -> Result<Advice, PoolError> {
    let text = match raw {
        RawAdvice::Abstain => return Ok(Advice::Abstain),
        RawAdvice::Text(text) => text,
    };
    let table = config.apps.get(app_id).ok_or_else(|| PoolError::UnmappedApp {
        app_id: app_id.to_string(),
    })?;
    match table.get(text) {
        None => Err(PoolError::UnmappedAdvice {
            app_id: app_id.to_string(),
            raw: text.clone(),
        }),
        Some(MappedLevel::Canonical(level)) => Ok(Advice::Level(*level)),
        Some(MappedLevel::Extended(name)) => config
            .collapse(name, variant)
            .map(Advice::Level)
            .ok_or_else(|| PoolError::UnknownExtendedLevel { name: name.clone() }),
    }
}

/// Pools one (vignette, app) vote list.
///
/// Abstentions sit out the vote. The most frequent level wins; a tie for the
/// top count goes to the most urgent tied level and is flagged. Only a fully
/// abstaining list pools to [`Advice::Abstain`] (not flagged as a tie).
pub fn pool_majority(votes: &[Advice]) -> Result<(Advice, bool), PoolError> {
    if votes.is_empty() {
        return Err(PoolError::EmptyVotes);
    }
    let mut counts = [0usize; 3];
    for level in votes.iter().filter_map(|v| v.level()) {
        counts[level.code() as usize] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0);
    if top == 0 {
        return Ok((Advice::Abstain, false));
    }
    let tied: Vec<TriageLevel> = TriageLevel::ALL
        .into_iter()
        .filter(|level| counts[level.code() as usize] == top)
        .collect();
    // ALL is ordered by urgency, so the last tied level is the most urgent.
    let winner = *tied.last().expect("top > 0 implies a tied level");
    Ok((Advice::Level(winner), tied.len() > 1))
}

/// Majority-vote result for one (vignette, app) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PooledAdvice {
    pub vignette_id: String,
    pub app_id: String,
    pub level: Advice,
    /// Mapped vote per inputter, sorted by inputter id.
    pub votes: Vec<(String, Advice)>,
    pub tie_broken: bool,
}

/// (vignette_id, app_id).
type PairKey = (String, String);

/// (inputter_id, mapped advice) per inputter.
type Ballots = Vec<(String, Advice)>;

/// Mapped votes grouped by (vignette, app), in vignette file order then app
/// order.
fn grouped_votes(study: &ValidatedStudy, variant: &Variant) -> Result<Vec<(PairKey, Ballots)>, PoolError> {
    let mut groups: BTreeMap<(&str, &str), Vec<(String, Advice)>> = BTreeMap::new();
    for record in &study.records {
        let advice = map_advice(&record.advice, &record.app_id, &study.mapping, variant)?;
        groups
            .entry((record.vignette_id.as_str(), record.app_id.as_str()))
            .or_default()
            .push((record.inputter_id.clone(), advice));
    }
    let mut out = Vec::with_capacity(groups.len());
    for vignette in &study.vignettes {
        for app in &study.apps {
            if let Some(mut votes) = groups.remove(&(vignette.id.as_str(), app.as_str())) {
                votes.sort_by(|a, b| a.0.cmp(&b.0));
                out.push(((vignette.id.clone(), app.clone()), votes));
            }
        }
    }
    Ok(out)
}

/// Pools every (vignette, app) pair of a validated study.
pub fn pool_study(study: &ValidatedStudy, variant: &Variant) -> Result<Vec<PooledAdvice>, PoolError> {
    grouped_votes(study, variant)?
        .into_iter()
        .map(|((vignette_id, app_id), votes)| {
            let advice: Vec<Advice> = votes.iter().map(|(_, a)| *a).collect();
            let (level, tie_broken) = pool_majority(&advice)?;
            Ok(PooledAdvice {
                vignette_id,
                app_id,
                level,
                votes,
                tie_broken,
            })
        })
        .collect()
}

/// Agreement categories: the three canonical levels plus abstention.
pub const N_CATEGORIES: usize = 4;

pub fn category_index(advice: Advice) -> usize {
    match advice {
        Advice::Level(level) => level.code() as usize,
        Advice::Abstain => 3,
    }
}

/// Per-item category counts over raters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RatingTable {
    pub items: Vec<[u32; N_CATEGORIES]>,
}

impl RatingTable {
    pub fn from_votes<'a, I>(items: I) -> Self
    where
        I: IntoIterator<Item = &'a [Advice]>,
    {
        let items = items
            .into_iter()
            .map(|votes| {
                let mut row = [0u32; N_CATEGORIES];
                for vote in votes {
                    row[category_index(*vote)] += 1;
                }
                row
            })
            .collect();
        Self { items }
    }

    /// Common rater count, after checking every item has the same number.
    pub fn raters(&self) -> Result<u32, PoolError> {
        let first = self.items.first().ok_or(PoolError::NoItems)?;
        let expected: u32 = first.iter().sum();
        for (item, row) in self.items.iter().enumerate() {
            let found: u32 = row.iter().sum();
            if found != expected {
                return Err(PoolError::RaggedRatings { item, expected, found });
            }
        }
        if expected < 2 {
            return Err(PoolError::TooFewRaters(expected));
        }
        Ok(expected)
    }

    /// Sum over items and categories of `c * (c - 1)`: ordered agreeing pairs.
    fn agreeing_pairs(&self) -> i128 {
        self.items
            .iter()
            .flatten()
            .map(|&c| i128::from(c) * (i128::from(c) - 1))
            .sum()
    }
}

/// Fleiss' kappa, exact. `None` when chance agreement is 1 (every rating in a
/// single category).
pub fn fleiss_kappa(table: &RatingTable) -> Result<Option<Rational>, PoolError> {
    let n = i128::from(table.raters()?);
    let items = table.items.len() as i128;
    let agreeing = table.agreeing_pairs();

    let mut totals = [0i128; N_CATEGORIES];
    for row in &table.items {
        for (total, &c) in totals.iter_mut().zip(row) {
            *total += i128::from(c);
        }
    }
    let sum_sq: i128 = totals.iter().map(|t| t * t).sum();
    let all = items * n;
    if sum_sq == all * all {
        return Ok(None);
    }
    // (P - Pe) / (1 - Pe) with P = A / (N n (n-1)) and Pe = S / (N n)^2,
    // scaled through by (N n)^2 (n - 1) / (N n).
    let numer = agreeing * items * n - sum_sq * (n - 1);
    let denom = (n - 1) * (all * all - sum_sq);
    Ok(Some(Rational::new(numer, denom)))
}

/// Mean over items of the share of agreeing rater pairs.
pub fn percent_agreement(table: &RatingTable) -> Result<Rational, PoolError> {
    let n = i128::from(table.raters()?);
    let items = table.items.len() as i128;
    Ok(Rational::new(table.agreeing_pairs(), items * n * (n - 1)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementStats {
    pub app_id: String,
    /// `None` when undefined (all ratings in one category).
    pub fleiss_kappa: Option<Rational>,
    pub percent_agreement: Rational,
    pub n_items: usize,
    pub n_raters: u32,
}

/// Inter-rater agreement per app, on mapped levels plus abstention.
pub fn agreement_stats(study: &ValidatedStudy, variant: &Variant) -> Result<Vec<AgreementStats>, PoolError> {
    let mut per_app: BTreeMap<String, Vec<Vec<Advice>>> = BTreeMap::new();
    for ((_, app), votes) in grouped_votes(study, variant)? {
        per_app
            .entry(app)
            .or_default()
            .push(votes.into_iter().map(|(_, a)| a).collect());
    }
    per_app
        .into_iter()
        .map(|(app_id, items)| {
            let table = RatingTable::from_votes(items.iter().map(Vec::as_slice));
            Ok(AgreementStats {
                fleiss_kappa: fleiss_kappa(&table)?,
                percent_agreement: percent_agreement(&table)?,
                n_items: table.items.len(),
                n_raters: table.raters()?,
                app_id,
            })
        })
        .collect()
}

/// Share of pooled pairs whose vote needed the tie-break rule.
pub fn tie_rate(pooled: &[PooledAdvice]) -> Rational {
    if pooled.is_empty() {
        return Rational::zero();
    }
    let ties = pooled.iter().filter(|p| p.tie_broken).count();
    Rational::new(ties as i128, pooled.len() as i128)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ExtendedLevel, ONE_DAY_URGENT};
    use proptest::prelude::*;
    use TriageLevel::*;

    const E: Advice = Advice::Level(Emergency);
    const NE: Advice = Advice::Level(NonEmergency);
    const SC: Advice = Advice::Level(SelfCare);
    const AB: Advice = Advice::Abstain;

    fn config() -> MappingConfig {
        let mut config = MappingConfig::default();
        config.apps.insert(
            "appA".into(),
            BTreeMap::from([
                ("1-day-urgent".to_string(), MappedLevel::Extended(ONE_DAY_URGENT.into())),
                ("ER".to_string(), MappedLevel::Canonical(Emergency)),
            ]),
        );
        config
    }

    #[test]
    fn one_day_urgent_collapses_to_non_emergency_by_default() {
        let raw = RawAdvice::Text("1-day-urgent".into());
        assert_eq!(map_advice(&raw, "appA", &config(), &Variant::default_variant()), Ok(NE));
    }

    #[test]
    fn override_variant_changes_collapse_target() {
        let raw = RawAdvice::Text("1-day-urgent".into());
        let variant = Variant {
            name: "urgent_as_emergency".into(),
            overrides: BTreeMap::from([(ONE_DAY_URGENT.to_string(), Emergency)]),
        };
        assert_eq!(map_advice(&raw, "appA", &config(), &variant), Ok(E));
    }

    #[test]
    fn abstain_passes_through() {
        assert_eq!(
            map_advice(&RawAdvice::Abstain, "anything", &config(), &Variant::default_variant()),
            Ok(AB)
        );
    }

    #[test]
    fn unmapped_advice_is_an_error() {
        let raw = RawAdvice::Text("call 911".into());
        assert!(matches!(
            map_advice(&raw, "appA", &config(), &Variant::default_variant()),
            Err(PoolError::UnmappedAdvice { .. })
        ));
        assert!(matches!(
            map_advice(&raw, "appZ", &config(), &Variant::default_variant()),
            Err(PoolError::UnmappedApp { .. })
        ));
    }

    #[test]
    fn declared_extended_level_uses_its_default() {
        let mut config = config();
        config
            .extended
            .insert("soon".into(), ExtendedLevel::new("soon", SelfCare));
        config
            .apps
            .get_mut("appA")
            .unwrap()
            .insert("later".into(), MappedLevel::Extended("soon".into()));
        let raw = RawAdvice::Text("later".into());
        assert_eq!(map_advice(&raw, "appA", &config, &Variant::default_variant()), Ok(SC));
    }

    #[test]
    fn two_against_one_goes_to_emergency() {
        assert_eq!(pool_majority(&[E, E, SC]), Ok((E, false)));
    }

    #[test]
    fn even_split_escalates() {
        assert_eq!(pool_majority(&[E, SC]), Ok((E, true)));
        assert_eq!(pool_majority(&[SC, NE, NE, SC]), Ok((NE, true)));
    }

    #[test]
    fn abstentions_sit_out() {
        assert_eq!(pool_majority(&[AB, SC, SC]), Ok((SC, false)));
        assert_eq!(pool_majority(&[AB, AB, NE]), Ok((NE, false)));
        assert_eq!(pool_majority(&[AB, AB]), Ok((AB, false)));
        assert_eq!(pool_majority(&[]), Err(PoolError::EmptyVotes));
    }

    #[test]
    fn plurality_without_absolute_majority_is_not_a_tie() {
        assert_eq!(pool_majority(&[E, NE, SC, SC]), Ok((SC, false)));
    }

    fn vote() -> impl Strategy<Value = Advice> {
        prop_oneof![Just(E), Just(NE), Just(SC), Just(AB)]
    }

    fn all_multisets(max_len: usize) -> Vec<Vec<Advice>> {
        let mut out = vec![vec![]];
        let mut frontier = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for votes in &frontier {
                for v in [SC, NE, E, AB] {
                    let mut grown: Vec<Advice> = votes.clone();
                    grown.push(v);
                    next.push(grown);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out.retain(|v| !v.is_empty());
        out
    }

    #[test]
    fn brute_force_majority_properties() {
        for votes in all_multisets(5) {
            let (level, tie) = pool_majority(&votes).unwrap();
            let cast: Vec<TriageLevel> = votes.iter().filter_map(|v| v.level()).collect();
            let count = |l: TriageLevel| cast.iter().filter(|&&c| c == l).count();
            if let Some(majority) = TriageLevel::ALL.into_iter().find(|&l| 2 * count(l) > cast.len()) {
                assert_eq!((level, tie), (Advice::Level(majority), false), "{votes:?}");
            }
            if let Advice::Level(winner) = level {
                let best = count(winner);
                for other in TriageLevel::ALL {
                    assert!(count(other) <= best);
                    if count(other) == best {
                        assert!(other <= winner, "tie must escalate: {votes:?}");
                    }
                }
            } else {
                assert!(cast.is_empty());
            }
        }
    }

    proptest! {
        #[test]
        fn majority_is_permutation_invariant(votes in prop::collection::vec(vote(), 1..8), seed in any::<u64>()) {
            let mut shuffled = votes.clone();
            // Deterministic Fisher-Yates from the seed.
            let mut state = seed | 1;
            for i in (1..shuffled.len()).rev() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                shuffled.swap(i, (state % (i as u64 + 1)) as usize);
            }
            prop_assert_eq!(pool_majority(&votes), pool_majority(&shuffled));
        }
    }

    #[test]
    fn kappa_is_one_under_perfect_agreement() {
        let table = RatingTable {
            items: vec![[3, 0, 0, 0], [0, 3, 0, 0], [0, 0, 3, 0], [0, 0, 0, 3]],
        };
        assert_eq!(fleiss_kappa(&table), Ok(Some(Rational::from_integer(1))));
        assert_eq!(percent_agreement(&table), Ok(Rational::from_integer(1)));
    }

    #[test]
    fn kappa_undefined_when_single_category() {
        let table = RatingTable {
            items: vec![[0, 0, 2, 0], [0, 0, 2, 0]],
        };
        assert_eq!(fleiss_kappa(&table), Ok(None));
        assert_eq!(percent_agreement(&table), Ok(Rational::from_integer(1)));
    }

    #[test]
    fn percent_agreement_counts_pairs() {
        let one = RatingTable::from_votes([[E, E, SC].as_slice()]);
        assert_eq!(percent_agreement(&one), Ok(Rational::new(1, 3)));
        let split = RatingTable::from_votes([[E, SC].as_slice(), [NE, AB].as_slice()]);
        assert_eq!(percent_agreement(&split), Ok(Rational::zero()));
    }

    #[test]
    fn ragged_tables_are_rejected() {
        let table = RatingTable {
            items: vec![[3, 0, 0, 0], [1, 1, 0, 0]],
        };
        assert!(matches!(
            fleiss_kappa(&table),
            Err(PoolError::RaggedRatings { item: 1, .. })
        ));
        assert!(matches!(
            percent_agreement(&RatingTable {
                items: vec![[1, 0, 0, 0]]
            }),
            Err(PoolError::TooFewRaters(1))
        ));
        assert_eq!(fleiss_kappa(&RatingTable::default()), Err(PoolError::NoItems));
    }

    proptest! {
        #[test]
        fn agreement_is_invariant_under_rater_relabeling(
            items in prop::collection::vec(prop::collection::vec(vote(), 3), 1..10),
        ) {
            let table = RatingTable::from_votes(items.iter().map(Vec::as_slice));
            let reversed: Vec<Vec<Advice>> = items.iter().map(|v| v.iter().rev().copied().collect()).collect();
            let relabeled = RatingTable::from_votes(reversed.iter().map(Vec::as_slice));
            prop_assert_eq!(fleiss_kappa(&table), fleiss_kappa(&relabeled));
            prop_assert_eq!(percent_agreement(&table), percent_agreement(&relabeled));
        }
    }
}
