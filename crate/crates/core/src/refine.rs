//! Statistical refinement of a pilot vignette set.
//!
//! Each vignette is scored 1/0 per app (pooled advice equals gold or not).
//! Items nobody solves, and items whose corrected item-total correlation is
//! not positive, are removed; statistics are recomputed on the survivors
//! until nothing changes. Set sizing uses a two-proportion power analysis.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::domain::{Advice, TriageLevel};
use crate::ingest::RECOMMENDED_MIN_VIGNETTES;
use crate::pool::PooledAdvice;
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error("score matrix needs at least one app and one vignette")]
    EmptyMatrix,
    #[error("score matrix row {row} has {found} cells, expected {expected}")]
    RaggedMatrix { row: usize, expected: usize, found: usize },
    #[error("duplicate {kind} id `{id}` in score matrix")]
    DuplicateId { kind: &'static str, id: String },
    #[error("unknown vignette id `{0}`")]
    UnknownVignette(String),
    #[error("pooled advice for vignette `{0}` has no gold standard")]
    MissingGold(String),
    #[error("pooled advice missing for vignette `{vignette_id}`, app `{app_id}`")]
    MissingCell { vignette_id: String, app_id: String },
    #[error("correlation statistics need at least 2 apps, found {0}")]
    TooFewApps(usize),
    #[error("AllItemsExcluded: every vignette was excluded by the refinement rules")]
    AllItemsExcluded,
    #[error("ZeroEffect: p0 and p1 are equal")]
    ZeroEffect,
    #[error("parameter `{name}` = {value} is outside (0, 1)")]
    OutOfRange { name: &'static str, value: f64 },
}

/// Binary app × vignette correctness matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreMatrix {
    apps: Vec<String>,
    items: Vec<String>,
    /// `scores[app][item]`
    scores: Vec<Vec<bool>>,
}

impl ScoreMatrix {
    pub fn new(apps: Vec<String>, items: Vec<String>, scores: Vec<Vec<bool>>) -> Result<Self, RefineError> {
        if apps.is_empty() || items.is_empty() {
            return Err(RefineError::EmptyMatrix);
        }
        if scores.len() != apps.len() {
            return Err(RefineError::RaggedMatrix {
                row: scores.len().min(apps.len()),
                expected: items.len(),
                found: 0,
            });
        }
        for (row, cells) in scores.iter().enumerate() {
            if cells.len() != items.len() {
                return Err(RefineError::RaggedMatrix {
                    row,
                    expected: items.len(),
                    found: cells.len(),
                });
            }
        }
        for (kind, ids) in [("app", &apps), ("vignette", &items)] {
            let mut seen = HashSet::new();
            if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
                return Err(RefineError::DuplicateId { kind, id: dup.clone() });
            }
        }
        Ok(Self { apps, items, scores })
    }

    /// Builds the matrix from pooled advice. Abstentions score 0.
    /// Vignette columns follow `vignette_order`; app rows are sorted.
    pub fn from_pooled(
        pooled: &[PooledAdvice],
        gold: &BTreeMap<&str, TriageLevel>,
        vignette_order: &[String],
    ) -> Result<Self, RefineError> {
        let apps: Vec<String> = pooled
            .iter()
            .map(|p| p.app_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut cells: BTreeMap<(&str, &str), bool> = BTreeMap::new();
        for p in pooled {
            let truth = gold
                .get(p.vignette_id.as_str())
                .ok_or_else(|| RefineError::MissingGold(p.vignette_id.clone()))?;
            cells.insert(
                (p.app_id.as_str(), p.vignette_id.as_str()),
                p.level == Advice::Level(*truth),
            );
        }
        let scores = apps
            .iter()
            .map(|app| {
                vignette_order
                    .iter()
                    .map(|v| {
                        cells
                            .get(&(app.as_str(), v.as_str()))
                            .copied()
                            .ok_or_else(|| RefineError::MissingCell {
                                vignette_id: v.clone(),
                                app_id: app.clone(),
                            })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(apps, vignette_order.to_vec(), scores)
    }

    pub fn apps(&self) -> &[String] {
        &self.apps
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn score(&self, app: usize, item: usize) -> bool {
        self.scores[app][item]
    }

    fn column(&self, vignette_id: &str) -> Result<usize, RefineError> {
        self.items
            .iter()
            .position(|id| id == vignette_id)
            .ok_or_else(|| RefineError::UnknownVignette(vignette_id.to_string()))
    }

    fn difficulty_at(&self, item: usize) -> Rational {
        let solved = self.scores.iter().filter(|row| row[item]).count();
        Rational::new(solved as i128, self.apps.len() as i128)
    }

    /// Pearson r between column `item` and the rest-score over `active`
    /// columns (excluding `item`). `None` if either side has zero variance.
    fn corrected_r_at(&self, item: usize, active: &[usize]) -> Option<f64> {
        let n = self.apps.len() as i128;
        let (mut sx, mut sy, mut sxy, mut syy) = (0i128, 0i128, 0i128, 0i128);
        for row in &self.scores {
            let x = i128::from(row[item]);
            let y = active.iter().filter(|&&j| j != item && row[j]).count() as i128;
            sx += x;
            sy += y;
            sxy += x * y;
            syy += y * y;
        }
        // x is binary, so sum(x^2) == sum(x).
        let var_x = n * sx - sx * sx;
        let var_y = n * syy - sy * sy;
        if var_x == 0 || var_y == 0 {
            return None;
        }
        let cov = n * sxy - sx * sy;
        let r = cov as f64 / ((var_x as f64).sqrt() * (var_y as f64).sqrt());
        Some(r.clamp(-1.0, 1.0))
    }
}

/// Share of apps solving the vignette.
pub fn item_difficulty(matrix: &ScoreMatrix, vignette_id: &str) -> Result<Rational, RefineError> {
    Ok(matrix.difficulty_at(matrix.column(vignette_id)?))
}

/// Corrected item-total correlation: the item against each app's total over
/// all other items. `Ok(None)` when undefined (zero variance).
pub fn item_total_correlation(matrix: &ScoreMatrix, vignette_id: &str) -> Result<Option<f64>, RefineError> {
    let item = matrix.column(vignette_id)?;
    if matrix.apps.len() < 2 {
        return Err(RefineError::TooFewApps(matrix.apps.len()));
    }
    let all: Vec<usize> = (0..matrix.items.len()).collect();
    Ok(matrix.corrected_r_at(item, &all))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exclusion {
    No,
    ZeroDifficulty,
    NonpositiveItemTotal,
    /// Item varies but the rest-score is constant, so r is undefined.
    ZeroVariance,
}

impl Exclusion {
    pub fn as_str(self) -> &'static str {
        match self {
            Exclusion::No => "",
            Exclusion::ZeroDifficulty => "zero_difficulty",
            Exclusion::NonpositiveItemTotal => "nonpositive_item_total",
            Exclusion::ZeroVariance => "zero_variance",
        }
    }
}

impl fmt::Display for Exclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Exclusion::No => "retained",
            other => other.as_str(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemStats {
    pub vignette_id: String,
    /// 1-based refinement round.
    pub iteration: usize,
    pub difficulty: Rational,
    pub item_total_r: Option<f64>,
    pub excluded: Exclusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineOutcome {
    /// Surviving vignette ids, in matrix column order.
    pub retained: Vec<String>,
    /// Statistics of the items still active at each round.
    pub iterations: Vec<Vec<ItemStats>>,
}

impl RefineOutcome {
    pub fn final_stats(&self) -> &[ItemStats] {
        self.iterations.last().map_or(&[], Vec::as_slice)
    }
}

fn classify(difficulty: Rational, r: Option<f64>) -> Exclusion {
    if difficulty.is_zero() {
        Exclusion::ZeroDifficulty
    } else {
        match r {
            Some(r) if r <= 0.0 => Exclusion::NonpositiveItemTotal,
            Some(_) => Exclusion::No,
            None if difficulty.is_one() => Exclusion::No,
            None => Exclusion::ZeroVariance,
        }
    }
}

/// Removes failing items until a fixpoint, keeping a per-round audit trail.
pub fn refine_set(matrix: &ScoreMatrix) -> Result<RefineOutcome, RefineError> {
    if matrix.apps.len() < 2 {
        return Err(RefineError::TooFewApps(matrix.apps.len()));
    }
    let mut active: Vec<usize> = (0..matrix.items.len()).collect();
    let mut iterations = Vec::new();

    loop {
        let round = iterations.len() + 1;
        let stats: Vec<ItemStats> = active
            .iter()
            .map(|&item| {
                let difficulty = matrix.difficulty_at(item);
                let item_total_r = matrix.corrected_r_at(item, &active);
                ItemStats {
                    vignette_id: matrix.items[item].clone(),
                    iteration: round,
                    difficulty,
                    item_total_r,
                    excluded: classify(difficulty, item_total_r),
                }
            })
            .collect();
        let survivors: Vec<usize> = active
            .iter()
            .zip(&stats)
            .filter(|(_, s)| s.excluded == Exclusion::No)
            .map(|(&item, _)| item)
            .collect();
        let changed = survivors.len() != active.len();
        iterations.push(stats);
        if survivors.is_empty() {
            return Err(RefineError::AllItemsExcluded);
        }
        if !changed {
            break;
        }
        active = survivors;
    }

    Ok(RefineOutcome {
        retained: active.iter().map(|&i| matrix.items[i].clone()).collect(),
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    /// Smallest per-group n for the two-sided two-proportion z-test.
    pub per_group: u64,
    /// `max(per_group, 45)`.
    pub recommended_set_size: u64,
}

fn open_unit(name: &'static str, value: f64) -> Result<f64, RefineError> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(RefineError::OutOfRange { name, value })
    }
}

/// Per-group sample size for detecting `p0` vs `p1` with a two-sided
/// pooled-variance two-proportion z-test:
///
/// `n = (z_{1-a/2} sqrt(2 pbar qbar) + z_{power} sqrt(p0 q0 + p1 q1))^2 / (p1 - p0)^2`
pub fn required_sample_size(p0: f64, p1: f64, alpha: f64, power: f64) -> Result<SampleSize, RefineError> {
    let p0 = open_unit("p0", p0)?;
    let p1 = open_unit("p1", p1)?;
    let alpha = open_unit("alpha", alpha)?;
    let power = open_unit("power", power)?;
    if p0 == p1 {
        return Err(RefineError::ZeroEffect);
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let z_alpha = normal.inverse_cdf(1.0 - alpha / 2.0);
    let z_beta = normal.inverse_cdf(power);
    let p_bar = (p0 + p1) / 2.0;
    let null_sd = (2.0 * p_bar * (1.0 - p_bar)).sqrt();
    let alt_sd = (p0 * (1.0 - p0) + p1 * (1.0 - p1)).sqrt();
    let n = ((z_alpha * null_sd + z_beta * alt_sd) / (p1 - p0)).powi(2);
    // Guard against 39.000000000001 style float noise before rounding up.
    let per_group = ((n - 1e-9).ceil().max(1.0)) as u64;
    Ok(SampleSize {
        per_group,
        recommended_set_size: per_group.max(RECOMMENDED_MIN_VIGNETTES as u64),
    })
}
