//! Seeded synthetic studies with known ground truth.
//!
//! For each (vignette, app) the app abstains with its `abstain_rate`,
//! otherwise its advice is drawn from the confusion-matrix row of the gold
//! level. Each inputter then records that advice, except that with
//! probability `inputter_noise` they record a uniformly chosen different
//! level instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AdviceRecord, Consensus, MappingConfig, RawAdvice, Study, TriageLevel, Vignette};

/// Row-sum tolerance for confusion matrices.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("spec needs at least one app")]
    NoApps,
    #[error("spec needs at least one vignette")]
    NoVignettes,
    #[error("n_inputters must be at least 2, got {0}")]
    TooFewInputters(u32),
    #[error("{field} = {value} is outside [0, 1]")]
    OutOfRange { field: String, value: f64 },
    #[error("app `{app}`: confusion row {row} sums to {sum}, expected 1")]
    RowSum { app: String, row: usize, sum: f64 },
    #[error("duplicate app id `{0}`")]
    DuplicateApp(String),
    #[error("invalid simulation spec: {0}")]
    Parse(String),
}

/// Gold-level counts; each level forms its own stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumCounts {
    #[serde(default)]
    pub emergency: usize,
    #[serde(default)]
    pub non_emergency: usize,
    #[serde(default)]
    pub self_care: usize,
}

impl StratumCounts {
    pub fn uniform(n: usize) -> Self {
        Self {
            emergency: n,
            non_emergency: n,
            self_care: n,
        }
    }

    pub fn get(&self, level: TriageLevel) -> usize {
        match level {
            TriageLevel::Emergency => self.emergency,
            TriageLevel::NonEmergency => self.non_emergency,
            TriageLevel::SelfCare => self.self_care,
        }
    }

    pub fn total(&self) -> usize {
        self.emergency + self.non_emergency + self.self_care
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimApp {
    pub id: String,
    /// `confusion[gold][advice]`, both indexed self_care, non_emergency,
    /// emergency.
    pub confusion: [[f64; 3]; 3],
    #[serde(default)]
    pub abstain_rate: f64,
}

impl SimApp {
    pub fn with_diagonal(id: &str, p: f64) -> Self {
        let off = (1.0 - p) / 2.0;
        let mut confusion = [[off; 3]; 3];
        for (i, row) in confusion.iter_mut().enumerate() {
            row[i] = p;
        }
        Self {
            id: id.to_string(),
            confusion,
            abstain_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub vignettes: StratumCounts,
    pub apps: Vec<SimApp>,
    #[serde(default)]
    pub inputter_noise: f64,
    pub n_inputters: u32,
    pub seed: u64,
}

impl SimSpec {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.apps.is_empty() {
            return Err(SimError::NoApps);
        }
        if self.vignettes.total() == 0 {
            return Err(SimError::NoVignettes);
        }
        if self.n_inputters < 2 {
            return Err(SimError::TooFewInputters(self.n_inputters));
        }
        unit("inputter_noise", self.inputter_noise)?;
        let mut seen = std::collections::BTreeSet::new();
        for app in &self.apps {
            if !seen.insert(app.id.as_str()) {
                return Err(SimError::DuplicateApp(app.id.clone()));
            }
            unit(&format!("apps.{}.abstain_rate", app.id), app.abstain_rate)?;
            for (row, probs) in app.confusion.iter().enumerate() {
                for (col, &p) in probs.iter().enumerate() {
                    unit(&format!("apps.{}.confusion[{row}][{col}]", app.id), p)?;
                }
                let sum: f64 = probs.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(SimError::RowSum {
                        app: app.id.clone(),
                        row,
                        sum,
                    });
                }
            }
        }
        Ok(())
    }
}

fn unit(field: &str, value: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SimError::OutOfRange {
            field: field.to_string(),
            value,
        })
    }
}

fn sample_level(rng: &mut ChaCha8Rng, row: &[f64; 3]) -> TriageLevel {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return TriageLevel::ALL[i];
        }
    }
    // Rounding left u above the cumulative sum; take the last level with mass.
    let last = row.iter().rposition(|&p| p > 0.0).unwrap_or(2);
    TriageLevel::ALL[last]
}

fn flip(rng: &mut ChaCha8Rng, level: TriageLevel) -> TriageLevel {
    let others: Vec<TriageLevel> = TriageLevel::ALL.into_iter().filter(|&l| l != level).collect();
    others[rng.gen_range(0..others.len())]
}

/// Generates a study; identical specs (including seed) give identical studies.
pub fn simulate_study(spec: &SimSpec) -> Result<Study, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let inputters: Vec<String> = (1..=spec.n_inputters).map(|i| format!("inputter{i}")).collect();
    let width = spec.vignettes.total().to_string().len().max(3);

    let mut vignettes = Vec::with_capacity(spec.vignettes.total());
    for level in [TriageLevel::Emergency, TriageLevel::NonEmergency, TriageLevel::SelfCare] {
        for _ in 0..spec.vignettes.get(level) {
            let id = format!("v{:0width$}", vignettes.len() + 1);
            vignettes.push(Vignette {
                description: format!("synthetic {} case {id}", level.as_str()),
                id,
                gold: level,
                stratum: level.as_str().to_string(),
                source: format!("simulated (seed={})", spec.seed),
                consensus: Consensus {
                    panel_count: 2,
                    method: "simulated consensus".to_string(),
                },
            });
        }
    }

    let mut records = Vec::with_capacity(vignettes.len() * spec.apps.len() * inputters.len());
    for vignette in &vignettes {
        for app in &spec.apps {
            let abstain = rng.gen::<f64>() < app.abstain_rate;
            let advice = (!abstain).then(|| sample_level(&mut rng, &app.confusion[vignette.gold.code() as usize]));
            for inputter in &inputters {
                let recorded = match advice {
                    None => RawAdvice::Abstain,
                    Some(level) => {
                        let level = if rng.gen::<f64>() < spec.inputter_noise {
                            flip(&mut rng, level)
                        } else {
                            level
                        };
                        RawAdvice::Text(level.as_str().to_string())
                    }
                };
                records.push(AdviceRecord {
                    vignette_id: vignette.id.clone(),
                    app_id: app.id.clone(),
                    inputter_id: inputter.clone(),
                    advice: recorded,
                });
            }
        }
    }

    let mapping = MappingConfig::identity(spec.apps.iter().map(|a| a.id.clone()));
    Ok(Study::new(vignettes, records, mapping))
}
