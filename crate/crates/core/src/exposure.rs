//! Occupation-level ensemble assessments and neighborhood exposure.
//!
//! Five assessor models each classify an occupation into one of four exposure
//! levels over up to five rounds; the occupation score is the mean of the
//! level weights over all available (model, round) records. Neighborhood
//! exposure is the posting-count-weighted mean of occupation scores.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::panel::{AuditCode, AuditLog, PostingRecord};
use crate::{EngineError, Result};

/// Four-class exposure scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExposureLevel {
    /// No exposure.
    E0,
    /// Direct exposure.
    E1,
    /// Application-augmented exposure.
    E2,
    /// Multimodal-capability exposure.
    E3,
}

impl ExposureLevel {
    pub fn parse(token: &str) -> Result<Self> {
        match token {
            "E0" => Ok(ExposureLevel::E0),
            "E1" => Ok(ExposureLevel::E1),
            "E2" => Ok(ExposureLevel::E2),
            "E3" => Ok(ExposureLevel::E3),
            other => Err(EngineError::UnknownLevel(other.to_string())),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            ExposureLevel::E0 => "E0",
            ExposureLevel::E1 => "E1",
            ExposureLevel::E2 => "E2",
            ExposureLevel::E3 => "E3",
        }
    }
}

/// One model's assessment of one occupation in one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssessmentRecord {
    pub occupation_code: String,
    pub model_id: String,
    /// Assessment round, 1..=5.
    pub round: u8,
    pub level: ExposureLevel,
}

impl AssessmentRecord {
    pub fn new(
        occupation_code: impl Into<String>,
        model_id: impl Into<String>,
        round: u8,
        level: ExposureLevel,
    ) -> Result<Self> {
        if !(1..=5).contains(&round) {
            return Err(EngineError::InvalidSpec(format!("round {round} outside 1..=5")));
        }
        Ok(Self {
            occupation_code: occupation_code.into(),
            model_id: model_id.into(),
            round,
            level,
        })
    }
}

/// Level-to-score weights. The numeric mapping is a configuration parameter,
/// not a given; these defaults are assumptions and every report echoes the
/// weights actually used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelWeights {
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

impl Default for LevelWeights {
    fn default() -> Self {
        Self { e0: 0.0, e1: 1.0, e2: 0.5, e3: 0.5 }
    }
}

impl LevelWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("E0", self.e0), ("E1", self.e1), ("E2", self.e2), ("E3", self.e3)] {
            if !(0.0..=1.0).contains(&w) {
                return Err(EngineError::InvalidSpec(format!(
                    "level weight {name}={w} outside [0,1]"
                )));
            }
        }
        Ok(())
    }

    pub fn weight(&self, level: ExposureLevel) -> f64 {
        match level {
            ExposureLevel::E0 => self.e0,
            ExposureLevel::E1 => self.e1,
            ExposureLevel::E2 => self.e2,
            ExposureLevel::E3 => self.e3,
        }
    }
}

/// Occupation scores plus aggregated neighborhood exposure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExposureTable {
    pub level_weights: LevelWeights,
    pub occupation_scores: BTreeMap<String, f64>,
    /// (neighborhood, year) -> posting-weighted mean occupation score.
    pub neighborhood_exposure: BTreeMap<(String, i32), f64>,
}

/// Mean level weight over all records of a single occupation.
pub fn score_occupation(records: &[AssessmentRecord], weights: &LevelWeights) -> Result<f64> {
    weights.validate()?;
    if records.is_empty() {
        return Err(EngineError::EmptyInput("no assessment records for occupation"));
    }
    let occ = &records[0].occupation_code;
    if records.iter().any(|r| &r.occupation_code != occ) {
        return Err(EngineError::InvalidSpec(
            "score_occupation received records for more than one occupation".into(),
        ));
    }
    let sum: f64 = records.iter().map(|r| weights.weight(r.level)).sum();
    Ok(sum / records.len() as f64)
}

/// Score every occupation present in the records.
pub fn score_all_occupations(
    records: &[AssessmentRecord],
    weights: &LevelWeights,
) -> Result<BTreeMap<String, f64>> {
    let mut by_occ: BTreeMap<&str, Vec<AssessmentRecord>> = BTreeMap::new();
    for r in records {
        by_occ.entry(&r.occupation_code).or_default().push(r.clone());
    }
    let mut out = BTreeMap::new();
    for (occ, rs) in by_occ {
        out.insert(occ.to_string(), score_occupation(&rs, weights)?);
    }
    Ok(out)
}

/// Posting-count-weighted mean of occupation scores per neighborhood-year.
///
/// Postings whose occupation has no score are counted in the audit log and
/// excluded; a neighborhood-year with no scored postings is absent from the
/// output (also audited).
pub fn aggregate_exposure(
    occupation_scores: &BTreeMap<String, f64>,
    postings: &[PostingRecord],
) -> (BTreeMap<(String, i32), f64>, AuditLog) {
    let mut audit = AuditLog::new();
    let mut num: BTreeMap<(String, i32), f64> = BTreeMap::new();
    let mut den: BTreeMap<(String, i32), f64> = BTreeMap::new();
    let mut seen: BTreeSet<(String, i32)> = BTreeSet::new();
    for p in postings {
        let key = (p.neighborhood_id.clone(), p.year());
        seen.insert(key.clone());
        match occupation_scores.get(&p.occupation_code) {
            Some(&s) => {
                *num.entry(key.clone()).or_insert(0.0) += s;
                *den.entry(key).or_insert(0.0) += 1.0;
            }
            None => {
                audit.record(
                    AuditCode::UnscoredOccupation,
                    &p.posting_id,
                    format!("occupation `{}` has no score", p.occupation_code),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    for key in seen {
        match den.get(&key) {
            Some(&d) if d > 0.0 => {
                out.insert(key.clone(), num[&key] / d);
            }
            _ => audit.record(
                AuditCode::NoScoredPostings,
                format!("{}:{}", key.0, key.1),
                "neighborhood-year has no scored postings",
            ),
        }
    }
    (out, audit)
}

/// Build occupation scores and neighborhood exposure in one pass.
pub fn build_exposure_table(
    assessments: &[AssessmentRecord],
    postings: &[PostingRecord],
    weights: LevelWeights,
) -> Result<(ExposureTable, AuditLog)> {
    let occupation_scores = score_all_occupations(assessments, &weights)?;
    let (neighborhood_exposure, audit) = aggregate_exposure(&occupation_scores, postings);
    Ok((ExposureTable { level_weights: weights, occupation_scores, neighborhood_exposure }, audit))
}

/// Pairwise Pearson correlations of per-model mean occupation scores.
///
/// An entry is absent when the two models share fewer than 3 scored
/// occupations or either side is constant on the shared set. Diagonal is 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgreementMatrix {
    pub models: Vec<String>,
    pub corr: Vec<Vec<Option<f64>>>,
}

pub fn model_agreement(
    records: &[AssessmentRecord],
    weights: &LevelWeights,
) -> Result<AgreementMatrix> {
    weights.validate()?;
    if records.is_empty() {
        return Err(EngineError::EmptyInput("no assessment records"));
    }
    // per (model, occupation) mean score
    let mut sums: BTreeMap<(String, String), (f64, f64)> = BTreeMap::new();
    for r in records {
        let e = sums
            .entry((r.model_id.clone(), r.occupation_code.clone()))
            .or_insert((0.0, 0.0));
        e.0 += weights.weight(r.level);
        e.1 += 1.0;
    }
    let mut per_model: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for ((model, occ), (s, n)) in sums {
        per_model.entry(model).or_default().insert(occ, s / n);
    }
    let models: Vec<String> = per_model.keys().cloned().collect();
    let m = models.len();
    let mut corr = vec![vec![None; m]; m];
    for a in 0..m {
        corr[a][a] = Some(1.0);
        for b in (a + 1)..m {
            let sa = &per_model[&models[a]];
            let sb = &per_model[&models[b]];
            let shared: Vec<(f64, f64)> = sa
                .iter()
                .filter_map(|(occ, va)| sb.get(occ).map(|vb| (*va, *vb)))
                .collect();
            let r = if shared.len() >= 3 {
                pearson(
                    &shared.iter().map(|(a, _)| *a).collect::<Vec<_>>(),
                    &shared.iter().map(|(_, b)| *b).collect::<Vec<_>>(),
                )
            } else {
                None
            };
            corr[a][b] = r;
            corr[b][a] = r;
        }
    }
    Ok(AgreementMatrix { models, corr })
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}
