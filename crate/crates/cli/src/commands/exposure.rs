//! `exposure`: multi-model assessments + postings -> occupation scores,
//! neighborhood exposure, and the model-agreement matrix.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use panelkit::exposure::{build_exposure_table, model_agreement, AgreementMatrix};
use panelkit::panel::{PanelDataset, StandardizeScope};

use super::Ctx;
use crate::config::ExposureConfig;
use crate::io::{self, format_float};
use crate::report::AnalysisReport;

#[derive(Debug, Serialize, Deserialize)]
struct ExposureResults {
    n_occupations_scored: usize,
    n_neighborhood_years: usize,
    occupation_scores: BTreeMap<String, f64>,
    agreement: AgreementSummary,
    exposure_path: String,
    std_column: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct AgreementSummary {
    models: Vec<String>,
    correlations: Vec<Vec<Option<f64>>>,
    off_diagonal_min: Option<f64>,
    off_diagonal_max: Option<f64>,
}

fn summarize_agreement(m: &AgreementMatrix) -> AgreementSummary {
    let mut lo: Option<f64> = None;
    let mut hi: Option<f64> = None;
    for a in 0..m.models.len() {
        for b in 0..m.models.len() {
            if a == b {
                continue;
            }
            if let Some(r) = m.corr[a][b] {
                lo = Some(lo.map_or(r, |v| v.min(r)));
                hi = Some(hi.map_or(r, |v| v.max(r)));
            }
        }
    }
    AgreementSummary {
        models: m.models.clone(),
        correlations: m.corr.clone(),
        off_diagonal_min: lo,
        off_diagonal_max: hi,
    }
}

pub fn run(ctx: &Ctx, cfg: &ExposureConfig) -> Result<AnalysisReport> {
    cfg.validate()?;
    let assessments = io::read_assessments(cfg.assessments.as_ref().expect("validated"))?;
    let (postings, mut audit) = io::read_postings(cfg.postings.as_ref().expect("validated"))?;

    let (table, agg_audit) =
        build_exposure_table(&assessments, &postings, cfg.level_weights)?;
    audit.merge(agg_audit);
    let agreement = model_agreement(&assessments, &cfg.level_weights)?;

    // standardized broadcast column anchored at the configured year
    let mut panel = PanelDataset::new(vec!["exposure"])?;
    for ((hood, year), v) in &table.neighborhood_exposure {
        panel.push(hood.clone(), *year, vec![Some(*v)])?;
    }
    let std_column = format!("exposure_std{}", cfg.standardize_at);
    panel
        .standardize("exposure", StandardizeScope::AtYear(cfg.standardize_at), Some(&std_column))
        .with_context(|| format!("standardizing exposure at {}", cfg.standardize_at))?;

    let mut rows = Vec::new();
    let mut sorted = panel.clone();
    sorted.sort_rows();
    let exp_id = sorted.var_id("exposure")?;
    let std_id = sorted.var_id(&std_column)?;
    for obs in sorted.observations() {
        rows.push(vec![
            obs.entity.clone(),
            obs.year.to_string(),
            obs.values[exp_id].map(format_float).unwrap_or_default(),
            obs.values[std_id].map(format_float).unwrap_or_default(),
        ]);
    }
    let exposure_path = ctx.path("exposure_out.csv");
    io::write_csv(
        &exposure_path,
        &["neighborhood_id", "year", "exposure", std_column.as_str()],
        &rows,
    )?;
    io::write_audit(&ctx.path("exposure_audit.jsonl"), &audit)?;

    let results = ExposureResults {
        n_occupations_scored: table.occupation_scores.len(),
        n_neighborhood_years: table.neighborhood_exposure.len(),
        occupation_scores: table.occupation_scores.clone(),
        agreement: summarize_agreement(&agreement),
        exposure_path: exposure_path.display().to_string(),
        std_column,
    };
    AnalysisReport::new("exposure", cfg, None, audit.tallies(), &results)
}
