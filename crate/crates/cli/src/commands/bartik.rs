//! `bartik`: shift-share instrument construction, long-difference reduced
//! form and 2SLS, plus the parallel-trends caution diagnostic.

use std::collections::BTreeMap;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use panelkit::bartik::{
    bartik_pretrend_diagnostic, build_long_differences, build_shift_share_inputs,
    fit_bartik_2sls, fit_reduced_form, standardize_values, LongDiffSpec,
};
use panelkit::designs::DidSpec;
use panelkit::panel::AuditLog;

use super::{load_panel, Ctx};
use crate::config::BartikConfig;
use crate::io::{self, format_float};
use crate::report::{AnalysisReport, FitSummary, TslsResults, WaldSummary};

#[derive(Debug, Serialize, Deserialize)]
struct BartikResults {
    n_neighborhoods_with_instrument: usize,
    n_long_difference_rows: usize,
    coverage_mean: f64,
    reduced_form: FitSummary,
    tsls: TslsResults,
    bartik_path: String,
    long_diffs_path: String,
    pretrend: Option<PretrendSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PretrendSummary {
    wald: WaldSummary,
    alpha: f64,
    parallel_trends_rejected: bool,
}

pub fn run(ctx: &Ctx, cfg: &BartikConfig) -> Result<AnalysisReport> {
    cfg.validate()?;
    let mut audit = AuditLog::new();
    let panel = load_panel(&cfg.input, &mut audit)?;
    let (postings, parse_audit) = io::read_postings(cfg.postings.as_ref().expect("validated"))?;
    audit.merge(parse_audit);

    // E_k: neighborhood exposure at the base year
    let exposure_var = cfg.exposure.as_ref().expect("validated");
    let mut exposures: BTreeMap<String, f64> = BTreeMap::new();
    for hood in panel.entities() {
        if let Some(v) = panel.value(&hood, cfg.base_year, exposure_var)? {
            exposures.insert(hood, v);
        }
    }
    if exposures.len() < 2 {
        anyhow::bail!(
            "fewer than two neighborhoods carry `{exposure_var}` in {}",
            cfg.base_year
        );
    }

    let inputs = build_shift_share_inputs(&postings, &exposures, cfg.base_year);
    inputs.validate()?;
    audit.merge(inputs.audit.clone());
    let raw: BTreeMap<String, f64> =
        inputs.bartik.iter().map(|(k, v)| (k.clone(), v.raw)).collect();
    let std = standardize_values(&raw).context("standardizing the Bartik predictor")?;

    let rows: Vec<Vec<String>> = inputs
        .bartik
        .iter()
        .map(|(hood, v)| {
            vec![
                hood.clone(),
                format_float(v.raw),
                format_float(std[hood]),
                format_float(v.coverage),
            ]
        })
        .collect();
    let bartik_path = ctx.path("bartik_out.csv");
    io::write_csv(
        &bartik_path,
        &["neighborhood_id", "bartik_raw", "bartik_std", "coverage_share"],
        &rows,
    )?;

    let instrument = if cfg.standardize_bartik { &std } else { &raw };
    let spec = LongDiffSpec {
        outcome: cfg.outcome.clone().expect("validated"),
        exposure: exposure_var.clone(),
        pre_years: cfg.pre_years.clone(),
        post_years: cfg.post_years.clone(),
        controls: cfg.controls.clone(),
        confounders: cfg.confounders.clone(),
    };
    let set = build_long_differences(&panel, instrument, &spec)?;
    audit.merge(set.audit.clone());

    let mut ld_rows = Vec::new();
    for r in &set.rows {
        let mut row = vec![
            r.neighborhood_id.clone(),
            format_float(r.d_outcome),
            format_float(r.d_exposure),
            format_float(r.bartik),
        ];
        row.extend(r.d_controls.iter().map(|v| format_float(*v)));
        row.extend(r.confounders.iter().map(|v| format_float(*v)));
        ld_rows.push(row);
    }
    let mut header = vec![
        "neighborhood_id".to_string(),
        "d_outcome".to_string(),
        "d_exposure".to_string(),
        "bartik".to_string(),
    ];
    header.extend(set.control_names.iter().map(|c| format!("d_{c}")));
    header.extend(set.confounder_names.iter().cloned());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let long_diffs_path = ctx.path("long_diffs.csv");
    io::write_csv(&long_diffs_path, &header_refs, &ld_rows)?;

    let reduced = fit_reduced_form(&set)?;
    let tsls = fit_bartik_2sls(&set)?;

    let pretrend = if cfg.pretrend_check {
        let template = DidSpec {
            outcome: spec.outcome.clone(),
            treatment: String::new(), // replaced by the diagnostic
            treatment_year: cfg.base_year,
            window: (cfg.pretrend_window[0], cfg.pretrend_window[1]),
            post_years: cfg.pretrend_post_years.clone(),
            base_year: cfg.pretrend_base_year,
            confounders: Vec::new(),
            controls: cfg.pretrend_controls.clone(),
        };
        let diag = bartik_pretrend_diagnostic(&panel, &raw, &template, cfg.pretrend_alpha)?;
        Some(PretrendSummary {
            wald: WaldSummary::from_wald(&diag.event_study.pretrend),
            alpha: diag.alpha,
            parallel_trends_rejected: diag.parallel_trends_rejected,
        })
    } else {
        None
    };

    io::write_audit(&ctx.path("bartik_audit.jsonl"), &audit)?;
    let coverage_mean = if inputs.bartik.is_empty() {
        0.0
    } else {
        inputs.bartik.values().map(|v| v.coverage).sum::<f64>() / inputs.bartik.len() as f64
    };
    let results = BartikResults {
        n_neighborhoods_with_instrument: inputs.bartik.len(),
        n_long_difference_rows: set.rows.len(),
        coverage_mean,
        reduced_form: FitSummary::from_fit(&reduced),
        tsls: TslsResults::new(&tsls),
        bartik_path: bartik_path.display().to_string(),
        long_diffs_path: long_diffs_path.display().to_string(),
        pretrend,
    };
    AnalysisReport::new("bartik", cfg, None, audit.tallies(), &results)
}
