//! `did`: the pre-determined difference-in-differences fit.

use anyhow::Result;
use panelkit::designs::{
    build_did_design, fit_did, group_trajectories, tercile_split, DidSpec,
};
use panelkit::estimator::compute_vif;
use panelkit::panel::{AuditLog, PanelDataset};

use super::{attach_confounder_exposures, load_panel, standardize_cross_entity, Ctx};
use crate::config::DidConfig;
use crate::io::{self, format_float};
use crate::report::{vif_rows, AnalysisReport, DidResults, TercileRow};

/// Resolve the panel and spec shared by did / event-study / triple-did /
/// permute: load inputs, build configured confounder exposures, standardize
/// the pre-determined variables in place.
pub fn prepare(cfg: &DidConfig, audit: &mut AuditLog) -> Result<(PanelDataset, DidSpec)> {
    let mut panel = load_panel(&cfg.input, audit)?;
    let mut confounders = cfg.confounders.clone();
    if let Some(ce) = &cfg.confounder_exposures {
        confounders.extend(attach_confounder_exposures(&mut panel, ce, audit)?);
    }
    let outcome = cfg.outcome.clone().expect("validated");
    let treatment = cfg.treatment.clone().expect("validated");
    if cfg.standardize_treatment {
        standardize_cross_entity(&mut panel, &treatment)?;
    }
    if cfg.standardize_confounders {
        for c in &cfg.confounders {
            standardize_cross_entity(&mut panel, c)?;
        }
    }
    if let Some(m) = &cfg.moderator {
        if cfg.standardize_moderator {
            standardize_cross_entity(&mut panel, m)?;
        }
    }
    let mut spec = cfg.to_spec(outcome, treatment);
    spec.confounders = confounders;
    Ok((panel, spec))
}

pub fn write_coefficients_csv(
    path: &std::path::Path,
    fit: &panelkit::estimator::FitResult,
) -> Result<()> {
    let rows: Vec<Vec<String>> = fit
        .names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            vec![
                name.clone(),
                format_float(fit.coefs()[j]),
                format_float(fit.std_errors_all()[j]),
                format_float(fit.p_values_all()[j]),
            ]
        })
        .collect();
    io::write_csv(path, &["term", "estimate", "std_error", "p_value"], &rows)
}

pub fn run(ctx: &Ctx, cfg: &DidConfig) -> Result<AnalysisReport> {
    cfg.validate(false)?;
    let mut audit = AuditLog::new();
    let (panel, spec) = prepare(cfg, &mut audit)?;

    let built = build_did_design(&panel, &spec)?;
    let vifs = compute_vif(&built.design)?;
    let did = fit_did(&panel, &spec)?;
    audit.merge(did.audit.clone());

    write_coefficients_csv(&ctx.path("did_coefficients.csv"), &did.fit)?;

    let terciles = if cfg.descriptive_terciles {
        let groups = tercile_split(&panel, &spec.treatment)?;
        let traj = group_trajectories(&panel, &spec.outcome, &groups)?;
        let rows: Vec<Vec<String>> = traj
            .iter()
            .map(|(year, group, mean, n)| {
                vec![
                    year.to_string(),
                    group.as_str().to_string(),
                    format_float(*mean),
                    n.to_string(),
                ]
            })
            .collect();
        io::write_csv(
            &ctx.path("tercile_trajectories.csv"),
            &["year", "group", "mean_outcome", "n"],
            &rows,
        )?;
        Some(
            traj.into_iter()
                .map(|(year, group, mean, n)| TercileRow {
                    year,
                    group: group.as_str().to_string(),
                    mean_outcome: mean,
                    n,
                })
                .collect(),
        )
    } else {
        None
    };
    io::write_audit(&ctx.path("did_audit.jsonl"), &audit)?;

    let mut results = DidResults::new(&did, vif_rows(&vifs));
    results.tercile_trajectories = terciles;
    AnalysisReport::new("did", cfg, None, audit.tallies(), &results)
}
