//! `fe-interact`: two-way fixed-effects interaction (mechanism) models with
//! VIF diagnostics and the marginal-effect profile.

use anyhow::Result;
use panelkit::designs::{
    build_interaction_design, fit_interaction_fe, marginal_effect_profile, InteractionSpec,
};
use panelkit::estimator::compute_vif;
use panelkit::panel::{AuditLog, PanelDataset, StandardizeScope};

use super::{load_panel, Ctx};
use crate::config::FeInteractConfig;
use crate::io::{self, format_float};
use crate::report::{vif_rows, AnalysisReport, InteractionResults};

pub fn prepare(cfg: &FeInteractConfig, audit: &mut AuditLog) -> Result<(PanelDataset, InteractionSpec)> {
    let mut panel = load_panel(&cfg.input, audit)?;
    let exposure = cfg.exposure.clone().expect("validated");
    let moderator = cfg.moderator.clone().expect("validated");
    if cfg.standardize {
        for var in [&exposure, &moderator] {
            panel.standardize(var, StandardizeScope::Pooled, None)?;
        }
    }
    for var in &cfg.standardize_extra {
        panel.standardize(var, StandardizeScope::Pooled, None)?;
    }
    let spec = InteractionSpec {
        outcome: cfg.outcome.clone().expect("validated"),
        exposure,
        moderator,
        controls: cfg.controls.clone(),
        window: cfg.window.map(|w| (w[0], w[1])),
    };
    Ok((panel, spec))
}

pub fn run(ctx: &Ctx, cfg: &FeInteractConfig) -> Result<AnalysisReport> {
    cfg.validate()?;
    let mut audit = AuditLog::new();
    let (panel, spec) = prepare(cfg, &mut audit)?;

    let built = build_interaction_design(&panel, &spec)?;
    let vifs = compute_vif(&built.design)?;
    let fit = fit_interaction_fe(&panel, &spec)?;
    audit.merge(fit.audit.clone());
    let profile = marginal_effect_profile(
        &fit.fit,
        &fit.exposure_term,
        &fit.interaction_term,
        &cfg.profile_grid,
    )?;

    let rows: Vec<Vec<String>> = profile
        .points
        .iter()
        .map(|p| {
            vec![format_float(p.moderator), format_float(p.effect), format_float(p.std_error)]
        })
        .collect();
    io::write_csv(
        &ctx.path("marginal_profile.csv"),
        &["moderator", "effect", "std_error"],
        &rows,
    )?;
    super::did::write_coefficients_csv(&ctx.path("fe_interact_coefficients.csv"), &fit.fit)?;
    io::write_audit(&ctx.path("fe_interact_audit.jsonl"), &audit)?;

    let results = InteractionResults::new(&fit, vif_rows(&vifs), &profile);
    AnalysisReport::new("fe-interact", cfg, None, audit.tallies(), &results)
}
