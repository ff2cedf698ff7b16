//! `event-study`: per-year coefficient path with the joint pre-trend test.

use anyhow::Result;
use panelkit::designs::fit_event_study;
use panelkit::panel::AuditLog;

use super::{did::prepare, Ctx};
use crate::config::DidConfig;
use crate::io::{self, format_float};
use crate::report::{AnalysisReport, EventStudyResults};

pub fn run(ctx: &Ctx, cfg: &DidConfig) -> Result<AnalysisReport> {
    cfg.validate(false)?;
    let mut audit = AuditLog::new();
    let (panel, spec) = prepare(cfg, &mut audit)?;
    let es = fit_event_study(&panel, &spec)?;
    audit.merge(es.audit.clone());

    let rows: Vec<Vec<String>> = es
        .series
        .iter()
        .map(|p| {
            vec![
                p.year.to_string(),
                format_float(p.coefficient),
                format_float(p.std_error),
                format_float(p.p_value),
                p.is_base.to_string(),
            ]
        })
        .collect();
    io::write_csv(
        &ctx.path("eventstudy.csv"),
        &["year", "coefficient", "std_error", "p_value", "is_base"],
        &rows,
    )?;
    io::write_audit(&ctx.path("eventstudy_audit.jsonl"), &audit)?;

    let results = EventStudyResults::new(&es);
    AnalysisReport::new("event-study", cfg, None, audit.tallies(), &results)
}
