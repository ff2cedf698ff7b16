//! `triple-did`: DID extended with a pre-determined moderator.

use anyhow::Result;
use panelkit::designs::fit_triple_did;
use panelkit::panel::AuditLog;

use super::{did::prepare, did::write_coefficients_csv, Ctx};
use crate::config::DidConfig;
use crate::io;
use crate::report::{AnalysisReport, TripleDidResults};

pub fn run(ctx: &Ctx, cfg: &DidConfig) -> Result<AnalysisReport> {
    cfg.validate(true)?;
    let mut audit = AuditLog::new();
    let (panel, spec) = prepare(cfg, &mut audit)?;
    let moderator = cfg.moderator.clone().expect("validated");
    let fit = fit_triple_did(&panel, &spec, &moderator)?;
    audit.merge(fit.audit.clone());

    write_coefficients_csv(&ctx.path("triple_did_coefficients.csv"), &fit.fit)?;
    io::write_audit(&ctx.path("triple_did_audit.jsonl"), &audit)?;

    let results = TripleDidResults::new(&fit);
    AnalysisReport::new("triple-did", cfg, None, audit.tallies(), &results)
}
