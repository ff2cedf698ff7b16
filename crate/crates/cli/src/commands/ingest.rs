//! `ingest`: postings.csv -> deduped, screened, aggregated panel.csv plus an
//! audit trail of everything excluded.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use panelkit::panel::{aggregate_neighborhood_year, dedupe_postings, AggregateOptions, AuditCode};

use super::Ctx;
use crate::config::IngestConfig;
use crate::io;
use crate::report::AnalysisReport;

#[derive(Debug, Serialize, Deserialize)]
struct IngestResults {
    n_raw_rows: usize,
    n_valid_postings: usize,
    n_after_dedupe: usize,
    n_duplicates_removed: usize,
    n_panel_rows: usize,
    n_neighborhoods: usize,
    years: Vec<i32>,
    panel_path: String,
    audit_path: String,
}

pub fn run(ctx: &Ctx, cfg: &IngestConfig) -> Result<AnalysisReport> {
    cfg.validate()?;
    let postings_path = cfg.postings.as_ref().expect("validated");
    let (postings, mut audit) = io::read_postings(postings_path)?;
    let n_raw = postings.len() + audit.entries.len();

    let (deduped, removed) = dedupe_postings(&postings);
    for dup in &removed {
        audit.record(
            AuditCode::DuplicatePosting,
            &dup.posting_id,
            format!(
                "same company/month/occupation/neighborhood as an earlier posting ({})",
                dup.month_key()
            ),
        );
    }

    let opts = AggregateOptions { wage_policy: cfg.wage_policy, index_scope: cfg.index_scope };
    let (panel, agg_audit) = aggregate_neighborhood_year(&deduped, opts)
        .context("aggregating postings into the neighborhood-year panel")?;
    audit.merge(agg_audit);

    let panel_path = ctx.path("panel.csv");
    io::write_panel(&panel_path, &panel)?;
    let audit_path = ctx.path("audit.jsonl");
    io::write_audit(&audit_path, &audit)?;

    let results = IngestResults {
        n_raw_rows: n_raw,
        n_valid_postings: postings.len(),
        n_after_dedupe: deduped.len(),
        n_duplicates_removed: removed.len(),
        n_panel_rows: panel.n_obs(),
        n_neighborhoods: panel.entities().len(),
        years: panel.years(),
        panel_path: panel_path.display().to_string(),
        audit_path: audit_path.display().to_string(),
    };
    AnalysisReport::new("ingest", cfg, None, audit.tallies(), &results)
}
