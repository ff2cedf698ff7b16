//! `permute`: Fisher randomization inference for the DID coefficient or the
//! cross-observation placebo shuffle for the interaction coefficient.

use anyhow::Result;
use serde::{Deserialize, Serialize};

use panelkit::panel::AuditLog;
use panelkit::permutation::{
    placebo_interaction_test, randomization_inference, PermutationDraws, PermutationPlan,
    PermutationReport,
};

use super::{did, fe_interact, Ctx};
use crate::config::{PermuteConfig, PermuteTarget};
use crate::io::{self, format_float};
use crate::report::AnalysisReport;

#[derive(Debug, Serialize, Deserialize)]
struct PermuteResults {
    target: String,
    observed_coefficient: f64,
    p_two_sided: f64,
    tail_count: usize,
    b: usize,
    b_requested: usize,
    refit_failures: usize,
    scheme: String,
    add_one: bool,
    exhaustive: bool,
    placebo_path: String,
}

pub fn run(ctx: &Ctx, cfg: &PermuteConfig) -> Result<AnalysisReport> {
    cfg.validate(ctx.seed)?;
    let seed = ctx.seed.or(cfg.seed).unwrap_or(0);
    let plan = PermutationPlan {
        draws: if cfg.exhaustive {
            PermutationDraws::Exhaustive
        } else {
            PermutationDraws::Random { b: cfg.b }
        },
        seed,
        add_one: cfg.add_one,
    };

    let mut audit = AuditLog::new();
    let (report, target_name): (PermutationReport, &str) = match cfg.target.expect("validated") {
        PermuteTarget::Did => {
            let did_cfg = cfg.did.as_ref().expect("validated");
            let (panel, spec) = did::prepare(did_cfg, &mut audit)?;
            (randomization_inference(&panel, &spec, &plan)?, "did")
        }
        PermuteTarget::FeInteract => {
            let fe_cfg = cfg.interact.as_ref().expect("validated");
            let (panel, spec) = fe_interact::prepare(fe_cfg, &mut audit)?;
            (placebo_interaction_test(&panel, &spec, &plan)?, "fe-interact")
        }
    };

    // full placebo vector for external plotting
    let rows: Vec<Vec<String>> = report
        .placebo_coefficients
        .iter()
        .enumerate()
        .map(|(i, c)| vec![i.to_string(), format_float(*c)])
        .collect();
    let placebo_path = ctx.path("placebo.csv");
    io::write_csv(&placebo_path, &["draw", "coefficient"], &rows)?;
    io::write_audit(&ctx.path("permute_audit.jsonl"), &audit)?;

    let results = PermuteResults {
        target: target_name.to_string(),
        observed_coefficient: report.observed_coefficient,
        p_two_sided: report.p_two_sided,
        tail_count: report.tail_count,
        b: report.b,
        b_requested: report.b_requested,
        refit_failures: report.refit_failures,
        scheme: format!("{:?}", report.scheme),
        add_one: report.add_one,
        exhaustive: cfg.exhaustive,
        placebo_path: placebo_path.display().to_string(),
    };
    AnalysisReport::new("permute", cfg, Some(seed), audit.tallies(), &results)
}
