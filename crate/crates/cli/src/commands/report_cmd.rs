//! `report`: render saved report documents as fixed-width text tables.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use super::Ctx;
use crate::config::ReportConfig;
use crate::io::write_atomic;
use crate::render::{render_event_series, render_table, RenderRow, TableLayout};
use crate::report::{
    AnalysisReport, DidResults, EventStudyResults, FitSummary, InteractionResults,
    TripleDidResults,
};

#[derive(Debug, Serialize, Deserialize)]
struct RenderedOutputs {
    rendered: Vec<String>,
}

fn rows_from_fit(fit: &FitSummary) -> Vec<RenderRow> {
    fit.coefficients
        .iter()
        .map(|c| RenderRow {
            label: c.name.clone(),
            estimate: c.estimate,
            std_error: c.std_error,
            p_value: c.p_value,
        })
        .collect()
}

fn common_footer(fit: &FitSummary) -> Vec<(String, String)> {
    vec![
        ("Observations".into(), fit.n_obs.to_string()),
        ("Entities".into(), fit.n_entities.to_string()),
        ("Clusters".into(), fit.n_clusters.to_string()),
        ("Within R2".into(), format!("{:.3}", fit.r_squared_within)),
    ]
}

fn render_one(report: &AnalysisReport) -> Result<String> {
    Ok(match report.command.as_str() {
        "did" => {
            let r: DidResults = serde_json::from_value(report.results.clone())?;
            let mut footer = common_footer(&r.fit);
            footer.push(("Effect size (%)".into(), format!("{:.2}", r.effect_percent)));
            footer.push(("Rows dropped".into(), r.dropped_rows.to_string()));
            render_table("Difference-in-differences estimates", &rows_from_fit(&r.fit), &footer, TableLayout::Table2)
        }
        "triple-did" => {
            let r: TripleDidResults = serde_json::from_value(report.results.clone())?;
            let mut footer = common_footer(&r.fit);
            footer.push(("Triple term".into(), r.triple_term.clone()));
            render_table("Triple-difference estimates", &rows_from_fit(&r.fit), &footer, TableLayout::Table2)
        }
        "fe-interact" => {
            let r: InteractionResults = serde_json::from_value(report.results.clone())?;
            let mut footer = common_footer(&r.fit);
            if let Some(m) = r.marginal_profile.zero_crossing {
                footer.push(("Marginal zero crossing".into(), format!("{m:.4}")));
            }
            render_table("Mechanism (interaction) estimates", &rows_from_fit(&r.fit), &footer, TableLayout::Table3)
        }
        "event-study" => {
            let r: EventStudyResults = serde_json::from_value(report.results.clone())?;
            let series: Vec<(i32, f64, f64, f64, bool)> = r
                .series
                .iter()
                .map(|p| (p.year, p.coefficient, p.std_error, p.p_value, p.is_base))
                .collect();
            let footer = vec![
                ("Pre-trend joint test (p)".to_string(), format!("{:.3}", r.pretrend.p_value)),
                ("Pre-trend statistic".to_string(), format!("{:.3}", r.pretrend.statistic)),
                ("Observations".to_string(), r.fit.n_obs.to_string()),
            ];
            render_event_series("Event-study estimates", &series, &footer)
        }
        other => {
            // generic rendering: pretty JSON body under a heading
            format!("{other} report\n{}\n", serde_json::to_string_pretty(&report.results)?)
        }
    })
}

pub fn run(ctx: &Ctx, cfg: &ReportConfig) -> Result<AnalysisReport> {
    cfg.validate()?;
    let mut rendered_paths = Vec::new();
    for input in &cfg.inputs {
        let report = AnalysisReport::read(input)
            .with_context(|| format!("reading report {}", input.display()))?;
        let text = render_one(&report)?;
        print!("{text}");
        let stem = input
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "report".into());
        let out = ctx.path(&format!("{stem}_rendered.txt"));
        write_atomic(&out, text.as_bytes())?;
        rendered_paths.push(out.display().to_string());
    }
    let results = RenderedOutputs { rendered: rendered_paths };
    AnalysisReport::new("report", cfg, None, Default::default(), &results)
}
