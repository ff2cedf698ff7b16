//! Subcommand implementations. Every command resolves its configuration,
//! validates it in one pass, runs the analysis, and writes a report document
//! plus CSV side tables into the output directory.

pub mod bartik;
pub mod did;
pub mod event_study;
pub mod exposure;
pub mod fe_interact;
pub mod ingest;
pub mod lisa;
pub mod permute;
pub mod report_cmd;
pub mod simulate;
pub mod triple_did;

use std::path::PathBuf;

use anyhow::{Context, Result};
use panelkit::panel::{AuditLog, PanelDataset, StandardizeScope};

use crate::config::{ConfounderExposuresConfig, PanelInput};
use crate::io;

/// Execution context shared by every command.
pub struct Ctx {
    pub out: PathBuf,
    pub seed: Option<u64>,
}

impl Ctx {
    pub fn path(&self, name: &str) -> PathBuf {
        io::out_path(&self.out, name)
    }
}

/// Load the panel, apply merges, and derive log columns.
pub fn load_panel(input: &PanelInput, audit: &mut AuditLog) -> Result<PanelDataset> {
    let path = input.panel.as_ref().context("input.panel unset")?;
    let mut panel = io::read_panel(path)?;
    for extra in &input.merge {
        io::merge_panel_csv(&mut panel, extra)?;
    }
    for var in &input.derive_log {
        derive_log(&mut panel, var, audit)?;
    }
    Ok(panel)
}

/// Add `ln_<var>`; non-positive values become missing and are audited.
pub fn derive_log(panel: &mut PanelDataset, var: &str, audit: &mut AuditLog) -> Result<()> {
    let src = panel.var_id(var)?;
    let name = format!("ln_{var}");
    panel.add_variable(name.clone(), Default::default())?;
    let rows: Vec<(String, i32, Option<f64>)> = panel
        .observations()
        .iter()
        .map(|o| (o.entity.clone(), o.year, o.values[src]))
        .collect();
    for (entity, year, value) in rows {
        match value {
            Some(v) if v > 0.0 => {
                panel.set_value(&entity, year, &name, Some(v.ln()))?;
            }
            Some(v) => {
                audit.record(
                    panelkit::panel::AuditCode::RowDroppedMissing,
                    format!("{entity}:{year}"),
                    format!("ln({var}) undefined for {v}"),
                );
            }
            None => {}
        }
    }
    Ok(())
}

/// Z-score a pre-determined variable across entities in place.
pub fn standardize_cross_entity(panel: &mut PanelDataset, var: &str) -> Result<()> {
    panel
        .standardize(var, StandardizeScope::CrossEntity, None)
        .with_context(|| format!("standardizing `{var}` across entities"))?;
    Ok(())
}

/// Build standardized confounder-exposure columns from base-year postings and
/// return their names in config order.
pub fn attach_confounder_exposures(
    panel: &mut PanelDataset,
    cfg: &ConfounderExposuresConfig,
    audit: &mut AuditLog,
) -> Result<Vec<String>> {
    let (postings, parse_audit) = io::read_postings(&cfg.postings)?;
    audit.merge(parse_audit);
    let mut names = Vec::new();
    let years = panel.years();
    for shock_cfg in &cfg.shocks {
        let shock = shock_cfg.to_shock()?;
        let (exposure, shock_audit) =
            panelkit::designs::build_confounder_exposure(&postings, &shock, cfg.base_year);
        audit.merge(shock_audit);
        let std = panelkit::bartik::standardize_values(&exposure)?;
        let name = format!("{}_{}", shock.name.to_lowercase(), cfg.base_year);
        panel.add_variable(
            name.clone(),
            panelkit::panel::VariableMeta { units: None, standardized: true },
        )?;
        for (hood, z) in &std {
            for &year in &years {
                // rows absent from the panel are skipped
                let _ = panel.set_value(hood, year, &name, Some(*z));
            }
        }
        names.push(name);
    }
    Ok(names)
}
