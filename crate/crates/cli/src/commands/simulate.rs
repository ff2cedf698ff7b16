//! `simulate`: emit synthetic fixtures with planted truth in the same file
//! schemas the analysis commands consume, so the whole pipeline can be
//! exercised end to end.

use anyhow::Result;
use serde::{Deserialize, Serialize};

use panelkit::synth::{
    gen_did_panel, gen_interaction_panel, gen_iv_cross_section, gen_spatial_field, Block,
};

use super::Ctx;
use crate::config::{SimulateConfig, SimulateKind};
use crate::io::{self, format_float, write_atomic};
use crate::report::AnalysisReport;

#[derive(Debug, Serialize, Deserialize)]
struct SimulateResults {
    kind: String,
    files: Vec<String>,
    n_entities: usize,
    seed: u64,
}

pub fn run(ctx: &Ctx, cfg: &SimulateConfig) -> Result<AnalysisReport> {
    cfg.validate(ctx.seed)?;
    let seed = ctx.seed.or(cfg.seed).unwrap_or(0);
    let spec = cfg.spec.to_spec(seed);
    let mut files = Vec::new();
    let mut n_entities = spec.n_entities;

    match cfg.kind.expect("validated") {
        SimulateKind::DidPanel | SimulateKind::InteractionPanel => {
            let (panel, truth) = match cfg.kind.expect("validated") {
                SimulateKind::DidPanel => gen_did_panel(&spec)?,
                _ => gen_interaction_panel(&spec)?,
            };
            let panel_path = ctx.path("panel.csv");
            io::write_panel(&panel_path, &panel)?;
            files.push(panel_path.display().to_string());
            let truth_path = ctx.path("truth.json");
            let mut bytes = serde_json::to_vec_pretty(&truth)?;
            bytes.push(b'\n');
            write_atomic(&truth_path, &bytes)?;
            files.push(truth_path.display().to_string());
        }
        SimulateKind::IvCrossSection => {
            let (set, truth) = gen_iv_cross_section(&spec)?;
            let mut rows = Vec::new();
            for r in &set.rows {
                let mut row = vec![
                    r.neighborhood_id.clone(),
                    format_float(r.d_outcome),
                    format_float(r.d_exposure),
                    format_float(r.bartik),
                ];
                row.extend(r.d_controls.iter().map(|v| format_float(*v)));
                rows.push(row);
            }
            let mut header = vec![
                "neighborhood_id".to_string(),
                "d_outcome".to_string(),
                "d_exposure".to_string(),
                "bartik".to_string(),
            ];
            header.extend(set.control_names.iter().map(|c| format!("d_{c}")));
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let path = ctx.path("long_diffs.csv");
            io::write_csv(&path, &header_refs, &rows)?;
            files.push(path.display().to_string());
            let truth_path = ctx.path("truth.json");
            let mut bytes = serde_json::to_vec_pretty(&truth)?;
            bytes.push(b'\n');
            write_atomic(&truth_path, &bytes)?;
            files.push(truth_path.display().to_string());
        }
        SimulateKind::SpatialField => {
            let blocks: Vec<Block> = cfg
                .blocks
                .iter()
                .map(|b| Block {
                    row0: b.row0,
                    col0: b.col0,
                    height: b.height,
                    width: b.width,
                    mean: b.mean,
                })
                .collect();
            let [rows_n, cols_n] = cfg.lattice;
            let field = gen_spatial_field(rows_n, cols_n, &blocks, cfg.field_noise_sd, seed)?;
            n_entities = rows_n * cols_n;

            let mut value_rows = Vec::new();
            for r in 0..rows_n {
                for c in 0..cols_n {
                    value_rows.push(vec![
                        format!("r{r}c{c}"),
                        format_float(field.values[field.index(r, c)]),
                    ]);
                }
            }
            let values_path = ctx.path("values.csv");
            io::write_csv(&values_path, &["unit_id", "value"], &value_rows)?;
            files.push(values_path.display().to_string());

            // queen adjacency over the lattice, for the edge-list input path
            let mut edges = Vec::new();
            for r in 0..rows_n as i64 {
                for c in 0..cols_n as i64 {
                    for (dr, dc) in
                        [(0i64, 1i64), (1, 0), (1, 1), (1, -1)]
                    {
                        let (rr, cc) = (r + dr, c + dc);
                        if rr >= 0 && cc >= 0 && (rr as usize) < rows_n && (cc as usize) < cols_n {
                            edges.push(vec![format!("r{r}c{c}"), format!("r{rr}c{cc}")]);
                        }
                    }
                }
            }
            let adj_path = ctx.path("adjacency.csv");
            io::write_csv(&adj_path, &["unit_id", "neighbor_id"], &edges)?;
            files.push(adj_path.display().to_string());

            let truth_path = ctx.path("truth.json");
            let mut bytes = serde_json::to_vec_pretty(&field)?;
            bytes.push(b'\n');
            write_atomic(&truth_path, &bytes)?;
            files.push(truth_path.display().to_string());
        }
    }

    let results = SimulateResults {
        kind: format!("{:?}", cfg.kind.expect("validated")),
        files,
        n_entities,
        seed,
    };
    AnalysisReport::new("simulate", cfg, Some(seed), Default::default(), &results)
}
