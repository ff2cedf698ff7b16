//! `lisa`: spatial weights, global Moran's I, and local cluster
//! classification with permutation significance.

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use panelkit::spatial::{global_moran, lisa, Contiguity, LisaCategory, LisaOptions, SpatialWeights};

use super::Ctx;
use crate::config::{LisaConfig, WeightsSchemeConfig};
use crate::io::{self, format_float};
use crate::report::AnalysisReport;

#[derive(Debug, Serialize, Deserialize)]
struct LisaResults {
    global_i: f64,
    expected_i: f64,
    global_pseudo_p: f64,
    n_units: usize,
    n_isolated: usize,
    isolated_units: Vec<String>,
    category_counts: BTreeMap<String, usize>,
    n_permutations: usize,
    alpha: f64,
    fdr: Option<FdrSummary>,
    weights_scheme: String,
    lisa_path: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct FdrSummary {
    threshold: f64,
    n_significant: usize,
}

fn read_centroids(path: &std::path::Path) -> Result<Vec<(String, (f64, f64))>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<&str> = reader.headers()?.iter().collect();
    if headers != ["unit_id", "x", "y"] {
        bail!("centroids header must be unit_id,x,y; found {:?}", headers);
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        out.push((
            row.get(0).unwrap_or("").to_string(),
            (row.get(1).unwrap_or("").parse()?, row.get(2).unwrap_or("").parse()?),
        ));
    }
    Ok(out)
}

fn ring_centroid(ring: &[(f64, f64)]) -> (f64, f64) {
    let n = ring.len() as f64;
    (ring.iter().map(|p| p.0).sum::<f64>() / n, ring.iter().map(|p| p.1).sum::<f64>() / n)
}

/// Benjamini-Hochberg significance threshold over the tested units.
fn bh_threshold(pvals: &[f64], alpha: f64) -> f64 {
    let mut sorted: Vec<f64> = pvals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut threshold = 0.0;
    for (i, p) in sorted.iter().enumerate() {
        if *p <= alpha * (i as f64 + 1.0) / m {
            threshold = *p;
        }
    }
    threshold
}

pub fn run(ctx: &Ctx, cfg: &LisaConfig) -> Result<AnalysisReport> {
    cfg.validate(ctx.seed)?;
    let seed = ctx.seed.or(cfg.seed).unwrap_or(0);
    let values_by_id = io::read_values(cfg.values.as_ref().expect("validated"))?;

    let contiguity = match cfg.weights.scheme {
        WeightsSchemeConfig::Rook => Contiguity::Rook,
        _ => Contiguity::Queen,
    };
    let mut weights = if let Some(path) = &cfg.weights.adjacency {
        let units: Vec<String> = values_by_id.iter().map(|(id, _)| id.clone()).collect();
        SpatialWeights::from_edges(units, &io::read_adjacency(path)?)?
    } else if let Some(path) = &cfg.weights.polygons {
        let polys = io::read_polygons(path)?;
        let mut w = SpatialWeights::from_polygons(&polys, contiguity)?;
        if cfg.weights.knn_fallback && !w.isolated_units().is_empty() {
            let centroids: Vec<(String, (f64, f64))> =
                polys.iter().map(|(id, ring)| (id.clone(), ring_centroid(ring))).collect();
            w.knn_fallback(&centroids, cfg.weights.k.min(w.n() - 1))?;
        }
        w
    } else if let Some([rows, cols]) = cfg.weights.lattice {
        SpatialWeights::lattice(rows, cols, contiguity)?
    } else if let Some(path) = &cfg.weights.centroids {
        SpatialWeights::k_nearest(&read_centroids(path)?, cfg.weights.k)?
    } else {
        unreachable!("validated");
    };
    // keep the isolated flag honest for adjacency input too
    if cfg.weights.knn_fallback {
        if let Some(path) = &cfg.weights.centroids {
            if !weights.isolated_units().is_empty() {
                weights.knn_fallback(&read_centroids(path)?, cfg.weights.k)?;
            }
        }
    }

    // values aligned to the weights' unit order
    let lookup: BTreeMap<&str, f64> =
        values_by_id.iter().map(|(id, v)| (id.as_str(), *v)).collect();
    let values: Vec<f64> = weights
        .units()
        .iter()
        .map(|u| {
            lookup
                .get(u.as_str())
                .copied()
                .ok_or_else(|| anyhow::anyhow!("no value for spatial unit `{u}`"))
        })
        .collect::<Result<_>>()?;

    let global = global_moran(&values, &weights, cfg.permutations, seed)?;
    let result = lisa(
        &values,
        &weights,
        LisaOptions { n_permutations: cfg.permutations, alpha: cfg.alpha, seed },
    )?;

    // optional FDR re-gating over the tested (non-isolated) units
    let (categories, fdr) = if cfg.fdr {
        let tested: Vec<f64> = result
            .pseudo_p
            .iter()
            .zip(&result.quadrant)
            .filter(|(_, q)| !matches!(q, LisaCategory::Isolated))
            .map(|(p, _)| *p)
            .collect();
        let threshold = bh_threshold(&tested, cfg.alpha);
        let cats: Vec<LisaCategory> = result
            .quadrant
            .iter()
            .zip(&result.pseudo_p)
            .map(|(q, p)| match q {
                LisaCategory::Isolated => LisaCategory::Isolated,
                _ if *p <= threshold => *q,
                _ => LisaCategory::NotSignificant,
            })
            .collect();
        let n_sig = cats
            .iter()
            .filter(|c| !matches!(c, LisaCategory::NotSignificant | LisaCategory::Isolated))
            .count();
        (cats, Some(FdrSummary { threshold, n_significant: n_sig }))
    } else {
        (result.category.clone(), None)
    };

    let rows: Vec<Vec<String>> = result
        .units
        .iter()
        .enumerate()
        .map(|(i, unit)| {
            vec![
                unit.clone(),
                format_float(result.local_i[i]),
                format_float(result.pseudo_p[i]),
                categories[i].as_str().to_string(),
            ]
        })
        .collect();
    let lisa_path = ctx.path("lisa_out.csv");
    io::write_csv(&lisa_path, &["unit_id", "local_i", "pseudo_p", "category"], &rows)?;

    let mut category_counts: BTreeMap<String, usize> = BTreeMap::new();
    for c in &categories {
        *category_counts.entry(c.as_str().to_string()).or_insert(0) += 1;
    }
    let isolated: Vec<String> =
        weights.isolated_units().into_iter().map(String::from).collect();
    let results = LisaResults {
        global_i: global.i,
        expected_i: global.expected,
        global_pseudo_p: global.pseudo_p,
        n_units: weights.n(),
        n_isolated: isolated.len(),
        isolated_units: isolated,
        category_counts,
        n_permutations: cfg.permutations,
        alpha: cfg.alpha,
        fdr,
        weights_scheme: weights.scheme.clone(),
        lisa_path: lisa_path.display().to_string(),
    };
    AnalysisReport::new("lisa", cfg, Some(seed), BTreeMap::new(), &results)
}
