//! Bartik shift-share instrument construction and long-difference estimation.
//!
//! The instrument interacts each neighborhood's base-year industry-employment
//! shares with leave-one-out industry-average exposures:
//! `Bartik_i = sum_j s_ij * Ebar_{-i,j}` where
//! `Ebar_{-i,j} = sum_{k!=i} n_kj E_k / sum_{k!=i} n_kj`.
//! Long differences (post-period mean minus pre-period mean per neighborhood)
//! feed cross-sectional reduced-form and 2SLS fits with HC1 standard errors.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::designs::{fit_event_study, DidSpec, EventStudyFit};
use crate::estimator::{fit_2sls, fit_ols, CovarianceSpec, DesignMatrix, FeDims, FitResult, TslsFit};
use crate::panel::{AuditCode, AuditLog, PanelDataset, PostingRecord, VariableMeta};
use crate::{EngineError, Result};

/// Leave-one-out industry-average exposure for one industry.
///
/// `counts` holds each neighborhood's posting count in the industry and
/// `exposures` each neighborhood's exposure; only neighborhoods carrying both
/// contribute. Returns `None` when no other neighborhood is active.
pub fn leave_one_out_exposure(
    counts: &BTreeMap<String, f64>,
    exposures: &BTreeMap<String, f64>,
    focal: &str,
) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, &n) in counts {
        if k == focal || n <= 0.0 {
            continue;
        }
        if let Some(&e) = exposures.get(k) {
            num += n * e;
            den += n;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// `Bartik_i = sum_j s_ij Ebar_{-i,j}` summing only over industries with a
/// defined leave-one-out value. Shares are deliberately not renormalized; the
/// skipped mass is reported as `1 - coverage`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BartikValue {
    pub raw: f64,
    /// Share mass over industries that contributed.
    pub coverage: f64,
}

pub fn build_bartik(
    shares: &BTreeMap<(String, char), f64>,
    loo_exposure: &BTreeMap<(String, char), f64>,
) -> BTreeMap<String, BartikValue> {
    let mut out: BTreeMap<String, BartikValue> = BTreeMap::new();
    let mut sums: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for ((hood, industry), &s) in shares {
        if let Some(&e) = loo_exposure.get(&(hood.clone(), *industry)) {
            let acc = sums.entry(hood.clone()).or_insert((0.0, 0.0));
            acc.0 += s * e;
            acc.1 += s;
        }
    }
    for (hood, (raw, coverage)) in sums {
        if coverage > 0.0 {
            out.insert(hood, BartikValue { raw, coverage });
        }
    }
    out
}

/// Base-year industry shares, counts, leave-one-out exposures, and the
/// assembled instrument.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftShareInputs {
    pub industries: Vec<char>,
    pub industry_counts: BTreeMap<(String, char), f64>,
    pub industry_shares: BTreeMap<(String, char), f64>,
    pub loo_exposure: BTreeMap<(String, char), f64>,
    pub bartik: BTreeMap<String, BartikValue>,
    pub audit: AuditLog,
}

impl ShiftShareInputs {
    /// Shares must sum to one within every neighborhood that has any.
    pub fn validate(&self) -> Result<()> {
        let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
        for ((hood, _), s) in &self.industry_shares {
            *sums.entry(hood).or_insert(0.0) += s;
        }
        for (hood, sum) in sums {
            if (sum - 1.0).abs() > 1e-12 {
                return Err(EngineError::InvalidSpec(format!(
                    "industry shares for `{hood}` sum to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// Compute counts, shares, leave-one-out exposures, and the Bartik instrument
/// from base-year postings and neighborhood exposures `E_k`.
pub fn build_shift_share_inputs(
    postings: &[PostingRecord],
    exposures: &BTreeMap<String, f64>,
    base_year: i32,
) -> ShiftShareInputs {
    let mut audit = AuditLog::new();
    let mut industry_counts: BTreeMap<(String, char), f64> = BTreeMap::new();
    let mut totals: BTreeMap<String, f64> = BTreeMap::new();
    let mut industries: BTreeSet<char> = BTreeSet::new();
    for p in postings {
        if p.year() != base_year {
            continue;
        }
        industries.insert(p.industry_code);
        *industry_counts.entry((p.neighborhood_id.clone(), p.industry_code)).or_insert(0.0) += 1.0;
        *totals.entry(p.neighborhood_id.clone()).or_insert(0.0) += 1.0;
    }
    let mut industry_shares = BTreeMap::new();
    for ((hood, industry), &n) in &industry_counts {
        industry_shares.insert((hood.clone(), *industry), n / totals[hood]);
    }
    // per-industry count maps for the leave-one-out means
    let mut loo_exposure = BTreeMap::new();
    for &industry in &industries {
        let counts: BTreeMap<String, f64> = industry_counts
            .iter()
            .filter(|((_, j), _)| *j == industry)
            .map(|((h, _), &n)| (h.clone(), n))
            .collect();
        for hood in totals.keys() {
            // the Bartik sum only needs industries the neighborhood holds
            if !industry_shares.contains_key(&(hood.clone(), industry)) {
                continue;
            }
            match leave_one_out_exposure(&counts, exposures, hood) {
                Some(e) => {
                    loo_exposure.insert((hood.clone(), industry), e);
                }
                None => audit.record(
                    AuditCode::MissingExposureComponent,
                    hood.clone(),
                    format!("no other neighborhood active in industry {industry}"),
                ),
            }
        }
    }
    let bartik = build_bartik(&industry_shares, &loo_exposure);
    for hood in totals.keys() {
        if !bartik.contains_key(hood) {
            audit.record(
                AuditCode::MissingExposureComponent,
                hood.clone(),
                "no industry with a defined leave-one-out exposure",
            );
        }
    }
    ShiftShareInputs {
        industries: industries.into_iter().collect(),
        industry_counts,
        industry_shares,
        loo_exposure,
        bartik,
        audit,
    }
}

/// Z-score a neighborhood-keyed map (sample SD).
pub fn standardize_values(values: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    let vals: Vec<f64> = values.values().copied().collect();
    if vals.len() < 2 {
        return Err(EngineError::EmptyInput("need at least two values to standardize"));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd <= 0.0 {
        return Err(EngineError::ZeroVariance { name: "bartik".into(), scope: "cross-section".into() });
    }
    Ok(values.iter().map(|(k, v)| (k.clone(), (v - mean) / sd)).collect())
}

/// Long-difference specification: pre/post period means per neighborhood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongDiffSpec {
    /// Log-wage variable to difference.
    pub outcome: String,
    /// Exposure variable to difference (the endogenous regressor).
    pub exposure: String,
    pub pre_years: Vec<i32>,
    pub post_years: Vec<i32>,
    /// Variables entered as long differences.
    pub controls: Vec<String>,
    /// Time-invariant exposure variables entered in levels.
    pub confounders: Vec<String>,
}

impl LongDiffSpec {
    pub fn new(outcome: impl Into<String>, exposure: impl Into<String>) -> Self {
        Self {
            outcome: outcome.into(),
            exposure: exposure.into(),
            pre_years: vec![2018, 2019],
            post_years: vec![2023, 2024],
            controls: Vec::new(),
            confounders: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LongDifference {
    pub neighborhood_id: String,
    pub d_outcome: f64,
    pub d_exposure: f64,
    pub d_controls: Vec<f64>,
    pub confounders: Vec<f64>,
    pub bartik: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LongDifferenceSet {
    pub control_names: Vec<String>,
    pub confounder_names: Vec<String>,
    pub rows: Vec<LongDifference>,
    pub audit: AuditLog,
}

/// Post-mean minus pre-mean per neighborhood for outcome, exposure, and
/// controls. Neighborhoods missing a whole period, a confounder, or an
/// instrument value are excluded with audit counts.
pub fn build_long_differences(
    panel: &PanelDataset,
    bartik: &BTreeMap<String, f64>,
    spec: &LongDiffSpec,
) -> Result<LongDifferenceSet> {
    if spec.pre_years.is_empty() || spec.post_years.is_empty() {
        return Err(EngineError::InvalidSpec("pre and post year sets must be non-empty".into()));
    }
    let mut audit = AuditLog::new();
    let mut rows = Vec::new();
    let mut hoods: Vec<String> = panel.entities();
    hoods.sort();
    for hood in hoods {
        let diff = |var: &str| -> Result<Option<f64>> {
            let pre = period_mean(panel, &hood, var, &spec.pre_years)?;
            let post = period_mean(panel, &hood, var, &spec.post_years)?;
            Ok(match (pre, post) {
                (Some(a), Some(b)) => Some(b - a),
                _ => None,
            })
        };
        let d_outcome = diff(&spec.outcome)?;
        let d_exposure = diff(&spec.exposure)?;
        let mut d_controls = Vec::new();
        let mut controls_ok = true;
        for c in &spec.controls {
            match diff(c)? {
                Some(v) => d_controls.push(v),
                None => controls_ok = false,
            }
        }
        let mut confounders = Vec::new();
        let mut conf_ok = true;
        for c in &spec.confounders {
            match first_value(panel, &hood, c)? {
                Some(v) => confounders.push(v),
                None => conf_ok = false,
            }
        }
        let bartik_v = bartik.get(&hood).copied();
        match (d_outcome, d_exposure, bartik_v, controls_ok && conf_ok) {
            (Some(d_outcome), Some(d_exposure), Some(bartik), true) => rows.push(LongDifference {
                neighborhood_id: hood,
                d_outcome,
                d_exposure,
                d_controls,
                confounders,
                bartik,
            }),
            _ => audit.record(
                AuditCode::RowDroppedMissing,
                hood,
                "missing pre/post period, confounder, or instrument",
            ),
        }
    }
    Ok(LongDifferenceSet {
        control_names: spec.controls.clone(),
        confounder_names: spec.confounders.clone(),
        rows,
        audit,
    })
}

fn period_mean(panel: &PanelDataset, entity: &str, var: &str, years: &[i32]) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut n = 0.0;
    for &y in years {
        if let Some(v) = panel.value(entity, y, var)? {
            sum += v;
            n += 1.0;
        }
    }
    Ok((n > 0.0).then(|| sum / n))
}

fn first_value(panel: &PanelDataset, entity: &str, var: &str) -> Result<Option<f64>> {
    for obs in panel.observations() {
        if obs.entity == entity {
            if let Some(v) = obs.values[panel.var_id(var)?] {
                return Ok(Some(v));
            }
        }
    }
    Ok(None)
}

fn long_diff_design(
    set: &LongDifferenceSet,
    include_exposure: bool,
    include_bartik: bool,
) -> Result<DesignMatrix> {
    let n = set.rows.len();
    let k_req = 2 + set.control_names.len() + set.confounder_names.len();
    if n < k_req + 2 {
        return Err(EngineError::InvalidSpec(format!(
            "need at least {} complete rows, found {n}",
            k_req + 2
        )));
    }
    let mut names = vec!["const".to_string()];
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    if include_exposure {
        names.push("d_exposure".into());
        cols.push(set.rows.iter().map(|r| r.d_exposure).collect());
    }
    if include_bartik {
        names.push("bartik".into());
        cols.push(set.rows.iter().map(|r| r.bartik).collect());
    }
    for (j, c) in set.control_names.iter().enumerate() {
        names.push(format!("d_{c}"));
        cols.push(set.rows.iter().map(|r| r.d_controls[j]).collect());
    }
    for (j, c) in set.confounder_names.iter().enumerate() {
        names.push(c.clone());
        cols.push(set.rows.iter().map(|r| r.confounders[j]).collect());
    }
    let y: Vec<f64> = set.rows.iter().map(|r| r.d_outcome).collect();
    DesignMatrix::from_columns(
        names,
        cols,
        y,
        "d_outcome",
        (0..n).collect(),
        vec![0; n],
        (0..n).collect(),
        FeDims::NONE,
        CovarianceSpec::Hc1,
    )
}

/// Reduced form: `d_outcome ~ bartik + d_controls + confounders`, HC1.
pub fn fit_reduced_form(set: &LongDifferenceSet) -> Result<FitResult> {
    fit_ols(&long_diff_design(set, false, true)?)
}

/// 2SLS: `d_outcome ~ d_exposure` instrumented by the Bartik predictor, with
/// shared controls; reports the first-stage F against the threshold of 10.
pub fn fit_bartik_2sls(set: &LongDifferenceSet) -> Result<TslsFit> {
    let design = long_diff_design(set, true, true)?;
    fit_2sls(&design, "d_exposure", "bartik")
}

/// Event study with the (standardized) Bartik predictor as treatment, used as
/// a parallel-trends diagnostic. `parallel_trends_rejected` is set when the
/// joint pre-trend Wald falls below `alpha`; the structural IV estimate
/// should be read with caution when it is.
#[derive(Debug, Clone)]
pub struct BartikPretrendDiagnostic {
    pub event_study: EventStudyFit,
    pub alpha: f64,
    pub parallel_trends_rejected: bool,
}

pub fn bartik_pretrend_diagnostic(
    panel: &PanelDataset,
    bartik: &BTreeMap<String, f64>,
    template: &DidSpec,
    alpha: f64,
) -> Result<BartikPretrendDiagnostic> {
    let std = standardize_values(bartik)?;
    let mut panel = panel.clone();
    let var = "bartik_std";
    panel.add_variable(var, VariableMeta { units: None, standardized: true })?;
    let entities = panel.entities();
    let years = panel.years();
    for e in entities {
        if let Some(v) = std.get(&e) {
            for &y in &years {
                // rows that do not exist are skipped
                let _ = panel.set_value(&e, y, var, Some(*v));
            }
        }
    }
    let mut spec = template.clone();
    spec.treatment = var.to_string();
    let event_study = fit_event_study(&panel, &spec)?;
    let rejected = event_study.pretrend.p_value() < alpha;
    Ok(BartikPretrendDiagnostic { event_study, alpha, parallel_trends_rejected: rejected })
}
