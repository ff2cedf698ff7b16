//! Specification builders and fits for the causal designs: pre-determined
//! DID, confounder exposures, event studies, triple-DID, and two-way
//! fixed-effects interaction models.
//!
//! Every design regresses log wages on terms built from a pre-determined
//! (base-year, standardized) exposure with entity and year fixed effects and
//! entity-clustered standard errors. Interaction column names encode their
//! parents, e.g. `genai_2018:post` and `genai_2018:edu_2018:post`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::estimator::{
    fit_ols, wald_joint, CovarianceSpec, DesignMatrix, FeDims, FitResult, WaldTest,
};
use crate::panel::{AuditCode, AuditLog, PanelDataset, PostingRecord};
use crate::{EngineError, Result};

/// Difference-in-differences specification (also the event-study spec, which
/// reuses every field plus `base_year`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DidSpec {
    /// Log-wage outcome variable.
    pub outcome: String,
    /// Pre-determined standardized exposure variable.
    pub treatment: String,
    /// Year the treatment was measured; must precede the window.
    pub treatment_year: i32,
    /// Analysis window, inclusive.
    pub window: (i32, i32),
    pub post_years: Vec<i32>,
    /// Event-study reference year.
    pub base_year: i32,
    /// Pre-determined shock-exposure variables, interacted with post.
    pub confounders: Vec<String>,
    pub controls: Vec<String>,
}

pub type EventStudySpec = DidSpec;

impl DidSpec {
    /// Paper-default layout: window 2020-2024, post {2023, 2024}, base 2022,
    /// treatment measured 2018.
    pub fn new(outcome: impl Into<String>, treatment: impl Into<String>) -> Self {
        Self {
            outcome: outcome.into(),
            treatment: treatment.into(),
            treatment_year: 2018,
            window: (2020, 2024),
            post_years: vec![2023, 2024],
            base_year: 2022,
            confounders: Vec::new(),
            controls: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.window;
        if lo > hi {
            return Err(EngineError::InvalidSpec(format!("window {lo}..={hi} is empty")));
        }
        if self.treatment_year >= lo {
            return Err(EngineError::InvalidSpec(format!(
                "treatment year {} must lie strictly before the window start {lo}",
                self.treatment_year
            )));
        }
        if self.post_years.is_empty() {
            return Err(EngineError::InvalidSpec("post_years is empty".into()));
        }
        for y in &self.post_years {
            if *y < lo || *y > hi {
                return Err(EngineError::InvalidSpec(format!("post year {y} outside window")));
            }
        }
        if self.post_years.contains(&self.base_year) {
            return Err(EngineError::InvalidSpec(format!(
                "base year {} cannot be a post year",
                self.base_year
            )));
        }
        if self.base_year < lo || self.base_year > hi {
            return Err(EngineError::InvalidSpec(format!("base year {} outside window", self.base_year)));
        }
        Ok(())
    }

    fn is_post(&self, year: i32) -> bool {
        self.post_years.contains(&year)
    }

    /// Pre-period years: inside the window, before the earliest post year.
    pub fn pre_years(&self) -> Vec<i32> {
        let first_post = *self.post_years.iter().min().expect("validated non-empty");
        (self.window.0..=self.window.1).filter(|y| *y < first_post).collect()
    }
}

/// A concurrent shock defined by its directly affected industries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShockDefinition {
    pub name: String,
    pub industry_codes: BTreeSet<char>,
}

impl ShockDefinition {
    pub fn new(name: impl Into<String>, codes: impl IntoIterator<Item = char>) -> Result<Self> {
        let industry_codes: BTreeSet<char> = codes.into_iter().collect();
        if industry_codes.is_empty() {
            return Err(EngineError::InvalidSpec("shock needs at least one industry code".into()));
        }
        for c in &industry_codes {
            if !crate::panel::INDUSTRY_CODES.contains(c) {
                return Err(EngineError::InvalidSpec(format!("unknown industry code `{c}`")));
            }
        }
        Ok(Self { name: name.into(), industry_codes })
    }

    /// Technology regulation: information technology and software (I).
    pub fn tech_reg() -> Self {
        Self::new("TechReg", ['I']).expect("valid")
    }

    /// COVID recovery: accommodation/catering (H) and transportation (G).
    pub fn covid() -> Self {
        Self::new("COVID", ['H', 'G']).expect("valid")
    }

    /// Real-estate adjustment: real estate (K) and construction (E).
    pub fn real_estate() -> Self {
        Self::new("RealEstate", ['K', 'E']).expect("valid")
    }
}

/// Each neighborhood's base-year employment share in the shock's industries.
///
/// Neighborhoods with no base-year postings are absent from the map and
/// recorded in the audit log; the DID sample later drops them as incomplete
/// cases.
pub fn build_confounder_exposure(
    postings: &[PostingRecord],
    shock: &ShockDefinition,
    base_year: i32,
) -> (BTreeMap<String, f64>, AuditLog) {
    let mut audit = AuditLog::new();
    let mut totals: BTreeMap<String, (u64, u64)> = BTreeMap::new(); // (in-shock, all)
    let mut all_hoods: BTreeSet<String> = BTreeSet::new();
    for p in postings {
        all_hoods.insert(p.neighborhood_id.clone());
        if p.year() != base_year {
            continue;
        }
        let e = totals.entry(p.neighborhood_id.clone()).or_insert((0, 0));
        e.1 += 1;
        if shock.industry_codes.contains(&p.industry_code) {
            e.0 += 1;
        }
    }
    let mut out = BTreeMap::new();
    for hood in all_hoods {
        match totals.get(&hood) {
            Some(&(hit, all)) if all > 0 => {
                out.insert(hood, hit as f64 / all as f64);
            }
            _ => audit.record(
                AuditCode::ZeroBasePostings,
                hood,
                format!("no postings in {base_year}; excluded from {}", shock.name),
            ),
        }
    }
    (out, audit)
}

/// Convert a log-point coefficient to a percent change: `100 (e^beta - 1)`.
pub fn effect_size(beta: f64) -> f64 {
    100.0 * (beta.exp() - 1.0)
}

pub fn interaction_name(parents: &[&str]) -> String {
    parents.join(":")
}

/// A DID design plus the bookkeeping the permutation engine needs to rebuild
/// treatment-dependent columns per draw.
#[derive(Debug, Clone)]
pub struct DidDesign {
    pub design: DesignMatrix,
    pub treatment_term: String,
    pub confounder_terms: Vec<String>,
    /// Post indicator per design row.
    pub post: Vec<bool>,
    /// Treatment value by entity code (time-invariant by construction).
    pub treatment_by_entity: Vec<f64>,
    pub dropped_rows: usize,
    pub audit: AuditLog,
}

struct RowSet<'a> {
    rows: Vec<&'a crate::panel::Observation>,
    entity_codes: Vec<usize>,
    time_codes: Vec<usize>,
    entities: Vec<String>,
    dropped: usize,
    audit: AuditLog,
}

/// Select complete-case rows in the window and assign group codes.
fn select_rows<'a>(
    panel: &'a PanelDataset,
    window: (i32, i32),
    required: &[&str],
) -> Result<RowSet<'a>> {
    let ids: Vec<usize> = required.iter().map(|v| panel.var_id(v)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut dropped = 0usize;
    let mut audit = AuditLog::new();
    for obs in panel.observations() {
        if obs.year < window.0 || obs.year > window.1 {
            continue;
        }
        if ids.iter().all(|&i| obs.values[i].is_some()) {
            rows.push(obs);
        } else {
            dropped += 1;
            audit.record(
                AuditCode::RowDroppedMissing,
                format!("{}:{}", obs.entity, obs.year),
                "missing required variable",
            );
        }
    }
    if rows.is_empty() {
        return Err(EngineError::EmptyInput("no complete rows in window"));
    }
    let mut entities: Vec<String> = rows.iter().map(|o| o.entity.clone()).collect();
    entities.sort();
    entities.dedup();
    let entity_pos: BTreeMap<&str, usize> =
        entities.iter().enumerate().map(|(i, e)| (e.as_str(), i)).collect();
    let mut years: Vec<i32> = rows.iter().map(|o| o.year).collect();
    years.sort_unstable();
    years.dedup();
    let year_pos: BTreeMap<i32, usize> = years.iter().enumerate().map(|(i, y)| (*y, i)).collect();
    let entity_codes = rows.iter().map(|o| entity_pos[o.entity.as_str()]).collect();
    let time_codes = rows.iter().map(|o| year_pos[&o.year]).collect();
    Ok(RowSet { rows, entity_codes, time_codes, entities, dropped, audit })
}

fn require_standardized(panel: &PanelDataset, var: &str, role: &str) -> Result<()> {
    if !panel.meta(var)?.standardized {
        return Err(EngineError::InvalidSpec(format!(
            "{role} `{var}` must be standardized (run standardize first; the panel metadata flag is unset)"
        )));
    }
    Ok(())
}

/// Error if `var` varies within any entity across the selected rows.
fn require_time_invariant(rows: &RowSet<'_>, panel: &PanelDataset, var: &str) -> Result<Vec<f64>> {
    let id = panel.var_id(var)?;
    let mut by_entity: Vec<Option<f64>> = vec![None; rows.entities.len()];
    for (obs, &code) in rows.rows.iter().zip(&rows.entity_codes) {
        let v = obs.values[id].expect("complete case");
        match by_entity[code] {
            None => by_entity[code] = Some(v),
            Some(prev) if (prev - v).abs() > 1e-12 => {
                return Err(EngineError::InvalidSpec(format!(
                    "`{var}` varies over time within entity `{}`; pre-determined variables must be constant",
                    obs.entity
                )));
            }
            _ => {}
        }
    }
    Ok(by_entity.into_iter().map(|v| v.expect("entity present")).collect())
}

fn column_of(rows: &RowSet<'_>, panel: &PanelDataset, var: &str) -> Result<Vec<f64>> {
    let id = panel.var_id(var)?;
    Ok(rows.rows.iter().map(|o| o.values[id].expect("complete case")).collect())
}

/// Build the Eq.-style DID design: treatment x post, confounder x post terms,
/// controls, two-way fixed effects, entity clustering.
pub fn build_did_design(panel: &PanelDataset, spec: &DidSpec) -> Result<DidDesign> {
    spec.validate()?;
    require_standardized(panel, &spec.treatment, "treatment")?;
    for c in &spec.confounders {
        require_standardized(panel, c, "confounder")?;
    }

    let mut required: Vec<&str> = vec![&spec.outcome, &spec.treatment];
    required.extend(spec.confounders.iter().map(String::as_str));
    required.extend(spec.controls.iter().map(String::as_str));
    let rows = select_rows(panel, spec.window, &required)?;

    let post: Vec<bool> = rows.rows.iter().map(|o| spec.is_post(o.year)).collect();
    if post.iter().all(|p| !p) {
        return Err(EngineError::InvalidSpec("post period is empty after row selection".into()));
    }
    if post.iter().all(|p| *p) {
        return Err(EngineError::InvalidSpec("pre period is empty after row selection".into()));
    }

    let treatment_by_entity = require_time_invariant(&rows, panel, &spec.treatment)?;

    let mut names = Vec::new();
    let mut cols = Vec::new();
    let treatment_term = interaction_name(&[&spec.treatment, "post"]);
    names.push(treatment_term.clone());
    cols.push(
        rows.entity_codes
            .iter()
            .zip(&post)
            .map(|(&e, &p)| treatment_by_entity[e] * f64::from(p as u8))
            .collect::<Vec<f64>>(),
    );
    let mut confounder_terms = Vec::new();
    for c in &spec.confounders {
        let vals = require_time_invariant(&rows, panel, c)?;
        let term = interaction_name(&[c, "post"]);
        confounder_terms.push(term.clone());
        names.push(term);
        cols.push(
            rows.entity_codes
                .iter()
                .zip(&post)
                .map(|(&e, &p)| vals[e] * f64::from(p as u8))
                .collect(),
        );
    }
    for ctrl in &spec.controls {
        names.push(ctrl.clone());
        cols.push(column_of(&rows, panel, ctrl)?);
    }

    let y = column_of(&rows, panel, &spec.outcome)?;
    let design = DesignMatrix::from_columns(
        names,
        cols,
        y,
        spec.outcome.clone(),
        rows.entity_codes.clone(),
        rows.time_codes.clone(),
        rows.entity_codes.clone(),
        FeDims::TWO_WAY,
        CovarianceSpec::ClusterCr1,
    )?;
    Ok(DidDesign {
        design,
        treatment_term,
        confounder_terms,
        post,
        treatment_by_entity,
        dropped_rows: rows.dropped,
        audit: rows.audit,
    })
}

/// A fitted DID with its headline coefficient broken out.
#[derive(Debug, Clone)]
pub struct DidFit {
    pub fit: FitResult,
    pub treatment_term: String,
    pub beta: f64,
    /// `100 (e^beta - 1)`.
    pub effect_percent: f64,
    pub dropped_rows: usize,
    pub audit: AuditLog,
}

/// Fit the pre-determined DID.
pub fn fit_did(panel: &PanelDataset, spec: &DidSpec) -> Result<DidFit> {
    let built = build_did_design(panel, spec)?;
    let fit = fit_ols(&built.design)?;
    let beta = fit.coef(&built.treatment_term)?;
    Ok(DidFit {
        beta,
        effect_percent: effect_size(beta),
        treatment_term: built.treatment_term,
        dropped_rows: built.dropped_rows,
        audit: built.audit,
        fit,
    })
}

/// Event-study output: the per-year coefficient path with the base year
/// pinned at zero, plus the joint pre-trend Wald test.
#[derive(Debug, Clone)]
pub struct EventStudyFit {
    pub fit: FitResult,
    pub series: Vec<EventStudyPoint>,
    pub pretrend: WaldTest,
    pub pre_terms: Vec<String>,
    pub dropped_rows: usize,
    pub audit: AuditLog,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EventStudyPoint {
    pub year: i32,
    pub coefficient: f64,
    pub std_error: f64,
    pub p_value: f64,
    pub is_base: bool,
}

/// Fit the event-study design: one `treatment x 1[t=tau]` term per non-base
/// year, confounders interacted with post, controls, two-way fixed effects.
pub fn fit_event_study(panel: &PanelDataset, spec: &EventStudySpec) -> Result<EventStudyFit> {
    spec.validate()?;
    require_standardized(panel, &spec.treatment, "treatment")?;
    for c in &spec.confounders {
        require_standardized(panel, c, "confounder")?;
    }
    let mut required: Vec<&str> = vec![&spec.outcome, &spec.treatment];
    required.extend(spec.confounders.iter().map(String::as_str));
    required.extend(spec.controls.iter().map(String::as_str));
    let rows = select_rows(panel, spec.window, &required)?;

    // every window year must be represented
    let years_present: BTreeSet<i32> = rows.rows.iter().map(|o| o.year).collect();
    for y in spec.window.0..=spec.window.1 {
        if !years_present.contains(&y) {
            return Err(EngineError::EmptyYear(y));
        }
    }

    let treatment_by_entity = require_time_invariant(&rows, panel, &spec.treatment)?;
    let post: Vec<bool> = rows.rows.iter().map(|o| spec.is_post(o.year)).collect();

    let mut names = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut year_terms: Vec<(i32, String)> = Vec::new();
    for year in spec.window.0..=spec.window.1 {
        if year == spec.base_year {
            continue;
        }
        let term = interaction_name(&[&spec.treatment, &format!("y{year}")]);
        year_terms.push((year, term.clone()));
        names.push(term);
        cols.push(
            rows.rows
                .iter()
                .zip(&rows.entity_codes)
                .map(|(o, &e)| treatment_by_entity[e] * f64::from(u8::from(o.year == year)))
                .collect(),
        );
    }
    for c in &spec.confounders {
        let vals = require_time_invariant(&rows, panel, c)?;
        names.push(interaction_name(&[c, "post"]));
        cols.push(
            rows.entity_codes
                .iter()
                .zip(&post)
                .map(|(&e, &p)| vals[e] * f64::from(p as u8))
                .collect(),
        );
    }
    for ctrl in &spec.controls {
        names.push(ctrl.clone());
        cols.push(column_of(&rows, panel, ctrl)?);
    }

    let y = column_of(&rows, panel, &spec.outcome)?;
    let design = DesignMatrix::from_columns(
        names,
        cols,
        y,
        spec.outcome.clone(),
        rows.entity_codes.clone(),
        rows.time_codes.clone(),
        rows.entity_codes.clone(),
        FeDims::TWO_WAY,
        CovarianceSpec::ClusterCr1,
    )?;
    let fit = fit_ols(&design)?;

    let pre_years = spec.pre_years();
    let pre_terms: Vec<String> = year_terms
        .iter()
        .filter(|(y, _)| pre_years.contains(y))
        .map(|(_, t)| t.clone())
        .collect();
    if pre_terms.is_empty() {
        return Err(EngineError::InvalidSpec(
            "no pre-period coefficients to test (base year is the only pre year)".into(),
        ));
    }
    let pretrend = wald_joint(&fit, &pre_terms)?;

    let mut series = Vec::new();
    for year in spec.window.0..=spec.window.1 {
        if year == spec.base_year {
            series.push(EventStudyPoint {
                year,
                coefficient: 0.0,
                std_error: 0.0,
                p_value: 1.0,
                is_base: true,
            });
        } else {
            let term = &year_terms.iter().find(|(y, _)| *y == year).expect("built").1;
            series.push(EventStudyPoint {
                year,
                coefficient: fit.coef(term)?,
                std_error: fit.se(term)?,
                p_value: fit.p_value(term)?,
                is_base: false,
            });
        }
    }

    Ok(EventStudyFit {
        fit,
        series,
        pretrend,
        pre_terms,
        dropped_rows: rows.dropped,
        audit: rows.audit,
    })
}

#[derive(Debug, Clone)]
pub struct TripleDidFit {
    pub fit: FitResult,
    pub treatment_term: String,
    pub moderator_term: String,
    pub triple_term: String,
    pub beta3: f64,
    pub dropped_rows: usize,
    pub audit: AuditLog,
}

/// Extend the DID with a pre-determined moderator: adds `M x post` and the
/// triple term `D x M x post`.
pub fn fit_triple_did(panel: &PanelDataset, spec: &DidSpec, moderator: &str) -> Result<TripleDidFit> {
    let design = build_triple_did_design(panel, spec, moderator)?;
    let fit = fit_ols(&design.design)?;
    let beta3 = fit.coef(&design.triple_term)?;
    Ok(TripleDidFit {
        fit,
        treatment_term: design.treatment_term,
        moderator_term: design.moderator_term,
        triple_term: design.triple_term,
        beta3,
        dropped_rows: design.dropped_rows,
        audit: design.audit,
    })
}

#[derive(Debug, Clone)]
pub struct TripleDidDesign {
    pub design: DesignMatrix,
    pub treatment_term: String,
    pub moderator_term: String,
    pub triple_term: String,
    pub dropped_rows: usize,
    pub audit: AuditLog,
}

/// Assemble the triple-DID design matrix without fitting it.
pub fn build_triple_did_design(
    panel: &PanelDataset,
    spec: &DidSpec,
    moderator: &str,
) -> Result<TripleDidDesign> {
    spec.validate()?;
    require_standardized(panel, &spec.treatment, "treatment")?;
    require_standardized(panel, moderator, "moderator")?;
    for c in &spec.confounders {
        require_standardized(panel, c, "confounder")?;
    }
    let mut required: Vec<&str> = vec![&spec.outcome, &spec.treatment, moderator];
    required.extend(spec.confounders.iter().map(String::as_str));
    required.extend(spec.controls.iter().map(String::as_str));
    let rows = select_rows(panel, spec.window, &required)?;
    let post: Vec<bool> = rows.rows.iter().map(|o| spec.is_post(o.year)).collect();

    let d_by_entity = require_time_invariant(&rows, panel, &spec.treatment)?;
    let m_by_entity = require_time_invariant(&rows, panel, moderator)?;

    let treatment_term = interaction_name(&[&spec.treatment, "post"]);
    let moderator_term = interaction_name(&[moderator, "post"]);
    let triple_term = interaction_name(&[&spec.treatment, moderator, "post"]);

    let mut names = vec![treatment_term.clone(), moderator_term.clone(), triple_term.clone()];
    let post_f: Vec<f64> = post.iter().map(|&p| f64::from(p as u8)).collect();
    let mut cols: Vec<Vec<f64>> = vec![
        rows.entity_codes.iter().zip(&post_f).map(|(&e, p)| d_by_entity[e] * p).collect(),
        rows.entity_codes.iter().zip(&post_f).map(|(&e, p)| m_by_entity[e] * p).collect(),
        rows.entity_codes
            .iter()
            .zip(&post_f)
            .map(|(&e, p)| d_by_entity[e] * m_by_entity[e] * p)
            .collect(),
    ];
    for c in &spec.confounders {
        let vals = require_time_invariant(&rows, panel, c)?;
        names.push(interaction_name(&[c, "post"]));
        cols.push(rows.entity_codes.iter().zip(&post_f).map(|(&e, p)| vals[e] * p).collect());
    }
    for ctrl in &spec.controls {
        names.push(ctrl.clone());
        cols.push(column_of(&rows, panel, ctrl)?);
    }

    let y = column_of(&rows, panel, &spec.outcome)?;
    let design = DesignMatrix::from_columns(
        names,
        cols,
        y,
        spec.outcome.clone(),
        rows.entity_codes.clone(),
        rows.time_codes.clone(),
        rows.entity_codes.clone(),
        FeDims::TWO_WAY,
        CovarianceSpec::ClusterCr1,
    )?;
    Ok(TripleDidDesign {
        design,
        treatment_term,
        moderator_term,
        triple_term,
        dropped_rows: rows.dropped,
        audit: rows.audit,
    })
}

/// Two-way fixed-effects interaction specification (de-skilling / crowding
/// mechanism models over the full panel window).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    pub outcome: String,
    /// Standardized time-varying exposure.
    pub exposure: String,
    /// Standardized moderator (education level or job-market heat).
    pub moderator: String,
    pub controls: Vec<String>,
    /// Defaults to the panel's full year range.
    pub window: Option<(i32, i32)>,
}

#[derive(Debug, Clone)]
pub struct InteractionFit {
    pub fit: FitResult,
    pub exposure_term: String,
    pub moderator_term: String,
    pub interaction_term: String,
    pub dropped_rows: usize,
    pub audit: AuditLog,
}

/// Design for the interaction FE model; exposed for the placebo shuffler.
#[derive(Debug, Clone)]
pub struct InteractionDesign {
    pub design: DesignMatrix,
    pub exposure_term: String,
    pub moderator_term: String,
    pub interaction_term: String,
    /// Raw exposure value per design row (for cross-observation shuffles).
    pub exposure_values: Vec<f64>,
    /// Raw moderator value per design row.
    pub moderator_values: Vec<f64>,
    pub dropped_rows: usize,
    pub audit: AuditLog,
}

pub fn build_interaction_design(
    panel: &PanelDataset,
    spec: &InteractionSpec,
) -> Result<InteractionDesign> {
    require_standardized(panel, &spec.exposure, "exposure")?;
    require_standardized(panel, &spec.moderator, "moderator")?;
    let window = match spec.window {
        Some(w) => w,
        None => {
            let years = panel.years();
            match (years.first(), years.last()) {
                (Some(lo), Some(hi)) => (*lo, *hi),
                _ => return Err(EngineError::EmptyInput("panel has no observations")),
            }
        }
    };
    let mut required: Vec<&str> = vec![&spec.outcome, &spec.exposure, &spec.moderator];
    required.extend(spec.controls.iter().map(String::as_str));
    let rows = select_rows(panel, window, &required)?;

    let g = column_of(&rows, panel, &spec.exposure)?;
    let m = column_of(&rows, panel, &spec.moderator)?;
    if constant(&m) {
        return Err(EngineError::RankDeficient(vec![spec.moderator.clone()]));
    }
    let gm: Vec<f64> = g.iter().zip(&m).map(|(a, b)| a * b).collect();

    let exposure_term = spec.exposure.clone();
    let moderator_term = spec.moderator.clone();
    let interaction_term = interaction_name(&[&spec.exposure, &spec.moderator]);
    let mut names = vec![exposure_term.clone(), moderator_term.clone(), interaction_term.clone()];
    let mut cols = vec![g.clone(), m.clone(), gm];
    for ctrl in &spec.controls {
        names.push(ctrl.clone());
        cols.push(column_of(&rows, panel, ctrl)?);
    }
    let y = column_of(&rows, panel, &spec.outcome)?;
    let design = DesignMatrix::from_columns(
        names,
        cols,
        y,
        spec.outcome.clone(),
        rows.entity_codes.clone(),
        rows.time_codes.clone(),
        rows.entity_codes.clone(),
        FeDims::TWO_WAY,
        CovarianceSpec::ClusterCr1,
    )?;
    Ok(InteractionDesign {
        design,
        exposure_term,
        moderator_term,
        interaction_term,
        exposure_values: g,
        moderator_values: m,
        dropped_rows: rows.dropped,
        audit: rows.audit,
    })
}

fn constant(vals: &[f64]) -> bool {
    vals.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12)
}

/// Fit the de-skilling / crowding interaction model.
pub fn fit_interaction_fe(panel: &PanelDataset, spec: &InteractionSpec) -> Result<InteractionFit> {
    let built = build_interaction_design(panel, spec)?;
    let fit = fit_ols(&built.design)?;
    Ok(InteractionFit {
        fit,
        exposure_term: built.exposure_term,
        moderator_term: built.moderator_term,
        interaction_term: built.interaction_term,
        dropped_rows: built.dropped_rows,
        audit: built.audit,
    })
}

/// Marginal effect of exposure along a moderator grid:
/// `beta1 + beta3 m` with delta-method SE
/// `sqrt(V11 + m^2 V33 + 2 m V13)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalProfile {
    pub points: Vec<MarginalPoint>,
    /// `m* = -beta1/beta3`, absent when beta3 = 0.
    pub zero_crossing: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MarginalPoint {
    pub moderator: f64,
    pub effect: f64,
    pub std_error: f64,
}

/// Descriptive tercile grouping of a pre-determined variable (low / medium /
/// high exposure, as used for trajectory plots). Estimation always uses the
/// continuous standardized treatment; this split feeds descriptive outputs
/// only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TercileGroup {
    Low,
    Medium,
    High,
}

impl TercileGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            TercileGroup::Low => "low",
            TercileGroup::Medium => "medium",
            TercileGroup::High => "high",
        }
    }
}

/// Rank-based tercile split over entity-level values of a pre-determined
/// variable (ties broken by entity id for determinism).
pub fn tercile_split(panel: &PanelDataset, var: &str) -> Result<BTreeMap<String, TercileGroup>> {
    let id = panel.var_id(var)?;
    let mut by_entity: BTreeMap<String, f64> = BTreeMap::new();
    for obs in panel.observations() {
        if let Some(v) = obs.values[id] {
            by_entity.entry(obs.entity.clone()).or_insert(v);
        }
    }
    if by_entity.len() < 3 {
        return Err(EngineError::InvalidSpec(format!(
            "tercile split needs at least 3 entities with `{var}`, found {}",
            by_entity.len()
        )));
    }
    let mut ranked: Vec<(String, f64)> = by_entity.into_iter().collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let n = ranked.len();
    let mut out = BTreeMap::new();
    for (rank, (entity, _)) in ranked.into_iter().enumerate() {
        let group = if rank * 3 < n {
            TercileGroup::Low
        } else if rank * 3 < 2 * n {
            TercileGroup::Medium
        } else {
            TercileGroup::High
        };
        out.insert(entity, group);
    }
    Ok(out)
}

/// Group-mean outcome by year for each tercile (trajectory-plot table).
pub fn group_trajectories(
    panel: &PanelDataset,
    outcome: &str,
    groups: &BTreeMap<String, TercileGroup>,
) -> Result<Vec<(i32, TercileGroup, f64, usize)>> {
    let id = panel.var_id(outcome)?;
    let mut acc: BTreeMap<(i32, TercileGroup), (f64, usize)> = BTreeMap::new();
    for obs in panel.observations() {
        let (Some(group), Some(v)) = (groups.get(&obs.entity), obs.values[id]) else {
            continue;
        };
        let e = acc.entry((obs.year, *group)).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|((year, group), (sum, n))| (year, group, sum / n as f64, n))
        .collect())
}

pub fn marginal_effect_profile(
    fit: &FitResult,
    exposure_term: &str,
    interaction_term: &str,
    grid: &[f64],
) -> Result<MarginalProfile> {
    let b1 = fit.coef(exposure_term)?;
    let b3 = fit.coef(interaction_term)?;
    let v11 = fit.vcov(exposure_term, exposure_term)?;
    let v33 = fit.vcov(interaction_term, interaction_term)?;
    let v13 = fit.vcov(exposure_term, interaction_term)?;
    let points = grid
        .iter()
        .map(|&m| MarginalPoint {
            moderator: m,
            effect: b1 + b3 * m,
            std_error: (v11 + m * m * v33 + 2.0 * m * v13).max(0.0).sqrt(),
        })
        .collect();
    let zero_crossing = if b3 != 0.0 { Some(-b1 / b3) } else { None };
    Ok(MarginalProfile { points, zero_crossing })
}
