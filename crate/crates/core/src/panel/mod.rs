//! Long-format entity-year panel with named numeric variables.
//!
//! Observations are keyed by `(entity_id, year)`; every observation carries the
//! same variable set with missing values stored as explicit `None`, never as
//! zeros or NaN.

mod aggregate;
mod audit;
mod postings;

pub use aggregate::{
    aggregate_neighborhood_year, normalized_log_index, AggregateOptions, IndexScope,
    VAR_AVG_EDUCATION, VAR_AVG_WAGE, VAR_JOB_INDEX, VAR_JOB_SHARE, VAR_POSTING_COUNT,
};
pub use audit::{AuditCode, AuditEntry, AuditLog};
pub use postings::{
    dedupe_postings, map_education, prepare_wage, prepare_wage_with, EducationLevel,
    PostingRecord, WageOutcome, WagePolicy, INDUSTRY_CODES, WAGE_MAX_MONTHLY, WAGE_MIN_MONTHLY,
};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{EngineError, Result};

/// Per-variable metadata carried alongside the data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub units: Option<String>,
    /// Set by [`PanelDataset::standardize`]; consumers that require z-scored
    /// inputs check this flag.
    pub standardized: bool,
}

/// One entity-year row. Values align with the dataset's variable registry.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub entity: String,
    pub year: i32,
    pub values: Vec<Option<f64>>,
}

/// Scope over which a variable is z-scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StandardizeScope {
    /// Mean/SD over every present value in the panel.
    Pooled,
    /// Mean/SD within each year separately.
    PerYear,
    /// Mean/SD from the given year's cross-section; the standardized value is
    /// broadcast to every year of the entity (time-invariant output).
    AtYear(i32),
    /// For a variable already constant within each entity (a pre-determined
    /// measure): z-score the entity-level values and broadcast.
    CrossEntity,
}

impl StandardizeScope {
    fn label(self) -> String {
        match self {
            StandardizeScope::Pooled => "pooled".into(),
            StandardizeScope::PerYear => "per-year".into(),
            StandardizeScope::AtYear(y) => format!("at-year {y}"),
            StandardizeScope::CrossEntity => "cross-entity".into(),
        }
    }
}

/// Long-format panel of entity-year observations.
#[derive(Debug, Clone)]
pub struct PanelDataset {
    variables: Vec<String>,
    var_index: HashMap<String, usize>,
    meta: Vec<VariableMeta>,
    observations: Vec<Observation>,
    row_index: HashMap<(String, i32), usize>,
    declared_window: Option<(i32, i32)>,
}

impl PanelDataset {
    /// Create an empty panel with the given variable registry.
    pub fn new<S: Into<String>>(variables: Vec<S>) -> Result<Self> {
        let variables: Vec<String> = variables.into_iter().map(Into::into).collect();
        let mut var_index = HashMap::new();
        for (i, v) in variables.iter().enumerate() {
            if var_index.insert(v.clone(), i).is_some() {
                return Err(EngineError::InvalidSpec(format!("duplicate variable `{v}`")));
            }
        }
        let meta = vec![VariableMeta::default(); variables.len()];
        Ok(Self {
            variables,
            var_index,
            meta,
            observations: Vec::new(),
            row_index: HashMap::new(),
            declared_window: None,
        })
    }

    /// Declare the admissible year window; later pushes outside it are rejected.
    pub fn with_window(mut self, lo: i32, hi: i32) -> Self {
        self.declared_window = Some((lo, hi));
        self
    }

    pub fn declared_window(&self) -> Option<(i32, i32)> {
        self.declared_window
    }

    /// Append one observation. `(entity, year)` must be unique and values must
    /// be finite where present.
    pub fn push(&mut self, entity: impl Into<String>, year: i32, values: Vec<Option<f64>>) -> Result<()> {
        let entity = entity.into();
        if values.len() != self.variables.len() {
            return Err(EngineError::InvalidSpec(format!(
                "observation carries {} values, registry has {}",
                values.len(),
                self.variables.len()
            )));
        }
        if let Some((lo, hi)) = self.declared_window {
            if year < lo || year > hi {
                return Err(EngineError::YearOutsideWindow { year, lo, hi });
            }
        }
        for (j, v) in values.iter().enumerate() {
            if let Some(x) = v {
                if !x.is_finite() {
                    return Err(EngineError::InvalidSpec(format!(
                        "non-finite value for `{}` at ({entity}, {year}); missing values must be absent, not NaN",
                        self.variables[j]
                    )));
                }
            }
        }
        let key = (entity.clone(), year);
        if self.row_index.contains_key(&key) {
            return Err(EngineError::DuplicateObservation { entity, year });
        }
        self.row_index.insert(key, self.observations.len());
        self.observations.push(Observation { entity, year, values });
        Ok(())
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn var_id(&self, name: &str) -> Result<usize> {
        self.var_index
            .get(name)
            .copied()
            .ok_or_else(|| EngineError::UnknownVariable(name.to_string()))
    }

    pub fn meta(&self, name: &str) -> Result<&VariableMeta> {
        Ok(&self.meta[self.var_id(name)?])
    }

    pub fn set_meta(&mut self, name: &str, meta: VariableMeta) -> Result<()> {
        let id = self.var_id(name)?;
        self.meta[id] = meta;
        Ok(())
    }

    /// Register a new variable, filled with `None` on existing rows.
    pub fn add_variable(&mut self, name: impl Into<String>, meta: VariableMeta) -> Result<usize> {
        let name = name.into();
        if self.var_index.contains_key(&name) {
            return Err(EngineError::InvalidSpec(format!("duplicate variable `{name}`")));
        }
        let id = self.variables.len();
        self.var_index.insert(name.clone(), id);
        self.variables.push(name);
        self.meta.push(meta);
        for obs in &mut self.observations {
            obs.values.push(None);
        }
        Ok(id)
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn n_obs(&self) -> usize {
        self.observations.len()
    }

    pub fn value(&self, entity: &str, year: i32, var: &str) -> Result<Option<f64>> {
        let id = self.var_id(var)?;
        Ok(self
            .row_index
            .get(&(entity.to_string(), year))
            .and_then(|&r| self.observations[r].values[id]))
    }

    pub fn set_value(&mut self, entity: &str, year: i32, var: &str, value: Option<f64>) -> Result<()> {
        let id = self.var_id(var)?;
        let row = self
            .row_index
            .get(&(entity.to_string(), year))
            .copied()
            .ok_or_else(|| EngineError::InvalidSpec(format!("no observation ({entity}, {year})")))?;
        self.observations[row].values[id] = value;
        Ok(())
    }

    /// Distinct entities in first-appearance order.
    pub fn entities(&self) -> Vec<String> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for obs in &self.observations {
            if seen.insert(obs.entity.clone(), ()).is_none() {
                out.push(obs.entity.clone());
            }
        }
        out
    }

    /// Distinct years, ascending.
    pub fn years(&self) -> Vec<i32> {
        let mut ys: Vec<i32> = self.observations.iter().map(|o| o.year).collect();
        ys.sort_unstable();
        ys.dedup();
        ys
    }

    /// Column of values in row order.
    pub fn column(&self, var: &str) -> Result<Vec<Option<f64>>> {
        let id = self.var_id(var)?;
        Ok(self.observations.iter().map(|o| o.values[id]).collect())
    }

    /// Sort rows by `(entity, year)` for deterministic serialization.
    pub fn sort_rows(&mut self) {
        self.observations
            .sort_by(|a, b| a.entity.cmp(&b.entity).then(a.year.cmp(&b.year)));
        self.row_index = self
            .observations
            .iter()
            .enumerate()
            .map(|(i, o)| ((o.entity.clone(), o.year), i))
            .collect();
    }

    /// Z-score `var` within `scope` using the sample SD (n-1 denominator).
    ///
    /// Writes into `out_name` when given, otherwise in place. Returns the name
    /// of the variable that now holds the standardized values and flags it
    /// `standardized` in the metadata.
    pub fn standardize(
        &mut self,
        var: &str,
        scope: StandardizeScope,
        out_name: Option<&str>,
    ) -> Result<String> {
        let src = self.var_id(var)?;
        let out_name = out_name.unwrap_or(var).to_string();
        let dst = match self.var_index.get(&out_name) {
            Some(&id) => id,
            None => self.add_variable(out_name.clone(), VariableMeta::default())?,
        };

        let nrows = self.observations.len();
        let mut out: Vec<Option<f64>> = vec![None; nrows];
        match scope {
            StandardizeScope::Pooled => {
                let rows: Vec<usize> = (0..nrows).collect();
                self.zscore_rows(var, src, &rows, &mut out, scope)?;
            }
            StandardizeScope::PerYear => {
                let mut by_year: HashMap<i32, Vec<usize>> = HashMap::new();
                for (i, o) in self.observations.iter().enumerate() {
                    by_year.entry(o.year).or_default().push(i);
                }
                for rows in by_year.values() {
                    self.zscore_rows(var, src, rows, &mut out, scope)?;
                }
            }
            StandardizeScope::AtYear(anchor) => {
                let mut anchor_vals: Vec<f64> = Vec::new();
                let mut per_entity: HashMap<&str, f64> = HashMap::new();
                for o in &self.observations {
                    if o.year == anchor {
                        if let Some(v) = o.values[src] {
                            anchor_vals.push(v);
                            per_entity.insert(o.entity.as_str(), v);
                        }
                    }
                }
                let (mean, sd) = moments(&anchor_vals).ok_or(EngineError::ZeroVariance {
                    name: var.to_string(),
                    scope: scope.label(),
                })?;
                let z: HashMap<String, f64> = per_entity
                    .into_iter()
                    .map(|(e, v)| (e.to_string(), (v - mean) / sd))
                    .collect();
                for (i, o) in self.observations.iter().enumerate() {
                    out[i] = z.get(o.entity.as_str()).copied();
                }
            }
            StandardizeScope::CrossEntity => {
                // BTreeMap keeps the summation order deterministic across runs
                let mut per_entity: std::collections::BTreeMap<&str, f64> =
                    std::collections::BTreeMap::new();
                for o in &self.observations {
                    if let Some(v) = o.values[src] {
                        match per_entity.get(o.entity.as_str()) {
                            None => {
                                per_entity.insert(o.entity.as_str(), v);
                            }
                            Some(prev) => {
                                let scale = prev.abs().max(v.abs()).max(1.0);
                                if (prev - v).abs() > 1e-12 * scale {
                                    return Err(EngineError::InvalidSpec(format!(
                                        "`{var}` varies within entity `{}`; cross-entity standardization needs a pre-determined variable",
                                        o.entity
                                    )));
                                }
                            }
                        }
                    }
                }
                let vals: Vec<f64> = per_entity.values().copied().collect();
                let (mean, sd) = moments(&vals).ok_or(EngineError::ZeroVariance {
                    name: var.to_string(),
                    scope: scope.label(),
                })?;
                let z: HashMap<String, f64> = per_entity
                    .into_iter()
                    .map(|(e, v)| (e.to_string(), (v - mean) / sd))
                    .collect();
                for (i, o) in self.observations.iter().enumerate() {
                    out[i] = z.get(o.entity.as_str()).copied();
                }
            }
        }

        for (i, o) in self.observations.iter_mut().enumerate() {
            o.values[dst] = out[i];
        }
        self.meta[dst].standardized = true;
        Ok(out_name)
    }

    fn zscore_rows(
        &self,
        var: &str,
        src: usize,
        rows: &[usize],
        out: &mut [Option<f64>],
        scope: StandardizeScope,
    ) -> Result<()> {
        let vals: Vec<f64> = rows
            .iter()
            .filter_map(|&i| self.observations[i].values[src])
            .collect();
        let (mean, sd) = moments(&vals).ok_or(EngineError::ZeroVariance {
            name: var.to_string(),
            scope: scope.label(),
        })?;
        for &i in rows {
            out[i] = self.observations[i].values[src].map(|v| (v - mean) / sd);
        }
        Ok(())
    }
}

/// Mean and sample SD; `None` when fewer than two values or zero variance.
fn moments(vals: &[f64]) -> Option<(f64, f64)> {
    if vals.len() < 2 {
        return None;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let ss: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    if sd <= 0.0 || !sd.is_finite() {
        return None;
    }
    Some((mean, sd))
}
