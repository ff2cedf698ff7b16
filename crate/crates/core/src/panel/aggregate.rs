//! Neighborhood-year aggregation of prepared postings.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::audit::{AuditCode, AuditLog};
use super::postings::{prepare_wage_with, PostingRecord, WageOutcome, WagePolicy};
use super::PanelDataset;
use crate::Result;

pub const VAR_POSTING_COUNT: &str = "posting_count";
pub const VAR_JOB_SHARE: &str = "job_share";
pub const VAR_JOB_INDEX: &str = "job_index";
pub const VAR_AVG_WAGE: &str = "avg_wage";
pub const VAR_AVG_EDUCATION: &str = "avg_education_years";

/// Scope of the job-index min-max normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexScope {
    #[default]
    PerYear,
    Pooled,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AggregateOptions {
    pub wage_policy: WagePolicy,
    pub index_scope: IndexScope,
}

/// Min-max normalization of `ln(1+count)`. A degenerate range maps every
/// element to 0.
pub fn normalized_log_index(counts: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = counts.iter().map(|c| (1.0 + c).ln()).collect();
    let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        logs.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; logs.len()]
    }
}

#[derive(Default)]
struct Cell {
    count: u64,
    /// Accepted monthly wages; summed in sorted order so the mean is
    /// invariant to input permutation.
    wages: Vec<f64>,
    edu_sum: f64,
}

/// Collapse deduped postings into a neighborhood-year panel.
///
/// Emits one row per (neighborhood, year) over the full grid of neighborhoods
/// and years observed anywhere in the input; cells with no postings carry
/// count 0 and absent wage/education. `job_share` is each neighborhood's share
/// of the year's postings; `job_index` is [`normalized_log_index`] of the
/// counts within the index scope.
pub fn aggregate_neighborhood_year(
    postings: &[PostingRecord],
    opts: AggregateOptions,
) -> Result<(PanelDataset, AuditLog)> {
    let mut audit = AuditLog::new();
    let mut cells: BTreeMap<(String, i32), Cell> = BTreeMap::new();
    let mut hoods: BTreeSet<String> = BTreeSet::new();
    let mut years: BTreeSet<i32> = BTreeSet::new();

    for p in postings {
        hoods.insert(p.neighborhood_id.clone());
        years.insert(p.year());
        let cell = cells.entry((p.neighborhood_id.clone(), p.year())).or_default();
        cell.count += 1;
        cell.edu_sum += f64::from(p.education.years());
        match prepare_wage_with(p.compensation_annual, opts.wage_policy) {
            WageOutcome::Accepted(m) => cell.wages.push(m),
            WageOutcome::BelowMin(m) => {
                audit.record(AuditCode::WageBelowMin, &p.posting_id, format!("monthly {m:.2}"));
            }
            WageOutcome::AboveMax(m) => {
                audit.record(AuditCode::WageAboveMax, &p.posting_id, format!("monthly {m:.2}"));
            }
            WageOutcome::Missing => {
                audit.record(AuditCode::WageMissing, &p.posting_id, "no usable compensation");
            }
        }
    }

    let hoods: Vec<String> = hoods.into_iter().collect();
    let years: Vec<i32> = years.into_iter().collect();
    let count_of = |hood: &str, year: i32| -> u64 {
        cells.get(&(hood.to_string(), year)).map_or(0, |c| c.count)
    };

    // Per-year posting totals for job_share.
    let mut year_totals: BTreeMap<i32, u64> = BTreeMap::new();
    for ((_, y), c) in &cells {
        *year_totals.entry(*y).or_insert(0) += c.count;
    }

    // Index values over the full grid, grouped by scope.
    let mut index: BTreeMap<(String, i32), f64> = BTreeMap::new();
    match opts.index_scope {
        IndexScope::PerYear => {
            for &year in &years {
                let counts: Vec<f64> =
                    hoods.iter().map(|h| count_of(h, year) as f64).collect();
                for (h, v) in hoods.iter().zip(normalized_log_index(&counts)) {
                    index.insert((h.clone(), year), v);
                }
            }
        }
        IndexScope::Pooled => {
            let mut keys = Vec::new();
            let mut counts = Vec::new();
            for h in &hoods {
                for &year in &years {
                    keys.push((h.clone(), year));
                    counts.push(count_of(h, year) as f64);
                }
            }
            for (k, v) in keys.into_iter().zip(normalized_log_index(&counts)) {
                index.insert(k, v);
            }
        }
    }

    let mut panel = PanelDataset::new(vec![
        VAR_POSTING_COUNT,
        VAR_JOB_SHARE,
        VAR_JOB_INDEX,
        VAR_AVG_WAGE,
        VAR_AVG_EDUCATION,
    ])?;
    for hood in &hoods {
        for &year in &years {
            let count = count_of(hood, year);
            let total = *year_totals.get(&year).unwrap_or(&0);
            let share = if total > 0 { Some(count as f64 / total as f64) } else { None };
            let (wage, edu) = match cells.get(&(hood.clone(), year)) {
                Some(c) => {
                    let mut ws = c.wages.clone();
                    ws.sort_by(f64::total_cmp);
                    let wage = (!ws.is_empty())
                        .then(|| ws.iter().sum::<f64>() / ws.len() as f64);
                    (wage, (c.count > 0).then(|| c.edu_sum / c.count as f64))
                }
                None => (None, None),
            };
            panel.push(
                hood.clone(),
                year,
                vec![
                    Some(count as f64),
                    share,
                    Some(index[&(hood.clone(), year)]),
                    wage,
                    edu,
                ],
            )?;
        }
    }
    Ok((panel, audit))
}
