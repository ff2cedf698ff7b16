//! Audit trail for rejected or excluded records.
//!
//! Nothing is dropped silently: every exclusion lands here with a reason code,
//! and the CLI serializes the log as line-delimited records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Reason codes for record-level exclusions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditCode {
    MalformedDate,
    UnknownEducation,
    UnknownIndustry,
    NonpositiveCompensation,
    WageBelowMin,
    WageAboveMax,
    WageMissing,
    DuplicatePosting,
    UnscoredOccupation,
    NoScoredPostings,
    MissingExposureComponent,
    RowDroppedMissing,
    ZeroBasePostings,
    PlaceboRefitFailure,
}

impl AuditCode {
    pub fn as_str(self) -> &'static str {
        match self {
            AuditCode::MalformedDate => "malformed_date",
            AuditCode::UnknownEducation => "unknown_education",
            AuditCode::UnknownIndustry => "unknown_industry",
            AuditCode::NonpositiveCompensation => "nonpositive_compensation",
            AuditCode::WageBelowMin => "wage_below_min",
            AuditCode::WageAboveMax => "wage_above_max",
            AuditCode::WageMissing => "wage_missing",
            AuditCode::DuplicatePosting => "duplicate_posting",
            AuditCode::UnscoredOccupation => "unscored_occupation",
            AuditCode::NoScoredPostings => "no_scored_postings",
            AuditCode::MissingExposureComponent => "missing_exposure_component",
            AuditCode::RowDroppedMissing => "row_dropped_missing",
            AuditCode::ZeroBasePostings => "zero_base_postings",
            AuditCode::PlaceboRefitFailure => "placebo_refit_failure",
        }
    }
}

/// One audited exclusion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub code: AuditCode,
    /// Identifier of the offending record (posting id, entity id, ...).
    pub record_id: String,
    pub detail: String,
}

/// Collected audit entries plus per-code tallies.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AuditLog {
    pub entries: Vec<AuditEntry>,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, code: AuditCode, record_id: impl Into<String>, detail: impl Into<String>) {
        self.entries.push(AuditEntry {
            code,
            record_id: record_id.into(),
            detail: detail.into(),
        });
    }

    pub fn tally(&self, code: AuditCode) -> usize {
        self.entries.iter().filter(|e| e.code == code).count()
    }

    /// Per-code counts, ordered by code for deterministic reports.
    pub fn tallies(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.code.as_str().to_string()).or_insert(0) += 1;
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn merge(&mut self, other: AuditLog) {
        self.entries.extend(other.entries);
    }
}
