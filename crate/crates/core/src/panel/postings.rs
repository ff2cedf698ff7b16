//! Posting-level preparation rules: deduplication, wage screening, and the
//! education-requirement mapping.

use std::collections::HashMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::{EngineError, Result};

/// The 18 single-letter primary-industry codes accepted on postings (A..R;
/// includes I = information technology, H = accommodation/catering,
/// G = transportation, K = real estate, E = construction).
pub const INDUSTRY_CODES: [char; 18] = [
    'A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'J', 'K', 'L', 'M', 'N', 'O', 'P', 'Q', 'R',
];

/// Monthly-wage acceptance bounds in RMB/month. Values strictly below the
/// minimum or strictly above the maximum are excluded from wage averages.
pub const WAGE_MIN_MONTHLY: f64 = 1_000.0;
pub const WAGE_MAX_MONTHLY: f64 = 280_000.0;

/// A cleaned recruitment posting.
#[derive(Debug, Clone, PartialEq)]
pub struct PostingRecord {
    pub posting_id: String,
    pub company_id: String,
    pub neighborhood_id: String,
    pub posting_date: NaiveDate,
    pub occupation_code: String,
    pub industry_code: char,
    /// Total annual compensation in RMB (salary plus 13th-month pay and
    /// bonuses), absent when the posting lists none.
    pub compensation_annual: Option<f64>,
    pub education: EducationLevel,
}

impl PostingRecord {
    /// Calendar month of the posting as `YYYY-MM`.
    pub fn month_key(&self) -> String {
        format!("{:04}-{:02}", self.posting_date.year(), self.posting_date.month())
    }

    pub fn year(&self) -> i32 {
        self.posting_date.year()
    }

    pub fn industry_valid(&self) -> bool {
        INDUSTRY_CODES.contains(&self.industry_code)
    }
}

/// Education-requirement categories and their years-of-schooling mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EducationLevel {
    Unrestricted,
    JuniorMiddleOrBelow,
    HighSchool,
    Associate,
    Bachelor,
    Master,
    Doctorate,
}

impl EducationLevel {
    pub const ALL: [EducationLevel; 7] = [
        EducationLevel::Unrestricted,
        EducationLevel::JuniorMiddleOrBelow,
        EducationLevel::HighSchool,
        EducationLevel::Associate,
        EducationLevel::Bachelor,
        EducationLevel::Master,
        EducationLevel::Doctorate,
    ];

    /// Years of schooling implied by the requirement.
    pub fn years(self) -> u8 {
        match self {
            EducationLevel::Unrestricted => 0,
            EducationLevel::JuniorMiddleOrBelow => 9,
            EducationLevel::HighSchool => 12,
            EducationLevel::Associate => 15,
            EducationLevel::Bachelor => 16,
            EducationLevel::Master => 19,
            EducationLevel::Doctorate => 23,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            EducationLevel::Unrestricted => "unrestricted",
            EducationLevel::JuniorMiddleOrBelow => "junior_middle_or_below",
            EducationLevel::HighSchool => "high_school",
            EducationLevel::Associate => "associate",
            EducationLevel::Bachelor => "bachelor",
            EducationLevel::Master => "master",
            EducationLevel::Doctorate => "doctorate",
        }
    }

    /// Parse a category token. Unknown categories are an explicit error;
    /// nothing is imputed.
    pub fn parse(token: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|lvl| lvl.token() == token)
            .ok_or_else(|| EngineError::UnknownEducation(token.to_string()))
    }
}

/// Map an education-requirement token to years of schooling.
pub fn map_education(category: &str) -> Result<u8> {
    Ok(EducationLevel::parse(category)?.years())
}

/// What became of a posting's compensation after screening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WageOutcome {
    /// Monthly wage in RMB/month, inside the acceptance bounds.
    Accepted(f64),
    /// Monthly equivalent fell strictly below [`WAGE_MIN_MONTHLY`].
    BelowMin(f64),
    /// Monthly equivalent rose strictly above [`WAGE_MAX_MONTHLY`].
    AboveMax(f64),
    /// No usable compensation on the posting; the record still counts toward
    /// posting tallies.
    Missing,
}

/// Out-of-bounds handling. Exclusion is the default; winsorizing clamps to the
/// bounds instead and is exposed as a config escape hatch only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WagePolicy {
    #[default]
    Exclude,
    Winsorize,
}

/// Convert annual compensation to a monthly wage and screen it against the
/// fixed bounds (default [`WagePolicy::Exclude`]).
pub fn prepare_wage(compensation_annual: Option<f64>) -> WageOutcome {
    prepare_wage_with(compensation_annual, WagePolicy::Exclude)
}

pub fn prepare_wage_with(compensation_annual: Option<f64>, policy: WagePolicy) -> WageOutcome {
    let annual = match compensation_annual {
        Some(a) if a > 0.0 && a.is_finite() => a,
        _ => return WageOutcome::Missing,
    };
    let monthly = annual / 12.0;
    if monthly < WAGE_MIN_MONTHLY {
        match policy {
            WagePolicy::Exclude => WageOutcome::BelowMin(monthly),
            WagePolicy::Winsorize => WageOutcome::Accepted(WAGE_MIN_MONTHLY),
        }
    } else if monthly > WAGE_MAX_MONTHLY {
        match policy {
            WagePolicy::Exclude => WageOutcome::AboveMax(monthly),
            WagePolicy::Winsorize => WageOutcome::Accepted(WAGE_MAX_MONTHLY),
        }
    } else {
        WageOutcome::Accepted(monthly)
    }
}

/// Keep the first unique posting per company per month.
///
/// The content key is `(company_id, month, occupation_code, neighborhood_id)`;
/// within a key the earliest `posting_date` survives (input order breaks
/// ties). Both outputs preserve input order: survivors first, then the
/// removed duplicates for the audit trail.
pub fn dedupe_postings(postings: &[PostingRecord]) -> (Vec<PostingRecord>, Vec<PostingRecord>) {
    type Key = (String, String, String, String);
    let mut best: HashMap<Key, usize> = HashMap::new();
    for (i, p) in postings.iter().enumerate() {
        let key = (
            p.company_id.clone(),
            p.month_key(),
            p.occupation_code.clone(),
            p.neighborhood_id.clone(),
        );
        match best.get(&key) {
            Some(&j) if postings[j].posting_date <= p.posting_date => {}
            _ => {
                best.insert(key, i);
            }
        }
    }
    let keep: std::collections::HashSet<usize> = best.into_values().collect();
    let mut kept = Vec::with_capacity(keep.len());
    let mut removed = Vec::with_capacity(postings.len() - keep.len());
    for (i, p) in postings.iter().enumerate() {
        if keep.contains(&i) {
            kept.push(p.clone());
        } else {
            removed.push(p.clone());
        }
    }
    (kept, removed)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn posting(
        id: &str,
        company: &str,
        hood: &str,
        date: &str,
        occ: &str,
    ) -> PostingRecord {
        PostingRecord {
            posting_id: id.into(),
            company_id: company.into(),
            neighborhood_id: hood.into(),
            posting_date: NaiveDate::parse_from_str(date, "%Y-%m-%d").unwrap(),
            occupation_code: occ.into(),
            industry_code: 'I',
            compensation_annual: None,
            education: EducationLevel::Bachelor,
        }
    }

    #[test]
    fn education_table_exact() {
        assert_eq!(map_education("unrestricted").unwrap(), 0);
        assert_eq!(map_education("junior_middle_or_below").unwrap(), 9);
        assert_eq!(map_education("high_school").unwrap(), 12);
        assert_eq!(map_education("associate").unwrap(), 15);
        assert_eq!(map_education("bachelor").unwrap(), 16);
        assert_eq!(map_education("master").unwrap(), 19);
        assert_eq!(map_education("doctorate").unwrap(), 23);
    }

    #[test]
    fn education_unknown_is_error() {
        assert!(matches!(map_education("phd"), Err(EngineError::UnknownEducation(_))));
    }

    #[test]
    fn education_total_and_injective() {
        let mut years: Vec<u8> = EducationLevel::ALL.iter().map(|l| l.years()).collect();
        years.sort_unstable();
        assert_eq!(years, vec![0, 9, 12, 15, 16, 19, 23]);
    }

    #[test]
    fn wage_basic_arithmetic() {
        assert_eq!(prepare_wage(Some(120_000.0)), WageOutcome::Accepted(10_000.0));
    }

    #[test]
    fn wage_bounds_are_strict() {
        // monthly-equivalent 500 rejected low, 300,000 rejected high
        assert_eq!(prepare_wage(Some(6_000.0)), WageOutcome::BelowMin(500.0));
        assert_eq!(prepare_wage(Some(3_600_000.0)), WageOutcome::AboveMax(300_000.0));
        // the bounds themselves are accepted
        assert_eq!(prepare_wage(Some(12_000.0)), WageOutcome::Accepted(1_000.0));
        assert_eq!(prepare_wage(Some(3_360_000.0)), WageOutcome::Accepted(280_000.0));
        assert!(matches!(prepare_wage(Some(11_999.99)), WageOutcome::BelowMin(_)));
    }

    #[test]
    fn wage_missing_kept_for_counts() {
        assert_eq!(prepare_wage(None), WageOutcome::Missing);
        assert_eq!(prepare_wage(Some(-5.0)), WageOutcome::Missing);
    }

    #[test]
    fn wage_winsorize_clamps() {
        assert_eq!(
            prepare_wage_with(Some(6_000.0), WagePolicy::Winsorize),
            WageOutcome::Accepted(WAGE_MIN_MONTHLY)
        );
    }

    #[test]
    fn dedupe_same_company_month() {
        let a = posting("p1", "acme", "n1", "2023-01-05", "occ1");
        let b = posting("p2", "acme", "n1", "2023-01-20", "occ1");
        let (kept, removed) = dedupe_postings(&[a.clone(), b]);
        assert_eq!(kept, vec![a]);
        assert_eq!(removed.len(), 1);
        assert_eq!(removed[0].posting_id, "p2");
    }

    #[test]
    fn dedupe_keeps_earliest_even_if_later_in_input() {
        let a = posting("p1", "acme", "n1", "2023-01-20", "occ1");
        let b = posting("p2", "acme", "n1", "2023-01-05", "occ1");
        let (kept, _) = dedupe_postings(&[a, b.clone()]);
        assert_eq!(kept, vec![b]);
    }

    #[test]
    fn dedupe_empty() {
        let (kept, removed) = dedupe_postings(&[]);
        assert!(kept.is_empty());
        assert!(removed.is_empty());
    }

    #[test]
    fn dedupe_different_months_both_survive() {
        let a = posting("p1", "acme", "n1", "2023-01-05", "occ1");
        let b = posting("p2", "acme", "n1", "2023-02-05", "occ1");
        let (kept, removed) = dedupe_postings(&[a, b]);
        assert_eq!(kept.len(), 2);
        assert!(removed.is_empty());
    }

    #[test]
    fn dedupe_different_content_both_survive() {
        let a = posting("p1", "acme", "n1", "2023-01-05", "occ1");
        let b = posting("p2", "acme", "n2", "2023-01-06", "occ1");
        let c = posting("p3", "acme", "n1", "2023-01-07", "occ2");
        let (kept, _) = dedupe_postings(&[a, b, c]);
        assert_eq!(kept.len(), 3);
    }

    #[test]
    fn industry_codes_cover_paper_examples() {
        for c in ['I', 'H', 'G', 'K', 'E'] {
            assert!(INDUSTRY_CODES.contains(&c));
        }
        assert_eq!(INDUSTRY_CODES.len(), 18);
    }
}
