//! Fixed-width text tables with significance stars.
//!
//! The DID layout uses two tiers (** p<0.05, * p<0.1); the mechanism layout
//! uses three (*** p<0.01, ** p<0.05, * p<0.1). Every number rendered here is
//! also present in the machine-readable report; this module only formats.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableLayout {
    /// Two-tier stars, DID-style.
    Table2,
    /// Three-tier stars, mechanism-style.
    Table3,
    /// Year-by-year coefficient path.
    EventStudy,
}

pub fn stars(p: f64, layout: TableLayout) -> &'static str {
    match layout {
        TableLayout::Table2 | TableLayout::EventStudy => {
            if p < 0.05 {
                "**"
            } else if p < 0.1 {
                "*"
            } else {
                ""
            }
        }
        TableLayout::Table3 => {
            if p < 0.01 {
                "***"
            } else if p < 0.05 {
                "**"
            } else if p < 0.1 {
                "*"
            } else {
                ""
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderRow {
    pub label: String,
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
}

/// Coefficient with stars over a parenthesized standard error.
pub fn coefficient_cell(estimate: f64, p: f64, layout: TableLayout) -> String {
    format!("{estimate:.3}{}", stars(p, layout))
}

pub fn se_cell(se: f64) -> String {
    format!("({se:.3})")
}

/// Fixed-width two-line-per-coefficient table plus footer statistics.
pub fn render_table(
    title: &str,
    rows: &[RenderRow],
    footer: &[(String, String)],
    layout: TableLayout,
) -> String {
    let label_w = rows
        .iter()
        .map(|r| r.label.len())
        .chain(footer.iter().map(|(k, _)| k.len()))
        .max()
        .unwrap_or(8)
        .max(8);
    let val_w = 14usize;
    let rule = "-".repeat(label_w + val_w + 3);
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{rule}");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<label_w$}  {:>val_w$}",
            r.label,
            coefficient_cell(r.estimate, r.p_value, layout)
        );
        let _ = writeln!(out, "{:<label_w$}  {:>val_w$}", "", se_cell(r.std_error));
    }
    if !footer.is_empty() {
        let _ = writeln!(out, "{rule}");
        for (k, v) in footer {
            let _ = writeln!(out, "{k:<label_w$}  {v:>val_w$}");
        }
    }
    let _ = writeln!(out, "{rule}");
    let note = match layout {
        TableLayout::Table3 => "*** p<0.01; ** p<0.05; * p<0.1",
        _ => "** p<0.05; * p<0.1",
    };
    let _ = writeln!(out, "{note}");
    out
}

/// Event-study series: one row per year, base pinned at zero.
pub fn render_event_series(
    title: &str,
    series: &[(i32, f64, f64, f64, bool)],
    footer: &[(String, String)],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let rule = "-".repeat(48);
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(out, "{:<6} {:>14} {:>12} {:>8}", "year", "coefficient", "(se)", "p");
    for (year, coef, se, p, is_base) in series {
        if *is_base {
            let _ = writeln!(out, "{year:<6} {:>14} {:>12} {:>8}", "0 (base)", "", "");
        } else {
            let _ = writeln!(
                out,
                "{year:<6} {:>14} {:>12} {:>8.3}",
                coefficient_cell(*coef, *p, TableLayout::EventStudy),
                se_cell(*se),
                p
            );
        }
    }
    let _ = writeln!(out, "{rule}");
    for (k, v) in footer {
        let _ = writeln!(out, "{k:<24} {v}");
    }
    let _ = writeln!(out, "** p<0.05; * p<0.1");
    out
}
