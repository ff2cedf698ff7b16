//! File formats: postings, panel, assessment, values, adjacency/polygon
//! inputs and the CSV/JSONL outputs. All writers go through an atomic
//! temp-file-and-rename path and emit rows in a deterministic order.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use panelkit::exposure::{AssessmentRecord, ExposureLevel};
use panelkit::panel::{
    AuditCode, AuditLog, EducationLevel, PanelDataset, PostingRecord, VariableMeta,
    INDUSTRY_CODES,
};
/// Write bytes atomically: temp file in the destination directory, then
/// rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = match path.file_name() {
        Some(name) => path.with_file_name(format!(".{}.tmp", name.to_string_lossy())),
        None => bail!("invalid output path {}", path.display()),
    };
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// `postings.csv` header.
pub const POSTINGS_HEADER: [&str; 8] = [
    "posting_id",
    "company_id",
    "neighborhood_id",
    "posting_date",
    "occupation_code",
    "industry_code",
    "compensation_annual",
    "education_requirement",
];

/// Parse postings; malformed records are rejected into the audit log, never
/// silently dropped.
pub fn read_postings(path: &Path) -> Result<(Vec<PostingRecord>, AuditLog)> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening postings file {}", path.display()))?;
    {
        let headers = reader.headers()?;
        let got: Vec<&str> = headers.iter().collect();
        if got != POSTINGS_HEADER {
            bail!(
                "postings header mismatch: expected {:?}, found {:?}",
                POSTINGS_HEADER,
                got
            );
        }
    }
    let mut audit = AuditLog::new();
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let id = row.get(0).unwrap_or("").to_string();
        let record_id = if id.is_empty() { format!("row{}", i + 2) } else { id.clone() };

        let date = match NaiveDate::parse_from_str(row.get(3).unwrap_or(""), "%Y-%m-%d") {
            Ok(d) => d,
            Err(e) => {
                audit.record(AuditCode::MalformedDate, &record_id, e.to_string());
                continue;
            }
        };
        let industry: Vec<char> = row.get(5).unwrap_or("").chars().collect();
        let industry_code = match industry[..] {
            [c] if INDUSTRY_CODES.contains(&c) => c,
            _ => {
                audit.record(
                    AuditCode::UnknownIndustry,
                    &record_id,
                    format!("`{}`", row.get(5).unwrap_or("")),
                );
                continue;
            }
        };
        let education = match EducationLevel::parse(row.get(7).unwrap_or("")) {
            Ok(e) => e,
            Err(_) => {
                audit.record(
                    AuditCode::UnknownEducation,
                    &record_id,
                    format!("`{}`", row.get(7).unwrap_or("")),
                );
                continue;
            }
        };
        let comp_raw = row.get(6).unwrap_or("");
        let compensation_annual = if comp_raw.is_empty() {
            None
        } else {
            match comp_raw.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Some(v),
                _ => {
                    audit.record(
                        AuditCode::NonpositiveCompensation,
                        &record_id,
                        format!("`{comp_raw}` treated as missing"),
                    );
                    None
                }
            }
        };
        out.push(PostingRecord {
            posting_id: id,
            company_id: row.get(1).unwrap_or("").to_string(),
            neighborhood_id: row.get(2).unwrap_or("").to_string(),
            posting_date: date,
            occupation_code: row.get(4).unwrap_or("").to_string(),
            industry_code,
            compensation_annual,
            education,
        });
    }
    Ok((out, audit))
}

/// `panel.csv`: `entity_id,year,<variables>`; missing values are empty cells.
pub fn write_panel(path: &Path, panel: &PanelDataset) -> Result<()> {
    let mut panel = panel.clone();
    panel.sort_rows();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["entity_id".to_string(), "year".to_string()];
    header.extend(panel.variables().iter().cloned());
    w.write_record(&header)?;
    for obs in panel.observations() {
        let mut row = vec![obs.entity.clone(), obs.year.to_string()];
        for v in &obs.values {
            row.push(match v {
                Some(x) => format_float(*x),
                None => String::new(),
            });
        }
        w.write_record(&row)?;
    }
    write_atomic(path, &w.into_inner()?)
}

/// Full-precision float formatting that round-trips.
pub fn format_float(x: f64) -> String {
    let mut buf = ryu_format(x);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(x: f64) -> String {
    // shortest representation that round-trips is what `{}` gives for f64
    format!("{x}")
}

pub fn read_panel(path: &Path) -> Result<PanelDataset> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening panel file {}", path.display()))?;
    let headers: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if headers.len() < 3 || headers[0] != "entity_id" || headers[1] != "year" {
        bail!("panel header must start with entity_id,year; found {:?}", headers);
    }
    let vars: Vec<String> = headers[2..].to_vec();
    let mut panel = PanelDataset::new(vars)?;
    for row in reader.records() {
        let row = row?;
        let entity = row.get(0).unwrap_or("").to_string();
        let year: i32 = row
            .get(1)
            .unwrap_or("")
            .parse()
            .with_context(|| format!("bad year for entity {entity}"))?;
        let mut values = Vec::with_capacity(headers.len() - 2);
        for (j, header) in headers.iter().enumerate().skip(2) {
            let cell = row.get(j).unwrap_or("");
            values.push(if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<f64>().with_context(|| {
                    format!("bad value `{cell}` in column {header} for {entity}")
                })?)
            });
        }
        panel.push(entity, year, values)?;
    }
    Ok(panel)
}

/// Merge extra CSVs whose first two columns are an (id, year) key; remaining
/// columns are appended as panel variables.
pub fn merge_panel_csv(panel: &mut PanelDataset, path: &Path) -> Result<()> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening merge file {}", path.display()))?;
    let headers: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if headers.len() < 3 {
        bail!("merge file {} needs at least (id, year, value) columns", path.display());
    }
    for var in &headers[2..] {
        panel.add_variable(var.clone(), VariableMeta::default())?;
    }
    for row in reader.records() {
        let row = row?;
        let entity = row.get(0).unwrap_or("");
        let year: i32 = row.get(1).unwrap_or("").parse().context("bad year in merge file")?;
        for (j, var) in headers[2..].iter().enumerate() {
            let cell = row.get(j + 2).unwrap_or("");
            if cell.is_empty() {
                continue;
            }
            let value: f64 =
                cell.parse().with_context(|| format!("bad value `{cell}` in {var}"))?;
            // rows absent from the panel are skipped silently: the panel
            // defines the estimation sample
            let _ = panel.set_value(entity, year, var, Some(value));
        }
    }
    Ok(())
}

/// `occupation_scores.csv`: `occupation_code,model_id,round,level`.
pub fn read_assessments(path: &Path) -> Result<Vec<AssessmentRecord>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening assessments file {}", path.display()))?;
    let headers: Vec<&str> = reader.headers()?.iter().collect();
    if headers != ["occupation_code", "model_id", "round", "level"] {
        bail!("assessment header mismatch: found {:?}", headers);
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let round: u8 = row.get(2).unwrap_or("").parse().context("bad round")?;
        let level = ExposureLevel::parse(row.get(3).unwrap_or(""))?;
        out.push(AssessmentRecord::new(
            row.get(0).unwrap_or("").to_string(),
            row.get(1).unwrap_or("").to_string(),
            round,
            level,
        )?);
    }
    Ok(out)
}

/// `unit_id,value` two-column input for spatial analysis.
pub fn read_values(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening values file {}", path.display()))?;
    let headers: Vec<&str> = reader.headers()?.iter().collect();
    if headers != ["unit_id", "value"] {
        bail!("values header must be unit_id,value; found {:?}", headers);
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        out.push((
            row.get(0).unwrap_or("").to_string(),
            row.get(1).unwrap_or("").parse().context("bad value")?,
        ));
    }
    Ok(out)
}

/// `unit_id,neighbor_id` edge list.
pub fn read_adjacency(path: &Path) -> Result<Vec<(String, String)>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening adjacency file {}", path.display()))?;
    let headers: Vec<&str> = reader.headers()?.iter().collect();
    if headers != ["unit_id", "neighbor_id"] {
        bail!("adjacency header must be unit_id,neighbor_id; found {:?}", headers);
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        out.push((
            row.get(0).unwrap_or("").to_string(),
            row.get(1).unwrap_or("").to_string(),
        ));
    }
    Ok(out)
}

pub type PolygonRing = (String, Vec<(f64, f64)>);

/// Minimal polygon layout: one unit per line,
/// `unit_id x1 y1 x2 y2 ... xn yn` (whitespace-separated, ring implicitly
/// closed). Blank lines and `#` comments are skipped.
pub fn read_polygons(path: &Path) -> Result<Vec<PolygonRing>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("opening polygons {}", path.display()))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let id = parts.next().unwrap().to_string();
        let coords: Vec<f64> = parts
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("bad coordinate on line {}", lineno + 1))?;
        if coords.len() < 6 || !coords.len().is_multiple_of(2) {
            bail!("polygon `{id}` needs at least 3 x/y pairs (line {})", lineno + 1);
        }
        let ring = coords.chunks(2).map(|c| (c[0], c[1])).collect();
        out.push((id, ring));
    }
    Ok(out)
}

/// Line-delimited audit records.
pub fn write_audit(path: &Path, audit: &AuditLog) -> Result<()> {
    let mut buf = Vec::new();
    for entry in &audit.entries {
        let line = serde_json::json!({
            "reason": entry.code.as_str(),
            "record_id": entry.record_id,
            "detail": entry.detail,
        });
        buf.extend_from_slice(line.to_string().as_bytes());
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

/// Generic deterministic CSV writer: header plus stringified rows.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    write_atomic(path, &w.into_inner()?)
}
