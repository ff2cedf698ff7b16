//! End-to-end command flows over the file formats: ingest, exposure, the
//! regression commands, lisa, and config validation.

use std::fs;
use std::path::{Path, PathBuf};

use panelkit_cli::commands::{self, Ctx};
use panelkit_cli::config::{
    parse_toml, BartikConfig, DidConfig, ExposureConfig, FeInteractConfig, IngestConfig,
    LisaConfig, PermuteConfig, ReportConfig, SimulateConfig, ValidationErrors,
};
use panelkit_cli::io;
use panelkit_cli::report::AnalysisReport;

fn ctx(dir: &Path, seed: Option<u64>) -> Ctx {
    Ctx { out: dir.to_path_buf(), seed }
}

fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

/// Deterministic postings fixture: 6 neighborhoods, 2018-2024, wage spread,
/// varied industries (including codes outside every shock set), one malformed
/// date, one unknown education, one duplicate pair, one out-of-bounds wage.
/// A tiny LCG keeps the mix irregular (regular patterns produce exactly
/// collinear shares) while staying reproducible.
fn postings_csv() -> String {
    let mut state: u64 = 0x2545_f491_4f6c_dd1d;
    let mut next = move |m: usize| -> usize {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 33) as usize) % m
    };
    let mut rows = vec![
        "posting_id,company_id,neighborhood_id,posting_date,occupation_code,industry_code,compensation_annual,education_requirement".to_string(),
    ];
    let hoods = ["n-core", "n-cbd", "n-mid", "n-park", "n-edge", "n-far"];
    let occs = ["dev", "clerk", "cook"];
    let industries = ['I', 'K', 'H', 'F', 'M', 'G', 'E'];
    let mut k = 0usize;
    for year in 2018..=2024 {
        for (h, hood) in hoods.iter().enumerate() {
            // wage level differs by neighborhood and drifts by year;
            // counts and industry mix vary irregularly
            let n_postings = 4 + h + next(4);
            for j in 0..n_postings {
                k += 1;
                let month = j % 12 + 1;
                let wage = 90_000.0
                    + 15_000.0 * h as f64
                    + 2_000.0 * (year - 2018) as f64
                    + 500.0 * next(20) as f64;
                let edu = ["bachelor", "master", "high_school", "associate"][next(4)];
                rows.push(format!(
                    "p{k},co{h}{j},{hood},{year}-{month:02}-10,{occ},{ind},{wage},{edu}",
                    occ = occs[next(3)],
                    ind = industries[next(7)],
                ));
            }
        }
    }
    // duplicate: same company, month, occupation, neighborhood; later date
    rows.push("dup1,co00,n-core,2020-03-05,dev,I,120000,bachelor".to_string());
    rows.push("dup2,co00,n-core,2020-03-25,dev,I,130000,bachelor".to_string());
    // malformed date, unknown education, wage below bound
    rows.push("bad1,cox,n-core,2020-13-45,dev,I,100000,bachelor".to_string());
    rows.push("bad2,coy,n-core,2020-04-05,dev,I,100000,phd".to_string());
    rows.push("low1,coz,n-edge,2021-05-05,cook,H,6000,high_school".to_string());
    rows.join("\n") + "\n"
}

fn assessments_csv() -> String {
    let mut rows = vec!["occupation_code,model_id,round,level".to_string()];
    let models = ["m-a", "m-b", "m-c", "m-d", "m-e"];
    // dev highly exposed, clerk mixed, cook not
    for (occ, levels) in
        [("dev", ["E1", "E1", "E2", "E1", "E1"]), ("clerk", ["E2", "E1", "E0", "E2", "E2"]), ("cook", ["E0", "E0", "E0", "E3", "E0"])]
    {
        for round in 1..=5u8 {
            for (m, model) in models.iter().enumerate() {
                rows.push(format!("{occ},{model},{round},{}", levels[(m + round as usize) % 5]));
            }
        }
    }
    rows.join("\n") + "\n"
}

struct Pipeline {
    dir: PathBuf,
}

impl Pipeline {
    fn new(name: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("panelkit-test-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

impl Drop for Pipeline {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.dir);
    }
}

#[test]
fn ingest_builds_panel_and_audits_rejects() {
    let p = Pipeline::new("ingest");
    write(&p.path("postings.csv"), &postings_csv());
    let cfg = IngestConfig { postings: Some(p.path("postings.csv")), ..Default::default() };
    let report = commands::ingest::run(&ctx(&p.dir, None), &cfg).unwrap();

    assert_eq!(report.audit_tallies.get("malformed_date"), Some(&1));
    assert_eq!(report.audit_tallies.get("unknown_education"), Some(&1));
    assert_eq!(report.audit_tallies.get("duplicate_posting"), Some(&1));
    assert_eq!(report.audit_tallies.get("wage_below_min"), Some(&1));

    let panel = io::read_panel(&p.path("panel.csv")).unwrap();
    assert_eq!(panel.entities().len(), 6);
    assert_eq!(panel.years(), (2018..=2024).collect::<Vec<_>>());
    // audit log is line-delimited with reason codes
    let audit_text = fs::read_to_string(p.path("audit.jsonl")).unwrap();
    assert!(audit_text.lines().count() >= 4);
    assert!(audit_text.contains("\"reason\":\"malformed_date\""));
}

#[test]
fn exposure_emits_spec_schema() {
    let p = Pipeline::new("exposure");
    write(&p.path("postings.csv"), &postings_csv());
    write(&p.path("scores.csv"), &assessments_csv());
    let cfg = ExposureConfig {
        assessments: Some(p.path("scores.csv")),
        postings: Some(p.path("postings.csv")),
        ..Default::default()
    };
    let report = commands::exposure::run(&ctx(&p.dir, None), &cfg).unwrap();
    let text = fs::read_to_string(p.path("exposure_out.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "neighborhood_id,year,exposure,exposure_std2018");
    // scores are means of level weights, inside [0, 1]
    let scores = report.results["occupation_scores"].as_object().unwrap();
    assert_eq!(scores.len(), 3);
    for v in scores.values() {
        let s = v.as_f64().unwrap();
        assert!((0.0..=1.0).contains(&s));
    }
    assert!(report.results["agreement"]["models"].as_array().unwrap().len() == 5);
}

fn did_config_text(panel: &Path, postings: &Path) -> String {
    format!(
        r#"
outcome = "ln_avg_wage"
treatment = "exposure_std2018"
standardize_treatment = true
confounders = []
controls = ["job_index"]
window = [2020, 2024]
post_years = [2023, 2024]
base_year = 2022
treatment_year = 2018

[input]
panel = "{}"
merge = ["{}"]
derive_log = ["avg_wage"]

[confounder_exposures]
postings = "{}"
base_year = 2018
shocks = [{{ name = "tech_reg" }}, {{ name = "covid" }}, {{ name = "real_estate" }}]
"#,
        panel.display(),
        panel.parent().unwrap().join("exposure_out.csv").display(),
        postings.display()
    )
}

/// Full file-level pipeline: ingest -> exposure -> did -> event-study ->
/// report rendering.
#[test]
fn posting_pipeline_through_did() {
    let p = Pipeline::new("pipeline");
    write(&p.path("postings.csv"), &postings_csv());
    write(&p.path("scores.csv"), &assessments_csv());
    let c = ctx(&p.dir, None);

    let ingest = IngestConfig { postings: Some(p.path("postings.csv")), ..Default::default() };
    commands::ingest::run(&c, &ingest).unwrap();
    let exposure = ExposureConfig {
        assessments: Some(p.path("scores.csv")),
        postings: Some(p.path("postings.csv")),
        ..Default::default()
    };
    commands::exposure::run(&c, &exposure).unwrap();

    let did_cfg: DidConfig =
        parse_toml(&did_config_text(&p.path("panel.csv"), &p.path("postings.csv"))).unwrap();
    let report = commands::did::run(&c, &did_cfg).unwrap();
    report.write(&p.path("did_report.json")).unwrap();

    // the computed confounder columns were appended to the spec echo
    let beta = report.results["beta"].as_f64().unwrap();
    assert!(beta.is_finite());
    let coef_names: Vec<String> = report.results["fit"]["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap().to_string())
        .collect();
    assert!(coef_names.contains(&"exposure_std2018:post".to_string()));
    assert!(coef_names.contains(&"techreg_2018:post".to_string()));
    assert!(coef_names.contains(&"covid_2018:post".to_string()));

    let es_report = commands::event_study::run(&c, &did_cfg).unwrap();
    let series = es_report.results["series"].as_array().unwrap();
    assert_eq!(series.len(), 5);
    assert!(series.iter().any(|s| s["is_base"].as_bool().unwrap()));
    es_report.write(&p.path("es_report.json")).unwrap();

    // render both
    let rep_cfg = ReportConfig {
        inputs: vec![p.path("did_report.json"), p.path("es_report.json")],
    };
    commands::report_cmd::run(&c, &rep_cfg).unwrap();
    let rendered = fs::read_to_string(p.path("did_report_rendered.txt")).unwrap();
    assert!(rendered.contains("exposure_std2018:post"));
    assert!(rendered.contains("** p<0.05; * p<0.1"));
    let rendered = fs::read_to_string(p.path("es_report_rendered.txt")).unwrap();
    assert!(rendered.contains("Pre-trend joint test (p)"));
    assert!(rendered.contains("0 (base)"));
}

#[test]
fn simulated_panel_supports_triple_did_and_permute() {
    let p = Pipeline::new("triple");
    let c = ctx(&p.dir, Some(11));
    let sim: SimulateConfig =
        parse_toml("kind = \"did-panel\"\n[spec]\nn_entities = 80\ninteraction_beta3 = -0.3\n")
            .unwrap();
    commands::simulate::run(&c, &sim).unwrap();

    let did_text = format!(
        r#"
outcome = "ln_wage"
treatment = "genai_2018"
moderator = "moderator_2018"
confounders = ["conf_techreg", "conf_covid", "conf_realestate"]
controls = ["ctrl_a", "ctrl_b"]

[input]
panel = "{}"
"#,
        p.path("panel.csv").display()
    );
    let did_cfg: DidConfig = parse_toml(&did_text).unwrap();
    let triple = commands::triple_did::run(&c, &did_cfg).unwrap();
    let beta3 = triple.results["beta3"].as_f64().unwrap();
    assert!(beta3 < 0.0, "planted negative heterogeneity, got {beta3}");

    let pcfg = PermuteConfig {
        target: Some(panelkit_cli::config::PermuteTarget::Did),
        b: 60,
        seed: Some(5),
        did: Some(did_cfg.clone()),
        ..Default::default()
    };
    let perm = commands::permute::run(&c, &pcfg).unwrap();
    assert_eq!(perm.results["b"].as_u64().unwrap(), 60);
    let placebo = fs::read_to_string(p.path("placebo.csv")).unwrap();
    assert_eq!(placebo.lines().count(), 61); // header + 60 draws
}

#[test]
fn fe_interact_flow_with_profile() {
    let p = Pipeline::new("interact");
    let c = ctx(&p.dir, Some(3));
    let sim: SimulateConfig = parse_toml(
        "kind = \"interaction-panel\"\n[spec]\nn_entities = 100\ninteraction_beta3 = -1.0\n",
    )
    .unwrap();
    commands::simulate::run(&c, &sim).unwrap();

    let text = format!(
        r#"
outcome = "ln_wage"
exposure = "genai_std"
moderator = "moderator_std"
controls = ["ctrl_a", "ctrl_b"]
standardize = true

[input]
panel = "{}"
"#,
        p.path("panel.csv").display()
    );
    let cfg: FeInteractConfig = parse_toml(&text).unwrap();
    let report = commands::fe_interact::run(&c, &cfg).unwrap();
    let b3 = report.results["fit"]["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"] == "genai_std:moderator_std")
        .unwrap()["estimate"]
        .as_f64()
        .unwrap();
    assert!((b3 - -1.0).abs() < 0.1, "beta3 {b3}");
    assert!(report.results["marginal_profile"]["zero_crossing"].is_number());
    let profile = fs::read_to_string(p.path("marginal_profile.csv")).unwrap();
    assert!(profile.lines().count() > 5);
    // without the pooled standardization pass the CSV round trip loses the
    // flags and the fit refuses to run
    let unflagged = FeInteractConfig { standardize: false, ..cfg.clone() };
    assert!(commands::fe_interact::run(&c, &unflagged).is_err());
}

#[test]
fn bartik_flow_with_pretrend_diagnostic() {
    let p = Pipeline::new("bartik");
    write(&p.path("postings.csv"), &postings_csv());
    write(&p.path("scores.csv"), &assessments_csv());
    let c = ctx(&p.dir, None);
    commands::ingest::run(
        &c,
        &IngestConfig { postings: Some(p.path("postings.csv")), ..Default::default() },
    )
    .unwrap();
    commands::exposure::run(
        &c,
        &ExposureConfig {
            assessments: Some(p.path("scores.csv")),
            postings: Some(p.path("postings.csv")),
            ..Default::default()
        },
    )
    .unwrap();

    let text = format!(
        r#"
postings = "{}"
exposure = "exposure"
outcome = "ln_avg_wage"
base_year = 2018
pre_years = [2018, 2019]
post_years = [2023, 2024]
controls = ["job_index"]

[input]
panel = "{}"
merge = ["{}"]
derive_log = ["avg_wage"]
"#,
        p.path("postings.csv").display(),
        p.path("panel.csv").display(),
        p.path("exposure_out.csv").display(),
    );
    let cfg: BartikConfig = parse_toml(&text).unwrap();
    let report = commands::bartik::run(&c, &cfg).unwrap();
    let text = fs::read_to_string(p.path("bartik_out.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "neighborhood_id,bartik_raw,bartik_std,coverage_share"
    );
    assert_eq!(report.results["n_neighborhoods_with_instrument"].as_u64(), Some(6));
    assert!(report.results["tsls"]["first_stage_f"].is_number());
    assert!(report.results["reduced_form"]["coefficients"].is_array());
}

#[test]
fn lisa_flow_on_lattice_and_adjacency() {
    let p = Pipeline::new("lisa");
    let c = ctx(&p.dir, Some(12));
    let sim: SimulateConfig = parse_toml(
        "kind = \"spatial-field\"\nlattice = [6, 6]\nfield_noise_sd = 0.0\nblocks = [\n { row0 = 0, col0 = 0, height = 3, width = 3, mean = 3.0 },\n { row0 = 3, col0 = 3, height = 3, width = 3, mean = -3.0 },\n]\n",
    )
    .unwrap();
    commands::simulate::run(&c, &sim).unwrap();

    let lattice_cfg: LisaConfig = parse_toml(&format!(
        "values = \"{}\"\npermutations = 999\nalpha = 0.05\n[weights]\nlattice = [6, 6]\n",
        p.path("values.csv").display()
    ))
    .unwrap();
    let report = commands::lisa::run(&c, &lattice_cfg).unwrap();
    let text = fs::read_to_string(p.path("lisa_out.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "unit_id,local_i,pseudo_p,category");
    assert!(text.contains("r1c1,") && text.contains(",HH"));
    assert!(text.contains("r4c4,") && text.contains(",LL"));
    assert!(report.results["global_i"].as_f64().unwrap() > 0.0);

    // adjacency edge-list input reproduces the same categories
    let adj_cfg: LisaConfig = parse_toml(&format!(
        "values = \"{}\"\npermutations = 999\nalpha = 0.05\n[weights]\nadjacency = \"{}\"\n",
        p.path("values.csv").display(),
        p.path("adjacency.csv").display()
    ))
    .unwrap();
    let report2 = commands::lisa::run(&c, &adj_cfg).unwrap();
    assert_eq!(
        report.results["category_counts"],
        report2.results["category_counts"]
    );
}

#[test]
fn validation_lists_every_missing_field() {
    let cfg: DidConfig = parse_toml("").unwrap();
    let err = cfg.validate(false).unwrap_err();
    let joined = err.0.join("\n");
    assert!(joined.contains("input.panel"));
    assert!(joined.contains("outcome"));
    assert!(joined.contains("treatment"));
    assert_eq!(err.0.len(), 3);

    // unknown keys are rejected at parse time
    let bad: Result<DidConfig, _> = parse_toml("outcame = \"x\"\n");
    assert!(bad.is_err());

    let cfg: SimulateConfig = parse_toml("").unwrap();
    let err = cfg.validate(None).unwrap_err();
    assert!(err.0.iter().any(|e| e.contains("kind")));
    assert!(err.0.iter().any(|e| e.contains("seed")));
}

#[test]
fn permute_exhaustive_toy_via_cli_layer() {
    let p = Pipeline::new("exhaustive");
    let c = ctx(&p.dir, None);
    // 3 entities, 4 years, manual panel file
    let mut rows = vec!["entity_id,year,ln_wage,treat".to_string()];
    let outcomes = [
        [1.3, 0.9, 2.1, 2.8],
        [0.4, 0.6, 1.0, 0.2],
        [2.2, 1.8, 1.1, 1.9],
    ];
    for (i, e) in ["a", "b", "c"].iter().enumerate() {
        for (t, y) in (2020..=2023).enumerate() {
            rows.push(format!("{e},{y},{},{}", outcomes[i][t], i as f64 - 1.0));
        }
    }
    write(&p.path("panel.csv"), &(rows.join("\n") + "\n"));

    let did_text = format!(
        r#"
outcome = "ln_wage"
treatment = "treat"
window = [2020, 2023]
post_years = [2022, 2023]
base_year = 2021
treatment_year = 2018

[input]
panel = "{}"
"#,
        p.path("panel.csv").display()
    );
    let did_cfg: DidConfig = parse_toml(&did_text).unwrap();
    let pcfg = PermuteConfig {
        target: Some(panelkit_cli::config::PermuteTarget::Did),
        exhaustive: true,
        did: Some(did_cfg),
        ..Default::default()
    };
    let report = commands::permute::run(&c, &pcfg).unwrap();
    assert_eq!(report.results["b"].as_u64(), Some(6));
    let p_val = report.results["p_two_sided"].as_f64().unwrap();
    assert!(p_val >= 1.0 / 6.0);
}

#[test]
fn error_records_are_machine_readable() {
    let e = anyhow::Error::new(ValidationErrors(vec!["missing `x`".into()]));
    let v: serde_json::Value =
        serde_json::from_str(&format!("{}", serde_json::json!({"error": {"message": e.to_string(), "fields": ["missing `x`"]}}))).unwrap();
    assert_eq!(v["error"]["fields"][0], "missing `x`");
}

#[test]
fn reports_echo_defaults_and_config_hash() {
    let p = Pipeline::new("echo");
    let c = ctx(&p.dir, Some(1));
    let sim: SimulateConfig = parse_toml("kind = \"did-panel\"\n[spec]\nn_entities = 20\n").unwrap();
    let report = commands::simulate::run(&c, &sim).unwrap();
    // defaulted parameters appear in the echoed config
    assert_eq!(report.config["spec"]["cluster_rho"].as_f64(), Some(0.5));
    assert_eq!(report.config["spec"]["noise_sd"].as_f64(), Some(0.25));
    assert_eq!(report.provenance.seed, Some(1));
    assert_eq!(report.provenance.config_hash.len(), 64);

    // round trip through disk keeps the document readable
    report.write(&p.path("r.json")).unwrap();
    let back = AnalysisReport::read(&p.path("r.json")).unwrap();
    assert_eq!(back.command, "simulate");
}

#[test]
fn descriptive_terciles_emitted_when_requested() {
    let p = Pipeline::new("terciles");
    let c = ctx(&p.dir, Some(2));
    let sim: SimulateConfig =
        parse_toml("kind = \"did-panel\"\n[spec]\nn_entities = 30\n").unwrap();
    commands::simulate::run(&c, &sim).unwrap();
    let text = format!(
        r#"
outcome = "ln_wage"
treatment = "genai_2018"
controls = ["ctrl_a", "ctrl_b"]
descriptive_terciles = true

[input]
panel = "{}"
"#,
        p.path("panel.csv").display()
    );
    let cfg: DidConfig = parse_toml(&text).unwrap();
    let report = commands::did::run(&c, &cfg).unwrap();
    let traj = report.results["tercile_trajectories"].as_array().unwrap();
    assert_eq!(traj.len(), 3 * 5); // three groups over five years
    let csv = fs::read_to_string(p.path("tercile_trajectories.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "year,group,mean_outcome,n");
    // every rendered group appears
    for g in ["low", "medium", "high"] {
        assert!(csv.contains(g));
    }
}

#[test]
fn binary_emits_error_record_and_nonzero_exit() {
    use std::process::Command;
    let dir = std::env::temp_dir().join(format!("panelkit-errrec-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("empty.toml"), "").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_panelkit"))
        .args(["did", "--config", "empty.toml", "--out", "out"])
        .current_dir(&dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let record: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("stderr is one JSON error record");
    let fields = record["error"]["fields"].as_array().unwrap();
    assert_eq!(fields.len(), 3, "all violated fields listed in one pass: {fields:?}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn lisa_polygon_input_with_island_fallback() {
    let p = Pipeline::new("polys");
    let c = ctx(&p.dir, Some(9));
    // 2x2 grid of unit squares plus one distant island square
    let polys = "\
# unit_id x1 y1 x2 y2 ...
a 0 0 1 0 1 1 0 1
b 1 0 2 0 2 1 1 1
c 0 1 1 1 1 2 0 2
d 1 1 2 1 2 2 1 2
island 50 50 51 50 51 51 50 51
";
    write(&p.path("grid.poly"), polys);
    let values = "unit_id,value\na,1.0\nb,2.0\nc,3.0\nd,4.0\nisland,10.0\n";
    write(&p.path("values.csv"), values);

    let cfg: LisaConfig = parse_toml(&format!(
        "values = \"{}\"\npermutations = 99\n[weights]\npolygons = \"{}\"\nk = 2\n",
        p.path("values.csv").display(),
        p.path("grid.poly").display()
    ))
    .unwrap();
    let report = commands::lisa::run(&c, &cfg).unwrap();
    // the island was connected through its nearest centroids
    assert_eq!(report.results["n_isolated"].as_u64(), Some(0));
    assert!(report.results["weights_scheme"]
        .as_str()
        .unwrap()
        .contains("knn-fallback"));
    // without the fallback it stays isolated and is flagged
    let no_fallback: LisaConfig = parse_toml(&format!(
        "values = \"{}\"\npermutations = 99\n[weights]\npolygons = \"{}\"\nknn_fallback = false\n",
        p.path("values.csv").display(),
        p.path("grid.poly").display()
    ))
    .unwrap();
    let report = commands::lisa::run(&c, &no_fallback).unwrap();
    assert_eq!(report.results["isolated_units"][0].as_str(), Some("island"));
    let out = fs::read_to_string(p.path("lisa_out.csv")).unwrap();
    assert!(out.contains("island,0,1,isolated"));
}
