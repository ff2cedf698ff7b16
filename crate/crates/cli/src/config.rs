//! Per-command run configuration. Unknown keys are rejected at parse time;
//! missing or inconsistent fields are collected in a single validation pass
//! so the error record lists every violation at once. Every defaulted field
//! is materialized in the struct and echoed verbatim into the report.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use panelkit::designs::{DidSpec, ShockDefinition};
use panelkit::exposure::LevelWeights;
use panelkit::panel::{IndexScope, WagePolicy};
use panelkit::synth::SyntheticSpec;

pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> anyhow::Result<T> {
    toml::from_str(text).map_err(|e| anyhow::anyhow!("config parse error: {e}"))
}

/// Validation failure carrying every violated field.
#[derive(Debug)]
pub struct ValidationErrors(pub Vec<String>);

impl std::fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration: {}", self.0.join("; "))
    }
}

impl std::error::Error for ValidationErrors {}

fn require<T>(field: &Option<T>, name: &str, errors: &mut Vec<String>) {
    if field.is_none() {
        errors.push(format!("missing required field `{name}`"));
    }
}

fn finish(errors: Vec<String>) -> Result<(), ValidationErrors> {
    if errors.is_empty() {
        Ok(())
    } else {
        Err(ValidationErrors(errors))
    }
}

// ---------------------------------------------------------------- ingest --

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestConfig {
    pub postings: Option<PathBuf>,
    pub wage_policy: WagePolicy,
    pub index_scope: IndexScope,
}

impl IngestConfig {
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut errors = Vec::new();
        require(&self.postings, "postings", &mut errors);
        finish(errors)
    }
}

// -------------------------------------------------------------- exposure --

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExposureConfig {
    pub assessments: Option<PathBuf>,
    pub postings: Option<PathBuf>,
    pub level_weights: LevelWeights,
    /// Anchor year for the broadcast standardized exposure column.
    pub standardize_at: i32,
}

impl Default for ExposureConfig {
    fn default() -> Self {
        Self {
            assessments: None,
            postings: None,
            level_weights: LevelWeights::default(),
            standardize_at: 2018,
        }
    }
}

impl ExposureConfig {
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut errors = Vec::new();
        require(&self.assessments, "assessments", &mut errors);
        require(&self.postings, "postings", &mut errors);
        if self.level_weights.validate().is_err() {
            errors.push("level_weights must lie in [0, 1]".into());
        }
        finish(errors)
    }
}

// ---------------------------------------------------- shared panel input --

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PanelInput {
    pub panel: Option<PathBuf>,
    /// Extra CSVs joined on (id, year) key columns.
    pub merge: Vec<PathBuf>,
    /// Variables to log-transform on load (adds `ln_<name>` columns).
    pub derive_log: Vec<String>,
}

impl PanelInput {
    fn validate(&self, errors: &mut Vec<String>) {
        require(&self.panel, "input.panel", errors);
    }
}

/// A concurrent shock named in config: a built-in or a custom industry set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockConfig {
    pub name: String,
    /// Single-letter primary-industry codes; empty means use the built-in
    /// set for the name (tech_reg / covid / real_estate).
    #[serde(default)]
    pub industries: Vec<String>,
}

impl ShockConfig {
    pub fn to_shock(&self) -> anyhow::Result<ShockDefinition> {
        if self.industries.is_empty() {
            return Ok(match self.name.as_str() {
                "tech_reg" => ShockDefinition::tech_reg(),
                "covid" => ShockDefinition::covid(),
                "real_estate" => ShockDefinition::real_estate(),
                other => anyhow::bail!(
                    "shock `{other}` has no built-in industry set; list `industries` explicitly"
                ),
            });
        }
        let mut codes = BTreeSet::new();
        for s in &self.industries {
            let chars: Vec<char> = s.chars().collect();
            match chars[..] {
                [c] => {
                    codes.insert(c);
                }
                _ => anyhow::bail!("industry code `{s}` must be a single letter"),
            }
        }
        Ok(ShockDefinition::new(self.name.clone(), codes)?)
    }
}

/// Confounder exposures computed from base-year postings (share of postings
/// in each shock's industries, standardized cross-entity, joined as columns).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfounderExposuresConfig {
    pub postings: PathBuf,
    #[serde(default = "default_base_year")]
    pub base_year: i32,
    pub shocks: Vec<ShockConfig>,
}

fn default_base_year() -> i32 {
    2018
}

// ------------------------------------------------------------------- did --

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DidConfig {
    pub input: PanelInput,
    pub outcome: Option<String>,
    pub treatment: Option<String>,
    pub treatment_year: i32,
    pub window: [i32; 2],
    pub post_years: Vec<i32>,
    pub base_year: i32,
    /// Panel columns used as confounder exposures (interacted with post).
    pub confounders: Vec<String>,
    pub controls: Vec<String>,
    /// Z-score the treatment across entities before fitting (it must be
    /// pre-determined, i.e. constant within entity).
    pub standardize_treatment: bool,
    pub standardize_confounders: bool,
    /// Optional moderator for the triple-DID command.
    pub moderator: Option<String>,
    pub standardize_moderator: bool,
    /// Optionally build confounder columns from base-year postings.
    pub confounder_exposures: Option<ConfounderExposuresConfig>,
    /// Emit the descriptive tercile trajectory table (estimation always uses
    /// the continuous treatment).
    pub descriptive_terciles: bool,
}

impl Default for DidConfig {
    fn default() -> Self {
        Self {
            input: PanelInput::default(),
            outcome: None,
            treatment: None,
            treatment_year: 2018,
            window: [2020, 2024],
            post_years: vec![2023, 2024],
            base_year: 2022,
            confounders: Vec::new(),
            controls: Vec::new(),
            standardize_treatment: true,
            standardize_confounders: true,
            moderator: None,
            standardize_moderator: true,
            confounder_exposures: None,
            descriptive_terciles: false,
        }
    }
}

impl DidConfig {
    pub fn validate(&self, need_moderator: bool) -> Result<(), ValidationErrors> {
        let mut errors = Vec::new();
        self.input.validate(&mut errors);
        require(&self.outcome, "outcome", &mut errors);
        require(&self.treatment, "treatment", &mut errors);
        if need_moderator {
            require(&self.moderator, "moderator", &mut errors);
        }
        if let (Some(outcome), Some(treatment)) = (&self.outcome, &self.treatment) {
            let spec = self.to_spec(outcome.clone(), treatment.clone());
            if let Err(e) = spec.validate() {
                errors.push(e.to_string());
            }
        }
        finish(errors)
    }

    pub fn to_spec(&self, outcome: String, treatment: String) -> DidSpec {
        DidSpec {
            outcome,
            treatment,
            treatment_year: self.treatment_year,
            window: (self.window[0], self.window[1]),
            post_years: self.post_years.clone(),
            base_year: self.base_year,
            confounders: self.confounders.clone(),
            controls: self.controls.clone(),
        }
    }
}

// --------------------------------------------------------------- permute --

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermuteTarget {
    Did,
    FeInteract,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PermuteConfig {
    pub target: Option<PermuteTarget>,
    pub b: usize,
    pub seed: Option<u64>,
    /// Use the (count+1)/(B+1) convention instead of count/B.
    pub add_one: bool,
    /// Enumerate every permutation (cross-entity target, small panels only).
    pub exhaustive: bool,
    pub did: Option<DidConfig>,
    pub interact: Option<FeInteractConfig>,
}

impl Default for PermuteConfig {
    fn default() -> Self {
        Self {
            target: None,
            b: 500,
            seed: None,
            add_one: false,
            exhaustive: false,
            did: None,
            interact: None,
        }
    }
}

impl PermuteConfig {
    pub fn validate(&self, cli_seed: Option<u64>) -> Result<(), ValidationErrors> {
        let mut errors = Vec::new();
        match self.target {
            None => errors.push("missing required field `target` (did | fe-interact)".into()),
            Some(PermuteTarget::Did) => match &self.did {
                None => errors.push("target `did` needs a [did] block".into()),
                Some(cfg) => {
                    if let Err(e) = cfg.validate(false) {
                        errors.extend(e.0);
                    }
                }
            },
            Some(PermuteTarget::FeInteract) => match &self.interact {
                None => errors.push("target `fe-interact` needs an [interact] block".into()),
                Some(cfg) => {
                    if let Err(e) = cfg.validate() {
                        errors.extend(e.0);
                    }
                    if self.exhaustive {
                        errors.push("exhaustive enumeration is only available for target `did`".into());
                    }
                }
            },
        }
        if self.b == 0 && !self.exhaustive {
            errors.push("`b` must be positive".into());
        }
        if self.seed.or(cli_seed).is_none() && !self.exhaustive {
            errors.push("a seed is required (config `seed` or --seed)".into());
        }
        finish(errors)
    }
}

// ----------------------------------------------------------- fe-interact --

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeInteractConfig {
    pub input: PanelInput,
    pub outcome: Option<String>,
    pub exposure: Option<String>,
    pub moderator: Option<String>,
    pub controls: Vec<String>,
    pub window: Option<[i32; 2]>,
    /// Columns to z-score pooled before fitting; defaults to exposure and
    /// moderator when empty and `standardize` is true.
    pub standardize: bool,
    pub standardize_extra: Vec<String>,
    /// Moderator grid for the marginal-effect profile.
    pub profile_grid: Vec<f64>,
}

impl Default for FeInteractConfig {
    fn default() -> Self {
        Self {
            input: PanelInput::default(),
            outcome: None,
            exposure: None,
            moderator: None,
            controls: Vec::new(),
            window: None,
            standardize: true,
            standardize_extra: Vec::new(),
            profile_grid: vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0],
        }
    }
}

impl FeInteractConfig {
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut errors = Vec::new();
        self.input.validate(&mut errors);
        require(&self.outcome, "outcome", &mut errors);
        require(&self.exposure, "exposure", &mut errors);
        require(&self.moderator, "moderator", &mut errors);
        if self.profile_grid.is_empty() {
            errors.push("profile_grid must not be empty".into());
        }
        finish(errors)
    }
}

// ---------------------------------------------------------------- bartik --

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BartikConfig {
    pub input: PanelInput,
    pub postings: Option<PathBuf>,
    /// Panel variable holding neighborhood exposure (E_k at the base year).
    pub exposure: Option<String>,
    /// Log-wage variable to long-difference.
    pub outcome: Option<String>,
    pub base_year: i32,
    pub pre_years: Vec<i32>,
    pub post_years: Vec<i32>,
    /// Variables entered as long differences.
    pub controls: Vec<String>,
    /// Time-invariant confounder columns entered in levels.
    pub confounders: Vec<String>,
    pub standardize_bartik: bool,
    /// Run the event-study parallel-trends diagnostic with the instrument as
    /// treatment.
    pub pretrend_check: bool,
    pub pretrend_window: [i32; 2],
    pub pretrend_post_years: Vec<i32>,
    pub pretrend_base_year: i32,
    pub pretrend_controls: Vec<String>,
    pub pretrend_alpha: f64,
}

impl Default for BartikConfig {
    fn default() -> Self {
        Self {
            input: PanelInput::default(),
            postings: None,
            exposure: None,
            outcome: None,
            base_year: 2018,
            pre_years: vec![2018, 2019],
            post_years: vec![2023, 2024],
            controls: Vec::new(),
            confounders: Vec::new(),
            standardize_bartik: true,
            pretrend_check: false,
            pretrend_window: [2020, 2024],
            pretrend_post_years: vec![2023, 2024],
            pretrend_base_year: 2022,
            pretrend_controls: Vec::new(),
            pretrend_alpha: 0.05,
        }
    }
}

impl BartikConfig {
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut errors = Vec::new();
        self.input.validate(&mut errors);
        require(&self.postings, "postings", &mut errors);
        require(&self.exposure, "exposure", &mut errors);
        require(&self.outcome, "outcome", &mut errors);
        if self.pre_years.is_empty() {
            errors.push("pre_years must not be empty".into());
        }
        if self.post_years.is_empty() {
            errors.push("post_years must not be empty".into());
        }
        finish(errors)
    }
}

// ------------------------------------------------------------------ lisa --

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsSchemeConfig {
    Queen,
    Rook,
    KNearest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsConfig {
    pub scheme: WeightsSchemeConfig,
    pub adjacency: Option<PathBuf>,
    pub polygons: Option<PathBuf>,
    /// `unit_id,x,y` centroid list for the k-nearest scheme.
    pub centroids: Option<PathBuf>,
    pub lattice: Option<[usize; 2]>,
    pub k: usize,
    /// Connect isolated contiguity units to their k nearest centroids.
    pub knn_fallback: bool,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self {
            scheme: WeightsSchemeConfig::Queen,
            adjacency: None,
            polygons: None,
            centroids: None,
            lattice: None,
            k: 6,
            knn_fallback: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LisaConfig {
    pub values: Option<PathBuf>,
    pub weights: WeightsConfig,
    pub permutations: usize,
    pub alpha: f64,
    pub seed: Option<u64>,
    /// Benjamini-Hochberg false-discovery-rate gate instead of the raw alpha.
    pub fdr: bool,
}

impl Default for LisaConfig {
    fn default() -> Self {
        Self {
            values: None,
            weights: WeightsConfig::default(),
            permutations: 999,
            alpha: 0.05,
            seed: None,
            fdr: false,
        }
    }
}

impl LisaConfig {
    pub fn validate(&self, cli_seed: Option<u64>) -> Result<(), ValidationErrors> {
        let mut errors = Vec::new();
        require(&self.values, "values", &mut errors);
        let sources = [
            self.weights.adjacency.is_some(),
            self.weights.polygons.is_some(),
            self.weights.lattice.is_some(),
            self.weights.centroids.is_some() && self.weights.scheme == WeightsSchemeConfig::KNearest,
        ];
        if sources.iter().filter(|s| **s).count() != 1 {
            errors.push(
                "exactly one weights source required: weights.adjacency, weights.polygons, weights.lattice, or weights.centroids with scheme k_nearest".into(),
            );
        }
        if !(0.0..1.0).contains(&self.alpha) || self.alpha <= 0.0 {
            errors.push(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if self.permutations == 0 {
            errors.push("permutations must be positive".into());
        }
        if self.seed.or(cli_seed).is_none() {
            errors.push("a seed is required (config `seed` or --seed)".into());
        }
        finish(errors)
    }
}

// -------------------------------------------------------------- simulate --

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulateKind {
    DidPanel,
    InteractionPanel,
    IvCrossSection,
    SpatialField,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    pub n_entities: usize,
    pub years: [i32; 2],
    pub post_years: Vec<i32>,
    pub base_year: i32,
    pub true_beta_did: f64,
    pub pretrend_slope: f64,
    pub confounder_loadings: [f64; 3],
    pub moderator_loading: f64,
    pub interaction_beta3: f64,
    pub fe_beta1: f64,
    pub fe_beta2: f64,
    pub first_stage_pi: f64,
    pub endogeneity_corr: f64,
    pub cluster_rho: f64,
    pub noise_sd: f64,
    pub control_loadings: [f64; 2],
}

impl Default for SynthParams {
    fn default() -> Self {
        let s = SyntheticSpec::new(0);
        Self {
            n_entities: s.n_entities,
            years: [s.years.0, s.years.1],
            post_years: s.post_years,
            base_year: s.base_year,
            true_beta_did: s.true_beta_did,
            pretrend_slope: s.pretrend_slope,
            confounder_loadings: s.confounder_loadings,
            moderator_loading: s.moderator_loading,
            interaction_beta3: s.interaction_beta3,
            fe_beta1: s.fe_beta1,
            fe_beta2: s.fe_beta2,
            first_stage_pi: s.first_stage_pi,
            endogeneity_corr: s.endogeneity_corr,
            cluster_rho: s.cluster_rho,
            noise_sd: s.noise_sd,
            control_loadings: s.control_loadings,
        }
    }
}

impl SynthParams {
    pub fn to_spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_entities: self.n_entities,
            years: (self.years[0], self.years[1]),
            post_years: self.post_years.clone(),
            base_year: self.base_year,
            true_beta_did: self.true_beta_did,
            pretrend_slope: self.pretrend_slope,
            confounder_loadings: self.confounder_loadings,
            moderator_loading: self.moderator_loading,
            interaction_beta3: self.interaction_beta3,
            fe_beta1: self.fe_beta1,
            fe_beta2: self.fe_beta2,
            first_stage_pi: self.first_stage_pi,
            endogeneity_corr: self.endogeneity_corr,
            cluster_rho: self.cluster_rho,
            noise_sd: self.noise_sd,
            control_loadings: self.control_loadings,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub row0: usize,
    pub col0: usize,
    pub height: usize,
    pub width: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub kind: Option<SimulateKind>,
    pub seed: Option<u64>,
    pub spec: SynthParams,
    /// Spatial-field settings.
    pub lattice: [usize; 2],
    pub blocks: Vec<BlockConfig>,
    pub field_noise_sd: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            kind: None,
            seed: None,
            spec: SynthParams::default(),
            lattice: [8, 8],
            blocks: Vec::new(),
            field_noise_sd: 1.0,
        }
    }
}

impl SimulateConfig {
    pub fn validate(&self, cli_seed: Option<u64>) -> Result<(), ValidationErrors> {
        let mut errors = Vec::new();
        if self.kind.is_none() {
            errors.push(
                "missing required field `kind` (did-panel | interaction-panel | iv-cross-section | spatial-field)".into(),
            );
        }
        if self.seed.or(cli_seed).is_none() {
            errors.push("a seed is required (config `seed` or --seed)".into());
        }
        finish(errors)
    }
}

// ---------------------------------------------------------------- report --

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    pub inputs: Vec<PathBuf>,
}

impl ReportConfig {
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut errors = Vec::new();
        if self.inputs.is_empty() {
            errors.push("`inputs` must list at least one report file".into());
        }
        finish(errors)
    }
}
