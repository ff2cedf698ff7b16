//! Structured run reports: one self-describing JSON document per command,
//! deterministic byte-for-byte across identical runs (sorted keys, no
//! wall-clock fields, config hashed with SHA-256).

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use panelkit::designs::{DidFit, EventStudyFit, InteractionFit, MarginalProfile, TripleDidFit};
use panelkit::estimator::{FitResult, TslsFit, WaldTest};

use crate::io::write_atomic;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    /// SHA-256 of the resolved config JSON.
    pub config_hash: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub command: String,
    pub provenance: Provenance,
    /// The fully resolved configuration, defaults included.
    pub config: Value,
    pub audit_tallies: BTreeMap<String, usize>,
    pub results: Value,
}

impl AnalysisReport {
    pub fn new(
        command: &str,
        config: &impl Serialize,
        seed: Option<u64>,
        audit_tallies: BTreeMap<String, usize>,
        results: &impl Serialize,
    ) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let config_hash = hex_digest(serde_json::to_string(&config)?.as_bytes());
        Ok(Self {
            command: command.to_string(),
            provenance: Provenance {
                tool_version: TOOL_VERSION.to_string(),
                config_hash,
                seed,
            },
            config,
            audit_tallies,
            results: serde_json::to_value(results)?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// JSON does not carry IEEE specials; non-finite statistics are reported as
/// absent with a marker flag where it matters (VIF).
fn fin(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: Option<f64>,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub coefficients: Vec<CoefficientRow>,
    pub covariance: Vec<Vec<f64>>,
    pub covariance_spec: String,
    pub n_obs: usize,
    pub n_entities: usize,
    pub n_clusters: usize,
    pub r_squared_within: f64,
    pub f_statistic: Option<f64>,
    pub inference_dof: f64,
    pub dof: DofSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DofSummary {
    pub n_params: usize,
    pub absorbed_entity: usize,
    pub absorbed_time: usize,
    pub resid_dof: f64,
}

impl FitSummary {
    pub fn from_fit(fit: &FitResult) -> Self {
        let k = fit.names().len();
        let coefficients = (0..k)
            .map(|j| CoefficientRow {
                name: fit.names()[j].clone(),
                estimate: fit.coefs()[j],
                std_error: fit.std_errors_all()[j],
                t_stat: fin(fit.t_stats_all()[j]),
                p_value: fit.p_values_all()[j],
            })
            .collect();
        let covariance = (0..k)
            .map(|a| (0..k).map(|b| fit.covariance()[(a, b)]).collect())
            .collect();
        Self {
            coefficients,
            covariance,
            covariance_spec: format!("{:?}", fit.covariance_spec),
            n_obs: fit.n_obs,
            n_entities: fit.n_entities,
            n_clusters: fit.n_clusters,
            r_squared_within: fit.r_squared_within,
            f_statistic: fin(fit.f_statistic),
            inference_dof: fit.inference_dof,
            dof: DofSummary {
                n_params: fit.dof.n_params,
                absorbed_entity: fit.dof.absorbed_entity,
                absorbed_time: fit.dof.absorbed_time,
                resid_dof: fit.dof.resid_dof,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaldSummary {
    pub statistic: f64,
    pub restrictions: usize,
    pub p_f: f64,
    pub p_chi2: f64,
    pub f_dof_denom: f64,
    /// Which form `p_value` reports (`f` by default).
    pub form: String,
    pub p_value: f64,
}

impl WaldSummary {
    pub fn from_wald(w: &WaldTest) -> Self {
        Self {
            statistic: w.statistic,
            restrictions: w.dof,
            p_f: w.p_f,
            p_chi2: w.p_chi2,
            f_dof_denom: w.f_dof_denom,
            form: format!("{:?}", w.form).to_lowercase(),
            p_value: w.p_value(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VifRow {
    pub name: String,
    pub vif: Option<f64>,
    pub infinite: bool,
}

pub fn vif_rows(vifs: &[(String, f64)]) -> Vec<VifRow> {
    vifs.iter()
        .map(|(name, v)| VifRow {
            name: name.clone(),
            vif: fin(*v),
            infinite: v.is_infinite(),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DidResults {
    pub fit: FitSummary,
    pub treatment_term: String,
    pub beta: f64,
    pub effect_percent: f64,
    pub dropped_rows: usize,
    pub vif: Vec<VifRow>,
    /// Descriptive tercile trajectory table, when requested.
    pub tercile_trajectories: Option<Vec<TercileRow>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TercileRow {
    pub year: i32,
    pub group: String,
    pub mean_outcome: f64,
    pub n: usize,
}

impl DidResults {
    pub fn new(did: &DidFit, vif: Vec<VifRow>) -> Self {
        Self {
            fit: FitSummary::from_fit(&did.fit),
            treatment_term: did.treatment_term.clone(),
            beta: did.beta,
            effect_percent: did.effect_percent,
            dropped_rows: did.dropped_rows,
            vif,
            tercile_trajectories: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventStudyResults {
    pub fit: FitSummary,
    pub series: Vec<EventPoint>,
    pub pretrend: WaldSummary,
    pub pre_terms: Vec<String>,
    pub dropped_rows: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventPoint {
    pub year: i32,
    pub coefficient: f64,
    pub std_error: f64,
    pub p_value: f64,
    pub is_base: bool,
    pub effect_percent: f64,
}

impl EventStudyResults {
    pub fn new(es: &EventStudyFit) -> Self {
        Self {
            fit: FitSummary::from_fit(&es.fit),
            series: es
                .series
                .iter()
                .map(|p| EventPoint {
                    year: p.year,
                    coefficient: p.coefficient,
                    std_error: p.std_error,
                    p_value: p.p_value,
                    is_base: p.is_base,
                    effect_percent: panelkit::designs::effect_size(p.coefficient),
                })
                .collect(),
            pretrend: WaldSummary::from_wald(&es.pretrend),
            pre_terms: es.pre_terms.clone(),
            dropped_rows: es.dropped_rows,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripleDidResults {
    pub fit: FitSummary,
    pub treatment_term: String,
    pub moderator_term: String,
    pub triple_term: String,
    pub beta3: f64,
    pub dropped_rows: usize,
}

impl TripleDidResults {
    pub fn new(t: &TripleDidFit) -> Self {
        Self {
            fit: FitSummary::from_fit(&t.fit),
            treatment_term: t.treatment_term.clone(),
            moderator_term: t.moderator_term.clone(),
            triple_term: t.triple_term.clone(),
            beta3: t.beta3,
            dropped_rows: t.dropped_rows,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InteractionResults {
    pub fit: FitSummary,
    pub exposure_term: String,
    pub moderator_term: String,
    pub interaction_term: String,
    pub vif: Vec<VifRow>,
    pub marginal_profile: ProfileSummary,
    pub dropped_rows: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub points: Vec<ProfilePoint>,
    pub zero_crossing: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub moderator: f64,
    pub effect: f64,
    pub std_error: f64,
}

impl InteractionResults {
    pub fn new(fit: &InteractionFit, vif: Vec<VifRow>, profile: &MarginalProfile) -> Self {
        Self {
            fit: FitSummary::from_fit(&fit.fit),
            exposure_term: fit.exposure_term.clone(),
            moderator_term: fit.moderator_term.clone(),
            interaction_term: fit.interaction_term.clone(),
            vif,
            marginal_profile: ProfileSummary {
                points: profile
                    .points
                    .iter()
                    .map(|p| ProfilePoint {
                        moderator: p.moderator,
                        effect: p.effect,
                        std_error: p.std_error,
                    })
                    .collect(),
                zero_crossing: profile.zero_crossing,
            },
            dropped_rows: fit.dropped_rows,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TslsResults {
    pub second_stage: FitSummary,
    pub first_stage: FitSummary,
    pub first_stage_f: f64,
    pub weak_instrument: bool,
    pub weak_instrument_threshold: f64,
}

impl TslsResults {
    pub fn new(t: &TslsFit) -> Self {
        Self {
            second_stage: FitSummary::from_fit(&t.second_stage),
            first_stage: FitSummary::from_fit(&t.first_stage),
            first_stage_f: t.first_stage_f,
            weak_instrument: t.weak_instrument,
            weak_instrument_threshold: panelkit::estimator::WEAK_INSTRUMENT_F_THRESHOLD,
        }
    }
}
