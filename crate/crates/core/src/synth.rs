//! Synthetic data-generating processes with planted ground truth.
//!
//! Every generator is driven by counter-based ChaCha8 streams so fixtures are
//! bit-reproducible and independent of evaluation order: stream 0 of the run
//! seed carries global draws (year effects), stream `i + 1` carries entity
//! `i`'s draws in a documented fixed order, and spatial fields use stream 0
//! in row-major cell order. Regenerating with the same `(spec, seed)` yields
//! identical bytes.
//!
//! The DID panel plants the outcome as entity and year effects, the
//! `beta GenAI_i Post_t` treatment term, `gamma_s Z_si Post_t` shock terms, a
//! linear pre-trend `pretrend GenAI_i (t - base)` before the base year,
//! moderator terms `beta2 M_i Post_t` and `beta3 GenAI_i M_i Post_t`, and
//! controls. Errors are phase-block equicorrelated: within an entity,
//! pre-period errors share one common component and post-period errors
//! another, so the dependence survives the within transform and clustered
//! standard errors have something real to correct for.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bartik::{LongDifference, LongDifferenceSet};
use crate::panel::{AuditLog, PanelDataset, VariableMeta};
use crate::{EngineError, Result};

/// Variable names emitted by [`gen_did_panel`].
pub mod vars {
    pub const LN_WAGE: &str = "ln_wage";
    pub const GENAI_2018: &str = "genai_2018";
    pub const CONF_TECHREG: &str = "conf_techreg";
    pub const CONF_COVID: &str = "conf_covid";
    pub const CONF_REALESTATE: &str = "conf_realestate";
    pub const MODERATOR_2018: &str = "moderator_2018";
    pub const CTRL_A: &str = "ctrl_a";
    pub const CTRL_B: &str = "ctrl_b";
    pub const GENAI_STD: &str = "genai_std";
    pub const MODERATOR_STD: &str = "moderator_std";
}

/// Planted parameters for the panel and IV generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_entities: usize,
    /// Inclusive year range; must span at least four years.
    pub years: (i32, i32),
    pub post_years: Vec<i32>,
    pub base_year: i32,
    /// DID treatment effect on `GenAI x Post` (also the structural
    /// coefficient in the IV design).
    pub true_beta_did: f64,
    /// Linear pre-trend loading on `GenAI x (t - base)` before the base year.
    pub pretrend_slope: f64,
    /// Loadings on the three shock exposures interacted with post.
    pub confounder_loadings: [f64; 3],
    /// Moderator main effect (x post) in the triple-DID panel.
    pub moderator_loading: f64,
    /// Triple-interaction / mechanism-interaction coefficient.
    pub interaction_beta3: f64,
    /// Exposure and moderator main effects in the mechanism panel.
    pub fe_beta1: f64,
    pub fe_beta2: f64,
    /// First-stage strength in the IV design.
    pub first_stage_pi: f64,
    /// Correlation between first-stage and structural errors (endogeneity).
    pub endogeneity_corr: f64,
    /// Within-entity error correlation inside each phase block, in [0, 1).
    pub cluster_rho: f64,
    pub noise_sd: f64,
    pub control_loadings: [f64; 2],
    pub seed: u64,
}

impl SyntheticSpec {
    /// Paper-scale default: 500 entities over 2020-2024 with beta = -0.15.
    pub fn new(seed: u64) -> Self {
        Self {
            n_entities: 500,
            years: (2020, 2024),
            post_years: vec![2023, 2024],
            base_year: 2022,
            true_beta_did: -0.15,
            pretrend_slope: 0.0,
            confounder_loadings: [0.2, -0.1, 0.1],
            moderator_loading: 0.1,
            interaction_beta3: 0.0,
            fe_beta1: 0.8,
            fe_beta2: 1.2,
            first_stage_pi: 1.0,
            endogeneity_corr: 0.6,
            cluster_rho: 0.5,
            noise_sd: 0.25,
            control_loadings: [0.5, -0.3],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_entities < 2 {
            return Err(EngineError::InvalidSpec("need at least 2 entities".into()));
        }
        let span = self.years.1 - self.years.0 + 1;
        if span < 4 {
            return Err(EngineError::InvalidSpec(format!("year span {span} < 4")));
        }
        if self.noise_sd <= 0.0 {
            return Err(EngineError::InvalidSpec("noise_sd must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.cluster_rho) {
            return Err(EngineError::InvalidSpec("cluster_rho must lie in [0, 1)".into()));
        }
        let params = [
            self.true_beta_did,
            self.pretrend_slope,
            self.moderator_loading,
            self.interaction_beta3,
            self.fe_beta1,
            self.fe_beta2,
            self.first_stage_pi,
            self.endogeneity_corr,
        ];
        if params.iter().any(|p| !p.is_finite())
            || self.confounder_loadings.iter().any(|p| !p.is_finite())
            || self.control_loadings.iter().any(|p| !p.is_finite())
        {
            return Err(EngineError::InvalidSpec("planted parameters must be finite".into()));
        }
        for y in &self.post_years {
            if *y < self.years.0 || *y > self.years.1 {
                return Err(EngineError::InvalidSpec(format!("post year {y} outside years")));
            }
        }
        if self.post_years.is_empty() || self.post_years.contains(&self.base_year) {
            return Err(EngineError::InvalidSpec("post years empty or contain base year".into()));
        }
        Ok(())
    }
}

/// Planted parameters echoed alongside the realized draws.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub spec: SyntheticSpec,
    pub entities: Vec<String>,
    /// Standardized exposure per entity.
    pub genai: Vec<f64>,
    /// Standardized shock exposures per entity.
    pub confounders: Vec<[f64; 3]>,
    /// Standardized moderator per entity.
    pub moderator: Vec<f64>,
}

fn entity_rng(seed: u64, entity: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(entity as u64 + 1);
    rng
}

fn global_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

/// Standardize in place with the sample SD.
fn standardize(vals: &mut [f64]) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    for v in vals.iter_mut() {
        *v = (*v - mean) / sd;
    }
}

fn entity_name(i: usize, n: usize) -> String {
    let width = (n.max(2) - 1).to_string().len();
    format!("e{i:0width$}")
}

/// Generate the pre-determined DID panel.
pub fn gen_did_panel(spec: &SyntheticSpec) -> Result<(PanelDataset, SyntheticTruth)> {
    spec.validate()?;
    let n = spec.n_entities;
    let years: Vec<i32> = (spec.years.0..=spec.years.1).collect();

    // Entity-level draws, one stream per entity. Draw order per entity:
    // genai, 3 confounders, moderator, mu, u_pre, u_post.
    let mut genai = vec![0.0; n];
    let mut conf = vec![[0.0; 3]; n];
    let mut moderator = vec![0.0; n];
    let mut mu = vec![0.0; n];
    let mut u_pre = vec![0.0; n];
    let mut u_post = vec![0.0; n];
    let mut entity_rngs: Vec<ChaCha8Rng> = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = entity_rng(spec.seed, i);
        genai[i] = rng.sample(StandardNormal);
        for c in conf[i].iter_mut() {
            *c = rng.sample(StandardNormal);
        }
        moderator[i] = rng.sample(StandardNormal);
        mu[i] = rng.sample(StandardNormal);
        u_pre[i] = rng.sample(StandardNormal);
        u_post[i] = rng.sample(StandardNormal);
        entity_rngs.push(rng);
    }
    standardize(&mut genai);
    standardize(&mut moderator);
    for s in 0..3 {
        let mut col: Vec<f64> = conf.iter().map(|c| c[s]).collect();
        standardize(&mut col);
        for (i, v) in col.into_iter().enumerate() {
            conf[i][s] = v;
        }
    }

    let mut grng = global_rng(spec.seed);
    let lambda: Vec<f64> = years.iter().map(|_| grng.sample(StandardNormal)).collect();

    let mut panel = PanelDataset::new(vec![
        vars::LN_WAGE,
        vars::GENAI_2018,
        vars::CONF_TECHREG,
        vars::CONF_COVID,
        vars::CONF_REALESTATE,
        vars::MODERATOR_2018,
        vars::CTRL_A,
        vars::CTRL_B,
    ])?
    .with_window(spec.years.0, spec.years.1);

    let rho = spec.cluster_rho;
    let entities: Vec<String> = (0..n).map(|i| entity_name(i, n)).collect();
    for i in 0..n {
        let rng = &mut entity_rngs[i];
        for (ti, &t) in years.iter().enumerate() {
            let post = spec.post_years.contains(&t);
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            let shared = if post { u_post[i] } else { u_pre[i] };
            let eps = spec.noise_sd * (rho.sqrt() * shared + (1.0 - rho).sqrt() * e);
            let post_f = f64::from(post as u8);
            let pre_trend = if t < spec.base_year {
                spec.pretrend_slope * genai[i] * f64::from(t - spec.base_year)
            } else {
                0.0
            };
            let ln_wage = mu[i]
                + lambda[ti]
                + spec.true_beta_did * genai[i] * post_f
                + spec.confounder_loadings[0] * conf[i][0] * post_f
                + spec.confounder_loadings[1] * conf[i][1] * post_f
                + spec.confounder_loadings[2] * conf[i][2] * post_f
                + pre_trend
                + spec.moderator_loading * moderator[i] * post_f
                + spec.interaction_beta3 * genai[i] * moderator[i] * post_f
                + spec.control_loadings[0] * a
                + spec.control_loadings[1] * b
                + eps;
            panel.push(
                entities[i].clone(),
                t,
                vec![
                    Some(ln_wage),
                    Some(genai[i]),
                    Some(conf[i][0]),
                    Some(conf[i][1]),
                    Some(conf[i][2]),
                    Some(moderator[i]),
                    Some(a),
                    Some(b),
                ],
            )?;
        }
    }
    for v in [vars::GENAI_2018, vars::CONF_TECHREG, vars::CONF_COVID, vars::CONF_REALESTATE, vars::MODERATOR_2018] {
        panel.set_meta(v, VariableMeta { units: None, standardized: true })?;
    }

    let truth = SyntheticTruth {
        spec: spec.clone(),
        entities,
        genai,
        confounders: conf,
        moderator,
    };
    Ok((panel, truth))
}

/// Generate the mechanism panel with time-varying standardized exposure and
/// moderator: `lnW = beta1 G + beta2 M + beta3 G M + delta' x + FE + eps`.
pub fn gen_interaction_panel(spec: &SyntheticSpec) -> Result<(PanelDataset, SyntheticTruth)> {
    spec.validate()?;
    let n = spec.n_entities;
    let years: Vec<i32> = (spec.years.0..=spec.years.1).collect();
    let nt = years.len();

    let mut mu = vec![0.0; n];
    let mut g = vec![vec![0.0; nt]; n];
    let mut m = vec![vec![0.0; nt]; n];
    let mut ctrl = vec![vec![(0.0, 0.0); nt]; n];
    let mut eps = vec![vec![0.0; nt]; n];
    let rho = spec.cluster_rho;
    for i in 0..n {
        let mut rng = entity_rng(spec.seed, i);
        mu[i] = rng.sample(StandardNormal);
        let shared: f64 = rng.sample(StandardNormal);
        for t in 0..nt {
            g[i][t] = rng.sample(StandardNormal);
            m[i][t] = rng.sample(StandardNormal);
            ctrl[i][t] = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let e: f64 = rng.sample(StandardNormal);
            eps[i][t] = spec.noise_sd * (rho.sqrt() * shared + (1.0 - rho).sqrt() * e);
        }
    }
    // pooled standardization of exposure and moderator
    let mut flat_g: Vec<f64> = g.iter().flatten().copied().collect();
    let mut flat_m: Vec<f64> = m.iter().flatten().copied().collect();
    standardize(&mut flat_g);
    standardize(&mut flat_m);
    for i in 0..n {
        for t in 0..nt {
            g[i][t] = flat_g[i * nt + t];
            m[i][t] = flat_m[i * nt + t];
        }
    }

    let mut grng = global_rng(spec.seed);
    let lambda: Vec<f64> = years.iter().map(|_| grng.sample(StandardNormal)).collect();

    let mut panel = PanelDataset::new(vec![
        vars::LN_WAGE,
        vars::GENAI_STD,
        vars::MODERATOR_STD,
        vars::CTRL_A,
        vars::CTRL_B,
    ])?
    .with_window(spec.years.0, spec.years.1);
    let entities: Vec<String> = (0..n).map(|i| entity_name(i, n)).collect();
    for i in 0..n {
        for (ti, &t) in years.iter().enumerate() {
            let (a, b) = ctrl[i][ti];
            let ln_wage = mu[i]
                + lambda[ti]
                + spec.fe_beta1 * g[i][ti]
                + spec.fe_beta2 * m[i][ti]
                + spec.interaction_beta3 * g[i][ti] * m[i][ti]
                + spec.control_loadings[0] * a
                + spec.control_loadings[1] * b
                + eps[i][ti];
            panel.push(
                entities[i].clone(),
                t,
                vec![Some(ln_wage), Some(g[i][ti]), Some(m[i][ti]), Some(a), Some(b)],
            )?;
        }
    }
    for v in [vars::GENAI_STD, vars::MODERATOR_STD] {
        panel.set_meta(v, VariableMeta { units: None, standardized: true })?;
    }
    let truth = SyntheticTruth {
        spec: spec.clone(),
        entities,
        genai: flat_g,
        confounders: vec![],
        moderator: flat_m,
    };
    Ok((panel, truth))
}

/// Generate the cross-sectional IV design. Draw order per entity: bartik, v,
/// w, control; the structural error is
/// `e = corr * v + sqrt(1 - corr^2) * w` so OLS is biased while the
/// instrument stays clean.
pub fn gen_iv_cross_section(spec: &SyntheticSpec) -> Result<(LongDifferenceSet, SyntheticTruth)> {
    spec.validate()?;
    if !(-1.0..=1.0).contains(&spec.endogeneity_corr) {
        return Err(EngineError::InvalidSpec("endogeneity_corr outside [-1, 1]".into()));
    }
    let n = spec.n_entities;
    let corr = spec.endogeneity_corr;
    let mut rows = Vec::with_capacity(n);
    let entities: Vec<String> = (0..n).map(|i| entity_name(i, n)).collect();
    let mut bartiks = Vec::with_capacity(n);
    for (i, name) in entities.iter().enumerate() {
        let mut rng = entity_rng(spec.seed, i);
        let bartik: f64 = rng.sample(StandardNormal);
        let v: f64 = rng.sample(StandardNormal);
        let w: f64 = rng.sample(StandardNormal);
        let ctrl: f64 = rng.sample(StandardNormal);
        let e = spec.noise_sd * (corr * v + (1.0 - corr * corr).sqrt() * w);
        let d_exposure = spec.first_stage_pi * bartik + v;
        let d_outcome = spec.true_beta_did * d_exposure + spec.control_loadings[0] * ctrl + e;
        bartiks.push(bartik);
        rows.push(LongDifference {
            neighborhood_id: name.clone(),
            d_outcome,
            d_exposure,
            d_controls: vec![ctrl],
            confounders: vec![],
            bartik,
        });
    }
    let set = LongDifferenceSet {
        control_names: vec!["ctrl_a".into()],
        confounder_names: vec![],
        rows,
        audit: AuditLog::new(),
    };
    let truth = SyntheticTruth {
        spec: spec.clone(),
        entities,
        genai: bartiks,
        confounders: vec![],
        moderator: vec![],
    };
    Ok((set, truth))
}

/// A rectangular block of planted signal on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub row0: usize,
    pub col0: usize,
    pub height: usize,
    pub width: usize,
    pub mean: f64,
}

/// Lattice field with the intended cluster mask (+1 inside high blocks, -1
/// inside low blocks, 0 in the background).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpatialField {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub mask: Vec<i8>,
}

impl SpatialField {
    pub fn index(&self, r: usize, c: usize) -> usize {
        r * self.cols + c
    }
}

/// Block means plus iid noise on a rows x cols lattice (row-major, stream 0).
pub fn gen_spatial_field(
    rows: usize,
    cols: usize,
    blocks: &[Block],
    noise_sd: f64,
    seed: u64,
) -> Result<SpatialField> {
    if rows < 2 || cols < 2 {
        return Err(EngineError::InvalidSpec("lattice must be at least 2x2".into()));
    }
    if noise_sd < 0.0 {
        return Err(EngineError::InvalidSpec("noise_sd must be non-negative".into()));
    }
    if blocks.is_empty() && noise_sd == 0.0 {
        return Err(EngineError::InvalidSpec(
            "constant field requested (no blocks, zero noise); local association is undefined on it".into(),
        ));
    }
    for b in blocks {
        if b.row0 + b.height > rows || b.col0 + b.width > cols {
            return Err(EngineError::InvalidSpec("block extends outside the lattice".into()));
        }
    }
    let mut rng = global_rng(seed);
    let mut values = vec![0.0; rows * cols];
    let mut mask = vec![0i8; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let idx = r * cols + c;
            for b in blocks {
                if r >= b.row0 && r < b.row0 + b.height && c >= b.col0 && c < b.col0 + b.width {
                    values[idx] += b.mean;
                    mask[idx] = if b.mean >= 0.0 { 1 } else { -1 };
                }
            }
            if noise_sd > 0.0 {
                values[idx] += noise_sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    Ok(SpatialField { rows, cols, values, mask })
}
