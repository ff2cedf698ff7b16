//! Fisher randomization inference for the DID coefficient and placebo
//! shuffles for the interaction models.
//!
//! The DID scheme permutes the pre-determined exposure across entities,
//! holding each entity's permuted value fixed over its years; the interaction
//! scheme shuffles exposure across entity-year observations. Placebo draw `b`
//! uses ChaCha8 stream `b + 1` of the report seed, so runs are bit-identical
//! regardless of thread count. Demeaned copies of the columns that do not
//! depend on the treatment are computed once and reused; treatment-dependent
//! columns are rebuilt and demeaned per draw.
//!
//! The two-sided p-value follows the count/B convention (ties count as more
//! extreme); the (count+1)/(B+1) variant is available by flag.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::designs::{
    build_did_design, build_interaction_design, DidDesign, DidSpec, InteractionDesign,
    InteractionSpec,
};
use crate::estimator::{within_transform, DesignMatrix, FeDims, WithinOptions};
use crate::panel::PanelDataset;
use crate::{EngineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationScheme {
    /// Permute entity-level values across entities (DID randomization).
    CrossEntity,
    /// Shuffle values across entity-year observations (interaction placebo).
    CrossObservation,
}

/// How placebo assignments are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationDraws {
    /// `b` independent random permutations.
    Random { b: usize },
    /// Every permutation of the entity values, in lexicographic order.
    /// Only available for the cross-entity scheme on small panels.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub draws: PermutationDraws,
    pub seed: u64,
    /// Use (count+1)/(B+1) instead of count/B.
    pub add_one: bool,
}

impl PermutationPlan {
    pub fn random(b: usize, seed: u64) -> Self {
        Self { draws: PermutationDraws::Random { b }, seed, add_one: false }
    }

    pub fn exhaustive() -> Self {
        Self { draws: PermutationDraws::Exhaustive, seed: 0, add_one: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PermutationReport {
    pub observed_coefficient: f64,
    pub placebo_coefficients: Vec<f64>,
    pub p_two_sided: f64,
    /// Placebo draws that produced a coefficient.
    pub b: usize,
    pub b_requested: usize,
    pub refit_failures: usize,
    pub seed: u64,
    pub scheme: PermutationScheme,
    pub add_one: bool,
    /// Draws with |placebo| >= |observed|.
    pub tail_count: usize,
}

impl PermutationReport {
    fn assemble(
        observed: f64,
        placebos: Vec<std::result::Result<f64, String>>,
        plan: &PermutationPlan,
        scheme: PermutationScheme,
    ) -> Result<Self> {
        let b_requested = placebos.len();
        let mut placebo_coefficients = Vec::with_capacity(b_requested);
        let mut refit_failures = 0usize;
        for p in placebos {
            match p {
                Ok(c) => placebo_coefficients.push(c),
                Err(_) => refit_failures += 1,
            }
        }
        let b = placebo_coefficients.len();
        if b == 0 {
            return Err(EngineError::EmptyInput("every placebo refit failed"));
        }
        let tail_count =
            placebo_coefficients.iter().filter(|c| c.abs() >= observed.abs()).count();
        let p_two_sided = if plan.add_one {
            (tail_count + 1) as f64 / (b + 1) as f64
        } else {
            tail_count as f64 / b as f64
        };
        Ok(Self {
            observed_coefficient: observed,
            placebo_coefficients,
            p_two_sided,
            b,
            b_requested,
            refit_failures,
            seed: plan.seed,
            scheme,
            add_one: plan.add_one,
            tail_count,
        })
    }
}

fn draw_rng(seed: u64, draw: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw as u64 + 1);
    rng
}

fn fisher_yates(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// Lexicographic permutation sequence of 0..n (n! entries).
fn all_permutations(n: usize) -> Result<Vec<Vec<usize>>> {
    const CAP: usize = 50_000;
    let mut count: usize = 1;
    for i in 1..=n {
        count = count.saturating_mul(i);
        if count > CAP {
            return Err(EngineError::InvalidSpec(format!(
                "exhaustive enumeration of {n}! permutations exceeds the cap of {CAP}"
            )));
        }
    }
    let mut out = Vec::with_capacity(count);
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).expect("successor exists");
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    Ok(out)
}

/// Pieces shared by every placebo refit: the within-transformed fixed block
/// and outcome, plus grouping codes for demeaning the rebuilt columns.
struct RefitContext {
    fixed: DMatrix<f64>,
    y: nalgebra::DVector<f64>,
    entities: Vec<usize>,
    times: Vec<usize>,
    fe: FeDims,
}

impl RefitContext {
    fn new(design: &DesignMatrix, rebuilt: Vec<usize>) -> Result<Self> {
        let (t, _) = within_transform(design, WithinOptions::default())?;
        let mut fixed = t.x.clone();
        let mut removed = rebuilt;
        removed.sort_unstable();
        for &idx in removed.iter().rev() {
            fixed = fixed.remove_column(idx);
        }
        Ok(Self {
            fixed,
            y: t.y,
            entities: design.entities.clone(),
            times: design.times.clone(),
            fe: design.fe,
        })
    }

    /// Demean the rebuilt raw columns and solve the least-squares problem;
    /// returns the coefficients of the rebuilt columns (in `rebuilt` order).
    fn refit(&self, raw_columns: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.y.len();
        let r = raw_columns.len();
        let mut work = DMatrix::zeros(n, r);
        for (j, col) in raw_columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                work[(i, j)] = *v;
            }
        }
        let names: Vec<String> = (0..r).map(|j| format!("rb{j}")).collect();
        let probe = DesignMatrix {
            col_names: names.clone(),
            x: work,
            y: self.y.clone(),
            outcome_name: "y".into(),
            entities: self.entities.clone(),
            times: self.times.clone(),
            clusters: self.entities.clone(),
            fe: self.fe,
            covariance: crate::estimator::CovarianceSpec::ClusterCr1,
        };
        let (t, _) = within_transform(&probe, WithinOptions::default())?;

        // assemble [rebuilt | fixed] and solve
        let k = r + self.fixed.ncols();
        let mut x = DMatrix::zeros(n, k);
        x.view_mut((0, 0), (n, r)).copy_from(&t.x);
        x.view_mut((0, r), (n, self.fixed.ncols())).copy_from(&self.fixed);
        let mut all_names: Vec<String> = names;
        all_names.extend((0..self.fixed.ncols()).map(|j| format!("fx{j}")));
        let solved = crate::estimator::solve_ls(&x, &self.y, &all_names)?;
        Ok((0..r).map(|j| solved.beta[j]).collect())
    }
}

/// Fisher randomization inference on the DID treatment coefficient.
///
/// Each draw permutes the pre-determined exposure across entities, rebuilds
/// `treatment x post`, refits the full specification with confounder controls,
/// and records the placebo coefficient.
pub fn randomization_inference(
    panel: &PanelDataset,
    spec: &DidSpec,
    plan: &PermutationPlan,
) -> Result<PermutationReport> {
    let built = build_did_design(panel, spec)?;
    randomization_inference_on(&built, plan)
}

/// Run the DID randomization on an already-built design.
pub fn randomization_inference_on(
    built: &DidDesign,
    plan: &PermutationPlan,
) -> Result<PermutationReport> {
    let treat_idx = built.design.col_index(&built.treatment_term)?;
    let ctx = RefitContext::new(&built.design, vec![treat_idx])?;
    let n_entities = built.treatment_by_entity.len();

    let treat_column = |perm: &[usize]| -> Vec<f64> {
        built
            .design
            .entities
            .iter()
            .zip(&built.post)
            .map(|(&e, &p)| built.treatment_by_entity[perm[e]] * f64::from(p as u8))
            .collect()
    };
    // observed coefficient through the same refit route as the draws, so an
    // identity-permutation draw ties exactly
    let identity: Vec<usize> = (0..n_entities).collect();
    let observed = ctx.refit(&[treat_column(&identity)])?[0];

    let placebos: Vec<std::result::Result<f64, String>> = match plan.draws {
        PermutationDraws::Random { b } => {
            if b == 0 {
                return Err(EngineError::InvalidSpec("B must be positive".into()));
            }
            (0..b)
                .into_par_iter()
                .map(|draw| {
                    let mut rng = draw_rng(plan.seed, draw);
                    let perm = fisher_yates(n_entities, &mut rng);
                    ctx.refit(&[treat_column(&perm)])
                        .map(|c| c[0])
                        .map_err(|e| e.to_string())
                })
                .collect()
        }
        PermutationDraws::Exhaustive => all_permutations(n_entities)?
            .par_iter()
            .map(|perm| ctx.refit(&[treat_column(perm)]).map(|c| c[0]).map_err(|e| e.to_string()))
            .collect(),
    };
    PermutationReport::assemble(observed, placebos, plan, PermutationScheme::CrossEntity)
}

/// Placebo test for the interaction coefficient: shuffle exposure across
/// entity-year observations, rebuild the exposure and interaction columns,
/// refit, and collect the placebo interaction coefficients.
pub fn placebo_interaction_test(
    panel: &PanelDataset,
    spec: &InteractionSpec,
    plan: &PermutationPlan,
) -> Result<PermutationReport> {
    let built = build_interaction_design(panel, spec)?;
    placebo_interaction_test_on(&built, plan)
}

pub fn placebo_interaction_test_on(
    built: &InteractionDesign,
    plan: &PermutationPlan,
) -> Result<PermutationReport> {
    let b = match plan.draws {
        PermutationDraws::Random { b } if b > 0 => b,
        PermutationDraws::Random { .. } => {
            return Err(EngineError::InvalidSpec("B must be positive".into()))
        }
        PermutationDraws::Exhaustive => {
            return Err(EngineError::InvalidSpec(
                "exhaustive enumeration is only supported for the cross-entity scheme".into(),
            ))
        }
    };
    let g_idx = built.design.col_index(&built.exposure_term)?;
    let gm_idx = built.design.col_index(&built.interaction_term)?;
    let ctx = RefitContext::new(&built.design, vec![g_idx, gm_idx])?;
    let n = built.exposure_values.len();

    let columns = |perm: &[usize]| -> [Vec<f64>; 2] {
        let g: Vec<f64> = perm.iter().map(|&i| built.exposure_values[i]).collect();
        let gm: Vec<f64> =
            g.iter().zip(&built.moderator_values).map(|(a, m)| a * m).collect();
        [g, gm]
    };
    let identity: Vec<usize> = (0..n).collect();
    // interaction coefficient is the second rebuilt column
    let observed = ctx.refit(&columns(&identity))?[1];

    let placebos: Vec<std::result::Result<f64, String>> = (0..b)
        .into_par_iter()
        .map(|draw| {
            let mut rng = draw_rng(plan.seed, draw);
            let perm = fisher_yates(n, &mut rng);
            ctx.refit(&columns(&perm)).map(|c| c[1]).map_err(|e| e.to_string())
        })
        .collect();
    PermutationReport::assemble(observed, placebos, plan, PermutationScheme::CrossObservation)
}
