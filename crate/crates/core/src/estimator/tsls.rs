//! Two-stage least squares with a single endogenous regressor and a single
//! excluded instrument.
//!
//! Stage one regresses the endogenous column on the instrument and the shared
//! exogenous controls; stage two swaps the endogenous column for its fitted
//! values. The second-stage covariance is corrected to use structural
//! residuals (actual endogenous values, second-stage coefficients).

use super::ols::{absorbed_outside_clusters, covariance, ols_core, solve_ls};
use super::within::{within_transform, WithinOptions};
use super::{DesignMatrix, FitResult};
use crate::{EngineError, Result};

/// First-stage F below this flags a weak instrument.
pub const WEAK_INSTRUMENT_F_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct TslsFit {
    pub second_stage: FitResult,
    pub first_stage: FitResult,
    /// Robust F on the excluded instrument (squared first-stage t).
    pub first_stage_f: f64,
    pub weak_instrument: bool,
}

/// Fit 2SLS on a design whose columns include the endogenous regressor, the
/// excluded instrument, and exogenous controls shared across stages.
pub fn fit_2sls(design: &DesignMatrix, endogenous: &str, instrument: &str) -> Result<TslsFit> {
    if endogenous == instrument {
        return Err(EngineError::InvalidSpec(
            "endogenous and instrument must be distinct columns".into(),
        ));
    }
    let endog_idx = design.col_index(endogenous)?;
    let inst_idx = design.col_index(instrument)?;

    let (d, absorb) = within_transform(design, WithinOptions::default())?;

    // Stage 1: endogenous ~ instrument + controls (data already transformed;
    // the fe flags stay set so the CR1 correction sees the absorbed dims).
    let mut stage1 = d.clone();
    stage1.y = d.x.column(endog_idx).into_owned();
    stage1.outcome_name = endogenous.to_string();
    stage1.x = d.x.clone().remove_column(endog_idx);
    stage1.col_names = without(&d.col_names, endog_idx);
    let first_stage = ols_core(&stage1, absorb)?;

    let t_inst = first_stage.t_stat(instrument)?;
    let first_stage_f = t_inst * t_inst;

    // Stage 2: replace the endogenous column with stage-1 fitted values.
    let fitted = &stage1.x
        * nalgebra::DVector::from_vec(first_stage.coefs().to_vec());
    let mut stage2 = d.clone();
    stage2.x.set_column(endog_idx, &fitted);
    stage2.x = stage2.x.remove_column(inst_idx);
    stage2.col_names = without(&d.col_names, inst_idx);
    let solved = solve_ls(&stage2.x, &stage2.y, &stage2.col_names)?;

    // Structural residuals: actual endogenous values, second-stage betas.
    let x_structural = d.x.clone().remove_column(inst_idx);
    let residuals = &d.y - &x_structural * &solved.beta;
    let k_total = stage2.x.ncols() + absorb.total();
    let k_correction = stage2.x.ncols() + absorbed_outside_clusters(design, absorb);
    let (cov, inference_dof, resid_dof) = covariance(
        &stage2.x,
        &solved.xtx_inv,
        &residuals,
        &d.clusters,
        d.covariance,
        k_total,
        k_correction,
    )?;
    let second_stage =
        super::ols::assemble_fit(&stage2, absorb, solved.beta, cov, residuals, inference_dof, resid_dof);

    Ok(TslsFit {
        second_stage,
        first_stage,
        first_stage_f,
        weak_instrument: first_stage_f < WEAK_INSTRUMENT_F_THRESHOLD,
    })
}

fn without(names: &[String], idx: usize) -> Vec<String> {
    names
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != idx)
        .map(|(_, n)| n.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{fit_ols, CovarianceSpec, FeDims};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn cross_section(names: Vec<&str>, cols: Vec<Vec<f64>>, y: Vec<f64>) -> DesignMatrix {
        let n = y.len();
        DesignMatrix::from_columns(
            names.into_iter().map(String::from).collect(),
            cols,
            y,
            "y",
            (0..n).collect(),
            vec![0; n],
            (0..n).collect(),
            FeDims::NONE,
            CovarianceSpec::Hc1,
        )
        .unwrap()
    }

    #[test]
    fn instrument_equal_to_regressor_reproduces_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 60;
        let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> =
            x.iter().map(|&v| 1.5 * v + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
        let ones = vec![1.0; n];

        let iv = cross_section(
            vec!["const", "x", "z"],
            vec![ones.clone(), x.clone(), x.clone()],
            y.clone(),
        );
        let tsls = fit_2sls(&iv, "x", "z").unwrap();

        let ols_design = cross_section(vec!["const", "x"], vec![ones, x], y);
        let ols = fit_ols(&ols_design).unwrap();

        assert_abs_diff_eq!(
            tsls.second_stage.coef("x").unwrap(),
            ols.coef("x").unwrap(),
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            tsls.second_stage.coef("const").unwrap(),
            ols.coef("const").unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn planted_iv_recovers_coefficient() {
        // y = 2 x + e, x = 1.2 z + v, corr(v, e) strong
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4000;
        let mut z = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let zi: f64 = rng.sample(StandardNormal);
            let vi: f64 = rng.sample(StandardNormal);
            let ei = 0.8 * vi + 0.3 * rng.sample::<f64, _>(StandardNormal);
            let xi = 1.2 * zi + vi;
            z.push(zi);
            x.push(xi);
            y.push(2.0 * xi + ei);
        }
        let ones = vec![1.0; n];
        let d = cross_section(vec!["const", "x", "z"], vec![ones, x, z], y);
        let tsls = fit_2sls(&d, "x", "z").unwrap();
        let b = tsls.second_stage.coef("x").unwrap();
        let se = tsls.second_stage.se("x").unwrap();
        assert!((b - 2.0).abs() < 3.0 * se, "b={b}, se={se}");
        assert!(tsls.first_stage_f > WEAK_INSTRUMENT_F_THRESHOLD);
        assert!(!tsls.weak_instrument);
    }

    #[test]
    fn weak_instrument_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 200;
        let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        // instrument carries (almost) no signal
        let x: Vec<f64> = z
            .iter()
            .map(|&zi| 0.001 * zi + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let y: Vec<f64> =
            x.iter().map(|&xi| xi + rng.sample::<f64, _>(StandardNormal)).collect();
        let ones = vec![1.0; n];
        let d = cross_section(vec!["const", "x", "z"], vec![ones, x, z], y);
        let tsls = fit_2sls(&d, "x", "z").unwrap();
        assert!(tsls.weak_instrument, "F={}", tsls.first_stage_f);
    }
}
