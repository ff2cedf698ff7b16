//! Variance inflation factors from auxiliary regressions.

use nalgebra::{DMatrix, DVector};

use super::DesignMatrix;
use crate::{EngineError, Result};

/// VIF_j = 1/(1 - R^2_j) where R^2_j comes from regressing column j on the
/// remaining columns plus an intercept. Perfect collinearity reports
/// `f64::INFINITY`.
pub fn compute_vif(design: &DesignMatrix) -> Result<Vec<(String, f64)>> {
    let k = design.n_cols();
    if k < 2 {
        return Err(EngineError::InvalidSpec("VIF needs at least 2 regressors".into()));
    }
    let n = design.n_rows();
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let target = design.x.column(j).into_owned();
        let mut aux = DMatrix::zeros(n, k); // intercept + other columns
        for i in 0..n {
            aux[(i, 0)] = 1.0;
        }
        let mut c = 1;
        for jj in 0..k {
            if jj != j {
                aux.set_column(c, &design.x.column(jj));
                c += 1;
            }
        }
        let r2 = projection_r2(&target, &aux);
        let vif = if 1.0 - r2 < 1e-12 { f64::INFINITY } else { 1.0 / (1.0 - r2) };
        out.push((design.col_names[j].clone(), vif));
    }
    Ok(out)
}

/// Centered R^2 of projecting `target` on `cols`; tolerates rank deficiency
/// via the SVD pseudo-inverse. A constant target counts as fully explained.
fn projection_r2(target: &DVector<f64>, cols: &DMatrix<f64>) -> f64 {
    let mean = target.mean();
    let sst: f64 = target.iter().map(|v| (v - mean) * (v - mean)).sum();
    if sst <= 0.0 {
        return 1.0;
    }
    let svd = cols.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let beta = svd.solve(target, 1e-12 * smax.max(1e-300)).expect("svd solve");
    let resid = target - cols * beta;
    (1.0 - resid.norm_squared() / sst).clamp(0.0, 1.0)
}
