//! Least squares on a rank-revealing decomposition with iid, HC1, or CR1
//! covariance.
//!
//! The CR1 sandwich is
//! `V = c (X'X)^-1 [sum_g (X_g'u_g)(X_g'u_g)'] (X'X)^-1` with
//! `c = (G/(G-1)) ((N-1)/(N-K))`, and t-statistics are read against t(G-1).
//! K counts slope parameters plus absorbed fixed effects, except that
//! absorbed effects nested inside the clusters (entity effects under entity
//! clustering) are excluded from the correction; counting them would inflate
//! the covariance by roughly N/(N - G) on short panels. Residual degrees of
//! freedom for iid and HC1 inference always use the full parameter count.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::within::{within_transform, AbsorbInfo, WithinOptions};
use super::{CovarianceSpec, DesignMatrix, DofLedger, FitResult};
use crate::{EngineError, Result};

/// Relative singular-value cutoff for rank detection.
pub(crate) const RANK_TOL: f64 = 1e-10;

/// Fit the design by OLS, absorbing any declared fixed effects first.
pub fn fit_ols(design: &DesignMatrix) -> Result<FitResult> {
    let (d, absorb) = within_transform(design, WithinOptions::default())?;
    ols_core(&d, absorb)
}

/// OLS on an already-transformed design.
pub(crate) fn ols_core(design: &DesignMatrix, absorb: AbsorbInfo) -> Result<FitResult> {
    let solved = solve_ls(&design.x, &design.y, &design.col_names)?;
    let residuals = &design.y - &solved.fitted;
    let (cov, inference_dof, resid_dof) = covariance(
        &design.x,
        &solved.xtx_inv,
        &residuals,
        &design.clusters,
        design.covariance,
        design.n_cols() + absorb.total(),
        design.n_cols() + absorbed_outside_clusters(design, absorb),
    )?;
    Ok(assemble_fit(design, absorb, solved.beta, cov, residuals, inference_dof, resid_dof))
}

/// Absorbed parameters that are not constant within clusters and therefore
/// stay in the CR1 small-sample correction.
pub(crate) fn absorbed_outside_clusters(design: &DesignMatrix, absorb: AbsorbInfo) -> usize {
    let mut k = 0;
    if design.fe.entity && !nested_in_clusters(&design.entities, &design.clusters) {
        k += absorb.entity_params;
    }
    if design.fe.time && !nested_in_clusters(&design.times, &design.clusters) {
        k += absorb.time_params;
    }
    k
}

/// A grouping is nested in the clusters when every group sits inside a single
/// cluster.
fn nested_in_clusters(codes: &[usize], clusters: &[usize]) -> bool {
    let max = codes.iter().copied().max().unwrap_or(0);
    let mut seen: Vec<Option<usize>> = vec![None; max + 1];
    for (code, cluster) in codes.iter().zip(clusters) {
        match seen[*code] {
            None => seen[*code] = Some(*cluster),
            Some(c) if c != *cluster => return false,
            _ => {}
        }
    }
    true
}

pub(crate) struct Solved {
    pub beta: DVector<f64>,
    pub xtx_inv: DMatrix<f64>,
    pub fitted: DVector<f64>,
}

/// Solve least squares via SVD; rank deficiency is an error naming the
/// dependent columns.
pub(crate) fn solve_ls(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<Solved> {
    let k = x.ncols();
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if smax <= 0.0 {
        return Err(EngineError::RankDeficient(names.to_vec()));
    }
    let rank = svd.singular_values.iter().filter(|&&s| s > RANK_TOL * smax).count();
    if rank < k {
        return Err(EngineError::RankDeficient(dependent_columns(x, names, RANK_TOL)));
    }
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    // beta = V S^-1 U' y ; (X'X)^-1 = V S^-2 V'
    let uty = u.transpose() * y;
    let mut scaled = uty.clone();
    for i in 0..k {
        scaled[i] /= svd.singular_values[i];
    }
    let beta = vt.transpose() * scaled;
    let mut vs = vt.transpose();
    for j in 0..k {
        let s = svd.singular_values[j];
        for i in 0..k {
            vs[(i, j)] /= s;
        }
    }
    let xtx_inv = &vs * vs.transpose();
    let fitted = x * &beta;
    Ok(Solved { beta, xtx_inv, fitted })
}

/// Identify dependent columns by greedy pivoted orthogonalization: columns
/// whose residual norm collapses after projecting out the pivots.
fn dependent_columns(x: &DMatrix<f64>, names: &[String], tol: f64) -> Vec<String> {
    let k = x.ncols();
    let mut cols: Vec<DVector<f64>> = (0..k).map(|j| x.column(j).into_owned()).collect();
    let norms0: Vec<f64> = cols.iter().map(|c| c.norm()).collect();
    let max0 = norms0.iter().cloned().fold(0.0_f64, f64::max).max(1e-300);
    let mut remaining: Vec<usize> = (0..k).collect();
    let mut dependent = Vec::new();
    while !remaining.is_empty() {
        let (pos, &best) = remaining
            .iter()
            .enumerate()
            .max_by(|a, b| cols[*a.1].norm().total_cmp(&cols[*b.1].norm()))
            .expect("non-empty");
        if cols[best].norm() <= tol * max0 {
            // everything left is in the span of the pivots chosen so far
            dependent.extend(remaining.iter().map(|&j| names[j].clone()));
            break;
        }
        let q = cols[best].normalize();
        remaining.remove(pos);
        for &j in &remaining {
            let proj = q.dot(&cols[j]);
            cols[j] -= q.clone() * proj;
        }
    }
    dependent.sort();
    dependent
}

/// Sandwich (or iid) covariance plus the t reference dof. `k_total` is the
/// full parameter count (residual dof); `k_correction` drops cluster-nested
/// absorbed effects and feeds only the CR1 small-sample factor.
pub(crate) fn covariance(
    x: &DMatrix<f64>,
    xtx_inv: &DMatrix<f64>,
    residuals: &DVector<f64>,
    clusters: &[usize],
    spec: CovarianceSpec,
    k_total: usize,
    k_correction: usize,
) -> Result<(DMatrix<f64>, f64, f64)> {
    let n = x.nrows();
    let k = x.ncols();
    if n <= k_total {
        return Err(EngineError::InvalidSpec(format!(
            "insufficient residual degrees of freedom: N={n}, K={k_total}"
        )));
    }
    let resid_dof = (n - k_total) as f64;
    let corr_dof = (n - k_correction.min(n - 1)) as f64;
    let cov = match spec {
        CovarianceSpec::Iid => {
            let sigma2 = residuals.norm_squared() / resid_dof;
            xtx_inv * sigma2
        }
        CovarianceSpec::Hc1 => {
            let mut meat = DMatrix::zeros(k, k);
            for i in 0..n {
                let xi = x.row(i).transpose();
                meat += &xi * xi.transpose() * (residuals[i] * residuals[i]);
            }
            let correction = n as f64 / resid_dof;
            xtx_inv * meat * xtx_inv * correction
        }
        CovarianceSpec::ClusterCr1 => {
            let max_code = clusters.iter().copied().max().unwrap_or(0);
            let mut scores: Vec<Option<DVector<f64>>> = vec![None; max_code + 1];
            for i in 0..n {
                let s = scores[clusters[i]].get_or_insert_with(|| DVector::zeros(k));
                for j in 0..k {
                    s[j] += x[(i, j)] * residuals[i];
                }
            }
            let scores: Vec<DVector<f64>> = scores.into_iter().flatten().collect();
            let g = scores.len();
            if g < 2 {
                return Err(EngineError::TooFewClusters { needed: 2, found: g });
            }
            let mut meat = DMatrix::zeros(k, k);
            for s in &scores {
                meat += s * s.transpose();
            }
            let correction =
                (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / corr_dof);
            xtx_inv * meat * xtx_inv * correction
        }
    };
    // exact symmetry for downstream Cholesky/PSD checks
    let cov = (&cov + cov.transpose()) * 0.5;
    let inference_dof = match spec {
        CovarianceSpec::ClusterCr1 => {
            let g = super::distinct(clusters);
            (g - 1) as f64
        }
        _ => resid_dof,
    };
    Ok((cov, inference_dof, resid_dof))
}

pub(crate) fn assemble_fit(
    design: &DesignMatrix,
    absorb: AbsorbInfo,
    beta: DVector<f64>,
    cov: DMatrix<f64>,
    residuals: DVector<f64>,
    inference_dof: f64,
    resid_dof: f64,
) -> FitResult {
    let n = design.n_rows();
    let k = design.n_cols();
    let std_errors: Vec<f64> = (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let t_stats: Vec<f64> = (0..k).map(|j| beta[j] / std_errors[j]).collect();
    let t_dist = StudentsT::new(0.0, 1.0, inference_dof.max(1.0)).expect("valid dof");
    let p_values: Vec<f64> =
        t_stats.iter().map(|t| 2.0 * (1.0 - t_dist.cdf(t.abs()))).collect();

    let ssr = residuals.norm_squared();
    let ybar = design.y.mean();
    let sst: f64 = design.y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 };
    let f_statistic = if ssr > 0.0 {
        ((sst - ssr) / k as f64) / (ssr / resid_dof)
    } else {
        f64::INFINITY
    };

    FitResult::new(
        design.col_names.clone(),
        beta.iter().copied().collect(),
        cov,
        std_errors,
        t_stats,
        p_values,
        n,
        design.n_entities(),
        design.n_clusters(),
        r2,
        f_statistic,
        DofLedger {
            n_params: k,
            absorbed_entity: absorb.entity_params,
            absorbed_time: absorb.time_params,
            resid_dof,
        },
        residuals.iter().copied().collect(),
        design.covariance,
        inference_dof,
    )
}
