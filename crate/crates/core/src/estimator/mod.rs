//! Core regression numerics: two-way fixed-effects absorption, OLS on a
//! rank-revealing decomposition, cluster-robust covariance, Wald tests, 2SLS,
//! and variance-inflation diagnostics.

mod ols;
mod tsls;
mod vif;
mod wald;
mod within;

pub use ols::fit_ols;
pub(crate) use ols::solve_ls;
pub use tsls::{fit_2sls, TslsFit, WEAK_INSTRUMENT_F_THRESHOLD};
pub use vif::compute_vif;
pub use wald::{wald_joint, WaldForm, WaldTest};
pub use within::{within_transform, AbsorbInfo, WithinOptions};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{EngineError, Result};

/// Which sandwich the fit uses, and therefore which reference distribution
/// its t-statistics are read against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceSpec {
    /// Homoskedastic sigma^2 (X'X)^-1, t(N-K).
    Iid,
    /// Heteroskedasticity-robust sandwich with N/(N-K) correction, t(N-K).
    Hc1,
    /// Cluster-robust CR1 sandwich with (G/(G-1))((N-1)/(N-K)) correction,
    /// t(G-1).
    #[default]
    ClusterCr1,
}

/// Fixed-effect dimensions absorbed by the within transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeDims {
    pub entity: bool,
    pub time: bool,
}

impl FeDims {
    pub const NONE: FeDims = FeDims { entity: false, time: false };
    pub const TWO_WAY: FeDims = FeDims { entity: true, time: true };

    pub fn any(self) -> bool {
        self.entity || self.time
    }
}

/// A fully materialized regression problem: named regressor columns, outcome,
/// group codes for fixed effects and clustering.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub col_names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub outcome_name: String,
    /// Entity code per row (absorption and entity counting).
    pub entities: Vec<usize>,
    /// Time code per row.
    pub times: Vec<usize>,
    /// Cluster code per row (CR1 grouping).
    pub clusters: Vec<usize>,
    pub fe: FeDims,
    pub covariance: CovarianceSpec,
}

impl DesignMatrix {
    /// Assemble a design from named columns. Rows must be complete (no
    /// missing values) and names unique.
    #[allow(clippy::too_many_arguments)]
    pub fn from_columns(
        col_names: Vec<String>,
        columns: Vec<Vec<f64>>,
        y: Vec<f64>,
        outcome_name: impl Into<String>,
        entities: Vec<usize>,
        times: Vec<usize>,
        clusters: Vec<usize>,
        fe: FeDims,
        covariance: CovarianceSpec,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(EngineError::EmptyInput("design matrix has no rows"));
        }
        if col_names.len() != columns.len() {
            return Err(EngineError::InvalidSpec("column names and columns differ in length".into()));
        }
        for (i, a) in col_names.iter().enumerate() {
            if col_names[i + 1..].contains(a) {
                return Err(EngineError::InvalidSpec(format!("duplicate column name `{a}`")));
            }
        }
        for (name, col) in col_names.iter().zip(&columns) {
            if col.len() != n {
                return Err(EngineError::InvalidSpec(format!(
                    "column `{name}` has {} rows, outcome has {n}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(EngineError::InvalidSpec(format!("column `{name}` contains non-finite values")));
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(EngineError::InvalidSpec("outcome contains non-finite values".into()));
        }
        if entities.len() != n || times.len() != n || clusters.len() != n {
            return Err(EngineError::InvalidSpec("group code vectors must match row count".into()));
        }
        let k = columns.len();
        let mut x = DMatrix::zeros(n, k);
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                x[(i, j)] = *v;
            }
        }
        Ok(Self {
            col_names,
            x,
            y: DVector::from_vec(y),
            outcome_name: outcome_name.into(),
            entities,
            times,
            clusters,
            fe,
            covariance,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn col_index(&self, name: &str) -> Result<usize> {
        self.col_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| EngineError::UnknownVariable(name.to_string()))
    }

    pub fn n_entities(&self) -> usize {
        distinct(&self.entities)
    }

    pub fn n_clusters(&self) -> usize {
        distinct(&self.clusters)
    }
}

pub(crate) fn distinct(codes: &[usize]) -> usize {
    let mut seen: Vec<usize> = codes.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Degrees-of-freedom bookkeeping for a fit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DofLedger {
    /// Estimated slope parameters (columns of the design).
    pub n_params: usize,
    /// Parameters absorbed by entity demeaning.
    pub absorbed_entity: usize,
    /// Parameters absorbed by time demeaning.
    pub absorbed_time: usize,
    /// Residual degrees of freedom N - K with K = params + absorbed.
    pub resid_dof: f64,
}

/// Regression output: coefficients, robust covariance, and fit diagnostics.
#[derive(Debug, Clone)]
pub struct FitResult {
    names: Vec<String>,
    coef: Vec<f64>,
    cov: DMatrix<f64>,
    std_errors: Vec<f64>,
    t_stats: Vec<f64>,
    p_values: Vec<f64>,
    pub n_obs: usize,
    pub n_entities: usize,
    pub n_clusters: usize,
    pub r_squared_within: f64,
    pub f_statistic: f64,
    pub dof: DofLedger,
    pub residuals: Vec<f64>,
    pub covariance_spec: CovarianceSpec,
    /// Degrees of freedom of the t reference distribution (G-1 under CR1,
    /// N-K otherwise).
    pub inference_dof: f64,
}

impl FitResult {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        names: Vec<String>,
        coef: Vec<f64>,
        cov: DMatrix<f64>,
        std_errors: Vec<f64>,
        t_stats: Vec<f64>,
        p_values: Vec<f64>,
        n_obs: usize,
        n_entities: usize,
        n_clusters: usize,
        r_squared_within: f64,
        f_statistic: f64,
        dof: DofLedger,
        residuals: Vec<f64>,
        covariance_spec: CovarianceSpec,
        inference_dof: f64,
    ) -> Self {
        Self {
            names,
            coef,
            cov,
            std_errors,
            t_stats,
            p_values,
            n_obs,
            n_entities,
            n_clusters,
            r_squared_within,
            f_statistic,
            dof,
            residuals,
            covariance_spec,
            inference_dof,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| EngineError::UnknownCoefficient(name.to_string()))
    }

    pub fn coef(&self, name: &str) -> Result<f64> {
        Ok(self.coef[self.index(name)?])
    }

    pub fn se(&self, name: &str) -> Result<f64> {
        Ok(self.std_errors[self.index(name)?])
    }

    pub fn t_stat(&self, name: &str) -> Result<f64> {
        Ok(self.t_stats[self.index(name)?])
    }

    pub fn p_value(&self, name: &str) -> Result<f64> {
        Ok(self.p_values[self.index(name)?])
    }

    pub fn coefs(&self) -> &[f64] {
        &self.coef
    }

    pub fn std_errors_all(&self) -> &[f64] {
        &self.std_errors
    }

    pub fn t_stats_all(&self) -> &[f64] {
        &self.t_stats
    }

    pub fn p_values_all(&self) -> &[f64] {
        &self.p_values
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn vcov(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.cov[(self.index(a)?, self.index(b)?)])
    }

    /// Two-sided confidence interval from the fit's t reference distribution.
    pub fn confidence_interval(&self, name: &str, level: f64) -> Result<(f64, f64)> {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        let i = self.index(name)?;
        let t = StudentsT::new(0.0, 1.0, self.inference_dof)
            .map_err(|e| EngineError::Numerical(format!("t distribution: {e}")))?;
        let q = t.inverse_cdf(0.5 + level / 2.0);
        Ok((self.coef[i] - q * self.std_errors[i], self.coef[i] + q * self.std_errors[i]))
    }
}
