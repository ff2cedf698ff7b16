//! Joint Wald tests on coefficient subsets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use super::FitResult;
use crate::{EngineError, Result};

/// Reference distribution for the joint test. The F form divides the Wald
/// statistic by q and reads it against F(q, dof); it is the default because
/// the fits carry finite-cluster t inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaldForm {
    #[default]
    F,
    Chi2,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WaldTest {
    /// W = b' V^-1 b on the restricted subvector.
    pub statistic: f64,
    /// Number of restrictions q.
    pub dof: usize,
    pub p_chi2: f64,
    pub p_f: f64,
    /// Denominator dof of the F form (the fit's inference dof).
    pub f_dof_denom: f64,
    pub form: WaldForm,
}

impl WaldTest {
    pub fn p_value(&self) -> f64 {
        match self.form {
            WaldForm::F => self.p_f,
            WaldForm::Chi2 => self.p_chi2,
        }
    }

    pub fn with_form(mut self, form: WaldForm) -> Self {
        self.form = form;
        self
    }
}

/// Test the joint null that every named coefficient is zero.
pub fn wald_joint<S: AsRef<str>>(fit: &FitResult, names: &[S]) -> Result<WaldTest> {
    if names.is_empty() {
        return Err(EngineError::InvalidSpec("wald test over empty coefficient set".into()));
    }
    let idx: Vec<usize> = names
        .iter()
        .map(|n| fit.index(n.as_ref()))
        .collect::<Result<_>>()?;
    let q = idx.len();
    let b = DVector::from_iterator(q, idx.iter().map(|&i| fit.coefs()[i]));
    let mut v = DMatrix::zeros(q, q);
    for (a, &ia) in idx.iter().enumerate() {
        for (c, &ic) in idx.iter().enumerate() {
            v[(a, c)] = fit.covariance()[(ia, ic)];
        }
    }
    let solved = v
        .clone()
        .lu()
        .solve(&b)
        .filter(|w| w.iter().all(|x| x.is_finite()))
        .ok_or(EngineError::SingularSubcovariance)?;
    // guard against a numerically singular LU slipping through
    let back = &v * &solved;
    let scale = b.norm().max(1e-300);
    if (back - &b).norm() > 1e-6 * scale {
        return Err(EngineError::SingularSubcovariance);
    }
    let statistic = b.dot(&solved).max(0.0);

    let chi2 = ChiSquared::new(q as f64)
        .map_err(|e| EngineError::Numerical(format!("chi2 distribution: {e}")))?;
    let p_chi2 = 1.0 - chi2.cdf(statistic);
    let f_dof_denom = fit.inference_dof.max(1.0);
    let f_dist = FisherSnedecor::new(q as f64, f_dof_denom)
        .map_err(|e| EngineError::Numerical(format!("F distribution: {e}")))?;
    let p_f = 1.0 - f_dist.cdf(statistic / q as f64);

    Ok(WaldTest { statistic, dof: q, p_chi2, p_f, f_dof_denom, form: WaldForm::F })
}
