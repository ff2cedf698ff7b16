//! Fixed-effect absorption by alternating projections.
//!
//! Entity and time means are removed in turns until the largest cell
//! adjustment falls below tolerance. On a balanced panel this reaches the
//! exact two-way demeaning `y_it - y_i. - y_.t + y_..` in two sweeps; on
//! unbalanced panels it converges linearly. Dummy-variable expansion is left
//! to test oracles.

use nalgebra::DMatrix;

use super::{distinct, DesignMatrix};
use crate::{EngineError, Result};

#[derive(Debug, Clone, Copy)]
pub struct WithinOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for WithinOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000 }
    }
}

/// Absorbed-parameter accounting from a within transform.
#[derive(Debug, Clone, Copy, Default)]
pub struct AbsorbInfo {
    pub entity_params: usize,
    pub time_params: usize,
    pub sweeps: usize,
}

impl AbsorbInfo {
    pub fn total(&self) -> usize {
        self.entity_params + self.time_params
    }
}

/// Demean outcome and regressors over the design's fixed-effect dimensions.
///
/// Returns the transformed design and the number of parameters the absorbed
/// effects stand in for (entities plus years minus the shared constant when
/// both dimensions are present).
pub fn within_transform(design: &DesignMatrix, opts: WithinOptions) -> Result<(DesignMatrix, AbsorbInfo)> {
    if opts.tol <= 0.0 {
        return Err(EngineError::InvalidSpec("within tolerance must be positive".into()));
    }
    let fe = design.fe;
    if !fe.any() {
        return Ok((design.clone(), AbsorbInfo::default()));
    }
    let n = design.n_rows();
    let k = design.n_cols();

    // Work on [X | y] so every column sees the same projection.
    let mut work = DMatrix::zeros(n, k + 1);
    work.view_mut((0, 0), (n, k)).copy_from(&design.x);
    work.view_mut((0, k), (n, 1)).copy_from(&design.y);

    let entity_groups = groups(&design.entities);
    let time_groups = groups(&design.times);

    let mut delta = f64::INFINITY;
    let mut sweeps = 0;
    while delta >= opts.tol {
        if sweeps >= opts.max_iter {
            return Err(EngineError::NoConvergence { sweeps, delta });
        }
        delta = 0.0;
        if fe.entity {
            delta = delta.max(demean_pass(&mut work, &entity_groups));
        }
        if fe.time {
            delta = delta.max(demean_pass(&mut work, &time_groups));
        }
        sweeps += 1;
    }

    let mut out = design.clone();
    out.x = work.view((0, 0), (n, k)).into_owned();
    out.y = work.column(k).into_owned();
    let n_entities = distinct(&design.entities);
    let n_times = distinct(&design.times);
    let info = match (fe.entity, fe.time) {
        (true, true) => AbsorbInfo { entity_params: n_entities, time_params: n_times - 1, sweeps },
        (true, false) => AbsorbInfo { entity_params: n_entities, time_params: 0, sweeps },
        (false, true) => AbsorbInfo { entity_params: 0, time_params: n_times, sweeps },
        (false, false) => unreachable!(),
    };
    Ok((out, info))
}

/// Row indices per group code.
fn groups(codes: &[usize]) -> Vec<Vec<usize>> {
    let max = codes.iter().copied().max().unwrap_or(0);
    let mut out = vec![Vec::new(); max + 1];
    for (i, &c) in codes.iter().enumerate() {
        out[c].push(i);
    }
    out.retain(|g| !g.is_empty());
    out
}

/// Subtract group means from every column; returns the largest adjustment.
fn demean_pass(work: &mut DMatrix<f64>, groups: &[Vec<usize>]) -> f64 {
    let k = work.ncols();
    let mut max_change: f64 = 0.0;
    for g in groups {
        let inv = 1.0 / g.len() as f64;
        for j in 0..k {
            let mean: f64 = g.iter().map(|&i| work[(i, j)]).sum::<f64>() * inv;
            if mean != 0.0 {
                max_change = max_change.max(mean.abs());
                for &i in g {
                    work[(i, j)] -= mean;
                }
            }
        }
    }
    max_change
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{CovarianceSpec, FeDims};
    use approx::assert_abs_diff_eq;

    fn design(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        entities: Vec<usize>,
        times: Vec<usize>,
        fe: FeDims,
    ) -> DesignMatrix {
        let names = (0..x.len()).map(|j| format!("x{j}")).collect();
        let clusters = entities.clone();
        DesignMatrix::from_columns(
            names,
            x,
            y,
            "y",
            entities,
            times,
            clusters,
            fe,
            CovarianceSpec::ClusterCr1,
        )
        .unwrap()
    }

    #[test]
    fn single_entity_is_one_shot_demeaning() {
        let d = design(
            vec![vec![1.0, 2.0, 6.0]],
            vec![10.0, 20.0, 30.0],
            vec![0, 0, 0],
            vec![0, 1, 2],
            FeDims { entity: true, time: false },
        );
        let (t, info) = within_transform(&d, WithinOptions::default()).unwrap();
        assert_eq!(info.entity_params, 1);
        assert_abs_diff_eq!(t.x[(0, 0)], 1.0 - 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.y[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn balanced_two_way_matches_closed_form() {
        // 3 entities x 3 years, arbitrary values
        let vals = [
            [1.0, 4.0, 9.0],
            [2.0, 8.0, 3.0],
            [7.0, 5.0, 6.0],
        ];
        let mut y = Vec::new();
        let mut ent = Vec::new();
        let mut tim = Vec::new();
        for (i, row) in vals.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                y.push(*v);
                ent.push(i);
                tim.push(t);
            }
        }
        let d = design(vec![y.clone()], y.clone(), ent.clone(), tim.clone(), FeDims::TWO_WAY);
        let (t, info) = within_transform(&d, WithinOptions::default()).unwrap();
        assert!(info.sweeps <= 2, "balanced panel took {} sweeps", info.sweeps);
        assert_eq!(info.total(), 3 + 3 - 1);

        let grand: f64 = y.iter().sum::<f64>() / 9.0;
        for (r, (yr, (&i, &tt))) in y.iter().zip(ent.iter().zip(tim.iter())).enumerate() {
            let ei: f64 = vals[i].iter().sum::<f64>() / 3.0;
            let tt_mean: f64 = vals.iter().map(|row| row[tt]).sum::<f64>() / 3.0;
            let expect = yr - ei - tt_mean + grand;
            assert_abs_diff_eq!(t.y[r], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn already_demeaned_is_unchanged() {
        // values already sum to zero within each entity and each year
        let y = vec![1.0, -1.0, -1.0, 1.0];
        let d = design(
            vec![y.clone()],
            y.clone(),
            vec![0, 0, 1, 1],
            vec![0, 1, 0, 1],
            FeDims::TWO_WAY,
        );
        let (t, _) = within_transform(&d, WithinOptions::default()).unwrap();
        for (r, expected) in y.iter().enumerate() {
            assert_abs_diff_eq!(t.y[r], *expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn non_convergence_reports_delta() {
        let d = design(
            vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]],
            vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0],
            vec![0, 0, 1, 1, 2, 2],
            vec![0, 1, 1, 2, 2, 0],
            FeDims::TWO_WAY,
        );
        let err = within_transform(&d, WithinOptions { tol: 1e-14, max_iter: 1 }).unwrap_err();
        assert!(matches!(err, EngineError::NoConvergence { .. }));
    }
}
