//! Independent oracles for the integration suites: dummy-variable OLS,
//! a brute-force clustered sandwich, dense local-Moran evaluation, and a
//! Kolmogorov-Smirnov distance. These deliberately avoid the library's own
//! code paths (plain normal equations, explicit inverses, double loops).

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Random unbalanced two-regressor panel, kept connected by forcing every
/// entity into the first year.
pub fn random_connected_panel(
    seed: u64,
    max_entities: usize,
    max_years: usize,
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_ent = rng.gen_range(5..=max_entities);
    let n_years = rng.gen_range(3..=max_years);
    let mut x1 = Vec::new();
    let mut x2 = Vec::new();
    let mut y = Vec::new();
    let mut entities = Vec::new();
    let mut times = Vec::new();
    for e in 0..n_ent {
        let mu: f64 = rng.sample(StandardNormal);
        for t in 0..n_years {
            if t > 0 && rng.gen_bool(0.25) {
                continue;
            }
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let noise: f64 = rng.sample(StandardNormal);
            x1.push(a);
            x2.push(b);
            y.push(mu + 0.4 * t as f64 + 1.5 * a - 0.7 * b + 0.3 * noise);
            entities.push(e);
            times.push(t);
        }
    }
    (vec![x1, x2], y, entities, times)
}

/// OLS slope coefficients from explicit dummy-variable expansion: regress y on
/// [X | entity dummies | time dummies (first dropped)] and return the first
/// k coefficients. Solves the normal equations by LU.
pub fn dummy_ols_slopes(
    x_cols: &[Vec<f64>],
    y: &[f64],
    entities: &[usize],
    times: &[usize],
) -> Vec<f64> {
    let n = y.len();
    let k = x_cols.len();
    let n_ent = entities.iter().max().unwrap() + 1;
    let n_time = times.iter().max().unwrap() + 1;
    let total = k + n_ent + (n_time - 1);
    let mut x = DMatrix::zeros(n, total);
    for (j, col) in x_cols.iter().enumerate() {
        for i in 0..n {
            x[(i, j)] = col[i];
        }
    }
    for i in 0..n {
        x[(i, k + entities[i])] = 1.0;
        if times[i] > 0 {
            x[(i, k + n_ent + times[i] - 1)] = 1.0;
        }
    }
    let y = DVector::from_column_slice(y);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let beta = xtx.lu().solve(&xty).expect("dummy design is full rank");
    (0..k).map(|j| beta[j]).collect()
}

/// Brute-force CR1 clustered covariance: explicit (X'X)^-1, residuals, and a
/// double loop over within-cluster pairs for the meat.
pub fn brute_force_cr1(x_cols: &[Vec<f64>], y: &[f64], clusters: &[usize]) -> DMatrix<f64> {
    let n = y.len();
    let k = x_cols.len();
    let mut x = DMatrix::zeros(n, k);
    for (j, col) in x_cols.iter().enumerate() {
        for i in 0..n {
            x[(i, j)] = col[i];
        }
    }
    let yv = DVector::from_column_slice(y);
    let xtx_inv = (x.transpose() * &x).try_inverse().expect("invertible");
    let beta = &xtx_inv * x.transpose() * &yv;
    let resid = &yv - &x * &beta;

    let g = clusters.iter().collect::<std::collections::BTreeSet<_>>().len();
    let mut meat = DMatrix::zeros(k, k);
    for i in 0..n {
        for j in 0..n {
            if clusters[i] != clusters[j] {
                continue;
            }
            let scale = resid[i] * resid[j];
            for p in 0..k {
                for q in 0..k {
                    meat[(p, q)] += scale * x[(i, p)] * x[(j, q)];
                }
            }
        }
    }
    let gf = g as f64;
    let nf = n as f64;
    let kf = k as f64;
    let correction = (gf / (gf - 1.0)) * ((nf - 1.0) / (nf - kf));
    &xtx_inv * meat * &xtx_inv * correction
}

/// Dense double-loop local Moran on population-standardized values.
pub fn brute_force_local_moran(values: &[f64], dense_w: &[Vec<f64>]) -> Vec<f64> {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
    let z: Vec<f64> = values.iter().map(|v| (v - mean) / sd).collect();
    (0..n)
        .map(|i| {
            let lag: f64 = (0..n).map(|j| dense_w[i][j] * z[j]).sum();
            z[i] * lag
        })
        .collect()
}

/// Row-standardized dense queen/rook lattice weights, built independently of
/// the library's adjacency code.
pub fn dense_lattice_weights(rows: usize, cols: usize, queen: bool) -> Vec<Vec<f64>> {
    let n = rows * cols;
    let mut w = vec![vec![0.0; n]; n];
    for r in 0..rows as i64 {
        for c in 0..cols as i64 {
            let i = (r as usize) * cols + c as usize;
            let mut neigh = Vec::new();
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    if !queen && dr != 0 && dc != 0 {
                        continue;
                    }
                    let (rr, cc) = (r + dr, c + dc);
                    if rr >= 0 && cc >= 0 && rr < rows as i64 && cc < cols as i64 {
                        neigh.push((rr as usize) * cols + cc as usize);
                    }
                }
            }
            for &j in &neigh {
                w[i][j] = 1.0 / neigh.len() as f64;
            }
        }
    }
    w
}

/// Two-sided Kolmogorov-Smirnov distance of a sample against U(0,1).
pub fn ks_distance_uniform(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in s.iter().enumerate() {
        let cdf_hi = (i as f64 + 1.0) / n;
        let cdf_lo = i as f64 / n;
        d = d.max((cdf_hi - v).abs()).max((v - cdf_lo).abs());
    }
    d
}
