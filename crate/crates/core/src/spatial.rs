//! Spatial weights, global Moran's I, and local indicators of spatial
//! association (LISA) with conditional-permutation significance.
//!
//! Local statistics use population-standardized values
//! `zhat_i = (x_i - mean) / sigma_n`, so `sum_i I_i = S0 * I` holds exactly
//! against the global statistic `I = (n/S0) (z'Wz)/(z'z)`. Local pseudo
//! p-values follow the (count+1)/(B+1) convention and count two-sided
//! (`|I_b| >= |I_obs|`, ties extreme), which keeps the false-positive rate at
//! alpha on null fields; unit `i`'s permutations hold `zhat_i` fixed and
//! sample its neighbors from the remaining values (ChaCha8 stream `i + 1` of
//! the run seed, so per-unit parallelism never changes output). The global
//! permutation p is one-sided toward the observed side of the -1/(n-1) null
//! expectation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{EngineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contiguity {
    /// Neighbors share at least one boundary point.
    Queen,
    /// Neighbors share a boundary segment (two or more points).
    Rook,
}

/// Row-standardized sparse neighbor weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpatialWeights {
    units: Vec<String>,
    /// Per unit: (neighbor index, weight), row sums 1 unless isolated.
    neighbors: Vec<Vec<(usize, f64)>>,
    pub scheme: String,
    pub row_standardized: bool,
}

impl SpatialWeights {
    fn from_adjacency_sets(
        units: Vec<String>,
        mut adj: Vec<Vec<usize>>,
        scheme: String,
    ) -> Result<Self> {
        if units.len() < 2 {
            return Err(EngineError::InvalidSpec("need at least two spatial units".into()));
        }
        let mut neighbors = Vec::with_capacity(units.len());
        for (i, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            list.retain(|&j| j != i);
            let w = if list.is_empty() { 0.0 } else { 1.0 / list.len() as f64 };
            neighbors.push(list.iter().map(|&j| (j, w)).collect());
        }
        Ok(Self { units, neighbors, scheme, row_standardized: true })
    }

    /// Queen/rook contiguity from polygon boundary rings. Vertices are
    /// matched exactly, so rings must come from a topologically clean source.
    /// Isolated units are kept and flagged.
    pub fn from_polygons(
        polygons: &[(String, Vec<(f64, f64)>)],
        scheme: Contiguity,
    ) -> Result<Self> {
        use std::collections::HashMap;
        let n = polygons.len();
        let mut by_vertex: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
        for (i, (_, ring)) in polygons.iter().enumerate() {
            if ring.len() < 3 {
                return Err(EngineError::InvalidSpec(format!(
                    "polygon `{}` has fewer than 3 vertices",
                    polygons[i].0
                )));
            }
            for &(x, y) in ring {
                by_vertex.entry((x.to_bits(), y.to_bits())).or_default().push(i);
            }
        }
        // count shared vertices per pair
        let mut shared: HashMap<(usize, usize), usize> = HashMap::new();
        for ids in by_vertex.values() {
            let mut ids = ids.clone();
            ids.sort_unstable();
            ids.dedup();
            for a in 0..ids.len() {
                for b in (a + 1)..ids.len() {
                    *shared.entry((ids[a], ids[b])).or_insert(0) += 1;
                }
            }
        }
        let needed = match scheme {
            Contiguity::Queen => 1,
            Contiguity::Rook => 2,
        };
        let mut adj = vec![Vec::new(); n];
        for (&(a, b), &count) in &shared {
            if count >= needed {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let units = polygons.iter().map(|(id, _)| id.clone()).collect();
        let label = match scheme {
            Contiguity::Queen => "queen-contiguity",
            Contiguity::Rook => "rook-contiguity",
        };
        Self::from_adjacency_sets(units, adj, label.into())
    }

    /// k-nearest neighbors by centroid distance; distance ties break by
    /// unit-id order.
    pub fn k_nearest(centroids: &[(String, (f64, f64))], k: usize) -> Result<Self> {
        let n = centroids.len();
        if n < 2 {
            return Err(EngineError::InvalidSpec("need at least two spatial units".into()));
        }
        if k == 0 || k >= n {
            return Err(EngineError::InvalidSpec(format!("k={k} must satisfy 1 <= k < n={n}")));
        }
        {
            let mut seen = std::collections::HashSet::new();
            for (id, (x, y)) in centroids {
                if !seen.insert((x.to_bits(), y.to_bits())) {
                    return Err(EngineError::InvalidSpec(format!(
                        "duplicate centroid at unit `{id}`; centroids must be distinct"
                    )));
                }
            }
        }
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            let (_, (xi, yi)) = &centroids[i];
            let mut cand: Vec<(f64, &String, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let (id, (xj, yj)) = &centroids[j];
                    let d2 = (xi - xj) * (xi - xj) + (yi - yj) * (yi - yj);
                    (d2, id, j)
                })
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
            adj[i] = cand.into_iter().take(k).map(|(_, _, j)| j).collect();
        }
        let units = centroids.iter().map(|(id, _)| id.clone()).collect();
        Self::from_adjacency_sets(units, adj, format!("k-nearest(k={k})"))
    }

    /// Symmetric adjacency from an edge list over the given unit order.
    pub fn from_edges(units: Vec<String>, edges: &[(String, String)]) -> Result<Self> {
        let index: std::collections::HashMap<&str, usize> =
            units.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
        let mut adj = vec![Vec::new(); units.len()];
        for (a, b) in edges {
            let (&ia, &ib) = match (index.get(a.as_str()), index.get(b.as_str())) {
                (Some(x), Some(y)) => (x, y),
                _ => {
                    return Err(EngineError::InvalidSpec(format!(
                        "edge references unknown unit `{}`",
                        if index.contains_key(a.as_str()) { b } else { a }
                    )))
                }
            };
            if ia == ib {
                return Err(EngineError::InvalidSpec(format!("self-neighbor edge at `{a}`")));
            }
            adj[ia].push(ib);
            adj[ib].push(ia);
        }
        Self::from_adjacency_sets(units, adj, "edge-list".into())
    }

    /// Regular rows x cols lattice with unit ids `r{row}c{col}`.
    pub fn lattice(rows: usize, cols: usize, scheme: Contiguity) -> Result<Self> {
        if rows * cols < 2 {
            return Err(EngineError::InvalidSpec("lattice needs at least two cells".into()));
        }
        let idx = |r: usize, c: usize| r * cols + c;
        let mut adj = vec![Vec::new(); rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                let mut push = |rr: i64, cc: i64| {
                    if rr >= 0 && cc >= 0 && (rr as usize) < rows && (cc as usize) < cols {
                        adj[idx(r, c)].push(idx(rr as usize, cc as usize));
                    }
                };
                let (ri, ci) = (r as i64, c as i64);
                push(ri - 1, ci);
                push(ri + 1, ci);
                push(ri, ci - 1);
                push(ri, ci + 1);
                if matches!(scheme, Contiguity::Queen) {
                    push(ri - 1, ci - 1);
                    push(ri - 1, ci + 1);
                    push(ri + 1, ci - 1);
                    push(ri + 1, ci + 1);
                }
            }
        }
        let units = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| format!("r{r}c{c}")))
            .collect();
        let label = match scheme {
            Contiguity::Queen => "queen-lattice",
            Contiguity::Rook => "rook-lattice",
        };
        Self::from_adjacency_sets(units, adj, label.into())
    }

    pub fn n(&self) -> usize {
        self.units.len()
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn is_isolated(&self, i: usize) -> bool {
        self.neighbors[i].is_empty()
    }

    pub fn isolated_units(&self) -> Vec<&str> {
        (0..self.n()).filter(|&i| self.is_isolated(i)).map(|i| self.units[i].as_str()).collect()
    }

    /// Total weight mass S0.
    pub fn s0(&self) -> f64 {
        self.neighbors.iter().flatten().map(|(_, w)| w).sum()
    }

    pub fn lag(&self, z: &[f64], i: usize) -> f64 {
        self.neighbors[i].iter().map(|&(j, w)| w * z[j]).sum()
    }

    /// Connect isolated units to their `k` nearest centroids (one-directional;
    /// rows stay standardized). Returns the number of units repaired.
    pub fn knn_fallback(
        &mut self,
        centroids: &[(String, (f64, f64))],
        k: usize,
    ) -> Result<usize> {
        if k == 0 || k >= self.n() {
            return Err(EngineError::InvalidSpec(format!(
                "fallback k={k} must satisfy 1 <= k < n={}",
                self.n()
            )));
        }
        let mut pos = std::collections::HashMap::new();
        for (id, xy) in centroids {
            pos.insert(id.as_str(), *xy);
        }
        let coords: Vec<(f64, f64)> = self
            .units
            .iter()
            .map(|u| {
                pos.get(u.as_str()).copied().ok_or_else(|| {
                    EngineError::InvalidSpec(format!("no centroid for unit `{u}`"))
                })
            })
            .collect::<Result<_>>()?;
        let isolated: Vec<usize> = (0..self.n()).filter(|&i| self.is_isolated(i)).collect();
        for &i in &isolated {
            let (xi, yi) = coords[i];
            let mut cand: Vec<(f64, &String, usize)> = (0..self.n())
                .filter(|&j| j != i)
                .map(|j| {
                    let (xj, yj) = coords[j];
                    ((xi - xj) * (xi - xj) + (yi - yj) * (yi - yj), &self.units[j], j)
                })
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
            let w = 1.0 / k as f64;
            self.neighbors[i] = cand.into_iter().take(k).map(|(_, _, j)| (j, w)).collect();
            self.scheme = format!("{}+knn-fallback(k={k})", self.scheme);
        }
        Ok(isolated.len())
    }
}

/// Global Moran's I with permutation significance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MoranResult {
    pub i: f64,
    /// Null expectation -1/(n-1).
    pub expected: f64,
    /// One-sided pseudo p, (count+1)/(B+1), toward the observed side.
    pub pseudo_p: f64,
    pub n_permutations: usize,
}

/// `I = (n/S0) (z'Wz)/(z'z)` on mean-centered values.
pub fn global_moran(
    values: &[f64],
    weights: &SpatialWeights,
    n_permutations: usize,
    seed: u64,
) -> Result<MoranResult> {
    let stat = moran_stat(values, weights)?;
    let n = values.len();
    let expected = -1.0 / (n as f64 - 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let mut shuffled = values.to_vec();
    let mut count = 0usize;
    for _ in 0..n_permutations {
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            shuffled.swap(i, j);
        }
        let ib = moran_stat(&shuffled, weights)?;
        let extreme = if stat >= expected { ib >= stat } else { ib <= stat };
        if extreme {
            count += 1;
        }
    }
    Ok(MoranResult {
        i: stat,
        expected,
        pseudo_p: (count + 1) as f64 / (n_permutations + 1) as f64,
        n_permutations,
    })
}

fn moran_stat(values: &[f64], weights: &SpatialWeights) -> Result<f64> {
    let n = values.len();
    if n != weights.n() {
        return Err(EngineError::InvalidSpec(format!(
            "{n} values for {} spatial units",
            weights.n()
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let z: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let zz: f64 = z.iter().map(|v| v * v).sum();
    if zz <= 0.0 {
        return Err(EngineError::ZeroVariance { name: "values".into(), scope: "spatial".into() });
    }
    let zwz: f64 = (0..n).map(|i| z[i] * weights.lag(&z, i)).sum();
    Ok((n as f64 / weights.s0()) * zwz / zz)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LisaCategory {
    #[serde(rename = "HH")]
    HighHigh,
    #[serde(rename = "LL")]
    LowLow,
    #[serde(rename = "HL")]
    HighLow,
    #[serde(rename = "LH")]
    LowHigh,
    #[serde(rename = "ns")]
    NotSignificant,
    #[serde(rename = "isolated")]
    Isolated,
}

impl LisaCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            LisaCategory::HighHigh => "HH",
            LisaCategory::LowLow => "LL",
            LisaCategory::HighLow => "HL",
            LisaCategory::LowHigh => "LH",
            LisaCategory::NotSignificant => "ns",
            LisaCategory::Isolated => "isolated",
        }
    }
}

/// Sign-quadrant classification of a significant unit.
pub fn classify_quadrant(z_i: f64, lag_i: f64) -> LisaCategory {
    match (z_i > 0.0, lag_i > 0.0) {
        (true, true) => LisaCategory::HighHigh,
        (false, false) => LisaCategory::LowLow,
        (true, false) => LisaCategory::HighLow,
        (false, true) => LisaCategory::LowHigh,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LisaResult {
    pub units: Vec<String>,
    pub local_i: Vec<f64>,
    /// Two-sided (count+1)/(B+1); 1.0 for isolated units (no test).
    pub pseudo_p: Vec<f64>,
    pub category: Vec<LisaCategory>,
    /// Sign quadrant regardless of significance (for re-gating under a
    /// different threshold, e.g. false-discovery-rate control).
    pub quadrant: Vec<LisaCategory>,
    pub global_i: f64,
    pub expected_global: f64,
    pub n_permutations: usize,
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct LisaOptions {
    pub n_permutations: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for LisaOptions {
    fn default() -> Self {
        Self { n_permutations: 999, alpha: 0.05, seed: 0 }
    }
}

/// Local Moran `I_i = zhat_i * sum_j w_ij zhat_j` with conditional
/// permutation. Categories are assigned from the sign quadrant only when
/// `pseudo_p <= alpha`; isolated units are flagged and not tested.
pub fn lisa(values: &[f64], weights: &SpatialWeights, opts: LisaOptions) -> Result<LisaResult> {
    let n = values.len();
    if n != weights.n() {
        return Err(EngineError::InvalidSpec(format!(
            "{n} values for {} spatial units",
            weights.n()
        )));
    }
    if opts.n_permutations == 0 {
        return Err(EngineError::InvalidSpec("n_permutations must be positive".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var_pop = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var_pop <= 0.0 {
        return Err(EngineError::ZeroVariance { name: "values".into(), scope: "spatial".into() });
    }
    let sd = var_pop.sqrt();
    let zhat: Vec<f64> = values.iter().map(|v| (v - mean) / sd).collect();

    let global_i = moran_stat(values, weights)?;

    let per_unit: Vec<(f64, f64, LisaCategory, LisaCategory)> = (0..n)
        .into_par_iter()
        .map(|i| {
            if weights.is_isolated(i) {
                return (0.0, 1.0, LisaCategory::Isolated, LisaCategory::Isolated);
            }
            let lag = weights.lag(&zhat, i);
            let observed = zhat[i] * lag;
            let neighbor_weights: Vec<f64> =
                weights.neighbors(i).iter().map(|&(_, w)| w).collect();
            let k = neighbor_weights.len();

            let mut pool: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| zhat[j]).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64 + 1);
            let mut count = 0usize;
            let mut swaps: Vec<(usize, usize)> = Vec::with_capacity(k);
            for _ in 0..opts.n_permutations {
                for t in 0..k {
                    let j = rng.gen_range(t..pool.len());
                    pool.swap(t, j);
                    swaps.push((t, j));
                }
                let lag_b: f64 =
                    neighbor_weights.iter().zip(&pool).map(|(w, z)| w * z).sum();
                let ib = zhat[i] * lag_b;
                if ib.abs() >= observed.abs() {
                    count += 1;
                }
                while let Some((t, j)) = swaps.pop() {
                    pool.swap(t, j);
                }
            }
            let p = (count + 1) as f64 / (opts.n_permutations + 1) as f64;
            let quadrant = classify_quadrant(zhat[i], lag);
            let category =
                if p <= opts.alpha { quadrant } else { LisaCategory::NotSignificant };
            (observed, p, category, quadrant)
        })
        .collect();

    let mut local_i = Vec::with_capacity(n);
    let mut pseudo_p = Vec::with_capacity(n);
    let mut category = Vec::with_capacity(n);
    let mut quadrant = Vec::with_capacity(n);
    for (i_val, p, c, q) in per_unit {
        local_i.push(i_val);
        pseudo_p.push(p);
        category.push(c);
        quadrant.push(q);
    }
    Ok(LisaResult {
        units: weights.units().to_vec(),
        local_i,
        pseudo_p,
        category,
        quadrant,
        global_i,
        expected_global: -1.0 / (n as f64 - 1.0),
        n_permutations: opts.n_permutations,
        alpha: opts.alpha,
        seed: opts.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_by_two_queen_is_fully_connected() {
        let w = SpatialWeights::lattice(2, 2, Contiguity::Queen).unwrap();
        for i in 0..4 {
            assert_eq!(w.neighbors(i).len(), 3);
            for &(_, wt) in w.neighbors(i) {
                assert_abs_diff_eq!(wt, 1.0 / 3.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn three_by_three_rook_center_has_four() {
        let w = SpatialWeights::lattice(3, 3, Contiguity::Rook).unwrap();
        let center = w.units().iter().position(|u| u == "r1c1").unwrap();
        assert_eq!(w.neighbors(center).len(), 4);
        let corner = w.units().iter().position(|u| u == "r0c0").unwrap();
        assert_eq!(w.neighbors(corner).len(), 2);
    }

    #[test]
    fn polygons_queen_vs_rook_on_grid() {
        // 2x2 grid of unit squares: diagonal pairs share one corner point
        let square = |r: f64, c: f64| {
            vec![(c, r), (c + 1.0, r), (c + 1.0, r + 1.0), (c, r + 1.0)]
        };
        let polys = vec![
            ("a".to_string(), square(0.0, 0.0)),
            ("b".to_string(), square(0.0, 1.0)),
            ("c".to_string(), square(1.0, 0.0)),
            ("d".to_string(), square(1.0, 1.0)),
        ];
        let queen = SpatialWeights::from_polygons(&polys, Contiguity::Queen).unwrap();
        assert_eq!(queen.neighbors(0).len(), 3);
        let rook = SpatialWeights::from_polygons(&polys, Contiguity::Rook).unwrap();
        assert_eq!(rook.neighbors(0).len(), 2); // diagonal d drops out
    }

    #[test]
    fn knn_middle_point_prefers_nearer_endpoint() {
        let pts = vec![
            ("a".to_string(), (0.0, 0.0)),
            ("m".to_string(), (4.0, 0.0)),
            ("b".to_string(), (10.0, 0.0)),
        ];
        let w = SpatialWeights::k_nearest(&pts, 1).unwrap();
        let m = w.units().iter().position(|u| u == "m").unwrap();
        let a = w.units().iter().position(|u| u == "a").unwrap();
        assert_eq!(w.neighbors(m), &[(a, 1.0)]);
    }

    #[test]
    fn knn_distance_tie_breaks_by_unit_id() {
        let pts = vec![
            ("m".to_string(), (0.0, 0.0)),
            ("zeta".to_string(), (1.0, 0.0)),
            ("alpha".to_string(), (-1.0, 0.0)),
        ];
        let w = SpatialWeights::k_nearest(&pts, 1).unwrap();
        let m = w.units().iter().position(|u| u == "m").unwrap();
        let alpha = w.units().iter().position(|u| u == "alpha").unwrap();
        assert_eq!(w.neighbors(m), &[(alpha, 1.0)]);
    }

    #[test]
    fn isolated_unit_kept_and_flagged() {
        let units = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let edges = vec![("a".to_string(), "b".to_string())];
        let w = SpatialWeights::from_edges(units, &edges).unwrap();
        assert_eq!(w.isolated_units(), vec!["c"]);
    }

    #[test]
    fn knn_fallback_repairs_islands() {
        let units = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let edges = vec![("a".to_string(), "b".to_string())];
        let mut w = SpatialWeights::from_edges(units, &edges).unwrap();
        let centroids = vec![
            ("a".to_string(), (0.0, 0.0)),
            ("b".to_string(), (1.0, 0.0)),
            ("c".to_string(), (5.0, 0.0)),
        ];
        let repaired = w.knn_fallback(&centroids, 1).unwrap();
        assert_eq!(repaired, 1);
        assert!(w.isolated_units().is_empty());
        let c = w.units().iter().position(|u| u == "c").unwrap();
        let b = w.units().iter().position(|u| u == "b").unwrap();
        assert_eq!(w.neighbors(c), &[(b, 1.0)]);
    }

    #[test]
    fn checkerboard_moran_is_minus_one() {
        let w = SpatialWeights::lattice(4, 4, Contiguity::Rook).unwrap();
        let values: Vec<f64> =
            (0..16).map(|i| if (i / 4 + i % 4) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let m = global_moran(&values, &w, 99, 7).unwrap();
        assert_abs_diff_eq!(m.i, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.expected, -1.0 / 15.0, epsilon = 1e-15);
    }

    #[test]
    fn block_pattern_moran_positive() {
        let w = SpatialWeights::lattice(4, 4, Contiguity::Rook).unwrap();
        let values: Vec<f64> = (0..16).map(|i| if i % 4 < 2 { 2.0 } else { -1.0 }).collect();
        let m = global_moran(&values, &w, 199, 7).unwrap();
        assert!(m.i > 0.0, "I = {}", m.i);
        assert!(m.pseudo_p < 0.05, "p = {}", m.pseudo_p);
    }

    #[test]
    fn constant_field_is_error() {
        let w = SpatialWeights::lattice(3, 3, Contiguity::Queen).unwrap();
        assert!(matches!(
            global_moran(&[2.0; 9], &w, 9, 1),
            Err(EngineError::ZeroVariance { .. })
        ));
        assert!(lisa(&[2.0; 9], &w, LisaOptions::default()).is_err());
    }

    #[test]
    fn quadrant_signs() {
        assert_eq!(classify_quadrant(1.0, 1.0), LisaCategory::HighHigh);
        assert_eq!(classify_quadrant(-1.0, -1.0), LisaCategory::LowLow);
        // single high outlier in a low field: positive value, negative lag
        assert_eq!(classify_quadrant(2.0, -0.5), LisaCategory::HighLow);
        assert_eq!(classify_quadrant(-2.0, 0.5), LisaCategory::LowHigh);
    }

    #[test]
    fn lisa_sum_identity_and_determinism() {
        let w = SpatialWeights::lattice(5, 5, Contiguity::Queen).unwrap();
        let values: Vec<f64> = (0..25).map(|i| ((i * 37 + 11) % 17) as f64).collect();
        let opts = LisaOptions { n_permutations: 99, alpha: 0.05, seed: 3 };
        let r1 = lisa(&values, &w, opts).unwrap();
        let r2 = lisa(&values, &w, opts).unwrap();
        assert_eq!(r1.pseudo_p, r2.pseudo_p);
        let sum: f64 = r1.local_i.iter().sum();
        assert_abs_diff_eq!(sum, w.s0() * r1.global_i, epsilon = 1e-10);
        for p in &r1.pseudo_p {
            assert!(*p >= 1.0 / 100.0 && *p <= 1.0);
        }
    }

    #[test]
    fn lisa_isolated_unit_not_tested() {
        let units = vec!["a".to_string(), "b".to_string(), "c".to_string(), "d".to_string()];
        let edges = vec![
            ("a".to_string(), "b".to_string()),
            ("b".to_string(), "c".to_string()),
        ];
        let w = SpatialWeights::from_edges(units, &edges).unwrap();
        let r = lisa(&[1.0, 2.0, 3.0, 4.0], &w, LisaOptions { n_permutations: 99, ..Default::default() })
            .unwrap();
        assert_eq!(r.category[3], LisaCategory::Isolated);
        assert_eq!(r.local_i[3], 0.0);
        assert_eq!(r.pseudo_p[3], 1.0);
    }

    #[test]
    fn lisa_category_invariant_to_positive_affine_rescale() {
        let w = SpatialWeights::lattice(4, 4, Contiguity::Queen).unwrap();
        let values: Vec<f64> = (0..16).map(|i| if i < 8 { 3.0 + (i % 3) as f64 } else { (i % 2) as f64 }).collect();
        let opts = LisaOptions { n_permutations: 199, alpha: 0.1, seed: 5 };
        let base = lisa(&values, &w, opts).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| 2.5 * v + 7.0).collect();
        let resc = lisa(&scaled, &w, opts).unwrap();
        assert_eq!(base.category, resc.category);
    }
}
