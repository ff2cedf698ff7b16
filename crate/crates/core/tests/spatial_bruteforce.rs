//! LISA and Moran checks against dense double-loop oracles and planted
//! spatial fields.

mod common;

use panelkit::spatial::{global_moran, lisa, Contiguity, LisaCategory, LisaOptions, SpatialWeights};
use panelkit::synth::{gen_spatial_field, Block};

#[test]
fn local_moran_matches_double_loop_on_6x6() {
    let field = gen_spatial_field(6, 6, &[], 1.0, 4242).unwrap();
    let weights = SpatialWeights::lattice(6, 6, Contiguity::Queen).unwrap();
    let result = lisa(&field.values, &weights, LisaOptions { n_permutations: 99, ..Default::default() })
        .unwrap();

    let dense = common::dense_lattice_weights(6, 6, true);
    let oracle = common::brute_force_local_moran(&field.values, &dense);
    for (got, want) in result.local_i.iter().zip(&oracle) {
        assert!((got - want).abs() < 1e-12, "local I {got} vs oracle {want}");
    }

    // sum identity against the global statistic
    let sum: f64 = result.local_i.iter().sum();
    assert!((sum - weights.s0() * result.global_i).abs() < 1e-10);
}

#[test]
fn planted_high_and_low_blocks_recover_hh_ll_interiors() {
    let blocks = [
        Block { row0: 0, col0: 0, height: 3, width: 3, mean: 3.0 },
        Block { row0: 3, col0: 3, height: 3, width: 3, mean: -3.0 },
    ];
    let field = gen_spatial_field(6, 6, &blocks, 0.0, 1).unwrap();
    let weights = SpatialWeights::lattice(6, 6, Contiguity::Queen).unwrap();
    let result = lisa(
        &field.values,
        &weights,
        LisaOptions { n_permutations: 999, alpha: 0.05, seed: 8 },
    )
    .unwrap();
    // block interiors (all neighbors inside the block) classify exactly
    let hh = field.index(1, 1);
    let ll = field.index(4, 4);
    assert_eq!(result.category[hh], LisaCategory::HighHigh);
    assert_eq!(result.category[ll], LisaCategory::LowLow);
    assert_eq!(field.mask[hh], 1);
    assert_eq!(field.mask[ll], -1);
}

#[test]
fn single_high_block_zero_noise_interior_is_hh() {
    let blocks = [Block { row0: 0, col0: 0, height: 3, width: 3, mean: 3.0 }];
    let field = gen_spatial_field(6, 6, &blocks, 0.0, 2).unwrap();
    let weights = SpatialWeights::lattice(6, 6, Contiguity::Queen).unwrap();
    let result = lisa(
        &field.values,
        &weights,
        LisaOptions { n_permutations: 999, alpha: 0.05, seed: 12 },
    )
    .unwrap();
    assert_eq!(result.category[field.index(1, 1)], LisaCategory::HighHigh);
}

#[test]
fn high_block_embedded_in_low_field() {
    // high block in a mildly noisy low field: block interior reads HH and the
    // far background interior reads LL; the background's low values are a
    // thin majority of the field so its significance emerges at alpha 0.1
    let blocks = [Block { row0: 0, col0: 0, height: 3, width: 3, mean: 3.0 }];
    let field = gen_spatial_field(6, 6, &blocks, 0.05, 2).unwrap();
    let weights = SpatialWeights::lattice(6, 6, Contiguity::Queen).unwrap();
    let result = lisa(
        &field.values,
        &weights,
        LisaOptions { n_permutations: 999, alpha: 0.1, seed: 12 },
    )
    .unwrap();
    assert_eq!(result.category[field.index(1, 1)], LisaCategory::HighHigh);
    assert_eq!(result.category[field.index(4, 4)], LisaCategory::LowLow);
}

#[test]
fn pure_noise_significance_rate_near_alpha() {
    let alpha = 0.05;
    let mut significant = 0usize;
    let mut total = 0usize;
    for seed in 0..20 {
        let field = gen_spatial_field(8, 8, &[], 1.0, 10_000 + seed).unwrap();
        let weights = SpatialWeights::lattice(8, 8, Contiguity::Queen).unwrap();
        let result = lisa(
            &field.values,
            &weights,
            LisaOptions { n_permutations: 999, alpha, seed: 500 + seed },
        )
        .unwrap();
        for c in &result.category {
            total += 1;
            if !matches!(c, LisaCategory::NotSignificant | LisaCategory::Isolated) {
                significant += 1;
            }
        }
    }
    let rate = significant as f64 / total as f64;
    assert!((0.03..=0.07).contains(&rate), "false-positive rate {rate}");
}

#[test]
fn checkerboard_global_moran_brute_force() {
    let weights = SpatialWeights::lattice(4, 4, Contiguity::Rook).unwrap();
    let values: Vec<f64> =
        (0..16).map(|i| if (i / 4 + i % 4) % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let m = global_moran(&values, &weights, 999, 3).unwrap();
    assert!((m.i - -1.0).abs() < 1e-12);

    // oracle: dense evaluation of (n/S0) z'Wz / z'z
    let dense = common::dense_lattice_weights(4, 4, false);
    let mean = values.iter().sum::<f64>() / 16.0;
    let z: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let s0: f64 = dense.iter().flatten().sum();
    let zwz: f64 = (0..16)
        .map(|i| z[i] * (0..16).map(|j| dense[i][j] * z[j]).sum::<f64>())
        .sum();
    let zz: f64 = z.iter().map(|v| v * v).sum();
    let oracle = (16.0 / s0) * zwz / zz;
    assert!((m.i - oracle).abs() < 1e-12);
}

#[test]
fn block_pattern_positive_autocorrelation_significant() {
    let blocks = [Block { row0: 0, col0: 0, height: 4, width: 8, mean: 2.0 }];
    let field = gen_spatial_field(8, 8, &blocks, 0.3, 77).unwrap();
    let weights = SpatialWeights::lattice(8, 8, Contiguity::Queen).unwrap();
    let m = global_moran(&field.values, &weights, 999, 5).unwrap();
    assert!(m.i > 0.3, "I = {}", m.i);
    assert!(m.pseudo_p <= 0.001, "p = {}", m.pseudo_p);
    assert!((m.expected - (-1.0 / 63.0)).abs() < 1e-15);
}
