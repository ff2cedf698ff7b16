//! Randomization-inference checks: exact enumeration against a brute-force
//! oracle, determinism, and null-calibration of the p-value distribution.

mod common;

use itertools::Itertools;
use panelkit::designs::{fit_did, DidSpec, InteractionSpec};
use panelkit::panel::{PanelDataset, VariableMeta};
use panelkit::permutation::{
    placebo_interaction_test, randomization_inference, PermutationPlan,
};
use panelkit::synth::{gen_did_panel, gen_interaction_panel, vars, SyntheticSpec};

/// 3-entity toy panel: treatment values {-1, 0, 1} (already standardized),
/// 4 years, arbitrary outcomes.
fn toy_panel(treat: &[f64; 3]) -> (PanelDataset, DidSpec) {
    let outcomes = [
        [1.3, 0.9, 2.1, 2.8],
        [0.4, 0.6, 1.0, 0.2],
        [2.2, 1.8, 1.1, 1.9],
    ];
    let mut panel = PanelDataset::new(vec!["ln_wage", "treat"]).unwrap();
    for (i, entity) in ["a", "b", "c"].iter().enumerate() {
        for (t, year) in (2020..=2023).enumerate() {
            panel.push(*entity, year, vec![Some(outcomes[i][t]), Some(treat[i])]).unwrap();
        }
    }
    panel.set_meta("treat", VariableMeta { units: None, standardized: true }).unwrap();
    let spec = DidSpec {
        treatment_year: 2018,
        window: (2020, 2023),
        post_years: vec![2022, 2023],
        base_year: 2021,
        ..DidSpec::new("ln_wage", "treat")
    };
    (panel, spec)
}

#[test]
fn exhaustive_toy_matches_full_enumeration_oracle() {
    let base = [-1.0, 0.0, 1.0];
    let (panel, spec) = toy_panel(&base);
    let report = randomization_inference(&panel, &spec, &PermutationPlan::exhaustive()).unwrap();
    assert_eq!(report.b, 6);

    // oracle: refit the full DID for every permutation of the entity values
    let observed = fit_did(&panel, &spec).unwrap().beta;
    let mut oracle_betas = Vec::new();
    for perm in (0..3).permutations(3) {
        let permuted = [base[perm[0]], base[perm[1]], base[perm[2]]];
        let (p, s) = toy_panel(&permuted);
        oracle_betas.push(fit_did(&p, &s).unwrap().beta);
    }
    let oracle_count = oracle_betas.iter().filter(|b| b.abs() >= observed.abs()).count();
    let oracle_p = oracle_count as f64 / 6.0;
    assert_eq!(report.p_two_sided, oracle_p, "engine p must equal enumeration exactly");
    assert_eq!(report.tail_count, oracle_count);

    let mut engine_sorted = report.placebo_coefficients.clone();
    engine_sorted.sort_by(f64::total_cmp);
    oracle_betas.sort_by(f64::total_cmp);
    for (a, b) in engine_sorted.iter().zip(&oracle_betas) {
        assert!((a - b).abs() < 1e-9, "placebo {a} vs oracle {b}");
    }
    // the identity permutation always ties with the observed coefficient
    assert!(report.p_two_sided >= 1.0 / 6.0);
}

#[test]
fn randomization_is_deterministic_and_seed_sensitive() {
    let spec = SyntheticSpec { n_entities: 40, ..SyntheticSpec::new(5) };
    let (panel, _) = gen_did_panel(&spec).unwrap();
    let did = DidSpec {
        confounders: vec![vars::CONF_TECHREG.into()],
        controls: vec![vars::CTRL_A.into()],
        ..DidSpec::new(vars::LN_WAGE, vars::GENAI_2018)
    };
    let a = randomization_inference(&panel, &did, &PermutationPlan::random(50, 11)).unwrap();
    let b = randomization_inference(&panel, &did, &PermutationPlan::random(50, 11)).unwrap();
    assert_eq!(a.placebo_coefficients, b.placebo_coefficients);
    assert_eq!(a.p_two_sided, b.p_two_sided);
    let c = randomization_inference(&panel, &did, &PermutationPlan::random(50, 12)).unwrap();
    assert_ne!(a.placebo_coefficients, c.placebo_coefficients);
}

#[test]
fn strong_effect_lands_in_far_tail() {
    let spec = SyntheticSpec { n_entities: 150, ..SyntheticSpec::new(21) };
    let (panel, _) = gen_did_panel(&spec).unwrap();
    let did = DidSpec {
        confounders: vec![
            vars::CONF_TECHREG.into(),
            vars::CONF_COVID.into(),
            vars::CONF_REALESTATE.into(),
        ],
        controls: vec![vars::CTRL_A.into(), vars::CTRL_B.into()],
        ..DidSpec::new(vars::LN_WAGE, vars::GENAI_2018)
    };
    let report = randomization_inference(&panel, &did, &PermutationPlan::random(500, 4)).unwrap();
    assert!(report.p_two_sided <= 0.01, "p = {}", report.p_two_sided);
    assert_eq!(report.b, 500);
    assert_eq!(report.refit_failures, 0);
}

#[test]
fn null_p_values_are_uniform() {
    // 200 independent null datasets; KS distance to U(0,1) below the 1%
    // critical value 1.63/sqrt(200)
    let reps = 200;
    let mut ps = Vec::with_capacity(reps);
    for r in 0..reps {
        let spec = SyntheticSpec {
            n_entities: 30,
            true_beta_did: 0.0,
            confounder_loadings: [0.0; 3],
            moderator_loading: 0.0,
            ..SyntheticSpec::new(100_000 + r as u64)
        };
        let (panel, _) = gen_did_panel(&spec).unwrap();
        let did = DidSpec::new(vars::LN_WAGE, vars::GENAI_2018);
        let report =
            randomization_inference(&panel, &did, &PermutationPlan::random(60, 7_000 + r as u64))
                .unwrap();
        ps.push(report.p_two_sided);
    }
    let ks = common::ks_distance_uniform(&ps);
    let crit = 1.63 / (reps as f64).sqrt();
    assert!(ks < crit, "KS distance {ks} exceeds {crit}");
}

#[test]
fn placebo_interaction_far_tail_and_null_calibration() {
    let ispec = InteractionSpec {
        outcome: vars::LN_WAGE.into(),
        exposure: vars::GENAI_STD.into(),
        moderator: vars::MODERATOR_STD.into(),
        controls: vec![vars::CTRL_A.into(), vars::CTRL_B.into()],
        window: None,
    };

    // strong planted interaction lies far in the placebo tail
    let spec = SyntheticSpec {
        n_entities: 80,
        interaction_beta3: -1.0,
        noise_sd: 0.15,
        ..SyntheticSpec::new(55)
    };
    let (panel, _) = gen_interaction_panel(&spec).unwrap();
    let report = placebo_interaction_test(&panel, &ispec, &PermutationPlan::random(200, 3)).unwrap();
    assert_eq!(report.tail_count, 0, "true beta3 should beat every placebo");
    assert_eq!(report.p_two_sided, 0.0);

    // pure-noise outcome: p roughly uniform over replications
    let reps = 100;
    let mut ps = Vec::with_capacity(reps);
    for r in 0..reps {
        let spec = SyntheticSpec {
            n_entities: 40,
            interaction_beta3: 0.0,
            fe_beta1: 0.0,
            fe_beta2: 0.0,
            ..SyntheticSpec::new(200_000 + r as u64)
        };
        let (panel, _) = gen_interaction_panel(&spec).unwrap();
        let rep =
            placebo_interaction_test(&panel, &ispec, &PermutationPlan::random(60, 9_000 + r as u64))
                .unwrap();
        ps.push(rep.p_two_sided);
    }
    let ks = common::ks_distance_uniform(&ps);
    let crit = 1.63 / (reps as f64).sqrt();
    assert!(ks < crit, "KS distance {ks} exceeds {crit}");
}

#[test]
fn zero_b_is_an_error() {
    let spec = SyntheticSpec { n_entities: 20, ..SyntheticSpec::new(2) };
    let (panel, _) = gen_did_panel(&spec).unwrap();
    let did = DidSpec::new(vars::LN_WAGE, vars::GENAI_2018);
    assert!(randomization_inference(&panel, &did, &PermutationPlan::random(0, 1)).is_err());
}
