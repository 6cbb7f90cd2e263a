mod common;

use std::collections::BTreeMap;

use common::*;
use designbench::assignment::{outcome_dependent, treat_by_outcome, treat_by_unobserved, Mechanism};
use designbench::oracle::{self, Verdict};
use designbench::population::{make_paper_population, make_proportional_population, Latents, PopulationSpec};
use proptest::prelude::*;

const TOL: f64 = 1e-12;

#[test]
fn eq1_design_matches_brute_force() {
    let pop = make_paper_population();
    let cells = enumerate(&pop, eq1);
    let mech = outcome_dependent(&pop);

    let treated = prob(&cells, |c| c.w);
    assert_eq!(treated, q(5, 8));
    for w in [true, false] {
        let joint = prob(&cells, |c| c.w == w && c.y1 == q(1, 1));
        let expected = joint / prob(&cells, |c| c.w == w);
        let crate_value = oracle::outcome_given_treatment(&pop, &mech, w).unwrap().prob_y1(1.0);
        assert!((crate_value - f(&expected)).abs() < TOL);
    }
    assert_eq!(
        prob(&cells, |c| c.w && c.y1 == q(1, 1)) / treated.clone(),
        q(2, 5)
    );
    for x in 0..2 {
        let s = prob(&cells, |c| c.w && c.x == x) / prob(&cells, |c| c.x == x);
        assert_eq!(s, q(5, 8));
        assert!((oracle::propensity(&pop, &mech, x).unwrap() - f(&s)).abs() < TOL);
    }
    let dim = arm_mean(&cells, true) - arm_mean(&cells, false);
    assert_eq!(dim, q(2, 5));
    assert!((oracle::dim_limit(&pop, &mech).unwrap() - f(&dim)).abs() < TOL);
}

#[test]
fn ipw_with_true_score_limit_on_eq1_design() {
    // Frozen from the enumeration: E[W Y / (5/8)] - E[(1-W) Y / (3/8)] = 2/5.
    let pop = make_paper_population();
    let cells = enumerate(&pop, eq1);
    let (limit, _) = weighted_term_moments(&cells, |_| q(5, 8));
    assert_eq!(limit, q(2, 5));

    let score = BTreeMap::from([(0, 0.625), (1, 0.625)]);
    let crate_value = oracle::ipw_limit(&pop, &outcome_dependent(&pop), &score).unwrap();
    assert!((crate_value - 0.4).abs() < TOL);
    assert!((crate_value - pop.ate()).abs() > 0.09);
}

#[test]
fn deterministic_designs_match_brute_force() {
    let pop = make_paper_population();
    let by_u = enumerate(&pop, |l| q(i64::from(l.u), 1));
    assert_eq!(prob(&by_u, |c| c.w), q(1, 2));
    assert_eq!(arm_mean(&by_u, true) - arm_mean(&by_u, false), q(1, 2));
    assert!((oracle::dim_limit(&pop, &treat_by_unobserved(&pop)).unwrap() - 0.5).abs() < TOL);

    let by_y1 = enumerate(&pop, |l| qf(l.y1));
    // All treated units have y1 = 1, all controls y1 = 0.
    assert_eq!(prob(&by_y1, |c| c.w && c.y1 == q(1, 1)) / prob(&by_y1, |c| c.w), q(1, 1));
    let r = oracle::build_report(&pop, &treat_by_outcome(&pop)).unwrap();
    assert_eq!(r.unconditionally_unconfounded, Verdict::Fails);
}

#[test]
fn three_point_variances_match_brute_force() {
    let pop = make_proportional_population();
    let prop_cells = enumerate(&pop, |l| qf(l.y1) / q(2, 1));
    let half_cells = enumerate(&pop, |_| q(1, 2));
    let (m1, v1) = weighted_term_moments(&prop_cells, |c| c.p.clone());
    let (m2, v2) = weighted_term_moments(&half_cells, |c| c.p.clone());
    assert_eq!(m1, q(1, 1));
    assert_eq!(m2, q(1, 1));
    assert_eq!(v1, q(1, 1));
    assert_eq!(v2, q(4, 3));
    assert_eq!(v2.clone() - v1.clone(), q(1, 3));

    let crate_v1 = oracle::ht_normalized_variance(&pop, &Mechanism::outcome_proportional(&pop).unwrap()).unwrap();
    let crate_v2 = oracle::ht_normalized_variance(&pop, &Mechanism::constant(0.5).unwrap()).unwrap();
    assert!((crate_v1 - f(&v1)).abs() < TOL);
    assert!((crate_v2 - f(&v2)).abs() < TOL);
}

#[test]
fn quadrants_are_all_occupied() {
    let pop = make_paper_population();
    let cells = [
        (outcome_dependent(&pop), true, Verdict::Fails),
        (treat_by_unobserved(&pop), false, Verdict::Holds),
        (Mechanism::constant(0.5).unwrap(), true, Verdict::Holds),
        (treat_by_outcome(&pop), false, Verdict::Fails),
    ];
    for (mech, randomized, unconfounded) in cells {
        let r = oracle::build_report(&pop, &mech).unwrap();
        assert_eq!(r.randomized, randomized, "{}", r.mechanism);
        assert_eq!(r.unconditionally_unconfounded, unconfounded, "{}", r.mechanism);
    }
}

fn arb_population() -> impl Strategy<Value = PopulationSpec> {
    // Up to six strata with distinct (x, u) keys and small integer weights.
    prop::collection::vec((-3i32..4, -3i32..4, 1i64..6), 1..7).prop_map(|rows| {
        let total: i64 = rows.iter().map(|r| r.2).sum();
        let rows = rows.into_iter().enumerate().map(|(i, (y1, y0, w))| {
            let l = Latents::new(f64::from(y1) / 2.0, f64::from(y0) / 2.0, (i % 2) as u32, i as u32);
            (l, w, total)
        });
        PopulationSpec::from_fractions(rows).unwrap()
    })
}

fn arb_design() -> impl Strategy<Value = (PopulationSpec, Vec<u32>)> {
    arb_population().prop_flat_map(|pop| {
        let n = pop.len();
        (Just(pop), prop::collection::vec(1u32..16, n))
    })
}

fn latent_mech(pop: &PopulationSpec, sixteenths: &[u32]) -> Mechanism {
    let table: Vec<_> = pop
        .strata()
        .iter()
        .zip(sixteenths)
        .map(|(s, &k)| (s.latents, f64::from(k) / 16.0))
        .collect();
    Mechanism::latent_fn(pop, |l| table.iter().find(|(t, _)| t.same_tuple(l)).unwrap().1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ht_is_unbiased_for_any_positive_mechanism((pop, ks) in arb_design()) {
        let mech = latent_mech(&pop, &ks);
        let e = oracle::ht_expectation(&pop, &mech).unwrap();
        prop_assert!((e - pop.ate()).abs() < TOL);

        let cells = enumerate(&pop, |l| qf(mech.treatment_probability(l).unwrap()));
        let (m, v) = weighted_term_moments(&cells, |c| c.p.clone());
        prop_assert!((f(&m) - e).abs() < TOL);
        let crate_v = oracle::ht_normalized_variance(&pop, &mech).unwrap();
        prop_assert!((f(&v) - crate_v).abs() < 1e-9 * (1.0 + crate_v));
    }

    #[test]
    fn bayes_reconstructs_outcome_marginal((pop, ks) in arb_design()) {
        let mech = latent_mech(&pop, &ks);
        let share = oracle::joint_distribution(&pop, &mech).unwrap().treated_share();
        let t = oracle::outcome_given_treatment(&pop, &mech, true).unwrap();
        let c = oracle::outcome_given_treatment(&pop, &mech, false).unwrap();
        for s in pop.strata() {
            let (y1, y0) = (s.latents.y1, s.latents.y0);
            let marginal: f64 = pop
                .strata()
                .iter()
                .filter(|o| o.latents.y1 == y1 && o.latents.y0 == y0)
                .map(|o| o.weight_f64())
                .sum();
            let rebuilt = t.prob(y1, y0) * share + c.prob(y1, y0) * (1.0 - share);
            prop_assert!((rebuilt - marginal).abs() < TOL);
        }
    }

    #[test]
    fn report_invariants((pop, ks) in arb_design()) {
        let mech = latent_mech(&pop, &ks);
        let r = oracle::build_report(&pop, &mech).unwrap();
        prop_assert!(!r.positivity || r.randomized);
        let recombined: f64 = r
            .propensity_by_x
            .iter()
            .map(|(&x, s)| oracle::covariate_mass(&pop, x) * s)
            .sum();
        prop_assert!((recombined - r.unconditional_propensity).abs() < TOL);
        let table = oracle::joint_distribution(&pop, &mech).unwrap();
        prop_assert!((table.total() - 1.0).abs() < TOL);
    }

    #[test]
    fn constant_mechanisms_are_unconfounded(pop in arb_population(), k in 1u32..16) {
        let p = f64::from(k) / 16.0;
        let mech = Mechanism::constant(p).unwrap();
        prop_assert_eq!(oracle::check_unconfounded(&pop, &mech, false).unwrap(), Verdict::Holds);
        for x in pop.covariate_levels() {
            prop_assert!((oracle::propensity(&pop, &mech, x).unwrap() - p).abs() < TOL);
        }
    }
}
