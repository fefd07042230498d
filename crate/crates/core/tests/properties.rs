//! Randomized invariants checked against brute-force oracles.

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zsim::likelihood::{Family, UnitObservations};
use zsim::mixedlogit::{gh_loglik, LogitDesign, LogitGroup};
use zsim::npml::{degenerate_fit, em_fit_with_trace, EmConfig};
use zsim::zmatrix::{
    compute_z, diagnostics, shrink_estimates, smoothing_weights, SmoothingConvention,
};

mod common;
use common::{bayes_oracle, trapezoid_expectation, trapezoid_loglik};

const CASES: u32 = 1_000;

fn config() -> Config {
    Config {
        cases: CASES,
        rng_seed: RngSeed::Fixed(20_240_517),
        failure_persistence: None,
        ..Config::default()
    }
}

fn binomial_cohort() -> impl Strategy<Value = Vec<UnitObservations>> {
    prop::collection::vec((1u64..40).prop_flat_map(|n| (0..=n, Just(n))), 2..12).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (y, n))| UnitObservations::binomial(format!("u{i}"), y, n).unwrap())
            .collect()
    })
}

fn multinomial_cohort() -> impl Strategy<Value = (Vec<UnitObservations>, Family)> {
    (2usize..5).prop_flat_map(|k| {
        prop::collection::vec(prop::collection::vec(0u64..9, k), 2..10).prop_map(move |rows| {
            let units = rows
                .into_iter()
                .enumerate()
                .map(|(i, mut counts)| {
                    if counts.iter().all(|&c| c == 0) {
                        counts[i % k] = 1;
                    }
                    UnitObservations::multinomial(format!("m{i}"), counts).unwrap()
                })
                .collect();
            let categories = (0..k).map(|c| format!("c{c}")).collect();
            (units, Family::Multinomial { categories })
        })
    })
}

fn check_z(units: &[UnitObservations], family: &Family) -> Result<(), TestCaseError> {
    let z = compute_z(units, family).unwrap();
    let n = z.n();
    for i in 0..n {
        let row = z.row(i);
        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for &v in row {
            prop_assert!(
                v <= z.get(i, i) + 1e-15,
                "row {i}: {v} > diag {}",
                z.get(i, i)
            );
        }
    }
    let d = diagnostics(&z);
    prop_assert!(d.trace_over_n > 0.0 && d.trace_over_n <= 1.0 + 1e-15);

    for (got, want) in z.entries.iter().zip(bayes_oracle(units, &z)) {
        prop_assert!((got - want).abs() <= 1e-12, "{got} vs oracle {want}");
    }

    let m = family.dimension();
    for shrunk in shrink_estimates(&z) {
        for c in 0..m {
            let comp: Vec<f64> = z.estimates.iter().map(|e| e.component(c)).collect();
            let lo = comp.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = comp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let v = shrunk.component(c);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
    for w in smoothing_weights(&z, SmoothingConvention::Normalized) {
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
    Ok(())
}

fn check_em(units: &[UnitObservations], family: &Family) -> Result<(), TestCaseError> {
    let (fit, trace) = em_fit_with_trace(units, family, &EmConfig::default()).unwrap();
    for segment in &trace.segments {
        for w in segment.windows(2) {
            prop_assert!(
                w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0),
                "EM decreased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }
    let null = degenerate_fit(units, family).unwrap();
    prop_assert!(fit.loglik >= null.loglik - 1e-9);
    prop_assert!((fit.masses.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    Ok(())
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn binomial_z_invariants(units in binomial_cohort()) {
        check_z(&units, &Family::Binomial)?;
    }

    #[test]
    fn multinomial_z_invariants((units, family) in multinomial_cohort()) {
        check_z(&units, &family)?;
    }

    #[test]
    fn binomial_em_is_monotone_and_beats_one_atom(units in binomial_cohort()) {
        check_em(&units, &Family::Binomial)?;
    }

    #[test]
    fn multinomial_em_is_monotone_and_beats_one_atom((units, family) in multinomial_cohort()) {
        check_em(&units, &family)?;
    }
}

#[test]
fn large_samples_make_z_the_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let k = rng.random_range(2..9);
        // distinct rates at least 0.05 apart
        let units: Vec<_> = (0..k)
            .map(|i| {
                let u = 0.05 + 0.1 * i as f64 + rng.random_range(0.0..0.05);
                let n = 100_000u64;
                let y = rand_distr::Distribution::sample(
                    &rand_distr::Binomial::new(n, u).unwrap(),
                    &mut rng,
                );
                UnitObservations::binomial(format!("u{i}"), y, n).unwrap()
            })
            .collect();
        let z = compute_z(&units, &Family::Binomial).unwrap();
        assert!(diagnostics(&z).trace_over_n > 0.99);
    }
}

#[test]
fn default_rule_integrates_smooth_functions() {
    let rule = zsim::mixedlogit::quadrature::GaussHermite::new(zsim::mixedlogit::DEFAULT_NODES);
    for k in 0..=19 {
        let sigma = 0.1 + 0.1 * k as f64;
        for f in [
            |v: f64| v.exp(),
            |v: f64| v.cos(),
            |v: f64| v.powi(6) - v * v,
        ] {
            let got = rule.expect(|z| f(sigma * z));
            let want = trapezoid_expectation(f, sigma);
            assert!((got - want).abs() < 1e-6, "sigma={sigma}: {got} vs {want}");
        }
    }
}

/// The logistic integrand has complex poles, so a dense rule is needed for
/// agreement to 1e-6.
#[test]
fn gauss_hermite_matches_brute_force_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let n = rng.random_range(1..30u64);
        let y = rng.random_range(0..=n);
        let group = LogitGroup {
            group_id: "g".into(),
            successes: y,
            trials: n,
            x: vec![1.0],
        };
        let design = LogitDesign::new(vec!["constant".into()], vec![group.clone()]).unwrap();
        let beta0 = rng.random_range(-2.0..2.0);
        let sigma: f64 = rng.random_range(0.1..2.0);
        let want = trapezoid_loglik(&group, beta0, sigma);
        let got = gh_loglik(&design, &[beta0], (sigma * sigma).ln(), 200).unwrap();
        assert!(
            (got - want).abs() < 1e-6,
            "n={n} y={y} sigma={sigma}: {got} vs {want}"
        );
    }
}
