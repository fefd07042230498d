//! Brute-force oracles shared by the integration suites.
#![allow(dead_code)]

use statrs::distribution::{Binomial, Discrete};
use zsim::likelihood::{Response, UnitObservations};
use zsim::mixedlogit::LogitGroup;
use zsim::zmatrix::ZMatrix;

/// Probability of unit data given parameters, by direct evaluation.
pub fn probability(unit: &UnitObservations, params: &[f64]) -> f64 {
    match &unit.response {
        Response::Binomial { successes, trials } => {
            Binomial::new(params[0], *trials).unwrap().pmf(*successes)
        }
        Response::Multinomial { counts } => counts
            .iter()
            .zip(params)
            .map(|(&c, &p)| if c == 0 { 1.0 } else { p.powi(c as i32) })
            .product(),
    }
}

/// Bayes rule with the empirical prior placing equal mass on every estimate.
pub fn bayes_oracle(units: &[UnitObservations], z: &ZMatrix) -> Vec<f64> {
    let mut out = Vec::new();
    for unit in units {
        let likes: Vec<f64> = z
            .estimates
            .iter()
            .map(|e| probability(unit, e.values()))
            .collect();
        let total: f64 = likes.iter().sum();
        out.extend(likes.iter().map(|l| l / total));
    }
    out
}

fn normal_density(v: f64, sigma: f64) -> f64 {
    (-0.5 * (v / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Integral of f against N(0, sigma^2), trapezoid rule over +-12 sigma.
pub fn trapezoid_expectation(f: impl Fn(f64) -> f64, sigma: f64) -> f64 {
    let steps = 40_000;
    let (a, b) = (-12.0 * sigma, 12.0 * sigma);
    let h = (b - a) / steps as f64;
    let g = |v: f64| f(v) * normal_density(v, sigma);
    let inner: f64 = (1..steps).map(|s| g(a + s as f64 * h)).sum();
    (inner + 0.5 * (g(a) + g(b))) * h
}

/// ln of one group's random-intercept marginal likelihood (kernel form).
pub fn trapezoid_loglik(group: &LogitGroup, beta0: f64, sigma: f64) -> f64 {
    let (y, n) = (group.successes as f64, group.trials as f64);
    let kernel = |v: f64| {
        let t = beta0 + v;
        let ln_p = -(1.0 + (-t).exp()).ln();
        let ln_q = -(1.0 + t.exp()).ln();
        (y * ln_p + (n - y) * ln_q).exp()
    };
    trapezoid_expectation(kernel, sigma).ln()
}
