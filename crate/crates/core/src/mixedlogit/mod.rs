//! Random-intercept logistic regression on grouped binomial data, with the
//! random intercept integrated out by Gauss-Hermite quadrature.
//!
//! The model is `logit P(y = 1 | x, v) = x'beta + v` with `v ~ N(0, sigma^2)`,
//! parameterised internally as `(beta, ln sigma^2)`. Log-likelihoods are
//! kernels (binomial coefficients dropped), matching the rest of the crate.

pub mod optim;
pub mod quadrature;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{Response, UnitObservations};
use optim::{fd_hessian, minimize_bfgs, BfgsOptions};
pub use quadrature::GaussHermite;

pub const DEFAULT_NODES: usize = 16;
/// sigma^2 below this is reported as a boundary collapse.
pub const BOUNDARY_SIGMA2: f64 = 1e-8;
const START_SIGMA2: [f64; 3] = [0.01, 0.25, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitGroup {
    pub group_id: String,
    pub successes: u64,
    pub trials: u64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitDesign {
    pub names: Vec<String>,
    pub groups: Vec<LogitGroup>,
}

impl LogitDesign {
    pub fn new(names: Vec<String>, groups: Vec<LogitGroup>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::TooFewUnits { needed: 1, got: 0 });
        }
        for g in &groups {
            if g.trials == 0 || g.successes > g.trials {
                return Err(Error::Schema(format!(
                    "group {}: invalid counts {}/{}",
                    g.group_id, g.successes, g.trials
                )));
            }
            if g.x.len() != names.len() {
                return Err(Error::LengthMismatch {
                    expected: names.len(),
                    got: g.x.len(),
                });
            }
            if g.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "covariates of group {}",
                    g.group_id
                )));
            }
            if g.x.first() != Some(&1.0) {
                return Err(Error::Schema(format!(
                    "group {}: first covariate must be the constant 1",
                    g.group_id
                )));
            }
        }
        Ok(Self { names, groups })
    }

    pub fn n_coef(&self) -> usize {
        self.names.len()
    }

    fn check_rank(&self) -> Result<()> {
        let r = self.n_coef();
        let mut xtx = DMatrix::<f64>::zeros(r, r);
        for g in &self.groups {
            for i in 0..r {
                for j in 0..r {
                    xtx[(i, j)] += g.x[i] * g.x[j];
                }
            }
        }
        let scale = (0..r).map(|i| xtx[(i, i)]).fold(0.0, f64::max);
        let eig = xtx.symmetric_eigenvalues();
        if eig.iter().any(|&e| e <= 1e-10 * scale) {
            return Err(Error::RankDeficient);
        }
        Ok(())
    }
}

/// Covariate columns built from unit covariates; an intercept is always
/// prepended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignTerm {
    /// 1 when the covariate equals `level`.
    Indicator {
        covariate: String,
        level: f64,
    },
    /// 1 when the covariate is strictly greater than `threshold`.
    Above {
        covariate: String,
        threshold: f64,
    },
    Linear {
        covariate: String,
    },
    Log {
        covariate: String,
    },
}

impl DesignTerm {
    pub fn name(&self) -> String {
        match self {
            DesignTerm::Indicator { covariate, level } => {
                format!("{covariate}={}", fmt_num(*level))
            }
            DesignTerm::Above {
                covariate,
                threshold,
            } => {
                format!("{covariate}>{}", fmt_num(*threshold))
            }
            DesignTerm::Linear { covariate } => covariate.clone(),
            DesignTerm::Log { covariate } => format!("log({covariate})"),
        }
    }

    fn covariate(&self) -> &str {
        match self {
            DesignTerm::Indicator { covariate, .. }
            | DesignTerm::Above { covariate, .. }
            | DesignTerm::Linear { covariate }
            | DesignTerm::Log { covariate } => covariate,
        }
    }

    fn eval(&self, value: f64) -> f64 {
        match self {
            DesignTerm::Indicator { level, .. } => f64::from(value == *level),
            DesignTerm::Above { threshold, .. } => f64::from(value > *threshold),
            DesignTerm::Linear { .. } => value,
            DesignTerm::Log { .. } => value.ln(),
        }
    }
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Builds a design from binomial units and covariate terms.
pub fn design_from_units(units: &[UnitObservations], terms: &[DesignTerm]) -> Result<LogitDesign> {
    let mut names = vec!["constant".to_string()];
    names.extend(terms.iter().map(DesignTerm::name));
    let groups = units
        .iter()
        .map(|u| {
            let Response::Binomial { successes, trials } = u.response else {
                return Err(Error::Schema(format!(
                    "unit {}: mixed logit needs binomial responses",
                    u.unit_id
                )));
            };
            let mut x = vec![1.0];
            for term in terms {
                let value = u.covariate(term.covariate()).ok_or_else(|| {
                    Error::Schema(format!(
                        "unit {}: missing covariate `{}`",
                        u.unit_id,
                        term.covariate()
                    ))
                })?;
                x.push(term.eval(value));
            }
            Ok(LogitGroup {
                group_id: u.unit_id.clone(),
                successes,
                trials,
                x,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LogitDesign::new(names, groups)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedLogitFit {
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    pub ln_sigma2: f64,
    /// Wald covariance of (beta, ln sigma^2). The ln sigma^2 row and column
    /// are NaN when the variance sits on the boundary or for fixed-effects fits.
    pub cov: Vec<Vec<f64>>,
    pub loglik: f64,
    /// 0 for a fixed-effects fit.
    pub quad_nodes: usize,
    pub boundary_flag: bool,
    pub iterations: usize,
}

impl MixedLogitFit {
    pub fn se(&self, index: usize) -> f64 {
        self.cov[index][index].sqrt()
    }

    pub fn sigma2(&self) -> f64 {
        self.ln_sigma2.exp()
    }

    pub fn se_ln_sigma2(&self) -> f64 {
        let r = self.beta.len();
        self.cov[r][r].sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatio {
    pub name: String,
    pub estimate: f64,
    pub lo95: f64,
    pub hi95: f64,
}

impl OddsRatio {
    /// "lo OR hi" with two decimals.
    pub fn triple(&self) -> String {
        format!("{:.2} {:.2} {:.2}", self.lo95, self.estimate, self.hi95)
    }
}

/// ln(1 + e^t) without overflow.
#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Binomial log-kernel at logit `t`, and its derivative in `t`.
#[inline]
fn binomial_logit_kernel(y: f64, n: f64, t: f64) -> (f64, f64) {
    let value = -y * softplus(-t) - (n - y) * softplus(t);
    let p = 1.0 / (1.0 + (-t).exp());
    (value, y - n * p)
}

fn linear_predictor(x: &[f64], beta: &[f64]) -> f64 {
    x.iter().zip(beta).map(|(a, b)| a * b).sum()
}

/// Log-likelihood and gradient in (beta, ln sigma^2).
fn gh_loglik_grad(
    design: &LogitDesign,
    beta: &[f64],
    ln_sigma2: f64,
    rule: &GaussHermite,
) -> (f64, Vec<f64>) {
    let r = design.n_coef();
    let sigma = (0.5 * ln_sigma2).exp();
    let q = rule.len();
    let log_w: Vec<f64> = rule.weights.iter().map(|w| w.ln()).collect();
    let mut total = 0.0;
    let mut grad = vec![0.0; r + 1];
    let mut a = vec![0.0; q];
    let mut d = vec![0.0; q];
    for g in &design.groups {
        let (y, n) = (g.successes as f64, g.trials as f64);
        let eta = linear_predictor(&g.x, beta);
        for k in 0..q {
            let (value, deriv) = binomial_logit_kernel(y, n, eta + sigma * rule.nodes[k]);
            a[k] = log_w[k] + value;
            d[k] = deriv;
        }
        let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let (mut d_eta, mut d_sigma) = (0.0, 0.0);
        for k in 0..q {
            let e = (a[k] - max).exp();
            sum += e;
            d_eta += e * d[k];
            d_sigma += e * d[k] * rule.nodes[k];
        }
        total += max + sum.ln();
        d_eta /= sum;
        d_sigma /= sum;
        for (gr, xv) in grad.iter_mut().zip(&g.x) {
            *gr += d_eta * xv;
        }
        grad[r] += d_sigma * 0.5 * sigma;
    }
    (total, grad)
}

/// Marginal log-likelihood with `nodes`-point Gauss-Hermite quadrature.
pub fn gh_loglik(design: &LogitDesign, beta: &[f64], ln_sigma2: f64, nodes: usize) -> Result<f64> {
    if nodes < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 quadrature nodes, got {nodes}"
        )));
    }
    if beta.len() != design.n_coef() {
        return Err(Error::LengthMismatch {
            expected: design.n_coef(),
            got: beta.len(),
        });
    }
    let rule = GaussHermite::new(nodes);
    let (value, _) = gh_loglik_grad(design, beta, ln_sigma2, &rule);
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("log-likelihood {value}")));
    }
    Ok(value)
}

/// Analytic gradient of [`gh_loglik`] in (beta, ln sigma^2).
pub fn gh_gradient(design: &LogitDesign, beta: &[f64], ln_sigma2: f64, nodes: usize) -> Vec<f64> {
    gh_loglik_grad(design, beta, ln_sigma2, &GaussHermite::new(nodes)).1
}

/// Ordinary logistic log-likelihood and gradient (no random effect).
fn plain_loglik_grad(design: &LogitDesign, beta: &[f64]) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let mut grad = vec![0.0; design.n_coef()];
    for g in &design.groups {
        let eta = linear_predictor(&g.x, beta);
        let (value, deriv) = binomial_logit_kernel(g.successes as f64, g.trials as f64, eta);
        total += value;
        for (gr, xv) in grad.iter_mut().zip(&g.x) {
            *gr += deriv * xv;
        }
    }
    (total, grad)
}

pub fn plain_loglik(design: &LogitDesign, beta: &[f64]) -> f64 {
    plain_loglik_grad(design, beta).0
}

/// Inverse of the negated Hessian, or None if it is not positive definite.
fn invert_information(hessian: &[Vec<f64>], idx: &[usize]) -> Option<DMatrix<f64>> {
    let k = idx.len();
    let info = DMatrix::from_fn(k, k, |i, j| -hessian[idx[i]][idx[j]]);
    let chol = info.cholesky()?;
    Some(chol.inverse())
}

fn covariance(hessian: &[Vec<f64>], full: bool) -> Vec<Vec<f64>> {
    let dim = hessian.len();
    let mut cov = vec![vec![f64::NAN; dim]; dim];
    let all: Vec<usize> = (0..dim).collect();
    let block: Vec<usize> = (0..dim - 1).collect();
    let (idx, inv) = match full.then(|| invert_information(hessian, &all)).flatten() {
        Some(inv) => (all, inv),
        None => match invert_information(hessian, &block) {
            Some(inv) => (block, inv),
            None => return cov,
        },
    };
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            cov[i][j] = inv[(a, b)];
        }
    }
    cov
}

/// Fixed-effects logistic regression by BFGS, i.e. the mixed model with the
/// variance pinned at zero.
pub fn fixed_logit_fit(design: &LogitDesign) -> Result<MixedLogitFit> {
    design.check_rank()?;
    let r = design.n_coef();
    let opts = BfgsOptions::default();
    let res = minimize_bfgs(
        |b| {
            let (v, g) = plain_loglik_grad(design, b);
            (-v, g.into_iter().map(|x| -x).collect())
        },
        &vec![0.0; r],
        &opts,
    );
    if !res.converged {
        return Err(Error::NotConverged(format!(
            "fixed-effects logit after {} iterations",
            res.iterations
        )));
    }
    let mut hessian = fd_hessian(|b| plain_loglik_grad(design, b).1, &res.x);
    // pad with the (absent) variance parameter
    hessian.iter_mut().for_each(|row| row.push(0.0));
    hessian.push(vec![0.0; r + 1]);
    Ok(MixedLogitFit {
        names: design.names.clone(),
        beta: res.x,
        ln_sigma2: f64::NEG_INFINITY,
        cov: covariance(&hessian, false),
        loglik: -res.f,
        quad_nodes: 0,
        boundary_flag: true,
        iterations: res.iterations,
    })
}

/// Maximum-likelihood random-intercept fit. Starts from the fixed-effects
/// estimates at several variances and keeps the best optimum.
pub fn fit(design: &LogitDesign, nodes: usize) -> Result<MixedLogitFit> {
    if nodes < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 quadrature nodes, got {nodes}"
        )));
    }
    let fixed = fixed_logit_fit(design)?;
    let rule = GaussHermite::new(nodes);
    let r = design.n_coef();
    let opts = BfgsOptions::default();
    let objective = |p: &[f64]| {
        let (v, g) = gh_loglik_grad(design, &p[..r], p[r], &rule);
        (-v, g.into_iter().map(|x| -x).collect::<Vec<_>>())
    };

    let mut best: Option<optim::BfgsResult> = None;
    for s0 in START_SIGMA2 {
        let mut x0 = fixed.beta.clone();
        x0.push(s0.ln());
        let res = minimize_bfgs(objective, &x0, &opts);
        if !res.converged || !res.f.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| res.f < b.f) {
            best = Some(res);
        }
    }
    let best = best.ok_or_else(|| {
        Error::NotConverged("random-intercept logit failed from every start".into())
    })?;
    let ln_sigma2 = best.x[r];
    let boundary = ln_sigma2.exp() < BOUNDARY_SIGMA2;
    let hessian = fd_hessian(|p| gh_loglik_grad(design, &p[..r], p[r], &rule).1, &best.x);
    Ok(MixedLogitFit {
        names: design.names.clone(),
        beta: best.x[..r].to_vec(),
        ln_sigma2,
        cov: covariance(&hessian, !boundary),
        loglik: -best.f,
        quad_nodes: nodes,
        boundary_flag: boundary,
        iterations: best.iterations,
    })
}

/// Odds ratios with Wald 95% intervals; the constant is excluded.
pub fn odds_ratios(fit: &MixedLogitFit) -> Vec<OddsRatio> {
    (1..fit.beta.len())
        .map(|j| {
            let (b, se) = (fit.beta[j], fit.se(j));
            OddsRatio {
                name: fit.names[j].clone(),
                estimate: b.exp(),
                lo95: (b - 1.96 * se).exp(),
                hi95: (b + 1.96 * se).exp(),
            }
        })
        .collect()
}

/// Fitted recall probability of every group at the fixed effects (v = 0).
pub fn fitted_probabilities(design: &LogitDesign, beta: &[f64]) -> Vec<f64> {
    design
        .groups
        .iter()
        .map(|g| 1.0 / (1.0 + (-linear_predictor(&g.x, beta)).exp()))
        .collect()
}
