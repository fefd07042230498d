//! Nonparametric maximum likelihood (NPML) estimation of the mixing
//! distribution by EM, and the boundary likelihood-ratio test against a
//! single-atom null.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::likelihood::{
    log_kernel, mle, pooled_mle, weighted_mle, Family, ParamVector, UnitObservations,
};
use crate::zmatrix::normalize_log_row;

/// Discrete mixing distribution: atoms with masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub atoms: Vec<ParamVector>,
    pub masses: Vec<f64>,
    /// Marginal kernel log-likelihood.
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cohort: CohortKey,
}

/// Identifies the data a fit was computed on, so fits from different cohorts
/// are not compared.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortKey {
    pub units: usize,
    pub total_count: u64,
}

impl CohortKey {
    fn of(units: &[UnitObservations]) -> Self {
        Self {
            units: units.len(),
            total_count: units.iter().map(|u| u.response.total()).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df_convention: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Atoms closer than this in every component are merged.
    pub merge_tol: f64,
    /// Atoms lighter than this are dropped.
    pub prune_mass: f64,
    /// Relative log-likelihood change counted as "no progress".
    pub rel_tol: f64,
    /// Consecutive no-progress iterations required to stop.
    pub patience: usize,
    pub max_iter: usize,
    /// Upper bound on the number of atoms. `None` lets the count emerge.
    pub max_atoms: Option<usize>,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            merge_tol: 1e-4,
            prune_mass: 1e-8,
            rel_tol: 1e-10,
            patience: 10,
            max_iter: 100_000,
            max_atoms: None,
        }
    }
}

/// Per-iteration log-likelihoods, one segment per EM run (a new segment
/// starts after every merge/prune pass).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmTrace {
    pub segments: Vec<Vec<f64>>,
}

/// Log-kernel matrix, row i = unit, column j = atom.
fn kernel_matrix(
    units: &[UnitObservations],
    atoms: &[ParamVector],
    family: &Family,
) -> Vec<Vec<f64>> {
    units
        .iter()
        .map(|u| atoms.iter().map(|a| log_kernel(u, a, family)).collect())
        .collect()
}

/// E-step responsibilities and the marginal log-likelihood.
fn responsibilities(
    units: &[UnitObservations],
    atoms: &[ParamVector],
    masses: &[f64],
    family: &Family,
) -> (Vec<Vec<f64>>, f64) {
    let log_masses: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
    let mut loglik = 0.0;
    let rows = kernel_matrix(units, atoms, family)
        .into_iter()
        .map(|mut row| {
            for (v, lm) in row.iter_mut().zip(&log_masses) {
                *v += lm;
            }
            loglik += normalize_log_row(&mut row);
            row
        })
        .collect();
    (rows, loglik)
}

pub fn marginal_loglik(
    units: &[UnitObservations],
    atoms: &[ParamVector],
    masses: &[f64],
    family: &Family,
) -> f64 {
    responsibilities(units, atoms, masses, family).1
}

struct EmState {
    atoms: Vec<ParamVector>,
    masses: Vec<f64>,
    loglik: f64,
    iterations: usize,
}

/// Runs EM from a starting support until the log-likelihood stalls or the
/// iteration budget runs out. Returns whether it converged.
fn run_em(
    units: &[UnitObservations],
    family: &Family,
    config: &EmConfig,
    state: &mut EmState,
    trace: &mut Vec<f64>,
) -> bool {
    let n = units.len() as f64;
    let mut calm = 0;
    let (mut w, mut loglik) = responsibilities(units, &state.atoms, &state.masses, family);
    trace.push(loglik);
    while state.iterations < config.max_iter {
        state.iterations += 1;
        for j in 0..state.atoms.len() {
            let column: Vec<f64> = w.iter().map(|row| row[j]).collect();
            state.masses[j] = column.iter().sum::<f64>() / n;
            if state.masses[j] > 0.0 {
                state.atoms[j] = weighted_mle(units, &column);
            }
        }
        let (next_w, next_loglik) = responsibilities(units, &state.atoms, &state.masses, family);
        trace.push(next_loglik);
        let change = (next_loglik - loglik).abs() / loglik.abs().max(1.0);
        w = next_w;
        loglik = next_loglik;
        if change < config.rel_tol {
            calm += 1;
            if calm >= config.patience {
                state.loglik = loglik;
                return true;
            }
        } else {
            calm = 0;
        }
    }
    state.loglik = loglik;
    false
}

/// Merges atoms closer than `merge_tol` and drops negligible masses.
/// Returns true when the support changed.
fn consolidate(state: &mut EmState, config: &EmConfig) -> bool {
    let before = state.atoms.len();
    let mut order: Vec<usize> = (0..before).collect();
    order.sort_by(|&a, &b| {
        state.atoms[a]
            .values()
            .partial_cmp(state.atoms[b].values())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut atoms: Vec<ParamVector> = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    for idx in order {
        let (atom, mass) = (&state.atoms[idx], state.masses[idx]);
        if let Some(pos) = atoms
            .iter()
            .position(|a| a.max_abs_diff(atom) < config.merge_tol)
        {
            let total = masses[pos] + mass;
            if total > 0.0 {
                let merged = atoms[pos]
                    .values()
                    .iter()
                    .zip(atom.values())
                    .map(|(a, b)| (a * masses[pos] + b * mass) / total)
                    .collect();
                atoms[pos] = ParamVector(merged);
            }
            masses[pos] = total;
        } else {
            atoms.push(atom.clone());
            masses.push(mass);
        }
    }
    let (atoms, mut masses): (Vec<ParamVector>, Vec<f64>) = atoms
        .into_iter()
        .zip(masses)
        .filter(|(_, m)| *m >= config.prune_mass)
        .unzip();
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    let changed = atoms.len() != before;
    state.atoms = atoms;
    state.masses = masses;
    changed
}

/// Sorted, de-duplicated per-unit MLEs plus the pooled MLE.
fn initial_grid(
    units: &[UnitObservations],
    family: &Family,
    merge_tol: f64,
) -> Result<Vec<ParamVector>> {
    let mut grid = units
        .iter()
        .map(|u| mle(u, family))
        .collect::<Result<Vec<_>>>()?;
    grid.push(pooled_mle(units, family)?);
    grid.sort_by(|a, b| {
        a.values()
            .partial_cmp(b.values())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    grid.dedup_by(|a, b| a.max_abs_diff(b) < merge_tol);
    Ok(grid)
}

/// Deterministic starting supports for a fit with at most `k` atoms: rank
/// quantiles of the grid, plus the grid extremes.
fn capped_starts(grid: &[ParamVector], k: usize) -> Vec<Vec<ParamVector>> {
    let g = grid.len();
    let quantiles: Vec<ParamVector> = (0..k)
        .map(|j| grid[(((2 * j + 1) * g) / (2 * k)).min(g - 1)].clone())
        .collect();
    let mut starts = vec![quantiles];
    if k >= 2 {
        let spread: Vec<ParamVector> = (0..k)
            .map(|j| grid[(j * (g - 1)) / (k - 1)].clone())
            .collect();
        starts.push(spread);
    }
    starts
}

/// NPML fit by EM. See [`EmConfig`] for the stopping and support rules.
pub fn em_fit(
    units: &[UnitObservations],
    family: &Family,
    config: &EmConfig,
) -> Result<MixtureFit> {
    em_fit_with_trace(units, family, config).map(|(fit, _)| fit)
}

pub fn em_fit_with_trace(
    units: &[UnitObservations],
    family: &Family,
    config: &EmConfig,
) -> Result<(MixtureFit, EmTrace)> {
    if units.len() < 2 {
        return Err(Error::TooFewUnits {
            needed: 2,
            got: units.len(),
        });
    }
    if config.max_atoms == Some(0) {
        return Err(Error::InvalidArgument(
            "max_atoms must be at least 1".into(),
        ));
    }
    family.check_cohort(units)?;
    let grid = initial_grid(units, family, config.merge_tol)?;
    let mut starts = match config.max_atoms {
        Some(k) if k < grid.len() => capped_starts(&grid, k),
        _ => vec![grid],
    };
    // EM can crawl towards a single atom without reaching it
    starts.push(vec![pooled_mle(units, family)?]);

    let mut best: Option<(MixtureFit, EmTrace)> = None;
    for support in starts {
        let k = support.len();
        let mut state = EmState {
            atoms: support,
            masses: vec![1.0 / k as f64; k],
            loglik: f64::NEG_INFINITY,
            iterations: 0,
        };
        let mut trace = EmTrace::default();
        let converged = loop {
            let mut segment = Vec::new();
            let converged = run_em(units, family, config, &mut state, &mut segment);
            trace.segments.push(segment);
            if !converged {
                break false;
            }
            if !consolidate(&mut state, config) {
                break true;
            }
        };
        let fit = MixtureFit {
            atoms: state.atoms,
            masses: state.masses,
            loglik: state.loglik,
            iterations: state.iterations,
            converged,
            cohort: CohortKey::of(units),
        };
        if best.as_ref().is_none_or(|(b, _)| fit.loglik > b.loglik) {
            best = Some((fit, trace));
        }
    }
    let (fit, trace) = best.expect("at least one starting support");
    if !fit.converged {
        return Err(Error::EmNotConverged { fit: Box::new(fit) });
    }
    Ok((fit, trace))
}

/// One-atom fit at the pooled MLE.
pub fn degenerate_fit(units: &[UnitObservations], family: &Family) -> Result<MixtureFit> {
    let atom = pooled_mle(units, family)?;
    let loglik = units.iter().map(|u| log_kernel(u, &atom, family)).sum();
    Ok(MixtureFit {
        atoms: vec![atom],
        masses: vec![1.0],
        loglik,
        iterations: 0,
        converged: true,
        cohort: CohortKey::of(units),
    })
}

pub const SELF_LIANG_CONVENTION: &str = "0.5*chi2(1) + 0.5*chi2(2)";

/// Likelihood-ratio test of `alt` against the one-atom `null`, referred to
/// an equal mixture of chi-square(1) and chi-square(2).
pub fn lr_test(alt: &MixtureFit, null: &MixtureFit) -> Result<LrTestResult> {
    if alt.cohort != null.cohort {
        return Err(Error::CohortMismatch);
    }
    let diff = alt.loglik - null.loglik;
    if diff < -1e-9 {
        return Err(Error::InvalidArgument(format!(
            "alternative log-likelihood is below the null by {}",
            -diff
        )));
    }
    let statistic = (2.0 * diff).max(0.0);
    let p_value = if statistic == 0.0 {
        1.0
    } else {
        let sf = |df: f64| 1.0 - ChiSquared::new(df).expect("positive df").cdf(statistic);
        (0.5 * sf(1.0) + 0.5 * sf(2.0)).clamp(0.0, 1.0)
    };
    Ok(LrTestResult {
        statistic,
        p_value,
        df_convention: SELF_LIANG_CONVENTION.to_string(),
    })
}

/// Posterior atom memberships, n x k, rows summing to one.
pub fn posterior_memberships(
    fit: &MixtureFit,
    units: &[UnitObservations],
    family: &Family,
) -> Vec<Vec<f64>> {
    responsibilities(units, &fit.atoms, &fit.masses, family).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cohort(rows: &[(u64, u64)]) -> Vec<UnitObservations> {
        rows.iter()
            .enumerate()
            .map(|(i, &(y, n))| UnitObservations::binomial(format!("u{i}"), y, n).unwrap())
            .collect()
    }

    #[test]
    fn identical_units_collapse_to_one_atom() {
        let units = cohort(&[(7, 50), (7, 50), (7, 50)]);
        let fit = em_fit(&units, &Family::Binomial, &EmConfig::default()).unwrap();
        assert_eq!(fit.atoms.len(), 1);
        assert_abs_diff_eq!(fit.atoms[0].component(0), 7.0 / 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.masses[0], 1.0, epsilon = 1e-12);
        let null = degenerate_fit(&units, &Family::Binomial).unwrap();
        let lr = lr_test(&fit, &null).unwrap();
        assert_abs_diff_eq!(lr.statistic, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn separated_pair_recovers_both_estimates() {
        let units = cohort(&[(1_000, 100_000), (30_000, 100_000)]);
        let fit = em_fit(&units, &Family::Binomial, &EmConfig::default()).unwrap();
        assert_eq!(fit.atoms.len(), 2);
        let mut pairs: Vec<_> = fit
            .atoms
            .iter()
            .map(|a| a.component(0))
            .zip(&fit.masses)
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_abs_diff_eq!(pairs[0].0, 0.01, epsilon = 1e-3);
        assert_abs_diff_eq!(pairs[1].0, 0.30, epsilon = 1e-3);
        assert_abs_diff_eq!(*pairs[0].1, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn degenerate_of_single_unit_is_its_mle() {
        let units = cohort(&[(3, 17)]);
        let fit = degenerate_fit(&units, &Family::Binomial).unwrap();
        assert_eq!(fit.atoms[0], mle(&units[0], &Family::Binomial).unwrap());
        assert!(degenerate_fit(&[], &Family::Binomial).is_err());
    }

    #[test]
    fn lr_equal_fits_and_mismatch() {
        let units = cohort(&[(3, 17), (9, 20)]);
        let null = degenerate_fit(&units, &Family::Binomial).unwrap();
        let lr = lr_test(&null, &null).unwrap();
        assert_eq!(lr.statistic, 0.0);
        assert_eq!(lr.p_value, 1.0);
        assert_eq!(lr.df_convention, SELF_LIANG_CONVENTION);

        let other = degenerate_fit(&cohort(&[(3, 17)]), &Family::Binomial).unwrap();
        assert!(matches!(lr_test(&null, &other), Err(Error::CohortMismatch)));
    }

    #[test]
    fn lr_p_value_matches_closed_form() {
        // chi2(1) sf = erfc(sqrt(x/2)), chi2(2) sf = exp(-x/2)
        let units = cohort(&[(3, 17), (9, 20)]);
        let mut null = degenerate_fit(&units, &Family::Binomial).unwrap();
        null.loglik = -10.0;
        let mut alt = null.clone();
        alt.loglik = -8.0;
        let lr = lr_test(&alt, &null).unwrap();
        assert_abs_diff_eq!(lr.statistic, 4.0, epsilon = 1e-12);
        let want = 0.5 * 0.045_500_263_896_358_42 + 0.5 * (-2.0f64).exp();
        assert_abs_diff_eq!(lr.p_value, want, epsilon = 1e-9);
    }

    #[test]
    fn memberships_are_row_stochastic() {
        let units = cohort(&[(1, 100), (2, 90), (20, 100), (25, 110)]);
        let fit = em_fit(&units, &Family::Binomial, &EmConfig::default()).unwrap();
        for row in posterior_memberships(&fit, &units, &Family::Binomial) {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        let null = degenerate_fit(&units, &Family::Binomial).unwrap();
        for row in posterior_memberships(&null, &units, &Family::Binomial) {
            assert_eq!(row, vec![1.0]);
        }
    }

    #[test]
    fn atom_cap_is_respected() {
        let units = cohort(&[(1, 100), (2, 90), (20, 100), (25, 110), (60, 100)]);
        let config = EmConfig {
            max_atoms: Some(2),
            ..EmConfig::default()
        };
        let fit = em_fit(&units, &Family::Binomial, &config).unwrap();
        assert!(fit.atoms.len() <= 2);
        let free = em_fit(&units, &Family::Binomial, &EmConfig::default()).unwrap();
        assert!(free.loglik >= fit.loglik - 1e-9);
        assert!(em_fit(
            &units,
            &Family::Binomial,
            &EmConfig {
                max_atoms: Some(0),
                ..config
            }
        )
        .is_err());
    }

    #[test]
    fn iteration_cap_reports_best_fit() {
        let units = cohort(&[(1, 100), (2, 90), (20, 100), (25, 110)]);
        let config = EmConfig {
            max_iter: 3,
            ..EmConfig::default()
        };
        match em_fit(&units, &Family::Binomial, &config) {
            Err(Error::EmNotConverged { fit }) => {
                assert_eq!(fit.iterations, 3);
                assert!(!fit.converged);
                assert!(fit.loglik.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn multinomial_em_runs() {
        let fam = Family::Multinomial {
            categories: vec!["a".into(), "b".into(), "c".into()],
        };
        let units: Vec<_> = [[10, 5, 5], [9, 6, 5], [1, 1, 18], [2, 0, 18]]
            .iter()
            .enumerate()
            .map(|(i, c)| UnitObservations::multinomial(format!("m{i}"), c.to_vec()).unwrap())
            .collect();
        let fit = em_fit(&units, &fam, &EmConfig::default()).unwrap();
        let null = degenerate_fit(&units, &fam).unwrap();
        assert!(fit.loglik >= null.loglik);
        for atom in &fit.atoms {
            assert!(atom.check(&fam).is_ok());
        }
    }
}
