//! The z-matrix: row-normalised likelihoods of each unit's data under every
//! unit's fitted parameters, plus the diagnostics derived from it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{log_kernel, mle, Family, ParamVector, UnitObservations};

/// Row-stochastic n x n similarity matrix with its unit ordering.
///
/// `entries` is row-major: `entries[i * n + j]` is z_ij, the posterior mass
/// of unit j's estimate given unit i's data under the empirical prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZMatrix {
    pub order: Vec<String>,
    pub estimates: Vec<ParamVector>,
    pub covariates: Vec<BTreeMap<String, f64>>,
    pub entries: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZDiagnostics {
    pub diag: Vec<f64>,
    pub colsum: Vec<f64>,
    pub trace_over_n: f64,
    /// z_{+j} - z_jj
    pub excess: Vec<f64>,
    /// z_jj / z_{+j}
    pub ratio: Vec<f64>,
}

impl ZMatrix {
    pub fn n(&self) -> usize {
        self.order.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.entries[i * n..(i + 1) * n]
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.n();
        let mut sums = vec![0.0; n];
        for i in 0..n {
            for (s, z) in sums.iter_mut().zip(self.row(i)) {
                *s += z;
            }
        }
        sums
    }

    /// Position of `unit_id` in the current order.
    pub fn index_of(&self, unit_id: &str) -> Option<usize> {
        self.order.iter().position(|id| id == unit_id)
    }

    /// Scalar estimate used for ordering and plotting.
    pub fn scalar_estimates(&self, component: usize) -> Vec<f64> {
        self.estimates
            .iter()
            .map(|e| e.component(component))
            .collect()
    }
}

/// Normalises a row of log-weights in place into probabilities, subtracting
/// the row maximum first. Sums run in ascending index order.
pub(crate) fn normalize_log_row(row: &mut [f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
    max + total.ln()
}

/// z-matrix of a cohort from per-unit MLEs.
pub fn compute_z(units: &[UnitObservations], family: &Family) -> Result<ZMatrix> {
    if units.len() < 2 {
        return Err(Error::TooFewUnits {
            needed: 2,
            got: units.len(),
        });
    }
    family.check_cohort(units)?;
    let estimates = units
        .iter()
        .map(|u| mle(u, family))
        .collect::<Result<Vec<_>>>()?;
    Ok(compute_z_with_estimates(units, estimates, family))
}

/// z-matrix for arbitrary (caller-supplied) estimates aligned with `units`.
pub fn compute_z_with_estimates(
    units: &[UnitObservations],
    estimates: Vec<ParamVector>,
    family: &Family,
) -> ZMatrix {
    let n = units.len();
    let mut entries = vec![0.0; n * n];
    for (i, unit) in units.iter().enumerate() {
        let row = &mut entries[i * n..(i + 1) * n];
        for (slot, est) in row.iter_mut().zip(&estimates) {
            *slot = log_kernel(unit, est, family);
        }
        normalize_log_row(row);
    }
    ZMatrix {
        order: units.iter().map(|u| u.unit_id.clone()).collect(),
        estimates,
        covariates: units.iter().map(|u| u.covariates.clone()).collect(),
        entries,
    }
}

pub fn diagnostics(z: &ZMatrix) -> ZDiagnostics {
    let n = z.n();
    let diag: Vec<f64> = (0..n).map(|i| z.get(i, i)).collect();
    let colsum = z.column_sums();
    let trace_over_n = diag.iter().sum::<f64>() / n as f64;
    let excess = colsum.iter().zip(&diag).map(|(c, d)| c - d).collect();
    let ratio = colsum.iter().zip(&diag).map(|(c, d)| d / c).collect();
    ZDiagnostics {
        diag,
        colsum,
        trace_over_n,
        excess,
        ratio,
    }
}

/// Shrinkage predictions E_e(u_i | y_i) = sum_j z_ij u_j.
pub fn shrink_estimates(z: &ZMatrix) -> Vec<ParamVector> {
    let m = z.estimates.first().map_or(0, ParamVector::len);
    (0..z.n())
        .map(|i| {
            let mut acc = vec![0.0; m];
            for (w, est) in z.row(i).iter().zip(&z.estimates) {
                for (a, v) in acc.iter_mut().zip(est.values()) {
                    *a += w * v;
                }
            }
            ParamVector(acc)
        })
        .collect()
}

/// Index convention for covariate smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingConvention {
    /// Weights z_ki / z_{+i}; they sum to one for every i.
    #[default]
    Normalized,
    /// The printed form sum_k x_k z_ik / z_{+k}, which is not normalised.
    Literal,
}

/// Smoothing weights w_ik with `smoothed_i = sum_k w_ik x_k`.
pub fn smoothing_weights(z: &ZMatrix, convention: SmoothingConvention) -> Vec<Vec<f64>> {
    let n = z.n();
    let colsum = z.column_sums();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|k| match convention {
                    SmoothingConvention::Normalized => z.get(k, i) / colsum[i],
                    SmoothingConvention::Literal => z.get(i, k) / colsum[k],
                })
                .collect()
        })
        .collect()
}

/// Expected covariate given each unit's estimate.
pub fn smooth_covariates(
    z: &ZMatrix,
    x: &[f64],
    convention: SmoothingConvention,
) -> Result<Vec<f64>> {
    if x.len() != z.n() {
        return Err(Error::LengthMismatch {
            expected: z.n(),
            got: x.len(),
        });
    }
    if let Some(bad) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "covariate value at position {bad}"
        )));
    }
    Ok(smoothing_weights(z, convention)
        .iter()
        .map(|w| w.iter().zip(x).map(|(w, x)| w * x).sum())
        .collect())
}

/// Density n^-1 z_{+j} and its running sum Z_k, in the matrix's current order.
pub fn density_weights(z: &ZMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = z.n() as f64;
    let density: Vec<f64> = z.column_sums().into_iter().map(|c| c / n).collect();
    let cdf = density
        .iter()
        .scan(0.0, |acc, d| {
            *acc += d;
            Some(*acc)
        })
        .collect();
    (density, cdf)
}

/// How to order units for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderSpec {
    ByEstimate {
        component: usize,
        descending: bool,
    },
    /// Group by covariate value in the listed level order (unlisted levels
    /// follow in ascending order), then by estimate within group.
    ByCovariateThenEstimate {
        covariate: String,
        levels: Vec<f64>,
        component: usize,
        descending: bool,
    },
    Explicit(Vec<String>),
}

/// Permutation `perm` such that the new position p holds old unit `perm[p]`.
pub fn ordering_permutation(z: &ZMatrix, spec: &OrderSpec) -> Result<Vec<usize>> {
    let n = z.n();
    let mut perm: Vec<usize> = (0..n).collect();
    let by_estimate = |component: usize, descending: bool, a: usize, b: usize| {
        let (ea, eb) = (
            z.estimates[a].component(component),
            z.estimates[b].component(component),
        );
        if descending {
            eb.total_cmp(&ea)
        } else {
            ea.total_cmp(&eb)
        }
    };
    match spec {
        OrderSpec::ByEstimate {
            component,
            descending,
        } => {
            check_component(z, *component)?;
            perm.sort_by(|&a, &b| by_estimate(*component, *descending, a, b));
        }
        OrderSpec::ByCovariateThenEstimate {
            covariate,
            levels,
            component,
            descending,
        } => {
            check_component(z, *component)?;
            let values = z
                .covariates
                .iter()
                .zip(&z.order)
                .map(|(c, id)| {
                    c.get(covariate).copied().ok_or_else(|| {
                        Error::Ordering(format!("unit {id} has no covariate `{covariate}`"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let rank = |v: f64| {
                levels
                    .iter()
                    .position(|&l| l == v)
                    .map_or((1usize, v), |p| (0, p as f64))
            };
            perm.sort_by(|&a, &b| {
                let (ra, rb) = (rank(values[a]), rank(values[b]));
                ra.0.cmp(&rb.0)
                    .then(ra.1.total_cmp(&rb.1))
                    .then_with(|| by_estimate(*component, *descending, a, b))
            });
        }
        OrderSpec::Explicit(ids) => {
            if ids.len() != n {
                return Err(Error::Ordering(format!(
                    "explicit order lists {} ids for {n} units",
                    ids.len()
                )));
            }
            let mut seen = vec![false; n];
            for (slot, id) in perm.iter_mut().zip(ids) {
                let idx = z
                    .index_of(id)
                    .ok_or_else(|| Error::Ordering(format!("unknown unit id `{id}`")))?;
                if std::mem::replace(&mut seen[idx], true) {
                    return Err(Error::Ordering(format!("unit id `{id}` listed twice")));
                }
                *slot = idx;
            }
        }
    }
    Ok(perm)
}

fn check_component(z: &ZMatrix, component: usize) -> Result<()> {
    match z.estimates.first() {
        Some(e) if component >= e.len() => Err(Error::Ordering(format!(
            "component {component} out of range for dimension {}",
            e.len()
        ))),
        _ => Ok(()),
    }
}

/// Applies a permutation to rows, columns and metadata.
pub fn permute(z: &ZMatrix, perm: &[usize]) -> ZMatrix {
    let n = z.n();
    let mut entries = Vec::with_capacity(n * n);
    for &i in perm {
        for &j in perm {
            entries.push(z.get(i, j));
        }
    }
    ZMatrix {
        order: perm.iter().map(|&i| z.order[i].clone()).collect(),
        estimates: perm.iter().map(|&i| z.estimates[i].clone()).collect(),
        covariates: perm.iter().map(|&i| z.covariates[i].clone()).collect(),
        entries,
    }
}

pub fn reorder(z: &ZMatrix, spec: &OrderSpec) -> Result<ZMatrix> {
    let perm = ordering_permutation(z, spec)?;
    Ok(permute(z, &perm))
}
