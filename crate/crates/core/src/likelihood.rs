//! Likelihood families, per-unit maximum likelihood and log-kernels.
//!
//! Every likelihood value in the crate is a *kernel*: data-only constants
//! such as binomial coefficients are dropped, so `log_kernel` for a binomial
//! unit is `y ln u + (n - y) ln(1 - u)`. Zero counts contribute nothing
//! (`0 ln 0 = 0`), which keeps boundary estimates at 0 or 1 finite for their
//! own data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sufficient statistics of one unit's repeated measurements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Binomial { successes: u64, trials: u64 },
    Multinomial { counts: Vec<u64> },
}

impl Response {
    /// Total number of measurements (n).
    pub fn total(&self) -> u64 {
        match self {
            Response::Binomial { trials, .. } => *trials,
            Response::Multinomial { counts } => counts.iter().sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitObservations {
    pub unit_id: String,
    pub response: Response,
    #[serde(default)]
    pub covariates: BTreeMap<String, f64>,
}

impl UnitObservations {
    pub fn binomial(unit_id: impl Into<String>, successes: u64, trials: u64) -> Result<Self> {
        let unit_id = unit_id.into();
        if trials == 0 {
            return Err(Error::Schema(format!(
                "unit {unit_id}: trials must be at least 1"
            )));
        }
        if successes > trials {
            return Err(Error::Schema(format!(
                "unit {unit_id}: successes ({successes}) exceed trials ({trials})"
            )));
        }
        Ok(Self {
            unit_id,
            response: Response::Binomial { successes, trials },
            covariates: BTreeMap::new(),
        })
    }

    pub fn multinomial(unit_id: impl Into<String>, counts: Vec<u64>) -> Result<Self> {
        let unit_id = unit_id.into();
        if counts.len() < 2 {
            return Err(Error::Schema(format!(
                "unit {unit_id}: need at least 2 categories"
            )));
        }
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::Schema(format!(
                "unit {unit_id}: total count must be at least 1"
            )));
        }
        Ok(Self {
            unit_id,
            response: Response::Multinomial { counts },
            covariates: BTreeMap::new(),
        })
    }

    /// Collapses a raw 0/1 sequence to its binomial sufficient statistic.
    pub fn from_binary_sequence(unit_id: impl Into<String>, outcomes: &[bool]) -> Result<Self> {
        let successes = outcomes.iter().filter(|&&b| b).count() as u64;
        Self::binomial(unit_id, successes, outcomes.len() as u64)
    }

    pub fn with_covariate(mut self, name: impl Into<String>, value: f64) -> Self {
        self.covariates.insert(name.into(), value);
        self
    }

    pub fn covariate(&self, name: &str) -> Option<f64> {
        self.covariates.get(name).copied()
    }
}

/// Likelihood family shared by every unit in a cohort.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Binomial,
    Multinomial { categories: Vec<String> },
}

impl Family {
    /// Dimension m of the parameter vector.
    pub fn dimension(&self) -> usize {
        match self {
            Family::Binomial => 1,
            Family::Multinomial { categories } => categories.len(),
        }
    }

    pub fn check_unit(&self, unit: &UnitObservations) -> Result<()> {
        match (self, &unit.response) {
            (Family::Binomial, Response::Binomial { successes, trials }) => {
                if *trials == 0 || successes > trials {
                    return Err(Error::Schema(format!(
                        "unit {}: invalid binomial counts {successes}/{trials}",
                        unit.unit_id
                    )));
                }
                Ok(())
            }
            (Family::Multinomial { categories }, Response::Multinomial { counts }) => {
                if counts.len() != categories.len() {
                    return Err(Error::Schema(format!(
                        "unit {}: {} counts for {} categories",
                        unit.unit_id,
                        counts.len(),
                        categories.len()
                    )));
                }
                if counts.iter().sum::<u64>() == 0 {
                    return Err(Error::Schema(format!(
                        "unit {}: zero total count",
                        unit.unit_id
                    )));
                }
                Ok(())
            }
            _ => Err(Error::Schema(format!(
                "unit {}: response does not match the {} family",
                unit.unit_id,
                self.name()
            ))),
        }
    }

    pub fn check_cohort(&self, units: &[UnitObservations]) -> Result<()> {
        units.iter().try_for_each(|u| self.check_unit(u))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Binomial => "binomial",
            Family::Multinomial { .. } => "multinomial",
        }
    }
}

/// Parameter vector of one unit: a probability for binomial units, a point
/// on the simplex for multinomial ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn scalar(u: f64) -> Self {
        ParamVector(vec![u])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn component(&self, index: usize) -> f64 {
        self.0[index]
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &ParamVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn check(&self, family: &Family) -> Result<()> {
        if self.0.len() != family.dimension() {
            return Err(Error::Schema(format!(
                "parameter has {} components, family needs {}",
                self.0.len(),
                family.dimension()
            )));
        }
        if self.0.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Schema("parameter outside [0, 1]".into()));
        }
        if let Family::Multinomial { .. } = family {
            let total: f64 = self.0.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Schema(format!("simplex parameter sums to {total}")));
            }
        }
        Ok(())
    }
}

/// `count * ln(p)` with `0 ln 0 = 0`.
#[inline]
fn xlogp(count: f64, ln_p: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        count * ln_p
    }
}

/// Closed-form maximum likelihood estimate (observed proportions).
pub fn mle(unit: &UnitObservations, family: &Family) -> Result<ParamVector> {
    family.check_unit(unit)?;
    Ok(proportions(&unit.response))
}

fn proportions(response: &Response) -> ParamVector {
    match response {
        Response::Binomial { successes, trials } => {
            ParamVector::scalar(*successes as f64 / *trials as f64)
        }
        Response::Multinomial { counts } => {
            let total = counts.iter().sum::<u64>() as f64;
            ParamVector(counts.iter().map(|&c| c as f64 / total).collect())
        }
    }
}

/// Log-kernel of a unit's data at `params`; `-inf` when a positive count
/// meets a zero probability.
pub fn log_kernel(unit: &UnitObservations, params: &ParamVector, family: &Family) -> f64 {
    debug_assert!(family.check_unit(unit).is_ok());
    match &unit.response {
        Response::Binomial { successes, trials } => {
            let u = params.0[0];
            let y = *successes as f64;
            let failures = (*trials - *successes) as f64;
            xlogp(y, u.ln()) + xlogp(failures, (-u).ln_1p())
        }
        Response::Multinomial { counts } => counts
            .iter()
            .zip(&params.0)
            .map(|(&c, &p)| xlogp(c as f64, p.ln()))
            .sum(),
    }
}

/// MLE on the pooled sufficient statistics of the whole cohort.
pub fn pooled_mle(units: &[UnitObservations], family: &Family) -> Result<ParamVector> {
    if units.is_empty() {
        return Err(Error::TooFewUnits { needed: 1, got: 0 });
    }
    family.check_cohort(units)?;
    let weights = vec![1.0; units.len()];
    Ok(weighted_mle(units, &weights))
}

/// MLE of a single parameter shared by `units`, each unit's sufficient
/// statistics scaled by its weight. This is the EM M-step atom update.
///
/// Falls back to the unweighted pooled estimate when all weights vanish.
pub fn weighted_mle(units: &[UnitObservations], weights: &[f64]) -> ParamVector {
    debug_assert_eq!(units.len(), weights.len());
    let total_weight: f64 = weights.iter().sum();
    let weights: Vec<f64> = if total_weight > 0.0 {
        weights.to_vec()
    } else {
        vec![1.0; units.len()]
    };
    match &units[0].response {
        Response::Binomial { .. } => {
            let (mut num, mut den) = (0.0, 0.0);
            for (unit, &w) in units.iter().zip(&weights) {
                if let Response::Binomial { successes, trials } = unit.response {
                    num += w * successes as f64;
                    den += w * trials as f64;
                }
            }
            ParamVector::scalar((num / den).clamp(0.0, 1.0))
        }
        Response::Multinomial { counts } => {
            let mut acc = vec![0.0; counts.len()];
            for (unit, &w) in units.iter().zip(&weights) {
                if let Response::Multinomial { counts } = &unit.response {
                    for (a, &c) in acc.iter_mut().zip(counts) {
                        *a += w * c as f64;
                    }
                }
            }
            let total: f64 = acc.iter().sum();
            ParamVector(acc.into_iter().map(|a| a / total).collect())
        }
    }
}
