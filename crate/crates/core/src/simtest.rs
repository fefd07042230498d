//! Null simulations for graphical testing: every unit shares the pooled
//! estimate, keeps its observed number of trials, and the simulated cohort
//! is turned into a z-matrix just like the observed one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{pooled_mle, Family, ParamVector, Response, UnitObservations};
use crate::zmatrix::{compute_z, reorder, OrderSpec, ZMatrix};

pub const DEFAULT_LINEUP_REPLICATES: usize = 3;
pub const DEFAULT_TAIL_REPLICATES: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderRule {
    /// Descending by the first component of the simulated estimate.
    #[default]
    DescendingBySimulatedEstimate,
    /// Keep the cohort's input order.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub replicates: usize,
    pub order_rule: OrderRule,
}

/// Generator for one replicate: the seed picks the key, the replicate index
/// picks the stream, so replicates are independent of evaluation order.
pub fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

fn draw_response(response: &Response, params: &ParamVector, rng: &mut ChaCha8Rng) -> Response {
    match response {
        Response::Binomial { trials, .. } => {
            let u = params.component(0);
            let successes = Binomial::new(*trials, u)
                .expect("probability in [0, 1]")
                .sample(rng);
            Response::Binomial {
                successes,
                trials: *trials,
            }
        }
        Response::Multinomial { counts } => {
            // sequential conditional binomials
            let mut remaining = counts.iter().sum::<u64>();
            let mut mass_left = 1.0;
            let k = counts.len();
            let mut drawn = Vec::with_capacity(k);
            for (c, &p) in params.values().iter().enumerate() {
                let count = if c + 1 == k || remaining == 0 {
                    remaining
                } else {
                    let q = (p / mass_left).clamp(0.0, 1.0);
                    Binomial::new(remaining, q)
                        .expect("probability in [0, 1]")
                        .sample(rng)
                };
                drawn.push(count);
                remaining -= count;
                mass_left -= p;
            }
            Response::Multinomial { counts: drawn }
        }
    }
}

/// One simulated cohort under the pooled-estimate null.
pub fn simulate_cohort(
    units: &[UnitObservations],
    pooled: &ParamVector,
    rng: &mut ChaCha8Rng,
) -> Vec<UnitObservations> {
    units
        .iter()
        .map(|u| UnitObservations {
            unit_id: u.unit_id.clone(),
            response: draw_response(&u.response, pooled, rng),
            covariates: u.covariates.clone(),
        })
        .collect()
}

/// Simulated z-matrices, in replicate order.
pub fn simulate_null(
    units: &[UnitObservations],
    family: &Family,
    config: &SimConfig,
) -> Result<Vec<ZMatrix>> {
    if config.replicates == 0 {
        return Err(Error::InvalidArgument(
            "replicates must be at least 1".into(),
        ));
    }
    let pooled = pooled_mle(units, family)?;
    (0..config.replicates)
        .map(|r| {
            let mut rng = replicate_rng(config.seed, r);
            let sim = simulate_cohort(units, &pooled, &mut rng);
            let z = compute_z(&sim, family)?;
            match config.order_rule {
                OrderRule::Fixed => Ok(z),
                OrderRule::DescendingBySimulatedEstimate => reorder(
                    &z,
                    &OrderSpec::ByEstimate {
                        component: 0,
                        descending: true,
                    },
                ),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Seed-determined position.
    #[default]
    Random,
    TopLeft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", content = "index", rename_all = "snake_case")]
pub enum PanelSource {
    Observed,
    Simulated(usize),
}

/// Sidecar record disclosing where the observed panel is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineupAnswer {
    pub seed: u64,
    pub observed_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineupLayout {
    pub rows: usize,
    pub cols: usize,
    /// Row-major panel sources, length `rows * cols` minus unused trailing cells.
    pub panels: Vec<PanelSource>,
    pub answer: LineupAnswer,
}

/// Grid for `panels` cells: as square as possible, wider than tall.
pub fn grid_shape(panels: usize) -> (usize, usize) {
    let mut cols = 1;
    while cols * cols < panels {
        cols += 1;
    }
    let rows = panels.div_ceil(cols);
    (rows, cols)
}

/// Lays the observed panel out among `simulated` null panels.
pub fn lineup_panels(simulated: usize, seed: u64, placement: Placement) -> Result<LineupLayout> {
    if simulated == 0 {
        return Err(Error::InvalidArgument(
            "need at least one simulated matrix".into(),
        ));
    }
    let total = simulated + 1;
    let (rows, cols) = grid_shape(total);
    let observed_index = match placement {
        Placement::TopLeft => 0,
        // stream past any replicate index
        Placement::Random => replicate_rng(seed, usize::MAX).random_range(0..total),
    };
    let mut next_sim = 0;
    let panels = (0..total)
        .map(|p| {
            if p == observed_index {
                PanelSource::Observed
            } else {
                next_sim += 1;
                PanelSource::Simulated(next_sim - 1)
            }
        })
        .collect();
    Ok(LineupLayout {
        rows,
        cols,
        panels,
        answer: LineupAnswer {
            seed,
            observed_index,
        },
    })
}
