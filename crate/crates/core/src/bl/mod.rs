//! Bounded-Lipschitz distance
//!
//! `d_BL(μ, ν) = sup { Σ φ_i (μ_i − ν_i) : |φ_i| ≤ c, |φ_i − φ_j| ≤ ℓ d_ij, c + ℓ ≤ 1 }`
//!
//! with the Lipschitz constraints imposed on the edges of a graph whose
//! shortest-path distance is the metric. For fixed `(c, ℓ)` the inner
//! problem is the dual of a transport problem in which mass may also be
//! created or destroyed at unit cost `c`; it is solved exactly as a
//! min-cost flow. The outer maximisation over `c` is a concave
//! piecewise-linear problem handled by line intersection.

mod flow;
mod metric;
mod simplex;
pub mod stability;

pub use flow::{bl_distance, bl_distance_at, FlowSolution};
pub use metric::Metric;
pub use simplex::{bl_oracle, simplex_max, LpOutcome, ORACLE_MAX_NODES};

use crate::error::{Error, Result};
use crate::grid::{PhaseDensity, ScalarField};
use serde::{Deserialize, Serialize};

/// Signed node weights on the nodes of a [`Metric`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Measure("empty measure".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Measure("non-finite weight".into()));
        }
        Ok(Self { weights })
    }

    /// Point mass of weight 1 at `node`.
    pub fn dirac(len: usize, node: usize) -> Self {
        let mut w = vec![0.0; len];
        w[node] = 1.0;
        Self { weights: w }
    }

    /// Cell masses `ρ h²` of a density on the spatial grid.
    pub fn from_density(rho: &ScalarField) -> Self {
        let a = rho.grid().cell_area();
        Self { weights: rho.data().iter().map(|r| r * a).collect() }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Dual certificate of a distance evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzDualSolution {
    pub phi: Vec<f64>,
    /// Measured `max |φ_i|`.
    pub sup_norm_used: f64,
    /// Measured `max |φ_i − φ_j| / d_ij` over the constraint edges.
    pub lip_const_used: f64,
    /// `Σ φ_i (μ_i − ν_i)`.
    pub objective: f64,
}

/// Serializable distance instance for regression fixtures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlInstance {
    pub metric: Metric,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
}

pub(crate) fn difference(mu: &DiscreteMeasure, nu: &DiscreteMeasure, metric: &Metric) -> Result<Vec<f64>> {
    let n = metric.nodes();
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::Measure("empty measure".into()));
    }
    if mu.len() != n || nu.len() != n {
        return Err(Error::Measure(format!(
            "measure sizes {} and {} do not match the {n} metric nodes",
            mu.len(),
            nu.len()
        )));
    }
    if mu.weights.iter().chain(&nu.weights).any(|w| !w.is_finite()) {
        return Err(Error::Measure("non-finite weight".into()));
    }
    Ok(mu.weights.iter().zip(&nu.weights).map(|(a, b)| a - b).collect())
}

/// `d_BL(ρ_a, ρ_b)` for two densities on the same torus grid.
pub fn bl_density(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let metric = Metric::torus(a.grid().n(), a.grid().side());
    Ok(bl_distance(&DiscreteMeasure::from_density(a), &DiscreteMeasure::from_density(b), &metric)?.0)
}

/// Sums `f` over blocks of `rx × rx` spatial and `rv × rv` velocity cells
/// and returns the coarse cell masses with the matching phase metric.
pub fn coarse_phase_measure(f: &PhaseDensity, rx: usize, rv: usize) -> Result<(DiscreteMeasure, Metric)> {
    let (nx, nv) = (f.space().n(), f.vel().n());
    if rx == 0 || rv == 0 || nx % rx != 0 || nv % rv != 0 {
        return Err(Error::Measure(format!("coarsening {rx}/{rv} does not divide {nx}/{nv}")));
    }
    let (cx, cv) = (nx / rx, nv / rv);
    let mut w = vec![0.0; cx * cx * cv * cv];
    let vol = f.cell_volume();
    for i1 in 0..nx {
        for i2 in 0..nx {
            let blk = f.block(i1 * nx + i2);
            let xc = (i1 / rx) * cx + i2 / rx;
            for j1 in 0..nv {
                for j2 in 0..nv {
                    let vc = (j1 / rv) * cv + j2 / rv;
                    w[xc * cv * cv + vc] += blk[j1 * nv + j2] * vol;
                }
            }
        }
    }
    let metric = Metric::phase(cx, f.space().side(), cv, f.vel().v_max());
    Ok((DiscreteMeasure { weights: w }, metric))
}

/// Phase-space `d_BL(f, g)` after coarsening both densities.
pub fn bl_phase(f: &PhaseDensity, g: &PhaseDensity, rx: usize, rv: usize) -> Result<f64> {
    if !f.same_grids(g) {
        return Err(Error::GridMismatch);
    }
    let (a, metric) = coarse_phase_measure(f, rx, rv)?;
    let (b, _) = coarse_phase_measure(g, rx, rv)?;
    Ok(bl_distance(&a, &b, &metric)?.0)
}
