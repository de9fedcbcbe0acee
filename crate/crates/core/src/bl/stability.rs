//! Density stability in `d_BL` under perturbed continuity equations.
//!
//! Two densities are transported by `∂t ρ + ∇·(ρ u) = 0` with velocities
//! `u_a`, `u_b`. Along the run the report compares
//! `LHS(t) = d²_BL(ρ_a(t), ρ_b(t))` with the budget
//! `RHS(t) = d²_BL(ρ_a(0), ρ_b(0)) + ∫₀ᵗ ∫ |u_a − u_b|² ρ_a`.

use super::bl_density;
use crate::error::{Error, Result};
use crate::grid::{ScalarField, VectorField};
use crate::limit::AdvDiff;
use crate::spectral::Spectral;
use serde::{Deserialize, Serialize};

/// Below this `LHS` the ratio is not evaluated.
pub const LHS_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `min_t RHS/LHS` over records with `LHS > LHS_FLOOR`; `None` when the
    /// two densities never separate.
    pub ratio_min: Option<f64>,
    /// `sup_t ‖∇u_b‖∞` over the records.
    pub lip_b: f64,
    pub steps: usize,
}

impl StabilityReport {
    /// Fitted constant `C = 1 / min ratio`.
    pub fn constant(&self) -> Option<f64> {
        self.ratio_min.map(|r| 1.0 / r)
    }

    pub fn lhs_max(&self) -> f64 {
        self.lhs.iter().fold(0.0, |m, &x| m.max(x))
    }
}

fn lipschitz(spec: &Spectral, u: &VectorField) -> f64 {
    spec.grad_tensor(u).iter().map(|g| g.max_abs()).fold(0.0, f64::max)
}

/// Runs both continuity equations with `steps` equal steps to `t_end` and
/// records every `record_every` steps.
pub fn bl_stability_experiment(
    rho_a0: &ScalarField,
    rho_b0: &ScalarField,
    u_a: &dyn Fn(f64) -> VectorField,
    u_b: &dyn Fn(f64) -> VectorField,
    t_end: f64,
    steps: usize,
    record_every: usize,
) -> Result<StabilityReport> {
    if rho_a0.grid() != rho_b0.grid() {
        return Err(Error::GridMismatch);
    }
    if steps == 0 || record_every == 0 {
        return Err(Error::Trajectory("steps and stride must be positive".into()));
    }
    let grid = *rho_a0.grid();
    let spec = Spectral::new(grid);
    let mut ad = AdvDiff::continuity(spec.clone());
    let dt = t_end / steps as f64;
    let d0 = bl_density(rho_a0, rho_b0)?;
    let budget0 = d0 * d0;
    let (mut ra, mut rb) = (rho_a0.clone(), rho_b0.clone());
    let gap = |ua: &VectorField, ub: &VectorField, r: &ScalarField| ua.sub(ub).norm_sq().zip_map(r, |a, b| a * b).integral();
    let mut ua = u_a(0.0);
    let mut ub = u_b(0.0);
    let mut lip_b = lipschitz(&spec, &ub);
    if !lip_b.is_finite() {
        return Err(Error::NonFinite("velocity gradient"));
    }
    let mut acc = 0.0;
    let mut g_prev = gap(&ua, &ub, &ra);
    let mut rep = StabilityReport { times: vec![0.0], lhs: vec![budget0], rhs: vec![budget0], ratio_min: None, lip_b, steps };
    for k in 1..=steps {
        let t = k as f64 * dt;
        let ua1 = u_a(t);
        let ub1 = u_b(t);
        ra = ad.step(&ra, &ua, &ua1, dt)?;
        rb = ad.step(&rb, &ub, &ub1, dt)?;
        ua = ua1;
        ub = ub1;
        let g = gap(&ua, &ub, &ra);
        acc += 0.5 * dt * (g + g_prev);
        g_prev = g;
        if k % record_every == 0 || k == steps {
            lip_b = lip_b.max(lipschitz(&spec, &ub));
            let d = bl_density(&ra, &rb)?;
            rep.times.push(t);
            rep.lhs.push(d * d);
            rep.rhs.push(budget0 + acc);
        }
    }
    rep.lip_b = lip_b;
    rep.ratio_min = rep
        .lhs
        .iter()
        .zip(&rep.rhs)
        .filter(|(l, _)| **l > LHS_FLOOR)
        .map(|(l, r)| r / l)
        .reduce(f64::min);
    Ok(rep)
}
