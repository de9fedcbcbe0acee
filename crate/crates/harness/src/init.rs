//! Initial data for the rate experiments.

use crate::config::{InitialData, Recipe};
use vfpns::entropy::{maxwellian, MaxwellianParams};
use vfpns::fluid::{divergence_max, FluidState};
use vfpns::{Error, PhaseDensity, Result, ScalarField, SpatialGrid, VectorField, VelocityGrid};

/// `ρ₀ = Z⁻¹ (1 + a cos(2π x₁ / L))` with unit mass.
pub fn cosine_density(grid: SpatialGrid, a: f64) -> ScalarField {
    let k = 2.0 * std::f64::consts::PI / grid.side();
    let r = ScalarField::from_fn(grid, |x| 1.0 + a * (k * x[0]).cos());
    let z = r.integral();
    r.scaled(1.0 / z)
}

/// Taylor–Green field `a (sin k x₁ cos k x₂, −cos k x₁ sin k x₂)`.
pub fn taylor_green(grid: SpatialGrid, a: f64) -> VectorField {
    let k = 2.0 * std::f64::consts::PI / grid.side();
    VectorField::from_fn(grid, |x| {
        let (s1, c1) = (k * x[0]).sin_cos();
        let (s2, c2) = (k * x[1]).sin_cos();
        [a * s1 * c2, -a * c1 * s2]
    })
}

/// Velocity perturbation `a (cos k x₂, sin k x₁)` of the scaled recipe.
pub fn shear(grid: SpatialGrid, a: f64) -> VectorField {
    let k = 2.0 * std::f64::consts::PI / grid.side();
    VectorField::from_fn(grid, |x| [a * (k * x[1]).cos(), a * (k * x[0]).sin()])
}

fn check_limit_data(rho0: &ScalarField, v0: &VectorField) -> Result<()> {
    if rho0.grid() != v0.grid() {
        return Err(Error::GridMismatch);
    }
    if !(rho0.min() > 0.0) {
        return Err(Error::Vacuum(0));
    }
    let mass = rho0.integral();
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::MassMismatch { a: mass, b: 1.0 });
    }
    let div = divergence_max(v0);
    if div > 1e-10 {
        return Err(Error::Trajectory(format!("initial velocity has divergence {div:.3e}")));
    }
    Ok(())
}

/// `f₀ = M_{ρ₀,0}`, `v₀^ε = v₀`.
pub fn init_well_prepared(rho0: &ScalarField, v0: &VectorField, vel: VelocityGrid) -> Result<(PhaseDensity, FluidState)> {
    check_limit_data(rho0, v0)?;
    let f = maxwellian(&MaxwellianParams { rho: rho0.clone(), u: VectorField::zeros(*rho0.grid()) }, vel)?;
    Ok((f, FluidState::new(v0.clone())))
}

/// `f₀ = M_{ρ₀,w}` with `‖w‖_∞ ≤ 1`, `v₀^ε = v₀`. The data do not depend on
/// `ε`; only the weight `ε²` on its entropy does.
pub fn init_scaled_well_prepared(
    rho0: &ScalarField,
    v0: &VectorField,
    w: &VectorField,
    vel: VelocityGrid,
) -> Result<(PhaseDensity, FluidState)> {
    check_limit_data(rho0, v0)?;
    if w.grid() != rho0.grid() {
        return Err(Error::GridMismatch);
    }
    if w.max_abs() > 1.0 {
        return Err(Error::Trajectory(format!("perturbation sup-norm {:.3e} exceeds 1", w.max_abs())));
    }
    let f = maxwellian(&MaxwellianParams { rho: rho0.clone(), u: w.clone() }, vel)?;
    Ok((f, FluidState::new(v0.clone())))
}

/// Limit data `(ρ₀, v₀)` and kinetic data for a recipe.
pub fn build(data: &InitialData, space: SpatialGrid, vel: VelocityGrid) -> Result<(ScalarField, VectorField, PhaseDensity, FluidState)> {
    let rho0 = cosine_density(space, data.rho_amp);
    let v0 = taylor_green(space, data.v_amp);
    let (f, fl) = match data.recipe {
        Recipe::WellPrepared => init_well_prepared(&rho0, &v0, vel)?,
        Recipe::ScaledWellPrepared => init_scaled_well_prepared(&rho0, &v0, &shear(space, data.w_amp), vel)?,
    };
    Ok((rho0, v0, f, fl))
}
