//! Pseudo-spectral incompressible Navier–Stokes with unit viscosity on the
//! torus, and the kinetic drag force.

use crate::blockstats::{all_stats, VelocityCtx};
use crate::error::{Error, Result};
use crate::etd::Etd2;
use crate::fft::C64;
use crate::grid::{PhaseDensity, ScalarField, VectorField};
use crate::spectral::Spectral;

#[derive(Clone, Debug, PartialEq)]
pub struct FluidState {
    pub v: VectorField,
    /// Pressure recovered from the last step; diagnostic only.
    pub p: ScalarField,
    pub t: f64,
}

impl FluidState {
    pub fn new(v: VectorField) -> Self {
        let p = ScalarField::zeros(*v.grid());
        Self { v, p, t: 0.0 }
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.v.norm_sq().integral()
    }
}

pub fn leray_project(w: &VectorField) -> VectorField {
    Spectral::new(*w.grid()).leray(w)
}

/// Sup-norm of the spectral divergence.
pub fn divergence_max(v: &VectorField) -> f64 {
    Spectral::new(*v.grid()).div(v).max_abs()
}

/// `(1/ε) m_f − ρ_f v`.
pub fn drag_force(f: &PhaseDensity, v: &VectorField, eps: f64) -> VectorField {
    let ctx = VelocityCtx::new(*f.vel());
    let stats = all_stats(f, &ctx, false);
    let rho = ScalarField::from_vec(*f.space(), stats.iter().map(|s| s.rho).collect()).unwrap();
    let m = VectorField::from_vecs(
        *f.space(),
        stats.iter().map(|s| s.m[0]).collect(),
        stats.iter().map(|s| s.m[1]).collect(),
    )
    .unwrap();
    drag_from_moments(&rho, &m, v, eps)
}

pub fn drag_from_moments(rho: &ScalarField, m: &VectorField, v: &VectorField, eps: f64) -> VectorField {
    m.scaled(1.0 / eps).sub(&v.times(rho))
}

/// Spectral NS stepper for one grid. Caches the ETD coefficients of the
/// last step size.
pub struct NsSolver {
    spec: Spectral,
    etd: Option<Etd2>,
    /// Courant fraction for the advective check `dt ≤ cfl h / ‖v‖∞`.
    pub cfl: f64,
}

/// Spectral components of a vector field.
pub type Hat2 = [Vec<C64>; 2];

impl NsSolver {
    pub fn new(spec: Spectral) -> Self {
        Self { spec, etd: None, cfl: 1.0 }
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spec
    }

    fn etd(&mut self, dt: f64) -> &Etd2 {
        if self.etd.as_ref().map_or(true, |e| e.dt != dt) {
            self.etd = Some(Etd2::new(&self.spec, dt));
        }
        self.etd.as_ref().unwrap()
    }

    pub fn to_hat(&self, v: &VectorField) -> Hat2 {
        let mut a = [self.spec.forward(v.comp(0)), self.spec.forward(v.comp(1))];
        self.spec.drop_nyquist(&mut a[0]);
        self.spec.drop_nyquist(&mut a[1]);
        a
    }

    pub fn from_hat(&self, a: &Hat2) -> VectorField {
        VectorField::from_vecs(*self.spec.grid(), self.spec.inverse(a[0].clone()), self.spec.inverse(a[1].clone())).unwrap()
    }

    /// `−v·∇v` with 2/3 dealiasing, in spectral form, unprojected.
    pub fn advection_hat(&self, vh: &Hat2) -> Hat2 {
        let s = &self.spec;
        let mut t = vh.clone();
        s.dealias(&mut t[0]);
        s.dealias(&mut t[1]);
        let v0 = s.inverse(t[0].clone());
        let v1 = s.inverse(t[1].clone());
        let mut out: Hat2 = [Vec::new(), Vec::new()];
        for c in 0..2 {
            let d0 = s.inverse(s.deriv_hat(&t[c], 0));
            let d1 = s.inverse(s.deriv_hat(&t[c], 1));
            let prod: Vec<f64> = (0..v0.len()).map(|i| -(v0[i] * d0[i] + v1[i] * d1[i])).collect();
            let mut h = s.forward(&prod);
            s.dealias(&mut h);
            out[c] = h;
        }
        out
    }

    /// Projected right-hand side `P(−v·∇v + F(v))` and the unprojected sum.
    fn rhs(&self, vh: &Hat2, force: &mut dyn FnMut(&VectorField) -> VectorField) -> (Hat2, Hat2) {
        let mut w = self.advection_hat(vh);
        let v = self.from_hat(vh);
        let fv = force(&v);
        let fh = self.to_hat(&fv);
        for c in 0..2 {
            for (a, b) in w[c].iter_mut().zip(&fh[c]) {
                *a += b;
            }
        }
        let full = w.clone();
        let [mut a0, mut a1] = w;
        self.spec.project_hat(&mut a0, &mut a1);
        ([a0, a1], full)
    }

    /// Pressure `p̂ = −i k·Ŵ / |k|²` from the unprojected right-hand side.
    fn pressure(&self, w: &Hat2) -> ScalarField {
        let n = self.spec.n();
        let mut p = vec![C64::new(0.0, 0.0); n * n];
        for i1 in 0..n {
            for i2 in 0..n {
                let kk = self.spec.k2(i1, i2);
                if kk == 0.0 {
                    continue;
                }
                let idx = i1 * n + i2;
                let kd = w[0][idx] * self.spec.k(i1) + w[1][idx] * self.spec.k(i2);
                p[idx] = C64::new(0.0, -1.0) * kd / kk;
            }
        }
        self.spec.to_field(p)
    }

    /// Advances `state` by `dt` with a force that may depend on the stage
    /// velocity.
    pub fn step_with(
        &mut self,
        state: &mut FluidState,
        dt: f64,
        force: &mut dyn FnMut(&VectorField) -> VectorField,
    ) -> Result<()> {
        let vmax = state.v.max_abs();
        let limit = self.cfl * self.spec.grid().h() / vmax.max(1e-300);
        if dt > limit {
            return Err(Error::Cfl { dt, limit });
        }
        let vh = self.to_hat(&state.v);
        let (nu, wu) = self.rhs(&vh, force);
        self.etd(dt);
        let etd = self.etd.as_ref().unwrap();
        let mut a = [etd.predict(&vh[0], &nu[0]), etd.predict(&vh[1], &nu[1])];
        let (na, _) = self.rhs(&a, force);
        let etd = self.etd.as_ref().unwrap();
        etd.correct(&mut a[0], &na[0], &nu[0]);
        etd.correct(&mut a[1], &na[1], &nu[1]);
        let [mut a0, mut a1] = a;
        self.spec.project_hat(&mut a0, &mut a1);
        let a = [a0, a1];
        let v = self.from_hat(&a);
        if !v.all_finite() {
            return Err(Error::NonFinite("fluid velocity"));
        }
        state.p = self.pressure(&wu);
        state.v = v;
        state.t += dt;
        Ok(())
    }

    pub fn step(&mut self, state: &mut FluidState, dt: f64, force: &VectorField) -> Result<()> {
        self.step_with(state, dt, &mut |_| force.clone())
    }
}

/// One Navier–Stokes step with a fixed force.
pub fn ns_step(state: &FluidState, dt: f64, force: &VectorField) -> Result<FluidState> {
    let mut s = state.clone();
    NsSolver::new(Spectral::new(*state.v.grid())).step(&mut s, dt, force)?;
    Ok(s)
}
