//! The limit system `∂t ρ + ∇·(ρv) = Δρ` with incompressible Navier–Stokes
//! for `v` (no feedback from `ρ`), plus the auxiliary fields
//! `u_ε = ε(v − ∇log ρ)`, `e_ε = ∂t u_ε + (1/ε) u_ε·∇u_ε` and the
//! log-gradient `φ = ∇log ρ`.

use crate::entropy::llogl_entropy;
use crate::error::{Error, Result};
use crate::etd::Etd2;
use crate::fft::C64;
use crate::fluid::{FluidState, NsSolver};
use crate::grid::{ScalarField, VectorField};
use crate::spectral::Spectral;
use serde::{Deserialize, Serialize};

/// Smallest admissible density for `log ρ`.
pub const VACUUM_FLOOR: f64 = 1e-12;
/// Slack of the discrete maximum principle.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LimitState {
    pub rho: ScalarField,
    pub fluid: FluidState,
    pub t: f64,
}

impl LimitState {
    pub fn new(rho: ScalarField, v: VectorField) -> Self {
        Self { rho, fluid: FluidState::new(v), t: 0.0 }
    }

    pub fn u_eps(&self, eps: f64) -> Result<VectorField> {
        effective_velocity(&self.rho, &self.fluid.v, eps)
    }
}

pub fn grad_log(rho: &ScalarField) -> Result<VectorField> {
    if let Some(ix) = rho.data().iter().position(|&r| !(r > VACUUM_FLOOR)) {
        return Err(Error::Vacuum(ix));
    }
    Ok(Spectral::new(*rho.grid()).grad(&rho.map(f64::ln)))
}

/// `u_ε = ε(v − ∇log ρ)`.
pub fn effective_velocity(rho: &ScalarField, v: &VectorField, eps: f64) -> Result<VectorField> {
    Ok(v.sub(&grad_log(rho)?).scaled(eps))
}

fn quad_hat(spec: &Spectral, a: &[f64]) -> Vec<C64> {
    let mut h = spec.forward(a);
    spec.dealias(&mut h);
    h
}

fn truncated(spec: &Spectral, h: &[C64]) -> Vec<f64> {
    let mut t = h.to_vec();
    spec.dealias(&mut t);
    spec.inverse(t)
}

/// `−∇·(ρ v)` in spectral form with 2/3 dealiasing.
fn flux_div_hat(spec: &Spectral, rho_h: &[C64], v: &VectorField) -> Vec<C64> {
    let r = truncated(spec, rho_h);
    let vh0 = spec.forward(v.comp(0));
    let vh1 = spec.forward(v.comp(1));
    let v0 = truncated(spec, &vh0);
    let v1 = truncated(spec, &vh1);
    let q0: Vec<f64> = r.iter().zip(&v0).map(|(a, b)| a * b).collect();
    let q1: Vec<f64> = r.iter().zip(&v1).map(|(a, b)| a * b).collect();
    let mut d = spec.deriv_hat(&quad_hat(spec, &q0), 0);
    for (x, y) in d.iter_mut().zip(spec.deriv_hat(&quad_hat(spec, &q1), 1)) {
        *x = -(*x + y);
    }
    d
}

/// Advection–diffusion stepper reusing ETD coefficients.
pub struct AdvDiff {
    spec: Spectral,
    etd: Option<Etd2>,
    /// Diffusion on/off; off gives the pure continuity equation.
    diffusion: bool,
}

impl AdvDiff {
    pub fn new(spec: Spectral) -> Self {
        Self { spec, etd: None, diffusion: true }
    }

    /// Pure transport `∂t ρ + ∇·(ρ v) = 0`.
    pub fn continuity(spec: Spectral) -> Self {
        Self { spec, etd: None, diffusion: false }
    }

    fn coeffs(&mut self, dt: f64) -> &Etd2 {
        if self.etd.as_ref().map_or(true, |e| e.dt != dt) {
            let mut e = Etd2::new(&self.spec, dt);
            if !self.diffusion {
                e.e.iter_mut().for_each(|x| *x = 1.0);
                e.p1.iter_mut().for_each(|x| *x = dt);
                e.p2.iter_mut().for_each(|x| *x = dt / 2.0);
            }
            self.etd = Some(e);
        }
        self.etd.as_ref().unwrap()
    }

    /// One step with `v_start` in the predictor and `v_end` in the
    /// corrector.
    pub fn step(&mut self, rho: &ScalarField, v_start: &VectorField, v_end: &VectorField, dt: f64) -> Result<ScalarField> {
        let h = self.spec.grid().h();
        let vm = v_start.max_abs().max(v_end.max_abs());
        if vm > 0.0 && dt > h / vm {
            return Err(Error::Cfl { dt, limit: h / vm });
        }
        let mut rh = self.spec.forward(rho.data());
        self.spec.drop_nyquist(&mut rh);
        let n0 = flux_div_hat(&self.spec, &rh, v_start);
        let etd = self.coeffs(dt).clone();
        let mut a = etd.predict(&rh, &n0);
        let n1 = flux_div_hat(&self.spec, &a, v_end);
        etd.correct(&mut a, &n1, &n0);
        let out = self.spec.to_field(a);
        if !out.all_finite() {
            return Err(Error::NonFinite("density"));
        }
        Ok(out)
    }
}

/// One advection–diffusion step with a frozen velocity.
pub fn advdiff_step(rho: &ScalarField, v: &VectorField, dt: f64) -> Result<ScalarField> {
    AdvDiff::new(Spectral::new(*rho.grid())).step(rho, v, v, dt)
}

/// `∂t ρ = Δρ − ∇·(ρ v)` evaluated spectrally.
pub fn rho_rate(spec: &Spectral, rho: &ScalarField, v: &VectorField) -> ScalarField {
    let rh = spec.forward(rho.data());
    let mut d = flux_div_hat(spec, &rh, v);
    let n = spec.n();
    for i1 in 0..n {
        for i2 in 0..n {
            d[i1 * n + i2] -= rh[i1 * n + i2] * spec.k2(i1, i2);
        }
    }
    spec.to_field(d)
}

/// `∂t v = P(Δv − v·∇v)` evaluated spectrally.
pub fn velocity_rate(ns: &NsSolver, v: &VectorField) -> VectorField {
    let spec = ns.spectral();
    let vh = ns.to_hat(v);
    let mut w = ns.advection_hat(&vh);
    let n = spec.n();
    for c in 0..2 {
        for i1 in 0..n {
            for i2 in 0..n {
                let idx = i1 * n + i2;
                w[c][idx] -= vh[c][idx] * spec.k2(i1, i2);
            }
        }
    }
    let [mut a0, mut a1] = w;
    spec.project_hat(&mut a0, &mut a1);
    ns.from_hat(&[a0, a1])
}

/// `(a·∇) b`.
pub fn convective(spec: &Spectral, a: &VectorField, b: &VectorField) -> VectorField {
    let g = spec.grad_tensor(b);
    let (a0, a1) = (a.comp(0), a.comp(1));
    let c0: Vec<f64> = (0..a0.len()).map(|i| a0[i] * g[0].data()[i] + a1[i] * g[1].data()[i]).collect();
    let c1: Vec<f64> = (0..a0.len()).map(|i| a0[i] * g[2].data()[i] + a1[i] * g[3].data()[i]).collect();
    VectorField::from_vecs(*a.grid(), c0, c1).unwrap()
}

/// `e_ε` from the instantaneous time derivatives of the limit equations.
pub fn residual_e_eps_analytic(rho: &ScalarField, v: &VectorField, eps: f64) -> Result<VectorField> {
    let spec = Spectral::new(*rho.grid());
    let ns = NsSolver::new(spec.clone());
    let u = effective_velocity(rho, v, eps)?;
    let rt = rho_rate(&spec, rho, v);
    let vt = velocity_rate(&ns, v);
    let q = rt.zip_map(rho, |a, b| a / b);
    let ut = vt.sub(&spec.grad(&q)).scaled(eps);
    Ok(ut.add(&convective(&spec, &u, &u).scaled(1.0 / eps)))
}

/// `e_ε` with a finite-difference time derivative from stored states.
#[derive(Clone, Debug)]
pub struct ResidualE {
    pub e: VectorField,
    /// True when a one-sided difference had to be used at a trajectory end.
    pub one_sided: bool,
}

/// Centered difference of `u_ε` at record `i` of a uniformly spaced
/// trajectory, plus the convective term.
pub fn residual_e_eps(rho_traj: &[ScalarField], v_traj: &[VectorField], times: &[f64], eps: f64, i: usize) -> Result<ResidualE> {
    let n = rho_traj.len();
    if n < 2 || v_traj.len() != n || times.len() != n || i >= n {
        return Err(Error::Trajectory("need at least two aligned states".into()));
    }
    let (lo, hi, one_sided) = if i == 0 {
        (0, 1, true)
    } else if i == n - 1 {
        (n - 2, n - 1, true)
    } else {
        (i - 1, i + 1, false)
    };
    let spec = Spectral::new(*rho_traj[0].grid());
    let ul = effective_velocity(&rho_traj[lo], &v_traj[lo], eps)?;
    let uh = effective_velocity(&rho_traj[hi], &v_traj[hi], eps)?;
    let u = effective_velocity(&rho_traj[i], &v_traj[i], eps)?;
    let ut = uh.sub(&ul).scaled(1.0 / (times[hi] - times[lo]));
    Ok(ResidualE { e: ut.add(&convective(&spec, &u, &u).scaled(1.0 / eps)), one_sided })
}

/// Right-hand side of `∂t φ = Δφ + ∇(|φ|² − φ·v)` without the Laplacian.
fn loggrad_nl(spec: &Spectral, ph: &[Vec<C64>; 2], v: &VectorField) -> [Vec<C64>; 2] {
    let p0 = truncated(spec, &ph[0]);
    let p1 = truncated(spec, &ph[1]);
    let v0 = truncated(spec, &spec.forward(v.comp(0)));
    let v1 = truncated(spec, &spec.forward(v.comp(1)));
    let s: Vec<f64> = (0..p0.len())
        .map(|i| p0[i] * p0[i] + p1[i] * p1[i] - p0[i] * v0[i] - p1[i] * v1[i])
        .collect();
    let sh = quad_hat(spec, &s);
    [spec.deriv_hat(&sh, 0), spec.deriv_hat(&sh, 1)]
}

/// Evolves `φ` directly by its own equation along a velocity trajectory
/// sampled at step boundaries (`v_traj[k]` at time `k dt`). Returns `φ` at
/// every boundary.
pub fn loggrad_evolve(phi0: &VectorField, v_traj: &[VectorField], dt: f64) -> Result<Vec<VectorField>> {
    let spec = Spectral::new(*phi0.grid());
    let etd = Etd2::new(&spec, dt);
    let h = spec.grid().h();
    let mut ph = [spec.forward(phi0.comp(0)), spec.forward(phi0.comp(1))];
    spec.drop_nyquist(&mut ph[0]);
    spec.drop_nyquist(&mut ph[1]);
    let mut out = vec![phi0.clone()];
    for w in v_traj.windows(2) {
        let vm = w[0].max_abs().max(w[1].max_abs());
        if vm > 0.0 && dt > h / vm {
            return Err(Error::Cfl { dt, limit: h / vm });
        }
        let n0 = loggrad_nl(&spec, &ph, &w[0]);
        let mut a = [etd.predict(&ph[0], &n0[0]), etd.predict(&ph[1], &n0[1])];
        let n1 = loggrad_nl(&spec, &a, &w[1]);
        etd.correct(&mut a[0], &n1[0], &n0[0]);
        etd.correct(&mut a[1], &n1[1], &n0[1]);
        ph = a;
        let f = VectorField::from_vecs(*phi0.grid(), spec.inverse(ph[0].clone()), spec.inverse(ph[1].clone())).unwrap();
        if !f.all_finite() {
            return Err(Error::NonFinite("log-gradient"));
        }
        out.push(f);
    }
    Ok(out)
}

/// Per-step summary of a limit run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitRecord {
    pub t: f64,
    pub mass: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    /// `‖∇φ‖∞` with `φ = ∇log ρ`.
    pub grad_phi_sup: f64,
    pub llogl: f64,
    pub kinetic_energy: f64,
}

/// Couples the NS and advection–diffusion steppers.
pub struct LimitSolver {
    pub ns: NsSolver,
    pub ad: AdvDiff,
    bounds: (f64, f64),
}

impl LimitSolver {
    pub fn new(state: &LimitState) -> Self {
        let spec = Spectral::new(*state.rho.grid());
        Self {
            ns: NsSolver::new(spec.clone()),
            ad: AdvDiff::new(spec),
            bounds: (state.rho.min(), state.rho.max()),
        }
    }

    /// Solver whose maximum-principle bounds come from an earlier state,
    /// used when resuming a run.
    pub fn with_bounds(state: &LimitState, lo: f64, hi: f64) -> Self {
        let mut s = Self::new(state);
        s.bounds = (lo, hi);
        s
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    /// One step: NS without force, then `ρ` with the old and new velocity.
    pub fn step(&mut self, state: &mut LimitState, dt: f64) -> Result<()> {
        let v0 = state.fluid.v.clone();
        self.ns.step_with(&mut state.fluid, dt, &mut |v| VectorField::zeros(*v.grid()))?;
        state.rho = self.ad.step(&state.rho, &v0, &state.fluid.v, dt)?;
        state.t += dt;
        let (lo, hi) = self.bounds;
        let (mn, mx) = (state.rho.min(), state.rho.max());
        if mn < lo - MAX_PRINCIPLE_TOL || mx > hi + MAX_PRINCIPLE_TOL {
            return Err(Error::MaximumPrinciple(format!(
                "rho in [{mn:.6e}, {mx:.6e}] outside [{lo:.6e}, {hi:.6e}] at t = {:.6}",
                state.t
            )));
        }
        Ok(())
    }

    pub fn record(&self, state: &LimitState) -> Result<LimitRecord> {
        let spec = self.ns.spectral();
        let phi = grad_log(&state.rho)?;
        let g = spec.grad_tensor(&phi);
        let sup = g.iter().map(|c| c.max_abs()).fold(0.0, f64::max);
        Ok(LimitRecord {
            t: state.t,
            mass: state.rho.integral(),
            min_rho: state.rho.min(),
            max_rho: state.rho.max(),
            grad_phi_sup: sup,
            llogl: llogl_entropy(&state.rho),
            kinetic_energy: state.fluid.kinetic_energy(),
        })
    }
}

/// Trajectory of [`run_limit`]: the state at every step boundary.
#[derive(Clone, Debug)]
pub struct LimitTrajectory {
    pub states: Vec<LimitState>,
    pub records: Vec<LimitRecord>,
}

impl LimitTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }
}

/// Runs the limit system to `t_end` with `steps` equal steps.
pub fn run_limit(rho0: &ScalarField, v0: &VectorField, t_end: f64, steps: usize) -> Result<LimitTrajectory> {
    if steps == 0 {
        return Err(Error::Trajectory("zero steps".into()));
    }
    let dt = t_end / steps as f64;
    let mut st = LimitState::new(rho0.clone(), v0.clone());
    let mut solver = LimitSolver::new(&st);
    let mut states = vec![st.clone()];
    let mut records = vec![solver.record(&st)?];
    for k in 0..steps {
        solver.step(&mut st, dt)?;
        st.t = (k + 1) as f64 * dt;
        st.fluid.t = st.t;
        records.push(solver.record(&st)?);
        states.push(st.clone());
    }
    Ok(LimitTrajectory { states, records })
}
