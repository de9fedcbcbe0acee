//! Fully coupled kinetic–fluid driver with the limit system run in lockstep.
//!
//! One coupled step of size `dt` is
//!
//! ```text
//! K(dt/2, v_n)  →  NS(dt) with drag from the mid kinetic state  →  K(dt/2, v_{n+1})
//! ```
//!
//! where `K` is a Strang kinetic step. The limit system advances by two
//! steps of `dt/2`, so its state after the first one is time-aligned with
//! the mid kinetic state. Time integrals of dissipations and of the
//! modulated-energy error terms use the midpoint rule on these mid states.

use crate::bl::{bl_density, bl_distance, coarse_phase_measure};
use crate::blockstats::{all_stats, BlockStats, VelocityCtx};
use crate::container::{read_field, write_field, Field};
use crate::entropy::{
    dissipation_from_stats, kinetic_free_energy, llogl_entropy, relative_entropy_from_stats, DiagnosticsRecord,
    DENSITY_FLOOR,
};
use crate::error::{Error, Result};
use crate::fluid::{drag_from_moments, FluidState, NsSolver};
use crate::grid::{PhaseDensity, ScalarField, SpatialGrid, VectorField, VelocityGrid};
use crate::hilbert::{corrector_f1, CorrectorSet};
use crate::kinetic::{vfp_step_with, ClipLedger, KineticState, OuKernel, Scheme, StepPlan, TransportMethod};
use crate::limit::{effective_velocity, grad_log, residual_e_eps_analytic, LimitSolver, LimitState};
use crate::spectral::Spectral;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Default tolerance of the inline energy check.
pub const ENERGY_TOL: f64 = 1e-4;

/// Cap on the kinetic step of the default policy. The splitting error of
/// the energy balance is about `dt²` per unit time, which this keeps an
/// order below [`ENERGY_TOL`] on unit-order data.
pub const TAU_MAX: f64 = 2.5e-3;

/// Cap on `τ / ε`. The stiff relaxation adds an energy splitting error of
/// roughly `0.1 (dt/ε)²`, so this keeps it near `4e-5`.
pub const TAU_PER_EPS: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupledConfig {
    pub eps: f64,
    pub t_end: f64,
    /// Number of coupled steps; each holds two kinetic steps.
    pub steps: usize,
    /// Record every this many coupled steps (the last step is always
    /// recorded).
    pub record_every: usize,
    pub transport: TransportMethod,
    pub energy_tol: f64,
    /// Spatial and velocity coarsening for the phase-space BL distance;
    /// `None` skips it.
    pub phase_bl: Option<(usize, usize)>,
}

impl CoupledConfig {
    /// Step count from the default policy: kinetic step
    /// `τ = min(2ε³, ε h_x / v_max, TAU_PER_EPS ε, TAU_MAX)`, coupled step `2τ`.
    pub fn policy_steps(space: &SpatialGrid, vel: &VelocityGrid, eps: f64, t_end: f64) -> usize {
        let tau = (2.0 * eps.powi(3))
            .min(StepPlan::cfl_limit(space, vel, eps, 1.0))
            .min(TAU_PER_EPS * eps)
            .min(TAU_MAX);
        (t_end / (2.0 * tau)).ceil().max(1.0) as usize
    }

    pub fn new(space: &SpatialGrid, vel: &VelocityGrid, eps: f64, t_end: f64, records: usize) -> Self {
        let steps = Self::policy_steps(space, vel, eps, t_end);
        Self {
            eps,
            t_end,
            steps,
            record_every: (steps / records.max(1)).max(1),
            transport: TransportMethod::SpectralShift,
            energy_tol: ENERGY_TOL,
            phase_bl: None,
        }
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    fn check(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::Trajectory(format!("eps = {} outside (0, 1]", self.eps)));
        }
        if !(self.t_end > 0.0) || self.steps == 0 || self.record_every == 0 {
            return Err(Error::Trajectory("t_end, steps and record stride must be positive".into()));
        }
        Ok(())
    }
}

/// Running time integrals, all by the midpoint rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Integrals {
    /// `(1/ε²) ∫ ∬ |∇ξ f + (ξ − εv) f|² / f`
    pub fp_dissipation: f64,
    /// `∫ ∫ |∇v|²`
    pub fluid_dissipation: f64,
    /// `(1/ε²) ∫ ∬ |∇ξ f + (ξ − u_f) f|² / f`
    pub kinetic_flux: f64,
    /// `(1/ε²) ∫ ∫ ρ_f |(u_ε − u_f) − ε(v − v^ε)|²`
    pub alignment: f64,
    /// `∫ ∫ |∇(v^ε − v)|²`
    pub fluid_gap: f64,
    pub term_i: f64,
    pub term_ii: f64,
    pub term_iii: f64,
    pub term_iv: f64,
    /// `∫ ‖(1/ε) m_f − ρ (v − ∇ log ρ)‖_{L¹}`
    pub scaled_momentum: f64,
}

/// Running suprema over every step boundary, and over records for the BL
/// distances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sups {
    /// `‖f − ρ M‖_{L¹}`
    pub e0: f64,
    /// `‖f − ρM − ε(f₁ − e^{−t/ε²} f₁(0))‖_{L¹}`
    pub e1: f64,
    /// `‖f − ρM − ε f₁‖_{L¹}`
    pub e1_plain: f64,
    pub rho_l1: f64,
    pub v_l2: f64,
    pub bl_rho: f64,
    /// `∫ d²_BL(f, ρM)` over the records by the trapezoid rule.
    pub bl_f_sq_integral: f64,
    pub modulated_kinetic: f64,
}

/// Discrete total-energy inequality at one record.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyCheck {
    pub t: f64,
    pub free_energy: f64,
    pub dissipated: f64,
    pub initial: f64,
    /// `𝓕 + dissipated − 𝓕(0)`; must not exceed the tolerance.
    pub excess: f64,
}

/// Both sides of the modulated-energy inequality at one record.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub t: f64,
    /// `𝓗[f | M_{ρ,u_ε}]`
    pub relative_entropy: f64,
    /// `½ ‖v^ε − v‖²`
    pub fluid_energy_gap: f64,
    pub kinetic_flux: f64,
    pub alignment: f64,
    pub fluid_gap: f64,
    pub initial: f64,
    pub term_i: f64,
    pub term_ii: f64,
    pub term_iii: f64,
    pub term_iv: f64,
    /// `(1/ε²) ∫ ρ_f |u_f − u_ε|²` at the record.
    pub modulated_kinetic: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl AuditRecord {
    pub const CSV_HEADER: &'static str = "t,relative_entropy,fluid_energy_gap,kinetic_flux,alignment,fluid_gap,initial,\
term_i,term_ii,term_iii,term_iv,modulated_kinetic,lhs,rhs";

    pub fn values(&self) -> [f64; 14] {
        [
            self.t,
            self.relative_entropy,
            self.fluid_energy_gap,
            self.kinetic_flux,
            self.alignment,
            self.fluid_gap,
            self.initial,
            self.term_i,
            self.term_ii,
            self.term_iii,
            self.term_iv,
            self.modulated_kinetic,
            self.lhs,
            self.rhs,
        ]
    }

    /// `LHS ≤ RHS + tol (1 + |RHS|)`.
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol * (1.0 + self.rhs.abs())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledRecord {
    pub diag: DiagnosticsRecord,
    pub energy: EnergyCheck,
    pub audit: AuditRecord,
    /// Layer-corrected Hilbert residual at the record.
    pub e1: f64,
    pub e1_plain: f64,
}

/// Everything needed to continue a run.
#[derive(Clone, Debug)]
pub struct CoupledState {
    pub kin: KineticState,
    pub fluid: FluidState,
    pub limit: LimitState,
    /// Initial limit density and velocity, for the initial-layer corrector.
    pub limit0: (ScalarField, VectorField),
    pub step: usize,
    pub integrals: Integrals,
    pub sups: Sups,
    pub free_energy0: f64,
    pub modulated0: f64,
    pub rho_bounds: (f64, f64),
    /// Last recorded `(t, d²_BL(f, ρM))` for the trapezoid rule.
    pub last_bl_f: Option<(f64, f64)>,
}

/// Scalar part of a checkpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: CoupledConfig,
    t: f64,
    step: usize,
    clipped: ClipLedger,
    integrals: Integrals,
    sups: Sups,
    free_energy0: f64,
    modulated0: f64,
    rho_bounds: (f64, f64),
    last_bl_f: Option<(f64, f64)>,
}

const FILES: [&str; 6] = ["f.bin", "v.bin", "rho_lim.bin", "v_lim.bin", "rho_lim0.bin", "v_lim0.bin"];

/// Fields of the limit system entering the audit at one time.
struct LimitFields {
    rho: ScalarField,
    v: VectorField,
    u: VectorField,
    grad_u: [ScalarField; 4],
    grad_v: [ScalarField; 4],
    grad_log: VectorField,
    e: VectorField,
}

impl LimitFields {
    fn new(spec: &Spectral, st: &LimitState, eps: f64) -> Result<Self> {
        let u = effective_velocity(&st.rho, &st.fluid.v, eps)?;
        Ok(Self {
            grad_u: spec.grad_tensor(&u),
            grad_v: spec.grad_tensor(&st.fluid.v),
            grad_log: grad_log(&st.rho)?,
            e: residual_e_eps_analytic(&st.rho, &st.fluid.v, eps)?,
            rho: st.rho.clone(),
            v: st.fluid.v.clone(),
            u,
        })
    }
}

fn moments(stats: &[BlockStats], grid: SpatialGrid) -> (ScalarField, VectorField) {
    let rho = ScalarField::from_vec(grid, stats.iter().map(|s| s.rho).collect()).unwrap();
    let m = VectorField::from_vecs(grid, stats.iter().map(|s| s.m[0]).collect(), stats.iter().map(|s| s.m[1]).collect())
        .unwrap();
    (rho, m)
}

/// Pointwise integrands of the audit and of the scaled-momentum gap.
#[derive(Default)]
struct AuditDensities {
    kinetic_flux: f64,
    alignment: f64,
    fluid_gap: f64,
    term_i: f64,
    term_ii: f64,
    term_iii: f64,
    term_iv: f64,
    scaled_momentum: f64,
    modulated_kinetic: f64,
}

fn audit_densities(spec: &Spectral, stats: &[BlockStats], ve: &VectorField, lim: &LimitFields, eps: f64) -> AuditDensities {
    let dx2 = spec.grid().cell_area();
    let w = ve.sub(&lim.v);
    let gw = spec.grad_tensor(&w);
    let mut a = AuditDensities { fluid_gap: gw.iter().map(|g| g.map(|x| x * x).integral()).sum(), ..Default::default() };
    let inv2 = 1.0 / (eps * eps);
    for (ix, st) in stats.iter().enumerate() {
        let r = st.rho;
        let uf = st.bulk(DENSITY_FLOOR);
        let ue = lim.u.at(ix);
        let vl = lim.v.at(ix);
        let vk = ve.at(ix);
        let wv = w.at(ix);
        let gu = [lim.grad_u[0].data()[ix], lim.grad_u[1].data()[ix], lim.grad_u[2].data()[ix], lim.grad_u[3].data()[ix]];
        let gv = [lim.grad_v[0].data()[ix], lim.grad_v[1].data()[ix], lim.grad_v[2].data()[ix], lim.grad_v[3].data()[ix]];
        if let Some(fs) = st.flux {
            a.kinetic_flux += fs.dissipation(uf);
        }
        let d = [(ue[0] - uf[0]) - eps * (vl[0] - vk[0]), (ue[1] - uf[1]) - eps * (vl[1] - vk[1])];
        a.alignment += r * (d[0] * d[0] + d[1] * d[1]);
        let t = st.centred_tensor(ue);
        a.term_i += (t[0] - r) * gu[0] + t[1] * (gu[1] + gu[2]) + (t[2] - r) * gu[3];
        a.term_ii += wv[0] * wv[0] * gv[0] + wv[0] * wv[1] * (gv[1] + gv[2]) + wv[1] * wv[1] * gv[3];
        let gl = lim.grad_log.at(ix);
        a.term_iii += (r - lim.rho.data()[ix]) * (wv[0] * gl[0] + wv[1] * gl[1]);
        let e = lim.e.at(ix);
        a.term_iv += (r * ue[0] - st.m[0]) * e[0] + (r * ue[1] - st.m[1]) * e[1];
        let rl = lim.rho.data()[ix];
        let j = [st.m[0] / eps - rl * (vl[0] - gl[0]), st.m[1] / eps - rl * (vl[1] - gl[1])];
        a.scaled_momentum += j[0].abs() + j[1].abs();
        let du = [uf[0] - ue[0], uf[1] - ue[1]];
        a.modulated_kinetic += r * (du[0] * du[0] + du[1] * du[1]);
    }
    a.kinetic_flux *= inv2 * dx2;
    a.alignment *= inv2 * dx2;
    a.term_i *= -dx2 / eps;
    a.term_ii *= dx2;
    a.term_iii *= dx2;
    a.term_iv *= dx2;
    a.scaled_momentum *= dx2;
    a.modulated_kinetic *= inv2 * dx2;
    a
}

/// Coupled solver with its caches.
pub struct CoupledRun {
    pub cfg: CoupledConfig,
    pub state: CoupledState,
    spec: Spectral,
    ctx: VelocityCtx,
    ns: NsSolver,
    limit: LimitSolver,
    kernel: OuKernel,
    plan: StepPlan,
    f1_0: PhaseDensity,
}

impl CoupledRun {
    /// Starts a run from kinetic data `f0`, fluid data `fluid0` and the
    /// limit initial data `limit0`.
    pub fn new(f0: PhaseDensity, fluid0: FluidState, limit0: LimitState, cfg: CoupledConfig) -> Result<Self> {
        cfg.check()?;
        let grid = *f0.space();
        if *fluid0.v.grid() != grid || *limit0.rho.grid() != grid || *limit0.fluid.v.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let rho_bounds = (limit0.rho.min(), limit0.rho.max());
        let state = CoupledState {
            kin: KineticState::new(f0, cfg.eps),
            fluid: fluid0,
            limit0: (limit0.rho.clone(), limit0.fluid.v.clone()),
            limit: limit0,
            step: 0,
            integrals: Integrals::default(),
            sups: Sups::default(),
            free_energy0: 0.0,
            modulated0: 0.0,
            rho_bounds,
            last_bl_f: None,
        };
        let mut run = Self::assemble(cfg, state);
        let stats = all_stats(&run.state.kin.f, &run.ctx, false);
        run.state.free_energy0 = run.free_energy(&stats);
        let lim = LimitFields::new(&run.spec, &run.state.limit, run.cfg.eps)?;
        run.state.modulated0 = run.modulated(&stats, &lim)?.0;
        run.track_sups()?;
        Ok(run)
    }

    fn assemble(cfg: CoupledConfig, state: CoupledState) -> Self {
        let grid = *state.kin.f.space();
        let vel = *state.kin.f.vel();
        let spec = Spectral::new(grid);
        let half = cfg.dt() / 2.0;
        let plan = StepPlan { dt: half, scheme: Scheme::Strang, transport: cfg.transport };
        let (lo, hi) = state.rho_bounds;
        Self {
            ns: NsSolver::new(spec.clone()),
            limit: LimitSolver::with_bounds(&state.limit, lo, hi),
            kernel: OuKernel::new(&vel, half, cfg.eps),
            ctx: VelocityCtx::new(vel),
            f1_0: corrector_f1(&state.limit0.0, &state.limit0.1, vel),
            spec,
            plan,
            cfg,
            state,
        }
    }

    pub fn t(&self) -> f64 {
        self.state.kin.t
    }

    pub fn done(&self) -> bool {
        self.state.step >= self.cfg.steps
    }

    fn free_energy(&self, stats: &[BlockStats]) -> f64 {
        kinetic_free_energy(stats, self.spec.grid().cell_area()) + self.state.fluid.kinetic_energy()
    }

    /// `(𝓗[f | M_{ρ,u_ε}] + ½‖v^ε − v‖², 𝓗, ½‖v^ε − v‖²)`.
    fn modulated(&self, stats: &[BlockStats], lim: &LimitFields) -> Result<(f64, f64, f64)> {
        let h = relative_entropy_from_stats(stats, &self.ctx, &lim.rho, &lim.u, self.spec.grid().cell_area())?;
        let g = 0.5 * self.state.fluid.v.sub(&lim.v).norm_sq().integral();
        Ok((h + g, h, g))
    }

    fn track_sups(&mut self) -> Result<()> {
        let st = &self.state;
        let eps = self.cfg.eps;
        let cs = CorrectorSet::new(&st.limit.rho, &st.limit.fluid.v, *st.kin.f.vel());
        let f = &st.kin.f;
        let layer = (-st.kin.t / (eps * eps)).exp();
        let e0 = cs.e0(f);
        let e1 = cs.e1(f, eps, Some((&self.f1_0, layer)));
        let e1p = cs.e1(f, eps, None);
        let stats = all_stats(f, &self.ctx, false);
        let (rho_f, _) = moments(&stats, *self.spec.grid());
        let rl1 = rho_f.zip_map(&st.limit.rho, |a, b| a - b).l1_norm();
        let vl2 = st.fluid.v.sub(&st.limit.fluid.v).l2_norm();
        let s = &mut self.state.sups;
        s.e0 = s.e0.max(e0);
        s.e1 = s.e1.max(e1);
        s.e1_plain = s.e1_plain.max(e1p);
        s.rho_l1 = s.rho_l1.max(rl1);
        s.v_l2 = s.v_l2.max(vl2);
        Ok(())
    }

    /// Advances one coupled step.
    pub fn step(&mut self) -> Result<()> {
        if self.done() {
            return Err(Error::Trajectory("run already complete".into()));
        }
        let dt = self.cfg.dt();
        let eps = self.cfg.eps;
        let v_n = self.state.fluid.v.clone();
        vfp_step_with(&mut self.state.kin, &v_n, &self.plan, &self.kernel)?;
        self.limit.step(&mut self.state.limit, dt / 2.0)?;
        let stats = all_stats(&self.state.kin.f, &self.ctx, true);
        let (rho_m, m_m) = moments(&stats, *self.spec.grid());
        self.ns.step_with(&mut self.state.fluid, dt, &mut |v| drag_from_moments(&rho_m, &m_m, v, eps))?;
        let v_mid = v_n.add(&self.state.fluid.v).scaled(0.5);

        let dx2 = self.spec.grid().cell_area();
        let split = dissipation_from_stats(&stats, &v_mid, eps, dx2);
        let lim = LimitFields::new(&self.spec, &self.state.limit, eps)?;
        let a = audit_densities(&self.spec, &stats, &v_mid, &lim, eps);
        let acc = &mut self.state.integrals;
        acc.fp_dissipation += dt * split.total / (eps * eps);
        acc.fluid_dissipation += dt * self.spec.dirichlet_energy(&v_mid);
        acc.kinetic_flux += dt * a.kinetic_flux;
        acc.alignment += dt * a.alignment;
        acc.fluid_gap += dt * a.fluid_gap;
        acc.term_i += dt * a.term_i;
        acc.term_ii += dt * a.term_ii;
        acc.term_iii += dt * a.term_iii;
        acc.term_iv += dt * a.term_iv;
        acc.scaled_momentum += dt * a.scaled_momentum;

        let v_np1 = self.state.fluid.v.clone();
        vfp_step_with(&mut self.state.kin, &v_np1, &self.plan, &self.kernel)?;
        self.limit.step(&mut self.state.limit, dt / 2.0)?;
        self.state.step += 1;
        // Pin times to the step grid so resumed runs see identical clocks.
        let t = self.state.step as f64 * dt;
        self.state.kin.t = t;
        self.state.fluid.t = t;
        self.state.limit.t = t;
        self.state.limit.fluid.t = t;
        self.track_sups()
    }

    /// True when the current step index is a record point.
    pub fn at_record(&self) -> bool {
        self.state.step % self.cfg.record_every == 0 || self.done()
    }

    /// Full diagnostics at the current state. Fails when the energy
    /// inequality is violated beyond the configured tolerance.
    pub fn record(&mut self) -> Result<CoupledRecord> {
        let eps = self.cfg.eps;
        let dx2 = self.spec.grid().cell_area();
        let st = &self.state;
        let t = st.kin.t;
        let stats = all_stats(&st.kin.f, &self.ctx, true);
        let (rho_f, _) = moments(&stats, *self.spec.grid());
        let lim = LimitFields::new(&self.spec, &st.limit, eps)?;
        let zero = VectorField::zeros(*self.spec.grid());
        let split = dissipation_from_stats(&stats, &st.fluid.v, eps, dx2);
        let cs = CorrectorSet::new(&st.limit.rho, &st.limit.fluid.v, *st.kin.f.vel());
        let e0 = cs.e0(&st.kin.f);
        let layer = (-t / (eps * eps)).exp();
        let e1 = cs.e1(&st.kin.f, eps, Some((&self.f1_0, layer)));
        let e1_plain = cs.e1(&st.kin.f, eps, None);
        let bl_rho = bl_density(&rho_f, &st.limit.rho)?;
        let bl_f = match self.cfg.phase_bl {
            Some((rx, rv)) => {
                let (a, metric) = coarse_phase_measure(&st.kin.f, rx, rv)?;
                let (b, _) = coarse_phase_measure(&cs.f0, rx, rv)?;
                bl_distance(&a, &b, &metric)?.0
            }
            None => 0.0,
        };
        let free = self.free_energy(&stats);
        let energy = EnergyCheck {
            t,
            free_energy: free,
            dissipated: st.integrals.fp_dissipation + st.integrals.fluid_dissipation,
            initial: st.free_energy0,
            excess: free + st.integrals.fp_dissipation + st.integrals.fluid_dissipation - st.free_energy0,
        };
        let (_, h, g) = self.modulated(&stats, &lim)?;
        let a_now = audit_densities(&self.spec, &stats, &st.fluid.v, &lim, eps);
        let it = &st.integrals;
        let audit = AuditRecord {
            t,
            relative_entropy: h,
            fluid_energy_gap: g,
            kinetic_flux: it.kinetic_flux,
            alignment: it.alignment,
            fluid_gap: it.fluid_gap,
            initial: st.modulated0,
            term_i: it.term_i,
            term_ii: it.term_ii,
            term_iii: it.term_iii,
            term_iv: it.term_iv,
            modulated_kinetic: a_now.modulated_kinetic,
            lhs: h + g + it.kinetic_flux + it.alignment + it.fluid_gap,
            rhs: st.modulated0 + it.term_i + it.term_ii + it.term_iii + it.term_iv,
        };
        let diag = DiagnosticsRecord {
            t,
            entropy_h: relative_entropy_from_stats(&stats, &self.ctx, &st.limit.rho, &zero, dx2)?,
            free_energy_f: free,
            diss_kinetic: split.kinetic,
            diss_alignment: split.alignment,
            diss_total: split.total,
            l1_dist_f: e0,
            l1_dist_rho: rho_f.zip_map(&st.limit.rho, |a, b| a - b).l1_norm(),
            l2_dist_v: st.fluid.v.sub(&st.limit.fluid.v).l2_norm(),
            h1_dist_v: it.fluid_gap,
            bl_dist_rho: bl_rho,
            bl_dist_f: bl_f,
            moment2: stats.iter().map(|s| s.energy()).sum::<f64>() * dx2,
            llogl_rho: llogl_entropy(&rho_f),
            scaled_momentum_l1: it.scaled_momentum,
        };
        let s = &mut self.state.sups;
        s.bl_rho = s.bl_rho.max(bl_rho);
        s.modulated_kinetic = s.modulated_kinetic.max(a_now.modulated_kinetic);
        if let Some((t0, q0)) = self.state.last_bl_f {
            s.bl_f_sq_integral += 0.5 * (t - t0) * (q0 + bl_f * bl_f);
        }
        self.state.last_bl_f = Some((t, bl_f * bl_f));
        if !(energy.excess <= self.cfg.energy_tol) {
            return Err(Error::EnergyViolation { t, excess: energy.excess, tol: self.cfg.energy_tol });
        }
        Ok(CoupledRecord { diag, energy, audit, e1, e1_plain })
    }

    /// Steps to the end, calling `observe` with every record (including the
    /// initial one when starting from step 0).
    pub fn run(&mut self, observe: &mut dyn FnMut(&CoupledRun, &CoupledRecord) -> Result<()>) -> Result<()> {
        if self.state.step == 0 {
            let r = self.record()?;
            observe(self, &r)?;
        }
        while !self.done() {
            self.step()?;
            if self.at_record() {
                let r = self.record()?;
                observe(self, &r)?;
            }
        }
        Ok(())
    }

    /// Writes the state into `dir`: six binary fields plus `state.json`.
    pub fn save_checkpoint(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let st = &self.state;
        let fields = [
            Field::Phase(st.kin.f.clone()),
            Field::Vector(st.fluid.v.clone()),
            Field::Scalar(st.limit.rho.clone()),
            Field::Vector(st.limit.fluid.v.clone()),
            Field::Scalar(st.limit0.0.clone()),
            Field::Vector(st.limit0.1.clone()),
        ];
        let meta = serde_json::json!({ "t": st.kin.t, "eps": self.cfg.eps, "step": st.step });
        for (name, field) in FILES.iter().zip(&fields) {
            write_field(dir.join(name), name.trim_end_matches(".bin"), field, meta.clone())?;
        }
        let header = Header {
            config: self.cfg.clone(),
            t: st.kin.t,
            step: st.step,
            clipped: st.kin.clipped,
            integrals: st.integrals,
            sups: st.sups,
            free_energy0: st.free_energy0,
            modulated0: st.modulated0,
            rho_bounds: st.rho_bounds,
            last_bl_f: st.last_bl_f,
        };
        let p = dir.join("state.json");
        let text = serde_json::to_string_pretty(&header)?;
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    /// Restores a run written by [`CoupledRun::save_checkpoint`].
    pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let p = dir.join("state.json");
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let h: Header = serde_json::from_str(&text)?;
        h.config.check()?;
        let mut fields = Vec::new();
        for name in FILES {
            fields.push(read_field(dir.join(name))?.1);
        }
        let mut it = fields.into_iter();
        let bad = || Error::Format("checkpoint field of the wrong kind".into());
        let Some(Field::Phase(f)) = it.next() else { return Err(bad()) };
        let Some(Field::Vector(v)) = it.next() else { return Err(bad()) };
        let Some(Field::Scalar(rho)) = it.next() else { return Err(bad()) };
        let Some(Field::Vector(vl)) = it.next() else { return Err(bad()) };
        let Some(Field::Scalar(rho0)) = it.next() else { return Err(bad()) };
        let Some(Field::Vector(vl0)) = it.next() else { return Err(bad()) };
        let grid = *f.space();
        if [v.grid(), rho.grid(), vl.grid(), rho0.grid(), vl0.grid()].iter().any(|g| **g != grid) {
            return Err(Error::GridMismatch);
        }
        let mut kin = KineticState::new(f, h.config.eps);
        kin.t = h.t;
        kin.clipped = h.clipped;
        let mut fluid = FluidState::new(v);
        fluid.t = h.t;
        let mut limit = LimitState::new(rho, vl);
        limit.t = h.t;
        limit.fluid.t = h.t;
        let state = CoupledState {
            kin,
            fluid,
            limit,
            limit0: (rho0, vl0),
            step: h.step,
            integrals: h.integrals,
            sups: h.sups,
            free_energy0: h.free_energy0,
            modulated0: h.modulated0,
            rho_bounds: h.rho_bounds,
            last_bl_f: h.last_bl_f,
        };
        Ok(Self::assemble(h.config, state))
    }
}

/// Records and final summaries of a completed run.
#[derive(Clone, Debug)]
pub struct CoupledTrajectory {
    pub records: Vec<CoupledRecord>,
    pub sups: Sups,
    pub integrals: Integrals,
    pub clipped: ClipLedger,
    pub final_state: CoupledState,
}

/// Runs the coupled system from `(f0, fluid0)` next to the limit system
/// started at `limit0`.
pub fn run_coupled(f0: PhaseDensity, fluid0: FluidState, limit0: LimitState, cfg: CoupledConfig) -> Result<CoupledTrajectory> {
    let mut run = CoupledRun::new(f0, fluid0, limit0, cfg)?;
    let mut records = Vec::new();
    run.run(&mut |_, r| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok(CoupledTrajectory {
        records,
        sups: run.state.sups,
        integrals: run.state.integrals,
        clipped: run.state.kin.clipped,
        final_state: run.state,
    })
}
