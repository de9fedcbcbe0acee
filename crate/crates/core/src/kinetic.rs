//! Split-step solver for the ε-scaled Vlasov–Fokker–Planck equation
//!
//! `∂t f + (1/ε) ξ·∇x f = (1/ε²) ∇ξ·(∇ξ f + (ξ − εv) f)`.
//!
//! Free transport is solved exactly per velocity node (Fourier phase shift,
//! or periodic cubic semi-Lagrangian as an alternative). The velocity
//! relaxation is the exact Ornstein–Uhlenbeck semigroup applied per spatial
//! cell through its characteristic function.

use crate::error::{Error, Result};
use crate::fft::{self, C64};
use crate::grid::{PhaseDensity, SpatialGrid, VectorField, VelocityGrid};
use crate::par;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Clipped mass above which a single step is rejected.
pub const CLIP_LIMIT: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Strang,
    Lie,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TransportMethod {
    #[default]
    SpectralShift,
    SemiLagrangian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    pub dt: f64,
    pub scheme: Scheme,
    pub transport: TransportMethod,
}

impl StepPlan {
    pub fn new(dt: f64) -> Self {
        Self { dt, scheme: Scheme::Strang, transport: TransportMethod::SpectralShift }
    }

    /// Largest step with `dt ≤ cfl · ε h_x / v_max`.
    pub fn cfl_limit(space: &SpatialGrid, vel: &VelocityGrid, eps: f64, cfl: f64) -> f64 {
        cfl * eps * space.h() / vel.v_max()
    }

    /// Errors when the plan breaks the transport CFL bound with fraction 1.
    pub fn check(&self, space: &SpatialGrid, vel: &VelocityGrid, eps: f64) -> Result<()> {
        let limit = Self::cfl_limit(space, vel, eps, 1.0);
        if !(self.dt > 0.0) || self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt: self.dt, limit });
        }
        Ok(())
    }
}

/// Record of mass removed by the positivity clip.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClipLedger {
    pub total: f64,
    pub max_step: f64,
    pub steps: u64,
}

impl ClipLedger {
    pub fn add(&mut self, m: f64) {
        self.total += m;
        self.max_step = self.max_step.max(m);
        self.steps += 1;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KineticState {
    pub f: PhaseDensity,
    pub t: f64,
    pub eps: f64,
    pub clipped: ClipLedger,
}

impl KineticState {
    pub fn new(f: PhaseDensity, eps: f64) -> Self {
        Self { f, t: 0.0, eps, clipped: ClipLedger::default() }
    }
}

fn transpose_to_velocity_major(f: &PhaseDensity) -> Vec<C64> {
    let nc = f.space().cells();
    let nb = f.block_len();
    let data = f.data();
    let mut buf = vec![C64::new(0.0, 0.0); nc * nb];
    par::for_each_chunk(&mut buf, nc, |iv, col| {
        for (ix, z) in col.iter_mut().enumerate() {
            *z = C64::new(data[ix * nb + iv], 0.0);
        }
    });
    buf
}

fn transpose_back(buf: &[C64], f: &mut PhaseDensity) {
    let nc = f.space().cells();
    let nb = f.block_len();
    par::for_each_chunk(f.data_mut(), nb, |ix, blk| {
        for (iv, v) in blk.iter_mut().enumerate() {
            *v = buf[iv * nc + ix].re;
        }
    });
}

/// Exact free transport `∂t f + (1/ε) ξ·∇x f = 0` over `dt` by a Fourier
/// phase shift at every velocity node. The Nyquist bins are left in place.
pub fn transport_step(f: &PhaseDensity, dt: f64, eps: f64) -> PhaseDensity {
    let space = *f.space();
    let vel = *f.vel();
    let n = space.n();
    let nc = space.cells();
    let nv = vel.n();
    let plan = fft::plan(n);
    let k: Vec<f64> = (0..n)
        .map(|i| if fft::is_nyquist(i, n) { 0.0 } else { space.wavenumber(i) })
        .collect();
    let s = dt / eps;
    let norm = 1.0 / nc as f64;
    let mut buf = transpose_to_velocity_major(f);
    par::for_each_chunk(&mut buf, nc, |iv, col| {
        let xi0 = vel.node(iv / nv);
        let xi1 = vel.node(iv % nv);
        let mut scratch = plan.scratch();
        plan.forward_with(col, &mut scratch);
        let p0: Vec<C64> = k.iter().map(|&a| C64::cis(-a * xi0 * s) * norm).collect();
        let p1: Vec<C64> = k.iter().map(|&a| C64::cis(-a * xi1 * s)).collect();
        for i1 in 0..n {
            for i2 in 0..n {
                col[i1 * n + i2] *= p0[i1] * p1[i2];
            }
        }
        plan.inverse_with(col, &mut scratch);
    });
    let mut out = f.clone();
    transpose_back(&buf, &mut out);
    out
}

/// Weights of periodic cubic Lagrange interpolation at offset `a ∈ [0,1)`
/// from node `j0`, for nodes `j0−1 .. j0+2`.
fn cubic_weights(a: f64) -> [f64; 4] {
    [
        -a * (a - 1.0) * (a - 2.0) / 6.0,
        (a + 1.0) * (a - 1.0) * (a - 2.0) / 2.0,
        -(a + 1.0) * a * (a - 2.0) / 2.0,
        (a + 1.0) * a * (a - 1.0) / 6.0,
    ]
}

/// `out[i] = g(i − shift)` on a periodic line, `shift` in cells.
fn shift_line(src: &[f64], out: &mut [f64], stride: usize, n: usize, shift: f64) {
    let p = -shift;
    let j = p.floor();
    let w = cubic_weights(p - j);
    let j = j as i64;
    let ni = n as i64;
    for i in 0..ni {
        let mut acc = 0.0;
        for (q, wq) in w.iter().enumerate() {
            let idx = (i + j + q as i64 - 1).rem_euclid(ni) as usize;
            acc += wq * src[idx * stride];
        }
        out[i as usize * stride] = acc;
    }
}

/// Free transport by separable periodic cubic semi-Lagrangian shifts.
/// Fourth-order in space, conserves mass exactly, no CFL restriction.
pub fn transport_step_semi_lagrangian(f: &PhaseDensity, dt: f64, eps: f64) -> PhaseDensity {
    let space = *f.space();
    let vel = *f.vel();
    let n = space.n();
    let nc = space.cells();
    let nv = vel.n();
    let h = space.h();
    let mut buf = transpose_to_velocity_major(f);
    par::for_each_chunk(&mut buf, nc, |iv, col| {
        let s0 = vel.node(iv / nv) * dt / eps / h;
        let s1 = vel.node(iv % nv) * dt / eps / h;
        let a: Vec<f64> = col.iter().map(|z| z.re).collect();
        let mut b = vec![0.0; nc];
        for i2 in 0..n {
            shift_line(&a[i2..], &mut b[i2..], n, n, s0);
        }
        let mut c = vec![0.0; nc];
        for i1 in 0..n {
            shift_line(&b[i1 * n..(i1 + 1) * n], &mut c[i1 * n..(i1 + 1) * n], 1, n, s1);
        }
        for (z, v) in col.iter_mut().zip(c) {
            *z = C64::new(v, 0.0);
        }
    });
    let mut out = f.clone();
    transpose_back(&buf, &mut out);
    out
}

/// Tables for the exact Ornstein–Uhlenbeck step on one velocity grid.
///
/// With `a = e^{−dt/ε²}` and drift centre `c`, the characteristic function
/// evolves as `φ(η) ← e^{iηc(1−a)} e^{−(1−a²)η²/2} φ(aη)`. Per dimension the
/// discrete `φ(aη_k)` is a dense matrix product; the result is sampled back
/// on the nodes with one length-`n` FFT.
pub struct OuKernel {
    n: usize,
    a: f64,
    xi0: f64,
    eta: Vec<f64>,
    /// `e^{i a η_k ξ_l}`, row `k`, split into real and imaginary parts.
    er: Vec<f64>,
    ei: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    v_max: f64,
}

impl OuKernel {
    pub fn new(vel: &VelocityGrid, dt: f64, eps: f64) -> Self {
        let n = vel.n();
        let a = (-dt / (eps * eps)).exp();
        let eta: Vec<f64> = (0..n).map(|k| vel.wavenumber(k)).collect();
        let nodes = vel.nodes();
        let mut er = vec![0.0; n * n];
        let mut ei = vec![0.0; n * n];
        for k in 0..n {
            for l in 0..n {
                let z = C64::cis(a * eta[k] * nodes[l]);
                er[k * n + l] = z.re;
                ei[k * n + l] = z.im;
            }
        }
        let fft = FftPlanner::new().plan_fft_forward(n);
        Self { n, a, xi0: nodes[0], eta, er, ei, fft, v_max: vel.v_max() }
    }

    /// Contraction factor `e^{−dt/ε²}` of the velocity mean.
    pub fn factor(&self) -> f64 {
        self.a
    }

    fn diag(&self, c: f64) -> Vec<C64> {
        let n = self.n;
        let a = self.a;
        (0..n)
            .map(|k| {
                if fft::is_nyquist(k, n) {
                    return C64::new(0.0, 0.0);
                }
                let e = self.eta[k];
                C64::cis(e * c * (1.0 - a) - e * self.xi0) * ((-(1.0 - a * a) * e * e / 2.0).exp() / n as f64)
            })
            .collect()
    }

    /// Applies the step in place to one velocity block with centre `c`.
    pub fn apply_block(&self, blk: &mut [f64], c: [f64; 2], work: &mut OuWork) {
        let n = self.n;
        let d0 = self.diag(c[0]);
        let d1 = self.diag(c[1]);
        // Along ξ₁ (the slow index): line j2 is blk[j1*n + j2] over j1.
        for j2 in 0..n {
            for k in 0..n {
                let (mut re, mut im) = (0.0, 0.0);
                let row = k * n;
                for j1 in 0..n {
                    let v = blk[j1 * n + j2];
                    re += self.er[row + j1] * v;
                    im += self.ei[row + j1] * v;
                }
                work.line[k] = C64::new(re, im) * d0[k];
            }
            self.fft.process_with_scratch(&mut work.line, &mut work.scratch);
            for j1 in 0..n {
                work.tmp[j1 * n + j2] = work.line[j1].re;
            }
        }
        // Along ξ₂: contiguous rows.
        for j1 in 0..n {
            let src = &work.tmp[j1 * n..(j1 + 1) * n];
            for k in 0..n {
                let row = &self.er[k * n..(k + 1) * n];
                let rowi = &self.ei[k * n..(k + 1) * n];
                let (mut re, mut im) = (0.0, 0.0);
                for j2 in 0..n {
                    re += row[j2] * src[j2];
                    im += rowi[j2] * src[j2];
                }
                work.line[k] = C64::new(re, im) * d1[k];
            }
            self.fft.process_with_scratch(&mut work.line, &mut work.scratch);
            for j2 in 0..n {
                blk[j1 * n + j2] = work.line[j2].re;
            }
        }
    }

    pub fn work(&self) -> OuWork {
        OuWork {
            line: vec![C64::new(0.0, 0.0); self.n],
            scratch: vec![C64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()],
            tmp: vec![0.0; self.n * self.n],
        }
    }
}

pub struct OuWork {
    line: Vec<C64>,
    scratch: Vec<C64>,
    tmp: Vec<f64>,
}

fn check_centre(v: &VectorField, eps: f64, v_max: f64) -> Result<()> {
    let limit = v_max / 2.0;
    for ix in 0..v.grid().cells() {
        let [a, b] = v.at(ix);
        let speed = eps * a.abs().max(b.abs());
        if !(speed <= limit) {
            return Err(Error::TruncationRisk { cell: ix, speed, limit });
        }
    }
    Ok(())
}

/// Exact relaxation `∂t f = (1/ε²) ∇ξ·(∇ξ f + (ξ − εv) f)` over `dt` with
/// `v` frozen.
pub fn ou_step(f: &PhaseDensity, dt: f64, eps: f64, v: &VectorField) -> Result<PhaseDensity> {
    if v.grid() != f.space() {
        return Err(Error::GridMismatch);
    }
    let kernel = OuKernel::new(f.vel(), dt, eps);
    ou_step_with(&kernel, f, eps, v)
}

pub fn ou_step_with(kernel: &OuKernel, f: &PhaseDensity, eps: f64, v: &VectorField) -> Result<PhaseDensity> {
    check_centre(v, eps, kernel.v_max)?;
    let mut out = f.clone();
    let nb = f.block_len();
    let per = par::REDUCE_BLOCK;
    par::for_each_chunk(out.data_mut(), nb * per, |chunk, blocks| {
        let mut work = kernel.work();
        for (b, blk) in blocks.chunks_mut(nb).enumerate() {
            let ix = chunk * per + b;
            let c = v.at(ix);
            kernel.apply_block(blk, [eps * c[0], eps * c[1]], &mut work);
        }
    });
    Ok(out)
}

/// Sets negative values to zero and rescales to `target` mass. Returns the
/// clipped mass.
pub fn clip_and_renormalize(f: &mut PhaseDensity, target: f64) -> f64 {
    let vol = f.cell_volume();
    let nb = f.block_len();
    let neg = par::sum_range(f.space().cells(), |ix| {
        f.block(ix).iter().filter(|&&a| a < 0.0).map(|a| -a).sum::<f64>()
    }) * vol;
    if neg > 0.0 {
        par::for_each_chunk(f.data_mut(), nb, |_, blk| {
            for a in blk.iter_mut() {
                if *a < 0.0 {
                    *a = 0.0;
                }
            }
        });
    }
    let m = f.mass();
    if m > 0.0 && target > 0.0 {
        f.scale(target / m);
    }
    neg
}

fn transport(f: &PhaseDensity, dt: f64, eps: f64, method: TransportMethod) -> PhaseDensity {
    match method {
        TransportMethod::SpectralShift => transport_step(f, dt, eps),
        TransportMethod::SemiLagrangian => transport_step_semi_lagrangian(f, dt, eps),
    }
}

/// One split step of the kinetic equation with `v` frozen, followed by the
/// positivity clip. Fails when the clip removes more than [`CLIP_LIMIT`].
pub fn vfp_step(state: &mut KineticState, v: &VectorField, plan: &StepPlan) -> Result<()> {
    let kernel = OuKernel::new(state.f.vel(), plan.dt, state.eps);
    vfp_step_with(state, v, plan, &kernel)
}

pub fn vfp_step_with(state: &mut KineticState, v: &VectorField, plan: &StepPlan, kernel: &OuKernel) -> Result<()> {
    let eps = state.eps;
    let dt = plan.dt;
    let target = state.f.mass();
    let g = match plan.scheme {
        Scheme::Strang => {
            let g = transport(&state.f, dt / 2.0, eps, plan.transport);
            let g = ou_step_with(kernel, &g, eps, v)?;
            transport(&g, dt / 2.0, eps, plan.transport)
        }
        Scheme::Lie => {
            let g = transport(&state.f, dt, eps, plan.transport);
            ou_step_with(kernel, &g, eps, v)?
        }
    };
    state.f = g;
    if !state.f.all_finite() {
        return Err(Error::NonFinite("phase density"));
    }
    let clipped = clip_and_renormalize(&mut state.f, target);
    state.t += dt;
    state.clipped.add(clipped);
    if clipped > CLIP_LIMIT {
        return Err(Error::Positivity { clipped, limit: CLIP_LIMIT, t: state.t });
    }
    Ok(())
}
