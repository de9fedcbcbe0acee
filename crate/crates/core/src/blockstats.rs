//! Per-cell velocity statistics used by the entropy and dissipation
//! functionals.
//!
//! The Fokker–Planck flux integrand expands as
//! `|∇f + (ξ−c)f|²/f = |∇f|²/f + 2(ξ−c)·∇f + |ξ−c|² f`,
//! so a handful of block sums give the dissipation for any drift centre
//! `c`. Cells below [`flux_floor`] leave out only the `|∇f|²/f` term:
//! there the round-off of the spectral gradient, divided by `f`, would
//! outweigh the true integrand. The linear terms are kept everywhere, so
//! the split into kinetic and alignment parts stays exact.

use crate::fft::{self, Fft2, C64};
use crate::grid::{PhaseDensity, VelocityGrid};
use std::sync::Arc;

/// Cells at or below this value count as vacuum in `f log f` and `1/f`.
pub const LOG_FLOOR: f64 = 1e-30;

/// Flux cutoff relative to the largest value of a block.
pub const FLUX_REL_FLOOR: f64 = 1e-12;

/// Values at or below this drop out of `∫ |∇f|²/f` for `blk`.
pub fn flux_floor(blk: &[f64]) -> f64 {
    LOG_FLOOR.max(FLUX_REL_FLOOR * blk.iter().fold(0.0f64, |m, &v| m.max(v)))
}

/// Velocity-grid tables shared by the block kernels.
#[derive(Clone)]
pub struct VelocityCtx {
    pub grid: VelocityGrid,
    pub nodes: Vec<f64>,
    pub dv2: f64,
    plan: Arc<Fft2>,
    /// Velocity wavenumbers per FFT bin, Nyquist set to zero.
    eta: Vec<f64>,
}

impl VelocityCtx {
    pub fn new(grid: VelocityGrid) -> Self {
        let n = grid.n();
        let eta = (0..n)
            .map(|i| if fft::is_nyquist(i, n) { 0.0 } else { grid.wavenumber(i) })
            .collect();
        Self { grid, nodes: grid.nodes(), dv2: grid.cell_area(), plan: fft::plan(n), eta }
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Spectral `∂ξ₁ f` and `∂ξ₂ f` of one block.
    pub fn grad_block(&self, blk: &[f64], g0: &mut [f64], g1: &mut [f64], work: &mut GradWork) {
        let n = self.n();
        for (z, &v) in work.a.iter_mut().zip(blk) {
            *z = C64::new(v, 0.0);
        }
        self.plan.forward_with(&mut work.a, &mut work.scratch);
        let norm = 1.0 / (n * n) as f64;
        for j1 in 0..n {
            for j2 in 0..n {
                let z = work.a[j1 * n + j2] * norm;
                work.b[j1 * n + j2] = z * C64::new(0.0, self.eta[j1]);
                work.c[j1 * n + j2] = z * C64::new(0.0, self.eta[j2]);
            }
        }
        self.plan.inverse_with(&mut work.b, &mut work.scratch);
        self.plan.inverse_with(&mut work.c, &mut work.scratch);
        for k in 0..n * n {
            g0[k] = work.b[k].re;
            g1[k] = work.c[k].re;
        }
    }

    /// Discrete mass of the unit Gaussian centred at `u`:
    /// `h_v² Σ exp(−|ξ−u|²/2)/(2π)`.
    pub fn gaussian_mass(&self, u: [f64; 2]) -> f64 {
        let s = |c: f64| {
            self.nodes
                .iter()
                .map(|&x| (-(x - c) * (x - c) / 2.0).exp())
                .sum::<f64>()
        };
        s(u[0]) * s(u[1]) * self.dv2 / (2.0 * std::f64::consts::PI)
    }
}

/// Scratch buffers for [`VelocityCtx::grad_block`].
pub struct GradWork {
    a: Vec<C64>,
    b: Vec<C64>,
    c: Vec<C64>,
    scratch: Vec<C64>,
    pub g0: Vec<f64>,
    pub g1: Vec<f64>,
}

impl GradWork {
    pub fn new(ctx: &VelocityCtx) -> Self {
        let nb = ctx.n() * ctx.n();
        let z = C64::new(0.0, 0.0);
        Self {
            a: vec![z; nb],
            b: vec![z; nb],
            c: vec![z; nb],
            scratch: vec![z; ctx.plan.scratch_len()],
            g0: vec![0.0; nb],
            g1: vec![0.0; nb],
        }
    }
}

/// Velocity integrals of one spatial cell.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlockStats {
    /// `∫ f`
    pub rho: f64,
    /// `∫ ξ f`
    pub m: [f64; 2],
    /// `∫ ξ⊗ξ f` as `[s11, s12, s22]`
    pub s: [f64; 3],
    /// `∫ f log f` over cells above the floor
    pub flogf: f64,
    /// Flux sums, present when gradients were requested.
    pub flux: Option<FluxSums>,
}

/// Block sums for the flux; `a` skips cells at or below the floor.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FluxSums {
    /// `∫ |∇f|²/f` over cells above the floor
    pub a: f64,
    /// `∫ ξ·∇f`
    pub b: f64,
    /// `∫ ∇f`
    pub g: [f64; 2],
    /// `∫ f`, `∫ ξ f`, `∫ |ξ|² f`
    pub rho: f64,
    pub m: [f64; 2],
    pub e: f64,
}

impl FluxSums {
    /// `∫ |∇f + (ξ−c)f|²/f dξ`.
    pub fn dissipation(&self, c: [f64; 2]) -> f64 {
        let cc = c[0] * c[0] + c[1] * c[1];
        let d = self.a + 2.0 * (self.b - c[0] * self.g[0] - c[1] * self.g[1]) + self.e
            - 2.0 * (c[0] * self.m[0] + c[1] * self.m[1])
            + cc * self.rho;
        d.max(0.0)
    }
}

impl BlockStats {
    pub fn energy(&self) -> f64 {
        self.s[0] + self.s[2]
    }

    /// Bulk velocity with a density floor.
    pub fn bulk(&self, floor: f64) -> [f64; 2] {
        let r = self.rho.max(floor);
        [self.m[0] / r, self.m[1] / r]
    }

    /// `∫ f (a−ξ)⊗(a−ξ) dξ` as `[t11, t12, t22]`.
    pub fn centred_tensor(&self, a: [f64; 2]) -> [f64; 3] {
        [
            self.rho * a[0] * a[0] - 2.0 * a[0] * self.m[0] + self.s[0],
            self.rho * a[0] * a[1] - a[0] * self.m[1] - a[1] * self.m[0] + self.s[1],
            self.rho * a[1] * a[1] - 2.0 * a[1] * self.m[1] + self.s[2],
        ]
    }

    /// `∫ f log(f / M_{ρ,u}) − f + M_{ρ,u} dξ` from the moments, with the
    /// discrete Maxwellian mass supplied as `m_mass`.
    pub fn relative_entropy_cell(&self, rho: f64, u: [f64; 2], m_mass: f64) -> Option<f64> {
        if self.rho <= 0.0 {
            return Some(m_mass);
        }
        if rho <= 0.0 {
            return None;
        }
        let uu = u[0] * u[0] + u[1] * u[1];
        let f_log_m = self.rho * (rho / (2.0 * std::f64::consts::PI)).ln()
            - 0.5 * (self.energy() - 2.0 * (u[0] * self.m[0] + u[1] * self.m[1]) + uu * self.rho);
        Some(self.flogf - f_log_m - self.rho + m_mass)
    }

    pub fn compute(blk: &[f64], ctx: &VelocityCtx, work: Option<&mut GradWork>) -> Self {
        let n = ctx.n();
        let nodes = &ctx.nodes;
        let mut st = BlockStats::default();
        let (mut r, mut m0, mut m1, mut s0, mut s1, mut s2, mut fl) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for j1 in 0..n {
            let x0 = nodes[j1];
            let row = &blk[j1 * n..(j1 + 1) * n];
            let (mut rr, mut rm, mut rs) = (0.0, 0.0, 0.0);
            for (j2, &v) in row.iter().enumerate() {
                let x1 = nodes[j2];
                rr += v;
                rm += x1 * v;
                rs += x1 * x1 * v;
                if v > LOG_FLOOR {
                    fl += v * v.ln();
                }
            }
            r += rr;
            m0 += x0 * rr;
            m1 += rm;
            s0 += x0 * x0 * rr;
            s1 += x0 * rm;
            s2 += rs;
        }
        let w = ctx.dv2;
        st.rho = r * w;
        st.m = [m0 * w, m1 * w];
        st.s = [s0 * w, s1 * w, s2 * w];
        st.flogf = fl * w;

        if let Some(work) = work {
            let mut g0 = std::mem::take(&mut work.g0);
            let mut g1 = std::mem::take(&mut work.g1);
            ctx.grad_block(blk, &mut g0, &mut g1, work);
            let mut fs = FluxSums::default();
            let floor = flux_floor(blk);
            for j1 in 0..n {
                let x0 = nodes[j1];
                for j2 in 0..n {
                    let k = j1 * n + j2;
                    let v = blk[k];
                    let x1 = nodes[j2];
                    let (a, b) = (g0[k], g1[k]);
                    if v > floor {
                        fs.a += (a * a + b * b) / v;
                    }
                    fs.b += x0 * a + x1 * b;
                    fs.g[0] += a;
                    fs.g[1] += b;
                    fs.rho += v;
                    fs.m[0] += x0 * v;
                    fs.m[1] += x1 * v;
                    fs.e += (x0 * x0 + x1 * x1) * v;
                }
            }
            fs.a *= w;
            fs.b *= w;
            fs.g = [fs.g[0] * w, fs.g[1] * w];
            fs.rho *= w;
            fs.m = [fs.m[0] * w, fs.m[1] * w];
            fs.e *= w;
            st.flux = Some(fs);
            work.g0 = g0;
            work.g1 = g1;
        }
        st
    }
}

/// Statistics of every spatial cell, in cell order.
pub fn all_stats(f: &PhaseDensity, ctx: &VelocityCtx, with_flux: bool) -> Vec<BlockStats> {
    let cells = f.space().cells();
    let per = crate::par::REDUCE_BLOCK;
    let chunks = crate::par::map_range(cells.div_ceil(per), |c| {
        let mut work = if with_flux { Some(GradWork::new(ctx)) } else { None };
        let lo = c * per;
        let hi = (lo + per).min(cells);
        (lo..hi)
            .map(|ix| BlockStats::compute(f.block(ix), ctx, work.as_mut()))
            .collect::<Vec<_>>()
    });
    chunks.into_iter().flatten().collect()
}
