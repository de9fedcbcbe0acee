//! Hilbert-expansion correctors `f ≈ f₀ + ε f₁` and their error orders.

use crate::entropy::gauss_row;
use crate::error::{Error, Result};
use crate::fit::{fit_rate, RateFit};
use crate::grid::{PhaseDensity, ScalarField, VectorField, VelocityGrid};
use crate::par;
use crate::spectral::Spectral;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Standard Maxwellian `e^{−|ξ|²/2}/(2π)` on the velocity block.
fn standard_block(vel: &VelocityGrid) -> Vec<f64> {
    let n = vel.n();
    let nodes = vel.nodes();
    let mut g = vec![0.0; n];
    gauss_row(&nodes, 0.0, &mut g);
    let mut out = vec![0.0; n * n];
    for j1 in 0..n {
        for j2 in 0..n {
            out[j1 * n + j2] = g[j1] * g[j2] / (2.0 * PI);
        }
    }
    out
}

/// `f₀ = ρ(x) M(ξ)`.
pub fn corrector_f0(rho: &ScalarField, vel: VelocityGrid) -> PhaseDensity {
    let m = standard_block(&vel);
    let mut out = PhaseDensity::zeros(*rho.grid(), vel);
    let r = rho.data();
    par::for_each_chunk(out.data_mut(), vel.cells(), |ix, blk| {
        for (b, &mv) in blk.iter_mut().zip(&m) {
            *b = r[ix] * mv;
        }
    });
    out
}

/// `f₁ = (−ξ·∇ρ + ρ v₀·ξ) M(ξ)`; a signed field in the phase layout.
pub fn corrector_f1(rho: &ScalarField, v0: &VectorField, vel: VelocityGrid) -> PhaseDensity {
    let g = Spectral::new(*rho.grid()).grad(rho);
    let m = standard_block(&vel);
    let n = vel.n();
    let nodes = vel.nodes();
    let mut out = PhaseDensity::zeros(*rho.grid(), vel);
    let r = rho.data();
    par::for_each_chunk(out.data_mut(), vel.cells(), |ix, blk| {
        let gx = g.at(ix);
        let vx = v0.at(ix);
        let a = [r[ix] * vx[0] - gx[0], r[ix] * vx[1] - gx[1]];
        for j1 in 0..n {
            for j2 in 0..n {
                let k = j1 * n + j2;
                blk[k] = (a[0] * nodes[j1] + a[1] * nodes[j2]) * m[k];
            }
        }
    });
    out
}

/// Correctors built from one limit state.
#[derive(Clone, Debug)]
pub struct CorrectorSet {
    pub f0: PhaseDensity,
    pub f1: PhaseDensity,
    pub rho: ScalarField,
    pub v: VectorField,
}

impl CorrectorSet {
    pub fn new(rho: &ScalarField, v: &VectorField, vel: VelocityGrid) -> Self {
        Self {
            f0: corrector_f0(rho, vel),
            f1: corrector_f1(rho, v, vel),
            rho: rho.clone(),
            v: v.clone(),
        }
    }

    /// `‖f − f₀‖_{L¹}`.
    pub fn e0(&self, f: &PhaseDensity) -> f64 {
        f.l1_distance(&self.f0)
    }

    /// `‖f − f₀ − ε (f₁ − layer · f₁⁰)‖_{L¹}` where `f₁⁰` is an optional
    /// initial corrector damped by `layer`.
    pub fn e1(&self, f: &PhaseDensity, eps: f64, initial: Option<(&PhaseDensity, f64)>) -> f64 {
        let nb = f.block_len();
        let (a, b, c) = (f.data(), self.f0.data(), self.f1.data());
        let init = initial.map(|(g, w)| (g.data(), w));
        par::sum_range(f.space().cells(), |ix| {
            let mut s = 0.0;
            for k in ix * nb..(ix + 1) * nb {
                let mut r = a[k] - b[k] - eps * c[k];
                if let Some((g, w)) = init {
                    r += eps * w * g[k];
                }
                s += r.abs();
            }
            s
        }) * f.cell_volume()
    }
}

/// Largest `|∫ f₁ dξ|` over the spatial cells.
pub fn f1_marginal_max(f1: &PhaseDensity) -> f64 {
    let dv2 = f1.vel().cell_area();
    (0..f1.space().cells())
        .map(|ix| (f1.block(ix).iter().sum::<f64>() * dv2).abs())
        .fold(0.0, f64::max)
}

/// One ε of an expansion-order study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub eps: f64,
    /// `sup_t ‖f^ε − f₀‖_{L¹}`
    pub e0: f64,
    /// `sup_t ‖f^ε − f₀ − ε f₁‖_{L¹}`
    pub e1: f64,
    /// `sup_t d_BL(ρ^ε, ρ)`
    pub d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderTable {
    pub rows: Vec<OrderRow>,
    pub slope_e0: Option<RateFit>,
    pub slope_e1: Option<RateFit>,
    pub slope_d: Option<RateFit>,
    /// Set when an error column is identically zero and no slope exists.
    pub rank_deficient: bool,
}

/// Fits the order of each error column. Rows whose error lies below
/// `10 × floor` are left out, smallest ε first.
pub fn residual_orders(rows: &[OrderRow], floor: f64) -> Result<OrderTable> {
    if rows.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 values of ε, got {}", rows.len())));
    }
    let mut rank_deficient = false;
    let mut col = |get: fn(&OrderRow) -> f64| -> Option<RateFit> {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, get(r))).filter(|p| p.1 > 10.0 * floor).collect();
        if rows.iter().all(|r| get(r) == 0.0) {
            rank_deficient = true;
            return None;
        }
        fit_rate(&pts).ok()
    };
    let slope_e0 = col(|r| r.e0);
    let slope_e1 = col(|r| r.e1);
    let slope_d = col(|r| r.d);
    Ok(OrderTable { rows: rows.to_vec(), slope_e0, slope_e1, slope_d, rank_deficient })
}

/// Runs `run_factory(ε)` for every ε and fits the orders.
pub fn residual_orders_from(eps_list: &[f64], mut run_factory: impl FnMut(f64) -> Result<OrderRow>, floor: f64) -> Result<OrderTable> {
    if eps_list.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 values of ε, got {}", eps_list.len())));
    }
    let rows = eps_list.iter().map(|&e| run_factory(e)).collect::<Result<Vec<_>>>()?;
    residual_orders(&rows, floor)
}
