//! Maxwellians, relative entropy, free energy, Fokker–Planck dissipation
//! and related scalar functionals.

use crate::blockstats::{all_stats, BlockStats, VelocityCtx, LOG_FLOOR};
use crate::error::{Error, Result};
use crate::grid::{PhaseDensity, ScalarField, VectorField, VelocityGrid};
use crate::par;
use crate::spectral::Spectral;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

/// Default density floor for bulk velocities.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Parameters `(ρ, u)` of a local Maxwellian.
#[derive(Clone, Debug)]
pub struct MaxwellianParams {
    pub rho: ScalarField,
    pub u: VectorField,
}

fn check_drift(u: &VectorField, vel: &VelocityGrid) -> Result<()> {
    let limit = vel.v_max() / 2.0;
    for ix in 0..u.grid().cells() {
        let [a, b] = u.at(ix);
        let speed = a.abs().max(b.abs());
        if !(speed <= limit) {
            return Err(Error::TruncationRisk { cell: ix, speed, limit });
        }
    }
    Ok(())
}

/// `exp(−(ξ_j − c)²/2)` at every velocity node.
pub(crate) fn gauss_row(nodes: &[f64], c: f64, out: &mut [f64]) {
    for (o, &x) in out.iter_mut().zip(nodes) {
        *o = (-(x - c) * (x - c) / 2.0).exp();
    }
}

/// Fills one velocity block with `ρ/(2π) exp(−|ξ−u|²/2)`.
pub(crate) fn fill_maxwellian_block(blk: &mut [f64], nodes: &[f64], rho: f64, u: [f64; 2], ga: &mut [f64], gb: &mut [f64]) {
    let n = nodes.len();
    gauss_row(nodes, u[0], ga);
    gauss_row(nodes, u[1], gb);
    let c = rho / (2.0 * PI);
    for j1 in 0..n {
        let a = c * ga[j1];
        for j2 in 0..n {
            blk[j1 * n + j2] = a * gb[j2];
        }
    }
}

/// `M_{ρ,u}(x, ξ) = ρ(x)/(2π) exp(−|u(x) − ξ|²/2)` on the phase grid.
pub fn maxwellian(params: &MaxwellianParams, vel: VelocityGrid) -> Result<PhaseDensity> {
    let space = *params.rho.grid();
    if *params.u.grid() != space {
        return Err(Error::GridMismatch);
    }
    check_drift(&params.u, &vel)?;
    let mut out = PhaseDensity::zeros(space, vel);
    let nodes = vel.nodes();
    let nb = vel.cells();
    let rho = params.rho.data();
    par::for_each_chunk(out.data_mut(), nb, |ix, blk| {
        let mut ga = vec![0.0; nodes.len()];
        let mut gb = vec![0.0; nodes.len()];
        fill_maxwellian_block(blk, &nodes, rho[ix], params.u.at(ix), &mut ga, &mut gb);
    });
    Ok(out)
}

/// `∬ f log(f/M) − (f − M)` by direct quadrature; the integrand is `M`
/// where `f` vanishes.
pub fn relative_entropy(f: &PhaseDensity, m: &PhaseDensity) -> Result<f64> {
    if !f.same_grids(m) {
        return Err(Error::GridMismatch);
    }
    let nb = f.block_len();
    let (a, b) = (f.data(), m.data());
    let bad = std::sync::atomic::AtomicUsize::new(usize::MAX);
    let s = par::sum_range(f.space().cells(), |ix| {
        let mut s = 0.0;
        for k in ix * nb..(ix + 1) * nb {
            let (fv, mv) = (a[k], b[k]);
            if fv <= LOG_FLOOR {
                s += mv;
            } else if mv <= 0.0 {
                bad.fetch_min(ix, std::sync::atomic::Ordering::Relaxed);
            } else {
                s += fv * (fv / mv).ln() - fv + mv;
            }
        }
        s
    });
    let bad = bad.into_inner();
    if bad != usize::MAX {
        return Err(Error::SupportMismatch(bad));
    }
    Ok(s * f.cell_volume())
}

/// Relative entropy against `M_{ρ,u}` computed from velocity moments,
/// without building the Maxwellian. Equal to [`relative_entropy`] against
/// [`maxwellian`] up to rounding.
pub fn relative_entropy_maxwellian(f: &PhaseDensity, rho: &ScalarField, u: &VectorField) -> Result<f64> {
    let ctx = VelocityCtx::new(*f.vel());
    let stats = all_stats(f, &ctx, false);
    relative_entropy_from_stats(&stats, &ctx, rho, u, f.space().cell_area())
}

pub fn relative_entropy_from_stats(
    stats: &[BlockStats],
    ctx: &VelocityCtx,
    rho: &ScalarField,
    u: &VectorField,
    dx2: f64,
) -> Result<f64> {
    let mut s = 0.0;
    for (ix, st) in stats.iter().enumerate() {
        let r = rho.data()[ix];
        let uu = u.at(ix);
        let mass = r * ctx.gaussian_mass(uu);
        s += st.relative_entropy_cell(r, uu, mass).ok_or(Error::SupportMismatch(ix))?;
    }
    Ok(s * dx2)
}

/// The three parts of the relative entropy plus the mass-difference term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyParts {
    /// `∬ f log(f / M_{ρ_f,u_f})`
    pub kinetic: f64,
    /// `∫ ρ_f log(ρ_f / ρ)`
    pub density: f64,
    /// `∫ ρ_f |u_f − u|² / 2`
    pub momentum: f64,
    /// `−∬ (f − M_{ρ,u})`
    pub mass_term: f64,
}

impl EntropyParts {
    /// Sum of all four terms; equals the relative entropy.
    pub fn total(&self) -> f64 {
        self.kinetic + self.density + self.momentum + self.mass_term
    }
}

pub fn entropy_decomposition(f: &PhaseDensity, rho: &ScalarField, u: &VectorField) -> Result<EntropyParts> {
    let space = *f.space();
    if *rho.grid() != space || *u.grid() != space {
        return Err(Error::GridMismatch);
    }
    let ctx = VelocityCtx::new(*f.vel());
    let stats = all_stats(f, &ctx, false);
    let mut p = EntropyParts { kinetic: 0.0, density: 0.0, momentum: 0.0, mass_term: 0.0 };
    for (ix, st) in stats.iter().enumerate() {
        let r = rho.data()[ix];
        let uu = u.at(ix);
        let m_mass = r * ctx.gaussian_mass(uu);
        p.mass_term -= st.rho - m_mass;
        if st.rho <= 0.0 {
            continue;
        }
        if r <= 0.0 {
            return Err(Error::SupportMismatch(ix));
        }
        let uf = st.bulk(DENSITY_FLOOR);
        p.kinetic += st.relative_entropy_cell(st.rho, uf, 0.0).unwrap() + st.rho;
        p.density += st.rho * (st.rho / r).ln();
        let d = [uf[0] - uu[0], uf[1] - uu[1]];
        p.momentum += 0.5 * st.rho * (d[0] * d[0] + d[1] * d[1]);
    }
    let w = space.cell_area();
    p.kinetic *= w;
    p.density *= w;
    p.momentum *= w;
    p.mass_term *= w;
    Ok(p)
}

/// `𝓕[f, v] = ∬ (|ξ|²/2 + log f) f + ∫ |v|²/2`.
pub fn free_energy(f: &PhaseDensity, v: &VectorField) -> f64 {
    let ctx = VelocityCtx::new(*f.vel());
    let stats = all_stats(f, &ctx, false);
    kinetic_free_energy(&stats, f.space().cell_area()) + 0.5 * v.norm_sq().integral()
}

/// Kinetic part `∬ (|ξ|²/2 + log f) f` from cell statistics.
pub fn kinetic_free_energy(stats: &[BlockStats], dx2: f64) -> f64 {
    stats.iter().map(|s| 0.5 * s.energy() + s.flogf).sum::<f64>() * dx2
}

/// Fokker–Planck dissipation with drift centre `εv` and its split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationSplit {
    /// `∬ |∇_ξ f + (ξ − εv) f|² / f`
    pub total: f64,
    /// same with `u_f` in place of `εv`
    pub kinetic: f64,
    /// `∫ ρ_f |u_f − εv|²`
    pub alignment: f64,
}

pub fn dissipation_split(f: &PhaseDensity, v: &VectorField, eps: f64) -> DissipationSplit {
    let ctx = VelocityCtx::new(*f.vel());
    let stats = all_stats(f, &ctx, true);
    dissipation_from_stats(&stats, v, eps, f.space().cell_area())
}

pub fn dissipation_from_stats(stats: &[BlockStats], v: &VectorField, eps: f64, dx2: f64) -> DissipationSplit {
    let mut d = DissipationSplit { total: 0.0, kinetic: 0.0, alignment: 0.0 };
    for (ix, st) in stats.iter().enumerate() {
        let fs = st.flux.expect("flux sums requested");
        let vv = v.at(ix);
        let c = [eps * vv[0], eps * vv[1]];
        let uf = st.bulk(DENSITY_FLOOR);
        d.total += fs.dissipation(c);
        d.kinetic += fs.dissipation(uf);
        let a = [uf[0] - c[0], uf[1] - c[1]];
        d.alignment += st.rho * (a[0] * a[0] + a[1] * a[1]);
    }
    d.total *= dx2;
    d.kinetic *= dx2;
    d.alignment *= dx2;
    d
}

/// Outcome of the Csiszár–Kullback–Pinsker comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ckp {
    /// `‖f − M‖²_{L¹}`
    pub lhs: f64,
    /// `2 𝓗[f|M]`
    pub rhs: f64,
    pub holds: bool,
}

pub fn ckp_check(f: &PhaseDensity, m: &PhaseDensity) -> Result<Ckp> {
    let (a, b) = (f.mass(), m.mass());
    if (a - b).abs() > 1e-6 {
        return Err(Error::MassMismatch { a, b });
    }
    let l1 = f.l1_distance(m);
    let lhs = l1 * l1;
    let rhs = 2.0 * relative_entropy(f, m)?;
    Ok(Ckp { lhs, rhs, holds: lhs <= rhs + 1e-8 })
}

/// `∫ ρ |log ρ|`, zero where `ρ = 0`.
pub fn llogl_entropy(rho: &ScalarField) -> f64 {
    rho.map(|r| if r > 0.0 { r * r.ln().abs() } else { 0.0 }).integral()
}

/// `‖φ‖²_{L²} + ‖∇φ‖²_{L²}` with spectral gradient.
pub fn h1_norm_sq(phi: &ScalarField) -> f64 {
    let g = Spectral::new(*phi.grid()).grad(phi);
    phi.map(|a| a * a).integral() + g.norm_sq().integral()
}

/// `∫ p φ² / [(1 + ∫ p |ln p|) ‖φ‖²_{H¹}]`.
pub fn tm_ratio(p: &ScalarField, phi: &ScalarField) -> Result<f64> {
    if p.grid() != phi.grid() {
        return Err(Error::GridMismatch);
    }
    let h1 = h1_norm_sq(phi);
    if !(h1 > 0.0) {
        return Err(Error::UndefinedRatio("H1 norm of the test function vanishes"));
    }
    let num = p.zip_map(phi, |a, b| a * b * b).integral();
    Ok(num / ((1.0 + llogl_entropy(p)) * h1))
}

/// All scalar diagnostics of one record.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub entropy_h: f64,
    pub free_energy_f: f64,
    pub diss_kinetic: f64,
    pub diss_alignment: f64,
    pub diss_total: f64,
    pub l1_dist_f: f64,
    pub l1_dist_rho: f64,
    pub l2_dist_v: f64,
    pub h1_dist_v: f64,
    pub bl_dist_rho: f64,
    pub bl_dist_f: f64,
    pub moment2: f64,
    pub llogl_rho: f64,
    pub scaled_momentum_l1: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str = "t,entropy_H,free_energy_F,diss_kinetic,diss_alignment,diss_total,\
l1_dist_f,l1_dist_rho,l2_dist_v,h1_dist_v,bl_dist_rho,bl_dist_f,moment2,llogl_rho,scaled_momentum_l1";

    pub fn values(&self) -> [f64; 15] {
        [
            self.t,
            self.entropy_h,
            self.free_energy_f,
            self.diss_kinetic,
            self.diss_alignment,
            self.diss_total,
            self.l1_dist_f,
            self.l1_dist_rho,
            self.l2_dist_v,
            self.h1_dist_v,
            self.bl_dist_rho,
            self.bl_dist_f,
            self.moment2,
            self.llogl_rho,
            self.scaled_momentum_l1,
        ]
    }

    /// Shortest round-trip formatting, so equal records give equal bytes.
    pub fn csv_row(&self) -> String {
        self.values().iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
    }
}

/// Appends records to `<stem>.csv` and `<stem>.jsonl`.
pub struct RecordSink {
    csv: std::fs::File,
    jsonl: std::fs::File,
    path: std::path::PathBuf,
}

impl RecordSink {
    /// Creates both files, truncating, and writes the CSV header.
    pub fn create(stem: impl AsRef<Path>) -> Result<Self> {
        let stem = stem.as_ref();
        let cp = stem.with_extension("csv");
        let jp = stem.with_extension("jsonl");
        let mut csv = std::fs::File::create(&cp).map_err(|e| Error::io(&cp, e))?;
        writeln!(csv, "{}", DiagnosticsRecord::CSV_HEADER).map_err(|e| Error::io(&cp, e))?;
        let jsonl = std::fs::File::create(&jp).map_err(|e| Error::io(&jp, e))?;
        Ok(Self { csv, jsonl, path: cp })
    }

    /// Opens existing files for appending, as when a run is resumed.
    pub fn append(stem: impl AsRef<Path>) -> Result<Self> {
        let stem = stem.as_ref();
        let cp = stem.with_extension("csv");
        let jp = stem.with_extension("jsonl");
        let open = |p: &Path| std::fs::OpenOptions::new().append(true).open(p).map_err(|e| Error::io(p, e));
        Ok(Self { csv: open(&cp)?, jsonl: open(&jp)?, path: cp })
    }

    pub fn push(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.csv, "{}", r.csv_row()).map_err(|e| Error::io(&self.path, e))?;
        let line = serde_json::to_string(r)?;
        writeln!(self.jsonl, "{line}").map_err(|e| Error::io(&self.path, e))?;
        Ok(())
    }
}
