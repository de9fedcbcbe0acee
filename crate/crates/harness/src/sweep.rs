//! One coupled run per ε, then rate fits over the sweep.

use crate::audit::{gronwall_constant, modulated_energy_audit, AuditReport, AUDIT_TOL};
use crate::config::{Recipe, RunConfig};
use crate::init;
use crate::output::{run_dir, RunWriter};
use serde::{Deserialize, Serialize};
use std::path::Path;
use vfpns::coupled::{CoupledConfig, CoupledRecord, CoupledRun};
use vfpns::fit::{fit_rate, RateFit};
use vfpns::hilbert::{corrector_f1, f1_marginal_max};
use vfpns::limit::{run_limit, LimitState};
use vfpns::{Error, Result};

/// Slope bands of the rate checks.
pub const E0_SLOPE: (f64, f64) = (0.9, 1.3);
pub const BL_SLOPE: (f64, f64) = (1.7, 2.3);
pub const MARGINAL_TOL: f64 = 1e-10;
/// Hilbert improvement is checked for every ε at or below this value.
pub const HILBERT_EPS: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub steps: usize,
    pub dt: f64,
    /// `sup_t ‖f^ε − M_{ρ,0}‖_{L¹}`
    pub e0: f64,
    pub e1: f64,
    pub e1_plain: f64,
    pub rho_l1: f64,
    pub v_l2: f64,
    /// `∫ ‖∇(v^ε − v)‖²`
    pub fluid_gap: f64,
    /// `‖(1/ε) m^ε − ρ(v − ∇log ρ)‖_{L¹((0,T)×Ω)}`
    pub scaled_momentum: f64,
    pub bl_rho: f64,
    pub bl_f_sq_integral: f64,
    pub energy_excess_max: f64,
    pub audit_margin_min: f64,
    pub modulated_kinetic_sup: f64,
    pub modulated_initial: f64,
    pub modulated_state_sup: f64,
    pub clipped_mass: f64,
    pub f1_marginal_max: f64,
    /// `sup_t ‖ρ_{dt} − ρ_{dt/2}‖_{L¹}` of the limit system.
    pub floor: f64,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "eps,steps,dt,e0,e1,e1_plain,rho_l1,v_l2,fluid_gap,scaled_momentum,bl_rho,\
bl_f_sq_integral,energy_excess_max,audit_margin_min,modulated_kinetic_sup,modulated_initial,modulated_state_sup,\
clipped_mass,f1_marginal_max,floor";

    pub fn csv_row(&self) -> String {
        let v = [
            self.eps,
            self.steps as f64,
            self.dt,
            self.e0,
            self.e1,
            self.e1_plain,
            self.rho_l1,
            self.v_l2,
            self.fluid_gap,
            self.scaled_momentum,
            self.bl_rho,
            self.bl_f_sq_integral,
            self.energy_excess_max,
            self.audit_margin_min,
            self.modulated_kinetic_sup,
            self.modulated_initial,
            self.modulated_state_sup,
            self.clipped_mass,
            self.f1_marginal_max,
            self.floor,
        ];
        v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
    }
}

/// Fit of `q ≈ C ε²` for a squared quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquaredConstant {
    pub quantity: String,
    /// Least-squares `C` in log space, `exp(mean log(q/ε²))`.
    pub c_fit: f64,
    /// RMS of `log(q / (C ε²))`.
    pub residual: f64,
    /// `max/min` of `q/ε²` over the sweep.
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub quantity: String,
    pub fit: Option<RateFit>,
    /// Points left out because they sit below ten times the floor.
    pub excluded: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepChecks {
    pub energy: Option<bool>,
    pub audit: Option<bool>,
    pub e0_slope: Option<bool>,
    pub bl_slope: Option<bool>,
    pub hilbert: Option<bool>,
    /// Reported, not part of acceptance.
    pub monotone: Option<bool>,
}

impl SweepChecks {
    /// False when any evaluated check failed or was not evaluated.
    pub fn all_pass(&self) -> bool {
        [self.energy, self.audit, self.e0_slope, self.bl_slope, self.hilbert].iter().all(|c| *c == Some(true))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub recipe: Option<Recipe>,
    pub rows: Vec<SweepRow>,
    pub fits: Vec<NamedFit>,
    pub constants: Vec<SquaredConstant>,
    /// `sup (𝓗 + ½‖v^ε − v‖²) ≤ C (ε² + init)` and the same for the
    /// modulated kinetic energy.
    pub gronwall_state: f64,
    pub gronwall_kinetic: f64,
    pub checks: SweepChecks,
    /// Set when a run failed; the rows hold the completed runs.
    pub failure: Option<String>,
}

impl SweepResult {
    pub fn fit(&self, quantity: &str) -> Option<&RateFit> {
        self.fits.iter().find(|f| f.quantity == quantity).and_then(|f| f.fit.as_ref())
    }
}

/// Coupled-run settings for one ε of `cfg`.
pub fn coupled_config(cfg: &RunConfig, eps: f64) -> CoupledConfig {
    let (space, vel) = (cfg.grid.space(), cfg.grid.vel());
    let steps = cfg.dt_policy.steps(&space, &vel, eps, cfg.t_end);
    let mut cc = CoupledConfig::new(&space, &vel, eps, cfg.t_end, cfg.records);
    cc.steps = steps;
    cc.record_every = (steps / cfg.records.max(1)).max(1);
    cc.transport = cfg.transport();
    cc.phase_bl = cfg.phase_bl;
    cc
}

/// A coupled run at step 0 from the configured initial data.
pub fn start_run(cfg: &RunConfig, eps: f64) -> Result<CoupledRun> {
    let (space, vel) = (cfg.grid.space(), cfg.grid.vel());
    let (rho0, v0, f, fluid) = init::build(&cfg.initial, space, vel)?;
    CoupledRun::new(f, fluid, LimitState::new(rho0, v0), coupled_config(cfg, eps))
}

/// Records, audit and summary row of one completed run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub row: SweepRow,
    pub records: Vec<CoupledRecord>,
    pub audit: AuditReport,
}

/// Drives `run` to the end, writing records under `out` (appending when
/// `resumed`) and a checkpoint every `checkpoint_every` records.
pub fn drive(
    mut run: CoupledRun,
    out: Option<&Path>,
    resumed: bool,
    checkpoint_every: Option<usize>,
) -> Result<(CoupledRun, Vec<CoupledRecord>)> {
    let mut writer = match out {
        Some(d) if resumed => Some(RunWriter::append(d)?),
        Some(d) => Some(RunWriter::create(d)?),
        None => None,
    };
    let mut records = Vec::new();
    let mut count = 0usize;
    run.run(&mut |r, rec| {
        if let Some(w) = writer.as_mut() {
            w.push(rec)?;
        }
        records.push(rec.clone());
        count += 1;
        if let (Some(d), Some(k)) = (out, checkpoint_every) {
            if count % k == 0 && !r.done() {
                r.save_checkpoint(d.join("checkpoint"))?;
            }
        }
        Ok(())
    })?;
    Ok((run, records))
}

/// `sup_t ‖ρ_{dt} − ρ_{dt/2}‖_{L¹}` for the limit system at the lockstep
/// resolution `dt/2` of a coupled run with `steps` steps.
pub fn discretization_floor(cfg: &RunConfig, steps: usize) -> Result<f64> {
    let (space, vel) = (cfg.grid.space(), cfg.grid.vel());
    let (rho0, v0, _, _) = init::build(&cfg.initial, space, vel)?;
    let a = run_limit(&rho0, &v0, cfg.t_end, 2 * steps)?;
    let b = run_limit(&rho0, &v0, cfg.t_end, 4 * steps)?;
    Ok(a.states
        .iter()
        .enumerate()
        .map(|(k, s)| s.rho.zip_map(&b.states[2 * k].rho, |x, y| x - y).l1_norm())
        .fold(0.0, f64::max))
}

/// One full run for `eps`, with its summary row.
pub fn run_single(cfg: &RunConfig, eps: f64, out: Option<&Path>) -> Result<RunOutput> {
    let run = start_run(cfg, eps)?;
    let f1_marginal = f1_marginal_max(&corrector_f1(&run.state.limit0.0, &run.state.limit0.1, cfg.grid.vel()));
    let (run, records) = drive(run, out, false, cfg.checkpoint_every)?;
    finish(cfg, run, records, f1_marginal)
}

fn finish(cfg: &RunConfig, run: CoupledRun, records: Vec<CoupledRecord>, f1_marginal: f64) -> Result<RunOutput> {
    let eps = run.cfg.eps;
    let audit = modulated_energy_audit(&records, eps, AUDIT_TOL)?;
    let s = run.state.sups;
    let it = run.state.integrals;
    let row = SweepRow {
        eps,
        steps: run.cfg.steps,
        dt: run.cfg.dt(),
        e0: s.e0,
        e1: s.e1,
        e1_plain: s.e1_plain,
        rho_l1: s.rho_l1,
        v_l2: s.v_l2,
        fluid_gap: it.fluid_gap,
        scaled_momentum: it.scaled_momentum,
        bl_rho: s.bl_rho,
        bl_f_sq_integral: s.bl_f_sq_integral,
        energy_excess_max: records.iter().map(|r| r.energy.excess).fold(f64::NEG_INFINITY, f64::max),
        audit_margin_min: audit.worst_margin,
        modulated_kinetic_sup: audit.modulated_kinetic_sup,
        modulated_initial: audit.initial,
        modulated_state_sup: audit.state_sup,
        clipped_mass: run.state.kin.clipped.total,
        f1_marginal_max: f1_marginal,
        floor: discretization_floor(cfg, run.cfg.steps)?,
    };
    Ok(RunOutput { row, records, audit })
}

/// Log-space fit of `q ≈ C ε²`.
pub fn squared_constant(quantity: &str, points: &[(f64, f64)]) -> Option<SquaredConstant> {
    let logs: Vec<f64> = points.iter().filter(|p| p.1 > 0.0).map(|(e, q)| (q / (e * e)).ln()).collect();
    if logs.len() != points.len() || logs.is_empty() {
        return None;
    }
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let residual = (logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / logs.len() as f64).sqrt();
    let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    Some(SquaredConstant { quantity: quantity.into(), c_fit: mean.exp(), residual, spread: (hi - lo).exp() })
}

fn named_fit(rows: &[SweepRow], quantity: &str, get: fn(&SweepRow) -> f64) -> NamedFit {
    let floor = rows.iter().map(|r| r.floor).fold(0.0, f64::max);
    let mut pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, get(r))).collect();
    // Drop from the small-ε end only, and only while below the floor.
    let mut excluded = 0;
    while pts.last().is_some_and(|p| p.1 <= 10.0 * floor) {
        pts.pop();
        excluded += 1;
    }
    NamedFit { quantity: quantity.into(), fit: fit_rate(&pts).ok(), excluded }
}

/// Fits, constants and checks for completed rows.
pub fn summarize(recipe: Recipe, rows: Vec<SweepRow>, audits: &[AuditReport]) -> SweepResult {
    let fits = vec![
        named_fit(&rows, "e0", |r| r.e0),
        named_fit(&rows, "e1", |r| r.e1),
        named_fit(&rows, "bl_rho", |r| r.bl_rho),
        named_fit(&rows, "rho_l1", |r| r.rho_l1),
        named_fit(&rows, "v_l2", |r| r.v_l2),
    ];
    let sq = |name: &str, get: fn(&SweepRow) -> f64| {
        squared_constant(name, &rows.iter().map(|r| (r.eps, get(r))).collect::<Vec<_>>())
    };
    let constants = [
        sq("e0_sq", |r| r.e0 * r.e0),
        sq("rho_l1_sq", |r| r.rho_l1 * r.rho_l1),
        sq("v_l2_sq", |r| r.v_l2 * r.v_l2),
        sq("fluid_gap", |r| r.fluid_gap),
        sq("bl_f_sq_integral", |r| r.bl_f_sq_integral),
    ]
    .into_iter()
    .flatten()
    .collect();

    let mut checks = SweepChecks::default();
    if !rows.is_empty() {
        checks.energy = Some(rows.iter().all(|r| r.energy_excess_max <= vfpns::coupled::ENERGY_TOL));
        checks.audit = Some(rows.iter().all(|r| r.audit_margin_min >= 0.0));
        let band = |f: Option<&RateFit>, (lo, hi): (f64, f64)| f.map(|f| f.slope >= lo && f.slope <= hi).or(Some(false));
        let find = |q: &str| fits.iter().find(|f| f.quantity == q).and_then(|f| f.fit.as_ref());
        checks.bl_slope = band(find("bl_rho"), BL_SLOPE);
        if recipe == Recipe::WellPrepared {
            checks.e0_slope = band(find("e0"), E0_SLOPE);
            let small: Vec<&SweepRow> = rows.iter().filter(|r| r.eps <= HILBERT_EPS).collect();
            checks.hilbert = Some(
                !small.is_empty()
                    && small.iter().all(|r| r.e1 < r.e0)
                    && rows.iter().all(|r| r.f1_marginal_max <= MARGINAL_TOL),
            );
            checks.monotone = Some(monotone(&rows));
        } else {
            checks.e0_slope = Some(true);
            checks.hilbert = Some(true);
        }
    }
    SweepResult {
        recipe: Some(recipe),
        gronwall_state: gronwall_constant(audits, |a| a.state_sup),
        gronwall_kinetic: gronwall_constant(audits, |a| a.modulated_kinetic_sup),
        rows,
        fits,
        constants,
        checks,
        failure: None,
    }
}

/// Every error column is nonincreasing as ε decreases; the step from the
/// largest ε may rise by 5%.
pub fn monotone(rows: &[SweepRow]) -> bool {
    let cols: [fn(&SweepRow) -> f64; 6] = [|r| r.e0, |r| r.e1, |r| r.rho_l1, |r| r.v_l2, |r| r.fluid_gap, |r| r.bl_rho];
    cols.iter().all(|get| {
        rows.windows(2).enumerate().all(|(i, w)| {
            let slack = if i == 0 { 1.05 } else { 1.0 };
            get(&w[1]) <= slack * get(&w[0])
        })
    })
}

/// Runs the sweep, one run per worker, writing each run under
/// `<out_dir>/eps_<ε>/` and the report at the top level. On a run failure
/// the completed rows are kept and the first error is returned alongside.
pub fn eps_sweep(cfg: &RunConfig) -> std::result::Result<SweepResult, (SweepResult, Error)> {
    cfg.validate_sweep().map_err(|e| (SweepResult::default(), Error::Fit(e.to_string())))?;
    let out = cfg.out_dir.clone();
    let job = |&eps: &f64| run_single(cfg, eps, Some(&run_dir(&out, eps)));
    #[cfg(feature = "parallel")]
    let results: Vec<Result<RunOutput>> = {
        use rayon::prelude::*;
        cfg.eps_list.par_iter().map(job).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<RunOutput>> = cfg.eps_list.iter().map(job).collect();

    let mut rows = Vec::new();
    let mut audits = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(o) => {
                rows.push(o.row);
                audits.push(o.audit);
            }
            Err(e) if first_err.is_none() => first_err = Some(e),
            Err(_) => {}
        }
    }
    let mut res = summarize(cfg.initial.recipe, rows, &audits);
    match first_err {
        None => Ok(res),
        Some(e) => {
            res.failure = Some(e.to_string());
            Err((res, e))
        }
    }
}
