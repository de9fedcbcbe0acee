//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::time::Instant;
use vfpns::coupled::{CoupledRun, ENERGY_TOL};
use vfpns_harness::config::RunConfig;
use vfpns_harness::suites::{self, SuiteReport};
use vfpns_harness::sweep::{drive, eps_sweep, run_single, start_run, SweepResult, BL_SLOPE, E0_SLOPE, HILBERT_EPS, MARGINAL_TOL};

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    seconds: f64,
}

fn suite_line(id: usize, name: &'static str, budget: f64, run: impl FnOnce() -> vfpns::Result<Vec<SuiteReport>>) -> Line {
    let t0 = Instant::now();
    match run() {
        Ok(reps) => {
            let seconds = t0.elapsed().as_secs_f64();
            let worst: Vec<String> = reps
                .iter()
                .flat_map(|r| &r.checks)
                .map(|c| format!("{} {:.2e}/{:.0e}", c.name, c.worst, c.tol))
                .collect();
            let pass = reps.iter().all(SuiteReport::pass) && seconds < budget;
            Line { id, name, pass, detail: format!("{}; {:.1}s of {budget}s", worst.join(", "), seconds), seconds }
        }
        Err(e) => Line { id, name, pass: false, detail: format!("error: {e}"), seconds: t0.elapsed().as_secs_f64() },
    }
}

fn sweep_lines(res: &SweepResult, failure: Option<String>, seconds: f64) -> Vec<Line> {
    let note = failure.map(|f| format!(" (run failed: {f})")).unwrap_or_default();
    let rows = &res.rows;
    let complete = rows.len() == 4 && note.is_empty();
    let excess = rows.iter().map(|r| r.energy_excess_max).fold(f64::NEG_INFINITY, f64::max);
    let margin = rows.iter().map(|r| r.audit_margin_min).fold(f64::INFINITY, f64::min);
    let slope = |q| res.fit(q).map(|f| f.slope);
    let in_band = |s: Option<f64>, (lo, hi): (f64, f64)| s.is_some_and(|s| s >= lo && s <= hi);
    let e0 = slope("e0");
    let bl = slope("bl_rho");
    let hil: Vec<String> = rows.iter().filter(|r| r.eps <= HILBERT_EPS).map(|r| format!("ε={} E1 {:.3e} E0 {:.3e}", r.eps, r.e1, r.e0)).collect();
    let marg = rows.iter().map(|r| r.f1_marginal_max).fold(0.0, f64::max);
    let per_row = |get: fn(&vfpns_harness::sweep::SweepRow) -> f64| {
        rows.iter().map(|r| format!("{:.3e}", get(r))).collect::<Vec<_>>().join(" ")
    };
    vec![
        Line {
            id: 4,
            name: "energy inequality",
            pass: complete && excess <= ENERGY_TOL,
            detail: format!("worst excess {excess:.3e} (tol {ENERGY_TOL:.0e}){note}"),
            seconds: 0.0,
        },
        Line {
            id: 5,
            name: "modulated-energy inequality",
            pass: complete && margin >= 0.0,
            detail: format!("worst margin {margin:.3e}{note}"),
            seconds: 0.0,
        },
        Line {
            id: 6,
            name: "rate of f toward ρM",
            pass: complete && in_band(e0, E0_SLOPE),
            detail: format!("slope {e0:.3?} in {E0_SLOPE:?}; sup E0 per ε {}; {seconds:.0}s{note}", per_row(|r| r.e0)),
            seconds,
        },
        Line {
            id: 7,
            name: "rate of ρ^ε toward ρ in BL",
            pass: complete && in_band(bl, BL_SLOPE),
            detail: format!("slope {bl:.3?} in {BL_SLOPE:?}; sup d_BL per ε {}{note}", per_row(|r| r.bl_rho)),
            seconds: 0.0,
        },
        Line {
            id: 8,
            name: "corrector improvement",
            pass: complete && !hil.is_empty() && rows.iter().filter(|r| r.eps <= HILBERT_EPS).all(|r| r.e1 < r.e0) && marg <= MARGINAL_TOL,
            detail: format!("{}; marginal {marg:.1e}{note}", hil.join(", ")),
            seconds: 0.0,
        },
    ]
}

fn small_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.grid.n_x = 16;
    cfg.grid.n_v = 24;
    cfg.eps_list = vec![0.4];
    cfg.t_end = 0.1;
    cfg.records = 6;
    cfg.out_dir = out.to_path_buf();
    cfg
}

fn persistence() -> Result<String, String> {
    let err = |e: vfpns::Error| e.to_string();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_single(&cfg, 0.4, Some(&a)).map_err(err)?;
    run_single(&cfg, 0.4, Some(&b)).map_err(err)?;
    for name in ["diagnostics.csv", "energy.csv", "audit.csv", "diagnostics.jsonl"] {
        let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(name)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{name} differs between identical runs"));
        }
    }

    let c = tmp.path().join("c");
    let (whole, recs) = drive(start_run(&cfg, 0.4).map_err(err)?, Some(&c), false, Some(2)).map_err(err)?;
    let resumed = CoupledRun::load_checkpoint(c.join("checkpoint")).map_err(err)?;
    let from = resumed.t();
    let (end, tail) = drive(resumed, None, true, None).map_err(err)?;
    let (s, w) = (&end.state, &whole.state);
    let mut dev = s.kin.f.l1_distance(&w.kin.f);
    dev = dev.max(s.fluid.v.sub(&w.fluid.v).max_abs());
    dev = dev.max(s.limit.rho.zip_map(&w.limit.rho, |p, q| p - q).max_abs());
    let head = &recs[recs.len() - tail.len()..];
    for (p, q) in tail.iter().zip(head) {
        dev = dev.max((p.diag.t - q.diag.t).abs()).max((p.diag.l1_dist_f - q.diag.l1_dist_f).abs());
        dev = dev.max((p.energy.excess - q.energy.excess).abs()).max((p.audit.lhs - q.audit.lhs).abs());
    }
    if tail.is_empty() || dev > 1e-10 {
        return Err(format!("resume from t = {from:.3} deviates by {dev:.2e} over {} records", tail.len()));
    }
    Ok(format!("4 files byte-identical; resume from t = {from:.3} deviates by {dev:.1e} over {} records", tail.len()))
}

fn main() {
    let mut lines = vec![
        suite_line(1, "exact identities", 60.0, || Ok(vec![suites::identity_suite(500, 1000, 1)?])),
        suite_line(2, "analytic solutions", 120.0, || Ok(vec![suites::analytic_suite()?])),
        suite_line(3, "BL oracle equivalence", 120.0, || Ok(vec![suites::bl_oracle_suite(500, 1)?])),
    ];

    let tmp = tempfile::tempdir().expect("temp dir");
    let mut cfg = RunConfig::default();
    cfg.out_dir = tmp.path().to_path_buf();
    let t0 = Instant::now();
    let (res, failure) = match eps_sweep(&cfg) {
        Ok(r) => (r, None),
        Err((r, e)) => (r, Some(e.to_string())),
    };
    lines.extend(sweep_lines(&res, failure, t0.elapsed().as_secs_f64()));

    lines.push(suite_line(9, "BL stability scenarios", 300.0, || Ok(vec![suites::stability_suite(16, 100)?])));

    let t0 = Instant::now();
    let p = persistence();
    lines.push(Line {
        id: 10,
        name: "determinism and resume",
        pass: p.is_ok(),
        detail: p.unwrap_or_else(|e| e),
        seconds: t0.elapsed().as_secs_f64(),
    });

    lines.sort_by_key(|l| l.id);
    for l in &lines {
        println!("criterion {:>2} {:<28} {} {}", l.id, l.name, if l.pass { "PASS" } else { "FAIL" }, l.detail);
    }
    let total: f64 = lines.iter().map(|l| l.seconds).sum();
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!("acceptance: {} of {} criteria pass ({total:.0}s)", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
