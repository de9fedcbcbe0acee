use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vfpns::bl::bl_density;
use vfpns::container::{read_field, Field};
use vfpns::coupled::CoupledRun;
use vfpns::limit::run_limit;
use vfpns::Error;
use vfpns_harness::audit::{modulated_energy_audit, AUDIT_TOL};
use vfpns_harness::config::{ConfigError, RunConfig};
use vfpns_harness::output::{read_records, run_dir};
use vfpns_harness::report::emit_report;
use vfpns_harness::sweep::{drive, eps_sweep, start_run};
use vfpns_harness::{init, suites};

#[derive(Parser)]
#[command(name = "vfpns", about = "Coupled kinetic-fluid solver and rate experiments")]
struct Cli {
    /// JSON run configuration; defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated ε list, overriding the configuration.
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// One coupled run at the first ε.
    Simulate {
        /// Continue from a checkpoint directory.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// The limit system alone.
    Limit {
        #[arg(long, default_value_t = 500)]
        steps: usize,
    },
    /// Coupled runs over the ε list with rate fits and a report.
    Sweep,
    /// Re-checks the modulated-energy inequality on a stored run directory.
    Audit { dir: PathBuf },
    /// BL distance between two stored scalar fields.
    Bl { a: PathBuf, b: PathBuf },
    /// Small-instance verification suites.
    Oracle {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
    Acceptance(String),
    Other(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Other(e.to_string())
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(e) = &cli.eps {
        cfg.eps_list = e.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(cfg: &RunConfig, resume: Option<&Path>) -> Result<(), Failure> {
    let (run, dir, resumed) = match resume {
        Some(ck) => {
            let run = CoupledRun::load_checkpoint(ck)?;
            let dir = run_dir(&cfg.out_dir, run.cfg.eps);
            (run, dir, true)
        }
        None => {
            let eps = cfg.eps_list[0];
            (start_run(cfg, eps)?, run_dir(&cfg.out_dir, eps), false)
        }
    };
    let eps = run.cfg.eps;
    let (run, _) = drive(run, Some(&dir), resumed, cfg.checkpoint_every)?;
    let records = read_records(&dir)?;
    let audit = modulated_energy_audit(&records, eps, AUDIT_TOL)?;
    let s = run.state.sups;
    println!(
        "eps {eps}: {} steps, sup E0 {:.4e}, sup E1 {:.4e}, sup d_BL {:.4e}, audit margin {:.3e}",
        run.cfg.steps, s.e0, s.e1, s.bl_rho, audit.worst_margin
    );
    println!("records in {}", dir.display());
    Ok(())
}

fn limit(cfg: &RunConfig, steps: usize) -> Result<(), Failure> {
    let (rho0, v0, _, _) = init::build(&cfg.initial, cfg.grid.space(), cfg.grid.vel())?;
    let traj = run_limit(&rho0, &v0, cfg.t_end, steps)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let p = cfg.out_dir.join("limit.csv");
    let mut text = String::from("t,mass,min_rho,max_rho,grad_phi_sup,llogl,kinetic_energy\n");
    for r in &traj.records {
        text.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            r.t, r.mass, r.min_rho, r.max_rho, r.grad_phi_sup, r.llogl, r.kinetic_energy
        ));
    }
    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    let last = traj.records.last().expect("at least the initial record");
    println!("limit run to t = {}: min ρ {:.6}, energy {:.6e}; table in {}", last.t, last.min_rho, last.kinetic_energy, p.display());
    Ok(())
}

fn sweep(cfg: &RunConfig) -> Result<(), Failure> {
    cfg.validate_sweep()?;
    let (res, err) = match eps_sweep(cfg) {
        Ok(r) => (r, None),
        Err((r, e)) => (r, Some(e)),
    };
    emit_report(&res, &cfg.out_dir)?;
    if let Some(e) = err {
        return Err(e.into());
    }
    for r in &res.rows {
        println!("eps {:<6} E0 {:.4e} E1 {:.4e} d_BL {:.4e} excess {:.2e} audit {:.2e}", r.eps, r.e0, r.e1, r.bl_rho, r.energy_excess_max, r.audit_margin_min);
    }
    for f in &res.fits {
        if let Some(fit) = &f.fit {
            println!("slope {:<8} {:.3} (residual {:.2e}, {} points)", f.quantity, fit.slope, fit.residual, fit.points);
        }
    }
    println!("report in {}", cfg.out_dir.display());
    if !res.checks.all_pass() {
        return Err(Failure::Acceptance(format!("{:?}", res.checks)));
    }
    Ok(())
}

fn audit(dir: &Path) -> Result<(), Failure> {
    let records = read_records(dir)?;
    let p = dir.join("checkpoint").join("state.json");
    let eps = match std::fs::read_to_string(&p) {
        Ok(t) => serde_json::from_str::<serde_json::Value>(&t).ok().and_then(|v| v["config"]["eps"].as_f64()),
        Err(_) => None,
    }
    .or_else(|| dir.file_name()?.to_str()?.strip_prefix("eps_")?.parse().ok())
    .ok_or_else(|| Failure::Other(format!("cannot tell ε for {}", dir.display())))?;
    let rep = modulated_energy_audit(&records, eps, AUDIT_TOL)?;
    println!("{} records, worst margin {:.3e}, holds: {}", rep.rows.len(), rep.worst_margin, rep.holds_all);
    if !rep.holds_all {
        return Err(Failure::Numerical("modulated-energy inequality violated".into()));
    }
    Ok(())
}

fn bl(a: &Path, b: &Path) -> Result<(), Failure> {
    let scalar = |p: &Path| match read_field(p)? {
        (_, Field::Scalar(s)) => Ok(s),
        _ => Err(Failure::Other(format!("{} is not a scalar field", p.display()))),
    };
    println!("{:.12e}", bl_density(&scalar(a)?, &scalar(b)?)?);
    Ok(())
}

fn oracle(seed: u64) -> Result<(), Failure> {
    let reports = [
        suites::identity_suite(500, 1000, seed)?,
        suites::analytic_suite()?,
        suites::bl_oracle_suite(500, seed)?,
        suites::stability_suite(16, 100)?,
    ];
    let mut ok = true;
    for r in &reports {
        for c in &r.checks {
            println!("{:<14} {:<34} worst {:.3e} tol {:.1e} {}", r.suite, c.name, c.worst, c.tol, if c.pass() { "ok" } else { "FAIL" });
        }
        ok &= r.pass();
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Other("verification suite failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = load_config(&cli).and_then(|cfg| match &cli.cmd {
        Cmd::Simulate { resume } => simulate(&cfg, resume.as_deref()),
        Cmd::Limit { steps } => limit(&cfg, *steps),
        Cmd::Sweep => sweep(&cfg),
        Cmd::Audit { dir } => audit(dir),
        Cmd::Bl { a, b } => bl(a, b),
        Cmd::Oracle { seed } => oracle(*seed),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Acceptance(m)) => {
            eprintln!("acceptance threshold not met: {m}");
            ExitCode::from(4)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
