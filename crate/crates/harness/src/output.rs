//! Per-run output files.
//!
//! A run directory holds `diagnostics.csv` / `diagnostics.jsonl`,
//! `energy.csv`, `audit.csv`, and `checkpoint/` when checkpointing is on.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use vfpns::coupled::{AuditRecord, CoupledRecord};
use vfpns::entropy::RecordSink;
use vfpns::{Error, Result};

pub const ENERGY_HEADER: &str = "t,free_energy,dissipated,initial,excess,e1,e1_plain";

fn row(values: &[f64]) -> String {
    values.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

/// Name of the run directory for one ε.
pub fn run_dir(out: &Path, eps: f64) -> PathBuf {
    out.join(format!("eps_{eps}"))
}

pub struct RunWriter {
    diag: RecordSink,
    energy: File,
    audit: File,
    dir: PathBuf,
}

impl RunWriter {
    /// Creates fresh files in `dir`.
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let diag = RecordSink::create(dir.join("diagnostics"))?;
        let mk = |name: &str, header: &str| -> Result<File> {
            let p = dir.join(name);
            let mut f = File::create(&p).map_err(|e| Error::io(&p, e))?;
            writeln!(f, "{header}").map_err(|e| Error::io(&p, e))?;
            Ok(f)
        };
        Ok(Self {
            diag,
            energy: mk("energy.csv", ENERGY_HEADER)?,
            audit: mk("audit.csv", AuditRecord::CSV_HEADER)?,
            dir: dir.to_path_buf(),
        })
    }

    /// Appends to the files of an interrupted run.
    pub fn append(dir: &Path) -> Result<Self> {
        let open = |name: &str| -> Result<File> {
            let p = dir.join(name);
            OpenOptions::new().append(true).open(&p).map_err(|e| Error::io(&p, e))
        };
        Ok(Self {
            diag: RecordSink::append(dir.join("diagnostics"))?,
            energy: open("energy.csv")?,
            audit: open("audit.csv")?,
            dir: dir.to_path_buf(),
        })
    }

    pub fn push(&mut self, r: &CoupledRecord) -> Result<()> {
        self.diag.push(&r.diag)?;
        let e = &r.energy;
        writeln!(self.energy, "{}", row(&[e.t, e.free_energy, e.dissipated, e.initial, e.excess, r.e1, r.e1_plain]))
            .map_err(|err| Error::io(self.dir.join("energy.csv"), err))?;
        writeln!(self.audit, "{}", row(&r.audit.values())).map_err(|err| Error::io(self.dir.join("audit.csv"), err))
    }
}

/// Reads the records of a run directory back.
pub fn read_records(dir: &Path) -> Result<Vec<CoupledRecord>> {
    let p = dir.join("diagnostics.jsonl");
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let diags = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<std::result::Result<Vec<vfpns::entropy::DiagnosticsRecord>, _>>()?;
    let energy = read_csv(&dir.join("energy.csv"), 7)?;
    let audit = read_csv(&dir.join("audit.csv"), 14)?;
    if energy.len() != diags.len() || audit.len() != diags.len() {
        return Err(Error::Trajectory(format!(
            "record counts differ in {}: {} diagnostics, {} energy, {} audit",
            dir.display(),
            diags.len(),
            energy.len(),
            audit.len()
        )));
    }
    Ok(diags
        .into_iter()
        .zip(energy)
        .zip(audit)
        .map(|((diag, e), a)| CoupledRecord {
            diag,
            energy: vfpns::coupled::EnergyCheck { t: e[0], free_energy: e[1], dissipated: e[2], initial: e[3], excess: e[4] },
            audit: AuditRecord {
                t: a[0],
                relative_entropy: a[1],
                fluid_energy_gap: a[2],
                kinetic_flux: a[3],
                alignment: a[4],
                fluid_gap: a[5],
                initial: a[6],
                term_i: a[7],
                term_ii: a[8],
                term_iii: a[9],
                term_iv: a[10],
                modulated_kinetic: a[11],
                lhs: a[12],
                rhs: a[13],
            },
            e1: e[5],
            e1_plain: e[6],
        })
        .collect())
}

fn read_csv(path: &Path, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if vals.len() != width {
            return Err(Error::Format(format!("{}: expected {width} columns, got {}", path.display(), vals.len())));
        }
        out.push(vals);
    }
    Ok(out)
}
