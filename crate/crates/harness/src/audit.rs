//! Per-record check of the modulated-energy inequality.

use serde::{Deserialize, Serialize};
use vfpns::coupled::CoupledRecord;
use vfpns::{Error, Result};

/// Default relative tolerance `LHS ≤ RHS + tol (1 + |RHS|)`.
pub const AUDIT_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `RHS + tol (1 + |RHS|) − LHS`; negative means a violation.
    pub margin: f64,
    pub modulated_kinetic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub eps: f64,
    pub tol: f64,
    pub rows: Vec<AuditRow>,
    pub holds_all: bool,
    pub worst_margin: f64,
    /// Modulated energy at the start, `𝓗[f₀|M_{ρ₀,u_ε(0)}] + ½‖v₀^ε − v₀‖²`.
    pub initial: f64,
    /// `sup_t` of the state part `𝓗 + ½‖v^ε − v‖²`.
    pub state_sup: f64,
    pub modulated_kinetic_sup: f64,
}

/// Audits the records of one coupled run. The records must be in time
/// order and every component of a record must refer to the same time.
pub fn modulated_energy_audit(records: &[CoupledRecord], eps: f64, tol: f64) -> Result<AuditReport> {
    if records.is_empty() {
        return Err(Error::Trajectory("no records to audit".into()));
    }
    let mut rows = Vec::with_capacity(records.len());
    let mut last = f64::NEG_INFINITY;
    for r in records {
        let t = r.diag.t;
        if r.audit.t != t || r.energy.t != t {
            return Err(Error::Trajectory(format!("misaligned record at t = {t}")));
        }
        if !(t > last) {
            return Err(Error::Trajectory(format!("records out of order at t = {t}")));
        }
        last = t;
        let a = &r.audit;
        rows.push(AuditRow {
            t,
            lhs: a.lhs,
            rhs: a.rhs,
            margin: a.rhs + tol * (1.0 + a.rhs.abs()) - a.lhs,
            modulated_kinetic: a.modulated_kinetic,
        });
    }
    let worst_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(AuditReport {
        eps,
        tol,
        holds_all: worst_margin >= 0.0,
        worst_margin,
        initial: records[0].audit.initial,
        state_sup: records.iter().map(|r| r.audit.relative_entropy + r.audit.fluid_energy_gap).fold(0.0, f64::max),
        modulated_kinetic_sup: rows.iter().map(|r| r.modulated_kinetic).fold(0.0, f64::max),
        rows,
    })
}

/// Smallest `C` with `q ≤ C (ε² + init)` over a sweep, for the closed
/// form of the stability estimate.
pub fn gronwall_constant(reports: &[AuditReport], q: impl Fn(&AuditReport) -> f64) -> f64 {
    reports
        .iter()
        .map(|r| q(r) / (r.eps * r.eps + r.initial))
        .fold(0.0, f64::max)
}
