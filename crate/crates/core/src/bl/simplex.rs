//! Dense condensed-tableau simplex for `max cᵀx, Ax ≤ b, x ≥ 0, b ≥ 0`, and the
//! all-pairs LP formulation of the bounded-Lipschitz distance built on it.

use super::{difference, DiscreteMeasure, Metric};
use crate::error::{Error, Result};

pub const ORACLE_MAX_NODES: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Unbounded,
}

/// Maximises `cᵀx` subject to `A x ≤ b`, `x ≥ 0` with `b ≥ 0`, so the
/// origin is a feasible start.
///
/// Condensed tableau: one row per basic variable, one column per nonbasic
/// variable, pivots by Tucker exchange. Dantzig pricing, switching to
/// Bland's rule while the objective stalls.
pub fn simplex_max(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpOutcome> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|r| r.len() != n) {
        return Err(Error::Lp("inconsistent dimensions".into()));
    }
    if b.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::Lp("right-hand side must be nonnegative".into()));
    }
    let w = n + 1;
    let mut t = vec![0.0; (m + 1) * w];
    for i in 0..m {
        t[i * w..i * w + n].copy_from_slice(&a[i]);
        t[i * w + n] = b[i];
    }
    for j in 0..n {
        t[m * w + j] = -c[j];
    }
    // Labels: 0..n are structural, n..n+m are slacks.
    let mut basic: Vec<usize> = (n..n + m).collect();
    let mut nonbasic: Vec<usize> = (0..n).collect();
    let eps = 1e-11;
    let piv_tol = 1e-9;
    let feas_tol = 1e-11;
    let tiny_tol = 1e-13;
    let mut skip = vec![false; n];
    let mut stall = 0usize;
    let mut last = 0.0;
    let cap = 50 * (n + m) + 1000;
    let mut prow = vec![0.0; w];
    for _ in 0..cap {
        let bland = stall > 20;
        let mut enter = usize::MAX;
        let mut best = -eps;
        for j in 0..n {
            let d = t[m * w + j];
            if d < -eps && !skip[j] {
                let better = if bland {
                    enter == usize::MAX || nonbasic[j] < nonbasic[enter]
                } else {
                    d < best
                };
                if better {
                    enter = j;
                    best = d;
                }
            }
        }
        if enter == usize::MAX {
            let mut x = vec![0.0; n];
            for (i, &bv) in basic.iter().enumerate() {
                if bv < n {
                    x[bv] = t[i * w + n];
                }
            }
            return Ok(LpOutcome::Optimal { value: t[m * w + n], x });
        }
        // Harris ratio test: bound the step with a small feasibility slack,
        // then take the largest pivot among the rows within that bound.
        let ratio = |tol: f64| {
            let mut theta = f64::INFINITY;
            for i in 0..m {
                let p = t[i * w + enter];
                if p > tol {
                    theta = theta.min((t[i * w + n].max(0.0) + feas_tol) / p);
                }
            }
            let mut leave = usize::MAX;
            let mut big = 0.0;
            for i in 0..m {
                let p = t[i * w + enter];
                if p > tol && t[i * w + n].max(0.0) / p <= theta {
                    let better = p > big * (1.0 + 1e-12)
                        || (bland && p >= big * (1.0 - 1e-12) && leave != usize::MAX && basic[i] < basic[leave]);
                    if leave == usize::MAX || better {
                        leave = i;
                        big = p;
                    }
                }
            }
            leave
        };
        let mut leave = ratio(piv_tol);
        if leave == usize::MAX {
            leave = ratio(tiny_tol);
        }
        if leave == usize::MAX {
            if (0..m).all(|i| t[i * w + enter] <= 0.0) {
                return Ok(LpOutcome::Unbounded);
            }
            // Only negligible pivots: price this column out until the
            // next exchange.
            skip[enter] = true;
            continue;
        }
        skip.iter_mut().for_each(|s| *s = false);
        let p = t[leave * w + enter];
        for k in 0..w {
            prow[k] = t[leave * w + k] / p;
        }
        prow[enter] = 1.0 / p;
        for i in 0..=m {
            if i == leave {
                continue;
            }
            let f = t[i * w + enter];
            if f != 0.0 {
                let row = &mut t[i * w..(i + 1) * w];
                for k in 0..w {
                    row[k] -= f * prow[k];
                }
                row[enter] = -f / p;
            }
        }
        t[leave * w..(leave + 1) * w].copy_from_slice(&prow);
        std::mem::swap(&mut basic[leave], &mut nonbasic[enter]);
        let val = t[m * w + n];
        if val > last + 1e-15 {
            stall = 0;
            last = val;
        } else {
            stall += 1;
        }
    }
    Err(Error::Lp("simplex iteration limit".into()))
}

/// Exact `d_BL` from the LP with every node pair constrained by its metric
/// distance. Variables `p, q ≥ 0` with `φ = p − q`, then `c` and `ℓ`.
pub fn bl_oracle(mu: &DiscreteMeasure, nu: &DiscreteMeasure, metric: &Metric) -> Result<f64> {
    let n = metric.nodes();
    if n > ORACLE_MAX_NODES {
        return Err(Error::OracleSize { nodes: n, limit: ORACLE_MAX_NODES });
    }
    let delta = difference(mu, nu, metric)?;
    let nv = 2 * n + 2;
    let (ci, li) = (2 * n, 2 * n + 1);
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..n {
        let mut r = vec![0.0; nv];
        r[i] = 1.0;
        r[n + i] = -1.0;
        r[ci] = -1.0;
        rows.push(r);
        rhs.push(0.0);
        let mut r = vec![0.0; nv];
        r[i] = -1.0;
        r[n + i] = 1.0;
        r[ci] = -1.0;
        rows.push(r);
        rhs.push(0.0);
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut r = vec![0.0; nv];
            r[i] = 1.0;
            r[n + i] = -1.0;
            r[j] = -1.0;
            r[n + j] = 1.0;
            r[li] = -metric.distance(i, j);
            rows.push(r);
            rhs.push(0.0);
        }
    }
    let mut r = vec![0.0; nv];
    r[ci] = 1.0;
    r[li] = 1.0;
    rows.push(r);
    rhs.push(1.0);
    let mut obj = vec![0.0; nv];
    for i in 0..n {
        obj[i] = delta[i];
        obj[n + i] = -delta[i];
    }
    match simplex_max(&rows, &rhs, &obj)? {
        LpOutcome::Optimal { value, .. } => Ok(value.max(0.0)),
        LpOutcome::Unbounded => Err(Error::Lp("unbounded".into())),
    }
}
