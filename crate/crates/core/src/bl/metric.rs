use serde::{Deserialize, Serialize};

/// Finite metric spaces given by a graph whose geodesic distance is the
/// metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metric {
    /// `n × n` cell centres on a torus of side `side` with the L¹ geodesic
    /// distance; edges join axis neighbours.
    TorusLattice { n: usize, side: f64 },
    /// Torus lattice in `x` times a non-periodic `nv × nv` velocity lattice
    /// on `[−v_max, v_max)²`, with `d = d_T(x, x') + |ξ − ξ'|₁`. Node index
    /// `ix · nv² + iv` as in the phase layout.
    PhaseLattice { nx: usize, side: f64, nv: usize, v_max: f64 },
    /// Explicit symmetric distance matrix on `n` points; every pair is an
    /// edge.
    Explicit { n: usize, d: Vec<f64> },
}

fn torus_gap(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

impl Metric {
    pub fn torus(n: usize, side: f64) -> Self {
        Metric::TorusLattice { n, side }
    }

    pub fn phase(nx: usize, side: f64, nv: usize, v_max: f64) -> Self {
        Metric::PhaseLattice { nx, side, nv, v_max }
    }

    /// Euclidean distances between points of the plane.
    pub fn from_points(points: &[[f64; 2]]) -> Self {
        let n = points.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (points[i], points[j]);
                d[i * n + j] = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            }
        }
        Metric::Explicit { n, d }
    }

    pub fn nodes(&self) -> usize {
        match self {
            Metric::TorusLattice { n, .. } => n * n,
            Metric::PhaseLattice { nx, nv, .. } => nx * nx * nv * nv,
            Metric::Explicit { n, .. } => *n,
        }
    }

    /// Distance between nodes `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match self {
            Metric::TorusLattice { n, side } => {
                let h = side / *n as f64;
                let g = torus_gap(i / n, j / n, *n) + torus_gap(i % n, j % n, *n);
                g as f64 * h
            }
            Metric::PhaseLattice { nx, side, nv, v_max } => {
                let nb = nv * nv;
                let (xi, xj) = (i / nb, j / nb);
                let (vi, vj) = (i % nb, j % nb);
                let hx = side / *nx as f64;
                let hv = 2.0 * v_max / *nv as f64;
                let gx = torus_gap(xi / nx, xj / nx, *nx) + torus_gap(xi % nx, xj % nx, *nx);
                let gv = (vi / nv).abs_diff(vj / nv) + (vi % nv).abs_diff(vj % nv);
                gx as f64 * hx + gv as f64 * hv
            }
            Metric::Explicit { n, d } => d[i * n + j],
        }
    }

    /// Undirected constraint edges `(i, j, length)` with `i < j` or, on a
    /// two-cell periodic axis, the single wrap edge.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut e = Vec::new();
        match self {
            Metric::TorusLattice { n, side } => {
                let n = *n;
                let h = side / n as f64;
                for i1 in 0..n {
                    for i2 in 0..n {
                        let a = i1 * n + i2;
                        if n > 1 {
                            let r = i1 * n + (i2 + 1) % n;
                            let d = (i1 + 1) % n * n + i2;
                            if n > 2 || i2 == 0 {
                                e.push((a, r, h));
                            }
                            if n > 2 || i1 == 0 {
                                e.push((a, d, h));
                            }
                        }
                    }
                }
            }
            Metric::PhaseLattice { nx, side, nv, v_max } => {
                let (nx, nv) = (*nx, *nv);
                let nb = nv * nv;
                let hx = side / nx as f64;
                let hv = 2.0 * v_max / nv as f64;
                for i1 in 0..nx {
                    for i2 in 0..nx {
                        let x = i1 * nx + i2;
                        let xr = i1 * nx + (i2 + 1) % nx;
                        let xd = (i1 + 1) % nx * nx + i2;
                        for iv in 0..nb {
                            let a = x * nb + iv;
                            if nx > 2 || i2 == 0 {
                                e.push((a, xr * nb + iv, hx));
                            }
                            if nx > 2 || i1 == 0 {
                                e.push((a, xd * nb + iv, hx));
                            }
                            let (j1, j2) = (iv / nv, iv % nv);
                            if j2 + 1 < nv {
                                e.push((a, x * nb + iv + 1, hv));
                            }
                            if j1 + 1 < nv {
                                e.push((a, x * nb + iv + nv, hv));
                            }
                        }
                    }
                }
            }
            Metric::Explicit { n, d } => {
                for i in 0..*n {
                    for j in i + 1..*n {
                        e.push((i, j, d[i * n + j]));
                    }
                }
            }
        }
        e
    }
}
