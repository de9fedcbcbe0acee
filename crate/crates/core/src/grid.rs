//! Periodic spatial grid, truncated velocity grid, discrete fields and
//! phase-space quadrature.
//!
//! Spatial nodes sit at `x = i·h` on `[0, L)²`. Velocity nodes are cell
//! centres `ξ = -v_max + (j + ½)·h_v`, so the velocity grid is symmetric
//! about zero and odd moments of even data vanish to rounding.
//!
//! Layout: scalar fields are row-major with `x₁` slowest. A phase density
//! stores one contiguous `n_v × n_v` velocity block per spatial cell.

use crate::error::{Error, Result};
use crate::par;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    n: usize,
    side: f64,
}

impl SpatialGrid {
    pub fn new(n: usize, side: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Grid(format!("n_x = {n} must be a power of two >= 8")));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::Grid(format!("side = {side} must be positive")));
        }
        Ok(Self { n, side })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn side(&self) -> f64 {
        self.side
    }
    pub fn h(&self) -> f64 {
        self.side / self.n as f64
    }
    pub fn cells(&self) -> usize {
        self.n * self.n
    }
    pub fn cell_area(&self) -> f64 {
        self.h() * self.h()
    }
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }
    /// Coordinates of flat cell index `ix`.
    pub fn point(&self, ix: usize) -> [f64; 2] {
        [self.coord(ix / self.n), self.coord(ix % self.n)]
    }
    /// Angular wavenumber `2π m / L` of FFT bin `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * crate::fft::freq_index(i, self.n) as f64 / self.side
    }
    /// Periodic distance from `x` to the origin (flat torus metric).
    pub fn distance_to_origin(&self, x: [f64; 2]) -> f64 {
        let w = |a: f64| {
            let r = a.rem_euclid(self.side);
            r.min(self.side - r)
        };
        w(x[0]).hypot(w(x[1]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    n: usize,
    v_max: f64,
}

impl VelocityGrid {
    pub fn new(n: usize, v_max: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::Grid(format!("n_v = {n} must be even and >= 8")));
        }
        if !(v_max.is_finite() && v_max >= 5.0) {
            return Err(Error::Grid(format!("v_max = {v_max} must be >= 5")));
        }
        Ok(Self { n, v_max })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn v_max(&self) -> f64 {
        self.v_max
    }
    pub fn h(&self) -> f64 {
        2.0 * self.v_max / self.n as f64
    }
    pub fn cells(&self) -> usize {
        self.n * self.n
    }
    pub fn cell_area(&self) -> f64 {
        self.h() * self.h()
    }
    pub fn node(&self, j: usize) -> f64 {
        -self.v_max + (j as f64 + 0.5) * self.h()
    }
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }
    /// Velocity of flat block index `iv`.
    pub fn point(&self, iv: usize) -> [f64; 2] {
        [self.node(iv / self.n), self.node(iv % self.n)]
    }
    /// Angular wavenumber of FFT bin `i` on the periodic velocity box.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * crate::fft::freq_index(i, self.n) as f64 / (2.0 * self.v_max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: SpatialGrid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: SpatialGrid) -> Self {
        Self { grid, data: vec![0.0; grid.cells()] }
    }
    pub fn constant(grid: SpatialGrid, c: f64) -> Self {
        Self { grid, data: vec![c; grid.cells()] }
    }
    pub fn from_vec(grid: SpatialGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.cells() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, data })
    }
    pub fn from_fn(grid: SpatialGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let data = (0..grid.cells()).map(|ix| f(grid.point(ix))).collect();
        Self { grid, data }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|&a| f(a)).collect() }
    }
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, data }
    }
    pub fn scaled(&self, k: f64) -> Self {
        self.map(|a| k * a)
    }

    /// Midpoint-rule integral over the torus.
    pub fn integral(&self) -> f64 {
        let d = &self.data;
        par::sum_range(d.len(), |i| d[i]) * self.grid.cell_area()
    }
    pub fn l1_norm(&self) -> f64 {
        let d = &self.data;
        par::sum_range(d.len(), |i| d[i].abs()) * self.grid.cell_area()
    }
    pub fn l2_norm(&self) -> f64 {
        let d = &self.data;
        (par::sum_range(d.len(), |i| d[i] * d[i]) * self.grid.cell_area()).sqrt()
    }
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &a| m.max(a.abs()))
    }
    pub fn min(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &a| m.min(a))
    }
    pub fn max(&self) -> f64 {
        self.data.iter().fold(f64::NEG_INFINITY, |m, &a| m.max(a))
    }
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: SpatialGrid,
    c: [Vec<f64>; 2],
}

impl VectorField {
    pub fn zeros(grid: SpatialGrid) -> Self {
        Self { grid, c: [vec![0.0; grid.cells()], vec![0.0; grid.cells()]] }
    }
    pub fn constant(grid: SpatialGrid, a: [f64; 2]) -> Self {
        Self { grid, c: [vec![a[0]; grid.cells()], vec![a[1]; grid.cells()]] }
    }
    pub fn from_components(a: ScalarField, b: ScalarField) -> Result<Self> {
        if a.grid != b.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid: a.grid, c: [a.data, b.data] })
    }
    pub fn from_vecs(grid: SpatialGrid, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != grid.cells() || b.len() != grid.cells() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, c: [a, b] })
    }
    pub fn from_fn(grid: SpatialGrid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut a = Vec::with_capacity(grid.cells());
        let mut b = Vec::with_capacity(grid.cells());
        for ix in 0..grid.cells() {
            let v = f(grid.point(ix));
            a.push(v[0]);
            b.push(v[1]);
        }
        Self { grid, c: [a, b] }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }
    pub fn comp(&self, d: usize) -> &[f64] {
        &self.c[d]
    }
    pub fn comp_mut(&mut self, d: usize) -> &mut [f64] {
        &mut self.c[d]
    }
    pub fn component(&self, d: usize) -> ScalarField {
        ScalarField { grid: self.grid, data: self.c[d].clone() }
    }
    pub fn at(&self, ix: usize) -> [f64; 2] {
        [self.c[0][ix], self.c[1][ix]]
    }

    pub fn map2(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let m = |d: usize| self.c[d].iter().zip(&other.c[d]).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, c: [m(0), m(1)] }
    }
    pub fn sub(&self, other: &Self) -> Self {
        self.map2(other, |a, b| a - b)
    }
    pub fn add(&self, other: &Self) -> Self {
        self.map2(other, |a, b| a + b)
    }
    pub fn scaled(&self, k: f64) -> Self {
        let m = |d: usize| self.c[d].iter().map(|&a| k * a).collect();
        Self { grid: self.grid, c: [m(0), m(1)] }
    }
    /// Pointwise product with a scalar field.
    pub fn times(&self, s: &ScalarField) -> Self {
        let m = |d: usize| self.c[d].iter().zip(s.data()).map(|(&a, &b)| a * b).collect();
        Self { grid: self.grid, c: [m(0), m(1)] }
    }
    /// Pointwise squared magnitude.
    pub fn norm_sq(&self) -> ScalarField {
        let data = self.c[0].iter().zip(&self.c[1]).map(|(&a, &b)| a * a + b * b).collect();
        ScalarField { grid: self.grid, data }
    }
    pub fn dot(&self, other: &Self) -> ScalarField {
        let data = (0..self.grid.cells())
            .map(|i| self.c[0][i] * other.c[0][i] + self.c[1][i] * other.c[1][i])
            .collect();
        ScalarField { grid: self.grid, data }
    }
    pub fn l2_norm(&self) -> f64 {
        self.norm_sq().integral().sqrt()
    }
    pub fn max_abs(&self) -> f64 {
        (0..self.grid.cells()).fold(0.0, |m, i| m.max(self.c[0][i].hypot(self.c[1][i])))
    }
    pub fn all_finite(&self) -> bool {
        self.c.iter().all(|v| v.iter().all(|a| a.is_finite()))
    }
}

/// Discrete phase-space density `f(x, ξ)`.
///
/// Densities are nonnegative; the Hilbert correctors reuse the same layout
/// with signed values.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDensity {
    space: SpatialGrid,
    vel: VelocityGrid,
    data: Vec<f64>,
}

impl PhaseDensity {
    pub fn zeros(space: SpatialGrid, vel: VelocityGrid) -> Self {
        Self { space, vel, data: vec![0.0; space.cells() * vel.cells()] }
    }
    pub fn from_vec(space: SpatialGrid, vel: VelocityGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != space.cells() * vel.cells() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { space, vel, data })
    }
    pub fn from_fn(space: SpatialGrid, vel: VelocityGrid, f: impl Fn([f64; 2], [f64; 2]) -> f64 + Sync) -> Self {
        let mut out = Self::zeros(space, vel);
        let nb = vel.cells();
        par::for_each_chunk(&mut out.data, nb, |ix, block| {
            let x = space.point(ix);
            for (iv, b) in block.iter_mut().enumerate() {
                *b = f(x, vel.point(iv));
            }
        });
        out
    }

    pub fn space(&self) -> &SpatialGrid {
        &self.space
    }
    pub fn vel(&self) -> &VelocityGrid {
        &self.vel
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn block_len(&self) -> usize {
        self.vel.cells()
    }
    pub fn block(&self, ix: usize) -> &[f64] {
        let nb = self.vel.cells();
        &self.data[ix * nb..(ix + 1) * nb]
    }
    pub fn same_grids(&self, other: &Self) -> bool {
        self.space == other.space && self.vel == other.vel
    }
    /// Phase-cell volume `h_x² h_v²`.
    pub fn cell_volume(&self) -> f64 {
        self.space.cell_area() * self.vel.cell_area()
    }
    pub fn min_value(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &a| m.min(a))
    }
    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&a| a >= 0.0)
    }
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }
    pub fn mass(&self) -> f64 {
        integrate_phase(self, |_, _| 1.0)
    }
    pub fn scale(&mut self, k: f64) {
        for a in &mut self.data {
            *a *= k;
        }
    }
    /// `‖self − other‖_{L¹}` over phase space.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        debug_assert!(self.same_grids(other));
        let nb = self.vel.cells();
        let (a, b) = (&self.data, &other.data);
        par::sum_range(self.space.cells(), |ix| {
            let lo = ix * nb;
            let mut s = 0.0;
            for k in lo..lo + nb {
                s += (a[k] - b[k]).abs();
            }
            s
        }) * self.cell_volume()
    }
}

/// Midpoint quadrature `h_x² h_v² Σ w(x, ξ) f(x, ξ)`.
///
/// The sum runs over each velocity block first, then over spatial cells in
/// index order, so the result does not depend on the thread count.
pub fn integrate_phase(f: &PhaseDensity, weight: impl Fn([f64; 2], [f64; 2]) -> f64 + Sync) -> f64 {
    let nb = f.vel.cells();
    let (space, vel, data) = (&f.space, &f.vel, &f.data);
    par::sum_range(space.cells(), |ix| {
        let x = space.point(ix);
        let blk = &data[ix * nb..(ix + 1) * nb];
        let mut s = 0.0;
        for (iv, &v) in blk.iter().enumerate() {
            s += weight(x, vel.point(iv)) * v;
        }
        s
    }) * f.cell_volume()
}

/// The `(1 + |ξ|²)` weight of the `L¹₂` norm.
pub fn weight_l1_2(_x: [f64; 2], xi: [f64; 2]) -> f64 {
    1.0 + xi[0] * xi[0] + xi[1] * xi[1]
}

/// Per-cell velocity moments `(ρ, m₁, m₂)` of one block.
#[inline]
pub fn block_moments(blk: &[f64], nodes: &[f64], dv2: f64) -> [f64; 3] {
    let n = nodes.len();
    let (mut r, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for j1 in 0..n {
        let row = &blk[j1 * n..(j1 + 1) * n];
        let mut rr = 0.0;
        let mut rm = 0.0;
        for (j2, &v) in row.iter().enumerate() {
            rr += v;
            rm += nodes[j2] * v;
        }
        r += rr;
        m1 += nodes[j1] * rr;
        m2 += rm;
    }
    [r * dv2, m1 * dv2, m2 * dv2]
}

/// `ρ_f = ∫ f dξ`.
pub fn moment_density(f: &PhaseDensity) -> ScalarField {
    let nodes = f.vel.nodes();
    let dv2 = f.vel.cell_area();
    let data = par::map_range(f.space.cells(), |ix| block_moments(f.block(ix), &nodes, dv2)[0]);
    ScalarField { grid: f.space, data }
}

/// `m_f = ∫ ξ f dξ`.
pub fn moment_momentum(f: &PhaseDensity) -> VectorField {
    let nodes = f.vel.nodes();
    let dv2 = f.vel.cell_area();
    let m = par::map_range(f.space.cells(), |ix| block_moments(f.block(ix), &nodes, dv2));
    VectorField {
        grid: f.space,
        c: [m.iter().map(|a| a[1]).collect(), m.iter().map(|a| a[2]).collect()],
    }
}

/// Bulk velocity with its vacuum report.
#[derive(Clone, Debug)]
pub struct BulkVelocity {
    pub u: VectorField,
    /// Cells where `ρ_f < floor`.
    pub vacuum: Vec<usize>,
}

/// `u_f = m_f / max(ρ_f, floor)`.
pub fn bulk_velocity(f: &PhaseDensity, floor: f64) -> Result<BulkVelocity> {
    if !(floor > 0.0) {
        return Err(Error::Grid("density floor must be positive".into()));
    }
    let nodes = f.vel.nodes();
    let dv2 = f.vel.cell_area();
    let m = par::map_range(f.space.cells(), |ix| block_moments(f.block(ix), &nodes, dv2));
    let vacuum = m.iter().enumerate().filter(|(_, a)| a[0] < floor).map(|(i, _)| i).collect();
    let u = VectorField {
        grid: f.space,
        c: [
            m.iter().map(|a| a[1] / a[0].max(floor)).collect(),
            m.iter().map(|a| a[2] / a[0].max(floor)).collect(),
        ],
    };
    Ok(BulkVelocity { u, vacuum })
}
