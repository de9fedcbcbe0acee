//! Fourier-side differential operators on the periodic spatial grid.
//!
//! First derivatives drop the Nyquist bin (its derivative is not
//! representable as a real field). The Laplacian uses the same effective
//! wavenumbers so that `div ∘ grad = lap` holds to rounding for any field.

use crate::fft::{self, Fft2, C64};
use crate::grid::{ScalarField, SpatialGrid, VectorField};
use std::sync::Arc;

/// Precomputed wavenumbers and FFT plan for one spatial grid.
#[derive(Clone)]
pub struct Spectral {
    grid: SpatialGrid,
    plan: Arc<Fft2>,
    /// Wavenumber per bin with the Nyquist bin set to zero.
    keff: Vec<f64>,
    /// Full wavenumber per bin (Nyquist kept, signed `-n/2`).
    kfull: Vec<f64>,
    /// 2/3-rule mask per bin (1 keeps, 0 drops).
    keep: Vec<bool>,
}

impl Spectral {
    pub fn new(grid: SpatialGrid) -> Self {
        let n = grid.n();
        let kfull: Vec<f64> = (0..n).map(|i| grid.wavenumber(i)).collect();
        let keff = (0..n)
            .map(|i| if fft::is_nyquist(i, n) { 0.0 } else { kfull[i] })
            .collect();
        let cut = (n / 3) as i64;
        let keep = (0..n).map(|i| fft::freq_index(i, n).abs() <= cut).collect();
        Self { grid, plan: fft::plan(n), keff, kfull, keep }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }
    pub fn n(&self) -> usize {
        self.grid.n()
    }
    pub fn plan(&self) -> &Fft2 {
        &self.plan
    }
    /// Effective (Nyquist-free) wavenumber of bin `i`.
    pub fn k(&self, i: usize) -> f64 {
        self.keff[i]
    }
    /// `|k|²` of bin `(i1, i2)` using full wavenumbers.
    pub fn k2_full(&self, i1: usize, i2: usize) -> f64 {
        self.kfull[i1] * self.kfull[i1] + self.kfull[i2] * self.kfull[i2]
    }
    /// `|k|²` with effective wavenumbers.
    pub fn k2(&self, i1: usize, i2: usize) -> f64 {
        self.keff[i1] * self.keff[i1] + self.keff[i2] * self.keff[i2]
    }
    pub fn is_nyquist_bin(&self, i1: usize, i2: usize) -> bool {
        let n = self.n();
        fft::is_nyquist(i1, n) || fft::is_nyquist(i2, n)
    }
    pub fn keeps(&self, i1: usize, i2: usize) -> bool {
        self.keep[i1] && self.keep[i2]
    }

    pub fn forward(&self, data: &[f64]) -> Vec<C64> {
        let mut a: Vec<C64> = data.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.plan.forward(&mut a);
        a
    }

    /// Inverse transform, normalized, real part.
    pub fn inverse(&self, mut a: Vec<C64>) -> Vec<f64> {
        self.plan.inverse_normalized(&mut a);
        a.into_iter().map(|z| z.re).collect()
    }

    pub fn to_field(&self, a: Vec<C64>) -> ScalarField {
        ScalarField::from_vec(self.grid, self.inverse(a)).expect("grid size")
    }

    /// Applies the 2/3 truncation in place.
    pub fn dealias(&self, a: &mut [C64]) {
        let n = self.n();
        for i1 in 0..n {
            for i2 in 0..n {
                if !self.keeps(i1, i2) {
                    a[i1 * n + i2] = C64::new(0.0, 0.0);
                }
            }
        }
    }

    /// Zeroes every bin on a Nyquist row or column.
    pub fn drop_nyquist(&self, a: &mut [C64]) {
        let n = self.n();
        for i1 in 0..n {
            for i2 in 0..n {
                if self.is_nyquist_bin(i1, i2) {
                    a[i1 * n + i2] = C64::new(0.0, 0.0);
                }
            }
        }
    }

    /// `i k_d · a` for direction `d`.
    pub fn deriv_hat(&self, a: &[C64], d: usize) -> Vec<C64> {
        let n = self.n();
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for i1 in 0..n {
            for i2 in 0..n {
                let k = if d == 0 { self.keff[i1] } else { self.keff[i2] };
                out[i1 * n + i2] = a[i1 * n + i2] * C64::new(0.0, k);
            }
        }
        out
    }

    pub fn grad(&self, g: &ScalarField) -> VectorField {
        let a = self.forward(g.data());
        let d0 = self.inverse(self.deriv_hat(&a, 0));
        let d1 = self.inverse(self.deriv_hat(&a, 1));
        VectorField::from_vecs(self.grid, d0, d1).expect("grid size")
    }

    pub fn div(&self, w: &VectorField) -> ScalarField {
        let a0 = self.forward(w.comp(0));
        let a1 = self.forward(w.comp(1));
        let mut s = self.deriv_hat(&a0, 0);
        for (x, y) in s.iter_mut().zip(self.deriv_hat(&a1, 1)) {
            *x += y;
        }
        self.to_field(s)
    }

    pub fn lap(&self, g: &ScalarField) -> ScalarField {
        let n = self.n();
        let mut a = self.forward(g.data());
        for i1 in 0..n {
            for i2 in 0..n {
                a[i1 * n + i2] *= -self.k2(i1, i2);
            }
        }
        self.to_field(a)
    }

    /// Leray projection of spectral components in place; the mean passes.
    pub fn project_hat(&self, a0: &mut [C64], a1: &mut [C64]) {
        let n = self.n();
        for i1 in 0..n {
            for i2 in 0..n {
                let idx = i1 * n + i2;
                let (k1, k2) = (self.keff[i1], self.keff[i2]);
                let kk = k1 * k1 + k2 * k2;
                if kk == 0.0 {
                    continue;
                }
                let kd = (a0[idx] * k1 + a1[idx] * k2) / kk;
                a0[idx] -= kd * k1;
                a1[idx] -= kd * k2;
            }
        }
    }

    pub fn leray(&self, w: &VectorField) -> VectorField {
        let mut a0 = self.forward(w.comp(0));
        let mut a1 = self.forward(w.comp(1));
        self.project_hat(&mut a0, &mut a1);
        VectorField::from_vecs(self.grid, self.inverse(a0), self.inverse(a1)).expect("grid size")
    }

    /// Velocity gradient tensor `[∂₀v₀, ∂₁v₀, ∂₀v₁, ∂₁v₁]`.
    pub fn grad_tensor(&self, v: &VectorField) -> [ScalarField; 4] {
        let a0 = self.forward(v.comp(0));
        let a1 = self.forward(v.comp(1));
        [
            self.to_field(self.deriv_hat(&a0, 0)),
            self.to_field(self.deriv_hat(&a0, 1)),
            self.to_field(self.deriv_hat(&a1, 0)),
            self.to_field(self.deriv_hat(&a1, 1)),
        ]
    }

    /// `∫|∇v|²` summed over components.
    pub fn dirichlet_energy(&self, v: &VectorField) -> f64 {
        self.grad_tensor(v).iter().map(|g| g.map(|a| a * a).integral()).sum()
    }
}

pub fn spectral_grad(g: &ScalarField) -> VectorField {
    Spectral::new(*g.grid()).grad(g)
}

pub fn spectral_div(w: &VectorField) -> ScalarField {
    Spectral::new(*w.grid()).div(w)
}

pub fn spectral_lap(g: &ScalarField) -> ScalarField {
    Spectral::new(*g.grid()).lap(g)
}
