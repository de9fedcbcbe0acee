//! Second-order exponential time differencing (Cox–Matthews ETD2RK) for
//! `∂t û = −|k|² û + N(u)` mode by mode.
//!
//! ```text
//! a       = e^{z} û + dt φ₁(z) N(u)
//! û_{n+1} = a + dt φ₂(z) (N(a) − N(u))
//! φ₁(z) = (e^z − 1)/z,   φ₂(z) = (e^z − 1 − z)/z²,   z = −|k|² dt
//! ```
//!
//! Exact for `N` constant in time and for `N ≡ 0`.

use crate::fft::C64;
use crate::spectral::Spectral;

pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0
    } else {
        z.exp_m1() / z
    }
}

pub fn phi2(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// Per-mode coefficients for one `dt`.
#[derive(Clone, Debug)]
pub struct Etd2 {
    pub dt: f64,
    pub e: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

impl Etd2 {
    pub fn new(spec: &Spectral, dt: f64) -> Self {
        let n = spec.n();
        let mut e = vec![0.0; n * n];
        let mut p1 = vec![0.0; n * n];
        let mut p2 = vec![0.0; n * n];
        for i1 in 0..n {
            for i2 in 0..n {
                let z = -spec.k2(i1, i2) * dt;
                let idx = i1 * n + i2;
                e[idx] = z.exp();
                p1[idx] = dt * phi1(z);
                p2[idx] = dt * phi2(z);
            }
        }
        Self { dt, e, p1, p2 }
    }

    /// Predictor `e û + dt φ₁ N̂`.
    pub fn predict(&self, u: &[C64], n: &[C64]) -> Vec<C64> {
        u.iter()
            .zip(n)
            .enumerate()
            .map(|(i, (&a, &b))| a * self.e[i] + b * self.p1[i])
            .collect()
    }

    /// Corrector `a + dt φ₂ (N̂(a) − N̂(u))` in place on `a`.
    pub fn correct(&self, a: &mut [C64], na: &[C64], nu: &[C64]) {
        for i in 0..a.len() {
            a[i] += (na[i] - nu[i]) * self.p2[i];
        }
    }
}
