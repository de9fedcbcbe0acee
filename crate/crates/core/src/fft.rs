//! Cached square 2D FFT plans built on rustfft.
//!
//! Arrays are `n × n`, row-major. Transforms are unnormalized; callers
//! divide by `n²` after an inverse.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub type C64 = Complex64;

pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn cache() -> &'static Mutex<HashMap<usize, Arc<Fft2>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft2>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Returns the shared plan for size `n`.
pub fn plan(n: usize) -> Arc<Fft2> {
    let mut map = cache().lock().expect("fft cache poisoned");
    map.entry(n)
        .or_insert_with(|| {
            let mut p = FftPlanner::new();
            Arc::new(Fft2 {
                n,
                fwd: p.plan_fft_forward(n),
                inv: p.plan_fft_inverse(n),
            })
        })
        .clone()
}

fn transpose(a: &mut [C64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            a.swap(i * n + j, j * n + i);
        }
    }
}

impl Fft2 {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Scratch length needed by the `*_with` methods.
    pub fn scratch_len(&self) -> usize {
        self.fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len())
    }

    pub fn scratch(&self) -> Vec<C64> {
        vec![C64::new(0.0, 0.0); self.scratch_len()]
    }

    /// 1D forward transforms of every row.
    pub fn rows_forward(&self, a: &mut [C64], scratch: &mut [C64]) {
        self.fwd.process_with_scratch(a, scratch);
    }

    /// 1D inverse transforms of every row.
    pub fn rows_inverse(&self, a: &mut [C64], scratch: &mut [C64]) {
        self.inv.process_with_scratch(a, scratch);
    }

    pub fn forward_with(&self, a: &mut [C64], scratch: &mut [C64]) {
        debug_assert_eq!(a.len(), self.n * self.n);
        self.fwd.process_with_scratch(a, scratch);
        transpose(a, self.n);
        self.fwd.process_with_scratch(a, scratch);
        transpose(a, self.n);
    }

    pub fn inverse_with(&self, a: &mut [C64], scratch: &mut [C64]) {
        debug_assert_eq!(a.len(), self.n * self.n);
        self.inv.process_with_scratch(a, scratch);
        transpose(a, self.n);
        self.inv.process_with_scratch(a, scratch);
        transpose(a, self.n);
    }

    pub fn forward(&self, a: &mut [C64]) {
        let mut s = self.scratch();
        self.forward_with(a, &mut s);
    }

    /// Inverse transform including the `1/n²` normalization.
    pub fn inverse_normalized(&self, a: &mut [C64]) {
        let mut s = self.scratch();
        self.inverse_with(a, &mut s);
        let k = 1.0 / (self.n * self.n) as f64;
        for z in a.iter_mut() {
            *z *= k;
        }
    }
}

/// Signed integer frequency of FFT bin `i` on an `n`-point grid.
/// The Nyquist bin maps to `-n/2`.
#[inline]
pub fn freq_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[inline]
pub fn is_nyquist(i: usize, n: usize) -> bool {
    n % 2 == 0 && i == n / 2
}
