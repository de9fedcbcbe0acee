//! Solvers and diagnostics for the ε-scaled Vlasov–Fokker–Planck /
//! Navier–Stokes system on the two-dimensional torus and its
//! advection–diffusion / Navier–Stokes limit.

pub mod bl;
pub mod blockstats;
pub mod container;
pub mod coupled;
pub mod entropy;
pub mod error;
pub mod etd;
pub mod fft;
pub mod fit;
pub mod fluid;
pub mod grid;
pub mod hilbert;
pub mod kinetic;
pub mod limit;
pub mod par;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{PhaseDensity, ScalarField, SpatialGrid, VectorField, VelocityGrid};
