//! Run configuration: one JSON file with a versioned schema. Unknown keys
//! are rejected.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use vfpns::coupled::{TAU_MAX, TAU_PER_EPS};
use vfpns::kinetic::TransportMethod;
use vfpns::{SpatialGrid, VelocityGrid};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("schema version {found} is not supported (expected {SCHEMA_VERSION})")]
    Version { found: u32 },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_x: usize,
    pub n_v: usize,
    pub side: f64,
    pub v_max: f64,
}

impl GridConfig {
    pub fn space(&self) -> SpatialGrid {
        SpatialGrid::new(self.n_x, self.side).expect("validated")
    }

    pub fn vel(&self) -> VelocityGrid {
        VelocityGrid::new(self.n_v, self.v_max).expect("validated")
    }
}

/// Kinetic step `τ = min(2ε³, cfl ε h_x / v_max, tau_per_eps ε, tau_max)` and coupled step
/// `2τ`; `steps` overrides the count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtPolicy {
    pub cfl: f64,
    pub tau_max: f64,
    #[serde(default = "default_tau_per_eps")]
    pub tau_per_eps: f64,
    #[serde(default)]
    pub steps: Option<usize>,
}

impl Default for DtPolicy {
    fn default() -> Self {
        Self { cfl: 1.0, tau_max: TAU_MAX, tau_per_eps: TAU_PER_EPS, steps: None }
    }
}

fn default_tau_per_eps() -> f64 {
    TAU_PER_EPS
}

impl DtPolicy {
    pub fn steps(&self, space: &SpatialGrid, vel: &VelocityGrid, eps: f64, t_end: f64) -> usize {
        if let Some(n) = self.steps {
            return n;
        }
        let cfl = self.cfl * eps * space.h() / vel.v_max();
        let tau = (2.0 * eps.powi(3)).min(cfl).min(self.tau_per_eps * eps).min(self.tau_max);
        (t_end / (2.0 * tau)).ceil().max(1.0) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    /// `f₀ = M_{ρ₀,0}`
    WellPrepared,
    /// `f₀ = M_{ρ₀,w}` with an `O(1)` velocity perturbation `w`.
    ScaledWellPrepared,
}

/// `ρ₀ ∝ 1 + rho_amp cos x₁`, `v₀` a Taylor–Green field of amplitude
/// `v_amp`, and for the scaled recipe `w` a shear of amplitude `w_amp`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub recipe: Recipe,
    pub rho_amp: f64,
    pub v_amp: f64,
    #[serde(default)]
    pub w_amp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub grid: GridConfig,
    pub eps_list: Vec<f64>,
    pub t_end: f64,
    #[serde(default)]
    pub dt_policy: DtPolicy,
    pub initial: InitialData,
    /// Approximate number of records per run.
    pub records: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
    #[serde(default)]
    pub transport: Option<TransportMethod>,
    /// Coarsening `(r_x, r_v)` of the phase-space BL distance.
    #[serde(default)]
    pub phase_bl: Option<(usize, usize)>,
    /// Write a checkpoint every this many records.
    #[serde(default)]
    pub checkpoint_every: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            grid: GridConfig { n_x: 32, n_v: 32, side: 2.0 * std::f64::consts::PI, v_max: 6.0 },
            eps_list: vec![0.4, 0.2, 0.1, 0.05],
            t_end: 0.5,
            dt_policy: DtPolicy::default(),
            initial: InitialData { recipe: Recipe::WellPrepared, rho_amp: 0.5, v_amp: 0.5, w_amp: 0.0 },
            records: 20,
            out_dir: PathBuf::from("out"),
            seed: 1,
            transport: None,
            phase_bl: None,
            checkpoint_every: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::from_json(&text).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse { path: path.into(), source },
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|source| ConfigError::Parse { path: PathBuf::from("<string>"), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Checks everything except the sweep-specific length of `eps_list`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Version { found: self.schema_version });
        }
        SpatialGrid::new(self.grid.n_x, self.grid.side).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        VelocityGrid::new(self.grid.n_v, self.grid.v_max).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.eps_list.is_empty() {
            return bad("eps_list is empty".into());
        }
        if self.eps_list.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return bad("every eps must lie in (0, 1]".into());
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("eps_list must be strictly decreasing".into());
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be positive", self.t_end));
        }
        let p = &self.dt_policy;
        if !(p.cfl > 0.0 && p.cfl <= 1.0) || !(p.tau_max > 0.0) || !(p.tau_per_eps > 0.0) || p.steps == Some(0) {
            return bad("dt_policy needs 0 < cfl <= 1, tau_max > 0, tau_per_eps > 0 and steps > 0".into());
        }
        let d = &self.initial;
        if !(d.rho_amp >= 0.0 && d.rho_amp < 1.0) {
            return bad("rho_amp must lie in [0, 1) to keep the density positive".into());
        }
        if !d.v_amp.is_finite() || !(d.w_amp.abs() <= 1.0) {
            return bad("v_amp must be finite and |w_amp| <= 1".into());
        }
        if self.records == 0 {
            return bad("records must be positive".into());
        }
        if let Some((rx, rv)) = self.phase_bl {
            if rx == 0 || rv == 0 || self.grid.n_x % rx != 0 || self.grid.n_v % rv != 0 {
                return bad("phase_bl coarsening must divide the grids".into());
            }
        }
        if self.checkpoint_every == Some(0) {
            return bad("checkpoint_every must be positive".into());
        }
        Ok(())
    }

    /// Extra requirement of a rate sweep.
    pub fn validate_sweep(&self) -> Result<(), ConfigError> {
        self.validate()?;
        if self.eps_list.len() < 3 {
            return Err(ConfigError::Invalid(format!(
                "a rate fit needs at least 3 eps values, got {}",
                self.eps_list.len()
            )));
        }
        Ok(())
    }

    pub fn transport(&self) -> TransportMethod {
        self.transport.unwrap_or(TransportMethod::SpectralShift)
    }
}
