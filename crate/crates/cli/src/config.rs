//! Run configuration: JSON file plus flag overrides, resolved into a fully
//! explicit struct that is embedded verbatim in every report.

use serde::{Deserialize, Serialize};
use std::path::Path;

use kfp_core::geometry::Domain;
use kfp_core::initial::{InitialSpec, SpatialInit};
use kfp_core::kinetic::BoundaryMode;
use kfp_core::linalg::Vector;

use crate::{HarnessError, Result};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainConfig {
    UnitBall { dim: usize },
    Ellipse { semi_axes: Vec<f64> },
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig::UnitBall { dim: 2 }
    }
}

impl DomainConfig {
    pub fn dim(&self) -> usize {
        match self {
            DomainConfig::UnitBall { dim } => *dim,
            DomainConfig::Ellipse { semi_axes } => semi_axes.len(),
        }
    }

    pub fn build<const D: usize>(&self) -> Result<Domain<f64, D>> {
        match self {
            DomainConfig::UnitBall { dim } => {
                if *dim != D {
                    return Err(HarnessError::Config(format!(
                        "domain dimension {dim} does not match the requested {D}"
                    )));
                }
                Ok(Domain::unit_ball())
            }
            DomainConfig::Ellipse { semi_axes } => {
                if semi_axes.len() != D {
                    return Err(HarnessError::Config(
                        "ellipse semi-axis count does not match the dimension".into(),
                    ));
                }
                let mut axes = [0.0; D];
                axes.copy_from_slice(semi_axes);
                Ok(Domain::ellipse(axes)?)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpatialConfig {
    Uniform,
    Bump { center: Vec<f64>, width: f64 },
    EigenmodeMix { amplitude: f64 },
    GaussianBlob { center: Vec<f64>, sigma: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub spatial: SpatialConfig,
    #[serde(default = "one")]
    pub velocity_variance: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            spatial: SpatialConfig::Bump {
                center: vec![0.4, 0.0],
                width: 0.3,
            },
            velocity_variance: 1.0,
        }
    }
}

impl InitialConfig {
    pub fn build<const D: usize>(&self) -> Result<InitialSpec<f64, D>> {
        let vector = |values: &Vec<f64>| -> Result<Vector<f64, D>> {
            if values.len() != D {
                return Err(HarnessError::Config(
                    "initial-datum center does not match the dimension".into(),
                ));
            }
            let mut out = [0.0; D];
            out.copy_from_slice(values);
            Ok(Vector(out))
        };
        let spatial = match &self.spatial {
            SpatialConfig::Uniform => SpatialInit::Uniform,
            SpatialConfig::Bump { center, width } => SpatialInit::Bump {
                center: vector(center)?,
                width: *width,
            },
            SpatialConfig::EigenmodeMix { amplitude } => SpatialInit::EigenmodeMix {
                amplitude: *amplitude,
            },
            SpatialConfig::GaussianBlob { center, sigma } => SpatialInit::GaussianBlob {
                center: vector(center)?,
                sigma: *sigma,
            },
        };
        let spec = InitialSpec::new(spatial).with_velocity_variance(self.velocity_variance);
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub n_r: usize,
    pub n_theta: usize,
    /// Mesh window radius; 1 for the unit ball, larger for free space.
    #[serde(default = "one")]
    pub radius: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            n_r: 16,
            n_theta: 24,
            radius: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ModeConfig {
    Reflecting,
    FreeSpace,
}

impl From<ModeConfig> for BoundaryMode {
    fn from(m: ModeConfig) -> Self {
        match m {
            ModeConfig::Reflecting => BoundaryMode::Reflecting,
            ModeConfig::FreeSpace => BoundaryMode::FreeSpace,
        }
    }
}

/// Partial configuration as read from a JSON file; every field optional so
/// flags can fill or override.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub domain: Option<DomainConfig>,
    pub eps: Option<Vec<f64>>,
    pub n_particles: Option<usize>,
    /// Time step; defaults to `eps^2 / 8` per run when absent.
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub seed: Option<u64>,
    pub n_seeds: Option<usize>,
    pub mesh: Option<MeshConfig>,
    pub initial: Option<InitialConfig>,
    pub boundary_mode: Option<ModeConfig>,
    pub snapshots: Option<usize>,
    pub output_dir: Option<String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Fully explicit configuration embedded in every report: no hidden
/// defaults.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResolvedConfig {
    pub domain: DomainConfig,
    pub eps: Vec<f64>,
    pub n_particles: usize,
    /// `None` means `eps^2 / 8`, resolved per run.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub seed: u64,
    pub n_seeds: usize,
    pub mesh: MeshConfig,
    pub initial: InitialConfig,
    pub boundary_mode: ModeConfig,
    pub snapshots: usize,
    pub output_dir: String,
}

impl Default for ResolvedConfig {
    fn default() -> Self {
        ResolvedConfig {
            domain: DomainConfig::default(),
            eps: vec![0.4, 0.2, 0.1],
            n_particles: 200_000,
            dt: None,
            t_end: 0.25,
            seed: 1,
            n_seeds: 3,
            mesh: MeshConfig::default(),
            initial: InitialConfig::default(),
            boundary_mode: ModeConfig::Reflecting,
            snapshots: 11,
            output_dir: "out".into(),
        }
    }
}

impl ResolvedConfig {
    /// Overlay a config file on the defaults (flags are applied on top by
    /// the command line layer).
    pub fn from_file(file: &ConfigFile) -> Self {
        let mut cfg = ResolvedConfig::default();
        if let Some(v) = &file.domain {
            cfg.domain = v.clone();
        }
        if let Some(v) = &file.eps {
            cfg.eps = v.clone();
        }
        if let Some(v) = file.n_particles {
            cfg.n_particles = v;
        }
        if file.dt.is_some() {
            cfg.dt = file.dt;
        }
        if let Some(v) = file.t_end {
            cfg.t_end = v;
        }
        if let Some(v) = file.seed {
            cfg.seed = v;
        }
        if let Some(v) = file.n_seeds {
            cfg.n_seeds = v;
        }
        if let Some(v) = file.mesh {
            cfg.mesh = v;
        }
        if let Some(v) = &file.initial {
            cfg.initial = v.clone();
        }
        if let Some(v) = file.boundary_mode {
            cfg.boundary_mode = v;
        }
        if let Some(v) = file.snapshots {
            cfg.snapshots = v;
        }
        if let Some(v) = &file.output_dir {
            cfg.output_dir = v.clone();
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() || self.eps.iter().any(|&e| !(e > 0.0)) {
            return Err(HarnessError::Config("eps list must be positive".into()));
        }
        if self.n_particles == 0 {
            return Err(HarnessError::Config("n_particles must be positive".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(HarnessError::Config("t_end must be positive".into()));
        }
        if self.snapshots < 2 {
            return Err(HarnessError::Config(
                "need at least two snapshots (start and end)".into(),
            ));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(HarnessError::Config("dt must be positive".into()));
            }
        }
        Ok(())
    }

    /// Seeds used by the study: `seed, seed + 1, ...`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds).map(|k| self.seed + k as u64).collect()
    }

    /// Time step for a given `eps`: the configured one, or `eps^2 / 8`.
    pub fn dt_for(&self, eps: f64) -> f64 {
        self.dt.unwrap_or(eps * eps / 8.0)
    }

    /// FNV-1a hash of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.as_bytes() {
            hash ^= u64::from(*b);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{hash:016x}")
    }
}
