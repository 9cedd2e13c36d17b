//! Serializable results, each embedding the fully resolved configuration.

use serde::{Deserialize, Serialize};

use crate::config::ResolvedConfig;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Errors decrease monotonically in eps beyond the combined error bars.
    MonotoneDecreasing,
    /// Bars too wide to call (undersampled), but no contradiction.
    Inconclusive,
    /// Some pair increased beyond the combined bars.
    NotMonotone,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub eps: f64,
    pub n_particles: usize,
    pub dt: f64,
    pub t_end: f64,
    /// One L2 error per seed, in seed order.
    pub l2_errors: Vec<f64>,
    pub l2_error_mean: f64,
    /// Standard error of the mean over seeds.
    pub l2_error_stderr: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: ResolvedConfig,
    /// Sorted by eps descending.
    pub entries: Vec<ConvergenceEntry>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub eps: f64,
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
    /// Particles skipped due to (measure-zero) grazing evaluations.
    pub skipped: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub test_function: String,
    /// Sorted by eps descending.
    pub points: Vec<ResidualPoint>,
    /// |R| at the largest eps exceeds |R| at the smallest beyond combined
    /// two-sigma bars.
    pub decreasing_beyond_bars: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakResidualReport {
    pub config: ResolvedConfig,
    pub series: Vec<ResidualSeries>,
    pub n_decreasing: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrabilityVerdict {
    Converging,
    Diverging,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegrabilityEstimate {
    pub samples: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegrabilityReport {
    pub exponent: f64,
    pub schedule: Vec<usize>,
    pub seed: u64,
    /// Running estimates of mean (2/L)^p at the schedule points.
    pub estimates: Vec<IntegrabilityEstimate>,
    pub verdict: IntegrabilityVerdict,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SnapshotDiagnostics {
    pub time: f64,
    pub mass: f64,
    pub velocity_variance: Vec<f64>,
    /// Hermite deviation proxy of order 2.
    pub maxwellian_deviation: f64,
    pub weighted_energy: f64,
    /// (value, stderr) of the outer-ring normal current; reflecting only.
    pub boundary_flux: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: ResolvedConfig,
    pub eps: f64,
    pub dt: f64,
    pub snapshots: Vec<SnapshotDiagnostics>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceReport {
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    /// Breakpoints tau_0 = 0 < tau_1 < ... <= 1.
    pub breakpoints_tau: Vec<f64>,
    pub reflection_points: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    pub reflections: usize,
    pub near_grazing: bool,
    pub path_length: f64,
}

/// Provenance sidecar written next to every result file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub git_revision: Option<String>,
    pub wall_time_secs: f64,
    pub version: String,
}
