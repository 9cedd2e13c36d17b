//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A point expected on the boundary is too far from it.
    #[error("point is not on the boundary (|zeta| = {zeta:.3e} exceeds tolerance {tol:.1e})")]
    NotOnBoundary { zeta: f64, tol: f64 },

    /// Geometric root finding failed.
    #[error("geometry failure: {0}")]
    Geometry(String),

    /// Phase point lies on (or too close to) the grazing set, where the
    /// end-point map is undefined.
    #[error("grazing phase point: |v.n| = {normal_speed:.3e}")]
    Grazing { normal_speed: f64 },

    /// A specular cycle exceeded the reflection cap.
    #[error("reflection count exceeded cap of {cap}")]
    ReflectionCap { cap: usize },

    /// A derivative evaluation straddles a reflection-count discontinuity.
    #[error("evaluation within {gap:.3e} of the reflection breakpoint tau = {tau:.6}")]
    Discontinuity { tau: f64, gap: f64 },

    /// A contract required by the calling convention is violated
    /// (e.g. a test function without the Neumann property).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The particle integrator lost a particle outside the domain.
    #[error("integration failure: {0}")]
    Integration(String),
}
