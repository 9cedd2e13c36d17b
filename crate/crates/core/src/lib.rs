//! Kinetic Fokker-Planck particle dynamics in convex reflecting domains.
//!
//! The crate is organized around the small parameter `eps` (the Knudsen
//! number) of the diffusive scaling:
//!
//! * [`geometry`] — convex level-set domains, boundary normals and the
//!   specular reflection law;
//! * [`billiards`] — constant-speed specular cycles and the end-point map
//!   of the reparametrized damped characteristics;
//! * [`endpoint`] — derivatives of the end-point map and the Neumann
//!   test-function machinery built on it;
//! * [`kinetic`] — the stochastic particle solver (exact Ornstein-Uhlenbeck
//!   velocity updates, reflected ballistic transport) with macroscopic
//!   diagnostics;
//! * [`heat`] — a conservative finite-volume solver for the limiting
//!   Neumann heat equation on the disk/ball;
//! * [`reference`](mod@reference) — slow brute-force integrators used
//!   purely for cross-validation.
//!
//! All numerical kernels are generic over the scalar type through
//! [`scalar::Real`]; the type aliases at the crate root fix `f64`, which is
//! what the particle engine and the verification harness use.

// Guards are written `!(x > 0)` rather than `x <= 0` so that NaN inputs
// fail them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod billiards;
pub mod endpoint;
pub mod error;
pub mod geometry;
pub mod heat;
pub mod initial;
pub mod kinetic;
pub mod linalg;
pub mod mesh;
pub mod reference;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};

/// Concrete `f64` vector in dimension 2.
pub type Vec2 = linalg::Vector<f64, 2>;
/// Concrete `f64` vector in dimension 3.
pub type Vec3 = linalg::Vector<f64, 3>;
/// Concrete `f64` matrix in dimension 2.
pub type Mat2 = linalg::Matrix<f64, 2>;
/// Concrete `f64` matrix in dimension 3.
pub type Mat3 = linalg::Matrix<f64, 3>;
/// Concrete `f64` domain in dimension 2.
pub type Domain2 = geometry::Domain<f64, 2>;
/// Concrete `f64` domain in dimension 3.
pub type Domain3 = geometry::Domain<f64, 3>;
