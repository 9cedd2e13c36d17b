//! Builtin initial data: a spatial profile times a velocity Gaussian.
//!
//! The same profile drives the particle sampler and the heat-solver
//! projection, so both sides of a convergence study start from the same
//! macroscopic density (exactly, not within sampling noise of
//! independently-coded formulas).

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::scalar::{cst, Real};
use crate::special::{bessel_j0, first_j1_root};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpatialInit<T, const D: usize> {
    /// Uniform on the unit ball.
    Uniform,
    /// Quartic bump `(1 - |x - c|^2 / w^2)^2` on `|x - c| < w`, compactly
    /// supported inside the ball when `|c| + w <= 1`.
    Bump { center: Vector<T, D>, width: T },
    /// `(1 + a J0(j11 r)) / |B|` on the unit disk: the uniform state plus
    /// the first radial Neumann eigenmode (dimension 2 only).
    EigenmodeMix { amplitude: T },
    /// Isotropic Gaussian, for free-space runs.
    GaussianBlob { center: Vector<T, D>, sigma: T },
}

/// Product initial datum `rho0(x) * M_sigma(v)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialSpec<T, const D: usize> {
    pub spatial: SpatialInit<T, D>,
    /// Componentwise velocity variance; 1 is the equilibrium Maxwellian.
    pub velocity_variance: T,
}

impl<T: Real, const D: usize> InitialSpec<T, D> {
    pub fn new(spatial: SpatialInit<T, D>) -> Self {
        InitialSpec {
            spatial,
            velocity_variance: T::one(),
        }
    }

    pub fn with_velocity_variance(mut self, variance: T) -> Self {
        self.velocity_variance = variance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.velocity_variance > T::zero()) {
            return Err(Error::InvalidArgument(
                "velocity variance must be positive".into(),
            ));
        }
        self.spatial.validate()
    }
}

fn ball_volume<T: Real>(dim: usize) -> T {
    match dim {
        2 => T::PI(),
        3 => cst::<T>(4.0 / 3.0) * T::PI(),
        _ => unreachable!("dimension is 2 or 3"),
    }
}

impl<T: Real, const D: usize> SpatialInit<T, D> {
    pub fn validate(&self) -> Result<()> {
        match self {
            SpatialInit::Uniform => Ok(()),
            SpatialInit::Bump { center, width } => {
                if !(*width > T::zero()) {
                    return Err(Error::InvalidArgument("bump width must be positive".into()));
                }
                if center.norm() + *width > T::one() + cst(1e-12) {
                    return Err(Error::InvalidArgument(
                        "bump support must fit inside the unit ball".into(),
                    ));
                }
                Ok(())
            }
            SpatialInit::EigenmodeMix { amplitude } => {
                if D != 2 {
                    return Err(Error::InvalidArgument(
                        "the eigenmode profile is a disk (d = 2) datum".into(),
                    ));
                }
                // J0 dips to about -0.4028 on [0, j11]; keep the density
                // strictly positive.
                let min_j0 = bessel_j0(first_j1_root::<T>());
                if T::one() + *amplitude * min_j0 <= T::zero()
                    || T::one() - amplitude.abs() * min_j0.abs() <= T::zero()
                {
                    return Err(Error::InvalidArgument(
                        "eigenmode amplitude makes the density signed".into(),
                    ));
                }
                Ok(())
            }
            SpatialInit::GaussianBlob { sigma, .. } => {
                if !(*sigma > T::zero()) {
                    return Err(Error::InvalidArgument(
                        "blob sigma must be positive".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// True when the profile only depends on `|x|`.
    pub fn is_radial(&self) -> bool {
        match self {
            SpatialInit::Uniform | SpatialInit::EigenmodeMix { .. } => true,
            SpatialInit::Bump { center, .. } | SpatialInit::GaussianBlob { center, .. } => {
                center.norm() == T::zero()
            }
        }
    }

    /// Normalized density at `x`.
    pub fn density(&self, x: &Vector<T, D>) -> T {
        match self {
            SpatialInit::Uniform => ball_volume::<T>(D).recip(),
            SpatialInit::Bump { center, width } => {
                let s2 = (*x - *center).norm_sq() / (*width * *width);
                if s2 >= T::one() {
                    return T::zero();
                }
                let shape = (T::one() - s2) * (T::one() - s2);
                shape / bump_mass::<T>(D, *width)
            }
            SpatialInit::EigenmodeMix { amplitude } => {
                let alpha = first_j1_root::<T>();
                (T::one() + *amplitude * bessel_j0(alpha * x.norm())) / T::PI()
            }
            SpatialInit::GaussianBlob { center, sigma } => {
                let s2 = *sigma * *sigma;
                let base = (cst::<T>(2.0) * T::PI() * s2).sqrt().recip();
                let mut scale = T::one();
                for _ in 0..D {
                    scale *= base;
                }
                scale * (-(*x - *center).norm_sq() / (cst::<T>(2.0) * s2)).exp()
            }
        }
    }

    /// Draw a position from the profile.
    pub fn sample_position<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector<T, D> {
        match self {
            SpatialInit::Uniform => sample_unit_ball(rng),
            SpatialInit::Bump { center, width } => loop {
                let y: Vector<T, D> = sample_unit_ball(rng);
                let accept = {
                    let s2 = y.norm_sq();
                    (T::one() - s2) * (T::one() - s2)
                };
                if T::standard_uniform(rng) < accept {
                    return *center + y * *width;
                }
            },
            SpatialInit::EigenmodeMix { amplitude } => {
                let alpha = first_j1_root::<T>();
                let envelope = T::one() + amplitude.abs();
                loop {
                    let y: Vector<T, D> = sample_unit_ball(rng);
                    let value = T::one() + *amplitude * bessel_j0(alpha * y.norm());
                    if T::standard_uniform(rng) * envelope < value {
                        return y;
                    }
                }
            }
            SpatialInit::GaussianBlob { center, sigma } => {
                *center + Vector::from_fn(|_| T::standard_normal(rng) * *sigma)
            }
        }
    }
}

/// Total mass of the unnormalized quartic bump of width `w`.
fn bump_mass<T: Real, >(dim: usize, width: T) -> T {
    match dim {
        // int_{|y| < w} (1 - |y|^2/w^2)^2 dy
        2 => T::PI() * width * width / cst(3.0),
        _ => cst::<T>(32.0 / 105.0) * T::PI() * width * width * width,
    }
}

/// Uniform sample from the unit ball.
pub fn sample_unit_ball<T: Real, const D: usize, R: Rng + ?Sized>(rng: &mut R) -> Vector<T, D> {
    let dir: Vector<T, D> = loop {
        let g = Vector::from_fn(|_| T::standard_normal(rng));
        if g.norm() > cst(1e-6) {
            break g.normalized();
        }
    };
    let u = T::standard_uniform(rng);
    let exponent = T::one() / cst(D as f64);
    dir * u.powf(exponent)
}

/// Maxwellian velocity sample with the given componentwise variance.
pub fn sample_velocity<T: Real, const D: usize, R: Rng + ?Sized>(
    rng: &mut R,
    variance: T,
) -> Vector<T, D> {
    let sd = variance.sqrt();
    Vector::from_fn(|_| T::standard_normal(rng) * sd)
}
