//! Test functions with the Neumann boundary property.
//!
//! The admissible class consists of smooth functions whose normal
//! derivative vanishes on the unit sphere; the time-dependent class
//! additionally vanishes at the final time. Members expose value,
//! gradient, Hessian and time derivative, which is exactly what the
//! composite Laplacian of the end-point map consumes.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::scalar::{cst, Real};
use crate::special::{bessel_j0, bessel_j1, first_j1_root};

#[derive(Clone, Debug, PartialEq)]
pub enum TestFunction<T> {
    /// `psi = 1`.
    Constant,
    /// `psi(x) = (1 - |x|^2)^2`; the factor `(1 - |x|^2)` kills the normal
    /// derivative on the unit sphere.
    RadialPoly,
    /// `psi(t, x) = e^{-alpha^2 t} J_0(alpha |x|)` with `alpha` the first
    /// positive root of `J_1`: the decaying radial Neumann eigenmode of the
    /// disk (eigenvalue `alpha^2`).
    DecayingEigenmode { alpha: T },
    /// `psi(x) = |x|^2`. Not a Neumann function (`grad psi . n = 2` on the
    /// unit sphere); kept as a deliberate contract violator.
    SquaredNorm,
    /// `theta(t) * inner` with `theta(t) = (1 - t/t_end)^2`, which vanishes
    /// at the final time. The quadratic window has a linear derivative, so
    /// trapezoidal time quadrature integrates it exactly.
    TimeWindowed {
        inner: Box<TestFunction<T>>,
        t_end: T,
    },
}

impl<T: Real> TestFunction<T> {
    pub fn windowed(self, t_end: T) -> Self {
        TestFunction::TimeWindowed {
            inner: Box::new(self),
            t_end,
        }
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::Constant => "constant".into(),
            TestFunction::RadialPoly => "quartic-radial".into(),
            TestFunction::DecayingEigenmode { .. } => "radial-eigenmode".into(),
            TestFunction::SquaredNorm => "squared-norm".into(),
            TestFunction::TimeWindowed { inner, .. } => format!("windowed-{}", inner.name()),
        }
    }

    /// Structural membership in the Neumann class.
    pub fn is_neumann(&self) -> bool {
        match self {
            TestFunction::Constant
            | TestFunction::RadialPoly
            | TestFunction::DecayingEigenmode { .. } => true,
            TestFunction::SquaredNorm => false,
            TestFunction::TimeWindowed { inner, .. } => inner.is_neumann(),
        }
    }

    /// True when gradient and Hessian vanish identically, letting callers
    /// skip end-point derivative evaluations altogether.
    pub fn is_spatially_constant(&self) -> bool {
        match self {
            TestFunction::Constant => true,
            TestFunction::TimeWindowed { inner, .. } => inner.is_spatially_constant(),
            _ => false,
        }
    }

    pub fn value<const D: usize>(&self, t: T, x: &Vector<T, D>) -> T {
        match self {
            TestFunction::Constant => T::one(),
            TestFunction::RadialPoly => {
                let w = T::one() - x.norm_sq();
                w * w
            }
            TestFunction::DecayingEigenmode { alpha } => {
                let lambda = *alpha * *alpha;
                (-lambda * t).exp() * bessel_j0(*alpha * x.norm())
            }
            TestFunction::SquaredNorm => x.norm_sq(),
            TestFunction::TimeWindowed { inner, t_end } => {
                window(t, *t_end) * inner.value(t, x)
            }
        }
    }

    pub fn gradient<const D: usize>(&self, t: T, x: &Vector<T, D>) -> Vector<T, D> {
        match self {
            TestFunction::Constant => Vector::zero(),
            TestFunction::RadialPoly => {
                let w = T::one() - x.norm_sq();
                *x * (-cst::<T>(4.0) * w)
            }
            TestFunction::DecayingEigenmode { alpha } => {
                let lambda = *alpha * *alpha;
                let z = *alpha * x.norm();
                *x * (-(-lambda * t).exp() * lambda * j1_over_z(z))
            }
            TestFunction::SquaredNorm => *x * cst(2.0),
            TestFunction::TimeWindowed { inner, t_end } => {
                inner.gradient(t, x) * window(t, *t_end)
            }
        }
    }

    pub fn hessian<const D: usize>(&self, t: T, x: &Vector<T, D>) -> Matrix<T, D> {
        match self {
            TestFunction::Constant => Matrix::zero(),
            TestFunction::RadialPoly => {
                let w = T::one() - x.norm_sq();
                let mut h = x.outer(x) * cst(8.0);
                for i in 0..D {
                    h[(i, i)] -= cst::<T>(4.0) * w;
                }
                h
            }
            TestFunction::DecayingEigenmode { alpha } => {
                let lambda = *alpha * *alpha;
                let decay = (-lambda * t).exp();
                let r = x.norm();
                let z = *alpha * r;
                if r < cst(1e-8) {
                    Matrix::identity() * (-decay * lambda * cst::<T>(0.5))
                } else {
                    let j1z = j1_over_z(z);
                    // radial g'' and tangential g'/r coefficients
                    let radial = -lambda * (bessel_j0(z) - j1z);
                    let tangential = -lambda * j1z;
                    let xhat = *x / r;
                    let mut h = xhat.outer(&xhat) * (radial - tangential);
                    for i in 0..D {
                        h[(i, i)] += tangential;
                    }
                    h * decay
                }
            }
            TestFunction::SquaredNorm => Matrix::identity() * cst(2.0),
            TestFunction::TimeWindowed { inner, t_end } => {
                inner.hessian(t, x) * window(t, *t_end)
            }
        }
    }

    pub fn time_derivative<const D: usize>(&self, t: T, x: &Vector<T, D>) -> T {
        match self {
            TestFunction::Constant | TestFunction::RadialPoly | TestFunction::SquaredNorm => {
                T::zero()
            }
            TestFunction::DecayingEigenmode { alpha } => {
                let lambda = *alpha * *alpha;
                -lambda * self.value(t, x)
            }
            TestFunction::TimeWindowed { inner, t_end } => {
                window_derivative(t, *t_end) * inner.value(t, x)
                    + window(t, *t_end) * inner.time_derivative(t, x)
            }
        }
    }

    /// Check `grad psi . n = 0` at sampled boundary points of the unit
    /// sphere; the builtin family passes at 1e-12.
    pub fn verify_neumann<const D: usize, R: rand::Rng>(
        &self,
        rng: &mut R,
        samples: usize,
        tol: T,
    ) -> bool {
        for _ in 0..samples {
            let n: Vector<T, D> = loop {
                let p = Vector::from_fn(|_| T::standard_normal(rng));
                if p.norm() > cst(1e-3) {
                    break p.normalized();
                }
            };
            let t = T::standard_uniform(rng);
            if self.gradient(t, &n).dot(&n).abs() > tol {
                return false;
            }
        }
        true
    }
}

fn window<T: Real>(t: T, t_end: T) -> T {
    let w = T::one() - t / t_end;
    w * w
}

fn window_derivative<T: Real>(t: T, t_end: T) -> T {
    -cst::<T>(2.0) / t_end * (T::one() - t / t_end)
}

/// `J_1(z) / z`, series-protected near zero.
fn j1_over_z<T: Real>(z: T) -> T {
    if z.abs() < cst(1e-4) {
        let z2 = z * z;
        cst::<T>(0.5) - z2 * cst(1.0 / 16.0) + z2 * z2 * cst(1.0 / 384.0)
    } else {
        bessel_j1(z) / z
    }
}

/// Builtin members of the Neumann family.
///
/// Index 0 is the constant, 1 the quartic radial bump, 2 the decaying
/// radial eigenmode matching the heat-solver reference mode.
pub fn neumann_family<T: Real>(index: usize) -> Result<TestFunction<T>> {
    match index {
        0 => Ok(TestFunction::Constant),
        1 => Ok(TestFunction::RadialPoly),
        2 => Ok(TestFunction::DecayingEigenmode {
            alpha: first_j1_root(),
        }),
        _ => Err(Error::InvalidArgument(format!(
            "no builtin test function with index {index}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::SmallRng;
    use rand::SeedableRng;

    fn v2(x: f64, y: f64) -> Vector<f64, 2> {
        Vector([x, y])
    }

    #[test]
    fn family_members_satisfy_neumann_condition() {
        let mut rng = SmallRng::seed_from_u64(1);
        for index in 0..3 {
            let psi = neumann_family::<f64>(index).unwrap();
            assert!(psi.is_neumann());
            assert!(
                psi.verify_neumann::<2, _>(&mut rng, 1000, 1e-12),
                "index {index}"
            );
            assert!(psi.verify_neumann::<3, _>(&mut rng, 200, 1e-12));
        }
        assert!(neumann_family::<f64>(9).is_err());
    }

    #[test]
    fn squared_norm_violates_neumann_condition() {
        let psi = TestFunction::<f64>::SquaredNorm;
        assert!(!psi.is_neumann());
        let mut rng = SmallRng::seed_from_u64(2);
        assert!(!psi.verify_neumann::<2, _>(&mut rng, 10, 1e-12));
    }

    #[test]
    fn quartic_derivatives_match_finite_differences() {
        let psi = TestFunction::<f64>::RadialPoly;
        let x = v2(0.31, -0.42);
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (psi.value(0.0, &xp) - psi.value(0.0, &xm)) / (2.0 * h);
            assert!((psi.gradient(0.0, &x)[i] - fd).abs() < 1e-8);
        }
        // Laplacian: -4 d (1 - r^2) + 8 r^2 in d = 2.
        let r2 = x.norm_sq();
        let expect = -8.0 * (1.0 - r2) + 8.0 * r2;
        assert!((psi.hessian(0.0, &x).trace() - expect).abs() < 1e-12);
    }

    #[test]
    fn eigenmode_solves_the_heat_equation() {
        // d_t psi = Laplacian psi for the decaying mode, in d = 2.
        let psi = neumann_family::<f64>(2).unwrap();
        for &(x, y, t) in &[(0.2, 0.1, 0.0), (0.5, -0.3, 0.13), (0.0, 0.0, 0.05), (0.9, 0.1, 0.2)] {
            let p = v2(x, y);
            let dt = psi.time_derivative(t, &p);
            let lap = psi.hessian(t, &p).trace();
            assert!(
                (dt - lap).abs() < 1e-10,
                "at ({x}, {y}, {t}): {dt} vs {lap}"
            );
        }
    }

    #[test]
    fn eigenmode_hessian_matches_finite_differences() {
        let psi = neumann_family::<f64>(2).unwrap();
        let x = v2(0.37, 0.22);
        let h = 1e-5;
        let t = 0.07;
        for i in 0..2 {
            for j in 0..2 {
                let mut xpp = x;
                xpp[i] += h;
                xpp[j] += h;
                let mut xpm = x;
                xpm[i] += h;
                xpm[j] -= h;
                let mut xmp = x;
                xmp[i] -= h;
                xmp[j] += h;
                let mut xmm = x;
                xmm[i] -= h;
                xmm[j] -= h;
                let fd = (psi.value(t, &xpp) - psi.value(t, &xpm) - psi.value(t, &xmp)
                    + psi.value(t, &xmm))
                    / (4.0 * h * h);
                assert!(
                    (psi.hessian(t, &x)[(i, j)] - fd).abs() < 1e-5,
                    "entry ({i}, {j})"
                );
            }
        }
    }

    #[test]
    fn window_vanishes_at_final_time_with_exact_trapezoids() {
        let t_end = 0.25f64;
        let psi = TestFunction::<f64>::Constant.windowed(t_end);
        assert_eq!(psi.value(t_end, &v2(0.1, 0.1)), 0.0);
        // Trapezoid of the linear derivative telescopes to -theta(0).
        let n = 17;
        let dt = t_end / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            acc += w * dt * psi.time_derivative(k as f64 * dt, &v2(0.0, 0.0));
        }
        assert!((acc + 1.0).abs() < 1e-14);
    }
}
