//! Bessel functions of the first kind, orders 0 and 1.
//!
//! Power series evaluation; arguments stay below ~60 in this crate (radial
//! eigenmodes on the unit disk), where the series with f64 keeps at least
//! 8 significant digits and far more for the |z| <= 16 values we use.

use crate::scalar::{cst, Real};

/// `J_0(z)` by its power series.
pub fn bessel_j0<T: Real>(z: T) -> T {
    let z_half_sq = z * z * cst(0.25);
    let mut term = T::one();
    let mut sum = T::one();
    let tol = cst::<T>(1e-17);
    for m in 1..200u32 {
        let mt = cst::<T>(m as f64);
        term = term * (-z_half_sq) / (mt * mt);
        sum += term;
        if term.abs() < tol * sum.abs().max(T::one()) {
            break;
        }
    }
    sum
}

/// `J_1(z)` by its power series.
pub fn bessel_j1<T: Real>(z: T) -> T {
    let z_half = z * cst(0.5);
    let z_half_sq = z_half * z_half;
    let mut term = z_half;
    let mut sum = z_half;
    let tol = cst::<T>(1e-17);
    for m in 1..200u32 {
        let mt = cst::<T>(m as f64);
        let mt1 = cst::<T>((m + 1) as f64);
        term = term * (-z_half_sq) / (mt * mt1);
        sum += term;
        if term.abs() < tol * sum.abs().max(cst(1e-30)) {
            break;
        }
    }
    sum
}

/// First positive root of `J_1`, by bisection on the sign change in [3, 5].
///
/// `J_0(j_{1,1} r)` is the first nonconstant radial Neumann eigenmode of
/// the Laplacian on the unit disk, with eigenvalue `j_{1,1}^2`.
pub fn first_j1_root<T: Real>() -> T {
    let mut lo = cst::<T>(3.0);
    let mut hi = cst::<T>(5.0);
    debug_assert!(bessel_j1(lo) > T::zero() && bessel_j1(hi) < T::zero());
    for _ in 0..200 {
        let mid = (lo + hi) * cst(0.5);
        if mid == lo || mid == hi {
            break;
        }
        if bessel_j1(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * cst(0.5)
}

/// Eigenvalue `j_{1,1}^2` of the first radial Neumann mode on the unit disk.
pub fn neumann_radial_eigenvalue<T: Real>() -> T {
    let root = first_j1_root::<T>();
    root * root
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j0_reference_values() {
        assert!((bessel_j0(0.0f64) - 1.0).abs() < 1e-15);
        // First root of J0.
        assert!(bessel_j0(2.404825557695773f64).abs() < 1e-12);
        // Abramowitz & Stegun 9.4: J0(1) = 0.7651976865...
        assert!((bessel_j0(1.0f64) - 0.765_197_686_557_966_6).abs() < 1e-14);
    }

    #[test]
    fn j1_reference_values() {
        assert!(bessel_j1(0.0f64).abs() < 1e-15);
        // J1(1) = 0.4400505857...
        assert!((bessel_j1(1.0f64) - 0.440_050_585_744_933_5).abs() < 1e-14);
        // First nonzero root of J1.
        assert!(bessel_j1(3.831705970207512f64).abs() < 1e-12);
    }

    #[test]
    fn j1_root_by_bisection() {
        let root = first_j1_root::<f64>();
        assert!((root - 3.831_705_970_207_512).abs() < 1e-12);
        let lambda = neumann_radial_eigenvalue::<f64>();
        assert!((lambda - 14.681_970_642_124_2).abs() < 1e-9);
    }

    #[test]
    fn derivative_identity_j0_prime_is_minus_j1() {
        // Central differences on the series.
        for &z in &[0.3f64, 1.0, 2.5, 3.9] {
            let h = 1e-6;
            let fd = (bessel_j0(z + h) - bessel_j0(z - h)) / (2.0 * h);
            assert!((fd + bessel_j1(z)).abs() < 1e-9);
        }
    }
}
