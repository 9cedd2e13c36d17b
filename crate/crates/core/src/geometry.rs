//! Spatial domains, boundary normals and the specular reflection law.
//!
//! A domain is the sublevel set `{ x : zeta(x) < 0 }` of a smooth strongly
//! convex function with nonvanishing gradient near the boundary. The unit
//! ball carries exact closed forms; other builtins go through the generic
//! level-set queries.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::scalar::{cst, Real};

/// Tolerance on `zeta` for accepting a point as "on the boundary".
pub const BOUNDARY_TOL: f64 = 1e-10;
/// Relative tolerance on `v.n` below which a boundary hit counts as grazing.
pub const GRAZING_TOL: f64 = 1e-12;
/// Absolute `zeta` tolerance for the level-set exit root.
pub const EXIT_ROOT_TOL: f64 = 1e-12;

/// Phase-space point (position, velocity).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint<T, const D: usize> {
    pub x: Vector<T, D>,
    pub v: Vector<T, D>,
}

impl<T: Real, const D: usize> PhasePoint<T, D> {
    pub fn new(x: Vector<T, D>, v: Vector<T, D>) -> Self {
        PhasePoint { x, v }
    }
}

/// Side of the phase-space boundary a velocity points to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundarySide {
    /// `v.n > 0`: the trajectory leaves the domain.
    Outgoing,
    /// `v.n < 0`: the trajectory enters the domain.
    Incoming,
    /// `|v.n|` below the grazing tolerance.
    Grazing,
}

/// Classification of a boundary phase point, with the signed normal speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryClass<T> {
    pub side: BoundarySide,
    pub normal_speed: T,
}

/// Builtin level-set shapes.
///
/// `Ellipse` covers every axis-aligned ellipsoid `sum_i x_i^2/a_i^2 = 1`,
/// including balls of any radius; it exercises the generic level-set code
/// path (bracketed exit roots, gradient normals) rather than the unit-ball
/// closed forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape<T, const D: usize> {
    UnitBall,
    Ellipse { semi_axes: [T; D] },
}

/// An immutable convex spatial domain. All queries are pure; a `Domain`
/// can be shared freely across threads.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain<T, const D: usize> {
    shape: Shape<T, D>,
    /// Strong-convexity constant of the Hessian of `zeta`.
    convexity: T,
    /// Radius of a ball centered at the origin containing the closure.
    bounding_radius: T,
}

impl<T: Real, const D: usize> Domain<T, D> {
    pub fn unit_ball() -> Self {
        Domain {
            shape: Shape::UnitBall,
            convexity: cst(2.0),
            bounding_radius: T::one(),
        }
    }

    /// Axis-aligned ellipsoid with the given semi-axes, as a level set.
    pub fn ellipse(semi_axes: [T; D]) -> Result<Self> {
        let mut max_axis = T::zero();
        for &a in &semi_axes {
            if !(a > T::zero()) {
                return Err(Error::InvalidArgument(
                    "ellipse semi-axes must be positive".into(),
                ));
            }
            max_axis = max_axis.max(a);
        }
        Ok(Domain {
            shape: Shape::Ellipse { semi_axes },
            convexity: cst::<T>(2.0) / (max_axis * max_axis),
            bounding_radius: max_axis,
        })
    }

    /// The unit ball expressed as a generic level set, used to cross-check
    /// the closed-form queries against the root-finding path.
    pub fn unit_ball_as_level_set() -> Self {
        Self::ellipse([T::one(); D]).expect("unit semi-axes are valid")
    }

    pub fn shape(&self) -> &Shape<T, D> {
        &self.shape
    }

    pub fn convexity_constant(&self) -> T {
        self.convexity
    }

    pub fn bounding_radius(&self) -> T {
        self.bounding_radius
    }

    /// Level-set value: negative inside, zero on the boundary.
    pub fn zeta(&self, x: &Vector<T, D>) -> T {
        match &self.shape {
            Shape::UnitBall => x.norm_sq() - T::one(),
            Shape::Ellipse { semi_axes } => {
                let mut acc = -T::one();
                for i in 0..D {
                    let xi = x[i] / semi_axes[i];
                    acc += xi * xi;
                }
                acc
            }
        }
    }

    pub fn grad_zeta(&self, x: &Vector<T, D>) -> Vector<T, D> {
        match &self.shape {
            Shape::UnitBall => *x * cst(2.0),
            Shape::Ellipse { semi_axes } => {
                Vector::from_fn(|i| cst::<T>(2.0) * x[i] / (semi_axes[i] * semi_axes[i]))
            }
        }
    }

    pub fn hessian_zeta(&self, _x: &Vector<T, D>) -> Matrix<T, D> {
        let mut h = Matrix::zero();
        match &self.shape {
            Shape::UnitBall => {
                for i in 0..D {
                    h[(i, i)] = cst(2.0);
                }
            }
            Shape::Ellipse { semi_axes } => {
                for i in 0..D {
                    h[(i, i)] = cst::<T>(2.0) / (semi_axes[i] * semi_axes[i]);
                }
            }
        }
        h
    }

    pub fn contains(&self, x: &Vector<T, D>) -> bool {
        self.zeta(x) < T::zero()
    }

    pub fn on_boundary(&self, x: &Vector<T, D>) -> bool {
        self.zeta(x).abs() <= cst(BOUNDARY_TOL)
    }

    /// Distance from an interior point to the boundary. Exact for the unit
    /// ball; a first-order `-zeta/|grad zeta|` estimate otherwise.
    pub fn boundary_distance(&self, x: &Vector<T, D>) -> T {
        match &self.shape {
            Shape::UnitBall => T::one() - x.norm(),
            _ => {
                let g = self.grad_zeta(x).norm();
                if g > T::zero() {
                    -self.zeta(x) / g
                } else {
                    self.bounding_radius
                }
            }
        }
    }

    /// Unit outward normal `grad zeta / |grad zeta|` at a boundary point.
    pub fn normal_at(&self, x: &Vector<T, D>) -> Result<Vector<T, D>> {
        let z = self.zeta(x);
        if z.abs() > cst(BOUNDARY_TOL) {
            return Err(Error::NotOnBoundary {
                zeta: z.to_f64().unwrap_or(f64::NAN),
                tol: BOUNDARY_TOL,
            });
        }
        let g = self.grad_zeta(x);
        let n = g.norm();
        if !(n > T::zero()) {
            return Err(Error::Geometry("vanishing gradient on boundary".into()));
        }
        Ok(g / n)
    }

    /// Specular reflection `v - 2 (v.n) n` at a boundary point.
    ///
    /// Flips the normal velocity component and preserves the speed.
    pub fn reflect(&self, x: &Vector<T, D>, v: &Vector<T, D>) -> Result<Vector<T, D>> {
        let n = self.normal_at(x)?;
        Ok(reflect_across(v, &n))
    }

    /// Classify a boundary phase point by the sign of `v.n`.
    pub fn classify(&self, x: &Vector<T, D>, v: &Vector<T, D>) -> Result<BoundaryClass<T>> {
        let n = self.normal_at(x)?;
        let vn = v.dot(&n);
        let tol = cst::<T>(GRAZING_TOL) * v.norm();
        let side = if vn.abs() <= tol {
            BoundarySide::Grazing
        } else if vn > T::zero() {
            BoundarySide::Outgoing
        } else {
            BoundarySide::Incoming
        };
        Ok(BoundaryClass {
            side,
            normal_speed: vn,
        })
    }

    /// First exit of the ray `x + s w`, `s > 0`. The start must be interior,
    /// or on the boundary with `w` pointing strictly inward (the situation
    /// right after a specular reflection). Returns the exit parameter and
    /// the exit point.
    ///
    /// The unit ball uses the positive quadratic root in closed form; level
    /// sets bracket the root (convexity gives a unique sign change) and
    /// bisect until `|zeta| <= 1e-12`.
    pub fn ray_exit(&self, x: &Vector<T, D>, w: &Vector<T, D>) -> Result<(T, Vector<T, D>)> {
        let wn = w.norm();
        if !(wn > T::zero()) {
            return Err(Error::InvalidArgument("ray direction must be nonzero".into()));
        }
        if self.zeta(x) > cst(BOUNDARY_TOL) {
            return Err(Error::InvalidArgument(
                "ray_exit requires a start inside the closure".into(),
            ));
        }
        match &self.shape {
            Shape::UnitBall => {
                let s = unit_ball_exit(x, w);
                Ok((s, *x + *w * s))
            }
            _ => self.level_set_exit(x, w),
        }
    }

    fn level_set_exit(&self, x: &Vector<T, D>, w: &Vector<T, D>) -> Result<(T, Vector<T, D>)> {
        // The domain sits inside the bounding ball, so the ray has left the
        // domain by the time it leaves that ball: zeta >= 0 there.
        let wn = w.norm();
        let xw = x.dot(w) / wn;
        let rad = self.bounding_radius;
        let disc = xw * xw + (rad * rad - x.norm_sq());
        let mut hi = (-xw + disc.max(T::zero()).sqrt()) / wn;
        // Nudge outward until a definite sign in case of roundoff on the rim.
        let mut guard = 0;
        while self.zeta(&(*x + *w * hi)) < T::zero() {
            hi = hi * cst(1.5) + cst(1e-12);
            guard += 1;
            if guard > 200 {
                return Err(Error::Geometry("failed to bracket exit root".into()));
            }
        }
        // Anchor the bisection strictly inside. A boundary start moving
        // inward re-enters the interior within a few ulps.
        let mut lo = T::zero();
        if self.zeta(x) >= -cst::<T>(EXIT_ROOT_TOL) {
            let mut step = cst::<T>(1e-15) * self.bounding_radius / wn;
            let mut ok = false;
            for _ in 0..60 {
                if self.zeta(&(*x + *w * step)) < T::zero() {
                    lo = step;
                    ok = true;
                    break;
                }
                step *= cst(4.0);
                if step >= hi {
                    break;
                }
            }
            if !ok {
                return Err(Error::Geometry(
                    "boundary start does not move inward".into(),
                ));
            }
        }
        let tol = cst::<T>(EXIT_ROOT_TOL);
        for _ in 0..200 {
            let mid = (lo + hi) * cst(0.5);
            let z = self.zeta(&(*x + *w * mid));
            if z.abs() <= tol {
                return Ok((mid, *x + *w * mid));
            }
            if z < T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::epsilon() * hi.max(T::one()) {
                break;
            }
        }
        let s = (lo + hi) * cst(0.5);
        let exit = *x + *w * s;
        if self.zeta(&exit).abs() <= cst(1e-9) {
            Ok((s, exit))
        } else {
            Err(Error::Geometry("exit root did not converge".into()))
        }
    }

    /// Pull a near-boundary point back onto the boundary, killing the drift
    /// that accumulates over long reflection chains.
    pub fn project_to_boundary(&self, x: &Vector<T, D>) -> Vector<T, D> {
        match &self.shape {
            Shape::UnitBall => *x / x.norm(),
            _ => {
                // One Newton step on zeta along its gradient.
                let g = self.grad_zeta(x);
                let gn2 = g.norm_sq();
                if gn2 > T::zero() {
                    *x - g * (self.zeta(x) / gn2)
                } else {
                    *x
                }
            }
        }
    }

    /// Sampled validation of the level-set assumptions: nonvanishing
    /// gradient and a strongly convex Hessian on a shell of width 10% of
    /// the bounding radius around the boundary.
    pub fn validate_convexity<R: rand::Rng>(&self, rng: &mut R, samples: usize) -> Result<()> {
        let shell = self.bounding_radius * cst(0.1);
        let mut found = 0usize;
        let mut attempts = 0usize;
        while found < samples {
            attempts += 1;
            if attempts > samples * 1000 {
                return Err(Error::Geometry(
                    "could not sample the boundary shell".into(),
                ));
            }
            let x = Vector::from_fn(|_| {
                (T::standard_uniform(rng) * cst(2.0) - T::one()) * self.bounding_radius
            });
            let g = self.grad_zeta(&x).norm();
            let inside_dist = if self.zeta(&x) < T::zero() && g > T::zero() {
                -self.zeta(&x) / g
            } else {
                continue;
            };
            if inside_dist > shell {
                continue;
            }
            found += 1;
            if !(g > T::zero()) {
                return Err(Error::Geometry("gradient vanishes near boundary".into()));
            }
            let xi: Vector<T, D> = Vector::from_fn(|_| T::standard_uniform(rng) * cst(2.0) - T::one());
            let q = xi.dot(&self.hessian_zeta(&x).mul_vec(&xi));
            if q + cst::<T>(1e-12) < self.convexity * xi.norm_sq() {
                return Err(Error::Geometry(format!(
                    "Hessian quadratic form below the convexity constant: {:?}",
                    q.to_f64()
                )));
            }
        }
        Ok(())
    }
}

/// Reflection of `v` across the tangent plane with unit normal `n`.
#[inline]
pub fn reflect_across<T: Real, const D: usize>(
    v: &Vector<T, D>,
    n: &Vector<T, D>,
) -> Vector<T, D> {
    *v - *n * (cst::<T>(2.0) * v.dot(n))
}

/// Positive root of `|x + s w| = 1` for `x` strictly inside the unit ball.
#[inline]
pub fn unit_ball_exit<T: Real, const D: usize>(x: &Vector<T, D>, w: &Vector<T, D>) -> T {
    let a = w.norm_sq();
    let b = x.dot(w);
    let c = x.norm_sq() - T::one();
    // c <= 0 inside, so the discriminant is nonnegative and the positive
    // root is (-b + sqrt(b^2 - a c)) / a, written to avoid cancellation.
    let disc = (b * b - a * c).max(T::zero()).sqrt();
    if b <= T::zero() {
        (disc - b) / a
    } else {
        -c / (b + disc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::SmallRng;
    use rand::{Rng, SeedableRng};

    type D2 = Domain<f64, 2>;

    fn v2(x: f64, y: f64) -> Vector<f64, 2> {
        Vector([x, y])
    }

    #[test]
    fn normal_on_unit_circle() {
        let d = D2::unit_ball();
        assert_eq!(d.normal_at(&v2(1.0, 0.0)).unwrap(), v2(1.0, 0.0));
        assert_eq!(d.normal_at(&v2(0.0, -1.0)).unwrap(), v2(0.0, -1.0));
        let n = d.normal_at(&v2(0.6, 0.8)).unwrap();
        assert!((n.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn normal_on_radius_two_ball() {
        // zeta(x) = |x|^2/4 - 1
        let d = D2::ellipse([2.0, 2.0]).unwrap();
        let n = d.normal_at(&v2(2.0, 0.0)).unwrap();
        assert!((n - v2(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn normal_rejects_interior_point() {
        let d = D2::unit_ball();
        assert!(matches!(
            d.normal_at(&v2(0.5, 0.0)),
            Err(Error::NotOnBoundary { .. })
        ));
    }

    #[test]
    fn reflect_examples() {
        let d = D2::unit_ball();
        let x = v2(1.0, 0.0);
        assert_eq!(d.reflect(&x, &v2(1.0, 0.0)).unwrap(), v2(-1.0, 0.0));
        assert_eq!(d.reflect(&x, &v2(0.0, 1.0)).unwrap(), v2(0.0, 1.0));
        assert_eq!(d.reflect(&x, &v2(1.0, 1.0)).unwrap(), v2(-1.0, 1.0));
    }

    #[test]
    fn reflect_is_an_involution_preserving_norm() {
        let d = D2::unit_ball();
        let mut rng = SmallRng::seed_from_u64(7);
        for _ in 0..1000 {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let x = v2(theta.cos(), theta.sin());
            let v = v2(rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0);
            let r = d.reflect(&x, &v).unwrap();
            assert!((r.norm() - v.norm()).abs() <= 1e-14 * v.norm().max(1.0));
            let rr = d.reflect(&x, &r).unwrap();
            assert!((rr - v).norm() <= 1e-13 * v.norm().max(1.0));
            let n = d.normal_at(&x).unwrap();
            assert!((r.dot(&n) + v.dot(&n)).abs() <= 1e-13 * v.norm().max(1.0));
        }
    }

    #[test]
    fn classify_examples() {
        let d = D2::unit_ball();
        let x = v2(1.0, 0.0);
        let c = d.classify(&x, &v2(1.0, 0.0)).unwrap();
        assert_eq!(c.side, BoundarySide::Outgoing);
        assert!((c.normal_speed - 1.0).abs() < 1e-14);
        let c = d.classify(&x, &v2(-1.0, 0.0)).unwrap();
        assert_eq!(c.side, BoundarySide::Incoming);
        assert!((c.normal_speed + 1.0).abs() < 1e-14);
        let c = d.classify(&x, &v2(0.0, 1.0)).unwrap();
        assert_eq!(c.side, BoundarySide::Grazing);
        assert!(c.normal_speed.abs() < 1e-14);
    }

    #[test]
    fn ray_exit_examples() {
        let d = D2::unit_ball();
        let (s, x) = d.ray_exit(&v2(0.0, 0.0), &v2(1.0, 0.0)).unwrap();
        assert!((s - 1.0).abs() < 1e-14);
        assert!((x - v2(1.0, 0.0)).norm() < 1e-14);

        let (s, x) = d.ray_exit(&v2(0.5, 0.0), &v2(1.0, 0.0)).unwrap();
        assert!((s - 0.5).abs() < 1e-14);
        assert!((x - v2(1.0, 0.0)).norm() < 1e-14);

        let (s, x) = d.ray_exit(&v2(0.5, 0.0), &v2(0.0, 1.0)).unwrap();
        assert!((s - 0.75f64.sqrt()).abs() < 1e-14);
        assert!((x - v2(0.5, 0.75f64.sqrt())).norm() < 1e-14);
    }

    #[test]
    fn ray_exit_rejects_zero_direction() {
        let d = D2::unit_ball();
        assert!(matches!(
            d.ray_exit(&v2(0.0, 0.0), &v2(0.0, 0.0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn ray_exit_then_classify_is_outgoing() {
        let d = D2::unit_ball();
        let mut rng = SmallRng::seed_from_u64(3);
        for _ in 0..200 {
            let x = loop {
                let p = v2(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
                if p.norm() < 0.95 {
                    break p;
                }
            };
            let w = v2(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            if w.norm() < 1e-3 {
                continue;
            }
            let (_, exit) = d.ray_exit(&x, &w).unwrap();
            let exit = d.project_to_boundary(&exit);
            let out = d.classify(&exit, &w).unwrap();
            assert_eq!(out.side, BoundarySide::Outgoing);
            let refl = d.reflect(&exit, &w).unwrap();
            let inc = d.classify(&exit, &refl).unwrap();
            assert_eq!(inc.side, BoundarySide::Incoming);
        }
    }

    #[test]
    fn closed_form_exit_agrees_with_level_set_root() {
        let ball = D2::unit_ball();
        let level = D2::unit_ball_as_level_set();
        let mut rng = SmallRng::seed_from_u64(11);
        for _ in 0..10_000 {
            let x = loop {
                let p = v2(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
                if p.norm() < 0.99 {
                    break p;
                }
            };
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let w = v2(theta.cos(), theta.sin());
            let (s_ball, _) = ball.ray_exit(&x, &w).unwrap();
            let (s_level, _) = level.ray_exit(&x, &w).unwrap();
            assert!(
                (s_ball - s_level).abs() < 1e-10,
                "closed form {s_ball} vs root {s_level}"
            );
        }
    }

    #[test]
    fn convexity_validation_passes_for_builtins() {
        let mut rng = SmallRng::seed_from_u64(5);
        D2::unit_ball().validate_convexity(&mut rng, 200).unwrap();
        D2::ellipse([1.5, 0.7])
            .unwrap()
            .validate_convexity(&mut rng, 200)
            .unwrap();
        Domain::<f64, 3>::unit_ball()
            .validate_convexity(&mut rng, 200)
            .unwrap();
    }

    #[test]
    fn works_at_f32() {
        let d = Domain::<f32, 2>::unit_ball();
        let (s, _) = d.ray_exit(&Vector([0.5f32, 0.0]), &Vector([1.0, 0.0])).unwrap();
        assert!((s - 0.5).abs() < 1e-6);
    }
}
