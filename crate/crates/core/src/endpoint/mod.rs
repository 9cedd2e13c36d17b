//! Derivatives of the end-point map and the test-function machinery.
//!
//! The composite Laplacian of a Neumann test function through the
//! end-point map,
//!
//! ```text
//! Lap_v [psi(t, eta(x, .))](u)
//!     = Lap_v eta(x, u) . grad psi(t, eta)
//!     + Tr( J J^T  H psi(t, eta) ),        J = grad_v eta,
//! ```
//!
//! is what the weak-formulation residual of the kinetic model pairs with
//! the particle measure. Analytic derivatives push second-order jets
//! through the closed-form unit-ball flight; the finite-difference mode
//! uses guarded central differences and refuses to straddle a
//! reflection-count breakpoint.
//!
//! The delta-supported normal part of `Lap_v eta` at exact breakpoints is
//! never materialized: pairing with a Neumann gradient cancels it, and the
//! regular part is kept by projecting onto the boundary tangent, which is
//! also the two-sided limit a central difference sees.

mod jet;
mod testfn;

pub use jet::{rotation_power_jet, Jet};
pub use testfn::{neumann_family, TestFunction};

use crate::billiards::{analytic_flight, endpoint, specular_cycle, NEAR_GRAZING_TOL};
use crate::error::{Error, Result};
use crate::geometry::{BoundarySide, Domain, Shape};
use crate::linalg::{Matrix, Vector};
use crate::scalar::{cst, Real};

/// Relative path-length tolerance for "the end point sits exactly on a
/// reflection breakpoint".
const BREAKPOINT_TOL: f64 = 1e-12;

/// End-point value and its first two velocity derivatives.
#[derive(Clone, Copy, Debug)]
pub struct EndpointDerivatives<T, const D: usize> {
    pub eta: Vector<T, D>,
    /// `jacobian[i][j] = d eta_i / d v_j`.
    pub jacobian: Matrix<T, D>,
    /// Velocity Laplacian of each component of `eta`.
    pub laplacian: Vector<T, D>,
    pub reflections: usize,
    pub near_grazing: bool,
    /// The evaluation landed on a breakpoint and the derivatives are the
    /// symmetric (tangentially projected) two-sided limit.
    pub at_breakpoint: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeMode {
    /// Exact jet propagation through the closed-form unit-ball flight.
    Analytic,
    /// Guarded central differences on the end-point map.
    FiniteDifference,
}

/// Derivatives of the end-point map at `(x, v)`.
///
/// Analytic mode requires the unit ball. Finite differences work on any
/// domain but refuse evaluations with a breakpoint within ten steps.
pub fn endpoint_derivatives<T: Real, const D: usize>(
    domain: &Domain<T, D>,
    x: &Vector<T, D>,
    v: &Vector<T, D>,
    mode: DerivativeMode,
) -> Result<EndpointDerivatives<T, D>> {
    match mode {
        DerivativeMode::Analytic => {
            if !matches!(domain.shape(), Shape::UnitBall) {
                return Err(Error::InvalidArgument(
                    "analytic end-point derivatives are implemented for the unit ball; \
                     use finite differences"
                        .into(),
                ));
            }
            ball_jet_derivatives(x, v)
        }
        DerivativeMode::FiniteDifference => fd_derivatives(domain, x, v),
    }
}

// ---------------------------------------------------------------------
// analytic mode: second-order jets through the closed-form flight
// ---------------------------------------------------------------------

type JetVec<T, const D: usize> = [Jet<T, D>; D];

fn jv_dot<T: Real, const D: usize>(a: &JetVec<T, D>, b: &JetVec<T, D>) -> Jet<T, D> {
    let mut acc = Jet::constant(T::zero());
    for i in 0..D {
        acc = acc + a[i] * b[i];
    }
    acc
}

fn jv_add<T: Real, const D: usize>(a: &JetVec<T, D>, b: &JetVec<T, D>) -> JetVec<T, D> {
    std::array::from_fn(|i| a[i] + b[i])
}

fn jv_sub<T: Real, const D: usize>(a: &JetVec<T, D>, b: &JetVec<T, D>) -> JetVec<T, D> {
    std::array::from_fn(|i| a[i] - b[i])
}

fn jv_scale<T: Real, const D: usize>(a: &JetVec<T, D>, s: Jet<T, D>) -> JetVec<T, D> {
    std::array::from_fn(|i| a[i] * s)
}

fn ball_jet_derivatives<T: Real, const D: usize>(
    x0: &Vector<T, D>,
    v0: &Vector<T, D>,
) -> Result<EndpointDerivatives<T, D>> {
    let ball = Domain::<T, D>::unit_ball();
    let speed0 = v0.norm();
    if !(speed0 > T::zero()) {
        if ball.on_boundary(x0) {
            return Err(Error::Grazing { normal_speed: 0.0 });
        }
        return Ok(EndpointDerivatives {
            eta: *x0,
            jacobian: Matrix::identity(),
            laplacian: Vector::zero(),
            reflections: 0,
            near_grazing: false,
            at_breakpoint: false,
        });
    }

    // Boundary starts with outgoing velocity reflect before the flight;
    // the chain rule enters through the (constant) reflection matrix.
    let mut pre_matrix = Matrix::<T, D>::identity();
    if ball.on_boundary(x0) {
        let class = ball.classify(x0, v0)?;
        match class.side {
            BoundarySide::Grazing => {
                return Err(Error::Grazing {
                    normal_speed: class.normal_speed.to_f64().unwrap_or(0.0),
                })
            }
            BoundarySide::Outgoing => {
                let n = ball.normal_at(x0)?;
                pre_matrix = Matrix::identity() - n.outer(&n) * cst(2.0);
            }
            BoundarySide::Incoming => {}
        }
    }
    let w0 = pre_matrix.mul_vec(v0);
    let w: JetVec<T, D> = std::array::from_fn(|i| {
        Jet::linear(w0[i], std::array::from_fn(|j| pre_matrix[(i, j)]))
    });
    let x: JetVec<T, D> = std::array::from_fn(|i| Jet::constant(x0[i]));

    let speed = jv_dot(&w, &w).sqrt();
    let dir = std::array::from_fn(|i| w[i] / speed);

    // First exit, same branch selection as the value path.
    let a_coef = jv_dot(&dir, &dir);
    let b_coef = jv_dot(&x, &dir);
    let c_coef = Jet::constant(x0.norm_sq() - T::one());
    let disc = (b_coef * b_coef - a_coef * c_coef).sqrt();
    let s1 = if b_coef.v <= T::zero() {
        (disc - b_coef) / a_coef
    } else {
        (-c_coef) / (b_coef + disc)
    };

    if speed.v < s1.v {
        let eta = jv_add(&x, &w);
        return Ok(EndpointDerivatives {
            eta: Vector::from_fn(|i| eta[i].v),
            jacobian: extract_jacobian(&eta),
            laplacian: extract_laplacian(&eta),
            reflections: 0,
            near_grazing: false,
            at_breakpoint: false,
        });
    }

    let p1 = jv_add(&x, &jv_scale(&dir, s1));
    let np = jv_dot(&p1, &p1).sqrt();
    let a_hat: JetVec<T, D> = std::array::from_fn(|i| p1[i] / np);
    let m = jv_dot(&dir, &a_hat);
    if m.v <= T::zero() {
        return Err(Error::Grazing {
            normal_speed: m.v.to_f64().unwrap_or(0.0),
        });
    }
    let near_grazing = m.v < cst(NEAR_GRAZING_TOL);
    let two = cst::<T>(2.0);
    let u1 = jv_sub(&dir, &jv_scale(&a_hat, m.scale(two)));
    let chord = m.scale(two);
    let ell1 = speed - s1;
    let k_val = (ell1.v / chord.v).floor();
    if !(k_val >= T::zero()) || k_val > cst(9e15) {
        return Err(Error::Geometry("chord count overflow".into()));
    }
    let k = k_val.to_f64().unwrap() as usize;
    let r = ell1 - chord.scale(k_val);
    let at_breakpoint = r.v <= cst::<T>(BREAKPOINT_TOL) * speed.v.max(T::one());

    // Frame axis along the travel; degenerates on diameter chords where the
    // tangential component vanishes identically.
    let b_raw = jv_add(&u1, &jv_scale(&a_hat, m));
    let nsq = jv_dot(&b_raw, &b_raw);
    let (b_hat, sin_a): (JetVec<T, D>, Jet<T, D>) = if nsq.v < cst(1e-28) {
        (
            std::array::from_fn(|_| Jet::constant(T::zero())),
            Jet::constant(T::zero()),
        )
    } else {
        let sa = nsq.sqrt();
        (std::array::from_fn(|i| b_raw[i] / sa), sa)
    };

    let cos_d = Jet::constant(T::one()) - (m * m).scale(two);
    let sin_d = (m * sin_a).scale(two);
    let (ck, sk) = rotation_power_jet(cos_d, sin_d, k);

    let wv = jv_add(&p1, &jv_scale(&u1, r));
    let wa = jv_dot(&wv, &a_hat);
    let wb = jv_dot(&wv, &b_hat);
    let wperp = jv_sub(&jv_sub(&wv, &jv_scale(&a_hat, wa)), &jv_scale(&b_hat, wb));
    let rot_a = wa * ck - wb * sk;
    let rot_b = wa * sk + wb * ck;
    let eta: JetVec<T, D> =
        std::array::from_fn(|i| wperp[i] + a_hat[i] * rot_a + b_hat[i] * rot_b);

    let eta_val = Vector::from_fn(|i| eta[i].v);
    let mut jacobian = extract_jacobian(&eta);
    let mut laplacian = extract_laplacian(&eta);
    if at_breakpoint {
        // On the breakpoint the map is kinked; keep the tangential part,
        // which both one-sided limits and central differences share.
        let n = eta_val.normalized();
        let proj = Matrix::identity() - n.outer(&n);
        jacobian = proj.mul_mat(&jacobian);
        laplacian = proj.mul_vec(&laplacian);
    }

    Ok(EndpointDerivatives {
        eta: eta_val,
        jacobian,
        laplacian,
        reflections: k + 1,
        near_grazing,
        at_breakpoint,
    })
}

fn extract_jacobian<T: Real, const D: usize>(eta: &JetVec<T, D>) -> Matrix<T, D> {
    let mut j = Matrix::zero();
    for i in 0..D {
        for col in 0..D {
            j[(i, col)] = eta[i].g[col];
        }
    }
    j
}

fn extract_laplacian<T: Real, const D: usize>(eta: &JetVec<T, D>) -> Vector<T, D> {
    Vector::from_fn(|i| eta[i].laplacian())
}

// ---------------------------------------------------------------------
// finite-difference mode
// ---------------------------------------------------------------------

/// Path-length distance from the end of the flight to the nearest
/// reflection breakpoint, and that breakpoint's tau.
fn breakpoint_gap<T: Real, const D: usize>(
    domain: &Domain<T, D>,
    x: &Vector<T, D>,
    v: &Vector<T, D>,
) -> Result<(T, T, usize, bool)> {
    let speed = v.norm();
    if matches!(domain.shape(), Shape::UnitBall) {
        let flight = analytic_flight(x, v)?;
        match flight.chord {
            None => {
                let dir = *v / speed;
                let s1 = crate::geometry::unit_ball_exit(x, &dir);
                Ok((s1 - speed, s1 / speed, 0, false))
            }
            Some(geo) => {
                let next = geo.chord_length - geo.residual;
                let (gap, arc) = if geo.residual < next {
                    (
                        geo.residual,
                        geo.s1 + geo.chord_length * cst((geo.full_chords) as f64),
                    )
                } else {
                    (
                        next,
                        geo.s1 + geo.chord_length * cst((geo.full_chords + 1) as f64),
                    )
                };
                Ok((gap, arc / speed, flight.reflections, flight.near_grazing))
            }
        }
    } else {
        let cycle = specular_cycle(domain, x, v)?;
        let eta = cycle.eta();
        let n = cycle.reflections();
        let gap_prev = if n > 0 {
            speed - *cycle.reflection_arcs().last().unwrap()
        } else {
            T::infinity()
        };
        if gap_prev <= T::zero() {
            return Ok((T::zero(), T::one(), n, cycle.near_grazing()));
        }
        let dir = *cycle.segment_velocities().last().unwrap() / speed;
        let (ahead, _) = domain.ray_exit(&eta, &dir)?;
        let (gap, arc) = if gap_prev < ahead {
            (gap_prev, *cycle.reflection_arcs().last().unwrap())
        } else {
            (ahead, speed + ahead)
        };
        Ok((gap, arc / speed, n, cycle.near_grazing()))
    }
}

fn fd_eta<T: Real, const D: usize>(
    domain: &Domain<T, D>,
    x: &Vector<T, D>,
    v: &Vector<T, D>,
) -> Result<(Vector<T, D>, usize)> {
    if matches!(domain.shape(), Shape::UnitBall) {
        let f = analytic_flight(x, v)?;
        Ok((f.eta, f.reflections))
    } else {
        let e = endpoint(domain, x, v)?;
        Ok((e.eta, e.cycle.reflections()))
    }
}

fn fd_derivatives<T: Real, const D: usize>(
    domain: &Domain<T, D>,
    x: &Vector<T, D>,
    v: &Vector<T, D>,
) -> Result<EndpointDerivatives<T, D>> {
    let speed = v.norm();
    if !(speed > T::zero()) {
        if domain.on_boundary(x) {
            return Err(Error::Grazing { normal_speed: 0.0 });
        }
        return Ok(EndpointDerivatives {
            eta: *x,
            jacobian: Matrix::identity(),
            laplacian: Vector::zero(),
            reflections: 0,
            near_grazing: false,
            at_breakpoint: false,
        });
    }
    let (gap, tau, reflections, near_grazing) = breakpoint_gap(domain, x, v)?;
    let h = cst::<T>(1e-5) * (T::one() + speed);
    if gap < h * cst(10.0) {
        return Err(Error::Discontinuity {
            tau: tau.to_f64().unwrap_or(f64::NAN),
            gap: gap.to_f64().unwrap_or(f64::NAN),
        });
    }

    let (eta0, _) = fd_eta(domain, x, v)?;
    let mut jacobian = Matrix::zero();
    let mut laplacian = Vector::zero();
    for axis in 0..D {
        let mut vp = *v;
        let mut vm = *v;
        vp[axis] += h;
        vm[axis] -= h;
        let (ep, np) = fd_eta(domain, x, &vp)?;
        let (em, nm) = fd_eta(domain, x, &vm)?;
        if np != nm {
            return Err(Error::Discontinuity {
                tau: tau.to_f64().unwrap_or(f64::NAN),
                gap: gap.to_f64().unwrap_or(f64::NAN),
            });
        }
        let inv2h = (h * cst(2.0)).recip();
        let invh2 = (h * h).recip();
        for i in 0..D {
            jacobian[(i, axis)] = (ep[i] - em[i]) * inv2h;
            laplacian[i] += (ep[i] - eta0[i] * cst::<T>(2.0) + em[i]) * invh2;
        }
    }
    Ok(EndpointDerivatives {
        eta: eta0,
        jacobian,
        laplacian,
        reflections,
        near_grazing,
        at_breakpoint: false,
    })
}

// ---------------------------------------------------------------------
// composite Laplacian of a test function through the end-point map
// ---------------------------------------------------------------------

/// `Lap_v eta . grad psi(t, eta) + Tr(J J^T H psi(t, eta))` from
/// precomputed derivatives; reusable across several test functions.
pub fn composite_laplacian<T: Real, const D: usize>(
    derivs: &EndpointDerivatives<T, D>,
    psi: &TestFunction<T>,
    t: T,
) -> T {
    if psi.is_spatially_constant() {
        return T::zero();
    }
    let grad = psi.gradient(t, &derivs.eta);
    let hess = psi.hessian(t, &derivs.eta);
    let j = &derivs.jacobian;
    let mut acc = derivs.laplacian.dot(&grad);
    for i in 0..D {
        for l in 0..D {
            let mut jj = T::zero();
            for kk in 0..D {
                jj += j[(i, kk)] * j[(l, kk)];
            }
            acc += jj * hess[(i, l)];
        }
    }
    acc
}

/// Composite Laplacian `Lap_v [psi(t, eta(x, .))](u)` of a Neumann test
/// function. In the no-reflection regime this reduces to the plain
/// spatial Laplacian at `x + u`.
pub fn test_function_laplacian<T: Real, const D: usize>(
    domain: &Domain<T, D>,
    psi: &TestFunction<T>,
    t: T,
    x: &Vector<T, D>,
    u: &Vector<T, D>,
) -> Result<T> {
    if !psi.is_neumann() {
        return Err(Error::Contract(format!(
            "test function '{}' violates the Neumann boundary condition",
            psi.name()
        )));
    }
    if psi.is_spatially_constant() {
        return Ok(T::zero());
    }
    let mode = if matches!(domain.shape(), Shape::UnitBall) {
        DerivativeMode::Analytic
    } else {
        DerivativeMode::FiniteDifference
    };
    let derivs = endpoint_derivatives(domain, x, u, mode)?;
    Ok(composite_laplacian(&derivs, psi, t))
}

// ---------------------------------------------------------------------
// chord data of the disk
// ---------------------------------------------------------------------

/// Chord geometry of the unit-disk billiard at a phase point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChordData<T> {
    /// Chord length `L = 2 sqrt((x.vhat)^2 + 1 - |x|^2)`, in `(0, 2]`.
    pub length: T,
    /// Reflection angle `A = arccos(L / 2)` against the normal.
    pub angle: T,
    /// Number of boundary hits of the actual cycle (norm-dependent,
    /// unlike `length` and `angle`).
    pub index: usize,
}

/// Chord length and reflection angle at `(x, v)` in the unit ball; both
/// depend only on the direction of `v`.
pub fn chord_data<T: Real, const D: usize>(
    x: &Vector<T, D>,
    v: &Vector<T, D>,
) -> Result<ChordData<T>> {
    let speed = v.norm();
    if !(speed > T::zero()) {
        return Err(Error::InvalidArgument("chord_data requires v != 0".into()));
    }
    if x.norm_sq() > T::one() + cst(1e-12) {
        return Err(Error::InvalidArgument(
            "chord_data requires a point in the closed unit ball".into(),
        ));
    }
    let dir = *v / speed;
    let proj = x.dot(&dir);
    let half_sq = (proj * proj + T::one() - x.norm_sq()).max(T::zero());
    let half = half_sq.sqrt();
    let length = cst::<T>(2.0) * half;
    let angle = half.min(T::one()).acos();
    let s1 = half - proj;
    let index = if speed < s1 || !(length > T::zero()) {
        0
    } else {
        1 + ((speed - s1) / length).floor().to_f64().unwrap_or(0.0) as usize
    };
    Ok(ChordData {
        length,
        angle,
        index,
    })
}

/// Maximal distance from a chord of length `L` to the unit circle:
/// `1 - sqrt(1 - L^2/4)`.
pub fn trajectory_boundary_distance<T: Real>(length: T) -> Result<T> {
    if !(length > T::zero()) || length > cst::<T>(2.0) {
        return Err(Error::InvalidArgument(
            "chord length must lie in (0, 2]".into(),
        ));
    }
    let half = length * cst(0.5);
    Ok(T::one() - (T::one() - half * half).max(T::zero()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::SmallRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_PI_6, PI};

    type Ball2 = Domain<f64, 2>;

    fn v2(x: f64, y: f64) -> Vector<f64, 2> {
        Vector([x, y])
    }

    fn fd_oracle(x: Vector<f64, 2>, v: Vector<f64, 2>, h: f64) -> (Matrix<f64, 2>, Vector<f64, 2>) {
        let eta = |vv: Vector<f64, 2>| analytic_flight(&x, &vv).unwrap().eta;
        let e0 = eta(v);
        let mut j = Matrix::zero();
        let mut lap = Vector::zero();
        for axis in 0..2 {
            let mut vp = v;
            let mut vm = v;
            vp[axis] += h;
            vm[axis] -= h;
            let (ep, em) = (eta(vp), eta(vm));
            for i in 0..2 {
                j[(i, axis)] = (ep[i] - em[i]) / (2.0 * h);
                lap[i] += (ep[i] - 2.0 * e0[i] + em[i]) / (h * h);
            }
        }
        (j, lap)
    }

    #[test]
    fn free_flight_has_identity_jacobian() {
        let d = Ball2::unit_ball();
        let out =
            endpoint_derivatives(&d, &v2(0.0, 0.0), &v2(0.2, 0.0), DerivativeMode::Analytic)
                .unwrap();
        assert_eq!(out.jacobian, Matrix::identity());
        assert_eq!(out.laplacian, Vector::zero());
        assert_eq!(out.eta, v2(0.2, 0.0));
        assert_eq!(out.reflections, 0);
    }

    #[test]
    fn boundary_outgoing_start_gives_reflection_jacobian() {
        // J -> Id - 2 n (x) n = diag(-1, 1) at x = (1, 0).
        let d = Ball2::unit_ball();
        let out = endpoint_derivatives(
            &d,
            &v2(1.0, 0.0),
            &v2(1e-3, 4e-4),
            DerivativeMode::Analytic,
        )
        .unwrap();
        let expect = Matrix([[-1.0, 0.0], [0.0, 1.0]]);
        assert!(out.jacobian.max_abs_diff(&expect) < 1e-12);
        assert!(out.laplacian.norm() < 1e-12);
    }

    #[test]
    fn center_diameter_matches_central_differences() {
        // (0, 0) with v = (3, 0) ends exactly on the wall: the derivative
        // is the symmetric two-sided limit, which is what a central
        // difference of the flight produces.
        let d = Ball2::unit_ball();
        let out =
            endpoint_derivatives(&d, &v2(0.0, 0.0), &v2(3.0, 0.0), DerivativeMode::Analytic)
                .unwrap();
        assert!(out.at_breakpoint);
        let (j_fd, _) = fd_oracle(v2(0.0, 0.0), v2(3.0, 0.0), 1e-6);
        assert!(
            out.jacobian.max_abs_diff(&j_fd) < 1e-5,
            "analytic {:?} vs fd {:?}",
            out.jacobian,
            j_fd
        );
        // Radial kink averages to zero; the angular response is -1/3.
        assert!(out.jacobian[(0, 0)].abs() < 1e-10);
        assert!((out.jacobian[(1, 1)] + 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn analytic_matches_finite_differences_on_random_samples() {
        let d = Ball2::unit_ball();
        let mut rng = SmallRng::seed_from_u64(377);
        let mut tested = 0;
        while tested < 300 {
            let x = loop {
                let p = v2(
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                );
                if p.norm() < 0.98 {
                    break p;
                }
            };
            let speed = rng.random::<f64>() * 9.0 + 0.2;
            let th = rng.random::<f64>() * 2.0 * PI;
            let v = v2(speed * th.cos(), speed * th.sin());
            let fd = match endpoint_derivatives(&d, &x, &v, DerivativeMode::FiniteDifference) {
                Ok(out) => out,
                Err(Error::Discontinuity { .. }) | Err(Error::Grazing { .. }) => continue,
                Err(e) => panic!("unexpected error {e}"),
            };
            let an = endpoint_derivatives(&d, &x, &v, DerivativeMode::Analytic).unwrap();
            let scale = 1.0f64.max(an.jacobian.frobenius_norm());
            assert!(
                an.jacobian.max_abs_diff(&fd.jacobian) <= 1e-5 * scale,
                "x {x:?} v {v:?}\nanalytic {:?}\nfd {:?}",
                an.jacobian,
                fd.jacobian
            );
            let lap_scale = 1.0f64.max(an.laplacian.norm());
            assert!(
                (an.laplacian - fd.laplacian).norm() <= 2e-4 * lap_scale,
                "laplacian mismatch at x {x:?} v {v:?}: {:?} vs {:?}",
                an.laplacian,
                fd.laplacian
            );
            tested += 1;
        }
    }

    #[test]
    fn fd_mode_refuses_breakpoint_straddle() {
        let d = Ball2::unit_ball();
        let r = endpoint_derivatives(
            &d,
            &v2(0.0, 0.0),
            &v2(3.0 - 1e-9, 0.0),
            DerivativeMode::FiniteDifference,
        );
        assert!(matches!(r, Err(Error::Discontinuity { .. })), "{r:?}");
        // tau of the offending breakpoint is reported.
        if let Err(Error::Discontinuity { tau, .. }) = r {
            assert!((tau - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn composite_laplacian_constant_is_zero() {
        let d = Ball2::unit_ball();
        let psi = neumann_family::<f64>(0).unwrap();
        for &(x, y, vx, vy) in &[(0.0, 0.0, 0.5, 0.2), (0.4, -0.3, 3.0, 1.0)] {
            let out = test_function_laplacian(&d, &psi, 0.1, &v2(x, y), &v2(vx, vy)).unwrap();
            assert_eq!(out, 0.0);
        }
    }

    #[test]
    fn composite_laplacian_rejects_non_neumann() {
        let d = Ball2::unit_ball();
        let psi = TestFunction::<f64>::SquaredNorm;
        let r = test_function_laplacian(&d, &psi, 0.0, &v2(0.0, 0.0), &v2(0.1, 0.0));
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn composite_laplacian_short_flight_example() {
        // psi = (1 - |x|^2)^2 at x = 0, u = (0.1, 0): plain Laplacian at
        // (0.1, 0), i.e. -4 d (1 - r^2) + 8 r^2 = -7.84 in d = 2.
        let d = Ball2::unit_ball();
        let psi = neumann_family::<f64>(1).unwrap();
        let out = test_function_laplacian(&d, &psi, 0.0, &v2(0.0, 0.0), &v2(0.1, 0.0)).unwrap();
        assert!((out - (-7.84)).abs() < 1e-12, "{out}");
    }

    #[test]
    fn composite_laplacian_reduces_to_spatial_laplacian_without_reflection() {
        let d = Ball2::unit_ball();
        let mut rng = SmallRng::seed_from_u64(55);
        for index in 1..3 {
            let psi = neumann_family::<f64>(index).unwrap();
            for _ in 0..200 {
                let x = loop {
                    let p = v2(
                        rng.random::<f64>() * 2.0 - 1.0,
                        rng.random::<f64>() * 2.0 - 1.0,
                    );
                    if p.norm() < 0.9 {
                        break p;
                    }
                };
                let room = 1.0 - x.norm();
                let th = rng.random::<f64>() * 2.0 * PI;
                let u = v2(th.cos(), th.sin()) * (room * 0.9 * rng.random::<f64>());
                let t = rng.random::<f64>() * 0.2;
                let got = test_function_laplacian(&d, &psi, t, &x, &u).unwrap();
                let expect = psi.hessian(t, &(x + u)).trace();
                assert!(
                    (got - expect).abs() <= 1e-12 * expect.abs().max(1.0),
                    "index {index}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn finite_differences_work_on_level_set_domains() {
        let ellipse = Domain::<f64, 2>::ellipse([1.5, 0.7]).unwrap();
        // No-reflection regime: identity Jacobian, vanishing Laplacian.
        let out = endpoint_derivatives(
            &ellipse,
            &v2(0.2, 0.1),
            &v2(0.3, -0.1),
            DerivativeMode::FiniteDifference,
        )
        .unwrap();
        assert!(out.jacobian.max_abs_diff(&Matrix::identity()) < 1e-7);
        assert!(out.laplacian.norm() < 1e-4);
        assert_eq!(out.reflections, 0);
        // A reflecting flight: derivatives are finite and the map they
        // linearize matches a coarser manual difference.
        let x = v2(0.1, 0.0);
        let v = v2(2.3, 0.4);
        let out =
            endpoint_derivatives(&ellipse, &x, &v, DerivativeMode::FiniteDifference).unwrap();
        assert!(out.reflections >= 1);
        let h = 1e-4;
        for axis in 0..2 {
            let mut vp = v;
            let mut vm = v;
            vp[axis] += h;
            vm[axis] -= h;
            let ep = endpoint(&ellipse, &x, &vp).unwrap().eta;
            let em = endpoint(&ellipse, &x, &vm).unwrap().eta;
            for i in 0..2 {
                let coarse = (ep[i] - em[i]) / (2.0 * h);
                assert!(
                    (out.jacobian[(i, axis)] - coarse).abs() < 1e-5,
                    "entry ({i}, {axis})"
                );
            }
        }
        // Analytic mode stays unit-ball only.
        assert!(matches!(
            endpoint_derivatives(&ellipse, &x, &v, DerivativeMode::Analytic),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn chord_data_examples() {
        // Through the center: the diameter.
        let c = chord_data(&v2(0.0, 0.0), &v2(0.3, 0.1)).unwrap();
        assert!((c.length - 2.0).abs() < 1e-14);
        assert!(c.angle.abs() < 1e-7);
        // Offset start, tangential direction: L = sqrt(3), A = pi/6.
        let c = chord_data(&v2(0.5, 0.0), &v2(0.0, 1.0)).unwrap();
        assert!((c.length - 3.0f64.sqrt()).abs() < 1e-14);
        assert!((c.angle - FRAC_PI_6).abs() < 1e-14);
        // Scale invariance of L and A.
        let a = chord_data(&v2(0.3, -0.2), &v2(0.4, 1.1)).unwrap();
        let b = chord_data(&v2(0.3, -0.2), &(v2(0.4, 1.1) * 7.0)).unwrap();
        assert!((a.length - b.length).abs() < 1e-14);
        assert!((a.angle - b.angle).abs() < 1e-14);
    }

    #[test]
    fn boundary_distance_examples() {
        assert!((trajectory_boundary_distance(2.0f64).unwrap() - 1.0).abs() < 1e-15);
        assert!((trajectory_boundary_distance(3.0f64.sqrt()).unwrap() - 0.5).abs() < 1e-14);
        let tiny = trajectory_boundary_distance(0.02f64).unwrap();
        assert!((tiny - 5.000125007815715e-5).abs() < 1e-12, "{tiny}");
        assert!(trajectory_boundary_distance(0.0f64).is_err());
        assert!(trajectory_boundary_distance(2.5f64).is_err());
    }

    #[test]
    fn jacobian_operator_norm_stays_bounded() {
        let d = Ball2::unit_ball();
        let mut rng = SmallRng::seed_from_u64(4096);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let x = loop {
                let p = v2(
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                );
                if p.norm() < 1.0 {
                    break p;
                }
            };
            let speed = rng.random::<f64>() * 10.0 + 1e-3;
            let th = rng.random::<f64>() * 2.0 * PI;
            let v = v2(speed * th.cos(), speed * th.sin());
            if let Ok(out) = endpoint_derivatives(&d, &x, &v, DerivativeMode::Analytic) {
                if !out.near_grazing {
                    worst = worst.max(out.jacobian.frobenius_norm());
                }
            }
        }
        assert!(worst.is_finite());
        assert!(worst < 2e3, "Frobenius norm grew to {worst}");
    }

    #[test]
    fn appendix_pairing_bound_is_realized() {
        // |Lap eta . grad psi(eta)| stays below C / L + C' on near-boundary
        // starts: the product with L must stay bounded.
        let d = Ball2::unit_ball();
        let mut rng = SmallRng::seed_from_u64(808);
        for index in 1..3 {
            let psi = neumann_family::<f64>(index).unwrap();
            let mut worst: f64 = 0.0;
            let mut n = 0;
            while n < 10_000 {
                let rad = 0.9 + 0.0999 * rng.random::<f64>();
                let phi = rng.random::<f64>() * 2.0 * PI;
                let x = v2(rad * phi.cos(), rad * phi.sin());
                let speed = rng.random::<f64>() * 10.0 + 0.01;
                let th = rng.random::<f64>() * 2.0 * PI;
                let v = v2(speed * th.cos(), speed * th.sin());
                let out = match endpoint_derivatives(&d, &x, &v, DerivativeMode::Analytic) {
                    Ok(o) if !o.near_grazing => o,
                    _ => continue,
                };
                n += 1;
                let chord = chord_data(&x, &v).unwrap();
                let pairing = out.laplacian.dot(&psi.gradient(0.0, &out.eta)).abs();
                worst = worst.max(pairing * chord.length.min(1.0));
            }
            assert!(
                worst.is_finite() && worst < 1e3,
                "index {index}: L-scaled pairing reached {worst}"
            );
        }
    }
}
