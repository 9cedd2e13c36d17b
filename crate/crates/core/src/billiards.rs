//! Specular cycles and the end-point map.
//!
//! A cycle is the broken constant-speed trajectory obtained from the damped
//! characteristics by trading the exponentially decaying velocity for a
//! unit-interval parameter: with `tau = 1 - e^{-s}` the particle travels at
//! speed `|v0|` on `tau in [0, 1]`, reflecting specularly at the boundary,
//! for a total path length equal to `|v0|`. The end point `eta(x0, v0)` is
//! the position at `tau = 1`.
//!
//! Two solvers are provided: a generic segment-by-segment solver over any
//! convex [`Domain`], and a closed-form solver for the unit ball that uses
//! the invariance of the chord geometry (every chord has the same length
//! `L` and reflection angle `A`, and the configuration advances by a fixed
//! in-plane rotation of angle `pi - 2A` per chord).

use crate::error::{Error, Result};
use crate::geometry::{reflect_across, unit_ball_exit, BoundarySide, Domain, PhasePoint};
use crate::linalg::Vector;
use crate::scalar::{cst, Real};

/// Hard cap on reflections in the segment-by-segment solver.
pub const REFLECTION_CAP: usize = 1_000_000;
/// A hit with `|u.n|` below this is flagged near-grazing.
pub const NEAR_GRAZING_TOL: f64 = 1e-8;

/// The full broken trajectory of one phase point.
///
/// Stores cumulative path lengths at the reflections; the unit-interval
/// `tau` breakpoints are derived on demand as `arc / speed`.
#[derive(Clone, Debug)]
pub struct SpecularCycle<T, const D: usize> {
    base: PhasePoint<T, D>,
    speed: T,
    /// Cumulative path length at each reflection, ascending.
    arcs: Vec<T>,
    /// Reflection points on the boundary.
    points: Vec<Vector<T, D>>,
    /// Segment velocities `w_0 .. w_N`; `|w_i| = speed`.
    velocities: Vec<Vector<T, D>>,
    near_grazing: bool,
}

impl<T: Real, const D: usize> SpecularCycle<T, D> {
    pub fn base(&self) -> &PhasePoint<T, D> {
        &self.base
    }

    pub fn speed(&self) -> T {
        self.speed
    }

    /// Number of reflections `N`.
    pub fn reflections(&self) -> usize {
        self.arcs.len()
    }

    /// Cumulative path lengths at the reflections.
    pub fn reflection_arcs(&self) -> &[T] {
        &self.arcs
    }

    pub fn reflection_points(&self) -> &[Vector<T, D>] {
        &self.points
    }

    /// Velocities `w_0 .. w_N` of the `N + 1` segments.
    pub fn segment_velocities(&self) -> &[Vector<T, D>] {
        &self.velocities
    }

    /// Breakpoints `tau_0 = 0 < tau_1 < ... < tau_N` of the unit-interval
    /// parametrization.
    pub fn breakpoints_tau(&self) -> Vec<T> {
        let mut taus = Vec::with_capacity(self.arcs.len() + 1);
        taus.push(T::zero());
        for &a in &self.arcs {
            taus.push(a / self.speed);
        }
        taus
    }

    /// True if some hit came within [`NEAR_GRAZING_TOL`] of the grazing set;
    /// statistics may want to exclude such cycles.
    pub fn near_grazing(&self) -> bool {
        self.near_grazing
    }

    /// Position at `tau = 1`.
    pub fn eta(&self) -> Vector<T, D> {
        match self.points.last() {
            None => self.base.x + self.velocities[0],
            Some(&p) => {
                let arc = *self.arcs.last().unwrap();
                let w = *self.velocities.last().unwrap();
                // (1 - tau_N) w_N, written through path lengths.
                p + w * ((self.speed - arc) / self.speed)
            }
        }
    }

    /// Position at an arbitrary `tau` in `[0, 1]`.
    pub fn position_at(&self, tau: T) -> Vector<T, D> {
        let arc = tau * self.speed;
        let mut seg = 0;
        while seg < self.arcs.len() && self.arcs[seg] <= arc {
            seg += 1;
        }
        let (start, start_arc) = if seg == 0 {
            (self.base.x, T::zero())
        } else {
            (self.points[seg - 1], self.arcs[seg - 1])
        };
        start + self.velocities[seg] * ((arc - start_arc) / self.speed)
    }
}

/// End point of a cycle together with the cycle itself.
#[derive(Clone, Debug)]
pub struct EndpointResult<T, const D: usize> {
    pub eta: Vector<T, D>,
    pub cycle: SpecularCycle<T, D>,
    /// Total path length of the cycle (equals the initial speed).
    pub path_length: T,
}

/// Closed-form flight summary of the unit-ball solver; no allocations.
#[derive(Clone, Copy, Debug)]
pub struct Flight<T, const D: usize> {
    pub eta: Vector<T, D>,
    pub reflections: usize,
    pub near_grazing: bool,
    /// Chord geometry of the reflecting part, absent for free flights.
    pub chord: Option<ChordGeometry<T, D>>,
}

/// Shared chord data of a reflecting flight in the unit ball.
#[derive(Clone, Copy, Debug)]
pub struct ChordGeometry<T, const D: usize> {
    /// Path length to the first boundary hit.
    pub s1: T,
    /// Common chord length `L = 2 cos A`.
    pub chord_length: T,
    /// `cos A = u.n` at every hit.
    pub cos_angle: T,
    /// Number of full chords after the first hit.
    pub full_chords: usize,
    /// Leftover path length on the last partial chord, in `[0, L)`.
    pub residual: T,
    /// First hit point (also the first frame axis).
    pub first_hit: Vector<T, D>,
    /// In-plane frame axis orthogonal to `first_hit`, along the travel.
    /// Zero for diameter chords.
    pub frame_b: Vector<T, D>,
    /// Direction after the first reflection.
    pub dir_after_first: Vector<T, D>,
    /// True when the start sat on the boundary with outgoing velocity and
    /// was reflected before the flight.
    pub pre_reflected: bool,
}

/// `cos(k d), sin(k d)` from `cos d, sin d` by binary powering of the unit
/// complex number; avoids large-angle trigonometry for big `k`.
pub(crate) fn rotation_power<T: Real>(cos_d: T, sin_d: T, mut k: usize) -> (T, T) {
    let mut base = (cos_d, sin_d);
    let mut acc = (T::one(), T::zero());
    while k > 0 {
        if k & 1 == 1 {
            acc = (
                acc.0 * base.0 - acc.1 * base.1,
                acc.0 * base.1 + acc.1 * base.0,
            );
        }
        base = (
            base.0 * base.0 - base.1 * base.1,
            cst::<T>(2.0) * base.0 * base.1,
        );
        k >>= 1;
    }
    acc
}

/// Start-of-flight handling shared by the solvers: reject grazing starts
/// and reflect boundary starts with outgoing velocity.
fn prepare_start<T: Real, const D: usize>(
    domain: &Domain<T, D>,
    x0: &Vector<T, D>,
    v0: &Vector<T, D>,
) -> Result<(Vector<T, D>, bool)> {
    if domain.zeta(x0) > cst(crate::geometry::BOUNDARY_TOL) {
        return Err(Error::InvalidArgument(
            "start point outside the domain closure".into(),
        ));
    }
    if !domain.on_boundary(x0) {
        return Ok((*v0, false));
    }
    let class = domain.classify(x0, v0)?;
    match class.side {
        BoundarySide::Grazing => Err(Error::Grazing {
            normal_speed: class.normal_speed.to_f64().unwrap_or(0.0),
        }),
        BoundarySide::Outgoing => Ok((domain.reflect(x0, v0)?, true)),
        BoundarySide::Incoming => Ok((*v0, false)),
    }
}

/// Segment-by-segment specular cycle over any convex domain.
pub fn specular_cycle<T: Real, const D: usize>(
    domain: &Domain<T, D>,
    x0: &Vector<T, D>,
    v0: &Vector<T, D>,
) -> Result<SpecularCycle<T, D>> {
    let speed = v0.norm();
    let (w0, _) = prepare_start(domain, x0, v0)?;
    let mut cycle = SpecularCycle {
        base: PhasePoint::new(*x0, *v0),
        speed,
        arcs: Vec::new(),
        points: Vec::new(),
        velocities: vec![w0],
        near_grazing: false,
    };
    if !(speed > T::zero()) {
        return Ok(cycle);
    }

    let mut x = *x0;
    let mut dir = w0 / speed;
    let mut remaining = speed;
    let mut arc = T::zero();
    let stall_tol = T::epsilon() * cst::<T>(8.0) * speed.max(T::one());
    let mut stalls = 0usize;

    loop {
        let (s, hit) = domain.ray_exit(&x, &dir)?;
        if s > remaining {
            break;
        }
        if cycle.arcs.len() >= REFLECTION_CAP {
            return Err(Error::ReflectionCap {
                cap: REFLECTION_CAP,
            });
        }
        if s <= stall_tol {
            stalls += 1;
            if stalls > 3 {
                return Err(Error::Grazing {
                    normal_speed: 0.0,
                });
            }
        } else {
            stalls = 0;
        }
        let hit = domain.project_to_boundary(&hit);
        let n = domain.normal_at(&hit)?;
        let un = dir.dot(&n);
        if un.abs() < cst(NEAR_GRAZING_TOL) {
            cycle.near_grazing = true;
        }
        dir = reflect_across(&dir, &n);
        arc += s;
        remaining -= s;
        x = hit;
        cycle.arcs.push(arc);
        cycle.points.push(hit);
        cycle.velocities.push(dir * speed);
        if remaining <= T::zero() {
            break;
        }
    }
    Ok(cycle)
}

/// End point of the generic cycle.
pub fn endpoint<T: Real, const D: usize>(
    domain: &Domain<T, D>,
    x0: &Vector<T, D>,
    v0: &Vector<T, D>,
) -> Result<EndpointResult<T, D>> {
    let cycle = specular_cycle(domain, x0, v0)?;
    Ok(EndpointResult {
        eta: cycle.eta(),
        path_length: cycle.speed,
        cycle,
    })
}

/// Reflection count `N` of the cycle.
pub fn reflection_count<T: Real, const D: usize>(
    domain: &Domain<T, D>,
    x0: &Vector<T, D>,
    v0: &Vector<T, D>,
) -> Result<usize> {
    Ok(specular_cycle(domain, x0, v0)?.reflections())
}

/// Closed-form flight in the unit ball (disk for `D = 2`; in higher
/// dimension the trajectory is confined to the plane spanned by the first
/// hit normal and the velocity, where the disk construction applies).
///
/// After the first boundary hit the chord length `L` and the incidence
/// cosine `cos A = L / 2` are constants of motion, and hit points and
/// directions advance by the fixed in-plane rotation of angle `pi - 2A`.
/// The number of full chords is `floor((|v0| - s1) / L)`; no marching.
pub fn analytic_flight<T: Real, const D: usize>(
    x0: &Vector<T, D>,
    v0: &Vector<T, D>,
) -> Result<Flight<T, D>> {
    let ball = Domain::<T, D>::unit_ball();
    let speed = v0.norm();
    let (w0, pre_reflected) = prepare_start(&ball, x0, v0)?;
    if !(speed > T::zero()) {
        return Ok(Flight {
            eta: *x0,
            reflections: 0,
            near_grazing: false,
            chord: None,
        });
    }
    let dir = w0 / speed;
    let s1 = unit_ball_exit(x0, &dir);
    if speed < s1 {
        // Short flight: exactly x0 + v0 for interior starts.
        return Ok(Flight {
            eta: *x0 + w0,
            reflections: 0,
            near_grazing: false,
            chord: None,
        });
    }

    let a = (*x0 + dir * s1).normalized();
    let m = dir.dot(&a); // cos A at the hit, in (0, 1]
    if m <= T::zero() {
        return Err(Error::Grazing {
            normal_speed: m.to_f64().unwrap_or(0.0),
        });
    }
    let near_grazing = m < cst(NEAR_GRAZING_TOL);
    let chord_len = cst::<T>(2.0) * m;
    let u1 = dir - a * (cst::<T>(2.0) * m);
    let ell1 = speed - s1;
    let k_real = (ell1 / chord_len).floor();
    let full_chords = k_real
        .to_f64()
        .map(|v| v as usize)
        .filter(|_| k_real >= T::zero())
        .ok_or_else(|| Error::Geometry("chord count overflow".into()))?;
    let residual = ell1 - k_real * chord_len;

    // In-plane frame: a at the first hit, b along the travel direction.
    let b_raw = u1 + a * m;
    let sin_a = b_raw.norm();
    let b = if sin_a > cst(1e-14) {
        b_raw / sin_a
    } else {
        Vector::zero() // diameter chords: no tangential component
    };
    // One chord advances everything by the rotation of angle pi - 2A:
    // cos = 1 - L^2/2, sin = 2 m sin A, taken to the k-th power.
    let cos_d = T::one() - cst::<T>(2.0) * m * m;
    let sin_d = cst::<T>(2.0) * m * sin_a;
    let (ck, sk) = rotation_power(cos_d, sin_d, full_chords);

    let w = a + u1 * residual; // p1 + r u1, rotated k times below
    let wa = w.dot(&a);
    let wb = w.dot(&b);
    let w_perp = w - a * wa - b * wb;
    let eta = w_perp + a * (wa * ck - wb * sk) + b * (wa * sk + wb * ck);

    Ok(Flight {
        eta,
        reflections: full_chords + 1,
        near_grazing,
        chord: Some(ChordGeometry {
            s1,
            chord_length: chord_len,
            cos_angle: m,
            full_chords,
            residual,
            first_hit: a,
            frame_b: b,
            dir_after_first: u1,
            pre_reflected,
        }),
    })
}

/// Closed-form end point in the unit ball with the cycle materialized,
/// contract-identical to [`endpoint`].
///
/// The end point itself costs O(log N) regardless of the reflection count
/// (see [`analytic_flight`]); only listing the cycle is O(N), and that
/// listing is capped. Statistics paths should use [`analytic_flight`].
pub fn endpoint_analytic<T: Real, const D: usize>(
    x0: &Vector<T, D>,
    v0: &Vector<T, D>,
) -> Result<EndpointResult<T, D>> {
    let ball = Domain::<T, D>::unit_ball();
    let speed = v0.norm();
    let (w0, _) = prepare_start(&ball, x0, v0)?;
    let flight = analytic_flight(x0, v0)?;
    let mut cycle = SpecularCycle {
        base: PhasePoint::new(*x0, *v0),
        speed,
        arcs: Vec::new(),
        points: Vec::new(),
        velocities: Vec::new(),
        near_grazing: flight.near_grazing,
    };
    match flight.chord {
        None => {
            cycle.velocities.push(w0);
        }
        Some(geo) => {
            cycle.velocities.push(w0);
            // Walk the rotation one chord at a time to list the hits.
            let n = geo.full_chords + 1;
            if n > REFLECTION_CAP {
                return Err(Error::ReflectionCap {
                    cap: REFLECTION_CAP,
                });
            }
            let cos_d = T::one() - cst::<T>(2.0) * geo.cos_angle * geo.cos_angle;
            let sin_d = cst::<T>(2.0) * geo.cos_angle * (T::one() - geo.cos_angle * geo.cos_angle)
                .max(T::zero())
                .sqrt();
            let a = geo.first_hit;
            let b = geo.frame_b;
            let rotate = |w: &Vector<T, D>, c: T, s: T| {
                let wa = w.dot(&a);
                let wb = w.dot(&b);
                let wp = *w - a * wa - b * wb;
                wp + a * (wa * c - wb * s) + b * (wa * s + wb * c)
            };
            let mut rot = (T::one(), T::zero());
            for j in 0..n {
                let p = rotate(&a, rot.0, rot.1);
                let u = rotate(&geo.dir_after_first, rot.0, rot.1);
                cycle.arcs.push(geo.s1 + geo.chord_length * cst(j as f64));
                cycle.points.push(p);
                cycle.velocities.push(u * speed);
                rot = (
                    rot.0 * cos_d - rot.1 * sin_d,
                    rot.0 * sin_d + rot.1 * cos_d,
                );
            }
        }
    }
    Ok(EndpointResult {
        eta: flight.eta,
        path_length: speed,
        cycle,
    })
}
