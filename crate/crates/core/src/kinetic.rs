//! Stochastic particle solver for the scaled kinetic dynamics with
//! specular reflection.
//!
//! Each particle follows
//!
//! ```text
//! dX = (V / eps) dt,       dV = -(V / eps^2) dt + (sqrt(2) / eps) dW,
//! ```
//!
//! whose forward equation is the diffusively scaled Fokker-Planck
//! generator. A step is a Strang split: exact Ornstein-Uhlenbeck half
//! step in velocity, ballistic transport with specular reflections over
//! the full step (velocity frozen), and a second exact half step. The
//! velocity update carries no discretization error at all; the only time
//! stepping bias is the splitting itself, which the default `dt = eps^2/8`
//! keeps below Monte Carlo noise at desk scales.
//!
//! Every particle owns a counter-mode RNG stream derived from the ensemble
//! seed and the particle index: trajectories are bitwise reproducible and
//! independent of the parallel schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{reflect_across, Domain};
use crate::initial::{sample_velocity, InitialSpec, SpatialInit};
use crate::linalg::Vector;
use crate::mesh::{Mesh, ScalarField};
use crate::scalar::{cst, Real};

/// Reflections allowed within one transport substep.
const TRANSPORT_CAP: usize = 100_000;

/// Normalized Maxwellian `M(v) = (2 pi)^{-d/2} exp(-|v|^2 / 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Maxwellian<const D: usize>;

impl<const D: usize> Maxwellian<D> {
    pub fn density<T: Real>(&self, v: &Vector<T, D>) -> T {
        let tau = cst::<T>(2.0) * T::PI();
        let mut norm = T::one();
        for _ in 0..D {
            norm *= tau.sqrt().recip();
        }
        norm * (-v.norm_sq() * cst(0.5)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Specular reflection on the domain boundary.
    Reflecting,
    /// No boundary; the domain is kept only as a mesh window.
    FreeSpace,
}

/// A Monte Carlo ensemble of phase-space samples representing the kinetic
/// density at one instant.
#[derive(Clone, Debug)]
pub struct ParticleEnsemble<T, const D: usize> {
    domain: Domain<T, D>,
    mode: BoundaryMode,
    eps: T,
    mass: T,
    time: T,
    seed: u64,
    xs: Vec<Vector<T, D>>,
    vs: Vec<Vector<T, D>>,
    rngs: Vec<ChaCha8Rng>,
}

impl<T: Real, const D: usize> ParticleEnsemble<T, D> {
    /// Draw `n` particles from a product initial datum.
    pub fn sample_initial(
        domain: Domain<T, D>,
        spec: &InitialSpec<T, D>,
        n: usize,
        eps: T,
        seed: u64,
        mode: BoundaryMode,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one particle".into()));
        }
        if !(eps > T::zero()) {
            return Err(Error::InvalidArgument("eps must be positive".into()));
        }
        spec.validate()?;
        if mode == BoundaryMode::Reflecting {
            if let SpatialInit::GaussianBlob { .. } = spec.spatial {
                return Err(Error::InvalidArgument(
                    "the Gaussian blob is a free-space datum".into(),
                ));
            }
        }
        let mut xs = Vec::with_capacity(n);
        let mut vs = Vec::with_capacity(n);
        let mut rngs = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            xs.push(spec.spatial.sample_position(&mut rng));
            vs.push(sample_velocity(&mut rng, spec.velocity_variance));
            rngs.push(rng);
        }
        Ok(ParticleEnsemble {
            domain,
            mode,
            eps,
            mass: T::one(),
            time: T::zero(),
            seed,
            xs,
            vs,
            rngs,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn positions(&self) -> &[Vector<T, D>] {
        &self.xs
    }

    pub fn velocities(&self) -> &[Vector<T, D>] {
        &self.vs
    }

    /// Pool two independent ensembles of the same configuration; the merged
    /// ensemble carries the same total mass split over all particles.
    pub fn merge(mut self, other: Self) -> Result<Self> {
        if self.mode != other.mode
            || (self.eps - other.eps).abs() > T::epsilon()
            || (self.time - other.time).abs() > T::epsilon()
            || (self.mass - other.mass).abs() > T::epsilon()
        {
            return Err(Error::InvalidArgument(
                "merged ensembles must share mode, eps, time and mass".into(),
            ));
        }
        self.xs.extend(other.xs);
        self.vs.extend(other.vs);
        self.rngs.extend(other.rngs);
        Ok(self)
    }

    /// Advance by `dt` (macroscopic time) with the Strang-split step.
    ///
    /// Requires `dt <= eps^2 / 4` so the velocity relaxation is resolved.
    pub fn step(&mut self, dt: T) -> Result<()> {
        if !(dt > T::zero()) {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        let eps2 = self.eps * self.eps;
        if dt > eps2 * cst(0.25) {
            return Err(Error::InvalidArgument(format!(
                "dt must satisfy dt <= eps^2/4 = {:?}",
                (eps2 * cst::<T>(0.25)).to_f64()
            )));
        }
        // Exact OU half step: v <- v e^{-dt/(2 eps^2)} + sqrt(1 - e^{-dt/eps^2}) xi.
        let decay = (-dt / (cst::<T>(2.0) * eps2)).exp();
        let noise = (T::one() - (-dt / eps2).exp()).sqrt();
        let flight = dt / self.eps;
        let domain = self.domain;
        let mode = self.mode;

        self.xs
            .par_iter_mut()
            .zip(self.vs.par_iter_mut())
            .zip(self.rngs.par_iter_mut())
            .try_for_each(|((x, v), rng)| -> Result<()> {
                ou_half_step(v, decay, noise, rng);
                transport(&domain, mode, x, v, flight)?;
                ou_half_step(v, decay, noise, rng);
                Ok(())
            })?;
        self.time += dt;
        Ok(())
    }

    /// Cell-averaged histogram density. In reflecting mode its integral is
    /// the ensemble mass to rounding; in free space, particles outside the
    /// mesh window are not counted.
    pub fn density(&self, mesh: &Mesh<T>) -> Result<ScalarField<T>> {
        if mesh.cells() == 0 {
            return Err(Error::InvalidArgument("empty mesh".into()));
        }
        if mesh.dim() != D {
            return Err(Error::InvalidArgument("mesh dimension mismatch".into()));
        }
        let weight = self.mass / cst(self.len() as f64);
        let mut counts = vec![0usize; mesh.cells()];
        for x in &self.xs {
            if let Some(c) = mesh.locate(x) {
                counts[c] += 1;
            }
        }
        let values = counts
            .iter()
            .enumerate()
            .map(|(c, &k)| cst::<T>(k as f64) * weight / mesh.cell_volume(c))
            .collect();
        ScalarField::from_values(mesh.clone(), values)
    }

    /// Cell-averaged current density `j = <v>_cell * mass / volume`.
    pub fn current_density(&self, mesh: &Mesh<T>) -> Result<Vec<Vector<T, D>>> {
        if mesh.cells() == 0 {
            return Err(Error::InvalidArgument("empty mesh".into()));
        }
        if mesh.dim() != D {
            return Err(Error::InvalidArgument("mesh dimension mismatch".into()));
        }
        let weight = self.mass / cst(self.len() as f64);
        let mut sums = vec![Vector::<T, D>::zero(); mesh.cells()];
        for (x, v) in self.xs.iter().zip(&self.vs) {
            if let Some(c) = mesh.locate(x) {
                sums[c] += *v;
            }
        }
        Ok(sums
            .into_iter()
            .enumerate()
            .map(|(c, s)| s * (weight / mesh.cell_volume(c)))
            .collect())
    }

    /// Net outward normal current over the outermost cell ring, with its
    /// Monte Carlo standard error. Near equilibrium this vanishes: the
    /// specular condition forbids a boundary flux.
    pub fn boundary_flux(&self, mesh: &Mesh<T>) -> Result<(T, T)> {
        if mesh.dim() != D {
            return Err(Error::InvalidArgument("mesh dimension mismatch".into()));
        }
        let weight = self.mass / cst(self.len() as f64);
        let outer = mesh.n_r() - 1;
        let mut sum = T::zero();
        let mut sum_sq = T::zero();
        let mut ring_volume = T::zero();
        for c in 0..mesh.cells() {
            if mesh.ring_of(c) == outer {
                ring_volume += mesh.cell_volume(c);
            }
        }
        for (x, v) in self.xs.iter().zip(&self.vs) {
            if let Some(c) = mesh.locate(x) {
                if mesh.ring_of(c) == outer {
                    let r = x.norm();
                    if r > T::zero() {
                        let vn = v.dot(x) / r;
                        sum += vn;
                        sum_sq += vn * vn;
                    }
                }
            }
        }
        let flux = sum * weight / ring_volume;
        let stderr = sum_sq.max(T::zero()).sqrt() * weight / ring_volume;
        Ok((flux, stderr))
    }

    /// Componentwise mean velocity.
    pub fn mean_velocity(&self) -> Vector<T, D> {
        let mut acc = Vector::zero();
        for v in &self.vs {
            acc += *v;
        }
        acc / cst(self.len() as f64)
    }

    /// Componentwise velocity variance around the empirical mean.
    pub fn velocity_variance(&self) -> Vector<T, D> {
        let mean = self.mean_velocity();
        let mut acc = Vector::zero();
        for v in &self.vs {
            let d = *v - mean;
            for i in 0..D {
                acc[i] += d[i] * d[i];
            }
        }
        acc / cst(self.len() as f64)
    }

    /// Normalized tensor Hermite coefficients of the empirical velocity law
    /// for total orders `1..=k_max`, with Monte Carlo standard errors.
    /// All of them vanish when the law is the unit Maxwellian.
    pub fn hermite_coefficients(&self, k_max: usize) -> Result<Vec<HermiteCoefficient<T>>> {
        if k_max == 0 || k_max > 4 {
            return Err(Error::InvalidArgument(
                "Hermite order must lie in 1..=4".into(),
            ));
        }
        let mut orders: Vec<[usize; D]> = Vec::new();
        collect_multi_indices::<D>(&mut [0; D], 0, k_max, &mut orders);
        orders.retain(|o| o.iter().sum::<usize>() >= 1);

        let n = self.len();
        let inv_n = cst::<T>(1.0 / n as f64);
        let mut acc = vec![T::zero(); orders.len()];
        let mut acc_sq = vec![T::zero(); orders.len()];
        for v in &self.vs {
            // He_0..He_4 per component, normalized by sqrt(k!).
            let mut table = [[T::zero(); 5]; D];
            for i in 0..D {
                let z = v[i];
                table[i][0] = T::one();
                table[i][1] = z;
                table[i][2] = (z * z - T::one()) / cst::<T>(2.0).sqrt();
                table[i][3] = (z * z * z - cst::<T>(3.0) * z) / cst::<T>(6.0).sqrt();
                table[i][4] =
                    (z * z * z * z - cst::<T>(6.0) * z * z + cst(3.0)) / cst::<T>(24.0).sqrt();
            }
            for (slot, order) in orders.iter().enumerate() {
                let mut prod = T::one();
                for i in 0..D {
                    prod *= table[i][order[i]];
                }
                acc[slot] += prod;
                acc_sq[slot] += prod * prod;
            }
        }
        Ok(orders
            .iter()
            .zip(acc.iter().zip(&acc_sq))
            .map(|(order, (&s, &sq))| {
                let mean = s * inv_n;
                let var = (sq * inv_n - mean * mean).max(T::zero());
                HermiteCoefficient {
                    orders: order.to_vec(),
                    value: mean,
                    stderr: (var * inv_n).sqrt(),
                }
            })
            .collect())
    }

    /// Scalar proxy for the distance of the velocity law from the
    /// Maxwellian: the l2 norm of the Hermite coefficients up to `k_max`.
    pub fn maxwellian_deviation(&self, k_max: usize) -> Result<T> {
        let coeffs = self.hermite_coefficients(k_max)?;
        Ok(coeffs
            .iter()
            .map(|c| c.value * c.value)
            .sum::<T>()
            .sqrt())
    }

    /// Monitorable surrogate for the weighted L2 energy: the quadratic
    /// density term plus the squared Maxwellian-deviation proxy.
    pub fn weighted_energy(&self, mesh: &Mesh<T>) -> Result<T> {
        let rho = self.density(mesh)?;
        let mut acc = T::zero();
        for c in 0..mesh.cells() {
            let v = rho.values()[c];
            acc += v * v * mesh.cell_volume(c);
        }
        let dev = self.maxwellian_deviation(4)?;
        Ok(acc + dev * dev)
    }
}

#[derive(Clone, Debug)]
pub struct HermiteCoefficient<T> {
    /// Per-component Hermite orders of the tensor basis element.
    pub orders: Vec<usize>,
    pub value: T,
    pub stderr: T,
}

fn collect_multi_indices<const D: usize>(
    current: &mut [usize; D],
    pos: usize,
    budget: usize,
    out: &mut Vec<[usize; D]>,
) {
    if pos == D {
        out.push(*current);
        return;
    }
    for k in 0..=budget {
        current[pos] = k;
        collect_multi_indices::<D>(current, pos + 1, budget - k, out);
    }
    current[pos] = 0;
}

#[inline]
fn ou_half_step<T: Real, const D: usize>(
    v: &mut Vector<T, D>,
    decay: T,
    noise: T,
    rng: &mut ChaCha8Rng,
) {
    for i in 0..D {
        v[i] = v[i] * decay + noise * T::standard_normal(rng);
    }
}

/// Ballistic transport over path length `|v| * flight`, reflecting
/// specularly; the velocity vector itself is reflected at each hit.
fn transport<T: Real, const D: usize>(
    domain: &Domain<T, D>,
    mode: BoundaryMode,
    x: &mut Vector<T, D>,
    v: &mut Vector<T, D>,
    flight: T,
) -> Result<()> {
    if mode == BoundaryMode::FreeSpace {
        *x += *v * flight;
        return Ok(());
    }
    let speed = v.norm();
    if !(speed > T::zero()) {
        return Ok(());
    }
    let mut dir = *v / speed;
    let mut remaining = speed * flight;
    let mut bounces = 0usize;
    while remaining > T::zero() {
        let (s, hit) = domain.ray_exit(x, &dir)?;
        if s > remaining {
            *x += dir * remaining;
            break;
        }
        bounces += 1;
        if bounces > TRANSPORT_CAP {
            return Err(Error::Integration(
                "transport reflection cap exceeded".into(),
            ));
        }
        *x = domain.project_to_boundary(&hit);
        let n = domain.normal_at(x)?;
        dir = reflect_across(&dir, &n);
        remaining -= s;
    }
    *v = dir * speed;
    if domain.zeta(x) > cst(1e-9) {
        return Err(Error::Integration(format!(
            "particle escaped the domain (zeta = {:?})",
            domain.zeta(x).to_f64()
        )));
    }
    Ok(())
}
