//! Polar cell-centered meshes on disks/balls and cell-averaged fields.
//!
//! Cells are the tensor product of `n_r` uniform radial rings with `n_theta`
//! uniform sectors (`n_theta = 1` gives the radial-only mode, which also
//! serves radially symmetric data in dimension 3). The innermost ring
//! touches `r = 0` and exchanges flux only through its outer edge, so the
//! circular boundary carries the zero-flux condition exactly.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::scalar::{cst, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh<T> {
    n_r: usize,
    n_theta: usize,
    radius: T,
    dim: usize,
    r_edges: Vec<T>,
    /// Volume of one cell in each ring (all sectors of a ring are equal).
    ring_volumes: Vec<T>,
}

impl<T: Real> Mesh<T> {
    /// Full polar mesh of the unit disk.
    pub fn polar_disk(n_r: usize, n_theta: usize) -> Result<Self> {
        Self::polar(n_r, n_theta, T::one())
    }

    /// Full polar mesh of a disk with the given radius (dimension 2).
    pub fn polar(n_r: usize, n_theta: usize, radius: T) -> Result<Self> {
        if n_r == 0 || n_theta == 0 {
            return Err(Error::InvalidArgument("mesh must have cells".into()));
        }
        if !(radius > T::zero()) {
            return Err(Error::InvalidArgument("mesh radius must be positive".into()));
        }
        Ok(Self::build(n_r, n_theta, radius, 2))
    }

    /// Radial-only mesh (rings/shells) in dimension 2 or 3.
    pub fn radial(n_r: usize, radius: T, dim: usize) -> Result<Self> {
        if n_r == 0 {
            return Err(Error::InvalidArgument("mesh must have cells".into()));
        }
        if !(radius > T::zero()) {
            return Err(Error::InvalidArgument("mesh radius must be positive".into()));
        }
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidArgument("mesh dimension must be 2 or 3".into()));
        }
        Ok(Self::build(n_r, 1, radius, dim))
    }

    fn build(n_r: usize, n_theta: usize, radius: T, dim: usize) -> Self {
        let r_edges: Vec<T> = (0..=n_r)
            .map(|i| radius * cst::<T>(i as f64) / cst(n_r as f64))
            .collect();
        let sector = cst::<T>(2.0) * T::PI() / cst(n_theta as f64);
        let ring_volumes = (0..n_r)
            .map(|i| {
                let (lo, hi) = (r_edges[i], r_edges[i + 1]);
                match dim {
                    2 => (hi * hi - lo * lo) * sector * cst(0.5),
                    _ => {
                        (hi * hi * hi - lo * lo * lo) * cst::<T>(4.0 / 3.0) * T::PI()
                            / cst(n_theta as f64)
                    }
                }
            })
            .collect();
        Mesh {
            n_r,
            n_theta,
            radius,
            dim,
            r_edges,
            ring_volumes,
        }
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn r_edges(&self) -> &[T] {
        &self.r_edges
    }

    #[inline]
    pub fn cell_index(&self, ring: usize, sector: usize) -> usize {
        ring * self.n_theta + sector
    }

    #[inline]
    pub fn ring_of(&self, cell: usize) -> usize {
        cell / self.n_theta
    }

    /// Cell center in polar coordinates `(r, theta)`.
    pub fn cell_center(&self, cell: usize) -> (T, T) {
        let ring = cell / self.n_theta;
        let sector = cell % self.n_theta;
        let r = (self.r_edges[ring] + self.r_edges[ring + 1]) * cst(0.5);
        let dtheta = cst::<T>(2.0) * T::PI() / cst(self.n_theta as f64);
        let theta = (cst::<T>(sector as f64) + cst(0.5)) * dtheta;
        (r, theta)
    }

    pub fn cell_volume(&self, cell: usize) -> T {
        self.ring_volumes[cell / self.n_theta]
    }

    pub fn total_volume(&self) -> T {
        let mut acc = T::zero();
        for &v in &self.ring_volumes {
            acc += v * cst(self.n_theta as f64);
        }
        acc
    }

    /// Cell containing `x`, or `None` outside the mesh. Points within a few
    /// ulps beyond the rim (reflected particles parked on the boundary)
    /// are clamped into the outer ring.
    pub fn locate<const D: usize>(&self, x: &Vector<T, D>) -> Option<usize> {
        debug_assert_eq!(self.dim, D, "mesh dimension mismatch");
        let r = x.norm();
        if r > self.radius * (T::one() + cst(1e-12)) {
            return None;
        }
        let dr = self.radius / cst(self.n_r as f64);
        let ring = (r / dr)
            .floor()
            .to_f64()
            .map(|v| (v as usize).min(self.n_r - 1))
            .unwrap_or(self.n_r - 1);
        if self.n_theta == 1 {
            return Some(ring);
        }
        let theta = x[1].atan2(x[0]);
        let two_pi = cst::<T>(2.0) * T::PI();
        let theta = if theta < T::zero() { theta + two_pi } else { theta };
        let dtheta = two_pi / cst(self.n_theta as f64);
        let sector = (theta / dtheta)
            .floor()
            .to_f64()
            .map(|v| (v as usize).min(self.n_theta - 1))
            .unwrap_or(0);
        Some(self.cell_index(ring, sector))
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.n_r == other.n_r
            && self.n_theta == other.n_theta
            && self.dim == other.dim
            && (self.radius - other.radius).abs() <= T::epsilon() * self.radius
    }
}

/// Cell-averaged scalar field on a [`Mesh`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    mesh: Mesh<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(mesh: Mesh<T>) -> Self {
        let values = vec![T::zero(); mesh.cells()];
        ScalarField { mesh, values }
    }

    pub fn from_values(mesh: Mesh<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.cells() {
            return Err(Error::InvalidArgument(
                "value vector does not match the mesh".into(),
            ));
        }
        Ok(ScalarField { mesh, values })
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// `sum_i value_i * volume_i`.
    pub fn integral(&self) -> T {
        let mut acc = T::zero();
        for (c, &v) in self.values.iter().enumerate() {
            acc += v * self.mesh.cell_volume(c);
        }
        acc
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }
}
