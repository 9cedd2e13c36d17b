//! Small fixed-dimension vectors and matrices.
//!
//! The domain dimension is 2 or 3; a hand-rolled `[T; D]` newtype keeps the
//! hot loops free of indirection and works for any [`Real`] scalar.

use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::scalar::Real;

/// Column vector of dimension `D`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vector<T, const D: usize>(pub [T; D]);

/// Row-major square matrix of dimension `D`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix<T, const D: usize>(pub [[T; D]; D]);

impl<T: Real, const D: usize> Vector<T, D> {
    pub fn zero() -> Self {
        Vector([T::zero(); D])
    }

    pub fn from_fn(mut f: impl FnMut(usize) -> T) -> Self {
        let mut out = [T::zero(); D];
        for (i, o) in out.iter_mut().enumerate() {
            *o = f(i);
        }
        Vector(out)
    }

    pub fn dot(&self, other: &Self) -> T {
        let mut acc = T::zero();
        for i in 0..D {
            acc += self.0[i] * other.0[i];
        }
        acc
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// Unit vector in the same direction. Caller guarantees a nonzero norm.
    pub fn normalized(&self) -> Self {
        *self / self.norm()
    }

    pub fn distance(&self, other: &Self) -> T {
        (*self - *other).norm()
    }

    /// Outer product `self ⊗ other`.
    pub fn outer(&self, other: &Self) -> Matrix<T, D> {
        let mut m = Matrix::zero();
        for i in 0..D {
            for j in 0..D {
                m.0[i][j] = self.0[i] * other.0[j];
            }
        }
        m
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.0.iter()
    }
}

impl<T: Real> Vector<T, 2> {
    /// Signed area of the pair, `self.x * other.y - self.y * other.x`.
    pub fn cross(&self, other: &Self) -> T {
        self.0[0] * other.0[1] - self.0[1] * other.0[0]
    }
}

impl<T, const D: usize> Index<usize> for Vector<T, D> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T, const D: usize> IndexMut<usize> for Vector<T, D> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

impl<T: Real, const D: usize> Add for Vector<T, D> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for i in 0..D {
            self.0[i] += rhs.0[i];
        }
        self
    }
}

impl<T: Real, const D: usize> Sub for Vector<T, D> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for i in 0..D {
            self.0[i] -= rhs.0[i];
        }
        self
    }
}

impl<T: Real, const D: usize> AddAssign for Vector<T, D> {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..D {
            self.0[i] += rhs.0[i];
        }
    }
}

impl<T: Real, const D: usize> SubAssign for Vector<T, D> {
    fn sub_assign(&mut self, rhs: Self) {
        for i in 0..D {
            self.0[i] -= rhs.0[i];
        }
    }
}

impl<T: Real, const D: usize> Mul<T> for Vector<T, D> {
    type Output = Self;
    fn mul(mut self, rhs: T) -> Self {
        for i in 0..D {
            self.0[i] *= rhs;
        }
        self
    }
}

impl<T: Real, const D: usize> Div<T> for Vector<T, D> {
    type Output = Self;
    fn div(mut self, rhs: T) -> Self {
        for i in 0..D {
            self.0[i] /= rhs;
        }
        self
    }
}

impl<T: Real, const D: usize> Neg for Vector<T, D> {
    type Output = Self;
    fn neg(mut self) -> Self {
        for i in 0..D {
            self.0[i] = -self.0[i];
        }
        self
    }
}

impl<T: Real, const D: usize> Matrix<T, D> {
    pub fn zero() -> Self {
        Matrix([[T::zero(); D]; D])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..D {
            m.0[i][i] = T::one();
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..D {
            for j in 0..D {
                m.0[i][j] = self.0[j][i];
            }
        }
        m
    }

    pub fn trace(&self) -> T {
        let mut acc = T::zero();
        for i in 0..D {
            acc += self.0[i][i];
        }
        acc
    }

    pub fn mul_vec(&self, v: &Vector<T, D>) -> Vector<T, D> {
        Vector::from_fn(|i| {
            let mut acc = T::zero();
            for j in 0..D {
                acc += self.0[i][j] * v.0[j];
            }
            acc
        })
    }

    pub fn mul_mat(&self, rhs: &Self) -> Self {
        let mut m = Self::zero();
        for i in 0..D {
            for j in 0..D {
                let mut acc = T::zero();
                for k in 0..D {
                    acc += self.0[i][k] * rhs.0[k][j];
                }
                m.0[i][j] = acc;
            }
        }
        m
    }

    pub fn frobenius_norm(&self) -> T {
        let mut acc = T::zero();
        for row in &self.0 {
            for &e in row {
                acc += e * e;
            }
        }
        acc.sqrt()
    }

    /// Entry-wise maximum absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for i in 0..D {
            for j in 0..D {
                worst = worst.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        worst
    }
}

impl<T: Real, const D: usize> Add for Matrix<T, D> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for i in 0..D {
            for j in 0..D {
                self.0[i][j] += rhs.0[i][j];
            }
        }
        self
    }
}

impl<T: Real, const D: usize> Sub for Matrix<T, D> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for i in 0..D {
            for j in 0..D {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
        self
    }
}

impl<T: Real, const D: usize> Mul<T> for Matrix<T, D> {
    type Output = Self;
    fn mul(mut self, rhs: T) -> Self {
        for i in 0..D {
            for j in 0..D {
                self.0[i][j] *= rhs;
            }
        }
        self
    }
}

impl<T, const D: usize> Index<(usize, usize)> for Matrix<T, D> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.0[i][j]
    }
}

impl<T, const D: usize> IndexMut<(usize, usize)> for Matrix<T, D> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.0[i][j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_ops() {
        let a = Vector([1.0, 2.0]);
        let b = Vector([3.0, -1.0]);
        assert_eq!((a + b).0, [4.0, 1.0]);
        assert_eq!(a.dot(&b), 1.0);
        assert_eq!(a.cross(&b), -7.0);
        assert!((Vector([3.0f64, 4.0]).norm() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn matrix_ops() {
        let m = Matrix([[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(m.trace(), 5.0);
        assert_eq!(m.transpose().0, [[1.0, 3.0], [2.0, 4.0]]);
        let v = Vector([1.0, 1.0]);
        assert_eq!(m.mul_vec(&v).0, [3.0, 7.0]);
        let id = Matrix::<f64, 2>::identity();
        assert_eq!(m.mul_mat(&id).0, m.0);
    }

    #[test]
    fn generic_over_f32() {
        let a: Vector<f32, 3> = Vector([1.0, 2.0, 2.0]);
        assert!((a.norm() - 3.0).abs() < 1e-6);
    }
}
